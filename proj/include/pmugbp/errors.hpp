#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pmugbp {

enum class Errc {
  InvalidInput,
  Parse,
  UnknownEndpoint,
  EmptyMeasurementSet,
  MixedPairs,
  Unobservable,
  ResultNotPD,
  AllSingular,
  SingularInnovation,
  SingularBelief,
  NotConverged,
  RankDeficient,
  NearSingular,
  PowerIterationStalled,
};

std::string_view to_string(Errc code);

/// Input errors (bad files, bad references) versus numerical failures; the
/// CLI maps the two categories onto exit codes 2 and 3.
bool is_input_error(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace pmugbp
