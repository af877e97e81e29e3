#pragma once

#include <string>
#include <vector>

#include "pmugbp/gbp_engine.hpp"

namespace pmugbp::cli {

/// Runs the command line; returns the process exit code (0 ok, 2 input
/// error, 3 numerical failure).
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

/// Minimum over `repeats` of the mean wall time of one synchronous
/// iteration, each repeat starting from fresh messages.
double time_iterations(const FactorGraph& graph, const SolverConfig& config, int iterations, int repeats);

}  // namespace pmugbp::cli
