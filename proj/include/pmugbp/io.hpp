#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmugbp/gbp_engine.hpp"

namespace pmugbp::io {

using json = nlohmann::json;

/// Parses JSON text; syntax errors become Parse errors naming the source,
/// line and column.
json parse_json(const std::string& text, const std::string& source);
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& value);
void write_text(const std::filesystem::path& path, const std::string& text);

json network_to_json(const BusBranchModel& model);
BusBranchModel network_from_json(const json& j);
BusBranchModel read_network(const std::filesystem::path& path);

/// Measurement records reference buses by label and branches by their
/// position in the network file.
json measurements_to_json(const BusBranchModel& model, const std::vector<PolarPhasor>& phasors);
std::vector<PolarPhasor> measurements_from_json(const BusBranchModel& model, const json& j);
std::vector<PolarPhasor> read_measurements(const BusBranchModel& model, const std::filesystem::path& path);

json state_to_json(const std::vector<Vec2>& state);
std::vector<Vec2> state_from_json(const json& j);
std::vector<Vec2> read_state(const std::filesystem::path& path);

json graph_to_json(const FactorGraph& graph);
json messages_to_json(const FactorGraph& graph, const MessageStore& store);

}  // namespace pmugbp::io
