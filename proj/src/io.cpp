#include "pmugbp/io.hpp"

#include <fstream>
#include <sstream>

namespace pmugbp::io {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidInput, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error(Errc::Parse, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::Parse, where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? field<T>(j, key, where) : fallback;
}

Index bus_of(const BusBranchModel& model, Index label, const std::string& where) {
  const auto id = model.bus_by_label(label);
  if (!id) throw Error(Errc::UnknownEndpoint, where + ": unknown bus " + std::to_string(label));
  return *id;
}

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw Error(Errc::Parse, source + ":" + std::to_string(line) + ":" + std::to_string(column) +
                                 ": invalid JSON (" + e.what() + ")");
  }
}

json read_json(const std::filesystem::path& path) { return parse_json(read_file(path), path.string()); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::InvalidInput, "cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& value) { write_text(path, value.dump(2) + "\n"); }

json network_to_json(const BusBranchModel& model) {
  json buses = json::array();
  for (const auto& b : model.buses()) buses.push_back({{"id", b.label}, {"base_kv", b.base_kv}});
  json branches = json::array();
  for (const auto& br : model.branches()) {
    branches.push_back({{"from", model.buses()[static_cast<std::size_t>(br.from)].label},
                        {"to", model.buses()[static_cast<std::size_t>(br.to)].label},
                        {"g", br.g},
                        {"b", br.b},
                        {"g_s", br.g_s},
                        {"b_s", br.b_s},
                        {"tau", br.tau},
                        {"phi", br.phi}});
  }
  return {{"buses", buses}, {"branches", branches}};
}

BusBranchModel network_from_json(const json& j) {
  if (!j.is_object() || !j.contains("buses") || !j["buses"].is_array()) {
    throw Error(Errc::Parse, "network: expected an object with a 'buses' array");
  }
  std::vector<Bus> buses;
  for (std::size_t k = 0; k < j["buses"].size(); ++k) {
    const auto& b = j["buses"][k];
    const std::string where = "network.buses[" + std::to_string(k) + "]";
    buses.push_back(Bus{static_cast<Index>(k), field<Index>(b, "id", where), field_or<double>(b, "base_kv", 0.0, where)});
  }
  auto label_to_id = [&](Index label, const std::string& where) {
    for (const auto& b : buses) {
      if (b.label == label) return b.id;
    }
    throw Error(Errc::UnknownEndpoint, where + ": unknown bus " + std::to_string(label));
  };

  std::vector<Branch> branches;
  const json empty = json::array();
  const json& list = j.contains("branches") ? j["branches"] : empty;
  if (!list.is_array()) throw Error(Errc::Parse, "network: 'branches' must be an array");
  for (std::size_t k = 0; k < list.size(); ++k) {
    const auto& b = list[k];
    const std::string where = "network.branches[" + std::to_string(k) + "]";
    const Index from = label_to_id(field<Index>(b, "from", where), where);
    const Index to = label_to_id(field<Index>(b, "to", where), where);
    const double g_s = field_or<double>(b, "g_s", 0.0, where);
    const double b_s = field_or<double>(b, "b_s", 0.0, where);
    const double tau = field_or<double>(b, "tau", 1.0, where);
    const double phi = field_or<double>(b, "phi", 0.0, where);
    if (b.contains("r") || b.contains("x")) {
      branches.push_back(Branch::from_impedance(from, to, field_or<double>(b, "r", 0.0, where),
                                                field_or<double>(b, "x", 0.0, where), g_s, b_s, tau, phi));
    } else {
      branches.push_back(Branch{from, to, field<double>(b, "g", where), field<double>(b, "b", where), g_s, b_s, tau, phi});
    }
  }
  return BusBranchModel(std::move(buses), std::move(branches));
}

BusBranchModel read_network(const std::filesystem::path& path) { return network_from_json(read_json(path)); }

json measurements_to_json(const BusBranchModel& model, const std::vector<PolarPhasor>& phasors) {
  json out = json::array();
  for (const auto& p : phasors) {
    json rec;
    if (const auto* v = std::get_if<BusVoltage>(&p.kind)) {
      rec["kind"] = "voltage";
      rec["bus"] = model.buses()[static_cast<std::size_t>(v->bus)].label;
    } else {
      const auto& c = std::get<BranchCurrent>(p.kind);
      rec["kind"] = "current";
      rec["branch"] = c.branch;
      rec["direction"] = c.direction == Direction::FromTo ? "from_to" : "to_from";
    }
    rec["z_m"] = p.z_m;
    rec["z_theta"] = p.z_theta;
    rec["var_m"] = p.var_m;
    rec["var_theta"] = p.var_theta;
    out.push_back(rec);
  }
  return out;
}

std::vector<PolarPhasor> measurements_from_json(const BusBranchModel& model, const json& j) {
  if (!j.is_array()) throw Error(Errc::Parse, "measurements: expected an array");
  std::vector<PolarPhasor> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto& rec = j[k];
    const std::string where = "measurements[" + std::to_string(k) + "]";
    PolarPhasor p;
    const auto kind = field<std::string>(rec, "kind", where);
    if (kind == "voltage") {
      p.kind = BusVoltage{bus_of(model, field<Index>(rec, "bus", where), where)};
    } else if (kind == "current") {
      const auto branch = field<Index>(rec, "branch", where);
      if (branch < 0 || branch >= model.branch_count()) {
        throw Error(Errc::UnknownEndpoint, where + ": unknown branch " + std::to_string(branch));
      }
      const auto dir = field<std::string>(rec, "direction", where);
      if (dir != "from_to" && dir != "to_from") {
        throw Error(Errc::Parse, where + ": direction must be 'from_to' or 'to_from'");
      }
      p.kind = BranchCurrent{branch, dir == "from_to" ? Direction::FromTo : Direction::ToFrom};
    } else {
      throw Error(Errc::Parse, where + ": kind must be 'voltage' or 'current'");
    }
    p.z_m = field<double>(rec, "z_m", where);
    p.z_theta = field<double>(rec, "z_theta", where);
    p.var_m = field<double>(rec, "var_m", where);
    p.var_theta = field<double>(rec, "var_theta", where);
    out.push_back(p);
  }
  return out;
}

std::vector<PolarPhasor> read_measurements(const BusBranchModel& model, const std::filesystem::path& path) {
  return measurements_from_json(model, read_json(path));
}

json state_to_json(const std::vector<Vec2>& state) {
  json out = json::array();
  for (const auto& x : state) out.push_back({x(0), x(1)});
  return out;
}

std::vector<Vec2> state_from_json(const json& j) {
  if (!j.is_array()) throw Error(Errc::Parse, "state: expected an array of [re, im] pairs");
  std::vector<Vec2> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto& x = j[k];
    if (!x.is_array() || x.size() != 2 || !x[0].is_number() || !x[1].is_number()) {
      throw Error(Errc::Parse, "state[" + std::to_string(k) + "]: expected [re, im]");
    }
    out.emplace_back(x[0].get<double>(), x[1].get<double>());
  }
  return out;
}

std::vector<Vec2> read_state(const std::filesystem::path& path) { return state_from_json(read_json(path)); }

json graph_to_json(const FactorGraph& graph) {
  json vars = json::array();
  for (const auto& v : graph.variables) {
    vars.push_back({{"id", v.id}, {"bus", v.bus}, {"dim", v.dim}, {"component", v.component}, {"unary", v.unary}, {"edges", v.edges}});
  }
  json unary = json::array();
  for (const auto& u : graph.unary) {
    unary.push_back({{"id", u.id}, {"variable", u.variable}, {"z", vector_to_json(u.z)}, {"lambda", matrix_to_json(u.lambda)}, {"source", u.source}});
  }
  json pairwise = json::array();
  for (const auto& f : graph.pairwise) {
    json blocks = json::array();
    for (const auto& b : f.blocks) blocks.push_back(matrix_to_json(b));
    pairwise.push_back({{"id", f.id}, {"variables", f.variables}, {"z", vector_to_json(f.z)}, {"sigma", matrix_to_json(f.sigma)},
                        {"blocks", blocks}, {"sources", f.sources}});
  }
  json edges = json::array();
  for (const auto& e : graph.edges) edges.push_back({{"factor", e.factor}, {"position", e.position}, {"variable", e.variable}});
  return {{"mode", to_string(graph.mode)}, {"variables", vars}, {"unary", unary}, {"pairwise", pairwise}, {"edges", edges}};
}

json messages_to_json(const FactorGraph& graph, const MessageStore& store) {
  json out = json::array();
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto to_f = store.to_factor(static_cast<Index>(e));
    const auto to_v = store.to_variable(static_cast<Index>(e));
    out.push_back({{"edge", e},
                   {"factor", graph.edges[e].factor},
                   {"variable", graph.edges[e].variable},
                   {"to_factor", {{"mean", vector_to_json(to_f.mean)}, {"precision", matrix_to_json(to_f.precision)}}},
                   {"to_variable", {{"mean", vector_to_json(to_v.mean)}, {"precision", matrix_to_json(to_v.precision)}}}});
  }
  return out;
}

}  // namespace pmugbp::io
