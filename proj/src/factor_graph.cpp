#include "pmugbp/factor_graph.hpp"

#include <algorithm>
#include <map>
#include <utility>

namespace pmugbp {

namespace {

Mat2 modeled_covariance(const Mat2& sigma, CovarianceModel model) {
  if (model == CovarianceModel::Full) return sigma;
  return sigma.diagonal().asDiagonal();
}

void orient(PairwiseFactor& f) {
  if (f.variables.size() == 2 && f.variables[0] > f.variables[1]) {
    std::swap(f.variables[0], f.variables[1]);
    std::swap(f.blocks[0], f.blocks[1]);
  }
}

void link(FactorGraph& g) {
  for (auto& v : g.variables) {
    v.unary.clear();
    v.edges.clear();
  }
  for (std::size_t k = 0; k < g.unary.size(); ++k) {
    g.unary[k].id = static_cast<Index>(k);
    g.variables[static_cast<std::size_t>(g.unary[k].variable)].unary.push_back(static_cast<Index>(k));
  }
  g.edges.clear();
  g.edge_offset.clear();
  for (std::size_t k = 0; k < g.pairwise.size(); ++k) {
    auto& f = g.pairwise[k];
    f.id = static_cast<Index>(k);
    g.edge_offset.push_back(static_cast<Index>(g.edges.size()));
    for (Index p = 0; p < f.arity(); ++p) {
      const Index var = f.variables[static_cast<std::size_t>(p)];
      g.variables[static_cast<std::size_t>(var)].edges.push_back(static_cast<Index>(g.edges.size()));
      g.edges.push_back(Edge{f.id, p, var});
    }
  }
}

}  // namespace

const char* to_string(GraphMode mode) {
  switch (mode) {
    case GraphMode::Scalar: return "scalar";
    case GraphMode::Multivariate: return "multivariate";
    case GraphMode::Fusion: return "fusion";
  }
  return "?";
}

GraphMode parse_graph_mode(const std::string& text) {
  if (text == "scalar") return GraphMode::Scalar;
  if (text == "multivariate") return GraphMode::Multivariate;
  if (text == "fusion") return GraphMode::Fusion;
  throw Error(Errc::InvalidInput, "unknown graph mode '" + text + "'");
}

std::vector<Index> FactorGraph::bus_variables(Index bus) const {
  if (mode == GraphMode::Scalar) return {2 * bus, 2 * bus + 1};
  return {bus};
}

PairwiseFactor fuse_pairwise(const std::vector<PairwiseFactor>& factors) {
  if (factors.empty()) throw Error(Errc::InvalidInput, "fuse_pairwise: no factors");
  std::vector<PairwiseFactor> oriented = factors;
  for (auto& f : oriented) {
    if (f.arity() != 2) throw Error(Errc::InvalidInput, "fuse_pairwise: factor is not pairwise");
    orient(f);
  }
  const auto pair = oriented.front().variables;
  Index rows = 0;
  for (const auto& f : oriented) {
    if (f.variables != pair) throw Error(Errc::MixedPairs, "fuse_pairwise: factors span different variable pairs");
    rows += f.rows();
  }

  PairwiseFactor out;
  out.id = oriented.front().id;
  out.variables = pair;
  out.z.resize(rows);
  out.sigma = Mat::Zero(rows, rows);
  const Index cols_i = oriented.front().blocks[0].cols();
  const Index cols_j = oriented.front().blocks[1].cols();
  out.blocks = {Mat(rows, cols_i), Mat(rows, cols_j)};
  Index row = 0;
  for (const auto& f : oriented) {
    const Index r = f.rows();
    out.z.segment(row, r) = f.z;
    out.sigma.block(row, row, r, r) = f.sigma;
    out.blocks[0].middleRows(row, r) = f.blocks[0];
    out.blocks[1].middleRows(row, r) = f.blocks[1];
    out.sources.insert(out.sources.end(), f.sources.begin(), f.sources.end());
    row += r;
  }
  return out;
}

FactorGraph build_graph(const BusBranchModel& model, const std::vector<RectangularPhasor>& measurements,
                        GraphMode mode, const BuildOptions& options) {
  if (measurements.empty()) throw Error(Errc::EmptyMeasurementSet, "measurement set is empty");

  FactorGraph g;
  g.mode = mode;
  g.covariance = mode == GraphMode::Scalar ? CovarianceModel::Diagonal : options.covariance;
  g.bus_count = model.bus_count();
  const bool scalar = mode == GraphMode::Scalar;

  for (Index bus = 0; bus < model.bus_count(); ++bus) {
    if (scalar) {
      for (Index c = 0; c < 2; ++c) {
        VariableNode v;
        v.id = 2 * bus + c;
        v.bus = bus;
        v.dim = 1;
        v.component = c;
        g.variables.push_back(v);
      }
    } else {
      VariableNode v;
      v.id = bus;
      v.bus = bus;
      g.variables.push_back(v);
    }
  }

  g.sources.assign(measurements.size(), {});
  std::vector<PairwiseFactor> raw;
  for (std::size_t k = 0; k < measurements.size(); ++k) {
    const auto& meas = measurements[k];
    const auto buses = phasor_buses(model, meas.kind);
    const Mat2 sigma = modeled_covariance(meas.sigma, g.covariance);
    const auto source = static_cast<Index>(k);

    if (is_voltage(meas.kind)) {
      const Index bus = buses.front();
      if (scalar) {
        for (Index c = 0; c < 2; ++c) {
          UnaryFactor u;
          u.variable = 2 * bus + c;
          u.z = Vec::Constant(1, meas.z(c));
          u.lambda = Mat::Constant(1, 1, 1.0 / sigma(c, c));
          u.source = source;
          g.sources[k].push_back(SourceSlot{true, static_cast<Index>(g.unary.size()), 0, 1, c});
          g.unary.push_back(std::move(u));
        }
      } else {
        UnaryFactor u;
        u.variable = bus;
        u.z = meas.z;
        u.lambda = sigma.inverse();
        u.source = source;
        g.sources[k].push_back(SourceSlot{true, static_cast<Index>(g.unary.size()), 0, 2, -1});
        g.unary.push_back(std::move(u));
      }
      continue;
    }

    const auto& current = std::get<BranchCurrent>(meas.kind);
    const auto [h_from, h_to] = current_coefficients(model.branch(current.branch), current.direction);
    Index i = buses[0];
    Index j = buses[1];
    Mat2 h_i = h_from;
    Mat2 h_j = h_to;
    if (i > j) {
      std::swap(i, j);
      std::swap(h_i, h_j);
    }
    if (scalar) {
      for (Index c = 0; c < 2; ++c) {
        PairwiseFactor f;
        f.variables = {2 * i, 2 * i + 1, 2 * j, 2 * j + 1};
        f.z = Vec::Constant(1, meas.z(c));
        f.sigma = Mat::Constant(1, 1, sigma(c, c));
        f.blocks = {Mat::Constant(1, 1, h_i(c, 0)), Mat::Constant(1, 1, h_i(c, 1)),
                    Mat::Constant(1, 1, h_j(c, 0)), Mat::Constant(1, 1, h_j(c, 1))};
        f.sources = {source};
        g.sources[k].push_back(SourceSlot{false, static_cast<Index>(raw.size()), 0, 1, c});
        raw.push_back(std::move(f));
      }
    } else {
      PairwiseFactor f;
      f.variables = {i, j};
      f.z = meas.z;
      f.sigma = sigma;
      f.blocks = {h_i, h_j};
      f.sources = {source};
      raw.push_back(std::move(f));
    }
  }

  if (mode == GraphMode::Fusion) {
    std::map<std::pair<Index, Index>, std::size_t> group_of;
    std::vector<std::vector<PairwiseFactor>> groups;
    for (auto& f : raw) {
      const auto key = std::make_pair(f.variables[0], f.variables[1]);
      auto [it, inserted] = group_of.emplace(key, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(std::move(f));
    }
    raw.clear();
    for (const auto& group : groups) raw.push_back(fuse_pairwise(group));
  }
  g.pairwise = std::move(raw);

  if (!scalar) {
    for (std::size_t f = 0; f < g.pairwise.size(); ++f) {
      const auto& srcs = g.pairwise[f].sources;
      for (std::size_t t = 0; t < srcs.size(); ++t) {
        g.sources[static_cast<std::size_t>(srcs[t])].push_back(
            SourceSlot{false, static_cast<Index>(f), static_cast<Index>(2 * t), 2, -1});
      }
    }
  }
  link(g);
  return g;
}

GraphStats graph_stats(const FactorGraph& graph) {
  GraphStats s;
  s.variable_nodes = static_cast<Index>(graph.variables.size());
  s.factor_nodes = static_cast<Index>(graph.unary.size() + graph.pairwise.size());
  s.pairwise_edges = static_cast<Index>(graph.edges.size());
  return s;
}

void set_source(FactorGraph& graph, Index source, const RectangularPhasor& value) {
  const Mat2 sigma = modeled_covariance(value.sigma, graph.covariance);
  for (const auto& slot : graph.sources.at(static_cast<std::size_t>(source))) {
    if (slot.unary) {
      auto& u = graph.unary[static_cast<std::size_t>(slot.factor)];
      if (slot.component >= 0) {
        u.z(0) = value.z(slot.component);
        u.lambda(0, 0) = 1.0 / sigma(slot.component, slot.component);
      } else {
        u.z = value.z;
        u.lambda = sigma.inverse();
      }
      continue;
    }
    auto& f = graph.pairwise[static_cast<std::size_t>(slot.factor)];
    if (slot.component >= 0) {
      f.z(slot.row) = value.z(slot.component);
      f.sigma(slot.row, slot.row) = sigma(slot.component, slot.component);
    } else {
      f.z.segment(slot.row, 2) = value.z;
      f.sigma.block(slot.row, slot.row, 2, 2) = sigma;
    }
  }
}

void scale_source_covariance(FactorGraph& graph, Index source, double factor) {
  if (!(factor > 0.0)) throw Error(Errc::InvalidInput, "covariance scale must be positive");
  for (const auto& slot : graph.sources.at(static_cast<std::size_t>(source))) {
    if (slot.unary) {
      graph.unary[static_cast<std::size_t>(slot.factor)].lambda /= factor;
    } else {
      graph.pairwise[static_cast<std::size_t>(slot.factor)].sigma.block(slot.row, slot.row, slot.rows, slot.rows) *=
          factor;
    }
  }
}

}  // namespace pmugbp
