#pragma once

#include <string>
#include <vector>

#include "pmugbp/power_model.hpp"

namespace pmugbp {

enum class GraphMode { Scalar, Multivariate, Fusion };

/// Full keeps the 2x2 rectangular covariance of every phasor; Diagonal drops
/// the real/imaginary cross term. Scalar graphs are always Diagonal.
enum class CovarianceModel { Full, Diagonal };

struct BuildOptions {
  CovarianceModel covariance = CovarianceModel::Full;
};

struct VariableNode {
  Index id = 0;
  Index bus = 0;
  Index dim = 2;
  Index component = -1;  // 0 (re) / 1 (im) in Scalar mode, -1 otherwise
  std::vector<Index> unary;
  std::vector<Index> edges;  // pairwise edge ids
};

struct UnaryFactor {
  Index id = 0;
  Index variable = 0;
  Vec z;
  Mat lambda;
  Index source = 0;
};

/// Linear Gaussian factor z = sum_p blocks[p] * x_{variables[p]} + e,
/// e ~ N(0, sigma). In Multivariate and Fusion graphs it couples the two bus
/// variables of a branch (variables sorted ascending) and every fused source
/// measurement owns a 2-row block of z/sigma/blocks, in input order. In
/// Scalar graphs it is one row of a current phasor and couples the four
/// scalar variables of the two buses.
struct PairwiseFactor {
  Index id = 0;
  std::vector<Index> variables;
  Vec z;
  Mat sigma;
  std::vector<Mat> blocks;
  std::vector<Index> sources;

  Index rows() const { return z.size(); }
  Index arity() const { return static_cast<Index>(variables.size()); }
};

struct Edge {
  Index factor = 0;
  Index position = 0;  // index into PairwiseFactor::variables
  Index variable = 0;
};

/// Where a source measurement lives inside the graph.
struct SourceSlot {
  bool unary = false;
  Index factor = 0;
  Index row = 0;     // first row inside the factor
  Index rows = 2;    // 2 in vector graphs, 1 in scalar graphs
  Index component = -1;  // scalar graphs: which component of the phasor
};

struct FactorGraph {
  GraphMode mode = GraphMode::Multivariate;
  CovarianceModel covariance = CovarianceModel::Full;
  Index bus_count = 0;
  std::vector<VariableNode> variables;
  std::vector<UnaryFactor> unary;
  std::vector<PairwiseFactor> pairwise;
  std::vector<Edge> edges;
  std::vector<Index> edge_offset;  // first edge id of each pairwise factor
  std::vector<std::vector<SourceSlot>> sources;

  Index edge_id(Index factor, Index position) const {
    return edge_offset[static_cast<std::size_t>(factor)] + position;
  }
  /// Variable ids of a bus: one in vector graphs, (re, im) in scalar graphs.
  std::vector<Index> bus_variables(Index bus) const;
};

FactorGraph build_graph(const BusBranchModel& model, const std::vector<RectangularPhasor>& measurements,
                        GraphMode mode, const BuildOptions& options = {});

/// Stacks pairwise factors sharing one unordered variable pair into a single
/// factor oriented to (min, max). Throws MixedPairs otherwise.
PairwiseFactor fuse_pairwise(const std::vector<PairwiseFactor>& factors);

struct GraphStats {
  Index variable_nodes = 0;
  Index factor_nodes = 0;
  Index pairwise_edges = 0;
};

GraphStats graph_stats(const FactorGraph& graph);

/// Replaces the value and covariance of one source measurement in place.
void set_source(FactorGraph& graph, Index source, const RectangularPhasor& value);

/// Multiplies the covariance of one source measurement by `factor`.
void scale_source_covariance(FactorGraph& graph, Index source, double factor);

const char* to_string(GraphMode mode);
GraphMode parse_graph_mode(const std::string& text);

}  // namespace pmugbp
