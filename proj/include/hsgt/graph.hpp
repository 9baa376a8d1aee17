#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hsgt/common.hpp"

namespace hsgt {

/// Immutable simple undirected graph in CSR form. Neighbor lists are sorted,
/// free of self-loops and duplicates. Safe to share across threads.
class Graph {
 public:
  Graph() = default;
  Graph(NodeId num_nodes, std::vector<std::int64_t> offsets,
        std::vector<NodeId> neighbors)
      : num_nodes_(num_nodes),
        offsets_(std::move(offsets)),
        neighbors_(std::move(neighbors)) {}

  NodeId num_nodes() const { return num_nodes_; }
  std::int64_t num_edges() const {
    return static_cast<std::int64_t>(neighbors_.size()) / 2;
  }
  NodeId degree(NodeId v) const {
    return static_cast<NodeId>(offsets_[v + 1] - offsets_[v]);
  }
  std::span<const NodeId> neighbors(NodeId v) const {
    return {neighbors_.data() + offsets_[v],
            static_cast<std::size_t>(offsets_[v + 1] - offsets_[v])};
  }
  bool has_edge(NodeId u, NodeId v) const;

  /// Canonical (u < v) edge pairs, sorted.
  std::vector<std::pair<NodeId, NodeId>> edge_list() const;

 private:
  NodeId num_nodes_ = 0;
  std::vector<std::int64_t> offsets_{0};
  std::vector<NodeId> neighbors_;
};

/// Dense row-major feature matrix; row count matches the owning graph.
struct FeatureMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::int64_t r, std::int64_t c)
      : rows(r), cols(c), data(static_cast<std::size_t>(r * c), 0.0) {}

  double* row(std::int64_t i) { return data.data() + i * cols; }
  const double* row(std::int64_t i) const { return data.data() + i * cols; }
};

enum class Split : std::uint8_t { Train = 0, Valid = 1, Test = 2 };

const char* split_name(Split s);
Split parse_split(const std::string& s);

struct LabeledDataset {
  Graph graph;
  FeatureMatrix features;
  std::vector<std::int32_t> labels;  // class index, -1 when unlabeled
  std::vector<Split> split;
  std::int32_t num_classes = 0;
};

/// Canonicalizes an arbitrary edge list: symmetrizes, drops self-loops and
/// duplicates. Node ids must lie in [0, num_nodes).
Graph load_edge_list(std::span<const std::pair<NodeId, NodeId>> edges,
                     NodeId num_nodes);

/// Nodes u != v with BFS distance(v, u) <= depth, sorted ascending.
std::vector<NodeId> k_hop_neighborhood(const Graph& g, NodeId v, int depth);

/// Truncated shortest-path distances; entry (i, j) of the returned
/// row-major [sources x targets] matrix is the distance or kSpdAbsent when
/// it exceeds `depth` (or the pair is disconnected).
inline constexpr int kSpdAbsent = -1;
std::vector<int> truncated_spd(const Graph& g, std::span<const NodeId> sources,
                               std::span<const NodeId> targets, int depth);

struct InducedSubgraph {
  Graph graph;
  std::vector<NodeId> to_old;                  // local id -> original id
  std::unordered_map<NodeId, NodeId> to_new;   // original id -> local id
};

/// Subgraph induced by `nodes`; local ids follow the order of `nodes`.
InducedSubgraph induced_subgraph(const Graph& g, std::span<const NodeId> nodes);

// --- file formats ---------------------------------------------------------
// Edge list: one `src<TAB>dst` per line, `#` comments ignored.
// Features:  `node_id<TAB>f1 f2 ... fF`.
// Labels:    `node_id<TAB>class_index`.
// Splits:    `node_id<TAB>{train|valid|test}`.

std::vector<std::pair<NodeId, NodeId>> read_edge_file(const std::string& path,
                                                      NodeId* max_id);
void write_edge_file(const std::string& path, const Graph& g);

FeatureMatrix read_feature_file(const std::string& path, NodeId num_nodes);
void write_feature_file(const std::string& path, const FeatureMatrix& x);

std::vector<std::int32_t> read_label_file(const std::string& path,
                                          NodeId num_nodes);
void write_label_file(const std::string& path,
                      std::span<const std::int32_t> labels);

std::vector<Split> read_split_file(const std::string& path, NodeId num_nodes);
void write_split_file(const std::string& path, std::span<const Split> split);

}  // namespace hsgt
