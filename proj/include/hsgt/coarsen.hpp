#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsgt/graph.hpp"

namespace hsgt {

/// Surjective assignment of fine nodes to coarse clusters.
struct PartitionMapping {
  std::vector<NodeId> phi;  // fine node -> cluster id in [0, num_clusters)
  NodeId num_clusters = 0;

  /// Preimage lists, sorted within each cluster.
  std::vector<std::vector<NodeId>> preimages() const;
  void validate(NodeId num_fine_nodes) const;
};

enum class CoarsenMethod { Multilevel, Random, Import };

const char* coarsen_method_name(CoarsenMethod m);
CoarsenMethod parse_coarsen_method(const std::string& s);

/// Simplified multilevel partitioner: repeated heavy-edge matching (ties to
/// the lower node id) contracts supernodes until the cluster target is
/// reached, then greedy boundary refinement reduces edge-cut under a 2x
/// balance cap. Clusters with no topology signal (isolated supernodes) are
/// folded into the smallest clusters.
PartitionMapping partition_multilevel(const Graph& g, NodeId target_clusters,
                                      std::uint64_t seed);

/// Uniformly random balanced assignment (ablation baseline).
PartitionMapping partition_random(const Graph& g, NodeId target_clusters,
                                  std::uint64_t seed);

/// Coarse edge (a, b), a != b, exists iff some fine edge crosses the two
/// preimages. Coarse self-loops are dropped.
Graph coarsen_graph(const Graph& g, const PartitionMapping& phi);

/// Row a is the mean of the preimage's feature rows.
FeatureMatrix init_coarse_features(const FeatureMatrix& x,
                                   const PartitionMapping& phi);

/// Number of edges crossing between clusters.
std::int64_t edge_cut(const Graph& g, const PartitionMapping& phi);

/// The chain {G^0 .. G^H}: levels[0] is the input graph/features, labels and
/// splits exist only at level 0.
struct Hierarchy {
  std::vector<Graph> graphs;
  std::vector<FeatureMatrix> features;
  std::vector<PartitionMapping> mappings;  // mappings[l] maps level l to l+1
  std::vector<double> ratios;
  CoarsenMethod method = CoarsenMethod::Multilevel;
  std::uint64_t seed = 0;

  int levels() const { return static_cast<int>(graphs.size()) - 1; }
};

/// Recursively partition / coarsen / average. Cluster counts follow
/// |V^l| = ceil(ratio_l * |V^{l-1}|). For the Import method, per-level
/// partition files `part_l<level>.tsv` are read from `import_dir` and the
/// stored ratios are the realized ones.
Hierarchy build_hierarchy(const LabeledDataset& ds,
                          std::span<const double> ratios, CoarsenMethod method,
                          std::uint64_t seed,
                          const std::string& import_dir = {});

// Partition files: one `node_id<TAB>cluster_id` line per fine node.
void write_partition_file(const std::string& path, const PartitionMapping& m);
PartitionMapping read_partition_file(const std::string& path,
                                     NodeId num_fine_nodes);

/// Writes part_l<level>.tsv per level plus hierarchy.json with per-level
/// node counts, ratios, method, and seed.
void write_hierarchy_files(const std::string& dir, const Hierarchy& h);

}  // namespace hsgt
