#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsgt/coarsen.hpp"
#include "hsgt/graph.hpp"

namespace hsgt {

struct SamplerConfig {
  int batch_size = 4;
  int fanout_l0 = 5;        // 1-hop fanout for level-0 targets
  int fanout_l0_2hop = 10;  // 2-hop fanout for level-0 targets
  int fanout_high = 5;      // 1-hop fanout for targets at levels >= 1
  double intra_batch_p = 0.1;
  int max_spd = 2;
  bool full_batch = false;
  // Off under the historical-embedding ablation: high-level targets get no
  // sampled neighborhood, so the store is never consulted.
  bool sample_high_level_neighbors = true;

  void validate() const;
};

/// One level of a sampled batch. `nodes` holds global ids with the target
/// closure occupying the prefix; the induced subgraph and the bias-index
/// matrix use local ids equal to list positions.
struct LevelBatch {
  std::vector<NodeId> nodes;
  std::int32_t num_targets = 0;
  Graph subgraph;
  std::vector<std::int8_t> bias_index;  // [n x n]
  // Levels >= 1: children of target s (positions in the level-(l-1) target
  // prefix) span [child_offsets[s], child_offsets[s+1]).
  std::vector<std::int32_t> child_offsets;

  std::int32_t size() const { return static_cast<std::int32_t>(nodes.size()); }
};

struct Batch {
  std::vector<LevelBatch> levels;  // index = hierarchy level, 0..H
  bool full_batch = false;
};

/// Shuffled top-level target sets: disjoint, union = V^H, all but possibly
/// the last of size batch_size. In full-batch mode a single set covers V^H.
std::vector<std::vector<NodeId>> epoch_batches(const Hierarchy& h,
                                               const SamplerConfig& cfg,
                                               std::uint64_t seed);

/// Exact preimage union, grouped by the order of `targets` with each
/// cluster's members sorted ascending.
std::vector<NodeId> expand_targets(const PartitionMapping& phi,
                                   std::span<const NodeId> targets);

/// Per-target uniform neighbor sampling without replacement: up to
/// fanout_1hop direct neighbors plus up to fanout_2hop nodes drawn from the
/// chosen 1-hop nodes' neighborhoods. The result is sorted, deduplicated,
/// and excludes all targets.
std::vector<NodeId> sample_neighbors(const Graph& g,
                                     std::span<const NodeId> targets,
                                     int fanout_1hop, int fanout_2hop,
                                     Rng& rng);

/// Dense membership matrix [n x n]; row i is R(v_i): the node itself, its
/// D-hop neighbors within the subgraph, and per-ordered-pair coin flips with
/// probability p. In global mode every row is all-ones.
std::vector<std::uint8_t> build_receptive_fields(const Graph& subgraph,
                                                 int max_spd, double p,
                                                 bool global_field, Rng& rng);

/// Bias-index matrix from receptive fields: SPD index when reachable within
/// max_spd, kBiasUnreached for in-field pairs beyond it, and
/// kBiasMasked outside the field. The diagonal is always index 0.
std::vector<std::int8_t> build_bias_index(
    const Graph& subgraph, std::span<const std::uint8_t> fields, int max_spd);

/// Algorithm-1 batch assembly for one top-level target set.
Batch sample_batch(const Hierarchy& h, std::span<const NodeId> top_targets,
                   const SamplerConfig& cfg, std::uint64_t seed);

/// Debug dump, one text file per call.
void dump_batch(const Batch& b, const std::string& path);

}  // namespace hsgt
