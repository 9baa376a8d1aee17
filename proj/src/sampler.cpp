#include "hsgt/sampler.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>

namespace hsgt {

void SamplerConfig::validate() const {
  require(batch_size >= 1, "sampler: batch_size must be >= 1");
  require(fanout_l0 >= 0 && fanout_l0_2hop >= 0 && fanout_high >= 0,
          "sampler: fanouts must be non-negative");
  require(intra_batch_p >= 0.0 && intra_batch_p <= 1.0,
          "sampler: intra-batch probability must lie in [0, 1]");
  require(max_spd >= 0, "sampler: max SPD must be non-negative");
}

std::vector<std::vector<NodeId>> epoch_batches(const Hierarchy& h,
                                               const SamplerConfig& cfg,
                                               std::uint64_t seed) {
  cfg.validate();
  const Graph& top = h.graphs.back();
  std::vector<NodeId> order(static_cast<std::size_t>(top.num_nodes()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<NodeId>> out;
  if (cfg.full_batch) {
    out.push_back(std::move(order));
    return out;
  }
  Rng rng(mix_seed(seed, 0xe19c));
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t at = 0; at < order.size();
       at += static_cast<std::size_t>(cfg.batch_size)) {
    std::size_t end = std::min(order.size(),
                               at + static_cast<std::size_t>(cfg.batch_size));
    out.emplace_back(order.begin() + at, order.begin() + end);
  }
  return out;
}

std::vector<NodeId> expand_targets(const PartitionMapping& phi,
                                   std::span<const NodeId> targets) {
  auto pre = phi.preimages();
  std::vector<NodeId> out;
  for (NodeId t : targets) {
    require(t >= 0 && t < phi.num_clusters,
            "expand_targets: target outside coarse node set");
    out.insert(out.end(), pre[t].begin(), pre[t].end());
  }
  return out;
}

namespace {

// Up to `fanout` distinct elements drawn uniformly without replacement.
std::vector<NodeId> sample_without_replacement(std::span<const NodeId> pool,
                                               int fanout, Rng& rng) {
  std::vector<NodeId> items(pool.begin(), pool.end());
  if (static_cast<int>(items.size()) <= fanout) return items;
  // partial Fisher-Yates
  for (int i = 0; i < fanout; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
  items.resize(static_cast<std::size_t>(fanout));
  return items;
}

}  // namespace

std::vector<NodeId> sample_neighbors(const Graph& g,
                                     std::span<const NodeId> targets,
                                     int fanout_1hop, int fanout_2hop,
                                     Rng& rng) {
  require(fanout_1hop >= 0 && fanout_2hop >= 0,
          "sample_neighbors: fanouts must be non-negative");
  std::vector<std::uint8_t> is_target(
      static_cast<std::size_t>(g.num_nodes()), 0);
  for (NodeId t : targets) is_target[t] = 1;

  std::vector<NodeId> picked;
  for (NodeId t : targets) {
    if (fanout_1hop == 0) break;
    auto one_hop = sample_without_replacement(g.neighbors(t), fanout_1hop,
                                              rng);
    picked.insert(picked.end(), one_hop.begin(), one_hop.end());
    if (fanout_2hop > 0) {
      // candidate pool: neighbors of the chosen 1-hop nodes, minus the
      // target and the 1-hop picks themselves
      std::vector<NodeId> pool;
      std::sort(one_hop.begin(), one_hop.end());
      for (NodeId s : one_hop)
        for (NodeId w : g.neighbors(s))
          if (w != t &&
              !std::binary_search(one_hop.begin(), one_hop.end(), w))
            pool.push_back(w);
      std::sort(pool.begin(), pool.end());
      pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
      auto two_hop = sample_without_replacement(pool, fanout_2hop, rng);
      picked.insert(picked.end(), two_hop.begin(), two_hop.end());
    }
  }
  std::sort(picked.begin(), picked.end());
  picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
  std::erase_if(picked, [&](NodeId v) { return is_target[v] != 0; });
  return picked;
}

namespace {

void bfs_capped_local(const Graph& g, NodeId src, int cap,
                      std::vector<int>& dist) {
  dist.assign(static_cast<std::size_t>(g.num_nodes()), -1);
  dist[src] = 0;
  std::deque<NodeId> frontier{src};
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop_front();
    if (dist[u] == cap) continue;
    for (NodeId w : g.neighbors(u))
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        frontier.push_back(w);
      }
  }
}

}  // namespace

std::vector<std::uint8_t> build_receptive_fields(const Graph& subgraph,
                                                 int max_spd, double p,
                                                 bool global_field,
                                                 Rng& rng) {
  require(p >= 0.0 && p <= 1.0, "receptive fields: p must lie in [0, 1]");
  const std::int64_t n = subgraph.num_nodes();
  std::vector<std::uint8_t> fields(static_cast<std::size_t>(n * n), 0);
  if (global_field) {
    std::fill(fields.begin(), fields.end(), 1);
    return fields;
  }
  std::vector<int> dist;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (NodeId i = 0; i < n; ++i) {
    std::uint8_t* row = fields.data() + static_cast<std::int64_t>(i) * n;
    bfs_capped_local(subgraph, i, max_spd, dist);
    for (NodeId j = 0; j < n; ++j)
      if (dist[j] >= 0) row[j] = 1;
    row[i] = 1;
    if (p > 0.0) {
      for (NodeId j = 0; j < n; ++j) {
        if (j == i) continue;
        if (unit(rng) < p) row[j] = 1;
      }
    }
  }
  return fields;
}

std::vector<std::int8_t> build_bias_index(
    const Graph& subgraph, std::span<const std::uint8_t> fields,
    int max_spd) {
  const std::int64_t n = subgraph.num_nodes();
  require(static_cast<std::int64_t>(fields.size()) == n * n,
          "build_bias_index: field extent mismatch");
  require(max_spd >= 0 && max_spd <= 126, "build_bias_index: D out of range");
  std::vector<std::int8_t> bias(static_cast<std::size_t>(n * n),
                                kBiasMasked);
  std::vector<int> dist;
  for (NodeId i = 0; i < n; ++i) {
    require(fields[static_cast<std::int64_t>(i) * n + i] != 0,
            "build_bias_index: node outside its own receptive field");
    bfs_capped_local(subgraph, i, max_spd, dist);
    std::int8_t* row = bias.data() + static_cast<std::int64_t>(i) * n;
    const std::uint8_t* frow =
        fields.data() + static_cast<std::int64_t>(i) * n;
    for (NodeId j = 0; j < n; ++j) {
      if (!frow[j]) continue;
      row[j] = dist[j] >= 0 ? static_cast<std::int8_t>(dist[j])
                            : kBiasUnreached;
    }
  }
  return bias;
}

Batch sample_batch(const Hierarchy& h, std::span<const NodeId> top_targets,
                   const SamplerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int H = h.levels();
  Batch batch;
  batch.full_batch = cfg.full_batch;
  batch.levels.resize(static_cast<std::size_t>(H) + 1);

  // Top-to-bottom target closure; level l-1 targets are grouped by their
  // level-l parent so vertical segments are contiguous.
  std::vector<std::vector<NodeId>> targets(static_cast<std::size_t>(H) + 1);
  targets[H].assign(top_targets.begin(), top_targets.end());
  for (NodeId t : targets[H])
    require(t >= 0 && t < h.graphs[H].num_nodes(),
            "sample_batch: top target outside V^H");
  for (int l = H; l >= 1; --l) {
    const PartitionMapping& phi = h.mappings[l - 1];
    targets[l - 1] = expand_targets(phi, targets[l]);
    auto pre = phi.preimages();
    auto& offs = batch.levels[l].child_offsets;
    offs.assign(1, 0);
    for (NodeId t : targets[l])
      offs.push_back(offs.back() +
                     static_cast<std::int32_t>(pre[t].size()));
  }

  for (int l = 0; l <= H; ++l) {
    LevelBatch& lb = batch.levels[l];
    lb.nodes = targets[l];
    lb.num_targets = static_cast<std::int32_t>(targets[l].size());
    if (!cfg.full_batch) {
      bool sample_here = (l == 0) || cfg.sample_high_level_neighbors;
      if (sample_here) {
        Rng nbr_rng(mix_seed(seed, 17 * l + 1));
        int f1 = l == 0 ? cfg.fanout_l0 : cfg.fanout_high;
        int f2 = l == 0 ? cfg.fanout_l0_2hop : 0;
        auto extra =
            sample_neighbors(h.graphs[l], targets[l], f1, f2, nbr_rng);
        lb.nodes.insert(lb.nodes.end(), extra.begin(), extra.end());
      }
    }
    auto sub = induced_subgraph(h.graphs[l], lb.nodes);
    lb.subgraph = std::move(sub.graph);
    Rng field_rng(mix_seed(seed, 1000 + l));
    auto fields = build_receptive_fields(lb.subgraph, cfg.max_spd,
                                         cfg.intra_batch_p, cfg.full_batch,
                                         field_rng);
    lb.bias_index = build_bias_index(lb.subgraph, fields, cfg.max_spd);
  }
  return batch;
}

void dump_batch(const Batch& b, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open batch dump: " + path);
  out << "levels " << b.levels.size() << (b.full_batch ? " full-batch" : "")
      << "\n";
  for (std::size_t l = 0; l < b.levels.size(); ++l) {
    const LevelBatch& lb = b.levels[l];
    out << "level " << l << " targets " << lb.num_targets << " sampled "
        << lb.nodes.size() << "\n";
    out << "  target_ids:";
    for (std::int32_t i = 0; i < lb.num_targets; ++i)
      out << ' ' << lb.nodes[i];
    out << "\n  neighbor_ids:";
    for (std::size_t i = lb.num_targets; i < lb.nodes.size(); ++i)
      out << ' ' << lb.nodes[i];
    out << "\n  bias_index:\n";
    const std::int64_t n = lb.size();
    for (std::int64_t i = 0; i < n; ++i) {
      out << "   ";
      for (std::int64_t j = 0; j < n; ++j) {
        int v = lb.bias_index[i * n + j];
        if (v == kBiasMasked)
          out << "  .";
        else if (v == kBiasUnreached)
          out << "  -";
        else
          out << ' ' << (v < 10 ? " " : "") << v;
      }
      out << '\n';
    }
  }
}

}  // namespace hsgt
