#include "hsgt/coarsen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace hsgt {

std::vector<std::vector<NodeId>> PartitionMapping::preimages() const {
  std::vector<std::vector<NodeId>> pre(static_cast<std::size_t>(num_clusters));
  for (std::size_t v = 0; v < phi.size(); ++v)
    pre[phi[v]].push_back(static_cast<NodeId>(v));
  return pre;
}

void PartitionMapping::validate(NodeId num_fine_nodes) const {
  require(static_cast<NodeId>(phi.size()) == num_fine_nodes,
          "partition mapping length mismatch");
  require(num_clusters >= 1, "partition must have at least one cluster");
  std::vector<bool> hit(static_cast<std::size_t>(num_clusters), false);
  for (NodeId c : phi) {
    require(c >= 0 && c < num_clusters, "cluster id out of range");
    hit[c] = true;
  }
  for (bool h : hit) require(h, "partition not surjective: empty cluster");
}

const char* coarsen_method_name(CoarsenMethod m) {
  switch (m) {
    case CoarsenMethod::Multilevel: return "multilevel";
    case CoarsenMethod::Random: return "random";
    case CoarsenMethod::Import: return "import";
  }
  return "?";
}

CoarsenMethod parse_coarsen_method(const std::string& s) {
  if (s == "multilevel") return CoarsenMethod::Multilevel;
  if (s == "random") return CoarsenMethod::Random;
  if (s == "import") return CoarsenMethod::Import;
  throw input_error("unknown coarsening method: " + s);
}

namespace {

// Weighted supernode graph used during contraction. Edge weights count fine
// edges between groups, node weights count fine nodes per group.
struct SuperGraph {
  std::vector<std::map<NodeId, std::int64_t>> adj;
  std::vector<std::int64_t> node_weight;

  NodeId size() const { return static_cast<NodeId>(adj.size()); }
};

SuperGraph build_super(const Graph& g, const std::vector<NodeId>& group,
                       NodeId num_groups) {
  SuperGraph s;
  s.adj.resize(static_cast<std::size_t>(num_groups));
  s.node_weight.assign(static_cast<std::size_t>(num_groups), 0);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    s.node_weight[group[v]]++;
    for (NodeId w : g.neighbors(v)) {
      if (v < w && group[v] != group[w]) {
        s.adj[group[v]][group[w]]++;
        s.adj[group[w]][group[v]]++;
      }
    }
  }
  return s;
}

// One heavy-edge matching round over the supernode graph. Visits supernodes
// in increasing id; each unmatched node grabs its heaviest unmatched
// neighbor (ties to the lower id). Returns matched pairs.
std::vector<std::tuple<std::int64_t, NodeId, NodeId>> match_round(
    const SuperGraph& s) {
  std::vector<bool> matched(static_cast<std::size_t>(s.size()), false);
  std::vector<std::tuple<std::int64_t, NodeId, NodeId>> pairs;
  for (NodeId u = 0; u < s.size(); ++u) {
    if (matched[u]) continue;
    NodeId best = -1;
    std::int64_t best_w = 0;
    for (auto [v, w] : s.adj[u]) {
      if (matched[v]) continue;
      if (w > best_w || (w == best_w && best >= 0 && v < best)) {
        best = v;
        best_w = w;
      } else if (best < 0) {
        best = v;
        best_w = w;
      }
    }
    if (best >= 0) {
      matched[u] = matched[best] = true;
      pairs.emplace_back(best_w, u, best);
    }
  }
  return pairs;
}

// Renumber groups after merging: merge[v] gives the representative group of
// group v; produces dense ids preserving representative order.
NodeId apply_merges(std::vector<NodeId>& group,
                    const std::vector<NodeId>& rep, NodeId old_count) {
  std::vector<NodeId> dense(static_cast<std::size_t>(old_count), -1);
  NodeId next = 0;
  for (NodeId c = 0; c < old_count; ++c) {
    NodeId r = rep[c];
    if (dense[r] < 0) dense[r] = next++;
  }
  for (auto& gv : group) gv = dense[rep[gv]];
  return next;
}

// Greedy boundary refinement: move nodes between clusters when the move
// strictly reduces edge-cut, subject to a 2x-of-mean size cap and cluster
// non-emptiness.
void refine(const Graph& g, std::vector<NodeId>& phi, NodeId k) {
  if (k <= 1) return;
  const std::int64_t n = g.num_nodes();
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(k), 0);
  for (NodeId c : phi) sizes[c]++;
  const std::int64_t cap = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(2.0 * n / k)));

  for (int pass = 0; pass < 8; ++pass) {
    bool moved = false;
    std::map<NodeId, std::int64_t> link;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      NodeId c = phi[v];
      if (sizes[c] <= 1) continue;
      link.clear();
      for (NodeId w : g.neighbors(v)) link[phi[w]]++;
      std::int64_t here = link.count(c) ? link[c] : 0;
      NodeId best = -1;
      std::int64_t best_gain = 0;
      for (auto [c2, w] : link) {
        if (c2 == c || sizes[c2] + 1 > cap) continue;
        std::int64_t gain = w - here;
        if (gain > best_gain) {
          best = c2;
          best_gain = gain;
        }
      }
      if (best >= 0) {
        sizes[c]--;
        sizes[best]++;
        phi[v] = best;
        moved = true;
      }
    }
    if (!moved) break;
  }
}

}  // namespace

PartitionMapping partition_multilevel(const Graph& g, NodeId target_clusters,
                                      std::uint64_t /*seed*/) {
  const NodeId n = g.num_nodes();
  require(target_clusters >= 1 && target_clusters <= n,
          "target_clusters out of range [1, |V|]");

  std::vector<NodeId> group(static_cast<std::size_t>(n));
  std::iota(group.begin(), group.end(), 0);
  NodeId count = n;

  while (count > target_clusters) {
    SuperGraph s = build_super(g, group, count);
    auto pairs = match_round(s);
    std::vector<NodeId> rep(static_cast<std::size_t>(count));
    std::iota(rep.begin(), rep.end(), 0);

    if (pairs.empty()) {
      // No edges between remaining supernodes: fold the smallest clusters
      // together (round-robin over the lightest) until the target is met.
      std::vector<NodeId> order(static_cast<std::size_t>(count));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        return s.node_weight[a] < s.node_weight[b];
      });
      NodeId over = count - target_clusters;
      for (NodeId i = 0; i < over; ++i)
        rep[order[i]] = order[over + (i % target_clusters)];
      // collapse representative chains
      for (auto& r : rep)
        while (rep[r] != r) r = rep[r];
      count = apply_merges(group, rep, count);
      break;
    }

    // Heaviest contractions first; stop exactly at the target.
    std::stable_sort(pairs.begin(), pairs.end(), [](auto& a, auto& b) {
      return std::get<0>(a) > std::get<0>(b);
    });
    NodeId budget = count - target_clusters;
    for (auto& [w, u, v] : pairs) {
      if (budget == 0) break;
      rep[std::max(u, v)] = std::min(u, v);
      --budget;
    }
    count = apply_merges(group, rep, count);
  }

  refine(g, group, count);

  PartitionMapping m{std::move(group), count};
  m.validate(n);
  return m;
}

PartitionMapping partition_random(const Graph& g, NodeId target_clusters,
                                  std::uint64_t seed) {
  const NodeId n = g.num_nodes();
  require(target_clusters >= 1 && target_clusters <= n,
          "target_clusters out of range [1, |V|]");
  std::vector<NodeId> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x7a9d));
  std::shuffle(order.begin(), order.end(), rng);
  PartitionMapping m;
  m.phi.resize(static_cast<std::size_t>(n));
  m.num_clusters = target_clusters;
  for (NodeId i = 0; i < n; ++i)
    m.phi[order[i]] = i % target_clusters;
  m.validate(n);
  return m;
}

Graph coarsen_graph(const Graph& g, const PartitionMapping& phi) {
  phi.validate(g.num_nodes());
  std::vector<std::pair<NodeId, NodeId>> coarse_edges;
  for (auto [u, v] : g.edge_list()) {
    NodeId a = phi.phi[u], b = phi.phi[v];
    if (a != b) coarse_edges.emplace_back(a, b);
  }
  return load_edge_list(coarse_edges, phi.num_clusters);
}

FeatureMatrix init_coarse_features(const FeatureMatrix& x,
                                   const PartitionMapping& phi) {
  phi.validate(static_cast<NodeId>(x.rows));
  FeatureMatrix out(phi.num_clusters, x.cols);
  std::vector<std::int64_t> counts(
      static_cast<std::size_t>(phi.num_clusters), 0);
  for (std::int64_t v = 0; v < x.rows; ++v) {
    NodeId c = phi.phi[v];
    counts[c]++;
    const double* src = x.row(v);
    double* dst = out.row(c);
    for (std::int64_t j = 0; j < x.cols; ++j) dst[j] += src[j];
  }
  for (NodeId c = 0; c < phi.num_clusters; ++c) {
    double inv = 1.0 / static_cast<double>(counts[c]);
    double* dst = out.row(c);
    for (std::int64_t j = 0; j < x.cols; ++j) dst[j] *= inv;
  }
  return out;
}

std::int64_t edge_cut(const Graph& g, const PartitionMapping& phi) {
  std::int64_t cut = 0;
  for (auto [u, v] : g.edge_list())
    if (phi.phi[u] != phi.phi[v]) ++cut;
  return cut;
}

Hierarchy build_hierarchy(const LabeledDataset& ds,
                          std::span<const double> ratios, CoarsenMethod method,
                          std::uint64_t seed, const std::string& import_dir) {
  Hierarchy h;
  h.method = method;
  h.seed = seed;
  h.graphs.push_back(ds.graph);
  h.features.push_back(ds.features);
  h.ratios.assign(ratios.begin(), ratios.end());

  for (std::size_t l = 0; l < ratios.size(); ++l) {
    const Graph& prev = h.graphs.back();
    double alpha = ratios[l];
    require(alpha > 0.0 && alpha <= 1.0,
            "coarsening ratio must lie in (0, 1]");
    NodeId k = static_cast<NodeId>(
        std::ceil(alpha * static_cast<double>(prev.num_nodes())));
    require(k >= 1, "hierarchy level collapsed to zero nodes");

    PartitionMapping phi;
    switch (method) {
      case CoarsenMethod::Multilevel:
        phi = partition_multilevel(prev, k, mix_seed(seed, l));
        break;
      case CoarsenMethod::Random:
        phi = partition_random(prev, k, mix_seed(seed, l));
        break;
      case CoarsenMethod::Import: {
        require(!import_dir.empty(), "import method needs a partition dir");
        std::string path =
            import_dir + "/part_l" + std::to_string(l + 1) + ".tsv";
        phi = read_partition_file(path, prev.num_nodes());
        h.ratios[l] = static_cast<double>(phi.num_clusters) /
                      static_cast<double>(prev.num_nodes());
        break;
      }
    }
    h.graphs.push_back(coarsen_graph(prev, phi));
    h.features.push_back(init_coarse_features(h.features.back(), phi));
    h.mappings.push_back(std::move(phi));
  }
  return h;
}

void write_partition_file(const std::string& path,
                          const PartitionMapping& m) {
  std::ofstream out(path);
  require(out.good(), "cannot open file for writing: " + path);
  for (std::size_t v = 0; v < m.phi.size(); ++v)
    out << v << '\t' << m.phi[v] << '\n';
}

PartitionMapping read_partition_file(const std::string& path,
                                     NodeId num_fine_nodes) {
  std::ifstream in(path);
  require(in.good(), "cannot open file: " + path);
  PartitionMapping m;
  m.phi.assign(static_cast<std::size_t>(num_fine_nodes), -1);
  std::string line;
  std::int64_t lineno = 0;
  NodeId max_cluster = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long id, cluster;
    require(static_cast<bool>(ss >> id >> cluster),
            path + ":" + std::to_string(lineno) + ": expected `id cluster`");
    require(id >= 0 && id < num_fine_nodes,
            path + ":" + std::to_string(lineno) + ": node id out of range");
    m.phi[id] = static_cast<NodeId>(cluster);
    max_cluster = std::max(max_cluster, static_cast<NodeId>(cluster));
  }
  m.num_clusters = max_cluster + 1;
  m.validate(num_fine_nodes);
  return m;
}

void write_hierarchy_files(const std::string& dir, const Hierarchy& h) {
  std::filesystem::create_directories(dir);
  for (int l = 0; l < h.levels(); ++l)
    write_partition_file(dir + "/part_l" + std::to_string(l + 1) + ".tsv",
                         h.mappings[l]);
  nlohmann::json j;
  j["method"] = coarsen_method_name(h.method);
  j["seed"] = h.seed;
  j["ratios"] = h.ratios;
  j["levels"] = nlohmann::json::array();
  for (std::size_t l = 0; l < h.graphs.size(); ++l)
    j["levels"].push_back({{"nodes", h.graphs[l].num_nodes()},
                           {"edges", h.graphs[l].num_edges()}});
  std::ofstream out(dir + "/hierarchy.json");
  require(out.good(), "cannot write hierarchy manifest");
  out << j.dump(2) << '\n';
}

}  // namespace hsgt
