#include "hsgt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <sstream>

namespace hsgt {

bool deterministic_mode() {
  static const bool on = [] {
    const char* v = std::getenv("HSGT_DETERMINISTIC");
    return v != nullptr && std::string(v) == "1";
  }();
  return on;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto ns = neighbors(u);
  return std::binary_search(ns.begin(), ns.end(), v);
}

std::vector<std::pair<NodeId, NodeId>> Graph::edge_list() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(static_cast<std::size_t>(num_edges()));
  for (NodeId u = 0; u < num_nodes_; ++u)
    for (NodeId v : neighbors(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

Graph load_edge_list(std::span<const std::pair<NodeId, NodeId>> edges,
                     NodeId num_nodes) {
  require(num_nodes >= 0, "load_edge_list: negative node count");
  std::vector<std::pair<NodeId, NodeId>> sym;
  sym.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    require(u >= 0 && u < num_nodes && v >= 0 && v < num_nodes,
            "load_edge_list: node id out of range: (" + std::to_string(u) +
                ", " + std::to_string(v) + ") with n=" +
                std::to_string(num_nodes));
    if (u == v) continue;  // self-loops dropped
    sym.emplace_back(u, v);
    sym.emplace_back(v, u);
  }
  std::sort(sym.begin(), sym.end());
  sym.erase(std::unique(sym.begin(), sym.end()), sym.end());

  std::vector<std::int64_t> offsets(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (auto& [u, v] : sym) offsets[static_cast<std::size_t>(u) + 1]++;
  for (NodeId i = 0; i < num_nodes; ++i) offsets[i + 1] += offsets[i];
  std::vector<NodeId> nbrs(sym.size());
  for (std::size_t i = 0; i < sym.size(); ++i) nbrs[i] = sym[i].second;
  return Graph(num_nodes, std::move(offsets), std::move(nbrs));
}

namespace {

// Truncated BFS; dist filled with -1 for unreached nodes.
void bfs_capped(const Graph& g, NodeId src, int cap, std::vector<int>& dist) {
  dist.assign(static_cast<std::size_t>(g.num_nodes()), -1);
  dist[src] = 0;
  std::deque<NodeId> frontier{src};
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop_front();
    if (dist[u] == cap) continue;
    for (NodeId w : g.neighbors(u)) {
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        frontier.push_back(w);
      }
    }
  }
}

}  // namespace

std::vector<NodeId> k_hop_neighborhood(const Graph& g, NodeId v, int depth) {
  require(depth >= 0, "k_hop_neighborhood: negative depth");
  require(v >= 0 && v < g.num_nodes(), "k_hop_neighborhood: id out of range");
  std::vector<int> dist;
  bfs_capped(g, v, depth, dist);
  std::vector<NodeId> out;
  for (NodeId u = 0; u < g.num_nodes(); ++u)
    if (u != v && dist[u] >= 0) out.push_back(u);
  return out;
}

std::vector<int> truncated_spd(const Graph& g, std::span<const NodeId> sources,
                               std::span<const NodeId> targets, int depth) {
  require(depth >= 0, "truncated_spd: negative depth");
  std::vector<int> out(sources.size() * targets.size(), kSpdAbsent);
  std::vector<int> dist;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    bfs_capped(g, sources[i], depth, dist);
    for (std::size_t j = 0; j < targets.size(); ++j)
      out[i * targets.size() + j] = dist[targets[j]];
  }
  return out;
}

InducedSubgraph induced_subgraph(const Graph& g,
                                 std::span<const NodeId> nodes) {
  InducedSubgraph sub;
  sub.to_old.assign(nodes.begin(), nodes.end());
  sub.to_new.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    NodeId v = nodes[i];
    require(v >= 0 && v < g.num_nodes(), "induced_subgraph: id out of range");
    bool fresh = sub.to_new.emplace(v, static_cast<NodeId>(i)).second;
    require(fresh, "induced_subgraph: duplicate node id in selection");
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (NodeId w : g.neighbors(nodes[i])) {
      auto it = sub.to_new.find(w);
      if (it != sub.to_new.end())
        edges.emplace_back(static_cast<NodeId>(i), it->second);
    }
  }
  sub.graph = load_edge_list(edges, static_cast<NodeId>(nodes.size()));
  return sub;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw input_error("unknown split tag: " + s);
}

// --- file io ---------------------------------------------------------------

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open file: " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open file for writing: " + path);
  return out;
}

[[noreturn]] void parse_fail(const std::string& path, std::int64_t line,
                             const std::string& what) {
  throw input_error(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::vector<std::pair<NodeId, NodeId>> read_edge_file(const std::string& path,
                                                      NodeId* max_id) {
  auto in = open_in(path);
  std::vector<std::pair<NodeId, NodeId>> edges;
  NodeId top = -1;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long u, v;
    if (!(ss >> u >> v)) parse_fail(path, lineno, "expected `src dst`");
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    top = std::max({top, static_cast<NodeId>(u), static_cast<NodeId>(v)});
  }
  if (max_id) *max_id = top;
  return edges;
}

void write_edge_file(const std::string& path, const Graph& g) {
  auto out = open_out(path);
  for (auto [u, v] : g.edge_list()) out << u << '\t' << v << '\n';
}

FeatureMatrix read_feature_file(const std::string& path, NodeId num_nodes) {
  auto in = open_in(path);
  std::string line;
  std::int64_t lineno = 0;
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(num_nodes));
  std::vector<bool> seen(static_cast<std::size_t>(num_nodes), false);
  std::int64_t width = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long id;
    if (!(ss >> id)) parse_fail(path, lineno, "expected node id");
    if (id < 0 || id >= num_nodes)
      parse_fail(path, lineno, "node id out of range: " + std::to_string(id));
    if (seen[id]) parse_fail(path, lineno, "duplicate feature row for node " +
                                               std::to_string(id));
    std::vector<double> vals;
    double x;
    while (ss >> x) vals.push_back(x);
    if (vals.empty()) parse_fail(path, lineno, "empty feature row");
    if (width < 0) width = static_cast<std::int64_t>(vals.size());
    if (static_cast<std::int64_t>(vals.size()) != width)
      parse_fail(path, lineno, "inconsistent feature width");
    for (double f : vals)
      if (!std::isfinite(f)) parse_fail(path, lineno, "non-finite feature");
    rows[id] = std::move(vals);
    seen[id] = true;
  }
  for (NodeId v = 0; v < num_nodes; ++v)
    if (!seen[v])
      throw input_error(path + ": missing feature row for node " +
                        std::to_string(v));
  FeatureMatrix x(num_nodes, width);
  for (NodeId v = 0; v < num_nodes; ++v)
    std::copy(rows[v].begin(), rows[v].end(), x.row(v));
  return x;
}

void write_feature_file(const std::string& path, const FeatureMatrix& x) {
  auto out = open_out(path);
  out.precision(17);
  for (std::int64_t i = 0; i < x.rows; ++i) {
    out << i << '\t';
    for (std::int64_t j = 0; j < x.cols; ++j)
      out << x.row(i)[j] << (j + 1 < x.cols ? " " : "");
    out << '\n';
  }
}

std::vector<std::int32_t> read_label_file(const std::string& path,
                                          NodeId num_nodes) {
  auto in = open_in(path);
  std::vector<std::int32_t> labels(static_cast<std::size_t>(num_nodes), -1);
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long id, cls;
    if (!(ss >> id >> cls)) parse_fail(path, lineno, "expected `id class`");
    if (id < 0 || id >= num_nodes)
      parse_fail(path, lineno, "node id out of range: " + std::to_string(id));
    labels[id] = static_cast<std::int32_t>(cls);
  }
  return labels;
}

void write_label_file(const std::string& path,
                      std::span<const std::int32_t> labels) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < labels.size(); ++i)
    out << i << '\t' << labels[i] << '\n';
}

std::vector<Split> read_split_file(const std::string& path, NodeId num_nodes) {
  auto in = open_in(path);
  std::vector<Split> split(static_cast<std::size_t>(num_nodes), Split::Test);
  std::vector<bool> seen(static_cast<std::size_t>(num_nodes), false);
  std::string line, tag;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long id;
    if (!(ss >> id >> tag)) parse_fail(path, lineno, "expected `id tag`");
    if (id < 0 || id >= num_nodes)
      parse_fail(path, lineno, "node id out of range: " + std::to_string(id));
    split[id] = parse_split(tag);
    seen[id] = true;
  }
  for (NodeId v = 0; v < num_nodes; ++v)
    if (!seen[v])
      throw input_error(path + ": missing split tag for node " +
                        std::to_string(v));
  return split;
}

void write_split_file(const std::string& path, std::span<const Split> split) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < split.size(); ++i)
    out << i << '\t' << split_name(split[i]) << '\n';
}

}  // namespace hsgt
