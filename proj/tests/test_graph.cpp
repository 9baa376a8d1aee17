#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>

#include "doctest.h"
#include "hsgt/graph.hpp"
#include "oracles.hpp"

using namespace hsgt;

namespace {

Graph path_graph(NodeId n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return load_edge_list(e, n);
}

}  // namespace

TEST_CASE("load_edge_list canonicalizes input") {
  SUBCASE("empty edge set") {
    Graph g = load_edge_list({}, 3);
    CHECK(g.num_nodes() == 3);
    CHECK(g.num_edges() == 0);
    for (NodeId v = 0; v < 3; ++v) CHECK(g.degree(v) == 0);
  }
  SUBCASE("duplicates, both orientations, self-loops") {
    std::vector<std::pair<NodeId, NodeId>> e{{0, 1}, {1, 0}, {1, 1}, {1, 2}};
    Graph g = load_edge_list(e, 3);
    CHECK(g.num_edges() == 2);
    CHECK(g.degree(0) == 1);
    CHECK(g.degree(1) == 2);
    CHECK(g.degree(2) == 1);
    CHECK(g.edge_list() ==
          std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {1, 2}});
  }
  SUBCASE("path adjacency") {
    Graph g = path_graph(4);
    auto n1 = g.neighbors(1);
    CHECK(std::vector<NodeId>(n1.begin(), n1.end()) ==
          std::vector<NodeId>{0, 2});
  }
  SUBCASE("id out of range is an input error") {
    std::vector<std::pair<NodeId, NodeId>> e{{0, 3}};
    CHECK_THROWS_AS(load_edge_list(e, 3), input_error);
  }
}

TEST_CASE("k_hop_neighborhood") {
  Graph g = path_graph(4);
  CHECK(k_hop_neighborhood(g, 0, 2) == std::vector<NodeId>{1, 2});
  CHECK(k_hop_neighborhood(g, 0, 0).empty());
  CHECK(k_hop_neighborhood(g, 1, 1) == std::vector<NodeId>{0, 2});
}

TEST_CASE("truncated_spd") {
  SUBCASE("path with cap") {
    Graph g = path_graph(4);
    std::vector<NodeId> src{0}, tgt{0, 1, 2, 3};
    auto d = truncated_spd(g, src, tgt, 2);
    CHECK(d == std::vector<int>{0, 1, 2, kSpdAbsent});
  }
  SUBCASE("single node is reflexive") {
    Graph g = load_edge_list({}, 1);
    std::vector<NodeId> v{0};
    CHECK(truncated_spd(g, v, v, 5) == std::vector<int>{0});
  }
  SUBCASE("disconnected pair is absent") {
    Graph g = load_edge_list({}, 2);
    std::vector<NodeId> s{0}, t{1};
    CHECK(truncated_spd(g, s, t, 10) == std::vector<int>{kSpdAbsent});
  }
}

TEST_CASE("induced_subgraph") {
  Graph g = path_graph(4);
  SUBCASE("drops edges with a missing endpoint") {
    std::vector<NodeId> nodes{0, 1, 3};
    auto sub = induced_subgraph(g, nodes);
    CHECK(sub.graph.num_nodes() == 3);
    CHECK(sub.graph.edge_list() ==
          std::vector<std::pair<NodeId, NodeId>>{{0, 1}});
    CHECK(sub.to_old == nodes);
    CHECK(sub.to_new.at(3) == 2);
  }
  SUBCASE("full node set is an isomorphic copy") {
    std::vector<NodeId> nodes{0, 1, 2, 3};
    auto sub = induced_subgraph(g, nodes);
    CHECK(sub.graph.edge_list() == g.edge_list());
  }
  SUBCASE("singleton") {
    std::vector<NodeId> nodes{2};
    auto sub = induced_subgraph(g, nodes);
    CHECK(sub.graph.num_nodes() == 1);
    CHECK(sub.graph.num_edges() == 0);
  }
}

TEST_CASE("neighborhood and SPD match the dense oracles on random graphs") {
  Rng rng(42);
  std::uniform_int_distribution<NodeId> size(2, 50);
  std::uniform_real_distribution<double> density(0.02, 0.3);
  std::uniform_int_distribution<int> depth(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    NodeId n = size(rng);
    Graph g = oracle::random_graph(n, density(rng), rng);
    int cap = depth(rng);
    auto fw = oracle::floyd_warshall(g);
    std::vector<NodeId> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    auto spd = truncated_spd(g, all, all, cap);
    for (NodeId i = 0; i < n; ++i) {
      auto dist = oracle::bfs_dists(g, i);
      auto hop = k_hop_neighborhood(g, i, cap);
      std::vector<NodeId> expected;
      for (NodeId j = 0; j < n; ++j)
        if (j != i && dist[j] <= cap) expected.push_back(j);
      CHECK(hop == expected);
      for (NodeId j = 0; j < n; ++j) {
        int want = fw[i * n + j] <= cap ? fw[i * n + j] : kSpdAbsent;
        CHECK(spd[i * n + j] == want);
      }
    }
  }
}

TEST_CASE("induced subgraph preserves in-subset degrees") {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    Graph g = oracle::random_graph(30, 0.15, rng);
    std::vector<NodeId> nodes;
    for (NodeId v = 0; v < 30; ++v)
      if (v % 3 != trial % 3) nodes.push_back(v);
    auto sub = induced_subgraph(g, nodes);
    auto adj = oracle::dense_adjacency(g);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      int want = 0;
      for (NodeId u : nodes)
        if (adj[static_cast<std::int64_t>(nodes[i]) * 30 + u]) ++want;
      CHECK(sub.graph.degree(static_cast<NodeId>(i)) == want);
    }
  }
}

TEST_CASE("load_edge_list is idempotent over export") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g = oracle::random_graph(25, 0.2, rng);
    auto exported = g.edge_list();
    Graph again = load_edge_list(exported, g.num_nodes());
    CHECK(again.edge_list() == exported);
    CHECK(again.num_nodes() == g.num_nodes());
  }
}

TEST_CASE("edge/feature/label/split files round-trip") {
  namespace fs = std::filesystem;
  const std::string dir = "graph_io_test_tmp";
  fs::create_directories(dir);
  Rng rng(3);
  Graph g = oracle::random_graph(12, 0.3, rng);
  write_edge_file(dir + "/edges.tsv", g);
  NodeId max_id = -1;
  auto edges = read_edge_file(dir + "/edges.tsv", &max_id);
  CHECK(load_edge_list(edges, 12).edge_list() == g.edge_list());

  FeatureMatrix x(12, 3);
  std::uniform_real_distribution<double> unit(-1, 1);
  for (auto& v : x.data) v = unit(rng);
  write_feature_file(dir + "/features.tsv", x);
  auto x2 = read_feature_file(dir + "/features.tsv", 12);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    CHECK(x2.data[i] == doctest::Approx(x.data[i]).epsilon(1e-15));

  std::vector<std::int32_t> labels(12);
  for (int i = 0; i < 12; ++i) labels[i] = i % 4;
  write_label_file(dir + "/labels.tsv", labels);
  CHECK(read_label_file(dir + "/labels.tsv", 12) == labels);

  std::vector<Split> split(12, Split::Test);
  split[0] = Split::Train;
  split[5] = Split::Valid;
  write_split_file(dir + "/splits.tsv", split);
  auto s2 = read_split_file(dir + "/splits.tsv", 12);
  CHECK(std::equal(split.begin(), split.end(), s2.begin()));
  fs::remove_all(dir);
}
