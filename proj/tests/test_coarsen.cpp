#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "hsgt/coarsen.hpp"
#include "hsgt/data_io.hpp"
#include "oracles.hpp"

using namespace hsgt;

namespace {

Graph path_graph(NodeId n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return load_edge_list(e, n);
}

PartitionMapping random_partition_for_test(NodeId n, NodeId k, Rng& rng) {
  // surjective but unbalanced on purpose
  PartitionMapping m;
  m.num_clusters = k;
  m.phi.resize(static_cast<std::size_t>(n));
  std::uniform_int_distribution<NodeId> pick(0, k - 1);
  for (NodeId v = 0; v < n; ++v) m.phi[v] = v < k ? v : pick(rng);
  // shuffle so the forced prefix is spread around
  std::vector<NodeId> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<NodeId> phi(static_cast<std::size_t>(n));
  for (NodeId v = 0; v < n; ++v) phi[perm[v]] = m.phi[v];
  m.phi = std::move(phi);
  return m;
}

}  // namespace

TEST_CASE("partition_multilevel on the 4-node path finds the optimal cut") {
  Graph g = path_graph(4);
  auto m = partition_multilevel(g, 2, 1);
  CHECK(m.num_clusters == 2);
  CHECK(m.phi[0] == m.phi[1]);
  CHECK(m.phi[2] == m.phi[3]);
  CHECK(m.phi[0] != m.phi[2]);
  CHECK(edge_cut(g, m) == 1);
  // exhaustive search over 2-partitions confirms 1 is the optimum
  std::int64_t best = 1000;
  for (int mask = 1; mask < 15; ++mask) {
    PartitionMapping cand;
    cand.num_clusters = 2;
    for (int v = 0; v < 4; ++v)
      cand.phi.push_back((mask >> v) & 1);
    best = std::min(best, edge_cut(g, cand));
  }
  CHECK(edge_cut(g, m) == best);
}

TEST_CASE("partition_multilevel degenerate targets") {
  Graph g = path_graph(5);
  auto identity = partition_multilevel(g, 5, 3);
  for (NodeId v = 0; v < 5; ++v) CHECK(identity.phi[v] == v);
  auto single = partition_multilevel(g, 1, 3);
  for (NodeId v = 0; v < 5; ++v) CHECK(single.phi[v] == 0);
  CHECK_THROWS_AS(partition_multilevel(g, 0, 1), input_error);
  CHECK_THROWS_AS(partition_multilevel(g, 6, 1), input_error);
}

TEST_CASE("partition_multilevel handles graphs with isolated nodes") {
  // K4 plus 6 isolated nodes
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 0; i < 4; ++i)
    for (NodeId j = i + 1; j < 4; ++j) e.emplace_back(i, j);
  Graph g = load_edge_list(e, 10);
  auto m = partition_multilevel(g, 3, 5);
  m.validate(10);
  CHECK(m.num_clusters == 3);
}

TEST_CASE("partition_random is balanced and seed-dependent") {
  Graph g = path_graph(6);
  auto m = partition_random(g, 3, 9);
  m.validate(6);
  auto pre = m.preimages();
  for (const auto& cluster : pre) CHECK(cluster.size() == 2);
  auto single = partition_random(g, 1, 9);
  for (NodeId v = 0; v < 6; ++v) CHECK(single.phi[v] == 0);
  // different seeds give different mappings with overwhelming probability
  Graph big = path_graph(40);
  bool differs = false;
  auto a = partition_random(big, 8, 1);
  for (int s = 2; s < 6 && !differs; ++s)
    differs = partition_random(big, 8, s).phi != a.phi;
  CHECK(differs);
}

TEST_CASE("coarsen_graph matches the quantified definition") {
  SUBCASE("path contracted in halves") {
    Graph g = path_graph(4);
    PartitionMapping m{{0, 0, 1, 1}, 2};
    Graph c = coarsen_graph(g, m);
    CHECK(c.num_nodes() == 2);
    CHECK(c.edge_list() == std::vector<std::pair<NodeId, NodeId>>{{0, 1}});
  }
  SUBCASE("identity mapping is isomorphic") {
    Graph g = path_graph(5);
    PartitionMapping m{{0, 1, 2, 3, 4}, 5};
    CHECK(coarsen_graph(g, m).edge_list() == g.edge_list());
  }
  SUBCASE("all-to-one drops the self-loop") {
    Graph g = path_graph(4);
    PartitionMapping m{{0, 0, 0, 0}, 1};
    Graph c = coarsen_graph(g, m);
    CHECK(c.num_nodes() == 1);
    CHECK(c.num_edges() == 0);
  }
}

TEST_CASE("init_coarse_features averages preimages") {
  SUBCASE("two-node cluster") {
    FeatureMatrix x(2, 2);
    x.row(0)[0] = 1;
    x.row(0)[1] = 3;
    x.row(1)[0] = 3;
    x.row(1)[1] = 5;
    PartitionMapping m{{0, 0}, 1};
    auto c = init_coarse_features(x, m);
    CHECK(c.row(0)[0] == doctest::Approx(2.0));
    CHECK(c.row(0)[1] == doctest::Approx(4.0));
  }
  SUBCASE("singleton cluster copies the row") {
    FeatureMatrix x(3, 1);
    x.row(0)[0] = 7;
    x.row(1)[0] = 8;
    x.row(2)[0] = 9;
    PartitionMapping m{{0, 1, 1}, 2};
    auto c = init_coarse_features(x, m);
    CHECK(c.row(0)[0] == doctest::Approx(7.0));
    CHECK(c.row(1)[0] == doctest::Approx(8.5));
  }
  SUBCASE("three clusters of sizes 1,2,3 match the summation oracle") {
    Rng rng(5);
    FeatureMatrix x(6, 4);
    std::uniform_real_distribution<double> unit(-2, 2);
    for (auto& v : x.data) v = unit(rng);
    PartitionMapping m{{0, 1, 1, 2, 2, 2}, 3};
    auto got = init_coarse_features(x, m);
    auto want = oracle::coarse_means(x, m);
    for (std::size_t i = 0; i < got.data.size(); ++i)
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("coarsening matches brute force on random graphs and mappings") {
  Rng rng(2024);
  std::uniform_int_distribution<NodeId> size(2, 40);
  std::uniform_real_distribution<double> density(0.05, 0.4);
  for (int trial = 0; trial < 50; ++trial) {
    NodeId n = size(rng);
    Graph g = oracle::random_graph(n, density(rng), rng);
    std::uniform_int_distribution<NodeId> kpick(1, n);
    auto phi = random_partition_for_test(n, kpick(rng), rng);
    Graph c = coarsen_graph(g, phi);
    auto want = oracle::coarse_edges(g, phi);
    auto got = c.edge_list();
    CHECK(std::set<std::pair<NodeId, NodeId>>(got.begin(), got.end()) ==
          want);

    FeatureMatrix x(n, 3);
    std::uniform_real_distribution<double> unit(-1, 1);
    for (auto& v : x.data) v = unit(rng);
    auto means = init_coarse_features(x, phi);
    auto oracle_means = oracle::coarse_means(x, phi);
    for (std::size_t i = 0; i < means.data.size(); ++i)
      CHECK(means.data[i] ==
            doctest::Approx(oracle_means.data[i]).epsilon(1e-10));
  }
}

TEST_CASE("size-weighted coarse feature sums equal fine column sums") {
  Rng rng(99);
  Graph g = oracle::random_graph(30, 0.2, rng);
  FeatureMatrix x(30, 5);
  std::uniform_real_distribution<double> unit(-3, 3);
  for (auto& v : x.data) v = unit(rng);
  auto phi = partition_multilevel(g, 7, 1);
  auto coarse = init_coarse_features(x, phi);
  auto pre = phi.preimages();
  for (std::int64_t j = 0; j < 5; ++j) {
    double fine = 0.0, weighted = 0.0;
    for (NodeId v = 0; v < 30; ++v) fine += x.row(v)[j];
    for (NodeId c = 0; c < 7; ++c)
      weighted += coarse.row(c)[j] * static_cast<double>(pre[c].size());
    CHECK(weighted == doctest::Approx(fine).epsilon(1e-10));
  }
}

TEST_CASE("multilevel beats random partitioning on SBM edge-cut") {
  LabeledDataset sbm = generate_sbm(4, 50, 0.2, 0.01, 0.0, 77);
  const Graph& g = sbm.graph;
  double ml_total = 0.0, rnd_total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ml_total += static_cast<double>(
        edge_cut(g, partition_multilevel(g, 4, seed)));
    rnd_total += static_cast<double>(
        edge_cut(g, partition_random(g, 4, seed)));
  }
  CHECK(ml_total / 20.0 <= rnd_total / 20.0);
}

TEST_CASE("build_hierarchy follows the ceil rule") {
  SUBCASE("Cora-sized single ratio") {
    Rng rng(4);
    LabeledDataset ds;
    ds.graph = oracle::random_graph(2708, 0.001, rng);
    ds.features = FeatureMatrix(2708, 2);
    ds.labels.assign(2708, 0);
    ds.split.assign(2708, Split::Test);
    ds.num_classes = 1;
    std::vector<double> ratios{0.05};
    Hierarchy h = build_hierarchy(ds, ratios, CoarsenMethod::Random, 1);
    CHECK(h.levels() == 1);
    CHECK(h.graphs[1].num_nodes() == 136);  // ceil(0.05 * 2708)
  }
  SUBCASE("empty ratio list is just G0") {
    LabeledDataset ds = generate_sbm(2, 5, 0.5, 0.1, 0.0, 3);
    Hierarchy h = build_hierarchy(ds, {}, CoarsenMethod::Multilevel, 1);
    CHECK(h.levels() == 0);
    CHECK(h.graphs.size() == 1);
  }
  SUBCASE("two ratios chain the ceil rule") {
    LabeledDataset ds = generate_sbm(4, 25, 0.3, 0.02, 0.0, 5);
    std::vector<double> ratios{0.1, 0.2};
    Hierarchy h = build_hierarchy(ds, ratios, CoarsenMethod::Multilevel, 1);
    CHECK(h.graphs[1].num_nodes() == 10);  // ceil(0.1 * 100)
    CHECK(h.graphs[2].num_nodes() == 2);   // ceil(0.2 * 10)
    CHECK(h.mappings.size() == 2);
  }
  SUBCASE("bad ratios are input errors") {
    LabeledDataset ds = generate_sbm(2, 5, 0.5, 0.1, 0.0, 3);
    std::vector<double> zero{0.0};
    CHECK_THROWS_AS(build_hierarchy(ds, zero, CoarsenMethod::Random, 1),
                    input_error);
    std::vector<double> over{1.5};
    CHECK_THROWS_AS(build_hierarchy(ds, over, CoarsenMethod::Random, 1),
                    input_error);
  }
}

TEST_CASE("build_hierarchy is deterministic and levels obey E1") {
  LabeledDataset ds = generate_sbm(3, 20, 0.3, 0.02, 0.1, 8);
  std::vector<double> ratios{0.2, 0.5};
  Hierarchy a = build_hierarchy(ds, ratios, CoarsenMethod::Multilevel, 42);
  Hierarchy b = build_hierarchy(ds, ratios, CoarsenMethod::Multilevel, 42);
  for (int l = 0; l <= a.levels(); ++l) {
    CHECK(a.graphs[l].edge_list() == b.graphs[l].edge_list());
    CHECK(a.features[l].data == b.features[l].data);
  }
  for (int l = 1; l <= a.levels(); ++l) {
    auto want = oracle::coarse_edges(a.graphs[l - 1], a.mappings[l - 1]);
    auto got = a.graphs[l].edge_list();
    CHECK(std::set<std::pair<NodeId, NodeId>>(got.begin(), got.end()) ==
          want);
  }
}

TEST_CASE("partition files and import round-trip") {
  namespace fs = std::filesystem;
  const std::string dir = "coarsen_io_tmp";
  LabeledDataset ds = generate_sbm(3, 10, 0.4, 0.05, 0.1, 12);
  std::vector<double> ratios{0.3};
  Hierarchy h = build_hierarchy(ds, ratios, CoarsenMethod::Multilevel, 5);
  write_hierarchy_files(dir, h);
  CHECK(fs::exists(dir + "/part_l1.tsv"));
  CHECK(fs::exists(dir + "/hierarchy.json"));

  auto m = read_partition_file(dir + "/part_l1.tsv", 30);
  CHECK(m.phi == h.mappings[0].phi);
  CHECK(m.num_clusters == h.mappings[0].num_clusters);

  Hierarchy imported =
      build_hierarchy(ds, ratios, CoarsenMethod::Import, 0, dir);
  CHECK(imported.graphs[1].edge_list() == h.graphs[1].edge_list());
  CHECK(imported.features[1].data == h.features[1].data);
  fs::remove_all(dir);
}
