#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <numeric>
#include <set>

#include "doctest.h"
#include "hsgt/data_io.hpp"
#include "hsgt/sampler.hpp"
#include "oracles.hpp"

using namespace hsgt;

namespace {

Graph path_graph(NodeId n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return load_edge_list(e, n);
}

Hierarchy small_hierarchy(int blocks, int per_block, double ratio,
                          std::uint64_t seed) {
  LabeledDataset ds = generate_sbm(blocks, per_block, 0.3, 0.02, 0.1, seed);
  std::vector<double> ratios{ratio};
  return build_hierarchy(ds, ratios, CoarsenMethod::Multilevel, seed);
}

}  // namespace

TEST_CASE("epoch_batches partitions the top level") {
  LabeledDataset ds = generate_sbm(1, 5, 0.5, 0.0, 0.0, 1);
  Hierarchy h = build_hierarchy(ds, {}, CoarsenMethod::Multilevel, 1);
  SamplerConfig cfg;
  cfg.batch_size = 2;
  SUBCASE("sizes 2,2,1 and full coverage") {
    auto batches = epoch_batches(h, cfg, 3);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size() == 2);
    CHECK(batches[1].size() == 2);
    CHECK(batches[2].size() == 1);
    std::set<NodeId> all;
    for (auto& b : batches) all.insert(b.begin(), b.end());
    CHECK(all.size() == 5);
  }
  SUBCASE("batch larger than the level is a single batch") {
    cfg.batch_size = 99;
    auto batches = epoch_batches(h, cfg, 3);
    REQUIRE(batches.size() == 1);
    CHECK(batches[0].size() == 5);
  }
  SUBCASE("full-batch mode at H=0 returns every node") {
    cfg.full_batch = true;
    auto batches = epoch_batches(h, cfg, 3);
    REQUIRE(batches.size() == 1);
    CHECK(batches[0] == std::vector<NodeId>{0, 1, 2, 3, 4});
  }
}

TEST_CASE("expand_targets is the exact grouped preimage") {
  PartitionMapping phi{{0, 0, 1, 1}, 2};
  std::vector<NodeId> a{0};
  CHECK(expand_targets(phi, a) == std::vector<NodeId>{0, 1});
  CHECK(expand_targets(phi, {}).empty());
  std::vector<NodeId> all{0, 1};
  CHECK(expand_targets(phi, all) == std::vector<NodeId>{0, 1, 2, 3});
  std::vector<NodeId> reversed{1, 0};
  CHECK(expand_targets(phi, reversed) == std::vector<NodeId>{2, 3, 0, 1});
}

TEST_CASE("sample_neighbors") {
  Rng rng(5);
  SUBCASE("fanout larger than degree returns the whole neighborhood") {
    // star: center 0 with leaves 1..3
    Graph g = load_edge_list(
        std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {0, 2}, {0, 3}}, 4);
    std::vector<NodeId> targets{0};
    auto out = sample_neighbors(g, targets, 5, 0, rng);
    CHECK(out == std::vector<NodeId>{1, 2, 3});
  }
  SUBCASE("zero fanouts sample nothing") {
    Graph g = path_graph(4);
    std::vector<NodeId> targets{1};
    CHECK(sample_neighbors(g, targets, 0, 0, rng).empty());
  }
  SUBCASE("path forces the unique 1-hop and 2-hop candidates") {
    Graph g = path_graph(4);
    std::vector<NodeId> targets{0};
    auto out = sample_neighbors(g, targets, 1, 1, rng);
    CHECK(out == std::vector<NodeId>{1, 2});
  }
  SUBCASE("targets are excluded from the result") {
    Graph g = path_graph(4);
    std::vector<NodeId> targets{1, 2};
    auto out = sample_neighbors(g, targets, 5, 5, rng);
    for (NodeId t : targets)
      CHECK(std::find(out.begin(), out.end(), t) == out.end());
  }
}

TEST_CASE("build_receptive_fields") {
  Rng rng(9);
  SUBCASE("p=1 gives the whole batch") {
    Graph g = path_graph(4);
    auto f = build_receptive_fields(g, 2, 1.0, false, rng);
    CHECK(std::count(f.begin(), f.end(), 1) == 16);
  }
  SUBCASE("p=0 is exactly the D-hop ball") {
    Graph g = path_graph(4);
    auto f = build_receptive_fields(g, 2, 0.0, false, rng);
    // R(0) = {0,1,2}
    CHECK(f[0 * 4 + 0] == 1);
    CHECK(f[0 * 4 + 1] == 1);
    CHECK(f[0 * 4 + 2] == 1);
    CHECK(f[0 * 4 + 3] == 0);
  }
  SUBCASE("isolated node keeps itself") {
    Graph g = load_edge_list({}, 1);
    auto f = build_receptive_fields(g, 3, 0.0, false, rng);
    CHECK(f == std::vector<std::uint8_t>{1});
  }
  SUBCASE("global mode ignores p") {
    Graph g = path_graph(3);
    auto f = build_receptive_fields(g, 1, 0.0, true, rng);
    CHECK(std::count(f.begin(), f.end(), 1) == 9);
  }
}

TEST_CASE("build_bias_index") {
  Rng rng(2);
  SUBCASE("path row with mask") {
    Graph g = path_graph(4);
    auto fields = build_receptive_fields(g, 2, 0.0, false, rng);
    auto bias = build_bias_index(g, fields, 2);
    CHECK(bias[0 * 4 + 0] == 0);
    CHECK(bias[0 * 4 + 1] == 1);
    CHECK(bias[0 * 4 + 2] == 2);
    CHECK(bias[0 * 4 + 3] == kBiasMasked);
  }
  SUBCASE("complete graph with p=1 is all index 1 off the diagonal") {
    Graph g = load_edge_list(
        std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {0, 2}, {1, 2}}, 3);
    auto fields = build_receptive_fields(g, 2, 1.0, false, rng);
    auto bias = build_bias_index(g, fields, 2);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(bias[i * 3 + j] == (i == j ? 0 : 1));
  }
  SUBCASE("cross-component pairs under p=1 are unreached, not masked") {
    Graph g = load_edge_list(
        std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {2, 3}}, 4);
    auto fields = build_receptive_fields(g, 2, 1.0, false, rng);
    auto bias = build_bias_index(g, fields, 2);
    CHECK(bias[0 * 4 + 2] == kBiasUnreached);
    CHECK(bias[0 * 4 + 3] == kBiasUnreached);
    CHECK(bias[0 * 4 + 1] == 1);
  }
}

TEST_CASE("bias index matches the capped Floyd-Warshall oracle") {
  Rng rng(77);
  std::uniform_int_distribution<NodeId> size(2, 30);
  std::uniform_real_distribution<double> density(0.05, 0.5);
  std::uniform_real_distribution<double> pdist(0.0, 1.0);
  std::uniform_int_distribution<int> cap(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    NodeId n = size(rng);
    Graph g = oracle::random_graph(n, density(rng), rng);
    int d = cap(rng);
    double p = pdist(rng);
    auto fields = build_receptive_fields(g, d, p, false, rng);
    auto bias = build_bias_index(g, fields, d);
    auto fw = oracle::floyd_warshall(g);
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j = 0; j < n; ++j) {
        std::int8_t want;
        if (!fields[i * n + j]) {
          want = kBiasMasked;
        } else if (fw[i * n + j] <= d) {
          want = static_cast<std::int8_t>(fw[i * n + j]);
        } else {
          want = kBiasUnreached;
        }
        CHECK(bias[i * n + j] == want);
        if (fw[i * n + j] <= d)  // D-hop members are always in the field
          CHECK(fields[i * n + j] == 1);
      }
      CHECK(bias[i * n + i] == 0);
    }
  }
}

TEST_CASE("sample_batch assembles the closure") {
  SUBCASE("H=0 full batch is the whole graph") {
    LabeledDataset ds = generate_sbm(2, 3, 0.5, 0.1, 0.0, 4);
    Hierarchy h = build_hierarchy(ds, {}, CoarsenMethod::Multilevel, 1);
    SamplerConfig cfg;
    cfg.full_batch = true;
    std::vector<NodeId> all(6);
    std::iota(all.begin(), all.end(), 0);
    Batch b = sample_batch(h, all, cfg, 1);
    REQUIRE(b.levels.size() == 1);
    CHECK(b.levels[0].num_targets == 6);
    CHECK(b.levels[0].nodes == all);
  }
  SUBCASE("H=1 with zero fanouts is closure only") {
    Graph g = path_graph(4);
    LabeledDataset ds;
    ds.graph = g;
    ds.features = FeatureMatrix(4, 2);
    ds.labels.assign(4, 0);
    ds.split.assign(4, Split::Train);
    ds.num_classes = 1;
    std::vector<double> ratios{0.5};
    Hierarchy h = build_hierarchy(ds, ratios, CoarsenMethod::Multilevel, 1);
    SamplerConfig cfg;
    cfg.fanout_l0 = 0;
    cfg.fanout_l0_2hop = 0;
    cfg.fanout_high = 0;
    cfg.intra_batch_p = 0.0;
    std::vector<NodeId> top{0};
    Batch b = sample_batch(h, top, cfg, 1);
    REQUIRE(b.levels.size() == 2);
    CHECK(b.levels[1].num_targets == 1);
    auto expect = expand_targets(h.mappings[0], top);
    CHECK(b.levels[0].nodes == expect);
    CHECK(b.levels[0].num_targets ==
          static_cast<std::int32_t>(expect.size()));
    // child segment offsets tile the level-0 target prefix
    CHECK(b.levels[1].child_offsets.front() == 0);
    CHECK(b.levels[1].child_offsets.back() == b.levels[0].num_targets);
  }
  SUBCASE("level-0 target count sums the top clusters") {
    Hierarchy h = small_hierarchy(4, 25, 0.05, 11);
    SamplerConfig cfg;
    cfg.batch_size = 4;
    auto tops = epoch_batches(h, cfg, 5);
    Batch b = sample_batch(h, tops[0], cfg, 6);
    auto pre = h.mappings[0].preimages();
    std::size_t want = 0;
    for (NodeId t : tops[0]) want += pre[t].size();
    CHECK(static_cast<std::size_t>(b.levels[0].num_targets) == want);
  }
}

TEST_CASE("sampling invariants over many draws") {
  Hierarchy h = small_hierarchy(3, 20, 0.1, 21);
  SamplerConfig cfg;
  cfg.batch_size = 2;

  SUBCASE("epoch coverage: every top node is a target exactly once") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto batches = epoch_batches(h, cfg, seed);
      std::vector<int> hits(h.graphs[1].num_nodes(), 0);
      for (auto& b : batches)
        for (NodeId t : b) hits[t]++;
      for (int c : hits) CHECK(c == 1);
    }
  }
  SUBCASE("closure invariant across 100 draws") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      auto tops = epoch_batches(h, cfg, seed);
      Batch b = sample_batch(h, tops[seed % tops.size()], cfg, seed);
      // targets are a prefix and the preimage equality holds exactly
      auto expect = expand_targets(
          h.mappings[0],
          std::span<const NodeId>(b.levels[1].nodes.data(),
                                  b.levels[1].num_targets));
      std::vector<NodeId> got(b.levels[0].nodes.begin(),
                              b.levels[0].nodes.begin() +
                                  b.levels[0].num_targets);
      CHECK(got == expect);
      // targets are also included in sampled nodes at level 1
      CHECK(b.levels[1].num_targets <=
            static_cast<std::int32_t>(b.levels[1].nodes.size()));
    }
  }
  SUBCASE("identical seeds reproduce identical batches") {
    auto tops = epoch_batches(h, cfg, 3);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Batch a = sample_batch(h, tops[0], cfg, seed);
      Batch b = sample_batch(h, tops[0], cfg, seed);
      REQUIRE(a.levels.size() == b.levels.size());
      for (std::size_t l = 0; l < a.levels.size(); ++l) {
        CHECK(a.levels[l].nodes == b.levels[l].nodes);
        CHECK(a.levels[l].bias_index == b.levels[l].bias_index);
        CHECK(a.levels[l].subgraph.edge_list() ==
              b.levels[l].subgraph.edge_list());
      }
    }
  }
  SUBCASE("p=0 and zero fanouts collapse sampled to targets") {
    SamplerConfig tight;
    tight.batch_size = 2;
    tight.fanout_l0 = 0;
    tight.fanout_l0_2hop = 0;
    tight.fanout_high = 0;
    tight.intra_batch_p = 0.0;
    auto tops = epoch_batches(h, tight, 1);
    Batch b = sample_batch(h, tops[0], tight, 2);
    for (auto& lvl : b.levels)
      CHECK(lvl.num_targets == static_cast<std::int32_t>(lvl.nodes.size()));
  }
  SUBCASE("no_historical skips high-level neighborhoods only") {
    SamplerConfig nh = cfg;
    nh.sample_high_level_neighbors = false;
    auto tops = epoch_batches(h, nh, 1);
    Batch b = sample_batch(h, tops[0], nh, 2);
    CHECK(b.levels[1].num_targets ==
          static_cast<std::int32_t>(b.levels[1].nodes.size()));
  }
}

TEST_CASE("batch dump writes a readable file") {
  Hierarchy h = small_hierarchy(2, 5, 0.3, 2);
  SamplerConfig cfg;
  cfg.batch_size = 1;
  auto tops = epoch_batches(h, cfg, 1);
  Batch b = sample_batch(h, tops[0], cfg, 1);
  dump_batch(b, "sampler_dump_tmp.txt");
  std::ifstream in("sampler_dump_tmp.txt");
  REQUIRE(in.good());
  std::string first;
  std::getline(in, first);
  CHECK(first.rfind("levels", 0) == 0);
  in.close();
  std::remove("sampler_dump_tmp.txt");
}
