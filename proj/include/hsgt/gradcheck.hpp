#pragma once

#include <string>
#include <vector>

#include "hsgt/attention.hpp"
#include "hsgt/data_io.hpp"
#include "hsgt/train.hpp"

namespace hsgt {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
};

namespace detail_gc {

inline Tensor<double> rand_tensor(std::int64_t r, std::int64_t c, Rng& rng,
                                  double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  auto t = Tensor<double>::zeros(r, c);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

inline Parameter<double> make_param(const std::string& name, std::int64_t r,
                                    std::int64_t c, Rng& rng,
                                    double scale = 1.0) {
  Parameter<double> p;
  p.name = name;
  p.value = Tensor<double>::zeros(r, c, /*requires_grad=*/true);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& v : p.value.values()) v = dist(rng);
  return p;
}

// Scalarizes a matrix output through a fixed random linear functional so
// every output coordinate contributes to the checked gradient.
inline Tensor<double> weighted_sum(const Tensor<double>& x,
                                   const Tensor<double>& weights) {
  return sum(mul(x, weights));
}

}  // namespace detail_gc

/// Finite-difference checks for every differentiable tensor op, double
/// precision. Each entry reports the max relative error; the accepted
/// threshold is 1e-5 at eps 1e-5.
inline std::vector<GradCheckResult> gradcheck_ops(std::uint64_t seed) {
  using detail_gc::make_param;
  using detail_gc::rand_tensor;
  using detail_gc::weighted_sum;
  std::vector<GradCheckResult> results;
  Rng rng(mix_seed(seed, 0x6c));

  auto check = [&](const std::string& name,
                   std::vector<Parameter<double>*> params, auto&& loss_fn) {
    double err = finite_difference_check<double>(loss_fn, params, 1e-5);
    results.push_back({name, err});
  };

  {
    auto a = make_param("a", 3, 4, rng);
    auto b = make_param("b", 4, 5, rng);
    auto w = rand_tensor(3, 5, rng);
    check("matmul", {&a, &b}, [&] {
      return weighted_sum(matmul(a.value, b.value), w);
    });
  }
  {
    auto a = make_param("a", 4, 3, rng);
    auto b = make_param("b", 4, 5, rng);
    auto w = rand_tensor(3, 5, rng);
    check("matmul_trans_a", {&a, &b}, [&] {
      return weighted_sum(matmul(a.value, b.value, true, false), w);
    });
  }
  {
    auto a = make_param("a", 3, 4, rng);
    auto b = make_param("b", 5, 4, rng);
    auto w = rand_tensor(3, 5, rng);
    check("matmul_trans_b", {&a, &b}, [&] {
      return weighted_sum(matmul(a.value, b.value, false, true), w);
    });
  }
  {
    auto a = make_param("a", 3, 4, rng);
    auto b = make_param("b", 3, 4, rng);
    auto w = rand_tensor(3, 4, rng);
    check("add", {&a, &b}, [&] {
      return weighted_sum(add(a.value, b.value), w);
    });
  }
  {
    auto a = make_param("a", 3, 4, rng);
    auto b = make_param("bias", 1, 4, rng);
    auto w = rand_tensor(3, 4, rng);
    check("add_bias", {&a, &b}, [&] {
      return weighted_sum(add_bias(a.value, b.value), w);
    });
  }
  {
    auto a = make_param("a", 3, 4, rng);
    auto w = rand_tensor(3, 4, rng);
    check("scale", {&a}, [&] {
      return weighted_sum(scale(a.value, 2.5), w);
    });
  }
  {
    auto a = make_param("a", 3, 4, rng);
    auto b = make_param("b", 3, 4, rng);
    auto w = rand_tensor(3, 4, rng);
    check("mul", {&a, &b}, [&] {
      return weighted_sum(mul(a.value, b.value), w);
    });
  }
  {
    auto a = make_param("a", 3, 4, rng);
    auto w = rand_tensor(4, 3, rng);
    check("transpose", {&a}, [&] {
      return weighted_sum(transpose(a.value), w);
    });
  }
  {
    // keep values away from the kink
    auto a = make_param("a", 3, 4, rng);
    for (auto& v : a.value.values())
      if (std::abs(v) < 0.05) v = v < 0 ? v - 0.1 : v + 0.1;
    auto w = rand_tensor(3, 4, rng);
    check("relu", {&a}, [&] { return weighted_sum(relu(a.value), w); });
  }
  {
    auto a = make_param("a", 4, 3, rng);
    auto b = make_param("b", 2, 3, rng);
    auto w = rand_tensor(6, 3, rng);
    check("concat_rows", {&a, &b}, [&] {
      return weighted_sum(concat_rows<double>({a.value, b.value}), w);
    });
  }
  {
    auto a = make_param("a", 3, 2, rng);
    auto b = make_param("b", 3, 4, rng);
    auto w = rand_tensor(3, 6, rng);
    check("concat_cols", {&a, &b}, [&] {
      return weighted_sum(concat_cols<double>({a.value, b.value}), w);
    });
  }
  {
    auto a = make_param("a", 5, 3, rng);
    auto w = rand_tensor(2, 3, rng);
    check("slice_rows", {&a}, [&] {
      return weighted_sum(slice_rows(a.value, 1, 3), w);
    });
  }
  {
    auto a = make_param("a", 5, 3, rng);
    auto w = rand_tensor(4, 3, rng);
    check("gather_rows", {&a}, [&] {
      return weighted_sum(gather_rows(a.value, {4, 0, -1, 0}), w);
    });
  }
  {
    auto a = make_param("a", 4, 4, rng);
    auto w = rand_tensor(4, 4, rng);
    check("dropout", {&a}, [&] {
      Rng fixed(123);  // identical mask on every evaluation
      return weighted_sum(dropout(a.value, 0.4, fixed, true), w);
    });
  }
  {
    auto a = make_param("a", 3, 5, rng);
    std::vector<std::uint8_t> mask(15, 0);
    mask[2] = mask[7] = mask[9] = 1;
    auto w = rand_tensor(3, 5, rng);
    check("masked_softmax", {&a}, [&] {
      return weighted_sum(masked_softmax(a.value, mask), w);
    });
  }
  {
    auto x = make_param("x", 4, 8, rng);
    auto g = make_param("gamma", 1, 8, rng);
    auto b = make_param("beta", 1, 8, rng);
    auto w = rand_tensor(4, 8, rng);
    check("layer_norm", {&x, &g, &b}, [&] {
      return weighted_sum(layer_norm(x.value, g.value, b.value), w);
    });
  }
  {
    auto x = make_param("x", 4, 3, rng);
    std::vector<std::int32_t> labels{0, 2, 1, 2};
    check("cross_entropy", {&x}, [&] {
      return cross_entropy(x.value, labels);
    });
  }
  {
    // masked softmax feeding cross-entropy, the spec's composite case
    auto x = make_param("x", 3, 3, rng);
    std::vector<std::uint8_t> mask(9, 0);
    mask[1] = mask[5] = 1;
    std::vector<std::int32_t> labels{0, 2, 2};
    check("masked_softmax+cross_entropy", {&x}, [&] {
      return cross_entropy(masked_softmax(x.value, mask), labels);
    });
  }
  {
    const int n = 5, d = 4, heads = 2, D = 2;
    auto q = make_param("q", n, d, rng);
    auto k = make_param("k", n, d, rng);
    auto v = make_param("v", n, d, rng);
    auto b = make_param("bias", heads, D + 1, rng, 0.3);
    std::vector<std::int8_t> idx(n * n, kBiasMasked);
    Rng mask_rng(mix_seed(seed, 0x11));
    std::uniform_int_distribution<int> code(-2, D);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        idx[i * n + j] = i == j ? 0 : static_cast<std::int8_t>(code(mask_rng));
    auto w = rand_tensor(n, d, rng);
    check("spd_attention", {&q, &k, &v, &b}, [&] {
      Rng none(0);
      return weighted_sum(spd_attention(q.value, k.value, v.value, heads,
                                        idx, D, b.value, 0.0, none, false),
                          w);
    });
    check("spd_attention_dropout", {&q, &k, &v, &b}, [&] {
      Rng fixed(7);
      return weighted_sum(spd_attention(q.value, k.value, v.value, heads,
                                        idx, D, b.value, 0.3, fixed, true),
                          w);
    });
  }
  {
    const int m = 3, d = 4, heads = 2;
    auto q = make_param("q", m, d, rng);
    auto k = make_param("k", 7, d, rng);
    auto v = make_param("v", 7, d, rng);
    std::vector<std::int32_t> offsets{0, 2, 3, 7};
    auto w = rand_tensor(m, d, rng);
    check("segment_attention", {&q, &k, &v}, [&] {
      Rng none(0);
      return weighted_sum(segment_attention(q.value, k.value, v.value,
                                            offsets, heads, 0.0, none,
                                            false),
                          w);
    });
  }
  {
    auto x = make_param("x", 6, 3, rng);
    std::vector<std::int32_t> offsets{0, 1, 4, 6};
    auto w = rand_tensor(3, 3, rng);
    check("segment_mean", {&x}, [&] {
      return weighted_sum(segment_mean(x.value, offsets), w);
    });
  }
  return results;
}

/// End-to-end gradient check: full forward_batch plus cross-entropy on a
/// 6-node, H=1, hidden 4, 2-head instance, double precision.
inline GradCheckResult gradcheck_full_model(std::uint64_t seed) {
  LabeledDataset ds = generate_sbm(2, 3, 0.9, 0.2, 0.4, seed);
  for (NodeId v = 0; v < 6; ++v)
    ds.split[v] = v % 2 == 0 ? Split::Train : Split::Valid;

  TrainConfig cfg;
  cfg.coarsening.ratios = {0.5};
  cfg.coarsening.seed = seed;
  cfg.model.hidden = 4;
  cfg.model.heads = 2;
  cfg.model.layers_per_horizontal = 2;
  cfg.model.max_spd = 2;
  cfg.model.max_degree = 4;
  cfg.model.dropout = 0.0;
  cfg.model.attn_dropout = 0.0;
  cfg.sampler.batch_size = 2;
  cfg.sampler.fanout_l0 = 2;
  cfg.sampler.fanout_l0_2hop = 2;
  cfg.sampler.fanout_high = 1;
  cfg.sampler.intra_batch_p = 0.3;
  cfg.full_batch_budget = 0;  // force the sampled path
  resolve_config(cfg, ds);

  Hierarchy h = build_hierarchy(ds, cfg.coarsening.ratios,
                                cfg.coarsening.method, cfg.coarsening.seed);
  HsgtModel<double> model(cfg.model, seed);
  std::vector<NodeId> sizes{h.graphs[1].num_nodes()};
  HistoricalStore<double> store(sizes, cfg.model.hidden);
  // seed the store so pulled rows are non-trivial constants
  {
    NoGradGuard ng;
    Rng rng(1);
    auto tops = epoch_batches(h, cfg.sampler, mix_seed(seed, 3));
    for (std::size_t i = 0; i < tops.size(); ++i) {
      store.begin_batch();
      Batch b = sample_batch(h, tops[i], cfg.sampler, mix_seed(seed, 40 + i));
      model.forward_batch(b, h, &store, false, rng);
    }
  }

  auto tops = epoch_batches(h, cfg.sampler, mix_seed(seed, 5));
  Batch batch = sample_batch(h, tops[0], cfg.sampler, mix_seed(seed, 6));
  const LevelBatch& l0 = batch.levels[0];
  std::vector<std::int64_t> rows;
  std::vector<std::int32_t> labels;
  for (std::int32_t i = 0; i < l0.num_targets; ++i) {
    rows.push_back(i);
    labels.push_back(ds.labels[l0.nodes[i]]);
  }

  auto params = model.params().all();
  auto loss_fn = [&] {
    Rng rng(9);
    HistoricalStore<double> frozen = store;
    Tensor<double> logits =
        model.forward_batch(batch, h, &frozen, true, rng);
    return cross_entropy(gather_rows(logits, std::vector<std::int64_t>(rows)),
                         labels);
  };
  double err = finite_difference_check<double>(
      loss_fn, std::span<Parameter<double>* const>(params), 1e-5);
  return {"forward_batch(6-node,H=1,d=4,heads=2)", err};
}

}  // namespace hsgt
