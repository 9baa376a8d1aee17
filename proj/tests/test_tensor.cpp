#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "hsgt/attention.hpp"
#include "hsgt/gradcheck.hpp"
#include "hsgt/optim.hpp"
#include "hsgt/tensor.hpp"
#include "oracles.hpp"

using namespace hsgt;
using D = Tensor<double>;

namespace {

struct FiniteChecksOn {
  FiniteChecksOn() { finite_checks() = true; }
  ~FiniteChecksOn() { finite_checks() = false; }
};

D make(std::int64_t r, std::int64_t c, std::initializer_list<double> vals,
       bool rg = false) {
  std::vector<double> v(vals);
  return D::from_data(r, c, v, rg);
}

}  // namespace

TEST_CASE("core op semantics") {
  SUBCASE("matmul identity") {
    D eye = make(2, 2, {1, 0, 0, 1});
    D m = make(2, 3, {1, 2, 3, 4, 5, 6});
    auto out = matmul(eye, m);
    CHECK(out.values() == m.values());
  }
  SUBCASE("matmul transpose flags agree with explicit transpose") {
    Rng rng(1);
    auto a = detail_gc::rand_tensor(3, 4, rng);
    auto b = detail_gc::rand_tensor(5, 4, rng);
    auto direct = matmul(a, b, false, true);
    auto composed = matmul(a, transpose(b));
    for (std::int64_t i = 0; i < direct.size(); ++i)
      CHECK(direct.values()[i] == doctest::Approx(composed.values()[i]));
  }
  SUBCASE("relu") {
    D x = make(1, 2, {-1, 2});
    auto y = relu(x);
    CHECK(y.values() == std::vector<double>{0, 2});
  }
  SUBCASE("dropout identities") {
    Rng rng(3);
    D x = make(2, 2, {1, 2, 3, 4});
    auto eval_mode = dropout(x, 0.5, rng, false);
    CHECK(eval_mode.values() == x.values());
    auto zero_rate = dropout(x, 0.0, rng, true);
    CHECK(zero_rate.values() == x.values());
  }
  SUBCASE("transpose/concat/slice/gather") {
    D x = make(2, 2, {1, 2, 3, 4});
    CHECK(transpose(x).values() == std::vector<double>{1, 3, 2, 4});
    auto cr = concat_rows<double>({x, x});
    CHECK(cr.rows() == 4);
    auto cc = concat_cols<double>({x, x});
    CHECK(cc.cols() == 4);
    CHECK(cc.values() == std::vector<double>{1, 2, 1, 2, 3, 4, 3, 4});
    CHECK(slice_rows(x, 1, 2).values() == std::vector<double>{3, 4});
    auto g = gather_rows(x, {1, -1, 0});
    CHECK(g.values() == std::vector<double>{3, 4, 0, 0, 1, 2});
  }
  SUBCASE("shape mismatches are input errors") {
    D a = make(2, 2, {1, 2, 3, 4});
    D b = make(1, 2, {1, 2});
    CHECK_THROWS_AS(add(a, b), input_error);
    CHECK_THROWS_AS(matmul(b, b), input_error);
  }
}

TEST_CASE("masked_softmax values and contract") {
  SUBCASE("uniform logits") {
    D x = make(1, 2, {0, 0});
    std::vector<std::uint8_t> mask(2, 0);
    auto p = masked_softmax(x, mask);
    CHECK(p.values()[0] == doctest::Approx(0.5));
    CHECK(p.values()[1] == doctest::Approx(0.5));
  }
  SUBCASE("singleton support") {
    D x = make(1, 3, {5, 9, 3});
    std::vector<std::uint8_t> mask{0, 1, 1};
    auto p = masked_softmax(x, mask);
    CHECK(p.values()[0] == doctest::Approx(1.0));
    CHECK(p.values()[1] == 0.0);  // exactly zero
    CHECK(p.values()[2] == 0.0);
  }
  SUBCASE("closed form ln2") {
    D x = make(1, 2, {std::log(2.0), 0.0});
    std::vector<std::uint8_t> mask(2, 0);
    auto p = masked_softmax(x, mask);
    CHECK(p.values()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(p.values()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("fully masked row violates the numeric contract") {
    D x = make(1, 2, {1, 2});
    std::vector<std::uint8_t> mask{1, 1};
    CHECK_THROWS_AS(masked_softmax(x, mask), numeric_error);
  }
  SUBCASE("rows sum to one and masked entries are exact zeros") {
    Rng rng(17);
    std::uniform_real_distribution<double> big(-1e3, 1e3);
    std::uniform_int_distribution<int> coin(0, 3);
    for (int trial = 0; trial < 50; ++trial) {
      D x = D::zeros(6, 8);
      for (auto& v : x.values()) v = big(rng);
      std::vector<std::uint8_t> mask(48, 0);
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 8; ++j) mask[i * 8 + j] = coin(rng) == 0;
        mask[i * 8 + (i % 8)] = 0;  // keep one live entry per row
      }
      auto p = masked_softmax(x, mask);
      for (int i = 0; i < 6; ++i) {
        double s = 0;
        for (int j = 0; j < 8; ++j) {
          if (mask[i * 8 + j]) CHECK(p.values()[i * 8 + j] == 0.0);
          s += p.values()[i * 8 + j];
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("layer_norm values") {
  D gamma = make(1, 3, {1, 1, 1});
  D beta = make(1, 3, {0, 0, 0});
  SUBCASE("constant row maps to zero") {
    D x = make(1, 3, {3, 3, 3});
    auto y = layer_norm(x, gamma, beta);
    for (double v : y.values()) CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("already standardized row is preserved up to eps") {
    D g2 = make(1, 2, {1, 1});
    D b2 = make(1, 2, {0, 0});
    D x = make(1, 2, {1, -1});
    auto y = layer_norm(x, g2, b2);
    CHECK(y.values()[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(y.values()[1] == doctest::Approx(-1.0).epsilon(1e-4));
  }
  SUBCASE("gamma zero collapses to beta") {
    D g0 = make(1, 3, {0, 0, 0});
    D b5 = make(1, 3, {5, 5, 5});
    D x = make(1, 3, {1, 2, 3});
    auto y = layer_norm(x, g0, b5);
    for (double v : y.values()) CHECK(v == doctest::Approx(5.0));
  }
}

TEST_CASE("cross_entropy values") {
  SUBCASE("uniform two-way") {
    D x = make(1, 2, {0, 0});
    std::vector<std::int32_t> labels{0};
    CHECK(cross_entropy(x, labels).item() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("dominant logit needs stable log-sum-exp") {
    D x = make(1, 2, {1000, 0});
    std::vector<std::int32_t> labels{0};
    double v = cross_entropy(x, labels).item();
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("mean over identical rows equals the single-row loss") {
    D one = make(1, 3, {0.3, -1.2, 0.7});
    D two = make(2, 3, {0.3, -1.2, 0.7, 0.3, -1.2, 0.7});
    std::vector<std::int32_t> l1{2}, l2{2, 2};
    CHECK(cross_entropy(two, l2).item() ==
          doctest::Approx(cross_entropy(one, l1).item()).epsilon(1e-14));
  }
  SUBCASE("label out of range") {
    D x = make(1, 2, {0, 0});
    std::vector<std::int32_t> labels{2};
    CHECK_THROWS_AS(cross_entropy(x, labels), input_error);
  }
}

TEST_CASE("backward closed forms") {
  SUBCASE("sum of squares") {
    Rng rng(5);
    auto x = detail_gc::make_param("x", 2, 3, rng);
    auto loss = sum(mul(x.value, x.value));
    backward(loss);
    for (std::int64_t i = 0; i < x.value.size(); ++i)
      CHECK(x.value.grad()[i] ==
            doctest::Approx(2.0 * x.value.values()[i]).epsilon(1e-14));
  }
  SUBCASE("matmul against ones") {
    Rng rng(6);
    auto x = detail_gc::rand_tensor(3, 2, rng);
    auto w = detail_gc::make_param("w", 2, 4, rng);
    auto loss = sum(matmul(x, w.value));
    backward(loss);
    // dW = x^T . 1
    for (std::int64_t i = 0; i < 2; ++i)
      for (std::int64_t j = 0; j < 4; ++j) {
        double want = 0;
        for (std::int64_t r = 0; r < 3; ++r) want += x.values()[r * 2 + i];
        CHECK(w.value.grad()[i * 4 + j] ==
              doctest::Approx(want).epsilon(1e-12));
      }
  }
  SUBCASE("backward on a detached tensor is an error") {
    D x = make(1, 1, {2.0});
    CHECK_THROWS_AS(backward(x), input_error);
  }
  SUBCASE("grads accumulate across backward calls") {
    Rng rng(7);
    auto x = detail_gc::make_param("x", 1, 2, rng);
    backward(sum(mul(x.value, x.value)));
    auto first = x.value.grad();
    backward(sum(mul(x.value, x.value)));
    for (std::size_t i = 0; i < first.size(); ++i)
      CHECK(x.value.grad()[i] == doctest::Approx(2 * first[i]));
  }
}

TEST_CASE("every differentiable op passes the finite-difference suite") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto results = gradcheck_ops(seed);
    for (const auto& r : results) {
      INFO(r.name << " seed " << seed);
      CHECK(r.max_rel_err < 1e-5);
    }
  }
}

TEST_CASE("adamw closed-form steps") {
  auto mk = [](double v) {
    Parameter<double> p;
    p.name = "p";
    p.value = D::zeros(1, 1, true);
    p.value.values()[0] = v;
    p.m1.assign(1, 0.0);
    p.m2.assign(1, 0.0);
    return p;
  };
  SUBCASE("first step moves by about lr") {
    auto p = mk(1.0);
    backward(scale(p.value, 0.5));  // grad = 0.5
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.0;
    std::vector<Parameter<double>*> ps{&p};
    adamw_step<double>(ps, cfg);
    CHECK(p.value.values()[0] == doctest::Approx(0.9).epsilon(1e-6));
  }
  SUBCASE("zero grad and zero decay leave the value") {
    auto p = mk(1.0);
    backward(scale(p.value, 0.0));
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    std::vector<Parameter<double>*> ps{&p};
    adamw_step<double>(ps, cfg);
    CHECK(p.value.values()[0] == doctest::Approx(1.0));
  }
  SUBCASE("decay-only step") {
    auto p = mk(1.0);
    backward(scale(p.value, 0.0));
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.1;
    std::vector<Parameter<double>*> ps{&p};
    adamw_step<double>(ps, cfg);
    CHECK(p.value.values()[0] == doctest::Approx(0.99).epsilon(1e-12));
  }
  SUBCASE("step before backward is an error") {
    auto p = mk(1.0);
    AdamWConfig cfg;
    std::vector<Parameter<double>*> ps{&p};
    CHECK_THROWS_AS(adamw_step<double>(ps, cfg), input_error);
  }
}

TEST_CASE("finite_difference_check sanity on x^2") {
  Rng rng(8);
  auto x = detail_gc::make_param("x", 1, 1, rng);
  x.value.values()[0] = 3.0;
  std::vector<Parameter<double>*> ps{&x};
  double err = finite_difference_check<double>(
      [&] { return mul(x.value, x.value); },
      std::span<Parameter<double>* const>(ps), 1e-5);
  CHECK(err < 1e-9);
  // analytic gradient is 6 at x = 3
  CHECK(x.value.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("fused attention agrees with composed ops and the naive oracle") {
  Rng rng(21);
  const int n = 6, d = 4, heads = 2, D_cap = 2;
  auto q = detail_gc::rand_tensor(n, d, rng);
  auto k = detail_gc::rand_tensor(n, d, rng);
  auto v = detail_gc::rand_tensor(n, d, rng);
  auto b = detail_gc::rand_tensor(heads, D_cap + 1, rng);
  std::vector<std::int8_t> idx(n * n, kBiasMasked);
  std::uniform_int_distribution<int> code(-2, D_cap);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      idx[i * n + j] = static_cast<std::int8_t>(code(rng));
    idx[i * n + i] = 0;
  }
  Rng none(0);
  auto fused = spd_attention(q, k, v, heads, idx, D_cap, b, 0.0, none,
                             false);
  auto naive = oracle::naive_spd_attention(q.values(), k.values(), v.values(),
                                           n, d, heads, idx, b.values(),
                                           D_cap);
  for (std::int64_t i = 0; i < fused.size(); ++i)
    CHECK(fused.values()[i] == doctest::Approx(naive[i]).epsilon(1e-12));

  // composed route per head: masked_softmax(QK^T/sqrt(dh) + B) . V
  const std::int64_t dh = d / heads;
  for (int h = 0; h < heads; ++h) {
    D qh = D::zeros(n, dh), kh = D::zeros(n, dh), vh = D::zeros(n, dh);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < dh; ++t) {
        qh.values()[i * dh + t] = q.values()[i * d + h * dh + t];
        kh.values()[i * dh + t] = k.values()[i * d + h * dh + t];
        vh.values()[i * dh + t] = v.values()[i * d + h * dh + t];
      }
    D logits = scale(matmul(qh, kh, false, true),
                     1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<std::uint8_t> mask(n * n, 0);
    for (int i = 0; i < n * n; ++i) {
      if (idx[i] == kBiasMasked)
        mask[i] = 1;
      else if (idx[i] >= 0)
        logits.values()[i] += b.values()[h * (D_cap + 1) + idx[i]];
    }
    auto probs = masked_softmax(logits, mask);
    auto head_out = matmul(probs, vh);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < dh; ++t)
        CHECK(fused.values()[i * d + h * dh + t] ==
              doctest::Approx(head_out.values()[i * dh + t])
                  .epsilon(1e-12));
  }
}

TEST_CASE("segment attention singleton weight is one regardless of logits") {
  Rng rng(31);
  auto q = detail_gc::rand_tensor(2, 4, rng, 5.0);
  auto k = detail_gc::rand_tensor(2, 4, rng, 5.0);
  auto v = detail_gc::rand_tensor(2, 4, rng, 5.0);
  std::vector<std::int32_t> offsets{0, 1, 2};
  Rng none(0);
  auto out = segment_attention(q, k, v, offsets, 2, 0.0, none, false);
  // one key per query: output equals that key's value row
  for (int i = 0; i < 2; ++i)
    for (int t = 0; t < 4; ++t)
      CHECK(out.values()[i * 4 + t] ==
            doctest::Approx(v.values()[i * 4 + t]).epsilon(1e-12));
  std::vector<std::int32_t> bad{0, 0, 2};
  CHECK_THROWS_AS(segment_attention(q, k, v, bad, 2, 0.0, none, false),
                  input_error);
}

TEST_CASE("forward passes are deterministic and finite") {
  FiniteChecksOn guard;
  Rng rng(41);
  std::uniform_real_distribution<double> big(-1e3, 1e3);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = D::zeros(8, 8);
    for (auto& x : a.values()) x = big(rng);
    auto b = D::zeros(8, 8);
    for (auto& x : b.values()) x = big(rng);
    auto first = matmul(a, b);
    auto second = matmul(a, b);
    CHECK(first.values() == second.values());  // bit-identical
    auto r = relu(add(first, b));
    auto g = make(1, 8, {1, 1, 1, 1, 1, 1, 1, 1});
    auto z = make(1, 8, {0, 0, 0, 0, 0, 0, 0, 0});
    auto ln = layer_norm(r, g, z);
    for (double x : ln.values()) CHECK(std::isfinite(x));
  }
}

TEST_CASE("checkpoint container round-trips parameters") {
  Rng rng(55);
  ParamStore<double> store;
  store.create_uniform("a/w", 3, 4, 3, rng);
  store.create("a/b", 1, 4, 0.25);
  store.create_uniform("b/w", 2, 2, 2, rng);
  save_parameters("tensor_ckpt_tmp.bin", store);

  ParamStore<double> loaded;
  loaded.create("a/w", 3, 4);
  loaded.create("a/b", 1, 4);
  loaded.create("b/w", 2, 2);
  load_parameters("tensor_ckpt_tmp.bin", loaded);
  for (auto* p : store.all()) {
    auto* q = loaded.find(p->name);
    REQUIRE(q != nullptr);
    CHECK(q->value.values() == p->value.values());
  }
  CHECK(store.total_size() == loaded.total_size());
  std::remove("tensor_ckpt_tmp.bin");

  ParamStore<double> wrong;
  wrong.create("a/w", 3, 4);
  save_parameters("tensor_ckpt_tmp2.bin", wrong);
  ParamStore<double> missing;
  missing.create("a/w", 3, 4);
  missing.create("extra", 1, 1);
  CHECK_THROWS_AS(load_parameters("tensor_ckpt_tmp2.bin", missing),
                  input_error);
  std::remove("tensor_ckpt_tmp2.bin");
}
