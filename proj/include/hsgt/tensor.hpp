#pragma once

#include <algorithm>
#include <cblas.h>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <unordered_set>
#include <vector>

#include "hsgt/common.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

extern "C" void openblas_set_num_threads(int);

namespace hsgt {

// ---------------------------------------------------------------------------
// gemm: OpenBLAS-backed, parallelized over fixed 128-row output blocks, each
// block a single-threaded BLAS call. The reduction order of every output
// element is therefore independent of the thread count, which keeps results
// bit-identical across runs and thread configurations.
// ---------------------------------------------------------------------------

namespace detail {

inline void ensure_blas_sequential() {
  static const bool done = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)done;
}

inline void cblas_gemm(bool ta, bool tb, int m, int n, int k, double alpha,
                       const double* a, int lda, const double* b, int ldb,
                       double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
              beta, c, ldc);
}

inline void cblas_gemm(bool ta, bool tb, int m, int n, int k, float alpha,
                       const float* a, int lda, const float* b, int ldb,
                       float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
              beta, c, ldc);
}

}  // namespace detail

template <typename T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n,
          std::int64_t k, T alpha, const T* a, std::int64_t lda, const T* b,
          std::int64_t ldb, T beta, T* c, std::int64_t ldc) {
  detail::ensure_blas_sequential();
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) c[i * ldc + j] *= beta;
    return;
  }
  constexpr std::int64_t kBlock = 128;
  const bool parallel = m > kBlock && m * n * k >= (1 << 20);
  if (!parallel) {
    detail::cblas_gemm(trans_a, trans_b, static_cast<int>(m),
                       static_cast<int>(n), static_cast<int>(k), alpha, a,
                       static_cast<int>(lda), b, static_cast<int>(ldb), beta,
                       c, static_cast<int>(ldc));
    return;
  }
  const std::int64_t blocks = (m + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t bi = 0; bi < blocks; ++bi) {
    std::int64_t i0 = bi * kBlock;
    std::int64_t rows = std::min(kBlock, m - i0);
    // Row block of op(A): rows of A when not transposed, columns otherwise.
    const T* ablk = trans_a ? a + i0 : a + i0 * lda;
    detail::cblas_gemm(trans_a, trans_b, static_cast<int>(rows),
                       static_cast<int>(n), static_cast<int>(k), alpha, ablk,
                       static_cast<int>(lda), b, static_cast<int>(ldb), beta,
                       c + i0 * ldc, static_cast<int>(ldc));
  }
}

// ---------------------------------------------------------------------------
// Tensor + tape
// ---------------------------------------------------------------------------

template <typename T>
struct TensorNode {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<T> value;
  std::vector<T> grad;  // lazily allocated, same extent as value
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  std::int64_t size() const { return rows * cols; }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

inline bool& autograd_enabled() {
  thread_local bool on = true;
  return on;
}

/// RAII guard disabling tape recording (evaluation / perturbation passes).
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(autograd_enabled()) { autograd_enabled() = false; }
  ~NoGradGuard() { autograd_enabled() = prev; }
};

/// Process-global toggle for post-op finiteness scans (tests enable it).
inline bool& finite_checks() {
  static bool on = false;
  return on;
}

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode<T>> n) : node_(std::move(n)) {}

  static Tensor zeros(std::int64_t r, std::int64_t c,
                      bool requires_grad = false) {
    auto n = std::make_shared<TensorNode<T>>();
    n->rows = r;
    n->cols = c;
    n->value.assign(static_cast<std::size_t>(r * c), T(0));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from_data(std::int64_t r, std::int64_t c,
                          std::span<const T> data,
                          bool requires_grad = false) {
    require(static_cast<std::int64_t>(data.size()) == r * c,
            "tensor data extent mismatch");
    auto t = zeros(r, c, requires_grad);
    std::copy(data.begin(), data.end(), t.node_->value.begin());
    return t;
  }

  static Tensor scalar(T v) {
    auto t = zeros(1, 1);
    t.node_->value[0] = v;
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  std::int64_t rows() const { return node_->rows; }
  std::int64_t cols() const { return node_->cols; }
  std::int64_t size() const { return node_->size(); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<T>& values() const { return node_->value; }
  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& grad() const { return node_->grad; }
  T* data() { return node_->value.data(); }
  const T* data() const { return node_->value.data(); }
  T item() const {
    require(size() == 1, "item() on non-scalar tensor");
    return node_->value[0];
  }
  T at(std::int64_t i, std::int64_t j) const {
    return node_->value[i * cols() + j];
  }

  std::shared_ptr<TensorNode<T>> node() const { return node_; }

  void zero_grad() {
    if (!node_->grad.empty())
      std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

namespace detail {

template <typename T>
void check_finite_values(const TensorNode<T>& n, const char* op) {
  if (!finite_checks()) return;
  for (T v : n.value)
    if (!std::isfinite(v))
      throw numeric_error(std::string("non-finite value produced by ") + op);
}

// Registers a tape node when autograd is active and any parent needs grads.
template <typename T, typename Fn>
Tensor<T> op_result(std::int64_t rows, std::int64_t cols,
                    std::vector<Tensor<T>> parents, Fn&& forward,
                    std::function<void(TensorNode<T>&)> backward,
                    const char* name) {
  auto out = Tensor<T>::zeros(rows, cols);
  forward(*out.node());
  check_finite_values(*out.node(), name);
  bool needs = false;
  if (autograd_enabled())
    for (auto& p : parents)
      if (p.requires_grad()) needs = true;
  if (needs) {
    auto n = out.node();
    n->requires_grad = true;
    n->is_leaf = false;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward);
  }
  return out;
}

template <typename T>
void accumulate(TensorNode<T>& parent, const T* src, std::int64_t count) {
  parent.ensure_grad();
  T* dst = parent.grad.data();
  for (std::int64_t i = 0; i < count; ++i) dst[i] += src[i];
}

}  // namespace detail

/// Reverse traversal from a scalar loss. Interior grads and tape links are
/// released as soon as each node has been processed; leaf grads accumulate.
template <typename T>
void backward(const Tensor<T>& loss) {
  require(loss.defined() && loss.size() == 1, "backward needs a scalar loss");
  if (!loss.requires_grad())
    throw input_error("backward on a detached tensor (no tape recorded)");

  // Iterative post-order DFS over parents. The order list holds owning
  // handles: clearing tape links below must not free nodes still pending.
  std::vector<std::shared_ptr<TensorNode<T>>> order;
  std::unordered_set<TensorNode<T>*> seen;
  std::vector<std::pair<std::shared_ptr<TensorNode<T>>, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& top = stack.back();
    TensorNode<T>* node = top.first.get();
    if (top.second < node->parents.size()) {
      std::shared_ptr<TensorNode<T>> p = node->parents[top.second++];
      if (p->requires_grad && !seen.count(p.get())) {
        seen.insert(p.get());
        stack.emplace_back(std::move(p), 0);
      }
    } else {
      order.push_back(std::move(top.first));
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad();
  loss.node()->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<T>* n = it->get();
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
      n->backward_fn = nullptr;
      n->parents.clear();
    }
    if (!n->is_leaf) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

// ---------------------------------------------------------------------------
// Core ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false,
                 bool trans_b = false) {
  const std::int64_t m = trans_a ? a.cols() : a.rows();
  const std::int64_t ka = trans_a ? a.rows() : a.cols();
  const std::int64_t kb = trans_b ? b.cols() : b.rows();
  const std::int64_t n = trans_b ? b.rows() : b.cols();
  require(ka == kb, "matmul: inner dimensions disagree");
  auto an = a.node();
  auto bn = b.node();
  return detail::op_result<T>(
      m, n, {a, b},
      [&](TensorNode<T>& out) {
        gemm<T>(trans_a, trans_b, m, n, ka, T(1), an->value.data(), a.cols(),
                bn->value.data(), b.cols(), T(0), out.value.data(), n);
      },
      [an, bn, trans_a, trans_b, m, n, ka](TensorNode<T>& out) {
        const T* dc = out.grad.data();
        if (an->requires_grad) {
          an->ensure_grad();
          if (!trans_a)  // dA = dC . op(B)^T
            gemm<T>(false, !trans_b, m, ka, n, T(1), dc, n, bn->value.data(),
                    bn->cols, T(1), an->grad.data(), an->cols);
          else  // stored dA = op(B) . dC^T
            gemm<T>(trans_b, true, ka, m, n, T(1), bn->value.data(), bn->cols,
                    dc, n, T(1), an->grad.data(), an->cols);
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          if (!trans_b)  // dB = op(A)^T . dC
            gemm<T>(!trans_a, false, ka, n, m, T(1), an->value.data(),
                    an->cols, dc, n, T(1), bn->grad.data(), bn->cols);
          else  // stored dB = dC^T . op(A)
            gemm<T>(true, trans_a, n, ka, m, T(1), dc, n, an->value.data(),
                    an->cols, T(1), bn->grad.data(), bn->cols);
        }
      },
      "matmul");
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "add: shape mismatch");
  auto an = a.node();
  auto bn = b.node();
  return detail::op_result<T>(
      a.rows(), a.cols(), {a, b},
      [&](TensorNode<T>& out) {
        for (std::int64_t i = 0; i < out.size(); ++i)
          out.value[i] = an->value[i] + bn->value[i];
      },
      [an, bn](TensorNode<T>& out) {
        if (an->requires_grad)
          detail::accumulate(*an, out.grad.data(), out.size());
        if (bn->requires_grad)
          detail::accumulate(*bn, out.grad.data(), out.size());
      },
      "add");
}

/// Adds a 1 x cols row vector to every row.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(),
          "add_bias: bias must be a [1 x cols] row vector");
  auto an = a.node();
  auto bn = bias.node();
  const std::int64_t r = a.rows(), c = a.cols();
  return detail::op_result<T>(
      r, c, {a, bias},
      [&](TensorNode<T>& out) {
        for (std::int64_t i = 0; i < r; ++i)
          for (std::int64_t j = 0; j < c; ++j)
            out.value[i * c + j] = an->value[i * c + j] + bn->value[j];
      },
      [an, bn, r, c](TensorNode<T>& out) {
        if (an->requires_grad)
          detail::accumulate(*an, out.grad.data(), out.size());
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::int64_t i = 0; i < r; ++i)
            for (std::int64_t j = 0; j < c; ++j)
              bn->grad[j] += out.grad[i * c + j];
        }
      },
      "add_bias");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  auto an = a.node();
  return detail::op_result<T>(
      a.rows(), a.cols(), {a},
      [&](TensorNode<T>& out) {
        for (std::int64_t i = 0; i < out.size(); ++i)
          out.value[i] = s * an->value[i];
      },
      [an, s](TensorNode<T>& out) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::int64_t i = 0; i < out.size(); ++i)
          an->grad[i] += s * out.grad[i];
      },
      "scale");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "mul: shape mismatch");
  auto an = a.node();
  auto bn = b.node();
  return detail::op_result<T>(
      a.rows(), a.cols(), {a, b},
      [&](TensorNode<T>& out) {
        for (std::int64_t i = 0; i < out.size(); ++i)
          out.value[i] = an->value[i] * bn->value[i];
      },
      [an, bn](TensorNode<T>& out) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::int64_t i = 0; i < out.size(); ++i)
            an->grad[i] += bn->value[i] * out.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::int64_t i = 0; i < out.size(); ++i)
            bn->grad[i] += an->value[i] * out.grad[i];
        }
      },
      "mul");
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  auto an = a.node();
  return detail::op_result<T>(
      1, 1, {a},
      [&](TensorNode<T>& out) {
        T acc = T(0);
        for (T v : an->value) acc += v;
        out.value[0] = acc;
      },
      [an](TensorNode<T>& out) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        T g = out.grad[0];
        for (auto& gv : an->grad) gv += g;
      },
      "sum");
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  auto an = a.node();
  const std::int64_t r = a.rows(), c = a.cols();
  return detail::op_result<T>(
      c, r, {a},
      [&](TensorNode<T>& out) {
        for (std::int64_t i = 0; i < r; ++i)
          for (std::int64_t j = 0; j < c; ++j)
            out.value[j * r + i] = an->value[i * c + j];
      },
      [an, r, c](TensorNode<T>& out) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::int64_t i = 0; i < r; ++i)
          for (std::int64_t j = 0; j < c; ++j)
            an->grad[i * c + j] += out.grad[j * r + i];
      },
      "transpose");
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  auto an = a.node();
  return detail::op_result<T>(
      a.rows(), a.cols(), {a},
      [&](TensorNode<T>& out) {
        for (std::int64_t i = 0; i < out.size(); ++i)
          out.value[i] = an->value[i] > T(0) ? an->value[i] : T(0);
      },
      [an](TensorNode<T>& out) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::int64_t i = 0; i < out.size(); ++i)
          if (an->value[i] > T(0)) an->grad[i] += out.grad[i];
      },
      "relu");
}

/// Inverted-scaling dropout; identity in eval mode or at rate 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double rate, Rng& rng, bool train) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must lie in [0, 1)");
  if (!train || rate == 0.0) return a;
  auto an = a.node();
  auto mask = std::make_shared<std::vector<std::uint8_t>>(
      static_cast<std::size_t>(a.size()));
  const T inv_keep = T(1.0 / (1.0 - rate));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& m : *mask) m = unit(rng) >= rate ? 1 : 0;
  return detail::op_result<T>(
      a.rows(), a.cols(), {a},
      [&](TensorNode<T>& out) {
        for (std::int64_t i = 0; i < out.size(); ++i)
          out.value[i] = (*mask)[i] ? an->value[i] * inv_keep : T(0);
      },
      [an, mask, inv_keep](TensorNode<T>& out) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::int64_t i = 0; i < out.size(); ++i)
          if ((*mask)[i]) an->grad[i] += out.grad[i] * inv_keep;
      },
      "dropout");
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_rows: empty input");
  const std::int64_t c = parts[0].cols();
  std::int64_t r = 0;
  for (auto& p : parts) {
    require(p.cols() == c, "concat_rows: column mismatch");
    r += p.rows();
  }
  return detail::op_result<T>(
      r, c, parts,
      [&](TensorNode<T>& out) {
        std::int64_t at = 0;
        for (auto& p : parts) {
          std::copy(p.values().begin(), p.values().end(),
                    out.value.begin() + at);
          at += p.size();
        }
      },
      [c](TensorNode<T>& out) {
        std::int64_t at = 0;
        for (auto& p : out.parents) {
          if (p->requires_grad)
            detail::accumulate(*p, out.grad.data() + at, p->size());
          at += p->size();
        }
        (void)c;
      },
      "concat_rows");
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_cols: empty input");
  const std::int64_t r = parts[0].rows();
  std::int64_t c = 0;
  for (auto& p : parts) {
    require(p.rows() == r, "concat_cols: row mismatch");
    c += p.cols();
  }
  return detail::op_result<T>(
      r, c, parts,
      [&](TensorNode<T>& out) {
        std::int64_t at = 0;
        for (auto& p : parts) {
          for (std::int64_t i = 0; i < r; ++i)
            std::copy(p.values().begin() + i * p.cols(),
                      p.values().begin() + (i + 1) * p.cols(),
                      out.value.begin() + i * c + at);
          at += p.cols();
        }
      },
      [r, c](TensorNode<T>& out) {
        std::int64_t at = 0;
        for (auto& p : out.parents) {
          if (p->requires_grad) {
            p->ensure_grad();
            for (std::int64_t i = 0; i < r; ++i)
              for (std::int64_t j = 0; j < p->cols; ++j)
                p->grad[i * p->cols + j] += out.grad[i * c + at + j];
          }
          at += p->cols;
        }
      },
      "concat_cols");
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, std::int64_t r0, std::int64_t r1) {
  require(0 <= r0 && r0 <= r1 && r1 <= a.rows(), "slice_rows: bad range");
  auto an = a.node();
  const std::int64_t c = a.cols();
  return detail::op_result<T>(
      r1 - r0, c, {a},
      [&](TensorNode<T>& out) {
        std::copy(an->value.begin() + r0 * c, an->value.begin() + r1 * c,
                  out.value.begin());
      },
      [an, r0, c](TensorNode<T>& out) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::int64_t i = 0; i < out.size(); ++i)
          an->grad[r0 * c + i] += out.grad[i];
      },
      "slice_rows");
}

/// Row gather; index -1 yields a zero row. Backward scatter-adds.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, std::vector<std::int64_t> indices) {
  auto an = a.node();
  const std::int64_t c = a.cols();
  for (auto i : indices)
    require(i == -1 || (i >= 0 && i < a.rows()),
            "gather_rows: index out of range");
  auto idx = std::make_shared<std::vector<std::int64_t>>(std::move(indices));
  return detail::op_result<T>(
      static_cast<std::int64_t>(idx->size()), c, {a},
      [&](TensorNode<T>& out) {
        for (std::size_t i = 0; i < idx->size(); ++i) {
          auto src = (*idx)[i];
          if (src < 0) continue;  // already zero
          std::copy(an->value.begin() + src * c,
                    an->value.begin() + (src + 1) * c,
                    out.value.begin() + static_cast<std::int64_t>(i) * c);
        }
      },
      [an, idx, c](TensorNode<T>& out) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < idx->size(); ++i) {
          auto dst = (*idx)[i];
          if (dst < 0) continue;
          for (std::int64_t j = 0; j < c; ++j)
            an->grad[dst * c + j] +=
                out.grad[static_cast<std::int64_t>(i) * c + j];
        }
      },
      "gather_rows");
}

// ---------------------------------------------------------------------------
// Normalization / softmax / loss
// ---------------------------------------------------------------------------

/// Rows sum to 1; masked positions (mask != 0) are exactly zero. A fully
/// masked row violates the numeric contract.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& logits,
                         std::span<const std::uint8_t> mask) {
  const std::int64_t r = logits.rows(), c = logits.cols();
  require(static_cast<std::int64_t>(mask.size()) == r * c,
          "masked_softmax: mask extent mismatch");
  auto ln = logits.node();
  auto m = std::make_shared<std::vector<std::uint8_t>>(mask.begin(),
                                                       mask.end());
  return detail::op_result<T>(
      r, c, {logits},
      [&](TensorNode<T>& out) {
        for (std::int64_t i = 0; i < r; ++i) {
          const T* x = ln->value.data() + i * c;
          const std::uint8_t* mk = m->data() + i * c;
          T* o = out.value.data() + i * c;
          T mx = -std::numeric_limits<T>::infinity();
          for (std::int64_t j = 0; j < c; ++j)
            if (!mk[j]) mx = std::max(mx, x[j]);
          if (mx == -std::numeric_limits<T>::infinity())
            throw numeric_error("masked_softmax: fully masked row " +
                                std::to_string(i));
          T z = T(0);
          for (std::int64_t j = 0; j < c; ++j) {
            o[j] = mk[j] ? T(0) : std::exp(x[j] - mx);
            z += o[j];
          }
          T inv = T(1) / z;
          for (std::int64_t j = 0; j < c; ++j) o[j] *= inv;
        }
      },
      [ln, m, r, c](TensorNode<T>& out) {
        if (!ln->requires_grad) return;
        ln->ensure_grad();
        for (std::int64_t i = 0; i < r; ++i) {
          const T* p = out.value.data() + i * c;
          const T* dp = out.grad.data() + i * c;
          T dot = T(0);
          for (std::int64_t j = 0; j < c; ++j) dot += p[j] * dp[j];
          for (std::int64_t j = 0; j < c; ++j)
            ln->grad[i * c + j] += p[j] * (dp[j] - dot);
        }
      },
      "masked_softmax");
}

/// Per-row standardization followed by the gamma/beta affine map.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps = 1e-5) {
  const std::int64_t r = x.rows(), c = x.cols();
  require(eps > 0.0, "layer_norm: eps must be positive");
  require(gamma.rows() == 1 && gamma.cols() == c, "layer_norm: gamma shape");
  require(beta.rows() == 1 && beta.cols() == c, "layer_norm: beta shape");
  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  auto mu = std::make_shared<std::vector<T>>(r);
  auto rstd = std::make_shared<std::vector<T>>(r);
  return detail::op_result<T>(
      r, c, {x, gamma, beta},
      [&](TensorNode<T>& out) {
        for (std::int64_t i = 0; i < r; ++i) {
          const T* xi = xn->value.data() + i * c;
          T m = T(0);
          for (std::int64_t j = 0; j < c; ++j) m += xi[j];
          m /= static_cast<T>(c);
          T v = T(0);
          for (std::int64_t j = 0; j < c; ++j) v += (xi[j] - m) * (xi[j] - m);
          v /= static_cast<T>(c);
          T rs = T(1) / std::sqrt(v + static_cast<T>(eps));
          (*mu)[i] = m;
          (*rstd)[i] = rs;
          T* o = out.value.data() + i * c;
          for (std::int64_t j = 0; j < c; ++j)
            o[j] = (xi[j] - m) * rs * gn->value[j] + bn->value[j];
        }
      },
      [xn, gn, bn, mu, rstd, r, c](TensorNode<T>& out) {
        std::vector<T> xhat(static_cast<std::size_t>(c));
        for (std::int64_t i = 0; i < r; ++i) {
          const T* xi = xn->value.data() + i * c;
          const T* dy = out.grad.data() + i * c;
          T m = (*mu)[i], rs = (*rstd)[i];
          for (std::int64_t j = 0; j < c; ++j) xhat[j] = (xi[j] - m) * rs;
          if (gn->requires_grad) {
            gn->ensure_grad();
            for (std::int64_t j = 0; j < c; ++j)
              gn->grad[j] += dy[j] * xhat[j];
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::int64_t j = 0; j < c; ++j) bn->grad[j] += dy[j];
          }
          if (xn->requires_grad) {
            xn->ensure_grad();
            T mean_g = T(0), mean_gx = T(0);
            for (std::int64_t j = 0; j < c; ++j) {
              T g = dy[j] * gn->value[j];
              mean_g += g;
              mean_gx += g * xhat[j];
            }
            mean_g /= static_cast<T>(c);
            mean_gx /= static_cast<T>(c);
            for (std::int64_t j = 0; j < c; ++j) {
              T g = dy[j] * gn->value[j];
              xn->grad[i * c + j] += rs * (g - mean_g - xhat[j] * mean_gx);
            }
          }
        }
      },
      "layer_norm");
}

/// Mean over rows of -log softmax(logits)[label]; log-sum-exp stabilized.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits,
                        std::span<const std::int32_t> labels) {
  const std::int64_t r = logits.rows(), c = logits.cols();
  require(static_cast<std::int64_t>(labels.size()) == r,
          "cross_entropy: one label per row required");
  for (auto l : labels)
    require(l >= 0 && l < c, "cross_entropy: label out of range");
  auto ln = logits.node();
  auto lab = std::make_shared<std::vector<std::int32_t>>(labels.begin(),
                                                         labels.end());
  return detail::op_result<T>(
      1, 1, {logits},
      [&](TensorNode<T>& out) {
        T total = T(0);
        for (std::int64_t i = 0; i < r; ++i) {
          const T* x = ln->value.data() + i * c;
          T mx = x[0];
          for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
          T z = T(0);
          for (std::int64_t j = 0; j < c; ++j) z += std::exp(x[j] - mx);
          total += mx + std::log(z) - x[(*lab)[i]];
        }
        out.value[0] = total / static_cast<T>(r);
      },
      [ln, lab, r, c](TensorNode<T>& out) {
        if (!ln->requires_grad) return;
        ln->ensure_grad();
        const T g = out.grad[0] / static_cast<T>(r);
        for (std::int64_t i = 0; i < r; ++i) {
          const T* x = ln->value.data() + i * c;
          T mx = x[0];
          for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
          T z = T(0);
          for (std::int64_t j = 0; j < c; ++j) z += std::exp(x[j] - mx);
          T inv = T(1) / z;
          for (std::int64_t j = 0; j < c; ++j) {
            T p = std::exp(x[j] - mx) * inv;
            ln->grad[i * c + j] += g * (p - ((*lab)[i] == j ? T(1) : T(0)));
          }
        }
      },
      "cross_entropy");
}

}  // namespace hsgt
