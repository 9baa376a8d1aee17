#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "hsgt/tensor.hpp"

namespace hsgt {

/// Multi-head self-attention with an SPD-derived additive bias and
/// receptive-field masking, fused over Q/K/V column slices per head.
///
/// bias_index is row-major [n x n]. bias_scalars, when defined, is a
/// [heads x (max_spd + 1)] tensor of learnable per-distance offsets; when
/// undefined all finite bias terms are zero (structural-encoding ablation).
/// Heads are concatenated in the [n x d] output.
template <typename T>
Tensor<T> spd_attention(const Tensor<T>& q, const Tensor<T>& k,
                        const Tensor<T>& v, int heads,
                        std::span<const std::int8_t> bias_index, int max_spd,
                        const Tensor<T>& bias_scalars, double dropout_rate,
                        Rng& rng, bool train) {
  const std::int64_t n = q.rows();
  const std::int64_t d = q.cols();
  require(k.rows() == n && v.rows() == n && k.cols() == d && v.cols() == d,
          "spd_attention: Q/K/V shape mismatch");
  require(heads > 0 && d % heads == 0,
          "spd_attention: hidden size not divisible by heads");
  require(static_cast<std::int64_t>(bias_index.size()) == n * n,
          "spd_attention: bias index extent mismatch");
  const bool has_bias = bias_scalars.defined();
  if (has_bias)
    require(bias_scalars.rows() == heads &&
                bias_scalars.cols() == max_spd + 1,
            "spd_attention: bias scalar shape mismatch");
  const std::int64_t dh = d / heads;
  const T inv_sqrt = T(1) / static_cast<T>(std::sqrt(double(dh)));
  const bool drop = train && dropout_rate > 0.0;
  require(dropout_rate >= 0.0 && dropout_rate < 1.0,
          "spd_attention: dropout rate must lie in [0, 1)");

  auto qn = q.node();
  auto kn = k.node();
  auto vn = v.node();
  auto idx = std::make_shared<std::vector<std::int8_t>>(bias_index.begin(),
                                                        bias_index.end());
  auto probs = std::make_shared<std::vector<T>>(
      static_cast<std::size_t>(heads) * n * n);
  auto dropmask = std::make_shared<std::vector<std::uint8_t>>();
  if (drop) {
    dropmask->resize(probs->size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& m : *dropmask) m = unit(rng) >= dropout_rate ? 1 : 0;
  }
  const T inv_keep = T(1.0 / (1.0 - dropout_rate));

  std::vector<Tensor<T>> parents{q, k, v};
  if (has_bias) parents.push_back(bias_scalars);
  auto bn = has_bias ? bias_scalars.node() : nullptr;

  return detail::op_result<T>(
      n, d, parents,
      [&](TensorNode<T>& out) {
        std::vector<T> scratch(static_cast<std::size_t>(n) * n);
        for (int h = 0; h < heads; ++h) {
          T* s = scratch.data();
          gemm<T>(false, true, n, n, dh, inv_sqrt, qn->value.data() + h * dh,
                  d, kn->value.data() + h * dh, d, T(0), s, n);
          const T* b = has_bias ? bn->value.data() + h * (max_spd + 1)
                                : nullptr;
          T* p = probs->data() + static_cast<std::size_t>(h) * n * n;
          // masked logits get a finite sentinel whose exp underflows to an
          // exact +0, keeping the hot loop branch-free
          constexpr T kMaskedLogit = T(-1e30);
#pragma omp parallel for schedule(static)
          for (std::int64_t i = 0; i < n; ++i) {
            const std::int8_t* bi = idx->data() + i * n;
            T* si = s + i * n;
            T mx = kMaskedLogit;
            for (std::int64_t j = 0; j < n; ++j) {
              if (bi[j] == kBiasMasked) {
                si[j] = kMaskedLogit;
              } else {
                if (bi[j] >= 0 && b != nullptr) si[j] += b[bi[j]];
                mx = std::max(mx, si[j]);
              }
            }
            if (mx == kMaskedLogit)
              throw numeric_error("spd_attention: fully masked row");
            T* pi = p + i * n;
            T z = T(0);
            for (std::int64_t j = 0; j < n; ++j) {
              pi[j] = std::exp(si[j] - mx);
              z += pi[j];
            }
            T inv = T(1) / z;
            for (std::int64_t j = 0; j < n; ++j) pi[j] *= inv;
          }
          const T* pd = p;
          if (drop) {
            const std::uint8_t* m =
                dropmask->data() + static_cast<std::size_t>(h) * n * n;
            for (std::int64_t i = 0; i < n * n; ++i)
              s[i] = m[i] ? p[i] * inv_keep : T(0);
            pd = s;
          }
          gemm<T>(false, false, n, dh, n, T(1), pd, n,
                  vn->value.data() + h * dh, d, T(0),
                  out.value.data() + h * dh, d);
        }
      },
      [qn, kn, vn, bn, idx, probs, dropmask, heads, n, d, dh, inv_sqrt,
       max_spd, drop, inv_keep](TensorNode<T>& out) {
        std::vector<T> pd_storage;
        if (drop) pd_storage.resize(static_cast<std::size_t>(n) * n);
        std::vector<T> ds(static_cast<std::size_t>(n) * n);
        for (int h = 0; h < heads; ++h) {
          const T* p = probs->data() + static_cast<std::size_t>(h) * n * n;
          const std::uint8_t* m =
              drop ? dropmask->data() + static_cast<std::size_t>(h) * n * n
                   : nullptr;
          const T* dout = out.grad.data() + h * dh;
          const T* pd = p;  // without dropout the stored probs serve as-is
          if (drop) {
            for (std::int64_t i = 0; i < n * n; ++i)
              pd_storage[i] = m[i] ? p[i] * inv_keep : T(0);
            pd = pd_storage.data();
          }
          if (vn->requires_grad) {
            vn->ensure_grad();
            gemm<T>(true, false, n, dh, n, T(1), pd, n, dout, d, T(1),
                    vn->grad.data() + h * dh, d);
          }
          // dP(dropped) = dOut . V^T, then undo dropout and softmax.
          gemm<T>(false, true, n, n, dh, T(1), dout, d,
                  vn->value.data() + h * dh, d, T(0), ds.data(), n);
          if (drop)
            for (std::int64_t i = 0; i < n * n; ++i)
              ds[i] = m[i] ? ds[i] * inv_keep : T(0);
#pragma omp parallel for schedule(static)
          for (std::int64_t i = 0; i < n; ++i) {
            const T* pi = p + i * n;
            T* di = ds.data() + i * n;
            T dot = T(0);
            for (std::int64_t j = 0; j < n; ++j) dot += pi[j] * di[j];
            for (std::int64_t j = 0; j < n; ++j)
              di[j] = pi[j] * (di[j] - dot);
          }
          if (bn != nullptr && bn->requires_grad) {
            bn->ensure_grad();
            T* db = bn->grad.data() + h * (max_spd + 1);
            for (std::int64_t i = 0; i < n * n; ++i)
              if ((*idx)[i] >= 0) db[(*idx)[i]] += ds[i];
          }
          if (qn->requires_grad) {
            qn->ensure_grad();
            gemm<T>(false, false, n, dh, n, inv_sqrt, ds.data(), n,
                    kn->value.data() + h * dh, d, T(1),
                    qn->grad.data() + h * dh, d);
          }
          if (kn->requires_grad) {
            kn->ensure_grad();
            gemm<T>(true, false, n, dh, n, inv_sqrt, ds.data(), n,
                    qn->value.data() + h * dh, d, T(1),
                    kn->grad.data() + h * dh, d);
          }
        }
      },
      "spd_attention");
}

/// Multi-head cross-attention of one query row per segment against the
/// key/value rows of that segment. offsets has m + 1 entries with
/// offsets[0] == 0 and offsets[m] == K.rows(); segments must be non-empty.
template <typename T>
Tensor<T> segment_attention(const Tensor<T>& q, const Tensor<T>& k,
                            const Tensor<T>& v,
                            std::span<const std::int32_t> offsets, int heads,
                            double dropout_rate, Rng& rng, bool train) {
  const std::int64_t m = q.rows();
  const std::int64_t n = k.rows();
  const std::int64_t d = q.cols();
  require(k.cols() == d && v.cols() == d && v.rows() == n,
          "segment_attention: K/V shape mismatch");
  require(heads > 0 && d % heads == 0,
          "segment_attention: hidden size not divisible by heads");
  require(static_cast<std::int64_t>(offsets.size()) == m + 1 &&
              offsets[0] == 0 && offsets[m] == n,
          "segment_attention: bad segment offsets");
  for (std::int64_t s = 0; s < m; ++s)
    require(offsets[s] < offsets[s + 1],
            "segment_attention: empty segment " + std::to_string(s));
  const std::int64_t dh = d / heads;
  const T inv_sqrt = T(1) / static_cast<T>(std::sqrt(double(dh)));
  const bool drop = train && dropout_rate > 0.0;
  require(dropout_rate >= 0.0 && dropout_rate < 1.0,
          "segment_attention: dropout rate must lie in [0, 1)");

  auto qn = q.node();
  auto kn = k.node();
  auto vn = v.node();
  auto offs = std::make_shared<std::vector<std::int32_t>>(offsets.begin(),
                                                          offsets.end());
  auto probs = std::make_shared<std::vector<T>>(
      static_cast<std::size_t>(heads) * n);
  auto dropmask = std::make_shared<std::vector<std::uint8_t>>();
  if (drop) {
    dropmask->resize(probs->size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& x : *dropmask) x = unit(rng) >= dropout_rate ? 1 : 0;
  }
  const T inv_keep = T(1.0 / (1.0 - dropout_rate));

  return detail::op_result<T>(
      m, d, {q, k, v},
      [&](TensorNode<T>& out) {
        for (int h = 0; h < heads; ++h) {
          T* p = probs->data() + static_cast<std::size_t>(h) * n;
          const std::uint8_t* msk =
              drop ? dropmask->data() + static_cast<std::size_t>(h) * n
                   : nullptr;
          for (std::int64_t s = 0; s < m; ++s) {
            const std::int32_t j0 = (*offs)[s], j1 = (*offs)[s + 1];
            const T* qs = qn->value.data() + s * d + h * dh;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::int32_t j = j0; j < j1; ++j) {
              const T* kj = kn->value.data() + j * d + h * dh;
              T dot = T(0);
              for (std::int64_t t = 0; t < dh; ++t) dot += qs[t] * kj[t];
              p[j] = dot * inv_sqrt;
              mx = std::max(mx, p[j]);
            }
            T z = T(0);
            for (std::int32_t j = j0; j < j1; ++j) {
              p[j] = std::exp(p[j] - mx);
              z += p[j];
            }
            T inv = T(1) / z;
            for (std::int32_t j = j0; j < j1; ++j) p[j] *= inv;
            T* o = out.value.data() + s * d + h * dh;
            for (std::int32_t j = j0; j < j1; ++j) {
              T w = msk ? (msk[j] ? p[j] * inv_keep : T(0)) : p[j];
              const T* vj = vn->value.data() + j * d + h * dh;
              for (std::int64_t t = 0; t < dh; ++t) o[t] += w * vj[t];
            }
          }
        }
      },
      [qn, kn, vn, offs, probs, dropmask, heads, m, n, d, dh, inv_sqrt, drop,
       inv_keep](TensorNode<T>& out) {
        std::vector<T> dp(static_cast<std::size_t>(n));
        for (int h = 0; h < heads; ++h) {
          const T* p = probs->data() + static_cast<std::size_t>(h) * n;
          const std::uint8_t* msk =
              drop ? dropmask->data() + static_cast<std::size_t>(h) * n
                   : nullptr;
          for (std::int64_t s = 0; s < m; ++s) {
            const std::int32_t j0 = (*offs)[s], j1 = (*offs)[s + 1];
            const T* dout = out.grad.data() + s * d + h * dh;
            // dV and d(dropped probs)
            for (std::int32_t j = j0; j < j1; ++j) {
              T w = msk ? (msk[j] ? p[j] * inv_keep : T(0)) : p[j];
              const T* vj = vn->value.data() + j * d + h * dh;
              T dot = T(0);
              for (std::int64_t t = 0; t < dh; ++t) {
                dot += dout[t] * vj[t];
              }
              if (vn->requires_grad) {
                vn->ensure_grad();
                T* dvj = vn->grad.data() + j * d + h * dh;
                for (std::int64_t t = 0; t < dh; ++t) dvj[t] += w * dout[t];
              }
              dp[j] = msk ? (msk[j] ? dot * inv_keep : T(0)) : dot;
            }
            // softmax backward within the segment
            T dot_pp = T(0);
            for (std::int32_t j = j0; j < j1; ++j) dot_pp += p[j] * dp[j];
            for (std::int32_t j = j0; j < j1; ++j)
              dp[j] = p[j] * (dp[j] - dot_pp);
            // dQ and dK
            for (std::int32_t j = j0; j < j1; ++j) {
              const T ds = dp[j] * inv_sqrt;
              const T* kj = kn->value.data() + j * d + h * dh;
              const T* qs = qn->value.data() + s * d + h * dh;
              if (qn->requires_grad) {
                qn->ensure_grad();
                T* dq = qn->grad.data() + s * d + h * dh;
                for (std::int64_t t = 0; t < dh; ++t) dq[t] += ds * kj[t];
              }
              if (kn->requires_grad) {
                kn->ensure_grad();
                T* dk = kn->grad.data() + j * d + h * dh;
                for (std::int64_t t = 0; t < dh; ++t) dk[t] += ds * qs[t];
              }
            }
          }
        }
      },
      "segment_attention");
}

/// Per-segment mean of the input rows (vertical-block ablation path).
template <typename T>
Tensor<T> segment_mean(const Tensor<T>& x,
                       std::span<const std::int32_t> offsets) {
  const std::int64_t m = static_cast<std::int64_t>(offsets.size()) - 1;
  const std::int64_t d = x.cols();
  require(m >= 0 && offsets[0] == 0 &&
              offsets[m] == static_cast<std::int32_t>(x.rows()),
          "segment_mean: bad segment offsets");
  for (std::int64_t s = 0; s < m; ++s)
    require(offsets[s] < offsets[s + 1], "segment_mean: empty segment");
  auto xn = x.node();
  auto offs = std::make_shared<std::vector<std::int32_t>>(offsets.begin(),
                                                          offsets.end());
  return detail::op_result<T>(
      m, d, {x},
      [&](TensorNode<T>& out) {
        for (std::int64_t s = 0; s < m; ++s) {
          const std::int32_t j0 = (*offs)[s], j1 = (*offs)[s + 1];
          T* o = out.value.data() + s * d;
          for (std::int32_t j = j0; j < j1; ++j) {
            const T* xi = xn->value.data() + j * d;
            for (std::int64_t t = 0; t < d; ++t) o[t] += xi[t];
          }
          const T inv = T(1) / static_cast<T>(j1 - j0);
          for (std::int64_t t = 0; t < d; ++t) o[t] *= inv;
        }
      },
      [xn, offs, m, d](TensorNode<T>& out) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::int64_t s = 0; s < m; ++s) {
          const std::int32_t j0 = (*offs)[s], j1 = (*offs)[s + 1];
          const T inv = T(1) / static_cast<T>(j1 - j0);
          const T* go = out.grad.data() + s * d;
          for (std::int32_t j = j0; j < j1; ++j) {
            T* gx = xn->grad.data() + j * d;
            for (std::int64_t t = 0; t < d; ++t) gx[t] += inv * go[t];
          }
        }
      },
      "segment_mean");
}

}  // namespace hsgt
