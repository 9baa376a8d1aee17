#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hsgt/tensor.hpp"

namespace hsgt {

/// Learnable tensor plus AdamW state.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  std::vector<T> m1;  // first moment
  std::vector<T> m2;  // second moment
  std::int64_t step = 0;

  std::int64_t size() const { return value.size(); }
};

/// Owns parameters in creation order; names are unique and stable, which
/// fixes initialization, checkpoint layout, and count queries.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& create(std::string name, std::int64_t rows, std::int64_t cols,
                       T init_value = T(0)) {
    auto p = std::make_unique<Parameter<T>>();
    p->name = std::move(name);
    p->value = Tensor<T>::zeros(rows, cols, /*requires_grad=*/true);
    if (init_value != T(0))
      std::fill(p->value.values().begin(), p->value.values().end(),
                init_value);
    p->m1.assign(static_cast<std::size_t>(rows * cols), T(0));
    p->m2.assign(static_cast<std::size_t>(rows * cols), T(0));
    params_.push_back(std::move(p));
    return *params_.back();
  }

  /// Uniform init scaled by 1/sqrt(fan_in).
  Parameter<T>& create_uniform(std::string name, std::int64_t rows,
                               std::int64_t cols, std::int64_t fan_in,
                               Rng& rng) {
    auto& p = create(std::move(name), rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : p.value.values()) v = static_cast<T>(dist(rng));
    return p;
  }

  std::vector<Parameter<T>*> all() const {
    std::vector<Parameter<T>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::int64_t total_size() const {
    std::int64_t n = 0;
    for (auto& p : params_) n += p->size();
    return n;
  }

  std::int64_t size_with_prefix(const std::string& prefix) const {
    std::int64_t n = 0;
    for (auto& p : params_)
      if (p->name.rfind(prefix, 0) == 0) n += p->size();
    return n;
  }

  Parameter<T>* find(const std::string& name) const {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  /// Allocates and clears every gradient; parameters outside the active
  /// compute path then step with a zero gradient (decay still applies).
  void zero_grad() {
    for (auto& p : params_) {
      p->value.node()->ensure_grad();
      p->value.zero_grad();
    }
  }

  /// Flat copy of all parameter values (best-checkpoint snapshots).
  std::vector<std::vector<T>> snapshot_values() const {
    std::vector<std::vector<T>> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p->value.values());
    return out;
  }
  void restore_values(const std::vector<std::vector<T>>& snap) {
    require(snap.size() == params_.size(), "snapshot size mismatch");
    for (std::size_t i = 0; i < snap.size(); ++i) {
      require(snap[i].size() == params_[i]->value.values().size(),
              "snapshot tensor extent mismatch");
      params_[i]->value.values() = snap[i];
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

/// Bias-corrected Adam update plus decoupled weight decay.
template <typename T>
void adamw_step(std::span<Parameter<T>* const> params,
                const AdamWConfig& cfg) {
  for (Parameter<T>* p : params) {
    require(!p->value.grad().empty(),
            "adamw_step before any backward pass (parameter " + p->name +
                ")");
    p->step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(p->step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(p->step));
    auto& val = p->value.values();
    const auto& g = p->value.grad();
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double gi = double(g[i]);
      const double m1 = cfg.beta1 * double(p->m1[i]) + (1.0 - cfg.beta1) * gi;
      const double m2 =
          cfg.beta2 * double(p->m2[i]) + (1.0 - cfg.beta2) * gi * gi;
      p->m1[i] = T(m1);
      p->m2[i] = T(m2);
      const double update = (m1 / bc1) / (std::sqrt(m2 / bc2) + cfg.eps);
      const double decay = cfg.weight_decay * double(val[i]);
      val[i] = T(double(val[i]) - cfg.lr * (update + decay));
    }
  }
}

/// Central differences against tape gradients. `loss_fn` must rebuild the
/// forward pass from the current parameter values. Returns the max relative
/// error with an absolute floor of 1e-8. Meaningful in double precision.
template <typename T, typename LossFn>
double finite_difference_check(LossFn&& loss_fn,
                               std::span<Parameter<T>* const> params,
                               double eps = 1e-5) {
  require(eps > 0.0, "finite_difference_check: eps must be positive");
  for (auto* p : params) p->value.zero_grad();
  Tensor<T> loss = loss_fn();
  require_numeric(std::isfinite(double(loss.item())),
                  "finite_difference_check: non-finite loss");
  backward(loss);
  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) {
    if (p->value.grad().empty())
      analytic.emplace_back(p->value.values().size(), T(0));
    else
      analytic.push_back(p->value.grad());
  }

  double worst = 0.0;
  NoGradGuard ng;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& val = params[pi]->value.values();
    for (std::size_t i = 0; i < val.size(); ++i) {
      const T keep = val[i];
      val[i] = T(double(keep) + eps);
      const double up = double(loss_fn().item());
      val[i] = T(double(keep) - eps);
      const double dn = double(loss_fn().item());
      val[i] = keep;
      require_numeric(std::isfinite(up) && std::isfinite(dn),
                      "finite_difference_check: non-finite perturbed loss");
      const double fd = (up - dn) / (2.0 * eps);
      const double an = double(analytic[pi][i]);
      // differences at or below the absolute floor are indistinguishable
      // from central-difference rounding noise (structurally-zero grads)
      const double diff = std::abs(fd - an);
      if (diff <= 1e-8) continue;
      worst = std::max(worst,
                       diff / std::max({1e-8, std::abs(fd), std::abs(an)}));
    }
  }
  return worst;
}

}  // namespace hsgt
