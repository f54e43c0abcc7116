#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lane/tensor.hpp"

namespace lane::ad {

// Ordered list of named parameter tensors.  Order is the serialization and
// gradient-reduction order, so it must be deterministic.
template <typename T>
class ParamSet {
 public:
  void add(Tensor<T> t) {
    LANE_CHECK(t.requires_grad(), "ParamSet: tensor '" + t.name() + "' is not a parameter");
    params_.push_back(std::move(t));
  }

  void extend(const ParamSet& other) {
    for (const auto& p : other.params_) params_.push_back(p);
  }

  size_t size() const { return params_.size(); }
  const Tensor<T>& operator[](size_t i) const { return params_[i]; }
  Tensor<T>& operator[](size_t i) { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::int64_t numel() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
  }

 private:
  std::vector<Tensor<T>> params_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam.  Moments are stored per parameter in registration
// order; the step counter increases by one per call.
template <typename T>
class Adam {
 public:
  Adam(const ParamSet<T>& params, AdamConfig cfg) : cfg_(cfg) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].data().size(), T(0));
      v_[i].assign(params[i].data().size(), T(0));
    }
  }

  long step_count() const { return step_; }
  void set_step_count(long s) { step_ = s; }
  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }

  // Applies one update using each parameter's .grad; missing grads are
  // treated as zero.  A non-finite gradient aborts, naming the parameter.
  void step(ParamSet<T>& params) {
    LANE_CHECK(params.size() == m_.size(), "Adam: parameter set changed size");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (!p.has_grad()) continue;
      auto& data = p.data();
      const auto& g = p.grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t j = 0; j < data.size(); ++j) {
        if (!std::isfinite(static_cast<double>(g[j])))
          LANE_FAIL("Adam: non-finite gradient in parameter '" + p.name() + "'");
        m[j] = static_cast<T>(cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j]);
        v[j] = static_cast<T>(cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j]);
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        data[j] -= static_cast<T>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

// Max relative error between analytic gradients and central finite
// differences: max_i |analytic_i - fd_i| / max(1, |analytic_i|).
// f must rebuild its graph on every call (it is evaluated 2*numel+1 times).
inline double grad_check(const std::function<Tensor<double>()>& f, Tensor<double>& x,
                         double h) {
  LANE_CHECK(h > 0, "grad_check: step must be positive");
  x.zero_grad();
  Tensor<double> loss = f();
  backward(loss);
  std::vector<double> analytic = x.grad();

  double worst = 0.0;
  for (size_t i = 0; i < x.data().size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    const double fp = f().item();
    x.data()[i] = orig - h;
    const double fm = f().item();
    x.data()[i] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

// Same check over a sampled subset of coordinates of several parameters;
// used for the end-to-end network checks where full sweeps are too slow.
inline double grad_check_params(const std::function<Tensor<double>()>& f,
                                ParamSet<double>& params, double h, int coords_per_param,
                                Rng& rng) {
  params.zero_grad();
  Tensor<double> loss = f();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& p : params)
    analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.data().size(), 0.0));

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    const size_t n = p.data().size();
    std::vector<size_t> coords;
    if (static_cast<int>(n) <= coords_per_param) {
      for (size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      std::uniform_int_distribution<size_t> dist(0, n - 1);
      for (int k = 0; k < coords_per_param; ++k) coords.push_back(dist(rng));
    }
    for (size_t i : coords) {
      const double orig = p.data()[i];
      p.data()[i] = orig + h;
      const double fp = f().item();
      p.data()[i] = orig - h;
      const double fm = f().item();
      p.data()[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double err =
          std::abs(analytic[pi][i] - fd) / std::max(1.0, std::abs(analytic[pi][i]));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace lane::ad
