#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "getkos/nn.hpp"
#include "getkos/rng.hpp"

namespace getkos::testing {

using nn::Activation;
using nn::ArchSpec;
using nn::MLPModel;
using nn::backward;
using nn::init_model;

// Independent scalar-loop forward pass in extended precision. Used as the
// oracle for forward() and as the loss for finite differences.
inline std::vector<long double> oracle_forward(const MLPModel& m, const Matrix& X) {
  std::vector<long double> out;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    std::vector<long double> a(X.row(i).begin(), X.row(i).end());
    for (const auto& l : m.layers) {
      std::vector<long double> z(l.out_dim());
      for (std::size_t j = 0; j < l.out_dim(); ++j) {
        long double s = l.bias[j];
        for (std::size_t k = 0; k < l.in_dim(); ++k) s += a[k] * (long double)l.weights(k, j);
        z[j] = (l.activation == Activation::relu && s < 0) ? 0.0L : s;
      }
      a = std::move(z);
    }
    out.push_back(a[0]);
  }
  return out;
}

inline long double oracle_mae(const MLPModel& m, const Matrix& X, const std::vector<double>& y) {
  const auto p = oracle_forward(m, X);
  long double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - (long double)y[i]);
  return s / p.size();
}

// Smallest |pre-activation| over all hidden units, and smallest |residual|.
inline std::pair<double, double> kink_margins(const MLPModel& m, const Matrix& X,
                                       const std::vector<double>& y) {
  double pre_min = INFINITY, res_min = INFINITY;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    std::vector<double> a(X.row(i).begin(), X.row(i).end());
    for (const auto& l : m.layers) {
      std::vector<double> z(l.out_dim());
      for (std::size_t j = 0; j < l.out_dim(); ++j) {
        double s = l.bias[j];
        for (std::size_t k = 0; k < l.in_dim(); ++k) s += a[k] * l.weights(k, j);
        if (l.activation == Activation::relu) pre_min = std::min(pre_min, std::abs(s));
        z[j] = (l.activation == Activation::relu && s < 0) ? 0.0 : s;
      }
      a = std::move(z);
    }
    res_min = std::min(res_min, std::abs(a[0] - y[i]));
  }
  return {pre_min, res_min};
}

struct Case {
  MLPModel model;
  Matrix X;
  std::vector<double> y;
};

inline Case random_case(Rng& rng) {
  for (;;) {
    ArchSpec arch{1 + rng.below(6), {}};
    const auto depth = rng.below(4);  // 0..3 hidden layers
    for (std::size_t d = 0; d < depth; ++d) arch.hidden.push_back(1 + rng.below(16));
    auto model = init_model(arch, rng.next_u64());
    for (auto& l : model.layers) {
      for (auto& b : l.bias) b = 0.3 * rng.normal();
    }
    const std::size_t n = 1 + rng.below(8);
    Matrix X(n, arch.input_dim);
    for (auto& v : X.values()) v = rng.normal();
    std::vector<double> y(n);
    for (auto& v : y) v = 2.0 * rng.normal();
    const auto [pre, res] = kink_margins(model, X, y);
    if (pre > 1e-3 && res > 1e-3) return {std::move(model), std::move(X), std::move(y)};
  }
}

inline double max_fd_relative_error(Case c) {
  const auto analytic = backward(c.model, c.X, c.y);
  double worst = 0.0;
  auto check = [&](double& theta, double a) {
    const double saved = theta;
    const double h = 1e-6 * std::max(1.0, std::abs(saved));
    theta = saved + h;
    const long double up = oracle_mae(c.model, c.X, c.y);
    theta = saved - h;
    const long double down = oracle_mae(c.model, c.X, c.y);
    theta = saved;
    const double numeric = static_cast<double>((up - down) / (2.0L * h));
    const double denom = std::max(std::abs(a), std::abs(numeric));
    if (denom > 1e-12) worst = std::max(worst, std::abs(a - numeric) / denom);
  };
  auto& model = c.model;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& w = model.layers[l].weights.values();
    for (std::size_t i = 0; i < w.size(); ++i) check(w[i], analytic[l].weights.values()[i]);
    auto& b = model.layers[l].bias;
    for (std::size_t i = 0; i < b.size(); ++i) check(b[i], analytic[l].bias[i]);
  }
  return worst;
}

}  // namespace getkos::testing
