#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

#include "hanet/tensor.hpp"

namespace hanet {

// Central finite differences of a scalar-valued function, the independent
// oracle every analytic adjoint in this library is checked against. f must be
// deterministic; x itself is never written.
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                               const Tensor& x, double h = 1e-5) {
  if (!(h > 0.0)) throw ContractError("finite_diff_grad: step must be > 0");
  std::vector<double> base = x.values();
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> plus = base;
    std::vector<double> minus = base;
    plus[i] += h;
    minus[i] -= h;
    out[i] = (f(Tensor::from(x.shape(), std::move(plus))) -
              f(Tensor::from(x.shape(), std::move(minus)))) /
             (2.0 * h);
  }
  return Tensor::from(x.shape(), std::move(out));
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor turns the metric
// into an absolute comparison for near-zero coordinates, where pure relative
// error is dominated by finite-difference noise.
inline double max_rel_err(std::span<const double> a, std::span<const double> b,
                          double floor) {
  if (a.size() != b.size())
    throw DimensionError("max_rel_err: length mismatch " +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace hanet
