#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "hanet/errors.hpp"
#include "hanet/tensor.hpp"

namespace hanet {

// Boolean mask over positions; empty means "all active". A false entry marks
// padding and is guaranteed to receive exactly zero weight from every
// transform below.
using Mask = std::vector<std::uint8_t>;

enum class AttentionVariant { Softmax, Sparsemax, Pruned };

// Selects which transform turns attention scores into weights, per level.
struct AttentionKind {
  AttentionVariant variant = AttentionVariant::Softmax;
  double alpha_min = 0.05;  // Pruned only

  static AttentionKind softmax() { return {AttentionVariant::Softmax, 0.0}; }
  static AttentionKind sparsemax() {
    return {AttentionVariant::Sparsemax, 0.0};
  }
  static AttentionKind pruned(double alpha_min = 0.05) {
    if (!(alpha_min > 0.0 && alpha_min < 1.0))
      throw ConfigError("pruned attention threshold must lie in (0,1), got " +
                        std::to_string(alpha_min));
    return {AttentionVariant::Pruned, alpha_min};
  }
};

namespace detail {

inline bool active(const Mask& mask, std::size_t i) {
  return mask.empty() || mask[i] != 0;
}

inline std::size_t count_active(const Mask& mask, std::size_t n) {
  if (mask.empty()) return n;
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += mask[i] ? 1 : 0;
  return c;
}

inline void require_unmasked(const Mask& mask, std::size_t n,
                             const char* op) {
  if (n == 0 || count_active(mask, n) == 0)
    throw ContractError(std::string(op) + ": no unmasked positions");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// value-level transforms
// ---------------------------------------------------------------------------

// Masked softmax with max-subtraction. Masked positions get exactly 0.
inline std::vector<double> softmax_values(std::span<const double> z,
                                          const Mask& mask = {}) {
  detail::require_unmasked(mask, z.size(), "softmax");
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i)
    if (detail::active(mask, i)) m = std::max(m, z[i]);
  std::vector<double> p(z.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (detail::active(mask, i)) {
      p[i] = std::exp(z[i] - m);
      total += p[i];
    }
  for (std::size_t i = 0; i < z.size(); ++i) p[i] /= total;
  return p;
}

struct SparsemaxResult {
  std::vector<double> p;        // projection; exact zeros off-support
  double tau = 0.0;             // threshold subtracted inside the support
  std::size_t support_size = 0; // k(z) from the sorted-threshold algorithm
};

// Euclidean projection of z onto the probability simplex via the sorted
// threshold construction:
//   sort active entries descending, k = max{k : 1 + k*z_(k) > sum_{j<=k} z_(j)},
//   tau = (sum_{j<=k} z_(j) - 1) / k,  p_i = max(z_i - tau, 0).
// Masked positions take no part and get exactly 0.
inline SparsemaxResult sparsemax_values(std::span<const double> z,
                                        const Mask& mask = {}) {
  detail::require_unmasked(mask, z.size(), "sparsemax");
  std::vector<double> sorted;
  sorted.reserve(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    if (detail::active(mask, i)) sorted.push_back(z[i]);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());

  double cumsum = 0.0;
  double support_sum = 0.0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumsum += sorted[j];
    if (1.0 + static_cast<double>(j + 1) * sorted[j] > cumsum) {
      k = j + 1;
      support_sum = cumsum;
    }
  }
  // k >= 1 always: the j = 0 condition reads 1 + z_(1) > z_(1).
  double tau = (support_sum - 1.0) / static_cast<double>(k);

  SparsemaxResult res;
  res.tau = tau;
  res.support_size = k;
  res.p.assign(z.size(), 0.0);
  for (std::size_t i = 0; i < z.size(); ++i)
    if (detail::active(mask, i)) res.p[i] = std::max(z[i] - tau, 0.0);
  return res;
}

// Jacobian-vector product of sparsemax. On the support S the Jacobian is
// diag(1_S) - 1_S 1_S^T / |S|, so each supported coordinate gets its upstream
// minus the support mean; everything else gets 0.
inline std::vector<double> sparsemax_backward(const SparsemaxResult& res,
                                              std::span<const double> upstream) {
  if (res.p.size() != upstream.size())
    throw DimensionError("sparsemax_backward: upstream length " +
                         std::to_string(upstream.size()) +
                         " does not match result length " +
                         std::to_string(res.p.size()));
  double mean = 0.0;
  std::size_t support = 0;
  for (std::size_t i = 0; i < res.p.size(); ++i)
    if (res.p[i] > 0.0) {
      mean += upstream[i];
      ++support;
    }
  if (support > 0) mean /= static_cast<double>(support);
  std::vector<double> grad(res.p.size(), 0.0);
  for (std::size_t i = 0; i < res.p.size(); ++i)
    if (res.p[i] > 0.0) grad[i] = upstream[i] - mean;
  return grad;
}

// Threshold pruning: weights strictly below alpha_min are zeroed and the
// survivors are renormalized to sum to 1. When every entry falls below the
// threshold the largest one (lowest index on ties) is kept with weight 1, so
// the function is total and never divides by zero.
inline std::vector<double> prune_renormalize(std::span<const double> alpha,
                                             double alpha_min) {
  if (alpha.empty()) throw ContractError("prune_renormalize: empty input");
  std::vector<double> out(alpha.size(), 0.0);
  double survivor_sum = 0.0;
  std::size_t survivors = 0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (!(alpha[i] < alpha_min)) {
      survivor_sum += alpha[i];
      ++survivors;
    }
  if (survivors == 0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < alpha.size(); ++i)
      if (alpha[i] > alpha[best]) best = i;
    out[best] = 1.0;
    return out;
  }
  survivor_sum = std::max(survivor_sum, 1e-12);
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (!(alpha[i] < alpha_min)) out[i] = alpha[i] / survivor_sum;
  return out;
}

// Gradient of prune_renormalize treating the survivor set as constant: the
// threshold indicator is piecewise constant, so only the smooth
// renormalization alpha_j / Z is differentiated. Quotient rule on survivors,
// zero elsewhere; the all-pruned fallback is constant and gets zero.
inline std::vector<double> prune_backward(std::span<const double> alpha,
                                          double alpha_min,
                                          std::span<const double> upstream) {
  if (alpha.size() != upstream.size())
    throw DimensionError("prune_backward: upstream length " +
                         std::to_string(upstream.size()) +
                         " does not match alpha length " +
                         std::to_string(alpha.size()));
  double z = 0.0;
  std::size_t survivors = 0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (!(alpha[i] < alpha_min)) {
      z += alpha[i];
      ++survivors;
    }
  std::vector<double> grad(alpha.size(), 0.0);
  if (survivors == 0) return grad;  // fallback branch: piecewise constant
  z = std::max(z, 1e-12);
  double weighted = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (!(alpha[i] < alpha_min)) weighted += upstream[i] * alpha[i];
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (!(alpha[i] < alpha_min)) grad[i] = (upstream[i] * z - weighted) / (z * z);
  return grad;
}

// ---------------------------------------------------------------------------
// tape-level transforms
// ---------------------------------------------------------------------------

inline Tensor softmax_weights(Graph& g, const Tensor& scores,
                              const Mask& mask = {}) {
  std::vector<double> p = softmax_values(scores.values(), mask);
  Tensor y = Tensor::from(scores.shape(), std::move(p), g.wants({&scores}));
  if (y.requires_grad()) {
    g.record(y, [zn = scores.node(), yn = y.node()] {
      auto& gz = detail::grad_buffer(zn);
      const auto& p = yn->data;
      const auto& gy = yn->grad;
      double dot = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * gy[i];
      for (std::size_t i = 0; i < p.size(); ++i)
        gz[i] += p[i] * (gy[i] - dot);  // masked: p=0 contributes nothing
    });
  }
  return y;
}

inline Tensor sparsemax_weights(Graph& g, const Tensor& scores,
                                const Mask& mask = {},
                                SparsemaxResult* info = nullptr) {
  SparsemaxResult res = sparsemax_values(scores.values(), mask);
  if (info) *info = res;
  Tensor y = Tensor::from(scores.shape(), res.p, g.wants({&scores}));
  if (y.requires_grad()) {
    g.record(y, [zn = scores.node(), yn = y.node(), res = std::move(res)] {
      std::vector<double> gz = sparsemax_backward(res, yn->grad);
      auto& acc = detail::grad_buffer(zn);
      for (std::size_t i = 0; i < gz.size(); ++i) acc[i] += gz[i];
    });
  }
  return y;
}

inline Tensor prune_weights(Graph& g, const Tensor& alpha, double alpha_min) {
  std::vector<double> p = prune_renormalize(alpha.values(), alpha_min);
  Tensor y = Tensor::from(alpha.shape(), std::move(p), g.wants({&alpha}));
  if (y.requires_grad()) {
    g.record(y, [an = alpha.node(), yn = y.node(), alpha_min] {
      std::vector<double> ga = prune_backward(an->data, alpha_min, yn->grad);
      auto& acc = detail::grad_buffer(an);
      for (std::size_t i = 0; i < ga.size(); ++i) acc[i] += ga[i];
    });
  }
  return y;
}

inline Tensor attention_weights(Graph& g, const Tensor& scores,
                                const AttentionKind& kind,
                                const Mask& mask = {},
                                SparsemaxResult* info = nullptr) {
  switch (kind.variant) {
    case AttentionVariant::Softmax:
      return softmax_weights(g, scores, mask);
    case AttentionVariant::Sparsemax:
      return sparsemax_weights(g, scores, mask, info);
    case AttentionVariant::Pruned:
      return prune_weights(g, softmax_weights(g, scores, mask),
                           kind.alpha_min);
  }
  throw ContractError("attention_weights: unknown kind");
}

struct AttentionOutput {
  Tensor weights;                    // [T] on the simplex, 0 at masked
  Tensor pooled;                     // [D] = sum_t weights_t * h_t
  std::vector<std::size_t> support;  // indices with weight > 0
};

// Diagnostic sink recording the raw scores fed into each transform; used by
// the gradient-check harness to verify that its probe points keep a safe
// distance from the transforms' non-differentiable boundaries.
struct AttentionProbe {
  struct Application {
    std::vector<double> scores;
    AttentionKind kind;
  };
  std::vector<Application> applications;
};

// Attention pooling over the rows of h: score each row against a trainable
// context vector through a one-layer tanh network, turn scores into weights
// with the selected transform, and pool h by those weights.
//
//   scores_t = tanh(W h_t + b) . context
//   alpha    = transform(scores)
//   pooled   = sum_t alpha_t h_t
inline AttentionOutput attend(Graph& g, const Tensor& h, const Tensor& context,
                              const Tensor& W, const Tensor& b,
                              const AttentionKind& kind, const Mask& mask = {},
                              AttentionProbe* probe = nullptr) {
  if (h.rank() != 2)
    throw DimensionError("attend: h must be rank-2, got " +
                         shape_str(h.shape()));
  detail::require_unmasked(mask, h.extent(0), "attend");
  Tensor u = tanh(g, add_bias(g, matmul(g, h, transpose(g, W)), b));  // [T,A]
  Tensor scores = matvec(g, u, context);                              // [T]
  if (probe) probe->applications.push_back({scores.values(), kind});
  Tensor alpha = attention_weights(g, scores, kind, mask);
  Tensor pooled =
      reshape(g, matmul(g, reshape(g, alpha, {1, alpha.numel()}), h),
              {h.extent(1)});
  AttentionOutput out;
  out.weights = alpha;
  out.pooled = pooled;
  for (std::size_t i = 0; i < alpha.numel(); ++i)
    if (alpha[i] > 0.0) out.support.push_back(i);
  return out;
}

}  // namespace hanet
