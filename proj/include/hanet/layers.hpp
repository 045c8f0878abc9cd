#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hanet/errors.hpp"
#include "hanet/rng.hpp"
#include "hanet/tensor.hpp"

namespace hanet {

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// embedding
// ---------------------------------------------------------------------------

// Word embedding matrix [V, E]. Row 0 is the padding row and stays all-zero;
// the optimizer re-zeroes it after every step. Row 1 is the unknown token.
struct EmbeddingTable {
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  Tensor weights;  // [V, E]

  std::size_t vocab_size() const { return weights.extent(0); }
  std::size_t dim() const { return weights.extent(1); }

  static EmbeddingTable random_init(std::size_t vocab, std::size_t dim,
                                    Rng& rng, bool trainable = true) {
    std::vector<double> data(vocab * dim, 0.0);
    for (std::size_t r = 1; r < vocab; ++r)  // row 0 stays zero
      for (std::size_t c = 0; c < dim; ++c)
        data[r * dim + c] = rng.uniform(-0.1, 0.1);
    EmbeddingTable t;
    t.weights = Tensor::from({vocab, dim}, std::move(data), trainable);
    return t;
  }
};

// Row gather: ids (length T) -> [T, E]. The backward pass scatter-adds each
// output row's gradient into the corresponding table row, so repeated ids
// accumulate one contribution per occurrence.
inline Tensor embed(Graph& g, const EmbeddingTable& table,
                    std::span<const int> ids) {
  const std::size_t v = table.vocab_size(), e = table.dim();
  std::vector<double> out;
  out.reserve(ids.size() * e);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v)
      throw VocabError("embed: token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(v));
    const double* row = table.weights.values().data() +
                        static_cast<std::size_t>(id) * e;
    out.insert(out.end(), row, row + e);
  }
  Tensor y = Tensor::from({ids.size(), e}, std::move(out),
                          g.wants({&table.weights}));
  if (y.requires_grad()) {
    std::vector<int> idv(ids.begin(), ids.end());
    g.record(y, [tn = table.weights.node(), yn = y.node(),
                 idv = std::move(idv), e] {
      auto& gt = detail::grad_buffer(tn);
      for (std::size_t t = 0; t < idv.size(); ++t) {
        double* grow = gt.data() + static_cast<std::size_t>(idv[t]) * e;
        const double* gy = yn->grad.data() + t * e;
        for (std::size_t i = 0; i < e; ++i) grow[i] += gy[i];
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

// Standard Cho-style GRU cell parameters, one set per gate:
//   z = sigmoid(W_z x + U_z h + b_z)
//   r = sigmoid(W_r x + U_r h + b_r)
//   n = tanh(W_n x + r .* (U_n h) + b_n)
//   h' = (1 - z) .* n + z .* h
struct GruParams {
  Tensor W_z, U_z, b_z;
  Tensor W_r, U_r, b_r;
  Tensor W_n, U_n, b_n;

  std::size_t hidden_size() const { return W_z.extent(0); }
  std::size_t input_size() const { return W_z.extent(1); }

  static GruParams init(std::size_t hidden, std::size_t input, Rng& rng) {
    auto weight = [&](std::size_t rows, std::size_t cols) {
      double bound = 1.0 / std::sqrt(static_cast<double>(cols));
      std::vector<double> data(rows * cols);
      for (double& x : data) x = rng.uniform(-bound, bound);
      return Tensor::from({rows, cols}, std::move(data), true);
    };
    GruParams p;
    p.W_z = weight(hidden, input);
    p.U_z = weight(hidden, hidden);
    p.b_z = Tensor::zeros({hidden}, true);
    p.W_r = weight(hidden, input);
    p.U_r = weight(hidden, hidden);
    p.b_r = Tensor::zeros({hidden}, true);
    p.W_n = weight(hidden, input);
    p.U_n = weight(hidden, hidden);
    p.b_n = Tensor::zeros({hidden}, true);
    return p;
  }

  std::vector<std::pair<std::string, Tensor>> named(
      const std::string& prefix) const {
    return {{prefix + ".W_z", W_z}, {prefix + ".U_z", U_z},
            {prefix + ".b_z", b_z}, {prefix + ".W_r", W_r},
            {prefix + ".U_r", U_r}, {prefix + ".b_r", b_r},
            {prefix + ".W_n", W_n}, {prefix + ".U_n", U_n},
            {prefix + ".b_n", b_n}};
  }
};

inline Tensor gru_step(Graph& g, const Tensor& x_t, const Tensor& h_prev,
                       const GruParams& p) {
  if (x_t.rank() != 1 || x_t.extent(0) != p.input_size())
    throw DimensionError("gru_step: input shape " + shape_str(x_t.shape()) +
                         " does not match cell input size " +
                         std::to_string(p.input_size()));
  if (h_prev.rank() != 1 || h_prev.extent(0) != p.hidden_size())
    throw DimensionError("gru_step: state shape " + shape_str(h_prev.shape()) +
                         " does not match hidden size " +
                         std::to_string(p.hidden_size()));
  Tensor z = sigmoid(
      g, add(g, add(g, matvec(g, p.W_z, x_t), matvec(g, p.U_z, h_prev)),
             p.b_z));
  Tensor r = sigmoid(
      g, add(g, add(g, matvec(g, p.W_r, x_t), matvec(g, p.U_r, h_prev)),
             p.b_r));
  Tensor n = tanh(
      g, add(g, add(g, matvec(g, p.W_n, x_t),
                    mul(g, r, matvec(g, p.U_n, h_prev))),
             p.b_n));
  Tensor ones = Tensor::full({p.hidden_size()}, 1.0);
  return add(g, mul(g, sub(g, ones, z), n), mul(g, z, h_prev));
}

// Bidirectional GRU over the rows of xs [T, I]: left-to-right and
// right-to-left passes from zero states, concatenated per step to [T, 2H].
// The caller is responsible for trimming padding; every row given here is
// treated as a real timestep.
inline Tensor bigru(Graph& g, const Tensor& xs, const GruParams& fwd,
                    const GruParams& bwd) {
  if (xs.rank() != 2)
    throw DimensionError("bigru: expected [T, I] input, got " +
                         shape_str(xs.shape()));
  const std::size_t t_len = xs.extent(0);
  if (t_len == 0) throw ContractError("bigru: empty sequence");
  const std::size_t h = fwd.hidden_size();

  std::vector<Tensor> fwd_states(t_len), bwd_states(t_len);
  Tensor state = Tensor::zeros({h});
  for (std::size_t t = 0; t < t_len; ++t) {
    state = gru_step(g, slice_row(g, xs, t), state, fwd);
    fwd_states[t] = state;
  }
  state = Tensor::zeros({h});
  for (std::size_t t = t_len; t-- > 0;) {
    state = gru_step(g, slice_row(g, xs, t), state, bwd);
    bwd_states[t] = state;
  }
  std::vector<Tensor> rows(t_len);
  for (std::size_t t = 0; t < t_len; ++t)
    rows[t] = concat(g, fwd_states[t], bwd_states[t]);
  return stack_rows(g, rows);
}

// ---------------------------------------------------------------------------
// affine / dropout / loss
// ---------------------------------------------------------------------------

// x [I] or [T, I], W [O, I], b [O] -> x W^T + b over the last axis.
inline Tensor linear(Graph& g, const Tensor& x, const Tensor& W,
                     const Tensor& b) {
  if (W.rank() != 2 || b.rank() != 1 || W.extent(0) != b.extent(0))
    throw DimensionError("linear: weight " + shape_str(W.shape()) +
                         " and bias " + shape_str(b.shape()) +
                         " are inconsistent");
  if (x.rank() == 1) {
    if (x.extent(0) != W.extent(1))
      throw DimensionError("linear: input " + shape_str(x.shape()) +
                           " does not match weight " + shape_str(W.shape()));
    return add(g, matvec(g, W, x), b);
  }
  if (x.rank() == 2) {
    if (x.extent(1) != W.extent(1))
      throw DimensionError("linear: input " + shape_str(x.shape()) +
                           " does not match weight " + shape_str(W.shape()));
    return add_bias(g, matmul(g, x, transpose(g, W)), b);
  }
  throw DimensionError("linear: expected rank-1 or rank-2 input, got " +
                       shape_str(x.shape()));
}

// Inverted dropout: each element is zeroed with probability p at train time
// and the survivors are scaled by 1/(1-p), so eval mode is the identity.
inline Tensor dropout(Graph& g, const Tensor& x, double p, Mode mode,
                      Rng& rng) {
  if (!(p >= 0.0 && p < 1.0))
    throw ConfigError("dropout probability must lie in [0,1), got " +
                      std::to_string(p));
  if (mode == Mode::Eval || p == 0.0) return x;
  std::vector<double> mask_data(x.numel());
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask_data) m = rng.bernoulli(p) ? 0.0 : keep_scale;
  Tensor mask = Tensor::from(x.shape(), std::move(mask_data));
  return mul(g, x, mask);
}

// -log softmax(logits)[label], with max-subtraction. The recorded adjoint is
// softmax(logits) - onehot(label).
inline Tensor cross_entropy(Graph& g, const Tensor& logits, int label) {
  if (logits.rank() != 1 || logits.extent(0) < 2)
    throw DimensionError("cross_entropy: logits must be [C] with C >= 2, got " +
                         shape_str(logits.shape()));
  const std::size_t c = logits.extent(0);
  if (label < 0 || static_cast<std::size_t>(label) >= c)
    throw ContractError("cross_entropy: label " + std::to_string(label) +
                        " out of range for " + std::to_string(c) + " classes");
  double m = logits[0];
  for (std::size_t i = 1; i < c; ++i) m = std::max(m, logits[i]);
  double total = 0.0;
  std::vector<double> probs(c);
  for (std::size_t i = 0; i < c; ++i) {
    probs[i] = std::exp(logits[i] - m);
    total += probs[i];
  }
  for (double& q : probs) q /= total;
  double loss =
      -(logits[static_cast<std::size_t>(label)] - m - std::log(total));
  Tensor y = Tensor::scalar(loss, g.wants({&logits}));
  if (y.requires_grad()) {
    g.record(y, [ln = logits.node(), yn = y.node(), probs = std::move(probs),
                 label] {
      auto& gl = detail::grad_buffer(ln);
      double gy = yn->grad[0];
      for (std::size_t i = 0; i < gl.size(); ++i) {
        double delta = (static_cast<int>(i) == label) ? 1.0 : 0.0;
        gl[i] += gy * (probs[i] - delta);
      }
    });
  }
  return y;
}

}  // namespace hanet
