#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hanet/data.hpp"
#include "hanet/errors.hpp"
#include "hanet/model.hpp"
#include "hanet/rng.hpp"

namespace hanet {

struct TrainConfig {
  std::size_t epochs = 3;
  double lr = 0.001;
  std::size_t batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  double grad_clip = 5.0;  // global L2 cap; <= 0 disables

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  }
};

struct AdamState {
  struct Slot {
    std::vector<double> m, v;
  };
  std::vector<Slot> slots;  // parallel to Parameters::named()
  std::uint64_t t = 0;

  static AdamState init(const Parameters& params) {
    AdamState s;
    for (auto& [name, tensor] : params.named()) {
      Slot slot;
      slot.m.assign(tensor.numel(), 0.0);
      slot.v.assign(tensor.numel(), 0.0);
      s.slots.push_back(std::move(slot));
    }
    return s;
  }
};

// Scales all gradients so the global L2 norm does not exceed max_norm.
// Returns the pre-clip norm.
inline double clip_gradients(Parameters& params, double max_norm) {
  double sq = 0.0;
  auto named = params.named();
  for (auto& [name, t] : named) {
    if (!t.has_grad()) continue;
    for (double gv : t.grad()) sq += gv * gv;
  }
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    double factor = max_norm / norm;
    for (auto& [name, t] : named) {
      if (!t.has_grad()) continue;
      for (double& gv : t.ensure_grad()) gv *= factor;
    }
  }
  return norm;
}

// One Adam update over every trainable tensor, reading the gradients that
// backward() accumulated in place. Non-finite gradients abort with the
// offending parameter's name. The PAD embedding row is forced back to zero
// afterwards, so the padding vector stays pinned whatever the moments say.
inline void adam_step(Parameters& params, AdamState& state,
                      const TrainConfig& cfg) {
  auto named = params.named();
  if (state.slots.size() != named.size())
    throw ContractError("adam_step: state does not match parameter registry");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t s = 0; s < named.size(); ++s) {
    auto& [name, tensor] = named[s];
    if (!tensor.requires_grad()) continue;
    if (!tensor.has_grad())
      throw ContractError("adam_step: no gradient for parameter '" + name +
                          "'");
    const auto& g = tensor.grad();
    auto& slot = state.slots[s];
    auto& theta = tensor.mutable_values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw NumericError("non-finite gradient in parameter '" + name + "'");
      slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * g[i];
      slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      double m_hat = slot.m[i] / bc1;
      double v_hat = slot.v[i] / bc2;
      theta[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
  // pin the padding row
  auto& emb = params.embedding.weights.mutable_values();
  const std::size_t e = params.embedding.dim();
  for (std::size_t c = 0; c < e; ++c)
    emb[EmbeddingTable::kPadId * e + c] = 0.0;
}

// One pass over the training documents: per batch, per-document graphs are
// built, backward() accumulates into the shared parameter grads (each
// document's loss scaled by 1/B so the batch gradient is the gradient of the
// batch mean), then clip + adam. Returns the mean per-document loss.
inline double train_epoch(Parameters& params, AdamState& state,
                          std::span<const Document> docs,
                          const ModelConfig& mcfg, const TrainConfig& tcfg,
                          std::size_t s_cap, std::size_t l_cap,
                          Rng& shuffle_rng, Rng& dropout_rng) {
  if (docs.empty()) throw ContractError("train_epoch: empty training split");
  auto batches =
      make_batches(docs, tcfg.batch_size, s_cap, l_cap, shuffle_rng, true);
  double loss_total = 0.0;
  std::size_t doc_count = 0;
  for (const Batch& batch : batches) {
    params.zero_grads();
    const double inv_b = 1.0 / static_cast<double>(batch.size);
    for (std::size_t d = 0; d < batch.size; ++d) {
      Graph g;
      Tensor logits =
          document_logits(g, batch, d, params, mcfg, Mode::Train, dropout_rng);
      Tensor loss = cross_entropy(g, logits, batch.labels[d]);
      double loss_value = loss.scalar_value();
      if (!std::isfinite(loss_value))
        throw NumericError("non-finite training loss at document " +
                           std::to_string(doc_count));
      loss_total += loss_value;
      ++doc_count;
      g.backward(scale(g, loss, inv_b));
    }
    clip_gradients(params, tcfg.grad_clip);
    adam_step(params, state, tcfg);
  }
  return loss_total / static_cast<double>(doc_count);
}

// Classification accuracy in eval mode (dropout off, nothing recorded).
// Documents are scored one by one, so the result cannot depend on document
// order or batch size. Attention statistics accumulate into *stats if given.
inline double evaluate(const Parameters& params, const ModelConfig& mcfg,
                       std::span<const Document> docs, std::size_t s_cap,
                       std::size_t l_cap,
                       AttentionStats::Accumulator* stats = nullptr) {
  if (docs.empty()) throw ContractError("evaluate: empty split");
  std::size_t correct = 0;
  Rng no_dropout(0);
  for (const Document& doc : docs) {
    Batch b = single_document_batch(doc, s_cap, l_cap);
    Graph g;
    g.set_recording(false);
    DocumentEncoding enc;
    Tensor logits =
        document_logits(g, b, 0, params, mcfg, Mode::Eval, no_dropout, &enc);
    if (stats) stats->add(enc.trace);
    if (predict(logits.values()).label == doc.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(docs.size());
}

struct MetricsRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_accuracy = 0.0;
  AttentionStats validation_stats;
  std::optional<double> test_accuracy;
  std::optional<AttentionStats> test_stats;
  double wall_time_s = 0.0;  // reported on stdout, never in metrics.csv
};

// The standard experimental procedure: train for cfg.epochs epochs,
// evaluating validation accuracy after each; after the last epoch also
// evaluate the test split (metric M). Fully deterministic given (seed,
// configs, corpus).
inline std::vector<MetricsRecord> run_training(
    Parameters& params, const ModelConfig& mcfg, const TrainConfig& tcfg,
    const CorpusSplits& splits, std::size_t s_cap, std::size_t l_cap) {
  tcfg.validate();
  AdamState state = AdamState::init(params);
  Rng root(tcfg.seed);
  Rng dropout_rng = root.fork("dropout");
  std::vector<MetricsRecord> records;
  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng = root.fork("shuffle", epoch);
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_epoch(params, state, splits.train, mcfg, tcfg,
                                 s_cap, l_cap, shuffle_rng, dropout_rng);
    AttentionStats::Accumulator val_acc_stats;
    rec.validation_accuracy = evaluate(params, mcfg, splits.validation, s_cap,
                                       l_cap, &val_acc_stats);
    rec.validation_stats = val_acc_stats.finalize();
    if (epoch == tcfg.epochs) {
      AttentionStats::Accumulator test_acc_stats;
      rec.test_accuracy =
          evaluate(params, mcfg, splits.test, s_cap, l_cap, &test_acc_stats);
      rec.test_stats = test_acc_stats.finalize();
    }
    rec.wall_time_s = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    records.push_back(rec);
  }
  return records;
}

}  // namespace hanet
