#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hanet/attention.hpp"
#include "hanet/errors.hpp"
#include "hanet/layers.hpp"
#include "hanet/rng.hpp"
#include "hanet/tensor.hpp"

namespace hanet {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 200;
  std::size_t gru_hidden = 50;
  std::size_t num_classes = 2;
  AttentionKind word_attention = AttentionKind::softmax();
  AttentionKind sentence_attention = AttentionKind::softmax();
  double dropout_p = 0.1;
  bool dropout_on_embeddings = true;
  bool dropout_on_doc_vector = true;
  bool finetune_embeddings = true;

  std::size_t attention_dim() const { return 2 * gru_hidden; }

  void validate() const {
    if (vocab_size < 2)
      throw ConfigError("vocab_size must cover the reserved PAD/UNK entries");
    if (embed_dim == 0 || gru_hidden == 0 || num_classes == 0)
      throw ConfigError("embed_dim, gru_hidden and num_classes must be >= 1");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
      throw ConfigError("dropout_p must lie in [0,1)");
  }

  // The three model presets. alpha_min only applies to hpan.
  static ModelConfig preset(const std::string& name, std::size_t vocab,
                            std::size_t classes, double alpha_min = 0.05) {
    ModelConfig c;
    c.vocab_size = vocab;
    c.num_classes = classes;
    if (name == "han") {
      c.word_attention = AttentionKind::softmax();
      c.sentence_attention = AttentionKind::softmax();
    } else if (name == "hpan") {
      c.word_attention = AttentionKind::pruned(alpha_min);
      c.sentence_attention = AttentionKind::pruned(alpha_min);
    } else if (name == "hsan") {
      c.word_attention = AttentionKind::sparsemax();
      c.sentence_attention = AttentionKind::sparsemax();
    } else {
      throw ConfigError("unknown model preset '" + name +
                        "' (expected han, hpan or hsan)");
    }
    return c;
  }
};

inline const char* attention_variant_name(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::Softmax: return "softmax";
    case AttentionVariant::Sparsemax: return "sparsemax";
    case AttentionVariant::Pruned: return "pruned";
  }
  return "?";
}

// All trainable state. Word-level GRUs read embeddings (I = E); the
// sentence-level GRUs read pooled sentence vectors (I = 2H). Both attention
// blocks score 2H-dimensional states through an A = 2H projection.
struct Parameters {
  EmbeddingTable embedding;
  GruParams word_gru_fwd, word_gru_bwd;
  GruParams sent_gru_fwd, sent_gru_bwd;
  Tensor word_attn_W, word_attn_b, word_attn_u;
  Tensor sent_attn_W, sent_attn_b, sent_attn_u;
  Tensor classifier_W, classifier_b;

  static Parameters init(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t h = cfg.gru_hidden, a = cfg.attention_dim();
    auto weight = [&rng](std::size_t rows, std::size_t cols) {
      double bound = 1.0 / std::sqrt(static_cast<double>(cols));
      std::vector<double> data(rows * cols);
      for (double& x : data) x = rng.uniform(-bound, bound);
      return Tensor::from({rows, cols}, std::move(data), true);
    };
    auto context = [&rng](std::size_t n) {
      std::vector<double> data(n);
      for (double& x : data) x = rng.uniform(-0.1, 0.1);
      return Tensor::from({n}, std::move(data), true);
    };
    Parameters p;
    p.embedding = EmbeddingTable::random_init(cfg.vocab_size, cfg.embed_dim,
                                              rng, cfg.finetune_embeddings);
    p.word_gru_fwd = GruParams::init(h, cfg.embed_dim, rng);
    p.word_gru_bwd = GruParams::init(h, cfg.embed_dim, rng);
    p.sent_gru_fwd = GruParams::init(h, 2 * h, rng);
    p.sent_gru_bwd = GruParams::init(h, 2 * h, rng);
    p.word_attn_W = weight(a, 2 * h);
    p.word_attn_b = Tensor::zeros({a}, true);
    p.word_attn_u = context(a);
    p.sent_attn_W = weight(a, 2 * h);
    p.sent_attn_b = Tensor::zeros({a}, true);
    p.sent_attn_u = context(a);
    p.classifier_W = weight(cfg.num_classes, 2 * h);
    p.classifier_b = Tensor::zeros({cfg.num_classes}, true);
    return p;
  }

  // Fixed registry order: drives optimizer slots, clipping, checkpoints and
  // gradcheck reports, so it must stay stable.
  std::vector<std::pair<std::string, Tensor>> named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("embedding", embedding.weights);
    for (auto& kv : word_gru_fwd.named("word_gru_fwd")) out.push_back(kv);
    for (auto& kv : word_gru_bwd.named("word_gru_bwd")) out.push_back(kv);
    for (auto& kv : sent_gru_fwd.named("sent_gru_fwd")) out.push_back(kv);
    for (auto& kv : sent_gru_bwd.named("sent_gru_bwd")) out.push_back(kv);
    out.emplace_back("word_attn.W", word_attn_W);
    out.emplace_back("word_attn.b", word_attn_b);
    out.emplace_back("word_attn.u", word_attn_u);
    out.emplace_back("sent_attn.W", sent_attn_W);
    out.emplace_back("sent_attn.b", sent_attn_b);
    out.emplace_back("sent_attn.u", sent_attn_u);
    out.emplace_back("classifier.W", classifier_W);
    out.emplace_back("classifier.b", classifier_b);
    return out;
  }

  void zero_grads() {
    for (auto& [name, t] : named()) t.zero_grad();
  }
};

// Padded batch of documents: token_ids and word_mask are (B, S, L) row-major,
// sentence_mask is (B, S). Mask false marks padding. Padding always trails
// the real tokens/sentences (head truncation, tail padding).
struct Batch {
  std::size_t size = 0;       // B
  std::size_t sentences = 0;  // S
  std::size_t words = 0;      // L
  std::vector<int> token_ids;
  std::vector<std::uint8_t> word_mask;
  std::vector<std::uint8_t> sentence_mask;
  std::vector<int> labels;

  std::span<const int> word_ids(std::size_t b, std::size_t s) const {
    return {token_ids.data() + (b * sentences + s) * words, words};
  }
  std::span<const std::uint8_t> word_mask_row(std::size_t b,
                                              std::size_t s) const {
    return {word_mask.data() + (b * sentences + s) * words, words};
  }
  std::span<const std::uint8_t> sentence_mask_row(std::size_t b) const {
    return {sentence_mask.data() + b * sentences, sentences};
  }
};

// Attention weights reported at padded length for one document: per-sentence
// word weights plus the sentence weights, with the masks needed to tell real
// zeros from padding.
struct DocumentAttentionTrace {
  std::vector<std::vector<double>> word_alphas;  // [S][L], 0 at padding
  std::vector<std::vector<std::uint8_t>> word_masks;
  std::vector<double> sent_alphas;  // [S], 0 at padding
  std::vector<std::uint8_t> sent_mask;
  std::vector<std::size_t> word_support_sizes;  // one per real sentence
  std::size_t sent_support_size = 0;
};

struct DocumentEncoding {
  Tensor doc_vector;  // [2H]
  DocumentAttentionTrace trace;
};

namespace detail {

inline std::vector<std::size_t> active_indices(
    std::span<const std::uint8_t> mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(i);
  return idx;
}

}  // namespace detail

// Words -> sentence vector (steps: embed, dropout, bidirectional GRU, word
// attention). Padded positions are dropped before the recurrence so that
// padding can never leak into real states; their reported weight is exactly 0.
inline Tensor encode_sentence(Graph& g, std::span<const int> word_ids,
                              std::span<const std::uint8_t> mask,
                              const Parameters& params, const ModelConfig& cfg,
                              Mode mode, Rng& dropout_rng,
                              std::vector<double>* alpha_out = nullptr,
                              std::size_t* support_out = nullptr,
                              AttentionProbe* probe = nullptr) {
  std::vector<std::size_t> active = detail::active_indices(mask);
  if (active.empty())
    throw ContractError("encode_sentence: sentence is fully masked");
  std::vector<int> packed;
  packed.reserve(active.size());
  for (std::size_t i : active) packed.push_back(word_ids[i]);

  Tensor w = embed(g, params.embedding, packed);
  if (cfg.dropout_on_embeddings)
    w = dropout(g, w, cfg.dropout_p, mode, dropout_rng);
  Tensor h = bigru(g, w, params.word_gru_fwd, params.word_gru_bwd);
  AttentionOutput att = attend(g, h, params.word_attn_u, params.word_attn_W,
                               params.word_attn_b, cfg.word_attention, {},
                               probe);
  if (alpha_out) {
    alpha_out->assign(word_ids.size(), 0.0);
    for (std::size_t i = 0; i < active.size(); ++i)
      (*alpha_out)[active[i]] = att.weights[i];
  }
  if (support_out) *support_out = att.support.size();
  return att.pooled;
}

// Document -> document vector (sentence vectors, sentence bidirectional GRU,
// sentence attention). Returns the attention trace for stats and inspection.
inline DocumentEncoding encode_document(Graph& g, const Batch& batch,
                                        std::size_t doc,
                                        const Parameters& params,
                                        const ModelConfig& cfg, Mode mode,
                                        Rng& dropout_rng,
                                        AttentionProbe* probe = nullptr) {
  auto smask = batch.sentence_mask_row(doc);
  std::vector<std::size_t> active = detail::active_indices(smask);
  if (active.empty())
    throw ContractError("encode_document: document is fully masked");

  DocumentEncoding enc;
  enc.trace.word_alphas.assign(batch.sentences, {});
  enc.trace.word_masks.assign(batch.sentences, {});
  enc.trace.sent_mask.assign(smask.begin(), smask.end());

  std::vector<Tensor> sent_vectors;
  sent_vectors.reserve(active.size());
  for (std::size_t s : active) {
    std::vector<double> alpha;
    std::size_t support = 0;
    Tensor sv = encode_sentence(g, batch.word_ids(doc, s),
                                batch.word_mask_row(doc, s), params, cfg, mode,
                                dropout_rng, &alpha, &support, probe);
    auto wm = batch.word_mask_row(doc, s);
    enc.trace.word_alphas[s] = std::move(alpha);
    enc.trace.word_masks[s].assign(wm.begin(), wm.end());
    enc.trace.word_support_sizes.push_back(support);
    sent_vectors.push_back(sv);
  }

  Tensor hs = bigru(g, stack_rows(g, sent_vectors), params.sent_gru_fwd,
                    params.sent_gru_bwd);
  AttentionOutput att = attend(g, hs, params.sent_attn_u, params.sent_attn_W,
                               params.sent_attn_b, cfg.sentence_attention, {},
                               probe);
  enc.trace.sent_alphas.assign(batch.sentences, 0.0);
  for (std::size_t i = 0; i < active.size(); ++i)
    enc.trace.sent_alphas[active[i]] = att.weights[i];
  enc.trace.sent_support_size = att.support.size();
  enc.doc_vector = att.pooled;
  return enc;
}

// Per-document logits: document vector, dropout, affine classifier.
inline Tensor document_logits(Graph& g, const Batch& batch, std::size_t doc,
                              const Parameters& params, const ModelConfig& cfg,
                              Mode mode, Rng& dropout_rng,
                              DocumentEncoding* enc_out = nullptr,
                              AttentionProbe* probe = nullptr) {
  DocumentEncoding enc =
      encode_document(g, batch, doc, params, cfg, mode, dropout_rng, probe);
  Tensor v = enc.doc_vector;
  if (cfg.dropout_on_doc_vector)
    v = dropout(g, v, cfg.dropout_p, mode, dropout_rng);
  Tensor logits = linear(g, v, params.classifier_W, params.classifier_b);
  if (enc_out) *enc_out = std::move(enc);
  return logits;
}

// Batch logits [B, C]. Documents are independent: each one's row is identical
// to what a batch of one would produce.
inline Tensor forward(Graph& g, const Batch& batch, const Parameters& params,
                      const ModelConfig& cfg, Mode mode, Rng& dropout_rng) {
  if (batch.size == 0) throw ContractError("forward: empty batch");
  std::vector<Tensor> rows;
  rows.reserve(batch.size);
  for (std::size_t b = 0; b < batch.size; ++b)
    rows.push_back(document_logits(g, batch, b, params, cfg, mode,
                                   dropout_rng));
  return stack_rows(g, rows);
}

struct Prediction {
  int label = 0;
  std::vector<double> probabilities;
};

// argmax class (ties to the lowest index) plus softmax probabilities.
inline Prediction predict(std::span<const double> logits) {
  if (logits.empty()) throw ContractError("predict: empty logits");
  Prediction out;
  out.probabilities = softmax_values(logits);
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  out.label = static_cast<int>(best);
  return out;
}

// Pruning statistics over one or more encoded documents. "Pruned" counts
// unmasked positions whose weight is exactly zero, which softmax can never
// produce; mean_support_size averages the support over every attention
// application (word level and sentence level).
struct AttentionStats {
  double pruned_word_fraction = 0.0;
  double pruned_sentence_fraction = 0.0;
  double mean_support_size = 0.0;

  struct Accumulator {
    std::size_t unmasked_words = 0, zero_words = 0;
    std::size_t unmasked_sents = 0, zero_sents = 0;
    std::size_t support_total = 0, applications = 0;

    void add(const DocumentAttentionTrace& trace) {
      for (std::size_t s = 0; s < trace.sent_mask.size(); ++s) {
        if (!trace.sent_mask[s]) continue;
        ++unmasked_sents;
        if (trace.sent_alphas[s] == 0.0) ++zero_sents;
        const auto& wm = trace.word_masks[s];
        const auto& wa = trace.word_alphas[s];
        for (std::size_t i = 0; i < wm.size(); ++i) {
          if (!wm[i]) continue;
          ++unmasked_words;
          if (wa[i] == 0.0) ++zero_words;
        }
      }
      for (std::size_t k : trace.word_support_sizes) {
        support_total += k;
        ++applications;
      }
      support_total += trace.sent_support_size;
      ++applications;
    }

    AttentionStats finalize() const {
      AttentionStats s;
      if (unmasked_words) s.pruned_word_fraction =
          static_cast<double>(zero_words) / unmasked_words;
      if (unmasked_sents) s.pruned_sentence_fraction =
          static_cast<double>(zero_sents) / unmasked_sents;
      if (applications) s.mean_support_size =
          static_cast<double>(support_total) / applications;
      return s;
    }
  };
};

inline AttentionStats attention_stats(const DocumentAttentionTrace& trace) {
  AttentionStats::Accumulator acc;
  acc.add(trace);
  return acc.finalize();
}

}  // namespace hanet
