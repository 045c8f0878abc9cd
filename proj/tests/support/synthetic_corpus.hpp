#pragma once

// Synthetic corpora for tests: a two-class keyword task at several scales,
// emitted either as in-memory documents or as an IMDB-layout directory tree
// (root/{train,test}/{pos,neg}/*.txt) for exercising the ingestion path and
// the CLI end to end.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hanet/data.hpp"
#include "hanet/rng.hpp"

namespace hanet::testsupport {

struct ReviewStyle {
  std::size_t pos_pool = 150;
  std::size_t neg_pool = 150;
  std::size_t neutral_pool = 600;
  std::size_t stop_pool = 30;
  std::size_t min_sentences = 4, max_sentences = 10;
  std::size_t min_words = 5, max_words = 14;
  double stop_rate = 0.45;
  double neutral_rate = 0.33;      // remainder is sentiment-bearing
  double own_class_rate = 0.75;    // sentiment word from the label's pool
  double label_noise = 0.07;       // fraction of flipped labels
};

inline std::string synth_word(const char* stem, std::size_t i) {
  return std::string(stem) + std::to_string(i);
}

// One synthetic review. `sentiment` is the text's true polarity; the caller
// decides the (possibly noisy) label.
inline std::string make_review_text(Rng& rng, int sentiment,
                                    const ReviewStyle& style) {
  std::string text;
  std::size_t n_sents =
      style.min_sentences +
      rng.below(style.max_sentences - style.min_sentences + 1);
  for (std::size_t s = 0; s < n_sents; ++s) {
    std::size_t n_words =
        style.min_words + rng.below(style.max_words - style.min_words + 1);
    for (std::size_t w = 0; w < n_words; ++w) {
      if (w) text += ' ';
      double roll = rng.uniform01();
      if (roll < style.stop_rate) {
        text += synth_word("the", rng.below(style.stop_pool));
      } else if (roll < style.stop_rate + style.neutral_rate) {
        // quadratic skew gives a crude Zipf-like frequency profile
        double u = rng.uniform01();
        auto idx = static_cast<std::size_t>(u * u *
                                            static_cast<double>(
                                                style.neutral_pool));
        text += synth_word("scene", idx);
      } else {
        bool own = rng.uniform01() < style.own_class_rate;
        int pool = own ? sentiment : 1 - sentiment;
        if (pool == 1)
          text += synth_word("fine", rng.below(style.pos_pool));
        else
          text += synth_word("dull", rng.below(style.neg_pool));
      }
    }
    double t = rng.uniform01();
    text += (t < 0.85) ? "." : (t < 0.95 ? "!" : "?");
    text += ' ';
  }
  return text;
}

// Writes count documents per class per split under root.
inline void write_imdb_style_corpus(const std::filesystem::path& root,
                                    std::size_t train_per_class,
                                    std::size_t test_per_class,
                                    std::uint64_t seed,
                                    const ReviewStyle& style = {}) {
  namespace fs = std::filesystem;
  Rng rng(seed);
  for (const char* split : {"train", "test"}) {
    std::size_t per_class =
        std::string(split) == "train" ? train_per_class : test_per_class;
    for (int label = 0; label < 2; ++label) {
      fs::path dir = root / split / (label ? "pos" : "neg");
      fs::create_directories(dir);
      for (std::size_t i = 0; i < per_class; ++i) {
        int sentiment = label;
        if (rng.uniform01() < style.label_noise) sentiment = 1 - sentiment;
        std::string text = make_review_text(rng, sentiment, style);
        std::ofstream out(dir / (std::to_string(i) + "_" +
                                 (label ? "8" : "2") + ".txt"));
        out << text;
      }
    }
  }
}

// Small in-memory two-class task on token ids: class 1 leans on ids
// [4, 4+key_pool), class 0 on [4+key_pool, 4+2*key_pool); ids 2..3 are shared
// filler. Strongly separable, no label noise.
inline std::vector<Document> make_toy_docs(std::size_t count,
                                           std::size_t key_pool,
                                           std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < count; ++i) {
    int label = static_cast<int>(i % 2);
    Document d;
    d.label = label;
    d.source_id = "toy" + std::to_string(i);
    std::size_t n_sents = 1 + rng.below(3);
    for (std::size_t s = 0; s < n_sents; ++s) {
      std::vector<int> sent;
      std::size_t n_words = 2 + rng.below(4);
      for (std::size_t w = 0; w < n_words; ++w) {
        if (rng.uniform01() < 0.4) {
          sent.push_back(2 + static_cast<int>(rng.below(2)));  // filler
        } else {
          std::size_t base = 4 + (label ? 0 : key_pool);
          sent.push_back(static_cast<int>(base + rng.below(key_pool)));
        }
      }
      d.sentences.push_back(std::move(sent));
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

inline std::size_t toy_vocab_size(std::size_t key_pool) {
  return 4 + 2 * key_pool;
}

}  // namespace hanet::testsupport
