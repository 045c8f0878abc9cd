#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hanet/errors.hpp"
#include "hanet/layers.hpp"
#include "hanet/model.hpp"
#include "hanet/rng.hpp"

namespace hanet {

// ---------------------------------------------------------------------------
// tokenizer
// ---------------------------------------------------------------------------
//
// Deterministic rule tokenizer:
//   - lowercase (ASCII);
//   - sentences end at a run of . ! ? followed by whitespace / end of text,
//     and at HTML line-break tags (<br>, <br/>, <br />);
//   - words split on whitespace (ASCII plus common Unicode spaces);
//   - punctuation detached as single-character tokens;
//   - clitics n't 's 're 've 'll 'd 'm split off as their own tokens;
//   - empty sentences dropped.

namespace detail {

inline bool is_word_punct(unsigned char c) {
  return std::ispunct(c) != 0;
}

inline const std::vector<std::string>& clitics() {
  static const std::vector<std::string> kClitics{"n't", "'s", "'re", "'ve",
                                                 "'ll", "'d", "'m"};
  return kClitics;
}

inline bool is_clitic(std::string_view s) {
  for (const auto& c : clitics())
    if (s == c) return true;
  return false;
}

// apostrophe-led clitic starting at position i, or 0 if none
inline std::size_t clitic_at(std::string_view s, std::size_t i) {
  for (const auto& c : clitics()) {
    if (c[0] != '\'') continue;
    if (s.compare(i, c.size(), c) != 0) continue;
    std::size_t end = i + c.size();
    if (end == s.size() || is_word_punct(static_cast<unsigned char>(s[end])))
      return c.size();
  }
  return 0;
}

inline void split_chunk(std::string_view chunk, std::vector<std::string>& out) {
  if (chunk.empty()) return;
  if (is_clitic(chunk)) {
    out.emplace_back(chunk);
    return;
  }
  std::size_t i = 0;
  const std::size_t n = chunk.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(chunk[i]);
    if (is_word_punct(c)) {
      if (std::size_t len = clitic_at(chunk, i)) {
        out.emplace_back(chunk.substr(i, len));
        i += len;
      } else {
        out.emplace_back(1, chunk[i]);
        ++i;
      }
      continue;
    }
    std::size_t e = i;
    while (e < n && !is_word_punct(static_cast<unsigned char>(chunk[e]))) ++e;
    // "don't": the run "don" plus 't forms the n't clitic
    if (e < n && chunk[e] == '\'' && e + 1 < n && chunk[e - 1] == 'n' &&
        chunk[e + 1] == 't' &&
        (e + 2 == n ||
         is_word_punct(static_cast<unsigned char>(chunk[e + 2])))) {
      if (e - 1 > i) out.emplace_back(chunk.substr(i, e - 1 - i));
      out.emplace_back("n't");
      i = e + 2;
      continue;
    }
    out.emplace_back(chunk.substr(i, e - i));
    i = e;
  }
}

// Normalize: lowercase ASCII, break tags and a few common Unicode spaces to
// '\n' / ' '. '\n' only ever comes out of this function as a break-tag marker.
inline std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    // <br>, <br/>, <br /> in any case
    if (c == '<' && i + 2 < text.size() &&
        (text[i + 1] == 'b' || text[i + 1] == 'B') &&
        (text[i + 2] == 'r' || text[i + 2] == 'R')) {
      std::size_t j = i + 3;
      while (j < text.size() && (text[j] == ' ' || text[j] == '/')) ++j;
      if (j < text.size() && text[j] == '>') {
        out.push_back('\n');
        i = j + 1;
        continue;
      }
    }
    if (c == 0xC2 && i + 1 < text.size() &&
        static_cast<unsigned char>(text[i + 1]) == 0xA0) {  // NBSP
      out.push_back(' ');
      i += 2;
      continue;
    }
    if (c == 0xE2 && i + 2 < text.size() &&
        static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(text[i + 2]) & 0xF0) == 0x80) {
      out.push_back(' ');  // U+2000..U+200F spaces
      i += 3;
      continue;
    }
    if (c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == '\v') {
      out.push_back(' ');
      i += 1;
      continue;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
    ++i;
  }
  return out;
}

inline bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace detail

inline std::vector<std::vector<std::string>> tokenize(std::string_view text) {
  std::string norm = detail::normalize_text(text);
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> current;

  auto flush = [&] {
    if (!current.empty()) sentences.push_back(std::move(current));
    current.clear();
  };

  std::size_t i = 0;
  const std::size_t n = norm.size();
  while (i < n) {
    if (norm[i] == '\n') {  // break-tag marker
      flush();
      ++i;
      continue;
    }
    if (norm[i] == ' ') {
      ++i;
      continue;
    }
    std::size_t e = i;
    while (e < n && norm[e] != ' ' && norm[e] != '\n') ++e;
    std::string_view chunk(norm.data() + i, e - i);
    detail::split_chunk(chunk, current);
    if (detail::is_terminator(chunk.back())) flush();
    i = e;
  }
  flush();
  return sentences;
}

// ---------------------------------------------------------------------------
// documents and vocabulary
// ---------------------------------------------------------------------------

struct RawDocument {
  std::vector<std::vector<std::string>> sentences;
  int label = 0;
  std::string source_id;
};

struct Document {
  std::vector<std::vector<int>> sentences;  // ragged token ids
  int label = 0;
  std::string source_id;
};

class Vocabulary {
 public:
  static constexpr int kPadId = EmbeddingTable::kPadId;
  static constexpr int kUnkId = EmbeddingTable::kUnkId;

  Vocabulary() : id_to_token_{"<pad>", "<unk>"} {}

  int id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kUnkId : it->second;
  }
  bool contains(std::string_view token) const {
    return token_to_id_.count(std::string(token)) > 0;
  }
  const std::string& token(int id) const { return id_to_token_.at(id); }
  std::size_t size() const { return id_to_token_.size(); }
  int min_frequency() const { return min_frequency_; }

  // Tokens sorted by (count desc, token asc), ids assigned densely from 2.
  static Vocabulary build(std::span<const RawDocument> docs,
                          int min_frequency = 2) {
    if (docs.empty()) throw DataError("build_vocab: empty corpus");
    std::unordered_map<std::string, std::size_t> counts;
    for (const RawDocument& d : docs)
      for (const auto& sent : d.sentences)
        for (const auto& tok : sent) ++counts[tok];
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, cnt] : counts)
      if (cnt >= static_cast<std::size_t>(min_frequency))
        kept.emplace_back(tok, cnt);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    v.min_frequency_ = min_frequency;
    for (auto& [tok, cnt] : kept) {
      v.token_to_id_.emplace(tok, static_cast<int>(v.id_to_token_.size()));
      v.id_to_token_.push_back(tok);
    }
    return v;
  }

  // Rebuild the lookup from a stored full token list, reserved entries
  // included (checkpoint restore).
  static Vocabulary from_tokens(std::vector<std::string> tokens,
                                int min_frequency) {
    if (tokens.size() < 2)
      throw DataError("vocabulary token list is missing the reserved entries");
    Vocabulary v;
    v.min_frequency_ = min_frequency;
    v.id_to_token_ = std::move(tokens);
    for (std::size_t i = 2; i < v.id_to_token_.size(); ++i)
      v.token_to_id_.emplace(v.id_to_token_[i], static_cast<int>(i));
    return v;
  }

  std::span<const std::string> tokens_after_reserved() const {
    return {id_to_token_.data() + 2, id_to_token_.size() - 2};
  }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
  int min_frequency_ = 2;
};

inline Vocabulary build_vocab(std::span<const RawDocument> docs,
                              int min_frequency = 2) {
  return Vocabulary::build(docs, min_frequency);
}

inline Document to_ids(const RawDocument& raw, const Vocabulary& vocab) {
  Document doc;
  doc.label = raw.label;
  doc.source_id = raw.source_id;
  doc.sentences.reserve(raw.sentences.size());
  for (const auto& sent : raw.sentences) {
    std::vector<int> ids;
    ids.reserve(sent.size());
    for (const auto& tok : sent) ids.push_back(vocab.id(tok));
    if (!ids.empty()) doc.sentences.push_back(std::move(ids));
  }
  return doc;
}

// ---------------------------------------------------------------------------
// pretrained embeddings
// ---------------------------------------------------------------------------

struct EmbeddingLoad {
  EmbeddingTable table;
  double coverage = 0.0;  // fraction of non-reserved vocab found in the file
};

// Text format, one entry per line: token followed by embed_dim decimal
// floats, single spaces. Rows for vocabulary tokens found in the file are
// copied (first occurrence wins); everything else is drawn uniform(-0.1, 0.1)
// from the given stream. The padding row stays zero.
inline EmbeddingLoad load_embeddings(const std::filesystem::path& path,
                                     const Vocabulary& vocab,
                                     std::size_t embed_dim, Rng& rng,
                                     bool trainable = true) {
  std::ifstream in(path);
  if (!in) throw DataError("load_embeddings: cannot open " + path.string());

  EmbeddingLoad out;
  out.table =
      EmbeddingTable::random_init(vocab.size(), embed_dim, rng, trainable);
  auto& data = out.table.weights.mutable_values();

  std::vector<bool> filled(vocab.size(), false);
  std::string line;
  std::size_t line_no = 0;
  std::size_t found = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token))
      throw DataError("load_embeddings: malformed line " +
                      std::to_string(line_no) + " in " + path.string());
    std::vector<double> row;
    row.reserve(embed_dim);
    double x;
    while (ls >> x) row.push_back(x);
    if (!ls.eof())
      throw DataError("load_embeddings: malformed line " +
                      std::to_string(line_no) + " in " + path.string());
    if (row.size() != embed_dim)
      throw ConfigError("load_embeddings: line " + std::to_string(line_no) +
                        " has " + std::to_string(row.size()) +
                        " values, expected " + std::to_string(embed_dim));
    if (!vocab.contains(token)) continue;
    int id = vocab.id(token);
    if (filled[static_cast<std::size_t>(id)]) continue;  // first wins
    filled[static_cast<std::size_t>(id)] = true;
    ++found;
    std::copy(row.begin(), row.end(),
              data.begin() + static_cast<std::size_t>(id) * embed_dim);
  }
  std::size_t real_tokens = vocab.size() > 2 ? vocab.size() - 2 : 1;
  out.coverage = static_cast<double>(found) / static_cast<double>(real_tokens);
  return out;
}

// ---------------------------------------------------------------------------
// IMDB corpus
// ---------------------------------------------------------------------------

struct CorpusSplits {
  std::vector<Document> train, validation, test;
};

struct ImdbOptions {
  int min_frequency = 2;
  double validation_ratio = 0.30;
  // 0 = keep everything; otherwise a seeded subsample of that many documents
  std::size_t max_train = 0;
  std::size_t max_validation = 0;
  std::size_t max_test = 0;
};

struct ImdbCorpus {
  CorpusSplits splits;
  Vocabulary vocab;
  std::size_t file_count = 0;
  std::uint64_t byte_total = 0;
};

// Tokenized text before any vocabulary is applied; evaluation against a
// checkpoint re-encodes this with the stored vocabulary instead of building
// a fresh one.
struct RawCorpus {
  std::vector<RawDocument> train, validation, test;
  std::size_t file_count = 0;
  std::uint64_t byte_total = 0;
};

namespace detail {

struct LabeledFile {
  std::filesystem::path path;
  int label;
  std::string source_id;
};

inline std::vector<LabeledFile> list_split(const std::filesystem::path& root,
                                           const std::string& split) {
  namespace fs = std::filesystem;
  std::vector<LabeledFile> files;
  for (const auto& [cls, label] :
       std::initializer_list<std::pair<const char*, int>>{{"neg", 0},
                                                          {"pos", 1}}) {
    fs::path dir = root / split / cls;
    if (!fs::is_directory(dir))
      throw DataError("load_imdb: missing directory " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      if (entry.path().extension() != ".txt") continue;
      files.push_back({entry.path(), label,
                       split + "/" + cls + "/" +
                           entry.path().filename().string()});
    }
  }
  std::sort(files.begin(), files.end(),
            [](const LabeledFile& a, const LabeledFile& b) {
              return a.source_id < b.source_id;
            });
  return files;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_imdb: cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// Loads the standard aclImdb directory layout root/{train,test}/{pos,neg}/*.txt.
// The test split is taken whole; the train pool is shuffled with the "split"
// stream of `seed` and divided 70/30 into train/validation. Subsampling,
// when requested, takes a seeded prefix of each (already shuffled) split.
inline RawCorpus load_imdb_raw(const std::filesystem::path& root,
                               std::uint64_t seed,
                               const ImdbOptions& opt = {}) {
  auto train_files = detail::list_split(root, "train");
  auto test_files = detail::list_split(root, "test");
  if (train_files.empty() || test_files.empty())
    throw DataError("load_imdb: no documents under " + root.string());

  RawCorpus corpus;

  Rng split_rng = Rng(seed).fork("split");
  split_rng.shuffle(train_files);
  Rng test_rng = Rng(seed).fork("split", 1);
  test_rng.shuffle(test_files);

  auto ingest = [&corpus](const detail::LabeledFile& f) {
    std::string text = detail::read_file(f.path);
    corpus.file_count += 1;
    corpus.byte_total += text.size();
    RawDocument doc;
    doc.sentences = tokenize(text);
    doc.label = f.label;
    doc.source_id = f.source_id;
    return doc;
  };

  std::size_t val_count = static_cast<std::size_t>(
      static_cast<double>(train_files.size()) * opt.validation_ratio + 0.5);
  for (std::size_t i = 0; i < train_files.size(); ++i) {
    bool to_validation = i < val_count;
    if (to_validation) {
      if (opt.max_validation && corpus.validation.size() >= opt.max_validation)
        continue;
      corpus.validation.push_back(ingest(train_files[i]));
    } else {
      if (opt.max_train && corpus.train.size() >= opt.max_train) continue;
      corpus.train.push_back(ingest(train_files[i]));
    }
  }
  for (const auto& f : test_files) {
    if (opt.max_test && corpus.test.size() >= opt.max_test) break;
    corpus.test.push_back(ingest(f));
  }

  // drop documents that tokenized to nothing (no usable sentences)
  auto drop_empty = [](std::vector<RawDocument>& docs) {
    std::erase_if(docs,
                  [](const RawDocument& d) { return d.sentences.empty(); });
  };
  drop_empty(corpus.train);
  drop_empty(corpus.validation);
  drop_empty(corpus.test);
  if (corpus.train.empty()) throw DataError("load_imdb: empty training split");
  return corpus;
}

inline std::vector<Document> encode_documents(
    std::span<const RawDocument> raw, const Vocabulary& vocab) {
  std::vector<Document> out;
  out.reserve(raw.size());
  for (const RawDocument& d : raw) out.push_back(to_ids(d, vocab));
  return out;
}

// Raw loading plus vocabulary construction from the training split only.
inline ImdbCorpus load_imdb(const std::filesystem::path& root,
                            std::uint64_t seed, const ImdbOptions& opt = {}) {
  RawCorpus raw = load_imdb_raw(root, seed, opt);
  ImdbCorpus corpus;
  corpus.file_count = raw.file_count;
  corpus.byte_total = raw.byte_total;
  corpus.vocab = build_vocab(raw.train, opt.min_frequency);
  corpus.splits.train = encode_documents(raw.train, corpus.vocab);
  corpus.splits.validation = encode_documents(raw.validation, corpus.vocab);
  corpus.splits.test = encode_documents(raw.test, corpus.vocab);
  return corpus;
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

// Head truncation to the caps, tail padding with PAD, masks set accordingly.
// Within a batch S and L shrink to the longest (truncated) document, never
// exceeding the caps. The final partial batch is emitted.
inline std::vector<Batch> make_batches(std::span<const Document> docs,
                                       std::size_t batch_size,
                                       std::size_t s_cap, std::size_t l_cap,
                                       Rng& rng, bool shuffle) {
  if (batch_size == 0 || s_cap == 0 || l_cap == 0)
    throw ConfigError("make_batches: batch_size and caps must be >= 1");
  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle) rng.shuffle(order);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t b_count = std::min(batch_size, order.size() - start);
    std::size_t s_max = 1, l_max = 1;
    for (std::size_t b = 0; b < b_count; ++b) {
      const Document& d = docs[order[start + b]];
      std::size_t s_eff = std::min(d.sentences.size(), s_cap);
      s_max = std::max(s_max, s_eff);
      for (std::size_t s = 0; s < s_eff; ++s)
        l_max = std::max(l_max, std::min(d.sentences[s].size(), l_cap));
    }
    Batch batch;
    batch.size = b_count;
    batch.sentences = s_max;
    batch.words = l_max;
    batch.token_ids.assign(b_count * s_max * l_max, Vocabulary::kPadId);
    batch.word_mask.assign(b_count * s_max * l_max, 0);
    batch.sentence_mask.assign(b_count * s_max, 0);
    batch.labels.resize(b_count);
    for (std::size_t b = 0; b < b_count; ++b) {
      const Document& d = docs[order[start + b]];
      batch.labels[b] = d.label;
      std::size_t s_eff = std::min(d.sentences.size(), s_cap);
      for (std::size_t s = 0; s < s_eff; ++s) {
        batch.sentence_mask[b * s_max + s] = 1;
        std::size_t l_eff = std::min(d.sentences[s].size(), l_cap);
        for (std::size_t w = 0; w < l_eff; ++w) {
          batch.token_ids[(b * s_max + s) * l_max + w] = d.sentences[s][w];
          batch.word_mask[(b * s_max + s) * l_max + w] = 1;
        }
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

// Single-document batch; evaluation and inspection go through here so a
// document's encoding is identical however it was batched.
inline Batch single_document_batch(const Document& doc, std::size_t s_cap,
                                   std::size_t l_cap) {
  Rng dummy(0);
  std::vector<Batch> batches =
      make_batches(std::span(&doc, 1), 1, s_cap, l_cap, dummy, false);
  return std::move(batches.front());
}

}  // namespace hanet
