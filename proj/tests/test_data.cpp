#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "hanet/data.hpp"

using namespace hanet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("hanet_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p);
  out << text;
}

// tiny IMDB-layout corpus
void write_imdb(const fs::path& root, int per_class_train = 10,
                int per_class_test = 4, const std::string& salt = "") {
  for (int i = 0; i < per_class_train; ++i) {
    write_file(root / "train" / "pos" / (std::to_string(i) + "_7.txt"),
               "Great movie" + salt + ". Loved the acting!");
    write_file(root / "train" / "neg" / (std::to_string(i) + "_2.txt"),
               "Terrible movie" + salt + ". Awful script.");
  }
  for (int i = 0; i < per_class_test; ++i) {
    write_file(root / "test" / "pos" / (std::to_string(i) + "_8.txt"),
               "Wonderful film. Great fun!");
    write_file(root / "test" / "neg" / (std::to_string(i) + "_1.txt"),
               "Boring film. Waste of time.");
  }
}

std::vector<std::string> flat_tokens(
    const std::vector<std::vector<std::string>>& sents) {
  std::vector<std::string> out;
  for (const auto& s : sents) out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

TEST_CASE("tokenize") {
  SECTION("two sentences with detached punctuation") {
    auto t = tokenize("Good movie. Loved it!");
    REQUIRE(t.size() == 2);
    CHECK(t[0] == std::vector<std::string>{"good", "movie", "."});
    CHECK(t[1] == std::vector<std::string>{"loved", "it", "!"});
  }

  SECTION("empty input") { CHECK(tokenize("").empty()); }

  SECTION("clitic detachment") {
    auto t = tokenize("don't stop");
    REQUIRE(t.size() == 1);
    CHECK(t[0] == std::vector<std::string>{"do", "n't", "stop"});

    auto t2 = tokenize("it's Bob's, they're we've you'll I'd I'm");
    auto flat = flat_tokens(t2);
    CHECK(flat == std::vector<std::string>{
                      "it", "'s", "bob", "'s", ",", "they", "'re", "we", "'ve",
                      "you", "'ll", "i", "'d", "i", "'m"});
  }

  SECTION("html break tags are sentence boundaries") {
    auto t = tokenize("First part<br /><br />second part");
    REQUIRE(t.size() == 2);
    CHECK(t[0] == std::vector<std::string>{"first", "part"});
    CHECK(t[1] == std::vector<std::string>{"second", "part"});
    CHECK(tokenize("a<BR>b").size() == 2);
  }

  SECTION("terminator runs stay in their sentence") {
    auto t = tokenize("What?! Really...");
    REQUIRE(t.size() == 2);
    CHECK(t[0] == std::vector<std::string>{"what", "?", "!"});
    CHECK(t[1] == std::vector<std::string>{"really", ".", ".", "."});
  }

  SECTION("interior punctuation does not split sentences") {
    auto t = tokenize("version 2.5 rocks");
    REQUIRE(t.size() == 1);
    CHECK(t[0] == std::vector<std::string>{"version", "2", ".", "5", "rocks"});
  }

  SECTION("empty sentences dropped") {
    auto t = tokenize("!!! ... Hello.");
    // leading bare terminators form their own chunks ending in terminators
    for (const auto& s : t) CHECK_FALSE(s.empty());
  }

  SECTION("token-level idempotence on detokenized output") {
    for (const char* text :
         {"Good movie. Loved it!", "don't stop, won't stop...",
          "He said (quietly): \"it's fine\" <br/> right?",
          "numbers 10/10, 3.5 stars!"}) {
      auto once = tokenize(text);
      std::string detok;
      for (const auto& s : once)
        for (const auto& tok : s) {
          if (!detok.empty()) detok += ' ';
          detok += tok;
        }
      auto twice = tokenize(detok);
      CHECK(flat_tokens(once) == flat_tokens(twice));
    }
  }
}

TEST_CASE("build_vocab") {
  RawDocument doc;
  doc.sentences = {{"a", "a", "b"}};
  doc.label = 0;
  doc.source_id = "d0";

  SECTION("min_frequency 2 drops singletons") {
    Vocabulary v = build_vocab(std::span(&doc, 1), 2);
    CHECK(v.size() == 3);  // PAD, UNK, "a"
    CHECK(v.id("a") == 2);
    CHECK(v.id("b") == Vocabulary::kUnkId);
  }

  SECTION("min_frequency 1 keeps them") {
    Vocabulary v = build_vocab(std::span(&doc, 1), 1);
    CHECK(v.size() == 4);
    CHECK(v.contains("b"));
  }

  SECTION("deterministic frequency-then-lexicographic order") {
    RawDocument d2;
    d2.sentences = {{"z", "z", "m", "m", "q", "q", "q"}};
    d2.source_id = "d1";
    Vocabulary v1 = build_vocab(std::span(&d2, 1), 2);
    Vocabulary v2 = build_vocab(std::span(&d2, 1), 2);
    CHECK(v1.id("q") == 2);  // most frequent first
    CHECK(v1.id("m") == 3);  // then lexicographic among count-2 tokens
    CHECK(v1.id("z") == 4);
    CHECK(v1.id("q") == v2.id("q"));
    CHECK(v1.id("z") == v2.id("z"));
  }

  SECTION("empty corpus rejected") {
    CHECK_THROWS_AS(build_vocab({}, 2), DataError);
  }
}

TEST_CASE("load_embeddings") {
  TempDir tmp;
  RawDocument doc;
  doc.sentences = {{"the", "the", "cat", "cat"}};
  doc.source_id = "d";
  Vocabulary vocab = build_vocab(std::span(&doc, 1), 2);

  SECTION("copies file rows and reports coverage") {
    fs::path p = tmp.path / "emb.txt";
    write_file(p, "the 0.5 -0.25 0.125\n");
    Rng rng(1);
    EmbeddingLoad load = load_embeddings(p, vocab, 3, rng);
    int the_id = vocab.id("the");
    CHECK(load.table.weights(the_id, 0) == 0.5);
    CHECK(load.table.weights(the_id, 1) == -0.25);
    CHECK(load.table.weights(the_id, 2) == 0.125);
    CHECK(load.coverage == Catch::Approx(0.5));  // one of {the, cat}
    // PAD row zero, uncovered row randomized within bounds
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(load.table.weights(0, c) == 0.0);
      CHECK(std::abs(load.table.weights(vocab.id("cat"), c)) <= 0.1);
    }
  }

  SECTION("empty file gives zero coverage and a zero PAD row") {
    fs::path p = tmp.path / "empty.txt";
    write_file(p, "");
    Rng rng(1);
    EmbeddingLoad load = load_embeddings(p, vocab, 3, rng);
    CHECK(load.coverage == 0.0);
    for (std::size_t c = 0; c < 3; ++c) CHECK(load.table.weights(0, c) == 0.0);
  }

  SECTION("first occurrence wins") {
    fs::path p = tmp.path / "dup.txt";
    write_file(p, "the 1 1 1\nthe 2 2 2\n");
    Rng rng(1);
    EmbeddingLoad load = load_embeddings(p, vocab, 3, rng);
    CHECK(load.table.weights(vocab.id("the"), 0) == 1.0);
  }

  SECTION("malformed line names the line number") {
    fs::path p = tmp.path / "bad.txt";
    write_file(p, "the 1 1 1\ncat 1 x 1\n");
    Rng rng(1);
    CHECK_THROWS_WITH(load_embeddings(p, vocab, 3, rng),
                      Catch::Matchers::ContainsSubstring("line 2"));
  }

  SECTION("dimension mismatch is a config error") {
    fs::path p = tmp.path / "dims.txt";
    write_file(p, "the 1 1\n");
    Rng rng(1);
    CHECK_THROWS_AS(load_embeddings(p, vocab, 3, rng), ConfigError);
  }

  SECTION("missing file") {
    Rng rng(1);
    CHECK_THROWS_AS(load_embeddings(tmp.path / "nope.txt", vocab, 3, rng),
                    DataError);
  }
}

TEST_CASE("load_imdb") {
  TempDir tmp;
  write_imdb(tmp.path);

  SECTION("splits, labels and determinism") {
    ImdbCorpus a = load_imdb(tmp.path, 42);
    CHECK(a.splits.train.size() == 14);       // 70% of 20
    CHECK(a.splits.validation.size() == 6);   // 30% of 20
    CHECK(a.splits.test.size() == 8);
    CHECK(a.file_count == 28);

    for (const Document& d : a.splits.test) {
      bool pos = d.source_id.find("/pos/") != std::string::npos;
      CHECK(d.label == (pos ? 1 : 0));
    }

    ImdbCorpus b = load_imdb(tmp.path, 42);
    REQUIRE(a.splits.train.size() == b.splits.train.size());
    for (std::size_t i = 0; i < a.splits.train.size(); ++i)
      CHECK(a.splits.train[i].source_id == b.splits.train[i].source_id);

    ImdbCorpus c = load_imdb(tmp.path, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.splits.train.size(); ++i)
      any_diff |= a.splits.train[i].source_id != c.splits.train[i].source_id;
    CHECK(any_diff);
  }

  SECTION("splits are disjoint by source_id") {
    ImdbCorpus corpus = load_imdb(tmp.path, 7);
    std::set<std::string> seen;
    for (const auto* split : {&corpus.splits.train, &corpus.splits.validation,
                              &corpus.splits.test})
      for (const Document& d : *split) {
        CHECK(seen.insert(d.source_id).second);
      }
  }

  SECTION("subsampling caps each split") {
    ImdbOptions opt;
    opt.max_train = 5;
    opt.max_validation = 3;
    opt.max_test = 4;
    ImdbCorpus corpus = load_imdb(tmp.path, 42, opt);
    CHECK(corpus.splits.train.size() == 5);
    CHECK(corpus.splits.validation.size() == 3);
    CHECK(corpus.splits.test.size() == 4);
  }

  SECTION("missing directory names the path") {
    CHECK_THROWS_WITH(load_imdb(tmp.path / "absent", 1),
                      Catch::Matchers::ContainsSubstring("absent"));
  }

  SECTION("no leakage: vocabulary ignores validation and test text") {
    TempDir other;
    write_imdb(other.path);
    // poison everything except the training pool; the training pool is
    // shuffled into train+validation, so compare vocab built on train only
    for (auto& entry :
         fs::recursive_directory_iterator(other.path / "test")) {
      if (entry.is_regular_file())
        write_file(entry.path(), "zzz qqq zzz qqq vvv.");
    }
    ImdbCorpus a = load_imdb(tmp.path, 42);
    ImdbCorpus b = load_imdb(other.path, 42);
    CHECK(a.vocab.size() == b.vocab.size());
    for (int id = 2; id < static_cast<int>(a.vocab.size()); ++id)
      CHECK(a.vocab.token(id) == b.vocab.token(id));
    CHECK_FALSE(a.vocab.contains("zzz"));
  }
}

TEST_CASE("make_batches") {
  std::vector<Document> docs;
  for (int i = 0; i < 130; ++i) {
    Document d;
    d.sentences = {{2, 3, 4}, {5, 6}};
    d.label = i % 2;
    d.source_id = "doc" + std::to_string(i);
    docs.push_back(d);
  }

  SECTION("batch sizes 64, 64, 2") {
    Rng rng(1);
    auto batches = make_batches(docs, 64, 10, 10, rng, false);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size == 64);
    CHECK(batches[1].size == 64);
    CHECK(batches[2].size == 2);
  }

  SECTION("head truncation keeps the first sentences/words") {
    Document d;
    d.sentences = {{2, 3, 4, 5}, {6, 7}, {8, 9}};
    d.label = 1;
    d.source_id = "t";
    Rng rng(1);
    auto batches = make_batches(std::span(&d, 1), 1, 2, 3, rng, false);
    const Batch& b = batches[0];
    CHECK(b.sentences == 2);
    CHECK(b.words == 3);
    auto row0 = b.word_ids(0, 0);
    CHECK(std::vector<int>(row0.begin(), row0.end()) ==
          std::vector<int>{2, 3, 4});
    auto row1 = b.word_ids(0, 1);
    CHECK(std::vector<int>(row1.begin(), row1.end()) ==
          std::vector<int>{6, 7, 0});
  }

  SECTION("masks mark real positions on a hand-built two-doc batch") {
    Document d1;
    d1.sentences = {{2, 3}};
    d1.source_id = "a";
    Document d2;
    d2.sentences = {{4}, {5, 6, 7}};
    d2.source_id = "b";
    std::vector<Document> two{d1, d2};
    Rng rng(1);
    Batch b = make_batches(two, 2, 4, 4, rng, false)[0];
    REQUIRE(b.sentences == 2);
    REQUIRE(b.words == 3);
    // doc 0: one real sentence of two words
    CHECK(b.sentence_mask_row(0)[0] == 1);
    CHECK(b.sentence_mask_row(0)[1] == 0);
    auto wm00 = b.word_mask_row(0, 0);
    CHECK((wm00[0] == 1 && wm00[1] == 1 && wm00[2] == 0));
    // doc 1: two real sentences, lengths 1 and 3
    auto wm10 = b.word_mask_row(1, 0);
    CHECK((wm10[0] == 1 && wm10[1] == 0 && wm10[2] == 0));
    auto wm11 = b.word_mask_row(1, 1);
    CHECK((wm11[0] == 1 && wm11[1] == 1 && wm11[2] == 1));
    // padded ids are PAD
    CHECK(b.word_ids(0, 0)[2] == Vocabulary::kPadId);
    CHECK(b.word_ids(0, 1)[0] == Vocabulary::kPadId);
  }

  SECTION("pad/unpad round trip recovers the truncated document") {
    Document d;
    d.sentences = {{2, 3, 4, 5, 6}, {7, 8}, {9}};
    d.source_id = "r";
    Batch b = single_document_batch(d, 2, 3);
    std::vector<std::vector<int>> recovered;
    for (std::size_t s = 0; s < b.sentences; ++s) {
      if (!b.sentence_mask_row(0)[s]) continue;
      std::vector<int> sent;
      auto ids = b.word_ids(0, s);
      auto mask = b.word_mask_row(0, s);
      for (std::size_t w = 0; w < b.words; ++w)
        if (mask[w]) sent.push_back(ids[w]);
      recovered.push_back(std::move(sent));
    }
    CHECK(recovered ==
          std::vector<std::vector<int>>{{2, 3, 4}, {7, 8}});
  }

  SECTION("shuffle is deterministic per seed") {
    Rng r1(9), r2(9), r3(10);
    auto b1 = make_batches(docs, 16, 4, 4, r1, true);
    auto b2 = make_batches(docs, 16, 4, 4, r2, true);
    auto b3 = make_batches(docs, 16, 4, 4, r3, true);
    CHECK(b1[0].labels == b2[0].labels);
    bool diff = false;
    for (std::size_t i = 0; i < b1.size() && !diff; ++i)
      diff = b1[i].labels != b3[i].labels;
    CHECK(diff);
  }

  SECTION("invalid arguments") {
    Rng rng(1);
    CHECK_THROWS_AS(make_batches(docs, 0, 4, 4, rng, false), ConfigError);
    CHECK_THROWS_AS(make_batches(docs, 4, 0, 4, rng, false), ConfigError);
  }
}
