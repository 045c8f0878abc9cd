#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "hanet/checkpoint.hpp"
#include "hanet/train.hpp"
#include "support/synthetic_corpus.hpp"

using namespace hanet;
namespace fs = std::filesystem;

namespace {

ModelConfig toy_config(const std::string& preset, std::size_t key_pool = 6) {
  ModelConfig cfg = ModelConfig::preset(
      preset, testsupport::toy_vocab_size(key_pool), 2);
  cfg.embed_dim = 8;
  cfg.gru_hidden = 6;
  cfg.dropout_p = 0.0;
  return cfg;
}

CorpusSplits toy_splits(std::size_t n, std::size_t key_pool = 6,
                        std::uint64_t seed = 5) {
  CorpusSplits s;
  s.train = testsupport::make_toy_docs(n, key_pool, seed);
  s.validation = testsupport::make_toy_docs(n / 2, key_pool, seed + 1);
  s.test = testsupport::make_toy_docs(n / 2, key_pool, seed + 2);
  return s;
}

}  // namespace

TEST_CASE("adam_step") {
  ModelConfig cfg = toy_config("han");
  Rng init(1);
  Parameters params = Parameters::init(cfg, init);
  AdamState state = AdamState::init(params);
  TrainConfig tcfg;

  SECTION("zero gradients leave every parameter unchanged") {
    std::vector<std::vector<double>> before;
    for (auto& [name, t] : params.named()) {
      t.ensure_grad();
      before.push_back(t.values());
    }
    adam_step(params, state, tcfg);
    std::size_t i = 0;
    for (auto& [name, t] : params.named()) CHECK(t.values() == before[i++]);
  }

  SECTION("first step moves by about -lr on a unit gradient") {
    // theta = 0, g = 1: bias correction makes step ~ -lr exactly at t = 1
    auto& theta = params.classifier_b.mutable_values();
    std::fill(theta.begin(), theta.end(), 0.0);
    for (auto& [name, t] : params.named()) t.ensure_grad();
    auto& g = params.classifier_b.ensure_grad();
    std::fill(g.begin(), g.end(), 1.0);
    adam_step(params, state, tcfg);
    for (double x : params.classifier_b.values())
      CHECK(x == Catch::Approx(-0.001).margin(1e-9));
  }

  SECTION("non-finite gradient aborts naming the parameter") {
    for (auto& [name, t] : params.named()) t.ensure_grad();
    params.word_attn_u.ensure_grad()[0] =
        std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH(adam_step(params, state, tcfg),
                      Catch::Matchers::ContainsSubstring("word_attn.u"));
  }

  SECTION("PAD embedding row stays zero across steps") {
    TrainConfig fast = tcfg;
    fast.lr = 0.1;
    for (int step = 0; step < 5; ++step) {
      for (auto& [name, t] : params.named()) {
        auto& g = t.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] = 0.01 * static_cast<double>((i + step) % 3);
      }
      adam_step(params, state, fast);
    }
    for (std::size_t c = 0; c < cfg.embed_dim; ++c)
      CHECK(params.embedding.weights(0, c) == 0.0);
  }
}

TEST_CASE("gradient clipping") {
  ModelConfig cfg = toy_config("han");
  Rng init(2);
  Parameters params = Parameters::init(cfg, init);
  for (auto& [name, t] : params.named()) {
    auto& g = t.ensure_grad();
    std::fill(g.begin(), g.end(), 1.0);
  }
  double norm_before = clip_gradients(params, 5.0);
  CHECK(norm_before > 5.0);
  double sq = 0.0;
  for (auto& [name, t] : params.named())
    for (double gv : t.grad()) sq += gv * gv;
  CHECK(std::sqrt(sq) == Catch::Approx(5.0).epsilon(1e-9));

  SECTION("disabled when max_norm <= 0") {
    for (auto& [name, t] : params.named()) {
      auto& g = t.ensure_grad();
      std::fill(g.begin(), g.end(), 1.0);
    }
    clip_gradients(params, 0.0);
    CHECK(params.classifier_b.grad()[0] == 1.0);
  }
}

TEST_CASE("train_epoch") {
  SECTION("loss decreases on a learnable one-batch task") {
    ModelConfig cfg = toy_config("han");
    Rng init(3);
    Parameters params = Parameters::init(cfg, init);
    AdamState state = AdamState::init(params);
    TrainConfig tcfg;
    tcfg.lr = 0.02;
    tcfg.batch_size = 8;
    auto docs = testsupport::make_toy_docs(8, 6, 11);
    Rng root(9);
    Rng drop = root.fork("dropout");
    std::vector<double> losses;
    for (int epoch = 0; epoch < 20; ++epoch) {
      Rng shuffle = root.fork("shuffle", static_cast<std::uint64_t>(epoch));
      losses.push_back(train_epoch(params, state, docs, cfg, tcfg, 8, 8,
                                   shuffle, drop));
    }
    CHECK(losses.back() < 0.5 * losses.front());
  }

  SECTION("lr = 0 leaves parameters unchanged and loss constant") {
    ModelConfig cfg = toy_config("han");
    Rng init(4);
    Parameters params = Parameters::init(cfg, init);
    AdamState state = AdamState::init(params);
    TrainConfig tcfg;
    tcfg.lr = 0.0;  // op-level behavior; run-level validate() rejects this
    auto docs = testsupport::make_toy_docs(8, 6, 12);
    std::vector<double> before = params.classifier_W.values();
    Rng root(9);
    Rng drop = root.fork("dropout");
    double l1, l2;
    {
      Rng shuffle = root.fork("shuffle", 0);
      l1 = train_epoch(params, state, docs, cfg, tcfg, 8, 8, shuffle, drop);
    }
    {
      Rng shuffle = root.fork("shuffle", 0);
      l2 = train_epoch(params, state, docs, cfg, tcfg, 8, 8, shuffle, drop);
    }
    CHECK(params.classifier_W.values() == before);
    CHECK(l1 == l2);
  }

  SECTION("untrained balanced model starts near ln 2") {
    ModelConfig cfg = toy_config("han");
    Rng init(5);
    Parameters params = Parameters::init(cfg, init);
    AdamState state = AdamState::init(params);
    TrainConfig tcfg;
    tcfg.lr = 1e-9;  // effectively measure the initial loss
    auto docs = testsupport::make_toy_docs(64, 6, 13);
    Rng root(9);
    Rng drop = root.fork("dropout");
    Rng shuffle = root.fork("shuffle", 0);
    double loss =
        train_epoch(params, state, docs, cfg, tcfg, 8, 8, shuffle, drop);
    CHECK(loss == Catch::Approx(std::log(2.0)).margin(0.1));
  }
}

TEST_CASE("evaluate") {
  ModelConfig cfg = toy_config("han");
  Rng init(6);
  Parameters params = Parameters::init(cfg, init);

  SECTION("hardwired classifier on single-class and balanced splits") {
    // push the classifier bias so class 0 always wins
    auto& b = params.classifier_b.mutable_values();
    b[0] = 50.0;
    b[1] = -50.0;
    auto all_zero = testsupport::make_toy_docs(10, 6, 21);
    for (auto& d : all_zero) d.label = 0;
    CHECK(evaluate(params, cfg, all_zero, 8, 8) == 1.0);

    auto balanced = testsupport::make_toy_docs(10, 6, 22);  // labels alternate
    CHECK(evaluate(params, cfg, balanced, 8, 8) == 0.5);
  }

  SECTION("invariant to document order") {
    auto docs = testsupport::make_toy_docs(12, 6, 23);
    double acc1 = evaluate(params, cfg, docs, 8, 8);
    std::reverse(docs.begin(), docs.end());
    double acc2 = evaluate(params, cfg, docs, 8, 8);
    CHECK(acc1 == acc2);
  }

  SECTION("empty split rejected") {
    std::vector<Document> none;
    CHECK_THROWS_AS(evaluate(params, cfg, none, 8, 8), ContractError);
  }
}

TEST_CASE("full training runs deterministically") {
  ModelConfig cfg = toy_config("hpan");
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.lr = 0.01;
  tcfg.batch_size = 4;
  tcfg.seed = 99;
  CorpusSplits splits = toy_splits(12);

  auto run = [&] {
    Rng init = Rng(tcfg.seed).fork("init");
    Parameters params = Parameters::init(cfg, init);
    auto records = run_training(params, cfg, tcfg, splits, 8, 8);
    return std::pair{params, records};
  };
  auto [p1, r1] = run();
  auto [p2, r2] = run();
  for (std::size_t i = 0; i < r1.size(); ++i) {
    CHECK(r1[i].train_loss == r2[i].train_loss);
    CHECK(r1[i].validation_accuracy == r2[i].validation_accuracy);
  }
  REQUIRE(r1.back().test_accuracy.has_value());
  CHECK(*r1.back().test_accuracy == *r2.back().test_accuracy);
  auto n1 = p1.named();
  auto n2 = p2.named();
  for (std::size_t i = 0; i < n1.size(); ++i)
    CHECK(n1[i].second.values() == n2[i].second.values());  // bit-identical
}

TEST_CASE("checkpoint round trip") {
  ModelConfig cfg = toy_config("hsan");
  TrainConfig tcfg;
  tcfg.seed = 7;
  DataConfig dcfg;
  dcfg.s_cap = 8;
  dcfg.l_cap = 8;
  Rng init(77);
  Parameters params = Parameters::init(cfg, init);

  RawDocument raw;
  raw.sentences = {{"alpha", "alpha", "beta", "beta", "gamma", "gamma"}};
  raw.source_id = "r";
  Vocabulary vocab = build_vocab(std::span(&raw, 1), 2);
  // align the model's vocab_size with the stored vocabulary
  cfg.vocab_size = vocab.size();
  Rng init2(77);
  params = Parameters::init(cfg, init2);

  fs::path path = fs::temp_directory_path() /
                  ("hanet_ckpt_" + std::to_string(::getpid()) + ".bin");

  SECTION("all tensors restore bit-identically") {
    save_checkpoint(path, params, cfg, tcfg, dcfg, vocab);
    Checkpoint ck = load_checkpoint(path);
    auto orig = params.named();
    auto restored = ck.params.named();
    REQUIRE(orig.size() == restored.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
      CHECK(orig[i].first == restored[i].first);
      CHECK(orig[i].second.values() == restored[i].second.values());
    }
    CHECK(ck.model.gru_hidden == cfg.gru_hidden);
    CHECK(ck.model.word_attention.variant == AttentionVariant::Sparsemax);
    CHECK(ck.train.seed == tcfg.seed);
    CHECK(ck.data.s_cap == dcfg.s_cap);
    CHECK(ck.vocab.size() == vocab.size());
    CHECK(ck.vocab.token(2) == vocab.token(2));
    fs::remove(path);
  }

  SECTION("evaluate(restored) equals evaluate(original)") {
    save_checkpoint(path, params, cfg, tcfg, dcfg, vocab);
    Checkpoint ck = load_checkpoint(path);
    auto docs = testsupport::make_toy_docs(10, 1, 31);
    for (auto& d : docs)  // clamp ids into this tiny vocab
      for (auto& s : d.sentences)
        for (int& id : s) id = 2 + (id % (static_cast<int>(vocab.size()) - 2));
    CHECK(evaluate(params, cfg, docs, 8, 8) ==
          evaluate(ck.params, ck.model, docs, 8, 8));
    fs::remove(path);
  }

  SECTION("inconsistent declared dimensions are rejected wholesale") {
    ModelConfig bad = cfg;
    bad.embed_dim = cfg.embed_dim + 1;  // disagrees with the saved tensors
    save_checkpoint(path, params, bad, tcfg, dcfg, vocab);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    fs::remove(path);
  }

  SECTION("bad magic / truncation") {
    {
      std::ofstream out(path, std::ios::binary);
      out << "NOTACKPT";
    }
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    {
      std::ofstream out(path, std::ios::binary);
      out << "HANC";  // magic only, then EOF
    }
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(path.string() + ".missing"),
                    CheckpointError);
    fs::remove(path);
  }
}

TEST_CASE("support statistics flow through training records") {
  ModelConfig cfg = toy_config("hsan");
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.batch_size = 4;
  tcfg.seed = 3;
  CorpusSplits splits = toy_splits(8);
  Rng init = Rng(tcfg.seed).fork("init");
  Parameters params = Parameters::init(cfg, init);
  auto records = run_training(params, cfg, tcfg, splits, 8, 8);
  REQUIRE(records.size() == 1);
  CHECK(records[0].test_stats.has_value());
  CHECK(records[0].validation_stats.mean_support_size > 0.0);
}
