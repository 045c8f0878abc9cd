// hanet: hierarchical attention document classifier with softmax, sparsemax
// and threshold-pruned attention. Subcommands: train, eval, gradcheck,
// transform.
//
// Exit codes: 0 success, 1 check failure, 2 bad flags, 3 data/checkpoint
// error, 4 numeric abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hanet/hanet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string trim_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

struct TrainFlags {
  std::string model;
  std::string data_dir;
  std::string embeddings;
  std::string out_dir;
  std::size_t epochs = 3;
  double lr = 0.001;
  std::size_t batch_size = 64;
  double alpha_min = -1.0;  // negative = not set
  std::uint64_t seed = 1;
  std::size_t s_cap = 20;
  std::size_t l_cap = 60;
  double dropout = 0.1;
  int min_freq = 2;
  double grad_clip = 5.0;
  std::size_t embed_dim = 200;
  std::size_t hidden = 50;
  std::size_t max_train = 0;
  std::size_t max_val = 0;
  std::size_t max_test = 0;
  bool freeze_embeddings = false;
};

int run_train(const TrainFlags& f) {
  if (f.alpha_min >= 0.0 && f.model != "hpan") {
    std::cerr << "error: --alpha-min only applies to --model hpan\n";
    return kExitUsage;
  }
  double alpha_min = f.alpha_min >= 0.0 ? f.alpha_min : 0.05;

  hanet::ImdbOptions opt;
  opt.min_frequency = f.min_freq;
  opt.max_train = f.max_train;
  opt.max_validation = f.max_val;
  opt.max_test = f.max_test;

  std::cout << "loading corpus from " << f.data_dir << "\n";
  hanet::ImdbCorpus corpus = hanet::load_imdb(f.data_dir, f.seed, opt);
  std::cout << "train/validation/test = " << corpus.splits.train.size() << "/"
            << corpus.splits.validation.size() << "/"
            << corpus.splits.test.size() << ", vocabulary "
            << corpus.vocab.size() << " entries\n";

  hanet::ModelConfig mcfg = hanet::ModelConfig::preset(
      f.model, corpus.vocab.size(), 2, alpha_min);
  mcfg.embed_dim = f.embed_dim;
  mcfg.gru_hidden = f.hidden;
  mcfg.dropout_p = f.dropout;
  mcfg.finetune_embeddings = !f.freeze_embeddings;
  mcfg.validate();

  hanet::TrainConfig tcfg;
  tcfg.epochs = f.epochs;
  tcfg.lr = f.lr;
  tcfg.batch_size = f.batch_size;
  tcfg.seed = f.seed;
  tcfg.grad_clip = f.grad_clip;
  tcfg.validate();

  hanet::DataConfig dcfg;
  dcfg.s_cap = f.s_cap;
  dcfg.l_cap = f.l_cap;
  dcfg.min_frequency = f.min_freq;
  dcfg.max_train = f.max_train;
  dcfg.max_validation = f.max_val;
  dcfg.max_test = f.max_test;

  fs::create_directories(f.out_dir);
  fs::path metrics_path = fs::path(f.out_dir) / "metrics.csv";
  fs::path checkpoint_path = fs::path(f.out_dir) / "checkpoint.hanc";
  fs::path manifest_path = fs::path(f.out_dir) / "manifest.json";

  // manifest first: everything needed to reproduce the run
  json manifest{
      {"artifact_version", hanet::kVersion},
      {"command", "train"},
      {"model", f.model},
      {"seed", f.seed},
      {"model_config", hanet::to_json(mcfg)},
      {"train_config", hanet::to_json(tcfg)},
      {"data_config", hanet::to_json(dcfg)},
      {"data_dir", fs::absolute(f.data_dir).string()},
      {"embeddings", f.embeddings},
      {"corpus_fingerprint",
       {{"files", corpus.file_count}, {"bytes", corpus.byte_total}}},
      {"outputs",
       {{"metrics_csv", fs::absolute(metrics_path).string()},
        {"checkpoint", fs::absolute(checkpoint_path).string()}}}};
  {
    std::ofstream mf(manifest_path);
    if (!mf) throw hanet::DataError("cannot write " + manifest_path.string());
    mf << manifest.dump(2) << "\n";
  }

  hanet::Rng root(f.seed);
  hanet::Rng init = root.fork("init");
  hanet::Parameters params = hanet::Parameters::init(mcfg, init);
  if (!f.embeddings.empty()) {
    hanet::Rng emb_rng = root.fork("embeddings");
    hanet::EmbeddingLoad load =
        hanet::load_embeddings(f.embeddings, corpus.vocab, f.embed_dim,
                               emb_rng, mcfg.finetune_embeddings);
    params.embedding = load.table;
    std::printf("embeddings: coverage %.4f from %s\n", load.coverage,
                f.embeddings.c_str());
  }

  auto records = hanet::run_training(params, mcfg, tcfg, corpus.splits,
                                     f.s_cap, f.l_cap);
  for (const auto& r : records) {
    std::printf("epoch %zu  loss %.6f  val_acc %.4f  (%.1fs)\n", r.epoch,
                r.train_loss, r.validation_accuracy, r.wall_time_s);
    if (r.test_accuracy)
      std::printf("test accuracy: %.4f\n", *r.test_accuracy);
  }
  hanet::write_metrics_csv(metrics_path, records);
  hanet::save_checkpoint(checkpoint_path, params, mcfg, tcfg, dcfg,
                         corpus.vocab);
  std::cout << "wrote " << metrics_path.string() << " and "
            << checkpoint_path.string() << "\n";
  return kExitOk;
}

int run_eval(const std::string& checkpoint, const std::string& data_dir,
             const std::string& split) {
  hanet::Checkpoint ck = hanet::load_checkpoint(checkpoint);
  hanet::ImdbOptions opt;
  opt.min_frequency = ck.data.min_frequency;
  opt.max_train = ck.data.max_train;
  opt.max_validation = ck.data.max_validation;
  opt.max_test = ck.data.max_test;
  hanet::RawCorpus raw = hanet::load_imdb_raw(data_dir, ck.train.seed, opt);
  const auto& chosen = split == "validation" ? raw.validation : raw.test;
  std::vector<hanet::Document> docs =
      hanet::encode_documents(chosen, ck.vocab);  // stored vocab, not rebuilt
  hanet::AttentionStats::Accumulator acc_stats;
  double accuracy = hanet::evaluate(ck.params, ck.model, docs, ck.data.s_cap,
                                    ck.data.l_cap, &acc_stats);
  hanet::AttentionStats stats = acc_stats.finalize();
  std::printf("accuracy: %.4f\n", accuracy);
  std::printf("split,accuracy,pruned_word_frac,pruned_sent_frac,mean_support\n");
  std::printf("%s,%.6f,%.6f,%.6f,%.6f\n", split.c_str(), accuracy,
              stats.pruned_word_fraction, stats.pruned_sentence_fraction,
              stats.mean_support_size);
  return kExitOk;
}

int run_gradcheck(const std::string& model, std::uint64_t seed) {
  hanet::GradCheckReport report = hanet::model_gradcheck(model, seed);
  if (!report.probe_point_found) {
    std::cerr << "gradcheck: no usable probe point found for " << model
              << "\n";
    return kExitCheckFailed;
  }
  std::printf("gradcheck %s (seed %llu, probe trial %llu)\n", model.c_str(),
              static_cast<unsigned long long>(seed),
              static_cast<unsigned long long>(report.trial));
  const hanet::GradCheckGroup* worst = nullptr;
  for (const auto& g : report.groups) {
    std::printf("  %-18s max_rel_err %.3e%s\n", g.name.c_str(), g.max_rel_err,
                g.finite ? "" : "  NON-FINITE");
    if (!worst || g.max_rel_err > worst->max_rel_err) worst = &g;
  }
  if (report.variant == "hpan")
    std::printf("  pruned branch exercised: %s\n",
                report.prune_case_hit ? "yes" : "no");
  if (report.variant == "hsan")
    std::printf("  sparse support (< T) exercised: %s\n",
                report.sparse_case_hit ? "yes" : "no");
  std::printf("max relative error: %.3e\n", report.max_rel_err);
  if (!report.ok()) {
    std::cerr << "gradcheck FAILED";
    if (worst && (worst->max_rel_err >= 1e-3 || !worst->finite))
      std::cerr << " (parameter " << worst->name << ")";
    std::cerr << "\n";
    return kExitCheckFailed;
  }
  std::cout << "gradcheck passed\n";
  return kExitOk;
}

int run_transform(const std::string& fn, const std::string& input,
                  double alpha_min) {
  std::vector<double> z;
  std::stringstream ss(input);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      double v = std::stod(tok, &used);
      while (used < tok.size() && std::isspace((unsigned char)tok[used]))
        ++used;
      if (used != tok.size()) throw std::invalid_argument(tok);
      if (!std::isfinite(v)) throw std::invalid_argument(tok);
      z.push_back(v);
    } catch (const std::exception&) {
      std::cerr << "error: cannot parse '" << tok << "' as a finite number\n";
      return kExitUsage;
    }
  }
  if (z.empty()) {
    std::cerr << "error: --input needs at least one value\n";
    return kExitUsage;
  }

  auto print_vec = [](const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i)
      std::cout << (i ? "," : "") << trim_number(v[i]);
  };
  if (fn == "softmax") {
    print_vec(hanet::softmax_values(z));
    std::cout << "\n";
  } else if (fn == "sparsemax") {
    hanet::SparsemaxResult r = hanet::sparsemax_values(z);
    print_vec(r.p);
    std::cout << "  tau=" << trim_number(r.tau) << " support="
              << r.support_size << "\n";
  } else if (fn == "prune") {
    print_vec(hanet::prune_renormalize(z, alpha_min));
    std::cout << "\n";
  } else {
    std::cerr << "error: unknown transform '" << fn << "'\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical attention document classifier"};
  app.set_version_flag("--version", hanet::kVersion);
  app.require_subcommand(1);

  TrainFlags tf;
  CLI::App* train = app.add_subcommand("train", "train a model, emit metrics");
  train->add_option("--model", tf.model, "han | hpan | hsan")
      ->required()
      ->check(CLI::IsMember({"han", "hpan", "hsan"}));
  train->add_option("--data", tf.data_dir,
                    "corpus root: {train,test}/{pos,neg}/*.txt")
      ->required();
  train->add_option("--embeddings", tf.embeddings,
                    "pretrained embedding text file (token v1..vE per line)");
  train->add_option("--out", tf.out_dir, "output directory")->required();
  train->add_option("--epochs", tf.epochs);
  train->add_option("--lr", tf.lr);
  train->add_option("--batch-size", tf.batch_size);
  train->add_option("--alpha-min", tf.alpha_min,
                    "pruning threshold (hpan only)");
  train->add_option("--seed", tf.seed);
  train->add_option("--s-cap", tf.s_cap, "max sentences per document");
  train->add_option("--l-cap", tf.l_cap, "max words per sentence");
  train->add_option("--dropout", tf.dropout);
  train->add_option("--min-freq", tf.min_freq, "vocabulary frequency cutoff");
  train->add_option("--grad-clip", tf.grad_clip, "global L2 cap, 0 disables");
  train->add_option("--embed-dim", tf.embed_dim);
  train->add_option("--hidden", tf.hidden, "GRU hidden size");
  train->add_option("--max-train", tf.max_train,
                    "subsample: training documents (0 = all)");
  train->add_option("--max-val", tf.max_val,
                    "subsample: validation documents (0 = all)");
  train->add_option("--max-test", tf.max_test,
                    "subsample: test documents (0 = all)");
  train->add_flag("--freeze-embeddings", tf.freeze_embeddings,
                  "do not fine-tune the embedding table");

  std::string eval_checkpoint, eval_data, eval_split = "test";
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_checkpoint)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--split", eval_split)
      ->check(CLI::IsMember({"test", "validation"}));

  std::string gc_model;
  std::uint64_t gc_seed = 1;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of the full model");
  gradcheck->add_option("--model", gc_model)
      ->required()
      ->check(CLI::IsMember({"han", "hpan", "hsan"}));
  gradcheck->add_option("--seed", gc_seed);

  std::string tr_fn, tr_input;
  double tr_alpha_min = 0.05;
  CLI::App* transform = app.add_subcommand(
      "transform", "apply softmax/sparsemax/prune to a score vector");
  transform->add_option("--fn", tr_fn)
      ->required()
      ->check(CLI::IsMember({"softmax", "sparsemax", "prune"}));
  transform->add_option("--input", tr_input, "comma-separated floats")
      ->required();
  transform->add_option("--alpha-min", tr_alpha_min);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) return run_train(tf);
    if (*eval) return run_eval(eval_checkpoint, eval_data, eval_split);
    if (*gradcheck) return run_gradcheck(gc_model, gc_seed);
    if (*transform) return run_transform(tr_fn, tr_input, tr_alpha_min);
  } catch (const hanet::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const hanet::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const hanet::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const hanet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}
