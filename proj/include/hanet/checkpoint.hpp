#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hanet/data.hpp"
#include "hanet/errors.hpp"
#include "hanet/model.hpp"
#include "hanet/train.hpp"

namespace hanet {

// Truncation geometry and corpus options; stored in checkpoints so a run can
// be reproduced or evaluated with exactly the data view it trained on.
struct DataConfig {
  std::size_t s_cap = 20;  // max sentences per document
  std::size_t l_cap = 60;  // max words per sentence
  int min_frequency = 2;
  std::size_t max_train = 0;
  std::size_t max_validation = 0;
  std::size_t max_test = 0;
};

// ---------------------------------------------------------------------------
// config <-> json
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const AttentionKind& kind) {
  nlohmann::json j;
  j["variant"] = attention_variant_name(kind.variant);
  if (kind.variant == AttentionVariant::Pruned) j["alpha_min"] = kind.alpha_min;
  return j;
}

inline AttentionKind attention_kind_from_json(const nlohmann::json& j) {
  std::string variant = j.at("variant").get<std::string>();
  if (variant == "softmax") return AttentionKind::softmax();
  if (variant == "sparsemax") return AttentionKind::sparsemax();
  if (variant == "pruned")
    return AttentionKind::pruned(j.at("alpha_min").get<double>());
  throw CheckpointError("unknown attention variant '" + variant + "'");
}

inline nlohmann::json to_json(const ModelConfig& c) {
  return nlohmann::json{{"vocab_size", c.vocab_size},
                        {"embed_dim", c.embed_dim},
                        {"gru_hidden", c.gru_hidden},
                        {"num_classes", c.num_classes},
                        {"word_attention", to_json(c.word_attention)},
                        {"sentence_attention", to_json(c.sentence_attention)},
                        {"dropout_p", c.dropout_p},
                        {"dropout_on_embeddings", c.dropout_on_embeddings},
                        {"dropout_on_doc_vector", c.dropout_on_doc_vector},
                        {"finetune_embeddings", c.finetune_embeddings}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.gru_hidden = j.at("gru_hidden").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.word_attention = attention_kind_from_json(j.at("word_attention"));
  c.sentence_attention = attention_kind_from_json(j.at("sentence_attention"));
  c.dropout_p = j.at("dropout_p").get<double>();
  c.dropout_on_embeddings = j.at("dropout_on_embeddings").get<bool>();
  c.dropout_on_doc_vector = j.at("dropout_on_doc_vector").get<bool>();
  c.finetune_embeddings = j.at("finetune_embeddings").get<bool>();
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{{"epochs", c.epochs},       {"lr", c.lr},
                        {"batch_size", c.batch_size}, {"beta1", c.beta1},
                        {"beta2", c.beta2},         {"adam_eps", c.adam_eps},
                        {"seed", c.seed},           {"grad_clip", c.grad_clip}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.grad_clip = j.at("grad_clip").get<double>();
  return c;
}

inline nlohmann::json to_json(const DataConfig& c) {
  return nlohmann::json{{"s_cap", c.s_cap},
                        {"l_cap", c.l_cap},
                        {"min_frequency", c.min_frequency},
                        {"max_train", c.max_train},
                        {"max_validation", c.max_validation},
                        {"max_test", c.max_test}};
}

inline DataConfig data_config_from_json(const nlohmann::json& j) {
  DataConfig c;
  c.s_cap = j.at("s_cap").get<std::size_t>();
  c.l_cap = j.at("l_cap").get<std::size_t>();
  c.min_frequency = j.at("min_frequency").get<int>();
  c.max_train = j.at("max_train").get<std::size_t>();
  c.max_validation = j.at("max_validation").get<std::size_t>();
  c.max_test = j.at("max_test").get<std::size_t>();
  return c;
}

// ---------------------------------------------------------------------------
// binary container
// ---------------------------------------------------------------------------
//
// Layout (all integers little-endian):
//   magic   "HANC"
//   u32     format version (1)
//   u64     config JSON length, followed by that many bytes
//   u64     vocabulary token count (ids 2..), then per token u32 len + bytes
//   u32     tensor count, then per tensor:
//             u32 name len + bytes, u32 rank, u64 dims..., f64 payload
// Floats are stored at full 64 bits so a round trip is bit-exact.

namespace detail {

constexpr char kCheckpointMagic[4] = {'H', 'A', 'N', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline void write_f64(std::ostream& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  write_u64(out, bits);
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw CheckpointError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw CheckpointError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in) {
  std::uint64_t bits = read_u64(in);
  double x;
  std::memcpy(&x, &bits, sizeof x);
  return x;
}

inline std::string read_string(std::istream& in, std::uint32_t len) {
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len))
    throw CheckpointError("checkpoint truncated");
  return s;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path,
                            const Parameters& params, const ModelConfig& mcfg,
                            const TrainConfig& tcfg, const DataConfig& dcfg,
                            const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw CheckpointError("cannot write checkpoint to " + path.string());
  out.write(detail::kCheckpointMagic, 4);
  detail::write_u32(out, detail::kCheckpointVersion);

  nlohmann::json config{{"model", to_json(mcfg)},
                        {"train", to_json(tcfg)},
                        {"data", to_json(dcfg)},
                        {"vocab_min_frequency", vocab.min_frequency()}};
  std::string config_str = config.dump();
  detail::write_u64(out, config_str.size());
  out.write(config_str.data(),
            static_cast<std::streamsize>(config_str.size()));

  auto tokens = vocab.tokens_after_reserved();
  detail::write_u64(out, tokens.size());
  for (const std::string& tok : tokens) detail::write_string(out, tok);

  auto named = params.named();
  detail::write_u32(out, static_cast<std::uint32_t>(named.size()));
  for (auto& [name, tensor] : named) {
    detail::write_string(out, name);
    detail::write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) detail::write_u64(out, d);
    for (double x : tensor.values()) detail::write_f64(out, x);
  }
  if (!out) throw CheckpointError("write failure on " + path.string());
}

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  Vocabulary vocab;
  Parameters params;
};

// Restores a checkpoint into a fully validated in-memory state; any
// inconsistency (bad magic, version, shape vs config) throws and leaves
// nothing half-built behind.
inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, detail::kCheckpointMagic, 4))
    throw CheckpointError("bad checkpoint magic in " + path.string());
  std::uint32_t version = detail::read_u32(in);
  if (version != detail::kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));

  std::uint64_t config_len = detail::read_u64(in);
  std::string config_str =
      detail::read_string(in, static_cast<std::uint32_t>(config_len));
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(config_str);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint config: ") +
                          e.what());
  }

  Checkpoint ck;
  try {
    ck.model = model_config_from_json(config.at("model"));
    ck.train = train_config_from_json(config.at("train"));
    ck.data = data_config_from_json(config.at("data"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint config: ") +
                          e.what());
  }

  std::uint64_t token_count = detail::read_u64(in);
  std::vector<std::string> tokens{"<pad>", "<unk>"};
  tokens.reserve(token_count + 2);
  for (std::uint64_t i = 0; i < token_count; ++i) {
    std::uint32_t len = detail::read_u32(in);
    tokens.push_back(detail::read_string(in, len));
  }
  ck.vocab = Vocabulary::from_tokens(
      std::move(tokens), config.value("vocab_min_frequency", 2));

  if (ck.vocab.size() != ck.model.vocab_size)
    throw CheckpointError("checkpoint vocabulary size " +
                          std::to_string(ck.vocab.size()) +
                          " disagrees with model config " +
                          std::to_string(ck.model.vocab_size));

  // template parameters with the right shapes, then overwrite from payload
  Rng scratch(0);
  ck.params = Parameters::init(ck.model, scratch);
  auto named = ck.params.named();

  std::uint32_t tensor_count = detail::read_u32(in);
  if (tensor_count != named.size())
    throw CheckpointError("checkpoint holds " + std::to_string(tensor_count) +
                          " tensors, expected " +
                          std::to_string(named.size()));
  for (std::uint32_t k = 0; k < tensor_count; ++k) {
    std::uint32_t name_len = detail::read_u32(in);
    std::string name = detail::read_string(in, name_len);
    if (name != named[k].first)
      throw CheckpointError("checkpoint tensor '" + name +
                            "' does not match expected '" + named[k].first +
                            "'");
    std::uint32_t rank = detail::read_u32(in);
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d)
      shape[d] = static_cast<std::size_t>(detail::read_u64(in));
    Tensor& target = named[k].second;
    if (shape != target.shape())
      throw CheckpointError("checkpoint tensor '" + name + "' has shape " +
                            shape_str(shape) + ", config implies " +
                            shape_str(target.shape()));
    auto& data = target.mutable_values();
    for (double& x : data) x = detail::read_f64(in);
  }
  return ck;
}

}  // namespace hanet
