#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxvec/errors.hpp"
#include "ctxvec/nn.hpp"

namespace ctxvec {

enum class PoolingMode { concat_ctx_eos, last_token, mean, weighted_mean, bi_eos };
enum class CtxPosition { before_instruction, after_instruction };

inline const char* pooling_mode_name(PoolingMode m) {
  switch (m) {
    case PoolingMode::concat_ctx_eos: return "concat_ctx_eos";
    case PoolingMode::last_token: return "last_token";
    case PoolingMode::mean: return "mean";
    case PoolingMode::weighted_mean: return "weighted_mean";
    default: return "bi_eos";
  }
}

inline PoolingMode pooling_mode_from(const std::string& s) {
  if (s == "concat_ctx_eos") return PoolingMode::concat_ctx_eos;
  if (s == "last_token") return PoolingMode::last_token;
  if (s == "mean") return PoolingMode::mean;
  if (s == "weighted_mean") return PoolingMode::weighted_mean;
  if (s == "bi_eos") return PoolingMode::bi_eos;
  throw ConfigError("unknown pooling mode '" + s + "'");
}

inline const char* ctx_position_name(CtxPosition p) {
  return p == CtxPosition::before_instruction ? "before_instruction" : "after_instruction";
}
inline CtxPosition ctx_position_from(const std::string& s) {
  if (s == "before_instruction") return CtxPosition::before_instruction;
  if (s == "after_instruction") return CtxPosition::after_instruction;
  throw ConfigError("unknown ctx position '" + s + "'");
}

inline MaskMode mask_mode_from(const std::string& s) {
  if (s == "causal") return MaskMode::causal;
  if (s == "bidirectional") return MaskMode::bidirectional;
  throw ConfigError("unknown mask mode '" + s + "'");
}

inline Trainability trainability_from(const std::string& s) {
  if (s == "frozen") return Trainability::frozen;
  if (s == "lora") return Trainability::lora;
  if (s == "full") return Trainability::full;
  throw ConfigError("unknown trainability '" + s + "'");
}

namespace detail {

// Fail-fast JSON field reader: every key must be consumed, leftovers are
// schema violations.
class StrictJson {
 public:
  StrictJson(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  T require(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    return take<T>(key);
  }

  template <typename T>
  T optional(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return take<T>(key);
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const nlohmann::json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key))
        throw ConfigError(where_ + ": unknown key '" + key + "' (schema is strict)");
  }

 private:
  template <typename T>
  T take(const std::string& key) {
    seen_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where_ + ": key '" + key + "': " + e.what());
    }
  }

  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline nlohmann::json load_json_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(std::string(what) + ": cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + ": " + path + ": " + e.what());
  }
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct ModelConfig {
  static constexpr int kConfigVersion = 1;

  // decoder
  std::size_t d_model = 128;
  std::size_t dec_layers = 4;
  std::size_t dec_heads = 8;
  std::size_t max_positions = 512;
  // encoder
  std::size_t d_enc = 64;
  std::size_t enc_layers = 2;
  std::size_t enc_heads = 4;
  std::size_t enc_max_positions = 0;  // 0: same as max_positions
  std::size_t ffn_mult = 4;

  // The pre-encoder may read longer texts than the decoder window admits; the
  // contextual token is how that extra context reaches the decoder.
  std::size_t enc_cap() const { return enc_max_positions ? enc_max_positions : max_positions; }

  std::size_t vocab_size = 0;  // 0: adopt the tokenizer's vocab

  PoolingMode pooling = PoolingMode::concat_ctx_eos;
  bool use_ctx = true;  // false: plain [I;T;EOS] baseline, no encoder pass
  std::size_t ctx_count = 1;
  CtxPosition ctx_position = CtxPosition::after_instruction;
  MaskMode mask = MaskMode::causal;
  bool use_query_bank = false;  // count>1 requires it; count==1 opt-in

  Trainability encoder_training = Trainability::full;
  Trainability decoder_training = Trainability::full;
  std::size_t lora_rank = 8;
  double lora_alpha = 16.0;
  std::vector<std::string> lora_targets = {"q", "k", "v", "o"};

  bool inst_wrappers = true;
  bool ctx_inside_wrapper = false;  // default: Contextual token sits outside [INST]...[/INST]

  std::uint64_t init_seed = 42;

  void validate() const {
    if (d_model == 0 || d_enc == 0 || dec_layers == 0 || enc_layers == 0)
      throw ConfigError("model config: dimensions and layer counts must be positive");
    if (d_model % dec_heads != 0)
      throw ConfigError("model config: d_model not divisible by dec_heads");
    if (d_enc % enc_heads != 0) throw ConfigError("model config: d_enc not divisible by enc_heads");
    if (ctx_count != 1 && ctx_count != 2 && ctx_count != 4 && ctx_count != 8)
      throw ConfigError("model config: ctx_count must be one of {1,2,4,8}, got " +
                        std::to_string(ctx_count));
    if (ctx_count > 1 && !use_query_bank)
      throw ConfigError("model config: ctx_count > 1 requires use_query_bank");
    if (!use_ctx &&
        (pooling == PoolingMode::concat_ctx_eos || pooling == PoolingMode::bi_eos))
      throw ConfigError(std::string("model config: pooling '") + pooling_mode_name(pooling) +
                        "' needs a contextual token (use_ctx=false)");
    if (lora_rank == 0) throw ConfigError("model config: lora_rank must be positive");
    for (const auto& t : lora_targets)
      if (t != "q" && t != "k" && t != "v" && t != "o")
        throw ConfigError("model config: unknown lora target '" + t + "'");
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    detail::StrictJson r(j, "model config");
    const int version = r.require<int>("config_version");
    if (version != kConfigVersion)
      throw ConfigError("model config: unsupported config_version " + std::to_string(version));
    ModelConfig c;
    c.d_model = r.optional<std::size_t>("d_model", c.d_model);
    c.dec_layers = r.optional<std::size_t>("dec_layers", c.dec_layers);
    c.dec_heads = r.optional<std::size_t>("dec_heads", c.dec_heads);
    c.max_positions = r.optional<std::size_t>("max_positions", c.max_positions);
    c.d_enc = r.optional<std::size_t>("d_enc", c.d_enc);
    c.enc_layers = r.optional<std::size_t>("enc_layers", c.enc_layers);
    c.enc_heads = r.optional<std::size_t>("enc_heads", c.enc_heads);
    c.enc_max_positions = r.optional<std::size_t>("enc_max_positions", c.enc_max_positions);
    c.ffn_mult = r.optional<std::size_t>("ffn_mult", c.ffn_mult);
    c.vocab_size = r.optional<std::size_t>("vocab_size", c.vocab_size);
    c.pooling = pooling_mode_from(r.optional<std::string>("pooling", pooling_mode_name(c.pooling)));
    c.use_ctx = r.optional<bool>("use_ctx", c.use_ctx);
    c.ctx_count = r.optional<std::size_t>("ctx_count", c.ctx_count);
    c.ctx_position =
        ctx_position_from(r.optional<std::string>("ctx_position", ctx_position_name(c.ctx_position)));
    c.mask = mask_mode_from(r.optional<std::string>("mask", mask_mode_name(c.mask)));
    c.use_query_bank = r.optional<bool>("use_query_bank", c.use_query_bank);
    c.encoder_training = trainability_from(
        r.optional<std::string>("encoder_training", trainability_name(c.encoder_training)));
    c.decoder_training = trainability_from(
        r.optional<std::string>("decoder_training", trainability_name(c.decoder_training)));
    c.lora_rank = r.optional<std::size_t>("lora_rank", c.lora_rank);
    c.lora_alpha = r.optional<double>("lora_alpha", c.lora_alpha);
    c.lora_targets = r.optional<std::vector<std::string>>("lora_targets", c.lora_targets);
    c.inst_wrappers = r.optional<bool>("inst_wrappers", c.inst_wrappers);
    c.ctx_inside_wrapper = r.optional<bool>("ctx_inside_wrapper", c.ctx_inside_wrapper);
    c.init_seed = r.optional<std::uint64_t>("init_seed", c.init_seed);
    r.finish();
    c.validate();
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["config_version"] = kConfigVersion;
    j["d_model"] = d_model;
    j["dec_layers"] = dec_layers;
    j["dec_heads"] = dec_heads;
    j["max_positions"] = max_positions;
    j["d_enc"] = d_enc;
    j["enc_layers"] = enc_layers;
    j["enc_heads"] = enc_heads;
    j["enc_max_positions"] = enc_max_positions;
    j["ffn_mult"] = ffn_mult;
    j["vocab_size"] = vocab_size;
    j["pooling"] = pooling_mode_name(pooling);
    j["use_ctx"] = use_ctx;
    j["ctx_count"] = ctx_count;
    j["ctx_position"] = ctx_position_name(ctx_position);
    j["mask"] = mask_mode_name(mask);
    j["use_query_bank"] = use_query_bank;
    j["encoder_training"] = trainability_name(encoder_training);
    j["decoder_training"] = trainability_name(decoder_training);
    j["lora_rank"] = lora_rank;
    j["lora_alpha"] = lora_alpha;
    j["lora_targets"] = lora_targets;
    j["inst_wrappers"] = inst_wrappers;
    j["ctx_inside_wrapper"] = ctx_inside_wrapper;
    j["init_seed"] = init_seed;
    return j;
  }

  static ModelConfig load(const std::string& path) {
    return from_json(detail::load_json_file(path, "model config"));
  }

  BlockConfig decoder_block() const {
    return BlockConfig{d_model, dec_heads, ffn_mult, max_positions};
  }
  BlockConfig encoder_block() const {
    return BlockConfig{d_enc, enc_heads, ffn_mult, enc_cap()};
  }
};

// ---------------------------------------------------------------------------

struct DatasetRef {
  std::string path;
  double sample_ratio = 1.0;
};

struct TrainConfig {
  static constexpr int kConfigVersion = 1;

  double tau = 0.05;
  bool use_in_batch_negatives = true;

  double peak_lr = 1e-4;
  std::size_t warmup_steps = 300;
  std::size_t train_steps = 500;
  std::size_t max_steps = 0;  // 0: twice train_steps
  std::size_t grad_accum = 2;
  std::size_t batch_size = 32;
  double weight_decay = 0.0;
  std::uint64_t seed = 42;

  std::vector<DatasetRef> datasets;
  std::string instructions_path;

  std::size_t effective_max_steps() const { return max_steps == 0 ? 2 * train_steps : max_steps; }

  void validate() const {
    if (tau <= 0) throw ConfigError("train config: tau must be > 0");
    if (batch_size == 0 || grad_accum == 0)
      throw ConfigError("train config: batch_size and grad_accum must be positive");
    if (train_steps == 0) throw ConfigError("train config: train_steps must be positive");
    const std::size_t ms = effective_max_steps();
    if (warmup_steps >= ms)
      throw ConfigError("train config: warmup_steps must be below max_steps");
    if (train_steps > ms) throw ConfigError("train config: train_steps exceed max_steps");
    if (peak_lr <= 0) throw ConfigError("train config: peak_lr must be > 0");
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    detail::StrictJson r(j, "train config");
    const int version = r.require<int>("config_version");
    if (version != kConfigVersion)
      throw ConfigError("train config: unsupported config_version " + std::to_string(version));
    TrainConfig c;
    c.tau = r.optional<double>("tau", c.tau);
    c.use_in_batch_negatives = r.optional<bool>("use_in_batch_negatives", c.use_in_batch_negatives);
    c.peak_lr = r.optional<double>("peak_lr", c.peak_lr);
    c.warmup_steps = r.optional<std::size_t>("warmup_steps", c.warmup_steps);
    c.train_steps = r.optional<std::size_t>("train_steps", c.train_steps);
    c.max_steps = r.optional<std::size_t>("max_steps", c.max_steps);
    c.grad_accum = r.optional<std::size_t>("grad_accum", c.grad_accum);
    c.batch_size = r.optional<std::size_t>("batch_size", c.batch_size);
    c.weight_decay = r.optional<double>("weight_decay", c.weight_decay);
    c.seed = r.optional<std::uint64_t>("seed", c.seed);
    if (r.has("datasets")) {
      for (const auto& d : r.raw("datasets")) {
        detail::StrictJson dr(d, "train config dataset");
        DatasetRef ref;
        ref.path = dr.require<std::string>("path");
        ref.sample_ratio = dr.optional<double>("sample_ratio", 1.0);
        dr.finish();
        if (ref.sample_ratio <= 0)
          throw ConfigError("train config: sample_ratio must be > 0 for " + ref.path);
        c.datasets.push_back(std::move(ref));
      }
    }
    c.instructions_path = r.optional<std::string>("instructions_path", "");
    r.finish();
    c.validate();
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["config_version"] = kConfigVersion;
    j["tau"] = tau;
    j["use_in_batch_negatives"] = use_in_batch_negatives;
    j["peak_lr"] = peak_lr;
    j["warmup_steps"] = warmup_steps;
    j["train_steps"] = train_steps;
    j["max_steps"] = max_steps;
    j["grad_accum"] = grad_accum;
    j["batch_size"] = batch_size;
    j["weight_decay"] = weight_decay;
    j["seed"] = seed;
    auto& ds = j["datasets"] = nlohmann::json::array();
    for (const auto& d : datasets) ds.push_back({{"path", d.path}, {"sample_ratio", d.sample_ratio}});
    j["instructions_path"] = instructions_path;
    return j;
  }

  static TrainConfig load(const std::string& path) {
    return from_json(detail::load_json_file(path, "train config"));
  }
};

// Instruction templates: task name -> instruction text.
struct InstructionMap {
  std::map<std::string, std::string> by_task;

  static InstructionMap load(const std::string& path) {
    auto j = detail::load_json_file(path, "instructions");
    if (!j.is_object()) throw ConfigError("instructions: expected an object of task -> text");
    InstructionMap m;
    for (const auto& [task, text] : j.items()) {
      if (!text.is_string()) throw ConfigError("instructions: value for '" + task + "' not a string");
      m.by_task[task] = text.get<std::string>();
    }
    return m;
  }

  const std::string& require(const std::string& task) const {
    auto it = by_task.find(task);
    if (it == by_task.end())
      throw ConfigError("no instruction template for task '" + task + "'");
    return it->second;
  }
  bool has(const std::string& task) const { return by_task.count(task) > 0; }
};

}  // namespace ctxvec
