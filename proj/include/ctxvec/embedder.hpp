#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ctxvec/bridge.hpp"
#include "ctxvec/config.hpp"
#include "ctxvec/decoder.hpp"
#include "ctxvec/encoder.hpp"
#include "ctxvec/pooling.hpp"
#include "ctxvec/tokenizer.hpp"

namespace ctxvec {

// The full embedding pipeline: tokenizer -> bidirectional encoder -> bridge
// projection -> assembled decoder input -> pooling. One tokenizer serves both
// models.
template <typename T>
struct Embedder {
  ModelConfig cfg;
  Tokenizer tok;
  EncoderModel<T> encoder;
  BridgeParams<T> bridge;
  std::optional<QueryBank<T>> bank;
  DecoderModel<T> decoder;

  static Embedder make(ModelConfig cfg, Tokenizer tok) {
    cfg.validate();
    if (cfg.vocab_size == 0) cfg.vocab_size = tok.vocab_size();
    if (cfg.vocab_size < tok.vocab_size())
      throw ConfigError("embedder: vocab_size " + std::to_string(cfg.vocab_size) +
                        " smaller than tokenizer vocab " + std::to_string(tok.vocab_size()));
    std::mt19937_64 rng(cfg.init_seed);
    Embedder e{std::move(cfg), std::move(tok), {}, {}, std::nullopt, {}};
    e.encoder = EncoderModel<T>::make(e.cfg, e.cfg.vocab_size, rng);
    e.bridge = BridgeParams<T>::make(e.cfg.d_model, e.cfg.d_enc, rng);
    if (e.cfg.use_query_bank) e.bank = QueryBank<T>::make(e.cfg.ctx_count, e.cfg.d_enc, rng);
    e.decoder = DecoderModel<T>::make(e.cfg, e.cfg.vocab_size, rng);
    e.apply_trainability(rng);
    return e;
  }

  template <typename Rng>
  void apply_trainability(Rng& rng) {
    encoder.set_trainable(cfg.encoder_training, cfg.lora_rank, T(cfg.lora_alpha),
                          cfg.lora_targets, rng);
    decoder.set_trainable(cfg.decoder_training, cfg.lora_rank, T(cfg.lora_alpha),
                          cfg.lora_targets, rng);
  }

  AssembleOptions assemble_options() const {
    AssembleOptions opt;
    opt.position = cfg.ctx_position;
    opt.inst_wrappers = cfg.inst_wrappers;
    opt.ctx_inside_wrapper = cfg.ctx_inside_wrapper;
    opt.max_positions = cfg.max_positions;
    return opt;
  }

  struct Forward {
    EmbeddingRecord<T> rec;
    AssembledInput<T> input;
    Tensor<T> states;        // decoder last-layer hidden states
    ContextualToken<T> ctx;  // bridge output (pre-decoder)
    bool encoder_truncated = false;
  };

  // The encoder summarizes the text alone; instructions only shape the
  // decoder-side sequence. With use_ctx off the encoder is skipped entirely
  // and the decoder sees the plain [I; T; EOS] baseline.
  Forward embed_ids(const std::vector<std::int32_t>& instruction_ids,
                    const std::vector<std::int32_t>& text_ids) const {
    Forward f;
    if (cfg.use_ctx) {
      auto enc = encoder.encode(text_ids);
      f.encoder_truncated = enc.truncated;
      f.ctx = bank ? expand(enc.states, *bank, bridge) : project(enc.h, bridge);
      f.input = assemble(instruction_ids, f.ctx, text_ids, decoder.embed.table, tok.specials(),
                         assemble_options());
    } else {
      f.input = assemble_plain(instruction_ids, text_ids, decoder.embed.table, tok.specials(),
                               assemble_options());
    }
    f.states = decoder.forward(f.input);
    f.rec = pool(f.states, f.input, cfg.pooling,
                 cfg.use_ctx ? std::optional<Tensor<T>>(f.ctx.C) : std::nullopt);
    return f;
  }

  EmbeddingRecord<T> embed_text(const std::string& text, const std::string& instruction = "") const {
    std::vector<std::int32_t> instr_ids;
    if (!instruction.empty()) instr_ids = tok.encode(instruction);
    return embed_ids(instr_ids, tok.encode(text)).rec;
  }

  std::size_t embedding_dim() const {
    return (cfg.pooling == PoolingMode::concat_ctx_eos || cfg.pooling == PoolingMode::bi_eos)
               ? 2 * cfg.d_model
               : cfg.d_model;
  }

  ParamList<T> all_params() {
    ParamList<T> out;
    encoder.append_all_params(out, "encoder");
    bridge.append_params(out, "bridge");
    if (bank) bank->append_params(out, "query_bank");
    decoder.append_all_params(out, "decoder");
    return out;
  }

  ParamList<T> trainable_params() {
    ParamList<T> out;
    encoder.append_trainable_params(out, "encoder");
    bridge.append_params(out, "bridge");
    if (bank) bank->append_params(out, "query_bank");
    decoder.append_trainable_params(out, "decoder");
    return out;
  }
};

}  // namespace ctxvec
