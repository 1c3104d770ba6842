#pragma once

#include <cstdint>
#include <vector>

#include "ctxvec/config.hpp"
#include "ctxvec/nn.hpp"
#include "ctxvec/ops.hpp"

namespace ctxvec {

template <typename T>
struct EncodeResult {
  Tensor<T> h;       // 1 x k, mean over last-layer states
  Tensor<T> states;  // n x k, last-layer states (feeds the query-bank path)
  bool truncated = false;
};

// Bidirectional pre-encoder: token + position embeddings into a transformer
// stack with unmasked attention, mean-pooled into a single summary vector.
template <typename T>
struct EncoderModel {
  Embedding<T> embed;
  PositionTable<T> pos;
  TransformerStack<T> stack;
  Trainability training = Trainability::full;

  template <typename Rng>
  static EncoderModel make(const ModelConfig& cfg, std::size_t vocab, Rng& rng) {
    EncoderModel m;
    m.embed = Embedding<T>::make(vocab, cfg.d_enc, rng);
    m.pos = PositionTable<T>::make(cfg.enc_cap(), cfg.d_enc, rng);
    m.stack = TransformerStack<T>::make(cfg.encoder_block(), cfg.enc_layers, rng);
    return m;
  }

  EncodeResult<T> encode(std::vector<std::int32_t> ids) const {
    if (ids.empty()) throw ContractError("encoder: empty input");
    EncodeResult<T> r;
    const std::size_t cap = pos.table.rows();
    if (ids.size() > cap) {
      ids.resize(cap);
      r.truncated = true;
    }
    auto x = add(embed(ids), pos(ids.size()));
    r.states = stack(x, MaskMode::bidirectional);
    r.h = mean_rows(r.states);
    return r;
  }

  template <typename Rng>
  void set_trainable(Trainability mode, std::size_t lora_rank, T lora_alpha,
                     const std::vector<std::string>& lora_targets, Rng& rng) {
    training = mode;
    if (mode == Trainability::lora && !stack.has_lora())
      stack.attach_lora(lora_rank, lora_alpha, lora_targets, rng);
    ParamList<T> base;
    append_base_params(base, "encoder");
    set_params_requires_grad(base, mode == Trainability::full);
    ParamList<T> adapters;
    stack.append_lora_params(adapters, "encoder");
    set_params_requires_grad(adapters, mode != Trainability::frozen);
  }

  void append_base_params(ParamList<T>& out, const std::string& prefix) {
    out.emplace_back(prefix + ".embed", embed.table);
    out.emplace_back(prefix + ".pos", pos.table);
    stack.append_params(out, prefix);
  }
  void append_all_params(ParamList<T>& out, const std::string& prefix) {
    append_base_params(out, prefix);
    stack.append_lora_params(out, prefix);
  }
  void append_trainable_params(ParamList<T>& out, const std::string& prefix) {
    switch (training) {
      case Trainability::frozen:
        return;
      case Trainability::lora:
        stack.append_lora_params(out, prefix);
        return;
      case Trainability::full:
        append_base_params(out, prefix);
        stack.append_lora_params(out, prefix);
        return;
    }
  }
};

}  // namespace ctxvec
