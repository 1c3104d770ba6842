#pragma once

#include <cstdint>
#include <vector>

#include "ctxvec/bridge.hpp"
#include "ctxvec/config.hpp"
#include "ctxvec/nn.hpp"
#include "ctxvec/ops.hpp"

namespace ctxvec {

// Decoder-only model over assembled inputs. Causal by default; the
// bidirectional variant exists solely for the masking ablation.
template <typename T>
struct DecoderModel {
  Embedding<T> embed;  // also serves bridge assembly
  PositionTable<T> pos;
  TransformerStack<T> stack;
  MaskMode mask = MaskMode::causal;
  Trainability training = Trainability::full;

  template <typename Rng>
  static DecoderModel make(const ModelConfig& cfg, std::size_t vocab, Rng& rng) {
    DecoderModel m;
    m.embed = Embedding<T>::make(vocab, cfg.d_model, rng);
    m.pos = PositionTable<T>::make(cfg.max_positions, cfg.d_model, rng);
    m.stack = TransformerStack<T>::make(cfg.decoder_block(), cfg.dec_layers, rng);
    m.mask = cfg.mask;
    return m;
  }

  Tensor<T> forward(const AssembledInput<T>& input) const {
    const std::size_t rows = input.rows();
    if (rows > pos.table.rows())
      throw CapacityError("decoder: " + std::to_string(rows) + " rows exceed " +
                          std::to_string(pos.table.rows()) + " positions (assembly should have truncated)");
    auto x = add(input.x, pos(rows));
    return stack(x, mask);
  }

  static Tensor<T> hidden_at(const Tensor<T>& states, std::size_t index) {
    if (index >= states.rows())
      throw IndexError("hidden_at: index " + std::to_string(index) + " out of " +
                       std::to_string(states.rows()) + " rows");
    return row_at(states, index);
  }

  template <typename Rng>
  void set_trainable(Trainability mode, std::size_t lora_rank, T lora_alpha,
                     const std::vector<std::string>& lora_targets, Rng& rng) {
    training = mode;
    if (mode == Trainability::lora && !stack.has_lora())
      stack.attach_lora(lora_rank, lora_alpha, lora_targets, rng);
    ParamList<T> base;
    append_base_params(base, "decoder");
    set_params_requires_grad(base, mode == Trainability::full);
    ParamList<T> adapters;
    stack.append_lora_params(adapters, "decoder");
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
