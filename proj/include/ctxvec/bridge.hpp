#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ctxvec/config.hpp"
#include "ctxvec/nn.hpp"
#include "ctxvec/ops.hpp"
#include "ctxvec/tokenizer.hpp"

namespace ctxvec {

// Two bias-free projections with a GELU between them, mapping the encoder
// summary (width k) into the decoder embedding space (width d).
template <typename T>
struct BridgeParams {
  Tensor<T> W1;  // d x k
  Tensor<T> W2;  // d x d

  template <typename Rng>
  static BridgeParams make(std::size_t d, std::size_t k, Rng& rng) {
    BridgeParams p;
    p.W1 = Tensor<T>::randn({d, k}, rng, T(1) / std::sqrt(T(k)), true);
    p.W2 = Tensor<T>::randn({d, d}, rng, T(1) / std::sqrt(T(d)), true);
    return p;
  }

  void append_params(ParamList<T>& out, const std::string& prefix) {
    out.emplace_back(prefix + ".W1", W1);
    out.emplace_back(prefix + ".W2", W2);
  }
};

template <typename T>
struct ContextualToken {
  Tensor<T> C;  // count x d
  std::size_t count() const { return C.rows(); }
};

// C = gelu(h * W1^T) * W2^T, applied rowwise; accepts one or many rows.
template <typename T>
ContextualToken<T> project(const Tensor<T>& h, const BridgeParams<T>& params) {
  if (h.rank() != 2 || h.cols() != params.W1.cols())
    throw DimError("bridge project: input " + shape_str(h.shape()) + " does not match W1 " +
                   shape_str(params.W1.shape()));
  auto hidden = gelu(matmul(h, transpose(params.W1)));
  return ContextualToken<T>{matmul(hidden, transpose(params.W2))};
}

// Learnable-query cross-attention readout over encoder states: each query
// row independently aggregates the states, and every readout then passes
// through the Eq.-style projection. Single head of width k.
template <typename T>
struct QueryBank {
  Tensor<T> queries;  // count x k
  Tensor<T> Wk;       // k x k
  Tensor<T> Wv;       // k x k

  template <typename Rng>
  static QueryBank make(std::size_t count, std::size_t k, Rng& rng) {
    if (count != 1 && count != 2 && count != 4 && count != 8)
      throw ConfigError("query bank: count must be one of {1,2,4,8}, got " +
                        std::to_string(count));
    QueryBank b;
    b.queries = Tensor<T>::randn({count, k}, rng, T(1), true);
    b.Wk = Tensor<T>::randn({k, k}, rng, T(1) / std::sqrt(T(k)), true);
    b.Wv = Tensor<T>::randn({k, k}, rng, T(1) / std::sqrt(T(k)), true);
    return b;
  }

  void append_params(ParamList<T>& out, const std::string& prefix) {
    out.emplace_back(prefix + ".queries", queries);
    out.emplace_back(prefix + ".Wk", Wk);
    out.emplace_back(prefix + ".Wv", Wv);
  }
};

template <typename T>
ContextualToken<T> expand(const Tensor<T>& enc_states, const QueryBank<T>& bank,
                          const BridgeParams<T>& params) {
  const std::size_t k = bank.queries.cols();
  if (enc_states.cols() != k)
    throw DimError("bridge expand: states " + shape_str(enc_states.shape()) +
                   " do not match queries " + shape_str(bank.queries.shape()));
  auto keys = matmul(enc_states, transpose(bank.Wk));    // n x k
  auto values = matmul(enc_states, transpose(bank.Wv));  // n x k
  auto scores = scale(matmul(bank.queries, transpose(keys)), T(1) / std::sqrt(T(k)));
  auto weights = softmax(scores, 1);  // count x n, rows sum to 1
  auto readout = matmul(weights, values);
  return project(readout, params);
}

// ---------------------------------------------------------------------------
// Input assembly: instruction embeddings, Contextual rows, text embeddings,
// and a trailing EOS embedding, in the configured order.

template <typename T>
struct AssembledInput {
  Tensor<T> x;  // rows x d
  std::size_t l = 0;      // instruction rows, wrappers included
  std::size_t n = 0;      // text rows actually kept
  std::size_t count = 0;  // contextual rows
  std::pair<std::size_t, std::size_t> ctx_span{0, 0};
  std::pair<std::size_t, std::size_t> text_span{0, 0};
  std::size_t eos_index = 0;
  CtxPosition position = CtxPosition::after_instruction;
  bool truncated = false;

  std::size_t rows() const { return x.rows(); }
};

struct AssembleOptions {
  CtxPosition position = CtxPosition::after_instruction;
  bool inst_wrappers = true;
  bool ctx_inside_wrapper = false;
  std::size_t max_positions = 512;
};

template <typename T>
AssembledInput<T> assemble(const std::vector<std::int32_t>& instruction_ids,
                           const ContextualToken<T>& ctx,
                           std::vector<std::int32_t> text_ids, const Tensor<T>& embed_table,
                           const Tokenizer::Specials& specials, const AssembleOptions& opt) {
  if (text_ids.empty()) throw ContractError("assemble: empty text");
  const std::size_t count = ctx.count();

  std::vector<std::int32_t> instr = instruction_ids;
  const bool wrap = opt.inst_wrappers && !instruction_ids.empty();
  if (wrap) {
    instr.clear();
    instr.push_back(specials.inst_open);
    instr.insert(instr.end(), instruction_ids.begin(), instruction_ids.end());
    instr.push_back(specials.inst_close);
  }
  const std::size_t l = instr.size();

  AssembledInput<T> out;
  const std::size_t fixed = l + count + 1;
  if (fixed + 1 > opt.max_positions)
    throw CapacityError("assemble: instruction plus contextual rows leave no room for text (" +
                        std::to_string(fixed) + " of " + std::to_string(opt.max_positions) +
                        " positions)");
  if (fixed + text_ids.size() > opt.max_positions) {
    text_ids.resize(opt.max_positions - fixed);  // trim text from the right only
    out.truncated = true;
  }
  const std::size_t n = text_ids.size();

  auto instr_rows = embed_rows(embed_table, instr);  // l x d (l may be 0)
  auto text_rows = embed_rows(embed_table, text_ids);
  auto eos_row = embed_rows(embed_table, std::vector<std::int32_t>{specials.eos});

  std::vector<Tensor<T>> parts;
  const bool ctx_inside = wrap && opt.ctx_inside_wrapper &&
                          opt.position == CtxPosition::after_instruction;
  if (ctx_inside) {
    // [open body...; C; close; T; EOS] — ctx precedes the closing wrapper
    parts = {slice_rows(instr_rows, 0, l - 1), ctx.C, slice_rows(instr_rows, l - 1, l),
             text_rows, eos_row};
    out.ctx_span = {l - 1, l - 1 + count};
  } else if (opt.position == CtxPosition::after_instruction) {
    parts = {instr_rows, ctx.C, text_rows, eos_row};
    out.ctx_span = {l, l + count};
  } else {
    parts = {ctx.C, instr_rows, text_rows, eos_row};
    out.ctx_span = {0, count};
  }
  out.x = concat_rows(parts);
  out.l = l;
  out.n = n;
  out.count = count;
  out.text_span = {l + count, l + count + n};
  out.eos_index = l + count + n;
  out.position = opt.position;
  return out;
}

// Passages carry no instruction (and therefore no wrapper tokens).
template <typename T>
AssembledInput<T> assemble_passage(std::vector<std::int32_t> text_ids,
                                   const ContextualToken<T>& ctx, const Tensor<T>& embed_table,
                                   const Tokenizer::Specials& specials,
                                   const AssembleOptions& opt) {
  return assemble<T>({}, ctx, std::move(text_ids), embed_table, specials, opt);
}

// Baseline composition without a contextual token: [I; T; EOS]. Used by the
// plain last-token ablation and the cost profiler.
template <typename T>
AssembledInput<T> assemble_plain(const std::vector<std::int32_t>& instruction_ids,
                                 std::vector<std::int32_t> text_ids, const Tensor<T>& embed_table,
                                 const Tokenizer::Specials& specials, const AssembleOptions& opt) {
  if (text_ids.empty()) throw ContractError("assemble: empty text");

  std::vector<std::int32_t> instr = instruction_ids;
  const bool wrap = opt.inst_wrappers && !instruction_ids.empty();
  if (wrap) {
    instr.clear();
    instr.push_back(specials.inst_open);
    instr.insert(instr.end(), instruction_ids.begin(), instruction_ids.end());
    instr.push_back(specials.inst_close);
  }
  const std::size_t l = instr.size();

  AssembledInput<T> out;
  const std::size_t fixed = l + 1;
  if (fixed + 1 > opt.max_positions)
    throw CapacityError("assemble: instruction rows leave no room for text (" +
                        std::to_string(fixed) + " of " + std::to_string(opt.max_positions) +
                        " positions)");
  if (fixed + text_ids.size() > opt.max_positions) {
    text_ids.resize(opt.max_positions - fixed);
    out.truncated = true;
  }
  const std::size_t n = text_ids.size();

  auto text_rows = embed_rows(embed_table, text_ids);
  auto eos_row = embed_rows(embed_table, std::vector<std::int32_t>{specials.eos});
  if (l > 0) {
    auto instr_rows = embed_rows(embed_table, instr);
    out.x = concat_rows<T>({instr_rows, text_rows, eos_row});
  } else {
    out.x = concat_rows<T>({text_rows, eos_row});
  }
  out.l = l;
  out.n = n;
  out.count = 0;
  out.ctx_span = {l, l};
  out.text_span = {l, l + n};
  out.eos_index = l + n;
  out.position = opt.position;
  return out;
}

}  // namespace ctxvec
