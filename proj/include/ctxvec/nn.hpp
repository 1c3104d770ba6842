#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ctxvec/ops.hpp"
#include "ctxvec/tensor.hpp"

namespace ctxvec {

enum class MaskMode { causal, bidirectional };
enum class Trainability { frozen, lora, full };

inline const char* mask_mode_name(MaskMode m) {
  return m == MaskMode::causal ? "causal" : "bidirectional";
}
inline const char* trainability_name(Trainability t) {
  switch (t) {
    case Trainability::frozen: return "frozen";
    case Trainability::lora: return "lora";
    default: return "full";
  }
}

struct BlockConfig {
  std::size_t d_model = 128;
  std::size_t n_heads = 8;
  std::size_t ffn_mult = 4;
  std::size_t max_positions = 512;

  void validate() const {
    if (d_model == 0 || n_heads == 0 || ffn_mult == 0 || max_positions == 0)
      throw ConfigError("BlockConfig: all dimensions must be positive");
    if (d_model % n_heads != 0)
      throw ConfigError("BlockConfig: d_model " + std::to_string(d_model) +
                        " not divisible by n_heads " + std::to_string(n_heads));
  }
  std::size_t head_dim() const { return d_model / n_heads; }
};

// Named parameter registry; ordering is stable and defines checkpoint layout.
template <typename T>
using ParamList = std::vector<std::pair<std::string, Tensor<T>>>;

template <typename T>
void set_params_requires_grad(ParamList<T>& params, bool flag) {
  for (auto& [name, p] : params) p.set_requires_grad(flag);
}

// ---------------------------------------------------------------------------
// Low-rank adapter: effective update (alpha/rank) * B * A with B zero-init,
// so a freshly attached adapter leaves the forward pass bit-identical.

template <typename T>
struct LoraAdapter {
  std::size_t rank = 0;
  T alpha = T(0);
  Tensor<T> A;  // rank x in
  Tensor<T> B;  // out x rank
  std::string target;

  template <typename Rng>
  static LoraAdapter make(std::size_t in, std::size_t out, std::size_t rank, T alpha,
                          std::string target, Rng& rng) {
    if (rank == 0) throw ConfigError("LoraAdapter: rank must be positive");
    LoraAdapter ad;
    ad.rank = rank;
    ad.alpha = alpha;
    ad.A = Tensor<T>::randn({rank, in}, rng, T(0.02), true);
    ad.B = Tensor<T>::zeros({out, rank}, true);
    ad.target = std::move(target);
    return ad;
  }

  T scaling() const { return alpha / T(rank); }
};

template <typename T>
Tensor<T> lora_apply(const Tensor<T>& base_out, const Tensor<T>& x,
                     const LoraAdapter<T>& adapter) {
  if (x.cols() != adapter.A.cols())
    throw DimError("lora_apply: input " + shape_str(x.shape()) + " does not match adapter A " +
                   shape_str(adapter.A.shape()));
  if (base_out.cols() != adapter.B.rows() || base_out.rows() != x.rows())
    throw DimError("lora_apply: base output " + shape_str(base_out.shape()) +
                   " does not match adapter B " + shape_str(adapter.B.shape()));
  auto delta = matmul(matmul(x, transpose(adapter.A)), transpose(adapter.B));
  return add(base_out, scale(delta, adapter.scaling()));
}

// ---------------------------------------------------------------------------
// Dense layer, weight stored out x in.

template <typename T>
struct Linear {
  Tensor<T> w;
  std::optional<Tensor<T>> b;

  template <typename Rng>
  static Linear make(std::size_t in, std::size_t out, bool bias, Rng& rng) {
    Linear l;
    l.w = Tensor<T>::randn({out, in}, rng, T(1) / std::sqrt(T(in)), true);
    if (bias) l.b = Tensor<T>::zeros({1, out}, true);
    return l;
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    auto y = matmul(x, transpose(w));
    if (b) y = add_bias(y, *b);
    return y;
  }

  void append_params(ParamList<T>& out, const std::string& prefix) {
    out.emplace_back(prefix + ".w", w);
    if (b) out.emplace_back(prefix + ".b", *b);
  }
};

// ---------------------------------------------------------------------------
// Multi-head scaled dot-product attention with switchable masking. Under the
// causal mask, output row i depends only on rows 0..i.

template <typename T>
struct MultiHeadAttention {
  BlockConfig cfg;
  Linear<T> wq, wk, wv, wo;
  std::map<std::string, LoraAdapter<T>> lora;  // keyed by q/k/v/o when attached

  template <typename Rng>
  static MultiHeadAttention make(const BlockConfig& cfg, Rng& rng) {
    cfg.validate();
    MultiHeadAttention a;
    a.cfg = cfg;
    a.wq = Linear<T>::make(cfg.d_model, cfg.d_model, false, rng);
    a.wk = Linear<T>::make(cfg.d_model, cfg.d_model, false, rng);
    a.wv = Linear<T>::make(cfg.d_model, cfg.d_model, false, rng);
    a.wo = Linear<T>::make(cfg.d_model, cfg.d_model, false, rng);
    return a;
  }

  Tensor<T> project(const char* name, const Linear<T>& lin, const Tensor<T>& x) const {
    auto y = lin(x);
    auto it = lora.find(name);
    if (it != lora.end()) y = lora_apply(y, x, it->second);
    return y;
  }

  Tensor<T> operator()(const Tensor<T>& x, MaskMode mask) const {
    const std::size_t n = x.rows();
    if (n > cfg.max_positions)
      throw CapacityError("attention: sequence length " + std::to_string(n) + " exceeds " +
                          std::to_string(cfg.max_positions) + " positions");
    const std::size_t dh = cfg.head_dim();
    auto q = project("q", wq, x);
    auto k = project("k", wk, x);
    auto v = project("v", wv, x);

    std::vector<Tensor<T>> heads;
    heads.reserve(cfg.n_heads);
    const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      auto qh = slice_cols(q, h * dh, (h + 1) * dh);
      auto kh = slice_cols(k, h * dh, (h + 1) * dh);
      auto vh = slice_cols(v, h * dh, (h + 1) * dh);
      auto scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
      auto weights =
          mask == MaskMode::causal ? causal_softmax(scores) : softmax(scores, 1);
      heads.push_back(matmul(weights, vh));
    }
    auto merged = concat_cols(heads);
    auto out = wo(merged);
    auto it = lora.find("o");
    if (it != lora.end()) out = lora_apply(out, merged, it->second);
    return out;
  }

  template <typename Rng>
  void attach_lora(std::size_t rank, T alpha, const std::vector<std::string>& targets,
                   Rng& rng) {
    for (const auto& t : targets) {
      if (t != "q" && t != "k" && t != "v" && t != "o")
        throw ConfigError("attach_lora: unknown target '" + t + "'");
      lora.emplace(t, LoraAdapter<T>::make(cfg.d_model, cfg.d_model, rank, alpha, t, rng));
    }
  }

  void append_params(ParamList<T>& out, const std::string& prefix) {
    wq.append_params(out, prefix + ".wq");
    wk.append_params(out, prefix + ".wk");
    wv.append_params(out, prefix + ".wv");
    wo.append_params(out, prefix + ".wo");
  }
  void append_lora_params(ParamList<T>& out, const std::string& prefix) {
    for (auto& [name, ad] : lora) {
      out.emplace_back(prefix + ".lora_" + name + ".A", ad.A);
      out.emplace_back(prefix + ".lora_" + name + ".B", ad.B);
    }
  }
};

// ---------------------------------------------------------------------------
// Position-wise feed-forward: Linear(d -> mult*d) -> GELU -> Linear(-> d).

template <typename T>
struct FeedForward {
  Linear<T> expand, contract;

  template <typename Rng>
  static FeedForward make(const BlockConfig& cfg, Rng& rng) {
    FeedForward f;
    f.expand = Linear<T>::make(cfg.d_model, cfg.ffn_mult * cfg.d_model, true, rng);
    f.contract = Linear<T>::make(cfg.ffn_mult * cfg.d_model, cfg.d_model, true, rng);
    return f;
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return contract(gelu(expand(x))); }

  void append_params(ParamList<T>& out, const std::string& prefix) {
    expand.append_params(out, prefix + ".expand");
    contract.append_params(out, prefix + ".contract");
  }
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gain, bias;

  static LayerNormParams make(std::size_t d) {
    LayerNormParams ln;
    ln.gain = Tensor<T>::full({1, d}, T(1), true);
    ln.bias = Tensor<T>::zeros({1, d}, true);
    return ln;
  }
  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gain, bias); }
  void append_params(ParamList<T>& out, const std::string& prefix) {
    out.emplace_back(prefix + ".gain", gain);
    out.emplace_back(prefix + ".bias", bias);
  }
};

// Pre-norm residual block: x + attn(ln1(x)), then + ffn(ln2(.)).
template <typename T>
struct TransformerBlock {
  MultiHeadAttention<T> attn;
  FeedForward<T> ffn;
  LayerNormParams<T> ln1, ln2;

  template <typename Rng>
  static TransformerBlock make(const BlockConfig& cfg, Rng& rng) {
    TransformerBlock b;
    b.attn = MultiHeadAttention<T>::make(cfg, rng);
    b.ffn = FeedForward<T>::make(cfg, rng);
    b.ln1 = LayerNormParams<T>::make(cfg.d_model);
    b.ln2 = LayerNormParams<T>::make(cfg.d_model);
    return b;
  }

  Tensor<T> operator()(const Tensor<T>& x, MaskMode mask) const {
    auto y = add(x, attn(ln1(x), mask));
    return add(y, ffn(ln2(y)));
  }

  void append_params(ParamList<T>& out, const std::string& prefix) {
    ln1.append_params(out, prefix + ".ln1");
    attn.append_params(out, prefix + ".attn");
    ln2.append_params(out, prefix + ".ln2");
    ffn.append_params(out, prefix + ".ffn");
  }
  void append_lora_params(ParamList<T>& out, const std::string& prefix) {
    attn.append_lora_params(out, prefix + ".attn");
  }
};

template <typename T>
struct Embedding {
  Tensor<T> table;  // vocab x d

  template <typename Rng>
  static Embedding make(std::size_t vocab, std::size_t d, Rng& rng) {
    Embedding e;
    e.table = Tensor<T>::randn({vocab, d}, rng, T(0.02), true);
    return e;
  }
  Tensor<T> operator()(const std::vector<std::int32_t>& ids) const {
    return embed_rows(table, ids);
  }
};

// Learned absolute positions; the same table row always maps to the same
// sequence slot.
template <typename T>
struct PositionTable {
  Tensor<T> table;  // max_positions x d

  template <typename Rng>
  static PositionTable make(std::size_t max_positions, std::size_t d, Rng& rng) {
    PositionTable p;
    p.table = Tensor<T>::randn({max_positions, d}, rng, T(0.02), true);
    return p;
  }
  Tensor<T> operator()(std::size_t n) const {
    if (n > table.rows())
      throw CapacityError("positions: " + std::to_string(n) + " rows requested, table has " +
                          std::to_string(table.rows()));
    return slice_rows(table, 0, n);
  }
};

// ---------------------------------------------------------------------------
// A stack of blocks with a final layer norm; embedding/position lookup stays
// with the owning model.

template <typename T>
struct TransformerStack {
  BlockConfig cfg;
  std::vector<TransformerBlock<T>> blocks;
  LayerNormParams<T> final_ln;

  template <typename Rng>
  static TransformerStack make(const BlockConfig& cfg, std::size_t n_layers, Rng& rng) {
    cfg.validate();
    TransformerStack s;
    s.cfg = cfg;
    s.blocks.reserve(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) s.blocks.push_back(TransformerBlock<T>::make(cfg, rng));
    s.final_ln = LayerNormParams<T>::make(cfg.d_model);
    return s;
  }

  Tensor<T> operator()(Tensor<T> x, MaskMode mask) const {
    for (const auto& b : blocks) x = b(x, mask);
    return final_ln(x);
  }

  template <typename Rng>
  void attach_lora(std::size_t rank, T alpha, const std::vector<std::string>& targets,
                   Rng& rng) {
    for (auto& b : blocks) b.attn.attach_lora(rank, alpha, targets, rng);
  }
  bool has_lora() const {
    for (const auto& b : blocks)
      if (!b.attn.lora.empty()) return true;
    return false;
  }

  void append_params(ParamList<T>& out, const std::string& prefix) {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].append_params(out, prefix + ".block" + std::to_string(i));
    final_ln.append_params(out, prefix + ".final_ln");
  }
  void append_lora_params(ParamList<T>& out, const std::string& prefix) {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].append_lora_params(out, prefix + ".block" + std::to_string(i));
  }
};

}  // namespace ctxvec
