#pragma once

#include <optional>
#include <utility>

#include "ctxvec/bridge.hpp"
#include "ctxvec/config.hpp"
#include "ctxvec/ops.hpp"

namespace ctxvec {

template <typename T>
struct EmbeddingRecord {
  Tensor<T> vector;  // 1 x d, or 1 x 2d for the concatenating modes
  bool normalized = true;
  PoolingMode mode = PoolingMode::concat_ctx_eos;
};

namespace detail {

// Multi-token contexts collapse to the mean of their rows before use.
template <typename T>
Tensor<T> ctx_row(const Tensor<T>& states, const AssembledInput<T>& input) {
  auto span = slice_rows(states, input.ctx_span.first, input.ctx_span.second);
  if (input.count == 1) return span;
  return mean_rows(span);
}

}  // namespace detail

template <typename T>
EmbeddingRecord<T> pool(const Tensor<T>& states, const AssembledInput<T>& input,
                        PoolingMode mode,
                        const std::optional<Tensor<T>>& bridge_C = std::nullopt) {
  if (states.rows() != input.rows())
    throw DimError("pool: states " + shape_str(states.shape()) + " do not match input of " +
                   std::to_string(input.rows()) + " rows");
  EmbeddingRecord<T> rec;
  rec.mode = mode;
  Tensor<T> v;
  switch (mode) {
    case PoolingMode::concat_ctx_eos:
      v = concat_cols<T>({detail::ctx_row(states, input), row_at(states, input.eos_index)});
      break;
    case PoolingMode::last_token:
      v = row_at(states, input.eos_index);
      break;
    case PoolingMode::mean:
      v = mean_rows(states);
      break;
    case PoolingMode::weighted_mean: {
      const std::size_t rows = states.rows();
      std::vector<T> w(rows);
      T z = T(0);
      for (std::size_t i = 0; i < rows; ++i) z += T(i + 1);
      for (std::size_t i = 0; i < rows; ++i) w[i] = T(i + 1) / z;
      v = weighted_mean_rows(states, w);
      break;
    }
    case PoolingMode::bi_eos: {
      if (!bridge_C)
        throw ContractError("pool: bi_eos requires the bridge's contextual rows");
      auto c = bridge_C->rows() == 1 ? *bridge_C : mean_rows(*bridge_C);
      v = concat_cols<T>({c, row_at(states, input.eos_index)});
      break;
    }
  }
  rec.vector = l2_normalize_row(v);
  rec.normalized = true;
  return rec;
}

// Diagnostic norms of the contextual-position and EOS hidden states.
template <typename T>
std::pair<T, T> l2_norms(const Tensor<T>& states, const AssembledInput<T>& input) {
  NoGradGuard guard;
  auto ctx = detail::ctx_row(states, input);
  auto eos = row_at(states, input.eos_index);
  return {l2_norm_value(ctx), l2_norm_value(eos)};
}

// Post-normalization cosine is a plain dot product; this is the similarity
// used by both the loss and every ranking metric.
template <typename T>
T cosine(const EmbeddingRecord<T>& a, const EmbeddingRecord<T>& b) {
  if (a.vector.numel() != b.vector.numel())
    throw DimError("cosine: embedding widths differ, " + shape_str(a.vector.shape()) + " vs " +
                   shape_str(b.vector.shape()));
  T s = T(0);
  for (std::size_t i = 0; i < a.vector.numel(); ++i) s += a.vector.data()[i] * b.vector.data()[i];
  return s;
}

}  // namespace ctxvec
