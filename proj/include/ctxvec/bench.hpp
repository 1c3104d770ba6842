#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ctxvec/embedder.hpp"
#include "ctxvec/errors.hpp"

namespace ctxvec {

// Sequence-cost accounting and wall-clock profiling for embedding methods that
// trade sequence length for context access: a plain causal pass, the
// contextual-token composition, echo-style input duplication, and few-shot
// prefixing.
enum class BenchVariant { plain, causal2vec, echo, icl };

inline const char* bench_variant_name(BenchVariant v) {
  switch (v) {
    case BenchVariant::plain: return "plain";
    case BenchVariant::causal2vec: return "causal2vec";
    case BenchVariant::echo: return "echo";
    case BenchVariant::icl: return "icl";
  }
  return "?";
}

inline BenchVariant bench_variant_from_name(const std::string& s) {
  if (s == "plain") return BenchVariant::plain;
  if (s == "causal2vec") return BenchVariant::causal2vec;
  if (s == "echo") return BenchVariant::echo;
  if (s == "icl") return BenchVariant::icl;
  throw ConfigError("bench: unknown method '" + s + "'");
}

struct MethodSpec {
  BenchVariant variant = BenchVariant::causal2vec;
  std::vector<std::vector<std::int32_t>> icl_examples;  // tokenized few-shot prefix
  std::size_t max_len = 0;                              // 0: default (512; icl 2048)

  std::size_t cap() const {
    if (max_len != 0) return max_len;
    return variant == BenchVariant::icl ? 2048 : 512;
  }
  void validate() const {
    if (variant == BenchVariant::icl && icl_examples.empty())
      throw ContractError("bench: icl method needs at least one example");
  }
};

// Token count each method feeds through the decoder for one sample:
//   plain       [I; T; EOS]            l + n + 1
//   causal2vec  [I; C…; T; EOS]        l + n + count + 1
//   echo        [I; T; T; EOS]         l + 2n + 1
//   icl         [I; E1…Ek; T; EOS]     l + sum|Ei| + n + 1, capped at max_len
// Only the few-shot prefix is ever capped; the other compositions are short by
// construction, and leaving them exact keeps the difference laws
// (causal2vec - plain == count, echo - plain == n) valid for all inputs.
inline std::size_t seq_len(const MethodSpec& method, const std::vector<std::int32_t>& instruction_ids,
                           const std::vector<std::int32_t>& text_ids, std::size_t count) {
  method.validate();
  const std::size_t l = instruction_ids.size();
  const std::size_t n = text_ids.size();
  switch (method.variant) {
    case BenchVariant::plain: return l + n + 1;
    case BenchVariant::causal2vec: return l + n + count + 1;
    case BenchVariant::echo: return l + 2 * n + 1;
    case BenchVariant::icl: {
      std::size_t total = l + n + 1;
      for (const auto& ex : method.icl_examples) total += ex.size();
      return std::min(total, method.cap());
    }
  }
  throw ContractError("bench: unhandled method variant");
}

// 1 - a/b: the fraction by which cost a undercuts baseline b.
inline double reduction(double a, double b) {
  if (!(b > 0)) throw ContractError("reduction: baseline must be positive");
  return 1.0 - a / b;
}

struct CostReport {
  std::string method;
  std::string dataset;
  double mean_seq_len = 0;
  double median_wall_ms = 0;         // per-sample, median over repetitions
  double encoder_overhead_ms = 0;    // pre-encoding cost, causal2vec only
  std::map<std::string, double> reduction_vs;  // other method -> seq-len reduction
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Times one method over a corpus: 3 warmup passes, then >= 20 timed passes,
// reporting the median per-sample wall time. Sequence-length accounting uses
// the exact laws above, independent of the clock.
template <typename T>
CostReport profile(const Embedder<T>& model, const MethodSpec& method,
                   const std::vector<std::string>& corpus, const std::string& instruction = "",
                   std::size_t repetitions = 20, const std::string& dataset = "corpus") {
  method.validate();
  if (corpus.empty()) throw ContractError("profile: empty corpus");
  if (method.variant == BenchVariant::causal2vec && !model.cfg.use_ctx)
    throw ContractError("profile: causal2vec method needs a model with a contextual token");
  NoGradGuard guard;

  const auto instr_ids = model.tok.encode(instruction);
  std::vector<std::vector<std::int32_t>> texts;
  texts.reserve(corpus.size());
  for (const auto& t : corpus) texts.push_back(model.tok.encode(t));

  const std::size_t count = method.variant == BenchVariant::causal2vec ? model.cfg.ctx_count : 0;
  CostReport report;
  report.method = bench_variant_name(method.variant);
  report.dataset = dataset;
  double total_len = 0;
  for (const auto& ids : texts) total_len += double(seq_len(method, instr_ids, ids, count));
  report.mean_seq_len = total_len / double(texts.size());

  // Decoder input per variant. Non-causal2vec methods reuse the plain
  // composition with a rewritten prefix/text, which reproduces their row laws.
  auto forward_one = [&](const std::vector<std::int32_t>& ids) {
    const auto& sp = model.tok.specials();
    const auto opt = model.assemble_options();
    switch (method.variant) {
      case BenchVariant::causal2vec: {
        (void)model.embed_ids(instr_ids, ids);
        return;
      }
      case BenchVariant::plain: {
        auto in = assemble_plain(instr_ids, ids, model.decoder.embed.table, sp, opt);
        (void)model.decoder.forward(in);
        return;
      }
      case BenchVariant::echo: {
        std::vector<std::int32_t> twice = ids;
        twice.insert(twice.end(), ids.begin(), ids.end());
        auto in = assemble_plain(instr_ids, std::move(twice), model.decoder.embed.table, sp, opt);
        (void)model.decoder.forward(in);
        return;
      }
      case BenchVariant::icl: {
        std::vector<std::int32_t> prefix = instr_ids;
        for (const auto& ex : method.icl_examples) prefix.insert(prefix.end(), ex.begin(), ex.end());
        const std::size_t budget = std::min(method.cap(), opt.max_positions);
        if (prefix.size() + ids.size() + 1 > budget)
          prefix.resize(budget > ids.size() + 1 ? budget - ids.size() - 1 : 0);
        auto in = assemble_plain(prefix, ids, model.decoder.embed.table, sp, opt);
        (void)model.decoder.forward(in);
        return;
      }
    }
  };

  using clock = std::chrono::steady_clock;
  const std::size_t reps = std::max<std::size_t>(repetitions, 20);
  for (int w = 0; w < 3; ++w)
    for (const auto& ids : texts) forward_one(ids);
  std::vector<double> per_sample_ms;
  per_sample_ms.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = clock::now();
    for (const auto& ids : texts) forward_one(ids);
    const auto t1 = clock::now();
    per_sample_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                            double(texts.size()));
  }
  report.median_wall_ms = detail::median(per_sample_ms);

  if (method.variant == BenchVariant::causal2vec) {
    std::vector<double> enc_ms;
    enc_ms.reserve(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      const auto t0 = clock::now();
      for (const auto& ids : texts) {
        auto enc = model.encoder.encode(ids);
        if (model.bank)
          (void)expand(enc.states, *model.bank, model.bridge);
        else
          (void)project(enc.h, model.bridge);
      }
      const auto t1 = clock::now();
      enc_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                       double(texts.size()));
    }
    report.encoder_overhead_ms = detail::median(enc_ms);
  }
  return report;
}

// Cross-populates reduction_vs with pairwise sequence-length reductions
// (1 - mine/theirs; exactly 0 against itself).
inline void fill_reductions(std::vector<CostReport>& reports) {
  for (auto& r : reports)
    for (const auto& other : reports)
      r.reduction_vs[other.method] = reduction(r.mean_seq_len, other.mean_seq_len);
}

// CSV with one row per method; reductions are relative to the first row.
inline std::string cost_csv(const std::vector<CostReport>& reports) {
  if (reports.empty()) throw ContractError("cost_csv: no reports");
  std::ostringstream out;
  out << "method,dataset,mean_seq_len,median_ms,reduction_vs_baseline\n";
  const double base = reports.front().mean_seq_len;
  for (const auto& r : reports) {
    out << r.method << ',' << r.dataset << ',' << r.mean_seq_len << ',' << r.median_wall_ms << ','
        << reduction(r.mean_seq_len, base) << '\n';
  }
  return out.str();
}

}  // namespace ctxvec
