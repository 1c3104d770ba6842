#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxvec/config.hpp"
#include "ctxvec/data.hpp"
#include "ctxvec/embedder.hpp"
#include "ctxvec/errors.hpp"
#include "ctxvec/ops.hpp"
#include "ctxvec/tensor.hpp"

namespace ctxvec {

struct LossConfig {
  double tau = 0.05;
  bool use_in_batch_negatives = true;
};

inline LossConfig loss_config(const TrainConfig& c) { return {c.tau, c.use_in_batch_negatives}; }

// -log( e^{cos(q,p)/tau} / (e^{cos(q,p)/tau} + sum_j e^{cos(q,n_j)/tau}) ),
// computed as logsumexp(logits) - logits[0]. With no negatives this is
// exactly zero.
template <typename T>
Tensor<T> info_nce(const Tensor<T>& query, const Tensor<T>& positive,
                   const std::vector<Tensor<T>>& negatives, const LossConfig& cfg = {}) {
  if (cfg.tau <= 0) throw ContractError("info_nce: tau must be > 0");
  if (query.shape() != positive.shape())
    throw DimError("info_nce: query " + shape_str(query.shape()) + " vs positive " +
                   shape_str(positive.shape()));
  auto qn = l2_normalize_row(query);
  std::vector<Tensor<T>> sims;
  sims.reserve(negatives.size() + 1);
  sims.push_back(dot(qn, l2_normalize_row(positive)));
  for (const auto& neg : negatives) {
    if (neg.shape() != query.shape())
      throw DimError("info_nce: negative " + shape_str(neg.shape()) + " vs query " +
                     shape_str(query.shape()));
    sims.push_back(dot(qn, l2_normalize_row(neg)));
  }
  auto logits = scale(stack_scalars(sims), T(1.0 / cfg.tau));
  return sub(logsumexp_row(logits), value_at(logits, 0, 0));
}

template <typename T>
struct ExampleEmbedding {
  Tensor<T> query;
  Tensor<T> positive;
  std::vector<Tensor<T>> hard_negatives;
};

// Mean loss over the batch. Each query's negative pool is its own hard
// negatives plus, when enabled, the positives of the other queries.
template <typename T>
Tensor<T> batch_loss(const std::vector<ExampleEmbedding<T>>& batch, const LossConfig& cfg = {}) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  Tensor<T> total;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::vector<Tensor<T>> negs = batch[i].hard_negatives;
    if (cfg.use_in_batch_negatives)
      for (std::size_t j = 0; j < batch.size(); ++j)
        if (j != i) negs.push_back(batch[j].positive);
    auto li = info_nce(batch[i].query, batch[i].positive, negs, cfg);
    total = (i == 0) ? li : add(total, li);
  }
  return scale(total, T(1) / T(batch.size()));
}

// Linear warmup from zero over [0, warmup], linear decay to zero over
// [warmup, max_steps], zero beyond.
inline double lr_at(std::size_t step, const TrainConfig& cfg) {
  const std::size_t w = cfg.warmup_steps;
  const std::size_t ms = cfg.effective_max_steps();
  if (step >= ms) return 0.0;
  if (step <= w) return w == 0 ? cfg.peak_lr : cfg.peak_lr * double(step) / double(w);
  return cfg.peak_lr * double(ms - step) / double(ms - w);
}

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay. Moments are kept in double regardless of
// the parameter scalar type. Parameters without a gradient buffer are skipped.

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <typename T>
class AdamW {
 public:
  explicit AdamW(ParamList<T> params, AdamWOptions opt = {})
      : params_(std::move(params)), opt_(opt) {
    slots_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      slots_[i].m.assign(params_[i].second.numel(), 0.0);
      slots_[i].v.assign(params_[i].second.numel(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i].second;
      if (!p.requires_grad() || !p.has_grad()) continue;
      const auto& g = p.grad();
      auto& x = p.data();
      auto& s = slots_[i];
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double gk = double(g[k]);
        s.m[k] = opt_.beta1 * s.m[k] + (1.0 - opt_.beta1) * gk;
        s.v[k] = opt_.beta2 * s.v[k] + (1.0 - opt_.beta2) * gk * gk;
        const double update = (s.m[k] / bc1) / (std::sqrt(s.v[k] / bc2) + opt_.eps);
        x[k] = T(double(x[k]) - lr * (update + opt_.weight_decay * double(x[k])));
      }
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  std::size_t update_count() const { return t_; }
  const ParamList<T>& params() const { return params_; }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  ParamList<T> params_;
  AdamWOptions opt_;
  std::vector<Slot> slots_;
  std::size_t t_ = 0;
};

template <typename T>
double global_grad_norm(const ParamList<T>& params) {
  double s = 0.0;
  for (const auto& [name, p] : params)
    if (p.has_grad())
      for (T g : p.grad()) s += double(g) * double(g);
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------

struct StepMetrics {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;

  nlohmann::json to_json() const {
    return {{"step", step}, {"loss", loss}, {"lr", lr}, {"grad_norm", grad_norm}};
  }
};

template <typename T>
class Trainer {
 public:
  Trainer(Embedder<T>& model, TrainConfig cfg, InstructionMap instructions = {})
      : model_(model),
        cfg_(std::move(cfg)),
        instr_(std::move(instructions)),
        params_(model.trainable_params()),
        opt_(params_, AdamWOptions{0.9, 0.999, 1e-8, cfg_.weight_decay}) {
    cfg_.validate();
  }

  ExampleEmbedding<T> embed_example(const TrainingExample& ex) const {
    ExampleEmbedding<T> e;
    const std::string instr = instr_.has(ex.task) ? instr_.by_task.at(ex.task) : std::string();
    e.query = model_.embed_text(ex.query, instr).vector;
    e.positive = model_.embed_text(ex.positive).vector;
    e.hard_negatives.reserve(ex.hard_negatives.size());
    for (const auto& n : ex.hard_negatives) e.hard_negatives.push_back(model_.embed_text(n).vector);
    return e;
  }

  // One optimizer update from grad_accum micro-batches. Micro-batch losses
  // are scaled by 1/grad_accum, so the accumulated gradient is the mean over
  // the combined batch.
  StepMetrics train_step(const std::vector<std::vector<TrainingExample>>& micro_batches) {
    if (micro_batches.size() != cfg_.grad_accum)
      throw ContractError("train_step: expected " + std::to_string(cfg_.grad_accum) +
                          " micro-batches, got " + std::to_string(micro_batches.size()));
    opt_.zero_grad();
    const LossConfig lc = loss_config(cfg_);
    double loss_total = 0.0;
    for (const auto& mb : micro_batches) {
      std::vector<ExampleEmbedding<T>> embs;
      embs.reserve(mb.size());
      for (const auto& ex : mb) embs.push_back(embed_example(ex));
      auto loss = scale(batch_loss(embs, lc), T(1) / T(cfg_.grad_accum));
      const double lv = double(loss.item());
      if (!std::isfinite(lv))
        throw NumericError("train step " + std::to_string(step_ + 1) +
                           ": non-finite loss; batch ids [" + batch_ids(mb) + "]");
      loss_total += lv;
      backward(loss);
    }
    StepMetrics m;
    m.step = step_ + 1;
    m.loss = loss_total;
    m.grad_norm = global_grad_norm(params_);
    m.lr = lr_at(m.step, cfg_);
    opt_.step(m.lr);
    opt_.zero_grad();
    ++step_;
    return m;
  }

  StepMetrics train_step(BatchSampler& sampler) {
    std::vector<std::vector<TrainingExample>> mbs;
    mbs.reserve(cfg_.grad_accum);
    for (std::size_t a = 0; a < cfg_.grad_accum; ++a) mbs.push_back(sampler.next());
    return train_step(mbs);
  }

  void run(BatchSampler& sampler, const std::function<void(const StepMetrics&)>& on_step = {}) {
    while (step_ < cfg_.train_steps) {
      auto m = train_step(sampler);
      if (on_step) on_step(m);
    }
  }

  std::size_t steps_done() const { return step_; }
  const TrainConfig& config() const { return cfg_; }
  const ParamList<T>& trainable() const { return params_; }

 private:
  static std::string batch_ids(const std::vector<TrainingExample>& mb) {
    std::string out;
    for (std::size_t i = 0; i < mb.size(); ++i) {
      if (i) out += ", ";
      out += mb[i].source_line ? "line " + std::to_string(mb[i].source_line)
                               : "#" + std::to_string(i);
      out += " (" + mb[i].task + ")";
    }
    return out;
  }

  Embedder<T>& model_;
  TrainConfig cfg_;
  InstructionMap instr_;
  ParamList<T> params_;
  AdamW<T> opt_;
  std::size_t step_ = 0;
};

}  // namespace ctxvec
