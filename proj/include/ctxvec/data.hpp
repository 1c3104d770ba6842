#pragma once

#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxvec/config.hpp"
#include "ctxvec/errors.hpp"

namespace ctxvec {

struct TrainingExample {
  std::string query;
  std::string positive;
  std::vector<std::string> hard_negatives;
  std::string task = "default";
  std::size_t source_line = 0;  // 1-based line in the originating file
};

// Lines of {"query":…, "positive":…, "negatives":[…], "task":…}; negatives
// and task optional, duplicates preserved.
inline std::vector<TrainingExample> load_training_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("training data: cannot open " + path);
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("training data: " + path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    TrainingExample ex;
    ex.source_line = lineno;
    try {
      ex.query = j.at("query").get<std::string>();
      ex.positive = j.at("positive").get<std::string>();
      if (j.contains("negatives"))
        ex.hard_negatives = j.at("negatives").get<std::vector<std::string>>();
      if (j.contains("task")) ex.task = j.at("task").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError("training data: " + path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (ex.query.empty() || ex.positive.empty())
      throw IoError("training data: " + path + ":" + std::to_string(lineno) +
                    ": query and positive must be non-empty");
    out.push_back(std::move(ex));
  }
  return out;
}

inline void write_training_jsonl(const std::string& path,
                                 const std::vector<TrainingExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("training data: cannot open " + path + " for writing");
  for (const auto& ex : examples) {
    nlohmann::json j;
    j["query"] = ex.query;
    j["positive"] = ex.positive;
    if (!ex.hard_negatives.empty()) j["negatives"] = ex.hard_negatives;
    if (ex.task != "default") j["task"] = ex.task;
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("training data: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Batch sampling: every batch comes from a single dataset (picked with
// probability proportional to size x sample_ratio), examples drawn without
// replacement per epoch, reshuffling on wrap.

class BatchSampler {
 public:
  BatchSampler(std::vector<std::vector<TrainingExample>> datasets, std::vector<double> ratios,
               std::size_t batch_size, std::uint64_t seed)
      : batch_size_(batch_size), rng_(seed) {
    if (datasets.size() != ratios.size())
      throw ContractError("batch sampler: one sample_ratio per dataset required");
    if (batch_size == 0) throw ContractError("batch sampler: batch_size must be positive");
    double total = 0;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
      if (datasets[i].empty()) continue;
      Set s;
      s.examples = std::move(datasets[i]);
      s.order.resize(s.examples.size());
      for (std::size_t k = 0; k < s.order.size(); ++k) s.order[k] = k;
      s.weight = double(s.examples.size()) * ratios[i];
      total += s.weight;
      sets_.push_back(std::move(s));
    }
    if (sets_.empty()) throw ContractError("batch sampler: all datasets empty");
    for (auto& s : sets_) s.weight /= total;
    for (auto& s : sets_) reshuffle(s);
  }

  std::vector<TrainingExample> next() {
    Set& s = sets_[pick_set()];
    std::vector<TrainingExample> batch;
    batch.reserve(batch_size_);
    for (std::size_t k = 0; k < batch_size_; ++k) {
      if (s.cursor >= s.order.size()) {
        reshuffle(s);
        s.cursor = 0;
      }
      batch.push_back(s.examples[s.order[s.cursor++]]);
    }
    return batch;
  }

  std::size_t dataset_count() const { return sets_.size(); }

 private:
  struct Set {
    std::vector<TrainingExample> examples;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    double weight = 0;
  };

  double unit_draw() { return double(rng_() >> 11) * 0x1.0p-53; }

  std::size_t pick_set() {
    if (sets_.size() == 1) return 0;
    const double u = unit_draw();
    double acc = 0;
    for (std::size_t i = 0; i < sets_.size(); ++i) {
      acc += sets_[i].weight;
      if (u < acc) return i;
    }
    return sets_.size() - 1;
  }

  void reshuffle(Set& s) {
    // Fisher-Yates with our own index draws so the sequence depends only on
    // the seed, not on library internals.
    for (std::size_t i = s.order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(unit_draw() * double(i));
      std::swap(s.order[i - 1], s.order[j < i ? j : i - 1]);
    }
  }

  std::size_t batch_size_;
  std::vector<Set> sets_;
  std::mt19937_64 rng_;
};

}  // namespace ctxvec
