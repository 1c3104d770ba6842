#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ctxvec/errors.hpp"

namespace ctxvec {

// Byte-level BPE. Ids 0..255 are raw bytes, merge products follow, and the
// four special tokens occupy the last ids so they can never collide with the
// merge space. encode/decode round-trips arbitrary byte strings exactly.
class Tokenizer {
 public:
  static constexpr int kFormatVersion = 1;

  struct Specials {
    std::int32_t pad = -1;
    std::int32_t eos = -1;
    std::int32_t inst_open = -1;   // rendered "[INST]"
    std::int32_t inst_close = -1;  // rendered "[/INST]"
  };

  Tokenizer() = default;

  // Deterministic training: the most frequent adjacent pair wins each round,
  // ties broken by the pair's byte expansion (left string, then right).
  // Stops early when no pair repeats. `seed` is accepted for interface
  // stability; the algorithm has no random choices.
  static Tokenizer train(const std::vector<std::string>& corpus, std::size_t vocab_size,
                         std::uint64_t seed = 0) {
    (void)seed;
    if (corpus.empty()) throw ConfigError("tokenizer train: empty corpus");
    if (vocab_size < 256 + kNumSpecials)
      throw ConfigError("tokenizer train: vocab_size must be at least " +
                        std::to_string(256 + kNumSpecials));

    Tokenizer tok;
    const std::size_t max_merges = vocab_size - 256 - kNumSpecials;

    std::vector<std::vector<std::int32_t>> seqs;
    seqs.reserve(corpus.size());
    for (const auto& doc : corpus) {
      std::vector<std::int32_t> s;
      s.reserve(doc.size());
      for (unsigned char c : doc) s.push_back(static_cast<std::int32_t>(c));
      seqs.push_back(std::move(s));
    }

    while (tok.merges_.size() < max_merges) {
      std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> counts;
      for (const auto& s : seqs)
        for (std::size_t i = 0; i + 1 < s.size(); ++i) ++counts[{s[i], s[i + 1]}];

      std::pair<std::int32_t, std::int32_t> best{-1, -1};
      std::size_t best_count = 1;  // a pair must appear at least twice to merge
      for (const auto& [pair, count] : counts) {
        if (count < best_count) continue;
        if (count > best_count) {
          best = pair;
          best_count = count;
          continue;
        }
        if (best.first < 0) {
          best = pair;
          continue;
        }
        const auto cand = std::make_pair(tok.expansion(pair.first), tok.expansion(pair.second));
        const auto cur = std::make_pair(tok.expansion(best.first), tok.expansion(best.second));
        if (cand < cur) best = pair;
      }
      if (best.first < 0) break;

      const std::int32_t new_id = static_cast<std::int32_t>(256 + tok.merges_.size());
      tok.merges_.push_back(best);
      tok.merge_expansions_.push_back(tok.expansion(best.first) + tok.expansion(best.second));
      for (auto& s : seqs) apply_merge(s, best, new_id);
    }
    tok.finalize_specials();
    return tok;
  }

  std::vector<std::int32_t> encode(std::string_view text) const {
    std::vector<std::int32_t> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<std::int32_t>(c));
    if (merges_.empty()) return ids;
    if (rank_.empty()) build_rank();
    while (ids.size() >= 2) {
      std::int32_t best_rank = -1;
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        auto it = rank_.find({ids[i], ids[i + 1]});
        if (it == rank_.end()) continue;
        if (best_rank < 0 || it->second < best_rank) best_rank = it->second;
      }
      if (best_rank < 0) break;
      apply_merge(ids, merges_[static_cast<std::size_t>(best_rank)],
                  static_cast<std::int32_t>(256 + best_rank));
    }
    return ids;
  }

  std::string decode(const std::vector<std::int32_t>& ids) const {
    std::string out;
    for (auto id : ids) out += expansion(id);
    return out;
  }

  std::string expansion(std::int32_t id) const {
    if (id >= 0 && id < 256) return std::string(1, static_cast<char>(id));
    const std::int32_t m = id - 256;
    if (m >= 0 && static_cast<std::size_t>(m) < merge_expansions_.size())
      return merge_expansions_[static_cast<std::size_t>(m)];
    if (id == specials_.pad) return "[PAD]";
    if (id == specials_.eos) return "[EOS]";
    if (id == specials_.inst_open) return "[INST]";
    if (id == specials_.inst_close) return "[/INST]";
    throw IndexError("tokenizer decode: id " + std::to_string(id) + " outside vocab of " +
                     std::to_string(vocab_size()));
  }

  // token string -> id, covering bytes, merge products, and specials
  std::map<std::string, std::int32_t> vocab() const {
    std::map<std::string, std::int32_t> v;
    for (std::int32_t id = 0; id < static_cast<std::int32_t>(vocab_size()); ++id)
      v.emplace(expansion(id), id);
    return v;
  }

  std::size_t vocab_size() const { return 256 + merges_.size() + kNumSpecials; }
  const Specials& specials() const { return specials_; }
  std::size_t merge_count() const { return merges_.size(); }
  const std::vector<std::pair<std::int32_t, std::int32_t>>& merges() const { return merges_; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    auto& m = j["merges"] = nlohmann::json::array();
    for (const auto& [a, b] : merges_) m.push_back({a, b});
    j["specials"] = {{"pad", specials_.pad},
                     {"eos", specials_.eos},
                     {"inst_open", specials_.inst_open},
                     {"inst_close", specials_.inst_close}};
    return j;
  }

  static Tokenizer from_json(const nlohmann::json& j) {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kFormatVersion)
      throw IoError("tokenizer load: unsupported or missing format_version");
    Tokenizer tok;
    for (const auto& pair : j.at("merges")) {
      if (!pair.is_array() || pair.size() != 2)
        throw IoError("tokenizer load: malformed merge entry");
      std::int32_t a = pair[0].get<std::int32_t>();
      std::int32_t b = pair[1].get<std::int32_t>();
      const auto limit = static_cast<std::int32_t>(256 + tok.merges_.size());
      if (a < 0 || a >= limit || b < 0 || b >= limit)
        throw IoError("tokenizer load: merge references undefined id");
      tok.merges_.emplace_back(a, b);
      tok.merge_expansions_.push_back(tok.expansion(a) + tok.expansion(b));
    }
    tok.finalize_specials();
    const auto& sp = j.at("specials");
    if (sp.at("pad").get<std::int32_t>() != tok.specials_.pad ||
        sp.at("eos").get<std::int32_t>() != tok.specials_.eos ||
        sp.at("inst_open").get<std::int32_t>() != tok.specials_.inst_open ||
        sp.at("inst_close").get<std::int32_t>() != tok.specials_.inst_close)
      throw IoError("tokenizer load: special ids inconsistent with merge count");
    return tok;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("tokenizer save: cannot open " + path);
    out << to_json().dump(2) << "\n";
    if (!out) throw IoError("tokenizer save: write failed for " + path);
  }

  static Tokenizer load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("tokenizer load: cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("tokenizer load: " + path + ": " + e.what());
    }
    return from_json(j);
  }

  // Stable content hash used to tie checkpoints to the tokenizer they were
  // trained with (FNV-1a over the serialized form).
  std::uint64_t content_hash() const {
    const std::string s = to_json().dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

 private:
  static constexpr std::size_t kNumSpecials = 4;

  static void apply_merge(std::vector<std::int32_t>& s,
                          std::pair<std::int32_t, std::int32_t> pair, std::int32_t new_id) {
    std::size_t w = 0;
    for (std::size_t r = 0; r < s.size(); ++r) {
      if (r + 1 < s.size() && s[r] == pair.first && s[r + 1] == pair.second) {
        s[w++] = new_id;
        ++r;
      } else {
        s[w++] = s[r];
      }
    }
    s.resize(w);
  }

  void finalize_specials() {
    const auto base = static_cast<std::int32_t>(256 + merges_.size());
    specials_.pad = base;
    specials_.eos = base + 1;
    specials_.inst_open = base + 2;
    specials_.inst_close = base + 3;
  }

  void build_rank() const {
    for (std::size_t i = 0; i < merges_.size(); ++i)
      rank_.emplace(merges_[i], static_cast<std::int32_t>(i));
  }

  std::vector<std::pair<std::int32_t, std::int32_t>> merges_;
  std::vector<std::string> merge_expansions_;
  Specials specials_;
  mutable std::map<std::pair<std::int32_t, std::int32_t>, std::int32_t> rank_;
};

}  // namespace ctxvec
