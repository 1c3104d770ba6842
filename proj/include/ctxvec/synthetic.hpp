#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ctxvec/data.hpp"
#include "ctxvec/embedder.hpp"
#include "ctxvec/errors.hpp"

namespace ctxvec {

// Paraphrase-retrieval corpus for desk-scale experiments. Every pair draws a
// fresh micro-topic of content words; query and positive use overlapping
// subsets of it, so matching requires representing which words are present.
// All texts open with one identical filler prefix, so the discriminative
// words sit at the sequence tail: a decoder with a short position window
// loses them to truncation unless a pre-encoder summary carries them in.
struct SyntheticSpec {
  std::size_t n_pairs = 2000;
  std::size_t vocab_words = 1000;
  std::size_t topic_size = 5;  // content words in a pair's micro-topic
  std::size_t text_words = 5;  // topic words per side
  std::size_t overlap = 5;     // topic words shared by query and positive
  std::size_t noise_words = 0; // extra random vocabulary words per text
  std::string filler = "omnis finis claudit";
  std::uint64_t seed = 1;

  void validate() const {
    if (n_pairs == 0 || vocab_words == 0) throw ContractError("synthetic spec: empty corpus");
    if (text_words == 0 || overlap > text_words)
      throw ContractError("synthetic spec: overlap exceeds words per text");
    if (2 * text_words - overlap > topic_size)
      throw ContractError("synthetic spec: topic too small for the requested overlap");
    if (topic_size > vocab_words) throw ContractError("synthetic spec: topic exceeds vocabulary");
  }
};

struct SyntheticCorpus {
  std::vector<TrainingExample> pairs;
  std::vector<std::string> vocabulary;

  std::vector<std::string> all_texts() const {
    std::vector<std::string> out;
    out.reserve(2 * pairs.size());
    for (const auto& p : pairs) {
      out.push_back(p.query);
      out.push_back(p.positive);
    }
    return out;
  }
};

inline SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec = {}) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  SyntheticCorpus corpus;
  std::set<std::string> seen;
  std::uniform_int_distribution<int> len(4, 7);
  std::uniform_int_distribution<int> letter(0, 25);
  while (corpus.vocabulary.size() < spec.vocab_words) {
    std::string w;
    const int L = len(rng);
    for (int i = 0; i < L; ++i) w.push_back(char('a' + letter(rng)));
    if (seen.insert(w).second) corpus.vocabulary.push_back(std::move(w));
  }

  std::uniform_int_distribution<std::size_t> pick(0, spec.vocab_words - 1);
  auto draw_topic = [&] {
    std::set<std::size_t> t;
    while (t.size() < spec.topic_size) t.insert(pick(rng));
    return std::vector<std::size_t>(t.begin(), t.end());
  };
  auto compose = [&](std::vector<std::size_t> word_ids) {
    std::shuffle(word_ids.begin(), word_ids.end(), rng);
    std::string text = spec.filler;
    for (std::size_t i = 0; i < spec.noise_words; ++i) {
      if (!text.empty()) text += ' ';
      text += corpus.vocabulary[pick(rng)];
    }
    for (std::size_t id : word_ids) {
      if (!text.empty()) text += ' ';
      text += corpus.vocabulary[id];
    }
    return text;
  };

  corpus.pairs.reserve(spec.n_pairs);
  for (std::size_t i = 0; i < spec.n_pairs; ++i) {
    auto topic = draw_topic();
    std::shuffle(topic.begin(), topic.end(), rng);
    // query takes topic[0 .. text_words), positive takes the window shifted
    // so that `overlap` words are shared
    std::vector<std::size_t> q(topic.begin(), topic.begin() + long(spec.text_words));
    std::vector<std::size_t> p(topic.begin() + long(spec.text_words - spec.overlap),
                               topic.begin() + long(2 * spec.text_words - spec.overlap));
    TrainingExample ex;
    ex.query = compose(q);
    ex.positive = compose(p);
    ex.task = "default";
    ex.source_line = i + 1;
    corpus.pairs.push_back(std::move(ex));
  }
  return corpus;
}

// Fraction of queries whose nearest corpus text (by cosine) is their own
// positive. Equal-text duplicates count as correct matches.
template <typename T>
double accuracy_at_1(const Embedder<T>& model, const std::vector<TrainingExample>& queries,
                     const std::vector<std::string>& corpus_texts,
                     const std::string& instruction = "") {
  if (queries.empty() || corpus_texts.empty())
    throw ContractError("accuracy_at_1: empty queries or corpus");
  NoGradGuard guard;
  std::vector<std::vector<T>> docs;
  docs.reserve(corpus_texts.size());
  for (const auto& t : corpus_texts) docs.push_back(model.embed_text(t).vector.data());
  std::size_t correct = 0;
  for (const auto& ex : queries) {
    const auto q = model.embed_text(ex.query, instruction).vector.data();
    std::size_t arg = 0;
    double best = -2;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      double s = 0;
      for (std::size_t j = 0; j < q.size(); ++j) s += double(q[j]) * double(docs[d][j]);
      if (s > best) {
        best = s;
        arg = d;
      }
    }
    if (corpus_texts[arg] == ex.positive) ++correct;
  }
  return double(correct) / double(queries.size());
}

}  // namespace ctxvec
