#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxvec/embedder.hpp"
#include "ctxvec/errors.hpp"

namespace ctxvec {

// ---------------------------------------------------------------------------
// Ranking metrics. Ties are always broken by stable sort on input order.

// DCG@k / IDCG@k with linear gain and 1/log2(rank+1) discount (ranks are
// 1-based). Queries with no relevant documents score 0.
inline double ndcg_at_k(const std::vector<std::string>& ranked,
                        const std::map<std::string, double>& rels, std::size_t k = 10) {
  if (k == 0) throw ContractError("ndcg_at_k: k must be >= 1");
  std::vector<double> gains;
  for (const auto& [id, r] : rels)
    if (r > 0) gains.push_back(r);
  if (gains.empty()) return 0.0;
  std::sort(gains.begin(), gains.end(), std::greater<double>());
  double ideal = 0;
  for (std::size_t i = 0; i < std::min(k, gains.size()); ++i)
    ideal += gains[i] / std::log2(double(i) + 2.0);
  double dcg = 0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    auto it = rels.find(ranked[i]);
    if (it != rels.end() && it->second > 0) dcg += it->second / std::log2(double(i) + 2.0);
  }
  return dcg / ideal;
}

// Mean over queries of average precision; a query's AP divides by its total
// relevant count. Queries without any relevant document are skipped.
inline double mean_average_precision(const std::vector<std::vector<std::string>>& ranked_per_query,
                                     const std::vector<std::map<std::string, double>>& rels_per_query) {
  if (ranked_per_query.size() != rels_per_query.size())
    throw ContractError("mean_average_precision: queries and judgments must align");
  double total = 0;
  std::size_t counted = 0;
  for (std::size_t q = 0; q < ranked_per_query.size(); ++q) {
    std::size_t n_rel = 0;
    for (const auto& [id, r] : rels_per_query[q])
      if (r > 0) ++n_rel;
    if (n_rel == 0) continue;
    double ap = 0;
    std::size_t hits = 0;
    const auto& ranked = ranked_per_query[q];
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      auto it = rels_per_query[q].find(ranked[i]);
      if (it == rels_per_query[q].end() || it->second <= 0) continue;
      ++hits;
      ap += double(hits) / double(i + 1);
    }
    total += ap / double(n_rel);
    ++counted;
  }
  if (counted == 0) throw MetricError("mean_average_precision: no query has relevant documents");
  return total / double(counted);
}

// AP of the binary label sequence ranked by descending score.
inline double average_precision_pairs(const std::vector<double>& scores,
                                      const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw ContractError("average_precision_pairs: scores and labels must align");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t n_pos = 0;
  for (int l : labels)
    if (l == 1) ++n_pos;
  if (n_pos == 0) throw MetricError("average_precision_pairs: no positive labels");
  double ap = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (labels[order[i]] != 1) continue;
    ++hits;
    ap += double(hits) / double(i + 1);
  }
  return ap / double(n_pos);
}

namespace detail {

// Fractional ranks: ties get the average of the positions they occupy.
inline std::vector<double> fractional_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (double(i + 1) + double(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

// Pearson correlation of fractional ranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ContractError("spearman: length mismatch");
  if (x.size() < 2) throw ContractError("spearman: need at least two points");
  const auto rx = detail::fractional_ranks(x);
  const auto ry = detail::fractional_ranks(y);
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) throw MetricError("spearman: zero rank variance");
  return sxy / std::sqrt(sxx * syy);
}

// Harmonic mean of homogeneity and completeness from contingency entropies.
inline double v_measure(const std::vector<int>& pred, const std::vector<int>& gold) {
  if (pred.size() != gold.size()) throw ContractError("v_measure: length mismatch");
  if (pred.empty()) throw ContractError("v_measure: empty input");
  const double n = double(pred.size());
  std::map<int, double> cp, cg;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    cp[pred[i]] += 1;
    cg[gold[i]] += 1;
    joint[{gold[i], pred[i]}] += 1;
  }
  auto entropy = [&](const std::map<int, double>& counts) {
    double h = 0;
    for (const auto& [k, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double h_class = entropy(cg);
  const double h_cluster = entropy(cp);
  double h_class_given_cluster = 0, h_cluster_given_class = 0;
  for (const auto& [gp, c] : joint) {
    const auto& [g, p] = gp;
    h_class_given_cluster -= (c / n) * std::log(c / cp[p]);
    h_cluster_given_class -= (c / n) * std::log(c / cg[g]);
  }
  const double hom = h_class == 0 ? 1.0 : 1.0 - h_class_given_cluster / h_class;
  const double com = h_cluster == 0 ? 1.0 : 1.0 - h_cluster_given_class / h_cluster;
  if (hom + com == 0) return 0.0;
  return 2.0 * hom * com / (hom + com);
}

// ---------------------------------------------------------------------------
// Clustering front end: k-means++ seeding, Lloyd iterations capped at 100.
// All randomness comes from the seed; ties resolve to the lowest index.

inline std::vector<int> kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                               std::uint64_t seed) {
  const std::size_t n = points.size();
  if (k == 0) throw ContractError("kmeans: k must be >= 1");
  if (k > n) throw MetricError("kmeans: k exceeds number of points");
  const std::size_t d = points[0].size();
  for (const auto& p : points)
    if (p.size() != d) throw ContractError("kmeans: inconsistent point dimensions");

  std::mt19937_64 rng(seed);
  auto unit_draw = [&] { return double(rng() >> 11) * 0x1.0p-53; };
  auto dist2 = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
  };

  std::vector<std::vector<double>> centers;
  centers.push_back(points[std::size_t(unit_draw() * double(n)) % n]);
  std::vector<double> best(n);
  while (centers.size() < k) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = dist2(points[i], centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c)
        best[i] = std::min(best[i], dist2(points[i], centers[c]));
      total += best[i];
    }
    std::size_t pick = 0;
    if (total > 0) {
      const double u = unit_draw() * total;
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best[i];
        if (u < acc) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = std::size_t(unit_draw() * double(n)) % n;
    }
    centers.push_back(points[pick]);
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int arg = 0;
      double bd = dist2(points[i], centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double dd = dist2(points[i], centers[c]);
        if (dd < bd) {
          bd = dd;
          arg = int(c);
        }
      }
      if (assign[i] != arg) {
        assign[i] = arg;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < d; ++j) sums[assign[i]][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its previous center
      for (std::size_t j = 0; j < d; ++j) centers[c][j] = sums[c][j] / double(counts[c]);
    }
  }
  return assign;
}

// ---------------------------------------------------------------------------
// Frozen-embedding classifier: multinomial logistic regression, 100 epochs of
// full-batch gradient descent at lr 0.1, no regularization. Test labels
// outside the training label space count as errors.

inline double classify_accuracy(const std::vector<std::vector<double>>& train_x,
                                const std::vector<int>& train_y,
                                const std::vector<std::vector<double>>& test_x,
                                const std::vector<int>& test_y) {
  if (train_x.empty() || test_x.empty())
    throw ContractError("classify_accuracy: empty train or test set");
  if (train_x.size() != train_y.size() || test_x.size() != test_y.size())
    throw ContractError("classify_accuracy: embeddings and labels must align");
  const std::size_t d = train_x[0].size();
  int max_label = 0;
  for (int y : train_y) {
    if (y < 0) throw ContractError("classify_accuracy: negative training label");
    max_label = std::max(max_label, y);
  }
  const std::size_t C = std::size_t(max_label) + 1;
  const std::size_t n = train_x.size();

  // Weights C x (d+1), last column is the bias.
  std::vector<std::vector<double>> w(C, std::vector<double>(d + 1, 0.0));
  std::vector<double> logits(C), probs(C);
  auto forward = [&](const std::vector<double>& x) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = w[c][d];
      for (std::size_t j = 0; j < d; ++j) s += w[c][j] * x[j];
      logits[c] = s;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0;
    for (std::size_t c = 0; c < C; ++c) {
      probs[c] = std::exp(logits[c] - mx);
      z += probs[c];
    }
    for (std::size_t c = 0; c < C; ++c) probs[c] /= z;
  };

  std::vector<std::vector<double>> grad(C, std::vector<double>(d + 1));
  for (int epoch = 0; epoch < 100; ++epoch) {
    for (auto& g : grad) std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      forward(train_x[i]);
      for (std::size_t c = 0; c < C; ++c) {
        const double delta = probs[c] - (int(c) == train_y[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d; ++j) grad[c][j] += delta * train_x[i][j];
        grad[c][d] += delta;
      }
    }
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t j = 0; j <= d; ++j) w[c][j] -= 0.1 * grad[c][j] / double(n);
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_x.size(); ++i) {
    if (test_x[i].size() != d) throw ContractError("classify_accuracy: test dimension mismatch");
    forward(test_x[i]);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < C; ++c)
      if (probs[c] > probs[arg]) arg = c;
    if (int(arg) == test_y[i]) ++correct;
  }
  return double(correct) / double(test_x.size());
}

// ---------------------------------------------------------------------------
// Task plumbing

enum class TaskFamily {
  retrieval,
  reranking,
  clustering,
  pair_classification,
  classification,
  sts,
  summarization,
};

inline std::string task_family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::retrieval: return "retrieval";
    case TaskFamily::reranking: return "reranking";
    case TaskFamily::clustering: return "clustering";
    case TaskFamily::pair_classification: return "pair_classification";
    case TaskFamily::classification: return "classification";
    case TaskFamily::sts: return "sts";
    case TaskFamily::summarization: return "summarization";
  }
  throw ContractError("task_family_name: unknown family");
}

inline TaskFamily task_family_from_name(const std::string& s) {
  for (TaskFamily f : {TaskFamily::retrieval, TaskFamily::reranking, TaskFamily::clustering,
                       TaskFamily::pair_classification, TaskFamily::classification, TaskFamily::sts,
                       TaskFamily::summarization})
    if (task_family_name(f) == s) return f;
  throw ConfigError("unknown task family '" + s + "'");
}

struct RetrievalData {
  std::vector<std::pair<std::string, std::string>> queries;  // (qid, text)
  std::vector<std::pair<std::string, std::string>> corpus;   // (did, text)
  std::map<std::string, std::map<std::string, double>> qrels;
};

struct PairData {
  struct Row {
    std::string a, b;
    double target = 0;
  };
  std::vector<Row> rows;
};

struct LabeledData {
  std::vector<std::string> texts;
  std::vector<int> labels;
  std::size_t num_classes() const {
    int mx = -1;
    for (int l : labels) mx = std::max(mx, l);
    return std::size_t(mx + 1);
  }
};

namespace detail {

inline std::vector<nlohmann::json> read_jsonl(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(std::string(what) + ": cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string(what) + ": " + path + ":" + std::to_string(lineno) + ": " +
                    e.what());
    }
  }
  return out;
}

}  // namespace detail

// Lines of {"qid","text"} / {"did","text"} / {"qid","did","rel"}.
inline RetrievalData load_retrieval_data(const std::string& queries_path,
                                         const std::string& corpus_path,
                                         const std::string& qrels_path) {
  RetrievalData d;
  try {
    for (const auto& j : detail::read_jsonl(queries_path, "queries"))
      d.queries.emplace_back(j.at("qid").get<std::string>(), j.at("text").get<std::string>());
    std::set<std::string> dids;
    for (const auto& j : detail::read_jsonl(corpus_path, "corpus")) {
      d.corpus.emplace_back(j.at("did").get<std::string>(), j.at("text").get<std::string>());
      dids.insert(d.corpus.back().first);
    }
    for (const auto& j : detail::read_jsonl(qrels_path, "qrels")) {
      const auto did = j.at("did").get<std::string>();
      if (!dids.count(did))
        throw IoError("qrels: document id '" + did + "' not present in corpus");
      d.qrels[j.at("qid").get<std::string>()][did] = j.at("rel").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("retrieval data: ") + e.what());
  }
  return d;
}

// Lines of {"a","b","label"} or {"a","b","score"}.
inline PairData load_pair_data(const std::string& path) {
  PairData d;
  try {
    for (const auto& j : detail::read_jsonl(path, "pairs")) {
      PairData::Row r;
      r.a = j.at("a").get<std::string>();
      r.b = j.at("b").get<std::string>();
      if (j.contains("label"))
        r.target = double(j.at("label").get<int>());
      else
        r.target = j.at("score").get<double>();
      d.rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("pair data: ") + e.what());
  }
  if (d.rows.empty()) throw IoError("pair data: " + path + " is empty");
  return d;
}

// Lines of {"text","label"}; labels must cover 0..C-1.
inline LabeledData load_labeled_data(const std::string& path) {
  LabeledData d;
  try {
    for (const auto& j : detail::read_jsonl(path, "labeled data")) {
      d.texts.push_back(j.at("text").get<std::string>());
      d.labels.push_back(j.at("label").get<int>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("labeled data: ") + e.what());
  }
  if (d.texts.empty()) throw IoError("labeled data: " + path + " is empty");
  std::set<int> seen(d.labels.begin(), d.labels.end());
  if (*seen.begin() < 0) throw IoError("labeled data: negative label in " + path);
  for (int c = 0; c < *seen.rbegin(); ++c)
    if (!seen.count(c))
      throw IoError("labeled data: labels must cover 0..C-1, missing " + std::to_string(c));
  return d;
}

struct TaskSpec {
  std::string name;  // instruction lookup key
  TaskFamily family = TaskFamily::retrieval;
  std::string queries_path, corpus_path, qrels_path;  // retrieval, reranking
  std::string pairs_path;                             // sts, summarization, pair_classification
  std::string data_path;                              // clustering
  std::string train_path, test_path;                  // classification
  std::uint64_t seed = 0;
};

namespace detail {

template <typename T>
std::vector<double> embed_plain(const Embedder<T>& model, const std::string& text,
                                const std::string& instruction) {
  NoGradGuard guard;  // metrics never differentiate; skip graph recording
  auto rec = model.embed_text(text, instruction);
  std::vector<double> v(rec.vector.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(rec.vector.data()[i]);
  return v;
}

inline double cos_plain(const std::vector<double>& a, const std::vector<double>& b) {
  if (a == b) {  // keep cos(x,x) exact; rounding must not break ties
    for (double v : a)
      if (v != 0) return 1.0;
    return 0.0;
  }
  double num = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return num / (std::sqrt(na) * std::sqrt(nb));
}

// Candidate ids ranked by descending cosine against the query; stable in the
// candidates' input order on ties.
inline std::vector<std::string> rank_by_score(
    const std::vector<double>& q,
    const std::vector<std::pair<std::string, const std::vector<double>*>>& candidates) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> score(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    score[i] = cos_plain(q, *candidates[i].second);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return score[x] > score[y]; });
  std::vector<std::string> ids;
  ids.reserve(order.size());
  for (std::size_t i : order) ids.push_back(candidates[i].first);
  return ids;
}

}  // namespace detail

// Runs one task family end to end. The task name must resolve to an
// instruction template; queries carry the instruction while retrieval and
// reranking corpora are embedded bare. Symmetric families (pairs, labeled
// sets) treat every text as a query.
template <typename T>
nlohmann::json run_task(const Embedder<T>& model, const TaskSpec& spec,
                        const InstructionMap& instructions) {
  const std::string& instr = instructions.require(spec.name);
  nlohmann::json report;
  report["task"] = spec.name;
  report["family"] = task_family_name(spec.family);

  switch (spec.family) {
    case TaskFamily::retrieval: {
      auto data = load_retrieval_data(spec.queries_path, spec.corpus_path, spec.qrels_path);
      std::vector<std::vector<double>> corpus_emb;
      corpus_emb.reserve(data.corpus.size());
      for (const auto& [did, text] : data.corpus)
        corpus_emb.push_back(detail::embed_plain(model, text, ""));
      std::vector<std::pair<std::string, const std::vector<double>*>> cands;
      for (std::size_t i = 0; i < data.corpus.size(); ++i)
        cands.emplace_back(data.corpus[i].first, &corpus_emb[i]);
      double total = 0;
      std::size_t counted = 0;
      for (const auto& [qid, text] : data.queries) {
        auto it = data.qrels.find(qid);
        if (it == data.qrels.end()) continue;
        const auto q = detail::embed_plain(model, text, instr);
        total += ndcg_at_k(detail::rank_by_score(q, cands), it->second, 10);
        ++counted;
      }
      if (counted == 0) throw MetricError("retrieval: no query has relevance judgments");
      report["metric"] = "ndcg@10";
      report["value"] = total / double(counted);
      report["size"] = counted;
      report["corpus_size"] = data.corpus.size();
      break;
    }
    case TaskFamily::reranking: {
      // Each query's candidate set is the documents listed in its judgments
      // (including zero-relevance rows).
      auto data = load_retrieval_data(spec.queries_path, spec.corpus_path, spec.qrels_path);
      std::map<std::string, std::vector<double>> corpus_emb;
      std::map<std::string, std::string> corpus_text;
      for (const auto& [did, text] : data.corpus) corpus_text[did] = text;
      std::vector<std::vector<std::string>> ranked;
      std::vector<std::map<std::string, double>> rels;
      for (const auto& [qid, text] : data.queries) {
        auto it = data.qrels.find(qid);
        if (it == data.qrels.end()) continue;
        const auto q = detail::embed_plain(model, text, instr);
        std::vector<std::pair<std::string, const std::vector<double>*>> cands;
        for (const auto& [did, rel] : it->second) {
          if (!corpus_emb.count(did))
            corpus_emb[did] = detail::embed_plain(model, corpus_text.at(did), "");
          cands.emplace_back(did, &corpus_emb.at(did));
        }
        ranked.push_back(detail::rank_by_score(q, cands));
        rels.push_back(it->second);
      }
      report["metric"] = "map";
      report["value"] = mean_average_precision(ranked, rels);
      report["size"] = ranked.size();
      break;
    }
    case TaskFamily::clustering: {
      auto data = load_labeled_data(spec.data_path);
      std::vector<std::vector<double>> emb;
      emb.reserve(data.texts.size());
      for (const auto& t : data.texts) emb.push_back(detail::embed_plain(model, t, instr));
      const std::size_t k = data.num_classes();
      auto pred = kmeans(emb, k, spec.seed);
      report["metric"] = "v_measure";
      report["value"] = v_measure(pred, data.labels);
      report["size"] = data.texts.size();
      report["k"] = k;
      break;
    }
    case TaskFamily::pair_classification:
    case TaskFamily::sts:
    case TaskFamily::summarization: {
      auto data = load_pair_data(spec.pairs_path);
      std::vector<double> scores, targets;
      std::vector<int> labels;
      for (const auto& r : data.rows) {
        const auto ea = detail::embed_plain(model, r.a, instr);
        const auto eb = detail::embed_plain(model, r.b, instr);
        scores.push_back(detail::cos_plain(ea, eb));
        targets.push_back(r.target);
        labels.push_back(int(r.target));
      }
      if (spec.family == TaskFamily::pair_classification) {
        for (std::size_t i = 0; i < labels.size(); ++i)
          if (targets[i] != 0.0 && targets[i] != 1.0)
            throw ConfigError("pair classification labels must be 0 or 1");
        report["metric"] = "ap";
        report["value"] = average_precision_pairs(scores, labels);
      } else {
        report["metric"] = "spearman";
        report["value"] = spearman(scores, targets);
      }
      report["size"] = data.rows.size();
      break;
    }
    case TaskFamily::classification: {
      auto train = load_labeled_data(spec.train_path);
      auto test = load_labeled_data(spec.test_path);
      std::vector<std::vector<double>> train_emb, test_emb;
      for (const auto& t : train.texts) train_emb.push_back(detail::embed_plain(model, t, instr));
      for (const auto& t : test.texts) test_emb.push_back(detail::embed_plain(model, t, instr));
      report["metric"] = "accuracy";
      report["value"] = classify_accuracy(train_emb, train.labels, test_emb, test.labels);
      report["size"] = test.texts.size();
      report["train_size"] = train.texts.size();
      break;
    }
  }
  return report;
}

}  // namespace ctxvec
