#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ctxvec/bench.hpp"
#include "ctxvec/checkpoint.hpp"
#include "ctxvec/data.hpp"
#include "ctxvec/embedder.hpp"
#include "ctxvec/errors.hpp"
#include "ctxvec/eval.hpp"
#include "ctxvec/synthetic.hpp"
#include "ctxvec/trainer.hpp"

namespace ctxvec {

// Runtime scalar for the command-line surface. Gradient checking lives in the
// test suite at f64; the tools run at f32 for speed.
using CliScalar = float;

namespace cli_detail {

inline std::vector<std::string> load_lines(const std::string& path, bool keep_empty = false) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (keep_empty || !line.empty()) lines.push_back(line);
  }
  return lines;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("short write to " + path);
}

// --- tokenizer train ---------------------------------------------------------

struct TokenizerTrainArgs {
  std::vector<std::string> corpus;
  std::size_t vocab_size = 4096;
  std::string out;
};

inline void run_tokenizer_train(const TokenizerTrainArgs& a) {
  std::vector<std::string> lines;
  for (const auto& path : a.corpus) {
    auto more = load_lines(path);
    lines.insert(lines.end(), more.begin(), more.end());
  }
  auto tok = Tokenizer::train(lines, a.vocab_size);
  tok.save(a.out);
  std::cout << "trained tokenizer: vocab " << tok.vocab_size() << " (" << tok.merge_count()
            << " merges) -> " << a.out << "\n";
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string model_path;
  std::string config_path;
  std::string tokenizer_path;
  std::vector<std::string> data;  // overrides config datasets when given
  std::string instructions_path;  // overrides config instructions_path when given
  std::string out;
  std::string metrics_path;
};

inline void run_train(const TrainArgs& a) {
  auto tok = Tokenizer::load(a.tokenizer_path);
  auto mcfg = ModelConfig::load(a.model_path);
  auto tcfg = TrainConfig::load(a.config_path);
  if (!a.data.empty()) {
    tcfg.datasets.clear();
    for (const auto& p : a.data) tcfg.datasets.push_back({p, 1.0});
  }
  if (tcfg.datasets.empty()) throw ConfigError("train: no datasets (use --data or the config)");

  InstructionMap instructions;
  const std::string ipath =
      !a.instructions_path.empty() ? a.instructions_path : tcfg.instructions_path;
  if (!ipath.empty()) instructions = InstructionMap::load(ipath);

  std::vector<std::vector<TrainingExample>> datasets;
  std::vector<double> ratios;
  for (const auto& ref : tcfg.datasets) {
    datasets.push_back(load_training_jsonl(ref.path));
    ratios.push_back(ref.sample_ratio);
  }
  BatchSampler sampler(std::move(datasets), ratios, tcfg.batch_size, tcfg.seed);

  auto model = Embedder<CliScalar>::make(mcfg, tok);
  Trainer<CliScalar> trainer(model, tcfg, instructions);

  std::ofstream metrics;
  if (!a.metrics_path.empty()) {
    metrics.open(a.metrics_path, std::ios::trunc);
    if (!metrics) throw IoError("cannot write " + a.metrics_path);
  }
  double last_loss = 0;
  trainer.run(sampler, [&](const StepMetrics& m) {
    last_loss = m.loss;
    if (metrics.is_open()) metrics << m.to_json().dump() << "\n";
    if (m.step % 50 == 0 || m.step == trainer.config().train_steps)
      std::cout << "step " << m.step << "  loss " << m.loss << "  lr " << m.lr << "\n";
  });
  save_checkpoint(model, a.out);
  std::cout << "trained " << trainer.steps_done() << " steps, final loss " << last_loss << " -> "
            << a.out << "\n";
}

// --- embed ----------------------------------------------------------------

struct EmbedArgs {
  std::string checkpoint;
  std::string tokenizer_path;
  std::string input;
  std::string output;
  std::string instruction;
  std::string pooling;  // optional override
};

inline void run_embed(const EmbedArgs& a) {
  auto tok = Tokenizer::load(a.tokenizer_path);
  auto model = load_checkpoint<CliScalar>(a.checkpoint, tok);
  if (!a.pooling.empty()) {
    model.cfg.pooling = pooling_mode_from(a.pooling);
    model.cfg.validate();
  }
  const auto lines = load_lines(a.input);
  if (lines.empty()) throw IoError("embed: no input texts in " + a.input);

  NoGradGuard guard;
  std::string payload;
  std::size_t dim = 0;
  for (const auto& line : lines) {
    const auto rec = model.embed_text(line, a.instruction);
    dim = rec.vector.numel();
    for (const CliScalar v : rec.vector.data()) detail::put_scalar(payload, float(v));
  }
  std::ofstream out(a.output, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + a.output);
  out.write(payload.data(), std::streamsize(payload.size()));
  if (!out) throw IoError("short write to " + a.output);

  nlohmann::json sidecar;
  sidecar["dim"] = dim;
  sidecar["count"] = lines.size();
  sidecar["normalized"] = true;
  sidecar["mode"] = pooling_mode_name(model.cfg.pooling);
  write_text(a.output + ".json", sidecar.dump(2) + "\n");
  std::cout << "embedded " << lines.size() << " texts at dim " << dim << " -> " << a.output
            << "\n";
}

// --- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string tokenizer_path;
  std::string task;  // family name
  std::string name;  // task name for instruction lookup; defaults to family
  std::string instructions_path;
  std::string queries, corpus, qrels, pairs, data, train, test;
  std::uint64_t seed = 0;
  std::string out;
};

inline void run_eval(const EvalArgs& a) {
  auto tok = Tokenizer::load(a.tokenizer_path);
  auto model = load_checkpoint<CliScalar>(a.checkpoint, tok);
  auto instructions = InstructionMap::load(a.instructions_path);

  TaskSpec spec;
  spec.family = task_family_from_name(a.task);
  spec.name = a.name.empty() ? a.task : a.name;
  spec.queries_path = a.queries;
  spec.corpus_path = a.corpus;
  spec.qrels_path = a.qrels;
  spec.pairs_path = a.pairs;
  spec.data_path = a.data;
  spec.train_path = a.train;
  spec.test_path = a.test;
  spec.seed = a.seed;

  const auto report = run_task(model, spec, instructions);
  std::cout << report.dump(2) << "\n";
  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
}

// --- bench ------------------------------------------------------------------

struct BenchArgs {
  std::string checkpoint;
  std::string tokenizer_path;
  std::string corpus;
  std::string methods = "plain,causal2vec,echo";
  std::string icl_examples_path;
  std::string instruction;
  std::size_t reps = 20;
  std::string dataset = "corpus";
  std::string out;
};

inline void run_bench(const BenchArgs& a) {
  auto tok = Tokenizer::load(a.tokenizer_path);
  auto model = load_checkpoint<CliScalar>(a.checkpoint, tok);
  const auto corpus = load_lines(a.corpus);

  std::vector<MethodSpec> methods;
  std::istringstream names(a.methods);
  std::string name;
  while (std::getline(names, name, ',')) {
    MethodSpec m;
    m.variant = bench_variant_from_name(name);
    if (m.variant == BenchVariant::icl) {
      if (a.icl_examples_path.empty())
        throw ConfigError("bench: icl method needs --icl-examples");
      for (const auto& line : load_lines(a.icl_examples_path))
        m.icl_examples.push_back(model.tok.encode(line));
    }
    methods.push_back(std::move(m));
  }
  if (methods.empty()) throw ConfigError("bench: no methods given");

  std::vector<CostReport> reports;
  for (const auto& m : methods)
    reports.push_back(profile(model, m, corpus, a.instruction, a.reps, a.dataset));
  fill_reductions(reports);
  const auto csv = cost_csv(reports);
  std::cout << csv;
  if (!a.out.empty()) write_text(a.out, csv);
}

// --- ablate -------------------------------------------------------------------

struct AblateArgs {
  std::string axis;
  std::size_t pairs = 240;
  std::size_t steps = 150;
  std::size_t heldout = 40;
  std::uint64_t seed = 7;
  std::string out;
};

inline std::vector<std::string> ablate_axis_values(const std::string& axis) {
  if (axis == "pooling")
    return {"last_token", "mean", "weighted_mean", "concat_ctx_eos", "bi_eos"};
  if (axis == "ctx_count") return {"1", "2", "4", "8"};
  if (axis == "ctx_position") return {"before_instruction", "after_instruction"};
  if (axis == "encoder") return {"frozen", "lora", "full"};
  if (axis == "mask") return {"causal", "bidirectional"};
  throw ConfigError("ablate: unknown axis '" + axis +
                    "' (expected pooling, ctx_count, ctx_position, encoder, mask)");
}

inline void apply_ablate_value(ModelConfig& cfg, const std::string& axis,
                               const std::string& value) {
  if (axis == "pooling") {
    cfg.pooling = pooling_mode_from(value);
  } else if (axis == "ctx_count") {
    cfg.ctx_count = std::stoul(value);
    cfg.use_query_bank = cfg.ctx_count > 1;
  } else if (axis == "ctx_position") {
    cfg.ctx_position = ctx_position_from(value);
  } else if (axis == "encoder") {
    cfg.encoder_training = trainability_from(value);
  } else if (axis == "mask") {
    cfg.mask = mask_mode_from(value);
  }
}

// One-factor-at-a-time study on a generated paraphrase-retrieval corpus:
// train a small model per axis value, score held-out retrieval accuracy, and
// report the decoder sequence length each variant pays per query.
inline void run_ablate(const AblateArgs& a) {
  const auto values = ablate_axis_values(a.axis);
  if (a.pairs <= a.heldout) throw ConfigError("ablate: --pairs must exceed the held-out slice");

  SyntheticSpec sspec;
  sspec.n_pairs = a.pairs;
  sspec.vocab_words = 120;
  sspec.seed = a.seed;
  const auto corpus = make_synthetic_corpus(sspec);
  auto tok = Tokenizer::train(corpus.all_texts(), 512);

  const std::size_t split = corpus.pairs.size() - a.heldout;
  std::vector<TrainingExample> train_pairs(corpus.pairs.begin(), corpus.pairs.begin() + long(split));
  std::vector<TrainingExample> eval_pairs(corpus.pairs.begin() + long(split), corpus.pairs.end());
  std::vector<std::string> doc_texts;
  for (const auto& p : corpus.pairs) doc_texts.push_back(p.positive);

  std::ostringstream csv;
  csv << "axis,value,mean_seq_len,acc_at_1,final_loss\n";
  for (const auto& value : values) {
    ModelConfig cfg;
    cfg.d_model = 32;
    cfg.dec_layers = 1;
    cfg.dec_heads = 2;
    cfg.max_positions = 64;
    cfg.d_enc = 16;
    cfg.enc_layers = 1;
    cfg.enc_heads = 2;
    cfg.ffn_mult = 2;
    cfg.pooling = PoolingMode::concat_ctx_eos;
    cfg.init_seed = a.seed;
    apply_ablate_value(cfg, a.axis, value);
    cfg.validate();

    TrainConfig tcfg;
    tcfg.tau = 0.05;
    tcfg.peak_lr = 2e-3;
    tcfg.train_steps = a.steps;
    tcfg.warmup_steps = a.steps / 5;
    tcfg.grad_accum = 1;
    tcfg.batch_size = 8;
    tcfg.seed = a.seed;

    auto model = Embedder<CliScalar>::make(cfg, tok);
    Trainer<CliScalar> trainer(model, tcfg);
    BatchSampler sampler({train_pairs}, {1.0}, tcfg.batch_size, tcfg.seed);
    double last_loss = 0;
    trainer.run(sampler, [&](const StepMetrics& m) { last_loss = m.loss; });

    const double acc = accuracy_at_1(model, eval_pairs, doc_texts);
    const std::size_t count = cfg.use_ctx ? cfg.ctx_count : 0;
    MethodSpec method;
    method.variant = cfg.use_ctx ? BenchVariant::causal2vec : BenchVariant::plain;
    double mean_len = 0;
    for (const auto& ex : eval_pairs)
      mean_len += double(seq_len(method, {}, model.tok.encode(ex.query), count));
    mean_len /= double(eval_pairs.size());

    csv << a.axis << ',' << value << ',' << mean_len << ',' << acc << ',' << last_loss << '\n';
    std::cout << a.axis << "=" << value << "  seq_len " << mean_len << "  acc@1 " << acc
              << "  loss " << last_loss << "\n";
  }
  if (!a.out.empty()) write_text(a.out, csv.str());
  std::cout << csv.str();
}

}  // namespace cli_detail

// Command-line entry point. Exit codes: 0 success, 2 usage error, 3 bad
// configuration or I/O, 4 numeric or metric failure, 1 other library error.
inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"contextual-token text embedder"};
  app.require_subcommand(1);

  cli_detail::TokenizerTrainArgs tok_args;
  auto* tok_cmd = app.add_subcommand("tokenizer", "tokenizer utilities");
  tok_cmd->require_subcommand(1);
  auto* tok_train = tok_cmd->add_subcommand("train", "train a byte-pair tokenizer");
  tok_train->add_option("--corpus", tok_args.corpus, "text file(s), one document per line")
      ->required();
  tok_train->add_option("--vocab-size", tok_args.vocab_size, "total vocabulary size");
  tok_train->add_option("--out", tok_args.out, "output tokenizer JSON")->required();
  tok_train->callback([&] { cli_detail::run_tokenizer_train(tok_args); });

  cli_detail::TrainArgs train_args;
  auto* train = app.add_subcommand("train", "contrastive training");
  train->add_option("--model", train_args.model_path, "model config JSON")->required();
  train->add_option("--config", train_args.config_path, "training config JSON")->required();
  train->add_option("--tokenizer", train_args.tokenizer_path, "tokenizer JSON")->required();
  train->add_option("--data", train_args.data, "training JSONL file(s); overrides the config");
  train->add_option("--instructions", train_args.instructions_path,
                    "instruction templates JSON; overrides the config");
  train->add_option("--out", train_args.out, "output checkpoint")->required();
  train->add_option("--metrics", train_args.metrics_path, "per-step metrics JSONL");
  train->callback([&] { cli_detail::run_train(train_args); });

  cli_detail::EmbedArgs embed_args;
  auto* embed = app.add_subcommand("embed", "embed texts from a file");
  embed->add_option("--checkpoint", embed_args.checkpoint, "model checkpoint")->required();
  embed->add_option("--tokenizer", embed_args.tokenizer_path, "tokenizer JSON")->required();
  embed->add_option("--input", embed_args.input, "input texts, one per line")->required();
  embed->add_option("--output", embed_args.output, "output f32 little-endian matrix")->required();
  embed->add_option("--instruction", embed_args.instruction, "instruction prefix for all texts");
  embed->add_option("--pooling", embed_args.pooling, "override the checkpoint's pooling mode");
  embed->callback([&] { cli_detail::run_embed(embed_args); });

  cli_detail::EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "run one evaluation task");
  eval->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint")->required();
  eval->add_option("--tokenizer", eval_args.tokenizer_path, "tokenizer JSON")->required();
  eval->add_option("--task", eval_args.task, "task family")->required();
  eval->add_option("--name", eval_args.name, "task name for instruction lookup");
  eval->add_option("--instructions", eval_args.instructions_path, "instruction templates JSON")
      ->required();
  eval->add_option("--queries", eval_args.queries, "queries JSONL (retrieval, reranking)");
  eval->add_option("--corpus", eval_args.corpus, "corpus JSONL (retrieval, reranking)");
  eval->add_option("--qrels", eval_args.qrels, "relevance JSONL (retrieval, reranking)");
  eval->add_option("--pairs", eval_args.pairs, "pairs JSONL (pair classification, sts)");
  eval->add_option("--data", eval_args.data, "labeled JSONL (clustering)");
  eval->add_option("--train", eval_args.train, "labeled train JSONL (classification)");
  eval->add_option("--test", eval_args.test, "labeled test JSONL (classification)");
  eval->add_option("--seed", eval_args.seed, "seed for clustering");
  eval->add_option("--out", eval_args.out, "write the JSON report here");
  eval->callback([&] { cli_detail::run_eval(eval_args); });

  cli_detail::BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "sequence-cost profiling");
  bench->add_option("--checkpoint", bench_args.checkpoint, "model checkpoint")->required();
  bench->add_option("--tokenizer", bench_args.tokenizer_path, "tokenizer JSON")->required();
  bench->add_option("--corpus", bench_args.corpus, "texts to profile, one per line")->required();
  bench->add_option("--methods", bench_args.methods, "comma list: plain,causal2vec,echo,icl");
  bench->add_option("--icl-examples", bench_args.icl_examples_path,
                    "few-shot example texts, one per line");
  bench->add_option("--instruction", bench_args.instruction, "instruction prefix");
  bench->add_option("--reps", bench_args.reps, "timed repetitions (minimum 20)");
  bench->add_option("--dataset", bench_args.dataset, "dataset label for the report");
  bench->add_option("--out", bench_args.out, "write the CSV here");
  bench->callback([&] { cli_detail::run_bench(bench_args); });

  cli_detail::AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "one-factor ablation study");
  ablate->add_option("--axis", ablate_args.axis,
                     "pooling | ctx_count | ctx_position | encoder | mask")
      ->required();
  ablate->add_option("--pairs", ablate_args.pairs, "synthetic corpus size");
  ablate->add_option("--steps", ablate_args.steps, "training steps per variant");
  ablate->add_option("--heldout", ablate_args.heldout, "held-out pairs for accuracy@1");
  ablate->add_option("--seed", ablate_args.seed, "corpus, init, and sampling seed");
  ablate->add_option("--out", ablate_args.out, "write the CSV here");
  ablate->callback([&] { cli_detail::run_ablate(ablate_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const MetricError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ctxvec
