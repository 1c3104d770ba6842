#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ctxvec/cli.hpp"

using ctxvec::Embedder;
using ctxvec::ModelConfig;
using ctxvec::PoolingMode;
using ctxvec::Tokenizer;
using ctxvec::TrainConfig;

namespace {

int run(std::vector<std::string> args, std::string* out = nullptr) {
  std::vector<const char*> argv;
  argv.push_back("ctxvec");
  for (const auto& a : args) argv.push_back(a.c_str());
  ::testing::internal::CaptureStdout();
  const int code = ctxvec::run_cli(int(argv.size()), argv.data());
  const std::string captured = ::testing::internal::GetCapturedStdout();
  if (out) *out = captured;
  return code;
}

std::string tmp(const std::string& name) { return ::testing::TempDir() + "ctxvec_cli_" + name; }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  ASSERT_TRUE(out.is_open()) << path;
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Shared tokenizer + f32 checkpoint fixture, built once.
struct Fixture {
  std::string tok_path = tmp("tok.json");
  std::string ckpt_path = tmp("model.bin");
  Tokenizer tok = Tokenizer::train(
      {"alpha beta gamma delta", "epsilon zeta eta theta", "iota kappa lambda mu"}, 280);

  Fixture() {
    tok.save(tok_path);
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.dec_layers = 1;
    cfg.dec_heads = 2;
    cfg.max_positions = 64;
    cfg.d_enc = 8;
    cfg.enc_layers = 1;
    cfg.enc_heads = 2;
    cfg.ffn_mult = 2;
    cfg.pooling = PoolingMode::concat_ctx_eos;
    auto model = Embedder<float>::make(cfg, tok);
    ctxvec::save_checkpoint(model, ckpt_path);
  }
};

Fixture& fx() {
  static Fixture f;
  return f;
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_EQ(run({"--bogus"}), 2);
  EXPECT_EQ(run({"embed", "--no-such-flag", "x"}), 2);
  // readable config error -> 3
  EXPECT_EQ(run({"train", "--model", tmp("nope.json"), "--config", tmp("nope.json"),
                 "--tokenizer", fx().tok_path, "--out", tmp("nope.bin")}),
            3);
  EXPECT_EQ(run({"ablate", "--axis", "flux_capacitor"}), 3);
}

TEST(Cli, TokenizerTrainProducesWorkingTokenizer) {
  const auto corpus = tmp("tok_corpus.txt");
  const auto out = tmp("tok_out.json");
  write_file(corpus, "the quick brown fox\njumps over the lazy dog\n");
  ASSERT_EQ(run({"tokenizer", "train", "--corpus", corpus, "--vocab-size", "300", "--out", out}),
            0);
  auto tok = Tokenizer::load(out);
  const std::string probe = "quick lazy fox";
  EXPECT_EQ(tok.decode(tok.encode(probe)), probe);
  std::remove(corpus.c_str());
  std::remove(out.c_str());
}

std::string write_train_fixtures(const std::string& stem, std::size_t steps) {
  auto corpus = ctxvec::make_synthetic_corpus([] {
    ctxvec::SyntheticSpec s;
    s.n_pairs = 24;
    s.vocab_words = 40;
    s.seed = 5;
    return s;
  }());
  auto tok = Tokenizer::train(corpus.all_texts(), 300);
  tok.save(tmp(stem + "_tok.json"));
  ctxvec::write_training_jsonl(tmp(stem + "_data.jsonl"), corpus.pairs);

  ModelConfig mcfg;
  mcfg.d_model = 16;
  mcfg.dec_layers = 1;
  mcfg.dec_heads = 2;
  mcfg.max_positions = 64;
  mcfg.d_enc = 8;
  mcfg.enc_layers = 1;
  mcfg.enc_heads = 2;
  mcfg.ffn_mult = 2;
  write_file(tmp(stem + "_model.json"), mcfg.to_json().dump());

  TrainConfig tcfg;
  tcfg.train_steps = steps;
  tcfg.warmup_steps = 2;
  tcfg.grad_accum = 1;
  tcfg.batch_size = 4;
  tcfg.peak_lr = 1e-3;
  write_file(tmp(stem + "_train.json"), tcfg.to_json().dump());
  return stem;
}

TEST(Cli, TrainIsDeterministicAndCheckpointLoads) {
  write_train_fixtures("t1", 5);
  auto train_once = [&](const std::string& run_id) {
    return run({"train", "--model", tmp("t1_model.json"), "--config", tmp("t1_train.json"),
                "--tokenizer", tmp("t1_tok.json"), "--data", tmp("t1_data.jsonl"), "--out",
                tmp("t1_" + run_id + ".bin"), "--metrics", tmp("t1_" + run_id + ".jsonl")});
  };
  ASSERT_EQ(train_once("a"), 0);
  ASSERT_EQ(train_once("b"), 0);
  const auto ma = read_file(tmp("t1_a.jsonl"));
  EXPECT_FALSE(ma.empty());
  EXPECT_EQ(ma, read_file(tmp("t1_b.jsonl")));
  EXPECT_EQ(read_file(tmp("t1_a.bin")), read_file(tmp("t1_b.bin")));

  // 5 metric lines with the expected keys
  std::istringstream lines(ma);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("step") && j.contains("loss") && j.contains("lr") &&
                j.contains("grad_norm"));
    ++n;
  }
  EXPECT_EQ(n, 5u);

  auto back = ctxvec::load_checkpoint<float>(tmp("t1_a.bin"), Tokenizer::load(tmp("t1_tok.json")));
  EXPECT_EQ(back.cfg.d_model, 16u);
  for (const auto& id : {"a", "b"}) {
    std::remove(tmp(std::string("t1_") + id + ".bin").c_str());
    std::remove(tmp(std::string("t1_") + id + ".jsonl").c_str());
  }
}

TEST(Cli, EmbedWritesMatrixAndSidecar) {
  const auto input = tmp("embed_in.txt");
  const auto output = tmp("embed_out.bin");
  write_file(input, "alpha beta\ngamma delta\nepsilon zeta\n");
  ASSERT_EQ(run({"embed", "--checkpoint", fx().ckpt_path, "--tokenizer", fx().tok_path,
                 "--input", input, "--output", output, "--instruction", "find:"}),
            0);
  const auto sidecar = nlohmann::json::parse(read_file(output + ".json"));
  EXPECT_EQ(sidecar.at("dim").get<std::size_t>(), 32u);  // concat pooling doubles d
  EXPECT_EQ(sidecar.at("count").get<std::size_t>(), 3u);
  EXPECT_TRUE(sidecar.at("normalized").get<bool>());
  EXPECT_EQ(sidecar.at("mode").get<std::string>(), "concat_ctx_eos");
  EXPECT_EQ(read_file(output).size(), 3u * 32u * sizeof(float));

  // pooling override drops to a single d-dim block
  ASSERT_EQ(run({"embed", "--checkpoint", fx().ckpt_path, "--tokenizer", fx().tok_path,
                 "--input", input, "--output", output, "--pooling", "last_token"}),
            0);
  EXPECT_EQ(nlohmann::json::parse(read_file(output + ".json")).at("dim").get<std::size_t>(), 16u);
  EXPECT_EQ(read_file(output).size(), 3u * 16u * sizeof(float));
  std::remove(input.c_str());
  std::remove(output.c_str());
  std::remove((output + ".json").c_str());
}

TEST(Cli, EvalRetrievalReportsAndStsDegenerateExitsFour) {
  write_file(tmp("ev_q.jsonl"), "{\"qid\":\"q1\",\"text\":\"alpha beta\"}\n");
  write_file(tmp("ev_c.jsonl"),
             "{\"did\":\"d1\",\"text\":\"alpha beta\"}\n{\"did\":\"d2\",\"text\":\"iota kappa\"}\n");
  write_file(tmp("ev_r.jsonl"), "{\"qid\":\"q1\",\"did\":\"d1\",\"rel\":1}\n");
  write_file(tmp("ev_instr.json"), "{\"retrieval\":\"find the paraphrase: \"}");

  std::string report_text;
  ASSERT_EQ(run({"eval", "--checkpoint", fx().ckpt_path, "--tokenizer", fx().tok_path, "--task",
                 "retrieval", "--instructions", tmp("ev_instr.json"), "--queries",
                 tmp("ev_q.jsonl"), "--corpus", tmp("ev_c.jsonl"), "--qrels", tmp("ev_r.jsonl"),
                 "--out", tmp("ev_report.json")},
                &report_text),
            0);
  const auto report = nlohmann::json::parse(read_file(tmp("ev_report.json")));
  EXPECT_EQ(report.at("metric").get<std::string>(), "ndcg@10");
  EXPECT_EQ(report.at("family").get<std::string>(), "retrieval");

  // identical pairs make the Spearman target variance zero -> exit 4
  write_file(tmp("ev_pairs.jsonl"),
             "{\"a\":\"same text\",\"b\":\"same text\",\"score\":1.0}\n"
             "{\"a\":\"same text\",\"b\":\"same text\",\"score\":1.0}\n");
  write_file(tmp("ev_instr2.json"), "{\"sts\":\"compare: \"}");
  EXPECT_EQ(run({"eval", "--checkpoint", fx().ckpt_path, "--tokenizer", fx().tok_path, "--task",
                 "sts", "--instructions", tmp("ev_instr2.json"), "--pairs", tmp("ev_pairs.jsonl")}),
            4);
  for (const auto& f : {"ev_q.jsonl", "ev_c.jsonl", "ev_r.jsonl", "ev_instr.json",
                        "ev_report.json", "ev_pairs.jsonl", "ev_instr2.json"})
    std::remove(tmp(f).c_str());
}

TEST(Cli, BenchEmitsCostCsv) {
  const auto corpus = tmp("bench_corpus.txt");
  const auto out = tmp("bench.csv");
  write_file(corpus, "alpha beta gamma\ndelta epsilon\nzeta eta theta iota\n");
  ASSERT_EQ(run({"bench", "--checkpoint", fx().ckpt_path, "--tokenizer", fx().tok_path,
                 "--corpus", corpus, "--methods", "plain,causal2vec,echo", "--reps", "20",
                 "--out", out}),
            0);
  std::istringstream csv(read_file(out));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "method,dataset,mean_seq_len,median_ms,reduction_vs_baseline");
  std::size_t rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 3u);
  EXPECT_EQ(run({"bench", "--checkpoint", fx().ckpt_path, "--tokenizer", fx().tok_path,
                 "--corpus", corpus, "--methods", "icl"}),
            3);  // icl without --icl-examples
  std::remove(corpus.c_str());
  std::remove(out.c_str());
}

TEST(Cli, AblateCtxCountRunsEndToEnd) {
  const auto out = tmp("ablate.csv");
  ASSERT_EQ(run({"ablate", "--axis", "ctx_count", "--pairs", "48", "--heldout", "12", "--steps",
                 "4", "--seed", "3", "--out", out}),
            0);
  std::istringstream csv(read_file(out));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "axis,value,mean_seq_len,acc_at_1,final_loss");
  std::vector<double> seq_lens;
  std::vector<std::string> values;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string axis, value, len, acc, loss;
    std::getline(row, axis, ',');
    std::getline(row, value, ',');
    std::getline(row, len, ',');
    std::getline(row, acc, ',');
    std::getline(row, loss, ',');
    EXPECT_EQ(axis, "ctx_count");
    values.push_back(value);
    seq_lens.push_back(std::stod(len));
    const double a = std::stod(acc);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  ASSERT_EQ(values, (std::vector<std::string>{"1", "2", "4", "8"}));
  // the contextual rows are the only difference between variants
  EXPECT_NEAR(seq_lens[1] - seq_lens[0], 1.0, 1e-9);
  EXPECT_NEAR(seq_lens[2] - seq_lens[0], 3.0, 1e-9);
  EXPECT_NEAR(seq_lens[3] - seq_lens[0], 7.0, 1e-9);
  std::remove(out.c_str());
}

}  // namespace
