#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ctxvec/checkpoint.hpp"
#include "testutil.hpp"

using ctxvec::Embedder;
using ctxvec::ModelConfig;
using ctxvec::PoolingMode;
using ctxvec::Tokenizer;
using ctxvec::Trainability;

namespace {

std::string tmp_path(const std::string& name) {
  return ::testing::TempDir() + "ctxvec_ckpt_" + name;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

Tokenizer shared_tok() {
  static Tokenizer tok = Tokenizer::train({"checkpoint corpus text", "some more words here"}, 262);
  return tok;
}

ModelConfig tiny_cfg() {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.dec_layers = 1;
  cfg.dec_heads = 2;
  cfg.max_positions = 64;
  cfg.d_enc = 8;
  cfg.enc_layers = 1;
  cfg.enc_heads = 2;
  cfg.ffn_mult = 2;
  return cfg;
}

template <typename T>
void expect_params_bitwise_equal(Embedder<T>& a, Embedder<T>& b) {
  auto pa = a.all_params();
  auto pb = b.all_params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].first, pb[i].first);
    ASSERT_EQ(pa[i].second.shape(), pb[i].second.shape()) << pa[i].first;
    const auto& da = pa[i].second.data();
    const auto& db = pb[i].second.data();
    EXPECT_EQ(std::memcmp(da.data(), db.data(), da.size() * sizeof(T)), 0) << pa[i].first;
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto model = Embedder<double>::make(tiny_cfg(), shared_tok());
  const auto path = tmp_path("round.bin");
  ctxvec::save_checkpoint(model, path);
  auto back = ctxvec::load_checkpoint<double>(path, shared_tok());
  expect_params_bitwise_equal(model, back);

  ctxvec::NoGradGuard guard;
  const auto a = model.embed_text("round trip check").vector.data();
  const auto b = back.embed_text("round trip check").vector.data();
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
  std::remove(path.c_str());
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  auto model = Embedder<float>::make(tiny_cfg(), shared_tok());
  const auto p1 = tmp_path("first.bin");
  const auto p2 = tmp_path("second.bin");
  ctxvec::save_checkpoint(model, p1);
  auto back = ctxvec::load_checkpoint<float>(p1, shared_tok());
  ctxvec::save_checkpoint(back, p2);
  EXPECT_EQ(read_bytes(p1), read_bytes(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST(Checkpoint, QueryBankAndAdaptersRoundTrip) {
  auto cfg = tiny_cfg();
  cfg.use_query_bank = true;
  cfg.ctx_count = 4;
  cfg.pooling = PoolingMode::mean;
  cfg.decoder_training = Trainability::lora;
  auto model = Embedder<double>::make(cfg, shared_tok());
  bool has_bank = false, has_lora = false;
  for (auto& [name, p] : model.all_params()) {
    has_bank = has_bank || name.rfind("query_bank", 0) == 0;
    has_lora = has_lora || name.find(".lora_") != std::string::npos;
  }
  ASSERT_TRUE(has_bank);
  ASSERT_TRUE(has_lora);

  const auto path = tmp_path("bank.bin");
  ctxvec::save_checkpoint(model, path);
  auto back = ctxvec::load_checkpoint<double>(path, shared_tok());
  expect_params_bitwise_equal(model, back);
  std::remove(path.c_str());
}

TEST(Checkpoint, TamperedPayloadByteFailsChecksum) {
  auto model = Embedder<double>::make(tiny_cfg(), shared_tok());
  const auto path = tmp_path("tamper.bin");
  ctxvec::save_checkpoint(model, path);
  auto bytes = read_bytes(path);
  bytes.back() = char(bytes.back() ^ 0x40);
  write_bytes(path, bytes);
  try {
    ctxvec::load_checkpoint<double>(path, shared_tok());
    FAIL() << "tampered checkpoint loaded";
  } catch (const ctxvec::IoError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("tensor '"), std::string::npos) << e.what();
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, TruncatedPayloadIsIntegrityError) {
  auto model = Embedder<double>::make(tiny_cfg(), shared_tok());
  const auto path = tmp_path("trunc.bin");
  ctxvec::save_checkpoint(model, path);
  auto bytes = read_bytes(path);
  write_bytes(path, bytes.substr(0, bytes.size() - 9));
  try {
    ctxvec::load_checkpoint<double>(path, shared_tok());
    FAIL() << "truncated checkpoint loaded";
  } catch (const ctxvec::IoError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos) << e.what();
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, VersionBumpIsExplicitIncompatibility) {
  auto model = Embedder<double>::make(tiny_cfg(), shared_tok());
  const auto path = tmp_path("version.bin");
  ctxvec::save_checkpoint(model, path);
  auto bytes = read_bytes(path);
  bytes[4] = char(2);
  write_bytes(path, bytes);
  try {
    ctxvec::load_checkpoint<double>(path, shared_tok());
    FAIL() << "future-version checkpoint loaded";
  } catch (const ctxvec::IoError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, NotACheckpointFile) {
  const auto path = tmp_path("garbage.bin");
  write_bytes(path, "not a model");
  EXPECT_THROW(ctxvec::load_checkpoint<double>(path, shared_tok()), ctxvec::IoError);
  EXPECT_THROW(ctxvec::load_checkpoint<double>(tmp_path("nonexistent.bin"), shared_tok()),
               ctxvec::IoError);
  std::remove(path.c_str());
}

TEST(Checkpoint, DifferentTokenizerRejected) {
  auto model = Embedder<double>::make(tiny_cfg(), shared_tok());
  const auto path = tmp_path("tok.bin");
  ctxvec::save_checkpoint(model, path);
  auto other = Tokenizer::train({"wholly different corpus", "unrelated merge table"}, 262);
  auto victim = Embedder<double>::make(tiny_cfg(), other);
  try {
    ctxvec::load_checkpoint_into(victim, path);
    FAIL() << "foreign tokenizer accepted";
  } catch (const ctxvec::IoError& e) {
    EXPECT_NE(std::string(e.what()).find("tokenizer"), std::string::npos) << e.what();
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, MismatchedDimsNameTheTensor) {
  auto model = Embedder<double>::make(tiny_cfg(), shared_tok());
  const auto path = tmp_path("dims.bin");
  ctxvec::save_checkpoint(model, path);
  auto cfg = tiny_cfg();
  cfg.d_model = 24;
  cfg.dec_heads = 3;
  auto wider = Embedder<double>::make(cfg, shared_tok());
  try {
    ctxvec::load_checkpoint_into(wider, path);
    FAIL() << "mismatched shapes loaded";
  } catch (const ctxvec::DimError& e) {
    EXPECT_NE(std::string(e.what()).find("tensor '"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("shape"), std::string::npos) << e.what();
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, ParameterSetMismatchesAreNamed) {
  auto model = Embedder<double>::make(tiny_cfg(), shared_tok());
  const auto path = tmp_path("params.bin");
  ctxvec::save_checkpoint(model, path);

  auto cfg = tiny_cfg();
  cfg.decoder_training = Trainability::lora;
  auto with_adapters = Embedder<double>::make(cfg, shared_tok());
  try {
    ctxvec::load_checkpoint_into(with_adapters, path);
    FAIL() << "adapter tensors silently skipped";
  } catch (const ctxvec::IoError& e) {
    EXPECT_NE(std::string(e.what()).find("missing from file"), std::string::npos) << e.what();
  }

  const auto lora_path = tmp_path("params_lora.bin");
  ctxvec::save_checkpoint(with_adapters, lora_path);
  try {
    ctxvec::load_checkpoint_into(model, lora_path);
    FAIL() << "unknown stored tensors silently dropped";
  } catch (const ctxvec::IoError& e) {
    EXPECT_NE(std::string(e.what()).find("not present in model"), std::string::npos) << e.what();
  }
  std::remove(path.c_str());
  std::remove(lora_path.c_str());
}

TEST(Checkpoint, DtypeMismatchRejected) {
  auto model = Embedder<double>::make(tiny_cfg(), shared_tok());
  const auto path = tmp_path("dtype.bin");
  ctxvec::save_checkpoint(model, path);
  try {
    ctxvec::load_checkpoint<float>(path, shared_tok());
    FAIL() << "f64 payload loaded into f32 model";
  } catch (const ctxvec::IoError& e) {
    EXPECT_NE(std::string(e.what()).find("dtype"), std::string::npos) << e.what();
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, OffsetsAreContiguousInHeaderOrder) {
  auto model = Embedder<double>::make(tiny_cfg(), shared_tok());
  const auto path = tmp_path("offsets.bin");
  ctxvec::save_checkpoint(model, path);
  const auto raw = ctxvec::detail::read_checkpoint_file(path);
  std::size_t expected = 0;
  for (const auto& [name, entry] : raw.header.at("tensors").items()) {
    EXPECT_EQ(entry.at("byte_offset").get<std::size_t>(), expected) << name;
    std::size_t numel = 1;
    for (auto d : entry.at("shape").get<std::vector<std::size_t>>()) numel *= d;
    expected += numel * sizeof(double);
  }
  EXPECT_EQ(raw.payload.size(), expected);
  std::remove(path.c_str());
}

TEST(TokenizerHash, StableAndSensitive) {
  EXPECT_EQ(ctxvec::tokenizer_hash(shared_tok()), ctxvec::tokenizer_hash(shared_tok()));
  auto other = Tokenizer::train({"zzz yyy xxx www vvv", "uuu ttt sss"}, 262);
  EXPECT_NE(ctxvec::tokenizer_hash(shared_tok()), ctxvec::tokenizer_hash(other));
}

}  // namespace
