#include <gtest/gtest.h>

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "ctxvec/tokenizer.hpp"

using ctxvec::Tokenizer;

namespace {

std::vector<std::string> tiny_corpus() {
  return {"the cat sat on the mat", "the dog sat on the log", "cats and dogs", "the the the"};
}

TEST(Tokenizer, MinimalVocabIsByteFallback) {
  auto tok = Tokenizer::train(tiny_corpus(), 260);
  EXPECT_EQ(tok.merge_count(), 0u);
  EXPECT_EQ(tok.vocab_size(), 260u);
  auto ids = tok.encode("abc");
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(ids[0], 97);
  EXPECT_EQ(ids[1], 98);
  EXPECT_EQ(ids[2], 99);
}

TEST(Tokenizer, FirstMergeIsMostFrequentPair) {
  auto tok = Tokenizer::train({"aaaa", "aa"}, 261);
  ASSERT_EQ(tok.merge_count(), 1u);
  EXPECT_EQ(tok.merges()[0], std::make_pair(97, 97));
  // "aaaa" -> two merged tokens, "aaa" -> merged + single byte
  EXPECT_EQ(tok.encode("aaaa").size(), 2u);
  EXPECT_EQ(tok.encode("aaa").size(), 2u);
}

TEST(Tokenizer, FrequencyTiesBreakOnByteExpansion) {
  // "ab" and "cd" both occur twice; the lexicographically smaller pair wins.
  auto tok = Tokenizer::train({"abab", "cdcd"}, 261);
  ASSERT_EQ(tok.merge_count(), 1u);
  EXPECT_EQ(tok.merges()[0], std::make_pair(97, 98));
}

TEST(Tokenizer, DeterministicAcrossRuns) {
  auto a = Tokenizer::train(tiny_corpus(), 300);
  auto b = Tokenizer::train(tiny_corpus(), 300);
  EXPECT_EQ(a.merges(), b.merges());
  EXPECT_EQ(a.content_hash(), b.content_hash());
}

TEST(Tokenizer, RoundTripsArbitraryByteStrings) {
  auto tok = Tokenizer::train(tiny_corpus(), 300);
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len_dist(0, 64);
  std::uniform_int_distribution<int> byte_dist(0, 255);
  for (int rep = 0; rep < 200; ++rep) {
    std::string s;
    const int len = len_dist(rng);
    for (int i = 0; i < len; ++i) s.push_back(static_cast<char>(byte_dist(rng)));
    EXPECT_EQ(tok.decode(tok.encode(s)), s);
  }
  EXPECT_TRUE(tok.encode("").empty());
}

TEST(Tokenizer, SpecialsOccupyLastIds) {
  auto tok = Tokenizer::train(tiny_corpus(), 280);
  const auto& sp = tok.specials();
  const auto base = static_cast<std::int32_t>(256 + tok.merge_count());
  EXPECT_EQ(sp.pad, base);
  EXPECT_EQ(sp.eos, base + 1);
  EXPECT_EQ(sp.inst_open, base + 2);
  EXPECT_EQ(sp.inst_close, base + 3);
  EXPECT_EQ(tok.expansion(sp.inst_open), "[INST]");
  EXPECT_EQ(tok.expansion(sp.inst_close), "[/INST]");
  EXPECT_EQ(tok.vocab_size(), 256 + tok.merge_count() + 4);
}

TEST(Tokenizer, SaveLoadPreservesBehavior) {
  auto tok = Tokenizer::train(tiny_corpus(), 300);
  const std::string path = ::testing::TempDir() + "/tok.json";
  tok.save(path);
  auto back = Tokenizer::load(path);
  EXPECT_EQ(back.merges(), tok.merges());
  EXPECT_EQ(back.content_hash(), tok.content_hash());
  const std::string sample = "the cat and the dog";
  EXPECT_EQ(back.encode(sample), tok.encode(sample));
  std::remove(path.c_str());
}

TEST(Tokenizer, RejectsBadInputs) {
  EXPECT_THROW(Tokenizer::train({}, 300), ctxvec::ConfigError);
  EXPECT_THROW(Tokenizer::train({"x"}, 259), ctxvec::ConfigError);
  auto tok = Tokenizer::train(tiny_corpus(), 260);
  EXPECT_THROW(tok.expansion(9999), ctxvec::IndexError);
  nlohmann::json bad = {{"format_version", 99}, {"merges", nlohmann::json::array()}};
  EXPECT_THROW(Tokenizer::from_json(bad), ctxvec::IoError);
}

TEST(Tokenizer, VocabMapCoversAllIds) {
  auto tok = Tokenizer::train(tiny_corpus(), 270);
  auto v = tok.vocab();
  // distinct expansions may collide only if a merge reproduces a raw byte
  // string, which cannot happen: merges always have length >= 2
  EXPECT_EQ(v.size(), tok.vocab_size());
  EXPECT_EQ(v.at("[EOS]"), tok.specials().eos);
}

}  // namespace
