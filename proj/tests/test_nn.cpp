#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ctxvec/nn.hpp"
#include "ctxvec/ops.hpp"
#include "testutil.hpp"

using ctxvec::BlockConfig;
using ctxvec::MaskMode;
using ctxvec::Tensor;
using testutil::make_rng;

namespace {

BlockConfig tiny_cfg(std::size_t d = 4, std::size_t heads = 2, std::size_t maxpos = 32) {
  BlockConfig cfg;
  cfg.d_model = d;
  cfg.n_heads = heads;
  cfg.ffn_mult = 2;
  cfg.max_positions = maxpos;
  return cfg;
}

TEST(Attention, SingleTokenIsValueThenOutputProjection) {
  auto rng = make_rng(21);
  auto attn = ctxvec::MultiHeadAttention<double>::make(tiny_cfg(), rng);
  auto x = testutil::randn<double>({1, 4}, rng);
  auto got = attn(x, MaskMode::causal);

  ctxvec::NoGradGuard guard;
  auto expect = attn.wo(attn.wv(x));  // softmax over a single key is 1
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(got.at(0, j), expect.at(0, j), 1e-12);
}

TEST(Attention, UniformWeightsGivePrefixMeans) {
  // Zero query/key projections force uniform causal weights; with identity
  // value/output projections row i becomes the mean of rows 0..i.
  auto rng = make_rng(22);
  auto cfg = tiny_cfg(4, 1);
  auto attn = ctxvec::MultiHeadAttention<double>::make(cfg, rng);
  std::fill(attn.wq.w.data().begin(), attn.wq.w.data().end(), 0.0);
  std::fill(attn.wk.w.data().begin(), attn.wk.w.data().end(), 0.0);
  std::fill(attn.wv.w.data().begin(), attn.wv.w.data().end(), 0.0);
  std::fill(attn.wo.w.data().begin(), attn.wo.w.data().end(), 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    attn.wv.w.mut(i, i) = 1.0;
    attn.wo.w.mut(i, i) = 1.0;
  }
  auto x = testutil::randn<double>({5, 4}, rng);
  auto y = attn(x, MaskMode::causal);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double mean = 0.0;
      for (std::size_t p = 0; p <= i; ++p) mean += x.at(p, j);
      mean /= double(i + 1);
      EXPECT_NEAR(y.at(i, j), mean, 1e-12);
    }
}

TEST(Attention, CausalPrefixInvarianceBidirectionalViolation) {
  auto rng = make_rng(23);
  auto cfg = tiny_cfg(8, 2);
  auto stack = ctxvec::TransformerStack<float>::make(cfg, 2, rng);
  auto x = testutil::randn<float>({10, 8}, rng);
  ctxvec::NoGradGuard guard;
  auto full = stack(x, MaskMode::causal);
  auto prefix = stack(ctxvec::slice_rows(x, 0, 6), MaskMode::causal);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      EXPECT_NEAR(prefix.at(i, j), full.at(i, j), 1e-6f);

  auto full_bi = stack(x, MaskMode::bidirectional);
  auto prefix_bi = stack(ctxvec::slice_rows(x, 0, 6), MaskMode::bidirectional);
  double max_delta = 0.0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      max_delta = std::max(max_delta, std::abs(double(prefix_bi.at(i, j) - full_bi.at(i, j))));
  EXPECT_GT(max_delta, 1e-4);
}

TEST(Attention, RejectsOverlongInput) {
  auto rng = make_rng(24);
  auto attn = ctxvec::MultiHeadAttention<float>::make(tiny_cfg(4, 2, 8), rng);
  auto x = Tensor<float>::zeros({9, 4});
  EXPECT_THROW(attn(x, MaskMode::causal), ctxvec::CapacityError);
}

TEST(FeedForward, ZeroWeightsGiveZeroOutput) {
  auto rng = make_rng(25);
  auto ffn = ctxvec::FeedForward<double>::make(tiny_cfg(), rng);
  std::fill(ffn.expand.w.data().begin(), ffn.expand.w.data().end(), 0.0);
  std::fill(ffn.contract.w.data().begin(), ffn.contract.w.data().end(), 0.0);
  auto y = ffn(testutil::randn<double>({3, 4}, rng));
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(FeedForward, MatchesHandComputedTinyCase) {
  auto rng = make_rng(26);
  BlockConfig cfg = tiny_cfg(2, 1);
  cfg.ffn_mult = 1;
  auto ffn = ctxvec::FeedForward<double>::make(cfg, rng);
  // expand = identity with bias [0.5, 0.5]; contract = 2*identity with bias [0.1, 0.1]
  ffn.expand.w.data() = {1, 0, 0, 1};
  ffn.expand.b->data() = {0.5, 0.5};
  ffn.contract.w.data() = {2, 0, 0, 2};
  ffn.contract.b->data() = {0.1, 0.1};
  auto y = ffn(Tensor<double>::row({1.0, -1.0}));
  auto phi = [](double v) { return 0.5 * std::erfc(-v / std::sqrt(2.0)); };
  EXPECT_NEAR(y.at(0, 0), 2.0 * (1.5 * phi(1.5)) + 0.1, 1e-12);
  EXPECT_NEAR(y.at(0, 1), 2.0 * (-0.5 * phi(-0.5)) + 0.1, 1e-12);
}

TEST(Lora, FreshAdapterIsBitIdentical) {
  auto rng = make_rng(27);
  auto cfg = tiny_cfg();
  auto attn = ctxvec::MultiHeadAttention<double>::make(cfg, rng);
  auto x = testutil::randn<double>({5, 4}, rng);
  ctxvec::NoGradGuard guard;
  auto base = attn(x, MaskMode::causal);
  attn.attach_lora(2, 1.0, {"q", "k", "v", "o"}, rng);
  auto with_fresh = attn(x, MaskMode::causal);
  for (std::size_t i = 0; i < base.numel(); ++i)
    EXPECT_EQ(base.data()[i], with_fresh.data()[i]);
}

TEST(Lora, ScalingFollowsAlphaOverRank) {
  auto rng = make_rng(28);
  auto a32 = ctxvec::LoraAdapter<float>::make(8, 8, 64, 32.0f, "q", rng);
  auto a128 = ctxvec::LoraAdapter<float>::make(8, 8, 64, 128.0f, "q", rng);
  EXPECT_FLOAT_EQ(a32.scaling(), 0.5f);
  EXPECT_FLOAT_EQ(a128.scaling(), 2.0f);
}

TEST(Lora, NonZeroBChangesOutputByScaledDelta) {
  auto rng = make_rng(29);
  auto x = testutil::randn<double>({3, 4}, rng);
  auto base = testutil::randn<double>({3, 4}, rng);
  auto ad = ctxvec::LoraAdapter<double>::make(4, 4, 2, 4.0, "q", rng);
  for (auto& v : ad.B.data()) v = 0.25;
  auto y = ctxvec::lora_apply(base, x, ad);
  ctxvec::NoGradGuard guard;
  auto delta = ctxvec::matmul(ctxvec::matmul(x, ctxvec::transpose(ad.A)),
                              ctxvec::transpose(ad.B));
  for (std::size_t i = 0; i < y.numel(); ++i)
    EXPECT_NEAR(y.data()[i], base.data()[i] + 2.0 * delta.data()[i], 1e-12);
}

TEST(Positions, BoundaryAndDeterminism) {
  auto rng = make_rng(30);
  auto pos = ctxvec::PositionTable<float>::make(16, 4, rng);
  EXPECT_EQ(pos(0).shape(), (ctxvec::Shape{0, 4}));
  auto a = pos(16);
  auto b = pos(16);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
  EXPECT_THROW(pos(17), ctxvec::CapacityError);
}

TEST(BlockConfig, RejectsIndivisibleHeads) {
  BlockConfig cfg;
  cfg.d_model = 10;
  cfg.n_heads = 4;
  EXPECT_THROW(cfg.validate(), ctxvec::ConfigError);
}

TEST(GradCheck, AttentionWeightsAndInput) {
  auto rng = make_rng(31);
  auto cfg = tiny_cfg();
  auto attn = ctxvec::MultiHeadAttention<double>::make(cfg, rng);
  auto x = testutil::randn<double>({3, 4}, rng);
  for (MaskMode mask : {MaskMode::causal, MaskMode::bidirectional}) {
    auto rep = testutil::grad_check(
        {x, attn.wq.w, attn.wk.w, attn.wv.w, attn.wo.w},
        [&](auto& in) { return attn(in[0], mask); }, rng);
    EXPECT_LT(rep.max_rel_err, 1e-6) << ctxvec::mask_mode_name(mask);
  }
}

TEST(GradCheck, AttentionWithActiveLora) {
  auto rng = make_rng(32);
  auto cfg = tiny_cfg();
  auto attn = ctxvec::MultiHeadAttention<double>::make(cfg, rng);
  attn.attach_lora(2, 4.0, {"q", "v"}, rng);
  for (auto& [name, ad] : attn.lora)
    for (auto& v : ad.B.data()) v = 0.1;  // make the low-rank path active
  auto x = testutil::randn<double>({3, 4}, rng);
  auto rep = testutil::grad_check(
      {x, attn.lora.at("q").A, attn.lora.at("q").B, attn.lora.at("v").A, attn.lora.at("v").B},
      [&](auto& in) { return attn(in[0], MaskMode::causal); }, rng);
  EXPECT_LT(rep.max_rel_err, 1e-6);
}

TEST(GradCheck, FeedForwardAllParams) {
  auto rng = make_rng(33);
  auto ffn = ctxvec::FeedForward<double>::make(tiny_cfg(), rng);
  auto x = testutil::randn<double>({3, 4}, rng);
  auto rep = testutil::grad_check(
      {x, ffn.expand.w, *ffn.expand.b, ffn.contract.w, *ffn.contract.b},
      [&](auto& in) { return ffn(in[0]); }, rng);
  EXPECT_LT(rep.max_rel_err, 1e-6);
}

TEST(GradCheck, FullBlockThroughStack) {
  auto rng = make_rng(34);
  auto stack = ctxvec::TransformerStack<double>::make(tiny_cfg(), 1, rng);
  auto x = testutil::randn<double>({4, 4}, rng);
  auto rep = testutil::grad_check(
      {x}, [&](auto& in) { return stack(in[0], MaskMode::causal); }, rng);
  EXPECT_LT(rep.max_rel_err, 1e-6);
}

TEST(ParamList, NamesAreUniqueAndStable) {
  auto rng = make_rng(35);
  auto stack = ctxvec::TransformerStack<float>::make(tiny_cfg(), 2, rng);
  ctxvec::ParamList<float> params;
  stack.append_params(params, "enc");
  EXPECT_EQ(params.size(), 2 * (2 + 4 + 2 + 4) + 2);  // per block: 2 LN pairs, 4 attn, 4 ffn
  for (std::size_t i = 1; i < params.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) EXPECT_NE(params[i].first, params[j].first);
}

}  // namespace
