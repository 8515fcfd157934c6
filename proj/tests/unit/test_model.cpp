#include <gtest/gtest.h>

#include "medctx/core/errors.hpp"
#include "medctx/model/decoder.hpp"
#include "medctx/model/fusion.hpp"
#include "medctx/model/medctx_model.hpp"
#include "medctx/model/text_encoder.hpp"
#include "medctx/model/visual_encoder.hpp"
#include "medctx/nn/layers.hpp"
#include "medctx/train/batch.hpp"
#include "support.hpp"

using namespace medctx;
using namespace medctx::model;

namespace {

double max_abs(const torch::Tensor& t) { return t.abs().max().item<double>(); }

void copy_parameters(torch::nn::Module& from, torch::nn::Module& to) {
  torch::NoGradGuard guard;
  auto src = from.named_parameters();
  for (auto& p : to.named_parameters()) p.value().copy_(src[p.key()]);
}

}  // namespace

TEST(Attention, MaskedKeysGetZeroWeight) {
  torch::manual_seed(1);
  nn::MultiHeadAttention attn(8, 2);
  const auto q = torch::randn({1, 3, 8}), kv = torch::randn({1, 5, 8});
  auto valid = torch::tensor({true, true, true, false, false}).unsqueeze(0);
  auto kv2 = kv.clone();
  kv2.slice(1, 3, 5).normal_();
  const auto a = attn->forward(q, kv, valid).output, b = attn->forward(q, kv2, valid).output;
  EXPECT_LT(max_abs(a - b), 1e-6);
}

TEST(WindowBlock, FullWindowEqualsGlobalAttention) {
  torch::manual_seed(2);
  nn::WindowBlock window(16, 2, 4, 4, 0, 2.0, 0.0);
  nn::TransformerBlock global(16, 2, 2.0, 0.0);
  copy_parameters(*window, *global);
  const auto x = torch::randn({2, 16, 16});
  EXPECT_LT(max_abs(window->forward(x) - global->forward(x)), 1e-5);
}

TEST(WindowBlock, PerturbationStaysInsideItsWindow) {
  torch::manual_seed(3);
  nn::WindowBlock block(8, 2, 4, 2, 0, 2.0, 0.0);
  const auto x = torch::randn({1, 16, 8});
  auto y = x.clone();
  // token (0,0) belongs to the top-left 2x2 window: tokens 0, 1, 4, 5
  y.index_put_({0, 0}, torch::randn({8}));
  const auto diff = (block->forward(x) - block->forward(y)).abs().amax({0, 2});
  for (int t = 0; t < 16; ++t) {
    const bool inside = t == 0 || t == 1 || t == 4 || t == 5;
    if (!inside) {
      EXPECT_EQ(diff[t].item<float>(), 0.0f) << "token " << t;
    }
  }
  EXPECT_GT(diff[1].item<float>(), 0.0f);
}

TEST(WindowBlock, ShiftedBlockDoesNotMixAcrossTheWrapSeam) {
  torch::manual_seed(4);
  nn::WindowBlock block(8, 2, 4, 2, 1, 2.0, 0.0);
  const auto x = torch::randn({1, 16, 8});
  auto y = x.clone();
  y.index_put_({0, 0}, torch::randn({8}));  // top-left corner token
  const auto diff = (block->forward(x) - block->forward(y)).abs().amax({0, 2});
  // after a cyclic shift by one, the corner shares a window with the far
  // corners, but masking keeps those regions apart
  for (int t : {3, 12, 15}) EXPECT_EQ(diff[t].item<float>(), 0.0f) << "token " << t;
}

TEST(VisualEncoder, DefaultShapes) {
  const EncoderConfig cfg;
  BranchEncoder global(cfg, false), local(cfg, true);
  torch::NoGradGuard guard;
  const auto image = torch::randn({2, 1, 224, 224});
  for (auto* branch : {&global, &local}) {
    const auto layers = (*branch)->forward(image);
    ASSERT_EQ(layers.size(), 4u);
    for (const auto& l : layers) EXPECT_EQ(l.sizes(), (std::vector<std::int64_t>{2, 196, 384}));
  }
}

TEST(VisualEncoder, BatchItemsAreIndependent) {
  auto cfg = ModelConfig::tiny().encoder;
  VisualEncoder enc(cfg, true);
  enc->eval();
  torch::NoGradGuard guard;
  const auto image = torch::randn({2, 1, 32, 32});
  const auto a = enc->forward(image).tokens;
  const auto b = enc->forward(image.flip(0)).tokens;
  EXPECT_LT(max_abs(a - b.flip(0)), 1e-5);
}

TEST(VisualEncoder, ZeroImageAndZeroProjectionGivePositions) {
  auto cfg = ModelConfig::tiny().encoder;
  BranchEncoder branch(cfg, false);
  torch::NoGradGuard guard;
  branch->patch_embed->weight.zero_();
  branch->patch_embed->bias.zero_();
  const auto tokens = branch->embed(torch::zeros({2, 1, 32, 32}));
  EXPECT_EQ(max_abs(tokens - branch->pos_embed.expand_as(tokens)), 0.0);
}

TEST(VisualEncoder, RejectsWrongImageSize) {
  VisualEncoder enc(ModelConfig::tiny().encoder, true);
  EXPECT_THROW(enc->forward(torch::zeros({1, 1, 30, 30})), ShapeError);
}

TEST(FuseBranches, Limits) {
  torch::manual_seed(5);
  const auto zg = torch::randn({2, 4, 6}, torch::kDouble), zl = torch::randn({2, 4, 6}, torch::kDouble);
  GateParams zero{torch::zeros({12, 6}, torch::kDouble), torch::zeros({6}, torch::kDouble)};
  EXPECT_LT(max_abs(fuse_branches(zg, zl, zero) - 0.5 * (zg + zl)), 1e-15);
  GateParams saturated{torch::zeros({12, 6}, torch::kDouble), torch::full({6}, 50.0, torch::kDouble)};
  EXPECT_LT(max_abs(fuse_branches(zg, zl, saturated) - zg), 1e-9);
  GateParams random{torch::randn({12, 6}, torch::kDouble), torch::randn({6}, torch::kDouble)};
  EXPECT_LT(max_abs(fuse_branches(zg, zg, random) - zg), 1e-12);
}

TEST(TextEncoder, PaddedTailDoesNotLeak) {
  torch::manual_seed(6);
  TextEncoder enc(text::Vocabulary::builtin().size(), 16, 1, 2, 32, 0.0);
  enc->eval();
  auto a = text::tokenize_report("BI-RADS 3: Probably benign finding.");
  auto b = a;
  const int n = a.length();
  for (int i = n; i < text::kMaxTokens; ++i) b.ids[i] = 57;  // flags stay 0
  torch::NoGradGuard guard;
  const auto ea = enc->forward(to_token_batch({a})), eb = enc->forward(to_token_batch({b}));
  EXPECT_EQ(ea.sizes(), (std::vector<std::int64_t>{1, 128, 32}));
  EXPECT_LT(max_abs(ea.slice(1, 0, n) - eb.slice(1, 0, n)), 1e-6);
  const auto all_pad = enc->forward(to_token_batch({text::tokenize_report("")}));
  EXPECT_TRUE(torch::isfinite(all_pad).all().item<bool>());
}

TEST(StructuredEmbedding, RowsAreIndependentLookups) {
  StructuredEmbedding emb(12);
  StructuredBatch a{torch::tensor({2}), torch::tensor({1}), torch::tensor({0})};
  StructuredBatch b{torch::tensor({2}), torch::tensor({1}), torch::tensor({1})};
  const auto ea = emb->forward(a), eb = emb->forward(b);
  EXPECT_EQ(ea.sizes(), (std::vector<std::int64_t>{1, 3, 12}));
  EXPECT_TRUE(torch::equal(ea, emb->forward(a)));
  EXPECT_TRUE(torch::equal(ea.slice(1, 0, 2), eb.slice(1, 0, 2)));
  EXPECT_FALSE(torch::equal(ea[0][2], eb[0][2]));
}

TEST(Combine, ConcatenatesAlongTokens) {
  const auto t = torch::randn({2, 128, 8}), s = torch::randn({2, 3, 8});
  const auto c = combine(t, s);
  EXPECT_EQ(c.sizes(), (std::vector<std::int64_t>{2, 131, 8}));
  EXPECT_TRUE(torch::equal(c.slice(1, 0, 128), t));
  EXPECT_TRUE(torch::equal(c.slice(1, 128, 131), s));
}

TEST(Fusion, GateProperties) {
  torch::manual_seed(7);
  CrossModalFusion f(8, 2, 6);
  torch::NoGradGuard guard;
  const auto V = torch::randn({2, 5, 8}) * 10, T = torch::randn({2, 7, 8}) * 10;
  const auto gate = f->compute_unc_gate(V, T);
  EXPECT_EQ(gate.sizes(), (std::vector<std::int64_t>{2, 5, 1}));
  EXPECT_GT(gate.min().item<float>(), 0.0f);
  EXPECT_LT(gate.max().item<float>(), 1.0f);
  const auto perm = torch::randperm(7);
  EXPECT_LT(max_abs(gate - f->compute_unc_gate(V, T.index_select(1, perm))), 1e-6);
  f->set_constant_gate(0.0);
  EXPECT_LT(max_abs(f->compute_unc_gate(V, T) - 0.5), 1e-7);
}

TEST(Fusion, ConstantTextCollapsesAttention) {
  torch::manual_seed(8);
  CrossModalFusion f(8, 2, 6);
  f->eval();
  torch::NoGradGuard guard;
  const auto V = torch::randn({1, 5, 8});
  const auto t = torch::randn({8});
  const auto T = t.expand({1, 131, 8}).contiguous();
  const auto proj = f->cross_attn->out_proj->forward(f->cross_attn->v_proj->forward(t));
  const auto att = f->attend(V, T);
  EXPECT_LT(max_abs(att - proj.expand_as(att)), 1e-5);
  const auto fused = f->cross_modal_fuse(V, T);
  const auto a = fused.unc_gate;
  EXPECT_LT(max_abs(fused.values - (a * V + (1 - a) * proj)), 1e-5);
  EXPECT_LT(max_abs(fused.attention_map.sum(1) - 1.0), 1e-5);
}

TEST(Fusion, GateLimits) {
  torch::manual_seed(9);
  CrossModalFusion f(8, 2, 6);
  torch::NoGradGuard guard;
  const auto V = torch::randn({2, 5, 8}), T = torch::randn({2, 131, 8});
  EXPECT_LT(max_abs(f->cross_modal_fuse(V, T, torch::ones({2, 5, 1})).values - V), 1e-6);
  EXPECT_LT(max_abs(f->cross_modal_fuse(V, T, torch::zeros({2, 5, 1})).values - f->attend(V, T)), 1e-6);
}

TEST(Decoder, ShapesAndZeroHeads) {
  auto cfg = ModelConfig::tiny();
  MultiTaskDecoder dec(cfg);
  dec->zero_heads();
  dec->eval();
  torch::NoGradGuard guard;
  const auto b = dec->forward(torch::randn({2, 16, cfg.encoder.embed_dim}));
  EXPECT_EQ(b.seg_logits.sizes(), (std::vector<std::int64_t>{2, 1, 32, 32}));
  EXPECT_EQ(b.uncertainty.sizes(), (std::vector<std::int64_t>{2, 1, 32, 32}));
  EXPECT_EQ(b.pathology_logits.sizes(), (std::vector<std::int64_t>{2, 2}));
  EXPECT_EQ(b.birads_logits.sizes(), (std::vector<std::int64_t>{2, 4}));
  EXPECT_EQ(b.histology_logits.sizes(), (std::vector<std::int64_t>{2, 4}));
  EXPECT_EQ(b.confidence.sizes(), (std::vector<std::int64_t>{2, 1}));
  EXPECT_EQ(max_abs(b.pathology_logits), 0.0);
  EXPECT_EQ(max_abs(b.birads_logits), 0.0);
  EXPECT_EQ(max_abs(b.histology_logits), 0.0);
  EXPECT_LT(max_abs(b.confidence - 0.5), 1e-7);
  EXPECT_LT(max_abs(b.uncertainty - 0.5), 1e-7);
}

TEST(Decoder, DefaultResolution) {
  ModelConfig cfg;
  MultiTaskDecoder dec(cfg);
  torch::NoGradGuard guard;
  const auto b = dec->forward(torch::randn({2, 196, 384}));
  EXPECT_EQ(b.seg_logits.sizes(), (std::vector<std::int64_t>{2, 1, 224, 224}));
}

TEST(Decoder, DuplicatedItemsGiveDuplicatedOutputs) {
  auto cfg = ModelConfig::tiny();
  MultiTaskDecoder dec(cfg);
  dec->eval();
  torch::NoGradGuard guard;
  const auto x = torch::randn({1, 16, cfg.encoder.embed_dim});
  const auto b = dec->forward(torch::cat({x, x}));
  EXPECT_LT(max_abs(b.seg_logits[0] - b.seg_logits[1]), 1e-6);
  EXPECT_LT(max_abs(b.birads_logits[0] - b.birads_logits[1]), 1e-6);
}

TEST(Binarize, SignMap) {
  EXPECT_EQ(binarize(torch::full({1, 4, 4}, -3.0)), Mask(4, 4, 0));
  EXPECT_EQ(binarize(torch::full({1, 4, 4}, 3.0)), Mask(4, 4, 1));
  auto logits = torch::empty({4, 4});
  Mask expected(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const bool on = (x + y) % 2 == 0;
      logits[y][x] = on ? 2.0 : -2.0;
      expected(y, x) = on;
    }
  }
  EXPECT_EQ(binarize(logits), expected);
}

TEST(MedCtx, ForwardShapesAndAblationSwitches) {
  const auto corpus = support::small_corpus(4, 1);
  const auto examples = train::prepare_examples(corpus, 32);
  auto rng = make_rng(0);
  const auto batch = train::make_batch(examples, {0, 1, 2, 3}, rng, {});
  for (int variant = 0; variant < 4; ++variant) {
    auto cfg = ModelConfig::tiny();
    if (variant == 1) cfg.use_structured_tokens = false;
    if (variant == 2) cfg.use_clinical_text = false;
    if (variant == 3) cfg.use_local_branch = false;
    MedCtx m(cfg, text::Vocabulary::builtin().size());
    m->eval();
    torch::NoGradGuard guard;
    const auto out = m->forward(batch.inputs);
    EXPECT_EQ(out.text.tokens.size(1), variant == 1 ? 128 : 131);
    EXPECT_EQ(out.bundle.seg_logits.sizes(), (std::vector<std::int64_t>{4, 1, 32, 32}));
    EXPECT_EQ(out.img_emb.sizes(), (std::vector<std::int64_t>{4, cfg.shared_embed_dim}));
    EXPECT_EQ(out.pooled.sizes(), (std::vector<std::int64_t>{4, cfg.encoder.embed_dim}));
    if (variant == 2) {
      // text never reaches the model: changing the report changes nothing
      auto other = batch.inputs;
      other.tokens.ids = torch::zeros_like(other.tokens.ids);
      EXPECT_LT(max_abs(m->forward(other).bundle.seg_logits - out.bundle.seg_logits), 1e-6);
    }
    if (variant == 3) {
      EXPECT_TRUE(out.visual.local_layers.empty());
    }
  }
}

TEST(MedCtx, ParameterGroupsPartitionTheModel) {
  MedCtx m(ModelConfig::tiny(), text::Vocabulary::builtin().size());
  std::set<const void*> seen;
  std::size_t total = 0;
  for (const auto& group : {m->vision_parameters(), m->text_parameters(), m->head_parameters(), m->ssl_parameters()}) {
    for (const auto& p : group) {
      EXPECT_TRUE(seen.insert(p.data_ptr()).second);
      total += p.numel();
    }
  }
  std::size_t all = 0;
  for (const auto& p : m->parameters()) all += p.numel();
  EXPECT_EQ(total, all);
}
