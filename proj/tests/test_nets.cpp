#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <torch/torch.h>

#include "cyclepose/losses.hpp"
#include "cyclepose/nets.hpp"

using namespace cyclepose;
using namespace cyclepose::nets;

TEST_CASE("generator maps 3xHxW to 1xHxW within [-1, 1]") {
  torch::manual_seed(0);
  auto g = buildGenerator({.residual_blocks = 2, .base_width = 8});
  const auto out = g->forward(torch::randn({1, 3, 64, 64}));
  CHECK(out.sizes() == torch::IntArrayRef({1, 1, 64, 64}));
  CHECK(out.min().item<double>() >= -1.0);
  CHECK(out.max().item<double>() <= 1.0);
  CHECK(parameterCount(*g) > 0);
}

TEST_CASE("segmenter maps 1xHxW to 3xHxW, spatial size preserved") {
  torch::manual_seed(0);
  auto s = buildSegmenter({.depth = 4, .base_width = 8});
  const auto out = s->forward(torch::randn({1, 1, 224, 224}));
  CHECK(out.sizes() == torch::IntArrayRef({1, 3, 224, 224}));
  CHECK(out.isfinite().all().item<bool>());
}

TEST_CASE("segmenter without style vector still runs") {
  auto s = buildSegmenter({.depth = 3, .base_width = 8, .use_style = false});
  const auto out = s->forward(torch::randn({1, 1, 32, 32}));
  CHECK(out.sizes() == torch::IntArrayRef({1, 3, 32, 32}));
}

TEST_CASE("discriminator emits a patch grid smaller than the input") {
  auto d = buildDiscriminator({.in_channels = 1, .base_width = 8});
  const auto out = d->forward(torch::randn({1, 1, 224, 224}));
  CHECK(out.size(1) == 1);
  CHECK(out.size(2) < 224);
  CHECK(out.size(3) < 224);
  CHECK(out.size(2) * out.size(3) > 1);  // patch-level, not a single scalar
}

TEST_CASE("indivisible spatial sizes raise explicit shape errors") {
  auto g = buildGenerator({.residual_blocks = 1, .base_width = 4});
  CHECK_THROWS(g->forward(torch::randn({1, 3, 225, 224})));
  auto s = buildSegmenter({.depth = 4, .base_width = 4});
  CHECK_THROWS(s->forward(torch::randn({1, 1, 222, 224})));
  auto d = buildDiscriminator({.in_channels = 1, .base_width = 4});
  CHECK_THROWS(d->forward(torch::randn({1, 1, 30, 30})));
}

TEST_CASE("gradient connectivity: every G and S parameter learns") {
  torch::manual_seed(3);
  auto g = buildGenerator({.residual_blocks = 1, .base_width = 4});
  auto s = buildSegmenter({.depth = 3, .base_width = 4});
  auto d_img = buildDiscriminator({.in_channels = 1, .base_width = 4, .layers = 2});
  auto d_seg = buildDiscriminator({.in_channels = 3, .base_width = 4, .layers = 2});
  g->train();
  s->train();

  auto flow_target = torch::randn({1, 3, 32, 32}).clamp(-1, 1);
  flow_target.narrow(1, 2, 1).bernoulli_(0.4);
  const auto mask = flow_target.narrow(1, 2, 1).clone();
  const auto real_img = torch::rand({1, 1, 32, 32}) * 2 - 1;
  const auto perlin_img = torch::rand({1, 1, 32, 32}) * 2 - 1;

  losses::LossWeights w;
  const auto fake = g->forward(flow_target);
  auto total = losses::segLoss(s->forward(fake), flow_target).total() * w.w_cyc_mask;
  total = total + losses::m2iTotal(mask, fake, w);
  total = total + losses::lsganLoss(d_img->forward(fake), true);
  const auto s_real = s->forward(real_img);
  const auto repr = torch::cat(
      {s_real.narrow(1, 0, 2), torch::sigmoid(s_real.narrow(1, 2, 1))}, 1);
  total = total + torch::l1_loss(g->forward(repr), real_img) * w.w_cyc_img;
  total = total + losses::lsganLoss(d_seg->forward(repr), true);
  total = total + losses::segLoss(s->forward(perlin_img), flow_target).total() * w.w_perlin;
  total.backward();

  for (const auto& p : g->parameters()) {
    REQUIRE(p.grad().defined());
    CHECK(p.grad().abs().sum().item<double>() > 0.0);
  }
  for (const auto& p : s->parameters()) {
    REQUIRE(p.grad().defined());
    CHECK(p.grad().abs().sum().item<double>() > 0.0);
  }
}

TEST_CASE("prob logit stays finite on extreme finite inputs") {
  auto s = buildSegmenter({.depth = 3, .base_width = 4});
  s->eval();
  torch::NoGradGuard ng;
  for (double v : {-1e3, 0.0, 1e3}) {
    const auto out = s->forward(torch::full({1, 1, 32, 32}, v));
    CHECK(out.isfinite().all().item<bool>());
  }
}
