#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <torch/torch.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "cyclepose/engine.hpp"

using namespace cyclepose;
using namespace cyclepose::engine;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cyclepose_engine_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TrainConfig tinyConfig() {
  TrainConfig cfg;
  cfg.seed = 11;
  cfg.crop = 32;
  return cfg;
}

nets::GeneratorSpec tinyG() { return {.residual_blocks = 1, .base_width = 4}; }
nets::SegmenterSpec tinyS() { return {.depth = 3, .base_width = 4}; }

Batch randomBatch(int h, int w, uint64_t seed) {
  torch::manual_seed(seed);
  Batch b;
  b.real_img = torch::rand({1, 1, h, w}) * 2 - 1;
  b.synth_flow = torch::randn({1, 3, h, w}).clamp(-1, 1);
  b.synth_flow.narrow(1, 2, 1).bernoulli_(0.4);
  b.synth_mask = b.synth_flow.narrow(1, 2, 1).clone();
  b.perlin_img = torch::rand({1, 1, h, w}) * 2 - 1;
  b.perlin_flow = b.synth_flow.clone();
  return b;
}

}  // namespace

TEST_CASE("learning-rate schedule: constant phase then linear decay to zero") {
  TrainConfig cfg;  // 100 const + 100 decay, lr 0.0008
  CHECK(lrAt(0, cfg) == doctest::Approx(0.0008).epsilon(1e-12));
  CHECK(lrAt(99, cfg) == doctest::Approx(0.0008).epsilon(1e-12));
  CHECK(lrAt(100, cfg) == doctest::Approx(0.0008).epsilon(1e-12));
  CHECK(lrAt(150, cfg) == doctest::Approx(0.0004).epsilon(1e-12));
  CHECK(lrAt(200, cfg) == doctest::Approx(0.0).epsilon(1e-12));
  // strictly decreasing through the decay phase
  for (int e = 101; e <= 200; ++e) CHECK(lrAt(e, cfg) < lrAt(e - 1, cfg));
}

TEST_CASE("image pool fills to capacity, then swaps with probability 1/2") {
  ImagePool pool(10);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i) {
    auto fresh = torch::full({1}, double(i));
    auto out = pool.query(fresh, rng);
    CHECK(out.item<double>() == double(i));  // pass-through while filling
  }
  CHECK(pool.size() == 10);
  int swaps = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto fresh = torch::full({1}, 1000.0 + i);
    auto out = pool.query(fresh, rng);
    if (out.item<double>() != 1000.0 + i) ++swaps;
  }
  CHECK(pool.size() == 10);
  const double frac = double(swaps) / n;
  CHECK(frac > 0.45);
  CHECK(frac < 0.55);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.ablation = {false, false, false, false};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lr = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("one train step produces finite losses and updates weights") {
  auto cfg = tinyConfig();
  auto state = TrainState::init(cfg, tinyG(), tinyS());
  const auto before = state.segmenter->parameters()[0].clone();
  const auto rec = trainStep(randomBatch(32, 32, 1), state, {}, cfg);
  CHECK(std::isfinite(rec.total()));
  CHECK(rec.cyc_img > 0.0);
  CHECK(rec.cyc_mask > 0.0);
  CHECK(rec.perlin > 0.0);
  CHECK(state.step == 1);
  CHECK_FALSE(torch::allclose(before, state.segmenter->parameters()[0]));
}

TEST_CASE("ablation flags zero out the corresponding loss terms") {
  auto cfg = tinyConfig();
  cfg.ablation = {.adv = false, .perlin = false, .m2i = false, .cyc = true};
  auto state = TrainState::init(cfg, tinyG(), tinyS());
  const auto rec = trainStep(randomBatch(32, 32, 2), state, {}, cfg);
  CHECK(rec.adv_s == 0.0);
  CHECK(rec.adv_g == 0.0);
  CHECK(rec.perlin == 0.0);
  CHECK(rec.m2i == 0.0);
  CHECK(rec.cyc_img > 0.0);
  CHECK(rec.cyc_mask > 0.0);
}

TEST_CASE("checkpoint round trip restores bitwise-identical training") {
  auto cfg = tinyConfig();
  TempDir tmp;

  auto a = TrainState::init(cfg, tinyG(), tinyS());
  trainStep(randomBatch(32, 32, 3), a, {}, cfg);
  saveCheckpoint(tmp.path / "ck.ckpt", a, 0xabcdULL);

  auto b = TrainState::init(cfg, tinyG(), tinyS());
  uint64_t hash = 0;
  loadCheckpoint(tmp.path / "ck.ckpt", b, &hash);
  CHECK(hash == 0xabcdULL);
  CHECK(b.step == a.step);

  const auto batch = randomBatch(32, 32, 4);
  const auto ra = trainStep(batch, a, {}, cfg);
  const auto rb = trainStep(batch, b, {}, cfg);
  CHECK(ra.total() == rb.total());
  CHECK(ra.cyc_img == rb.cyc_img);
  CHECK(ra.d_img == rb.d_img);
  for (size_t i = 0; i < a.segmenter->parameters().size(); ++i)
    CHECK(a.segmenter->parameters()[i].equal(b.segmenter->parameters()[i]));
  for (size_t i = 0; i < a.generator->parameters().size(); ++i)
    CHECK(a.generator->parameters()[i].equal(b.generator->parameters()[i]));
}

TEST_CASE("segmenter export and reload reproduce outputs exactly") {
  auto cfg = tinyConfig();
  TempDir tmp;
  auto state = TrainState::init(cfg, tinyG(), tinyS());
  trainStep(randomBatch(32, 32, 5), state, {}, cfg);
  exportSegmenter(tmp.path / "model.seg", state);

  auto s2 = nets::buildSegmenter(tinyS());
  loadSegmenter(tmp.path / "model.seg", s2);
  state.segmenter->eval();
  s2->eval();
  torch::NoGradGuard ng;
  const auto x = torch::rand({1, 1, 32, 32});
  CHECK(state.segmenter->forward(x).equal(s2->forward(x)));
}

TEST_CASE("infer handles sizes that are not a multiple of the net stride") {
  auto s = nets::buildSegmenter(tinyS());
  IntensityImage img;
  img.height = 37;
  img.width = 45;
  img.data.assign(size_t(37) * 45, 0.5f);
  const auto mask = infer(img, s);
  CHECK(mask.height == 37);
  CHECK(mask.width == 45);
}

TEST_CASE("selectModel prefers the higher score and breaks ties later") {
  auto cfg = tinyConfig();
  TempDir tmp;
  std::vector<fs::path> ckpts;
  std::vector<std::pair<IntensityImage, InstanceMask>> val;
  {
    // one trivial pair: empty mask so every checkpoint scores identically
    IntensityImage img;
    img.height = img.width = 32;
    img.data.assign(32 * 32, 0.0f);
    InstanceMask m;
    m.height = m.width = 32;
    m.labels.assign(32 * 32, 0);
    val.emplace_back(img, m);
  }
  for (int i = 0; i < 3; ++i) {
    auto state = TrainState::init(cfg, tinyG(), tinyS());
    exportSegmenter(tmp.path / ("e" + std::to_string(i) + ".seg"), state);
    ckpts.push_back(tmp.path / ("e" + std::to_string(i) + ".seg"));
  }
  std::vector<double> scores;
  const size_t best = selectModel(ckpts, val, tinyS(), {}, &scores);
  REQUIRE(scores.size() == 3);
  double hi = scores[0];
  size_t expect = 0;
  for (size_t i = 1; i < scores.size(); ++i)
    if (scores[i] >= hi) { hi = scores[i]; expect = i; }
  CHECK(best == expect);
}

TEST_CASE("tensor bridges round-trip images, masks, and flows") {
  IntensityImage img;
  img.height = 2;
  img.width = 3;
  img.data = {0.f, 0.25f, 0.5f, 0.75f, 1.f, 0.1f};
  const auto t = imageToTensor(img);
  CHECK(t.sizes() == torch::IntArrayRef({1, 1, 2, 3}));
  CHECK(t.min().item<float>() == doctest::Approx(-1.0));
  CHECK(t.max().item<float>() == doctest::Approx(1.0));
  const auto back = tensorToImage(t);
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));

  InstanceMask m;
  m.height = 1;
  m.width = 4;
  m.labels = {0, 2, 2, 7};
  const auto mt = maskToBinaryTensor(m);
  CHECK(mt.sum().item<float>() == 3.0f);

  FlowTarget f;
  f.height = 2;
  f.width = 2;
  f.flow_y = {0.1f, -0.2f, 0.3f, 0.f};
  f.flow_x = {0.f, 0.5f, -0.5f, 0.f};
  f.prob = {1.f, 0.f, 1.f, 0.f};
  const auto ft = flowToTensor(f);
  CHECK(ft.sizes() == torch::IntArrayRef({1, 3, 2, 2}));
  const auto fb = tensorToFlow(ft, /*sigmoid_prob=*/false);
  for (int i = 0; i < 4; ++i) {
    CHECK(fb.flow_y[i] == doctest::Approx(f.flow_y[i]));
    CHECK(fb.flow_x[i] == doctest::Approx(f.flow_x[i]));
    CHECK(fb.prob[i] == doctest::Approx(f.prob[i]));
  }
}

TEST_CASE("run config parses from a table with overrides") {
  const auto table = config::Table::parseString(
      "seed = 9\n"
      "[train]\n"
      "epochs_const = 3\n"
      "epochs_decay = 2\n"
      "lr = 0.001\n"
      "crop = 64\n"
      "[loss]\n"
      "w_cyc_img = 5.0\n"
      "[ablation]\n"
      "adv = false\n"
      "[nets]\n"
      "g_residual_blocks = 2\n"
      "s_depth = 3\n");
  const auto rc = RunConfig::fromTable(table);
  CHECK(rc.train.seed == 9);
  CHECK(rc.train.epochs_const == 3);
  CHECK(rc.train.epochs_decay == 2);
  CHECK(rc.train.lr == doctest::Approx(0.001));
  CHECK(rc.train.crop == 64);
  CHECK(rc.weights.w_cyc_img == doctest::Approx(5.0));
  CHECK_FALSE(rc.train.ablation.adv);
  CHECK(rc.train.ablation.cyc);
  CHECK(rc.g_spec.residual_blocks == 2);
  CHECK(rc.s_spec.depth == 3);
}
