#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "cyclepose/synthmask.hpp"
#include "oracles.hpp"

using namespace cyclepose;
using namespace cyclepose::synthmask;

TEST_CASE("empty count range gives an all-zero mask") {
  EllipseConfig cfg;
  cfg.count_range = {0, 0};
  const auto m = sampleEllipseMask(cfg, 1);
  for (auto v : m.labels) CHECK(v == 0);
}

TEST_CASE("config invariants are enforced") {
  EllipseConfig cfg;
  cfg.major_axis_range = {0, 30};
  CHECK_THROWS_AS(sampleEllipseMask(cfg, 0), ConfigError);
  cfg = {};
  cfg.eccentricity_range = {0.9, 0.6};
  CHECK_THROWS_AS(sampleEllipseMask(cfg, 0), ConfigError);
  cfg = {};
  cfg.max_overlap_fraction = 1.5;
  CHECK_THROWS_AS(sampleEllipseMask(cfg, 0), ConfigError);
  DeformConfig dc;
  dc.grid_size_range = {1, 4};
  CHECK_THROWS_AS(elasticDeform(InstanceMask(8, 8), dc, 0), ConfigError);
  dc = {};
  dc.variance_range = {-1.0, 2.0};
  CHECK_THROWS_AS(elasticDeform(InstanceMask(8, 8), dc, 0), ConfigError);
}

TEST_CASE("determinism: identical (cfg, seed) -> bit-identical masks") {
  EllipseConfig cfg;
  for (uint64_t seed : {0ULL, 7ULL, 123456ULL}) {
    const auto a = sampleEllipseMask(cfg, seed);
    const auto b = sampleEllipseMask(cfg, seed);
    CHECK(a.labels == b.labels);
  }
}

TEST_CASE("instance areas respect the analytic ellipse-area bounds") {
  // Interior, non-overwritten instances must land near pi*a*b; clipped or
  // overwritten ones only ever lose pixels, so re-rasterize from geometry.
  EllipseConfig cfg;  // (5,30), (0.6,0.9), overlap 0.10, 224x224 defaults
  const double a_min = 2.5, a_max = 15.0;
  const double b_min = a_min * std::sqrt(1 - 0.9 * 0.9);
  const double area_lo = M_PI * a_min * b_min;
  const double area_hi = M_PI * a_max * a_max * std::sqrt(1 - 0.6 * 0.6);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<PlacedEllipse> placed;
    sampleEllipseMask(cfg, seed, &placed);
    CHECK(!placed.empty());
    for (const auto& e : placed) {
      // Analytic bound check on the geometry itself.
      CHECK(2 * e.a >= 5.0);
      CHECK(2 * e.a <= 30.0);
      const double ecc = std::sqrt(1.0 - (e.b * e.b) / (e.a * e.a));
      CHECK(ecc == doctest::Approx(0.75).epsilon(0.21));  // within [0.6, 0.9]
      // Rasterized interior area vs pi*a*b, with quantization slack.
      if (e.cy > a_max && e.cy < 224 - a_max && e.cx > a_max && e.cx < 224 - a_max) {
        const double area = static_cast<double>(rasterizeEllipse(e, 224, 224).size());
        CHECK(area >= 0.7 * area_lo);
        CHECK(area <= 1.3 * area_hi);
        CHECK(area == doctest::Approx(M_PI * e.a * e.b).epsilon(0.35));
      }
    }
  }
}

TEST_CASE("pairwise overlap never exceeds the configured fraction") {
  EllipseConfig cfg;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<PlacedEllipse> placed;
    sampleEllipseMask(cfg, seed, &placed);
    std::vector<std::set<long>> pix;
    for (const auto& e : placed) {
      std::set<long> s;
      for (auto [y, x] : rasterizeEllipse(e, 224, 224)) s.insert(y * 224L + x);
      pix.push_back(std::move(s));
    }
    for (size_t i = 0; i < pix.size(); ++i) {
      for (size_t j = i + 1; j < pix.size(); ++j) {
        long inter = 0;
        for (long p : pix[i]) inter += pix[j].count(p);
        const long smaller = std::min(pix[i].size(), pix[j].size());
        CHECK(inter <= cfg.max_overlap_fraction * smaller + 1e-9);
      }
    }
  }
}

TEST_CASE("rejection: a 15% overlap candidate is never accepted") {
  // Tight canvas and zero tolerance: every accepted pair must be disjoint.
  EllipseConfig cfg;
  cfg.canvas_size = {48, 48};
  cfg.count_range = {20, 20};
  cfg.max_overlap_fraction = 0.0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<PlacedEllipse> placed;
    sampleEllipseMask(cfg, seed, &placed);
    std::vector<std::set<long>> pix;
    for (const auto& e : placed) {
      std::set<long> s;
      for (auto [y, x] : rasterizeEllipse(e, 48, 48)) s.insert(y * 48L + x);
      pix.push_back(std::move(s));
    }
    for (size_t i = 0; i < pix.size(); ++i)
      for (size_t j = i + 1; j < pix.size(); ++j)
        for (long p : pix[i]) CHECK(pix[j].count(p) == 0);
  }
}

TEST_CASE("zero displacement field is the identity warp") {
  const auto m = oracles::diskMask(64, 64, 32, 32, 10);
  std::vector<float> zeros(5 * 5, 0.f);
  const auto out = elasticDeformWithField(m, 5, zeros, zeros);
  CHECK(out.labels == m.labels);
}

TEST_CASE("warp label-closure: output labels subset of input labels + {0}") {
  EllipseConfig cfg;
  DeformConfig dc;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = sampleEllipseMask(cfg, seed);
    std::set<int32_t> in_labels(m.labels.begin(), m.labels.end());
    // Raw warp without compaction.
    std::vector<float> dy, dx;
    sampleCoarseField(7, 4.0, seed, dy, dx);
    const auto out = elasticDeformWithField(m, 7, dy, dx);
    for (auto v : out.labels) CHECK(in_labels.count(v) == 1);
  }
}

TEST_CASE("mild deformation of a disk keeps one instance and nearby area") {
  const auto m = oracles::diskMask(64, 64, 32, 32, 10);
  const long in_area = std::count_if(m.labels.begin(), m.labels.end(),
                                     [](int32_t v) { return v > 0; });
  DeformConfig dc;
  dc.grid_size_range = {5, 5};
  dc.variance_range = {1.0, 1.0};
  double area_sum = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const auto out = elasticDeform(m, dc, seed);
    CHECK(out.maxLabel() == 1);
    area_sum += std::count_if(out.labels.begin(), out.labels.end(),
                              [](int32_t v) { return v > 0; });
  }
  const double mean_area = area_sum / 100.0;
  CHECK(mean_area == doctest::Approx(static_cast<double>(in_area)).epsilon(0.15));
}

TEST_CASE("strong deformation loses under 5% of instances on average") {
  EllipseConfig cfg;
  DeformConfig dc;
  dc.grid_size_range = {15, 15};
  dc.variance_range = {5.0, 5.0};
  double loss_sum = 0;
  const int trials = 100;
  for (uint64_t seed = 0; seed < trials; ++seed) {
    const auto m = sampleEllipseMask(cfg, seed);
    const int before = m.maxLabel();
    const auto out = elasticDeform(m, dc, seed * 31 + 1);
    const int after = out.maxLabel();
    loss_sum += before > 0 ? static_cast<double>(before - after) / before : 0.0;
  }
  CHECK(loss_sum / trials < 0.05);
}

TEST_CASE("coarse displacement field has zero mean over many seeds") {
  const int d = 8;
  const double variance = 3.0;
  double sum = 0;
  long n = 0;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    std::vector<float> dy, dx;
    sampleCoarseField(d, variance, seed, dy, dx);
    for (float v : dy) { sum += v; ++n; }
    for (float v : dx) { sum += v; ++n; }
  }
  const double mean = sum / n;
  const double bound = 3.0 * std::sqrt(variance) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean) < bound);
}

TEST_CASE("labels stay gap-free after sampling and deformation") {
  EllipseConfig cfg;
  DeformConfig dc;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const auto out = elasticDeform(sampleEllipseMask(cfg, seed), dc, seed);
    std::set<int32_t> labels(out.labels.begin(), out.labels.end());
    labels.erase(0);
    int32_t expect = 1;
    for (int32_t v : labels) CHECK(v == expect++);
  }
}
