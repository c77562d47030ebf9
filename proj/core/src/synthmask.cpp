#include "cyclepose/synthmask.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

namespace cyclepose::synthmask {

namespace {
constexpr int kPlacementRetries = 50;
}

void EllipseConfig::validate() const {
  const int min_side = std::min(canvas_size.first, canvas_size.second);
  if (canvas_size.first < 1 || canvas_size.second < 1)
    throw ConfigError("ellipse: canvas_size must be positive");
  if (major_axis_range.first < 1 || major_axis_range.second >= min_side)
    throw ConfigError("ellipse: major_axis_range must lie in [1, min(canvas_size))");
  if (major_axis_range.first > major_axis_range.second)
    throw ConfigError("ellipse: major_axis_range low > high");
  if (eccentricity_range.first < 0.0 || eccentricity_range.second >= 1.0 ||
      eccentricity_range.first > eccentricity_range.second)
    throw ConfigError("ellipse: eccentricity_range must be within [0,1), low <= high");
  if (max_overlap_fraction < 0.0 || max_overlap_fraction > 1.0)
    throw ConfigError("ellipse: max_overlap_fraction must be in [0,1]");
  if (count_range.first < 0 || count_range.first > count_range.second)
    throw ConfigError("ellipse: count_range invalid");
}

void DeformConfig::validate() const {
  if (grid_size_range.first < 2 || grid_size_range.first > grid_size_range.second)
    throw ConfigError("deform: grid_size_range must satisfy 2 <= low <= high");
  if (variance_range.first <= 0.0 || variance_range.first > variance_range.second)
    throw ConfigError("deform: variance_range must be positive, low <= high");
}

}  // namespace cyclepose::synthmask

namespace cyclepose {

void InstanceMask::compact() {
  std::unordered_map<int32_t, int32_t> remap;
  int32_t next = 1;
  for (auto& v : labels) {
    if (v == 0) continue;
    auto it = remap.find(v);
    if (it == remap.end()) it = remap.emplace(v, next++).first;
    v = it->second;
  }
}

}  // namespace cyclepose

namespace cyclepose::synthmask {

// Pixels whose centers fall inside the rotated ellipse.
std::vector<std::pair<int, int>> rasterizeEllipse(const PlacedEllipse& e, int h, int w) {
  std::vector<std::pair<int, int>> px;
  const double r = std::max(e.a, e.b) + 1.0;
  const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - r)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(e.cy + r)));
  const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - r)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(e.cx + r)));
  const double ct = std::cos(e.theta), st = std::sin(e.theta);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dy = y - e.cy, dx = x - e.cx;
      const double u = dx * ct + dy * st;
      const double v = -dx * st + dy * ct;
      if ((u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0) px.emplace_back(y, x);
    }
  }
  return px;
}

InstanceMask sampleEllipseMask(const EllipseConfig& cfg, uint64_t seed) {
  return sampleEllipseMask(cfg, seed, nullptr);
}

InstanceMask sampleEllipseMask(const EllipseConfig& cfg, uint64_t seed,
                               std::vector<PlacedEllipse>* placed) {
  cfg.validate();
  const int h = cfg.canvas_size.first, w = cfg.canvas_size.second;
  InstanceMask mask(h, w);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count_dist(cfg.count_range.first, cfg.count_range.second);
  std::uniform_real_distribution<double> axis_dist(cfg.major_axis_range.first,
                                                   cfg.major_axis_range.second);
  std::uniform_real_distribution<double> ecc_dist(cfg.eccentricity_range.first,
                                                  cfg.eccentricity_range.second);
  std::uniform_real_distribution<double> cy_dist(0.0, h - 1.0);
  std::uniform_real_distribution<double> cx_dist(0.0, w - 1.0);
  std::uniform_real_distribution<double> theta_dist(0.0, M_PI);

  const int target = count_dist(rng);
  std::vector<int> areas;  // area per placed label (1-based)
  int32_t next_label = 1;

  for (int k = 0; k < target; ++k) {
    for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
      PlacedEllipse e;
      const double major = axis_dist(rng);
      const double ecc = ecc_dist(rng);
      e.a = major / 2.0;
      e.b = e.a * std::sqrt(1.0 - ecc * ecc);
      e.cy = cy_dist(rng);
      e.cx = cx_dist(rng);
      e.theta = theta_dist(rng);

      const auto px = rasterizeEllipse(e, h, w);
      if (px.empty()) continue;

      // Per existing instance: overlapping pixel count vs the smaller area.
      std::unordered_map<int32_t, int> inter;
      for (const auto& [y, x] : px) {
        const int32_t v = mask.at(y, x);
        if (v > 0) ++inter[v];
      }
      bool ok = true;
      for (const auto& [lbl, n] : inter) {
        const int smaller = std::min<int>(areas[lbl - 1], static_cast<int>(px.size()));
        if (n > cfg.max_overlap_fraction * smaller) { ok = false; break; }
      }
      if (!ok) continue;

      for (const auto& [y, x] : px) mask.at(y, x) = next_label;  // later wins
      areas.push_back(static_cast<int>(px.size()));
      if (placed) placed->push_back(e);
      ++next_label;
      break;
    }
  }

  // Overwritten instances may have shrunk to nothing; keep labels gap-free.
  mask.compact();
  return mask;
}

void sampleCoarseField(int grid_size, double variance, uint64_t seed,
                       std::vector<float>& dy, std::vector<float>& dx) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance));
  const size_t n = static_cast<size_t>(grid_size) * grid_size;
  dy.resize(n);
  dx.resize(n);
  for (auto& v : dy) v = static_cast<float>(gauss(rng));
  for (auto& v : dx) v = static_cast<float>(gauss(rng));
}

InstanceMask elasticDeformWithField(const InstanceMask& mask, int grid_size,
                                    const std::vector<float>& coarse_dy,
                                    const std::vector<float>& coarse_dx) {
  if (grid_size < 2) throw ConfigError("deform: grid size must be >= 2");
  const int h = mask.height, w = mask.width;

  cv::Mat cy(grid_size, grid_size, CV_32F, const_cast<float*>(coarse_dy.data()));
  cv::Mat cx(grid_size, grid_size, CV_32F, const_cast<float*>(coarse_dx.data()));
  cv::Mat fy, fx;
  cv::resize(cy, fy, cv::Size(w, h), 0, 0, cv::INTER_CUBIC);
  cv::resize(cx, fx, cv::Size(w, h), 0, 0, cv::INTER_CUBIC);

  InstanceMask out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sy = static_cast<int>(std::lround(y + fy.at<float>(y, x)));
      const int sx = static_cast<int>(std::lround(x + fx.at<float>(y, x)));
      out.at(y, x) = mask.inBounds(sy, sx) ? mask.at(sy, sx) : 0;
    }
  }
  return out;
}

InstanceMask elasticDeform(const InstanceMask& mask, const DeformConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> d_dist(cfg.grid_size_range.first, cfg.grid_size_range.second);
  std::uniform_real_distribution<double> var_dist(cfg.variance_range.first,
                                                  cfg.variance_range.second);
  const int d = d_dist(rng);
  const double variance = var_dist(rng);

  std::vector<float> dy, dx;
  sampleCoarseField(d, variance, rng(), dy, dx);
  auto out = elasticDeformWithField(mask, d, dy, dx);
  out.compact();
  return out;
}

}  // namespace cyclepose::synthmask
