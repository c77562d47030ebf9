#include "cyclepose/perlin.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

namespace cyclepose::perlin {

void PerlinConfig::validate() const {
  if (octaves < 1) throw ConfigError("perlin: octaves must be >= 1");
  if (persistence <= 0.0 || persistence > 1.0)
    throw ConfigError("perlin: persistence must be in (0,1]");
  if (base_frequency <= 0.0) throw ConfigError("perlin: base_frequency must be > 0");
  const double bg_mid = 0.5 * (bg_intensity_range.first + bg_intensity_range.second);
  if (fg_intensity_range.first <= bg_mid)
    throw ConfigError("perlin: fg intensity range must lie strictly above bg midpoint");
  if (blur_sigma_range.first < 0.0 || blur_sigma_range.first > blur_sigma_range.second)
    throw ConfigError("perlin: blur_sigma_range invalid");
  if (poisson_scale <= 0.0) throw ConfigError("perlin: poisson_scale must be > 0");
}

namespace {

// splitmix64; stateless per-lattice-point gradient hash.
uint64_t mix(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void gradientAt(int64_t iy, int64_t ix, uint64_t seed, double& gy, double& gx) {
  const uint64_t hsh =
      mix(seed ^ mix(static_cast<uint64_t>(iy) * 0x8da6b343ULL ^
                     static_cast<uint64_t>(ix) * 0xd8163841ULL));
  const double angle = (hsh >> 11) * (2.0 * M_PI / 9007199254740992.0);
  gy = std::sin(angle);
  gx = std::cos(angle);
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

}  // namespace

double perlinAt(double y, double x, uint64_t seed) {
  const int64_t iy = static_cast<int64_t>(std::floor(y));
  const int64_t ix = static_cast<int64_t>(std::floor(x));
  const double fy = y - iy, fx = x - ix;
  double dots[2][2];
  for (int cy = 0; cy < 2; ++cy) {
    for (int cx = 0; cx < 2; ++cx) {
      double gy, gx;
      gradientAt(iy + cy, ix + cx, seed, gy, gx);
      dots[cy][cx] = gy * (fy - cy) + gx * (fx - cx);
    }
  }
  const double uy = fade(fy), ux = fade(fx);
  const double top = dots[0][0] + ux * (dots[0][1] - dots[0][0]);
  const double bot = dots[1][0] + ux * (dots[1][1] - dots[1][0]);
  // sqrt(2) scaling keeps the theoretical range within [-1, 1] for unit gradients.
  return std::clamp(M_SQRT2 * (top + uy * (bot - top)), -1.0, 1.0);
}

IntensityImage perlin2d(int height, int width, double frequency, uint64_t seed) {
  if (frequency <= 0.0) throw ConfigError("perlin2d: frequency must be > 0");
  IntensityImage out(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out.at(y, x) = static_cast<float>(perlinAt(y * frequency, x * frequency, seed));
  return out;
}

IntensityImage fractalPerlin(int height, int width, const PerlinConfig& cfg, uint64_t seed) {
  cfg.validate();
  IntensityImage acc(height, width);
  double amp = 1.0, amp_sum = 0.0, freq = cfg.base_frequency;
  for (int o = 0; o < cfg.octaves; ++o) {
    const uint64_t oseed = mix(seed + 0x51ed2701ULL * o);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        acc.at(y, x) += static_cast<float>(amp * perlinAt(y * freq, x * freq, oseed));
    amp_sum += amp;
    amp *= cfg.persistence;
    freq *= 2.0;
  }
  // [-amp_sum, amp_sum] -> [0, 1]
  const float scale = static_cast<float>(0.5 / amp_sum);
  for (auto& v : acc.data) v = v * scale + 0.5f;
  return acc;
}

IntensityImage applyPoisson(const IntensityImage& img, double scale, uint64_t seed) {
  IntensityImage out(img.height, img.width);
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < img.data.size(); ++i) {
    const double lambda = std::max(0.0, static_cast<double>(img.data[i])) * scale;
    std::poisson_distribution<long> noise(lambda);
    out.data[i] = lambda > 0.0 ? static_cast<float>(noise(rng) / scale) : 0.f;
  }
  return out;
}

IntensityImage renderPerlinImage(const InstanceMask& mask, const PerlinConfig& cfg,
                                 uint64_t seed) {
  cfg.validate();
  const int h = mask.height, w = mask.width;
  std::mt19937_64 rng(mix(seed));

  std::uniform_real_distribution<double> fg_dist(cfg.fg_intensity_range.first,
                                                 cfg.fg_intensity_range.second);
  std::uniform_real_distribution<double> bg_dist(cfg.bg_intensity_range.first,
                                                 cfg.bg_intensity_range.second);
  std::uniform_real_distribution<double> blur_dist(cfg.blur_sigma_range.first,
                                                   cfg.blur_sigma_range.second);

  const int32_t n_inst = mask.maxLabel();
  std::vector<float> fg_base(n_inst + 1, 0.f);
  for (int32_t k = 1; k <= n_inst; ++k) fg_base[k] = static_cast<float>(fg_dist(rng));
  const float bg_base = static_cast<float>(bg_dist(rng));
  const double blur_sigma = blur_dist(rng);

  const auto fg_tex = fractalPerlin(h, w, cfg, rng());
  const auto bg_tex = fractalPerlin(h, w, cfg, rng());

  IntensityImage img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int32_t lbl = mask.at(y, x);
      if (lbl > 0) {
        const float tex = 1.f + static_cast<float>(cfg.fg_texture_amp) * (2.f * fg_tex.at(y, x) - 1.f);
        img.at(y, x) = fg_base[lbl] * tex;
      } else {
        const float tex = 1.f + static_cast<float>(cfg.bg_texture_amp) * (2.f * bg_tex.at(y, x) - 1.f);
        img.at(y, x) = bg_base * tex;
      }
    }
  }

  if (blur_sigma > 0.0) {
    cv::Mat m(h, w, CV_32F, img.data.data());
    cv::GaussianBlur(m, m, cv::Size(0, 0), blur_sigma, blur_sigma, cv::BORDER_REFLECT);
  }

  if (std::isfinite(cfg.poisson_scale)) img = applyPoisson(img, cfg.poisson_scale, rng());

  for (auto& v : img.data) v = std::clamp(v, 0.f, 1.f);
  return img;
}

}  // namespace cyclepose::perlin
