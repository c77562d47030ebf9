#pragma once

#include <cstdint>
#include <utility>

#include "cyclepose/common.hpp"

namespace cyclepose::perlin {

struct PerlinConfig {
  int octaves = 4;
  double base_frequency = 1.0 / 32.0;              // cycles per pixel
  double persistence = 0.5;
  std::pair<double, double> fg_intensity_range{0.5, 0.9};
  std::pair<double, double> bg_intensity_range{0.05, 0.15};
  std::pair<double, double> blur_sigma_range{0.5, 1.5};  // sampled per image
  double poisson_scale = 200.0;                    // expected photons at intensity 1.0
  double fg_texture_amp = 0.25;                    // chromatin modulation depth
  double bg_texture_amp = 0.05;

  void validate() const;
};

/// Classic gradient-lattice noise in [-1, 1]; exactly 0 at lattice points,
/// C1-continuous via the quintic fade. Gradients are a counter-based hash of
/// (seed, lattice coords), so values are independent of evaluation order.
IntensityImage perlin2d(int height, int width, double frequency, uint64_t seed);

/// Single-point evaluation in lattice units (test hook).
double perlinAt(double y, double x, uint64_t seed);

/// Octave sum sum_o persistence^o * perlin2d(freq * 2^o), affinely mapped to [0, 1].
IntensityImage fractalPerlin(int height, int width, const PerlinConfig& cfg, uint64_t seed);

/// Mask-conditioned pseudo-microscopy rendering: per-instance foreground base
/// intensity modulated by fractal texture, textured background, Gaussian blur,
/// then Poisson photon noise. Output in [0, 1].
IntensityImage renderPerlinImage(const InstanceMask& mask, const PerlinConfig& cfg, uint64_t seed);

/// Poisson stage alone (test hook): pixel <- Poisson(pixel * scale) / scale.
IntensityImage applyPoisson(const IntensityImage& img, double scale, uint64_t seed);

}  // namespace cyclepose::perlin
