#pragma once

#include <cstdint>
#include <utility>

#include "cyclepose/common.hpp"

namespace cyclepose::synthmask {

struct EllipseConfig {
  std::pair<int, int> major_axis_range{5, 30};     // full major axis length, px
  std::pair<double, double> eccentricity_range{0.6, 0.9};
  double max_overlap_fraction = 0.10;              // vs the smaller instance's area
  std::pair<int, int> count_range{8, 40};
  std::pair<int, int> canvas_size{224, 224};       // (height, width)

  void validate() const;
};

struct DeformConfig {
  std::pair<int, int> grid_size_range{5, 15};      // coarse grid side d
  std::pair<double, double> variance_range{1.0, 5.0};  // sigma^2

  void validate() const;
};

/// Rasterize randomly placed ellipses onto a label canvas. A candidate is
/// accepted only if its pixel overlap with every already-placed instance is
/// at most max_overlap_fraction of the smaller instance's area; accepted
/// ellipses overwrite earlier labels at shared pixels. 50 placement attempts
/// per ellipse, then that ellipse is skipped.
InstanceMask sampleEllipseMask(const EllipseConfig& cfg, uint64_t seed);

struct PlacedEllipse {
  double cy, cx;
  double a, b;  // semi-axes
  double theta;
};

/// As sampleEllipseMask, additionally returning the accepted ellipse
/// geometry (pre-overwrite), so tests can re-rasterize and count overlaps.
InstanceMask sampleEllipseMask(const EllipseConfig& cfg, uint64_t seed,
                               std::vector<PlacedEllipse>* placed);

/// Pixel-center rasterization used by the sampler (test hook).
std::vector<std::pair<int, int>> rasterizeEllipse(const PlacedEllipse& e, int height, int width);

/// Warp a label image with a coarse d x d x 2 Gaussian displacement field
/// upsampled to canvas size by cubic spline interpolation. Labels are pulled
/// by nearest-neighbor backward sampling; out-of-bounds samples become
/// background. Grid size and variance are drawn uniformly from cfg per call.
InstanceMask elasticDeform(const InstanceMask& mask, const DeformConfig& cfg, uint64_t seed);

/// Deform with an explicit coarse field (d x d per channel, row-major),
/// exposed so tests can force specific displacements.
InstanceMask elasticDeformWithField(const InstanceMask& mask, int grid_size,
                                    const std::vector<float>& coarse_dy,
                                    const std::vector<float>& coarse_dx);

/// Draw the coarse displacement field used by elasticDeform (test hook).
void sampleCoarseField(int grid_size, double variance, uint64_t seed,
                       std::vector<float>& dy, std::vector<float>& dx);

}  // namespace cyclepose::synthmask
