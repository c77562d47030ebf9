#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cyclepose/common.hpp"
#include "cyclepose/config.hpp"

namespace cyclepose::data {

struct DatasetManifest {
  std::string name;
  std::filesystem::path image_dir;
  std::optional<std::filesystem::path> mask_dir;
  std::vector<std::string> train, val, test;  // file names relative to image_dir
  double norm_lo_percentile = 1.0;
  double norm_hi_percentile = 99.0;
  bool allow_rgb = false;

  static DatasetManifest fromConfig(const config::Table& cfg);
};

struct ImageRecord {
  std::string name;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> mask_path;
  float norm_lo = 0.f;  // per-image percentile normalization bounds
  float norm_hi = 1.f;
};

/// Validated dataset handle. Train records never carry mask paths; only the
/// selection and evaluation splits see annotations.
struct Dataset {
  DatasetManifest manifest;
  std::vector<ImageRecord> train, val, test;

  /// Load an image and normalize to [0, 1] by its cached percentile bounds.
  IntensityImage loadNormalized(const ImageRecord& rec) const;
};

/// Validate paths, index splits, and compute normalization statistics.
/// Splits must be disjoint; every listed file must exist and be readable.
Dataset ingest(const DatasetManifest& manifest);

struct AugmentConfig {
  double rotation_deg = 180.0;   // uniform in [-r, r]
  std::pair<double, double> scale_range{0.8, 1.2};
  double translation_px = 20.0;  // uniform in [-t, t] per axis
  int crop = 224;

  void validate() const;
};

/// Apply one random rotation+scale+translation to an image (bilinear) and an
/// optional mask (nearest-neighbor), then take a centered crop. Deterministic
/// per seed.
std::pair<IntensityImage, std::optional<InstanceMask>> augment(
    const IntensityImage& image, const std::optional<InstanceMask>& mask,
    const AugmentConfig& cfg, uint64_t seed);

/// The eight dihedral variants (4 right-angle rotations x optional flip) of
/// an image-mask pair; used by model selection.
std::vector<std::pair<IntensityImage, InstanceMask>> dihedralExpand(const IntensityImage& image,
                                                                    const InstanceMask& mask);

/// p-th percentile (0..100) of the image intensities.
float percentile(const IntensityImage& img, double p);

}  // namespace cyclepose::data
