#pragma once

#include <filesystem>

#include "cyclepose/common.hpp"

namespace cyclepose::imageio {

/// Grayscale PNG/TIFF (8- or 16-bit) -> intensities in [0, 1].
/// RGB inputs are rejected unless allow_rgb converts them to luminance.
IntensityImage readIntensity(const std::filesystem::path& path, bool allow_rgb = false);

/// Write [0, 1] intensities as 16-bit (default) or 8-bit grayscale.
void writeIntensity(const std::filesystem::path& path, const IntensityImage& img,
                    int bit_depth = 16);

/// Label image (integer-valued single channel PNG/TIFF).
InstanceMask readMask(const std::filesystem::path& path);

/// Labels as 16-bit single-channel PNG/TIFF.
void writeMask(const std::filesystem::path& path, const InstanceMask& mask);

/// FlowTarget cache: 32-bit float TIFF with the flow_y, flow_x, and prob
/// planes stacked vertically (image height = 3 x mask height).
void writeFlow(const std::filesystem::path& path, const FlowTarget& flow);
FlowTarget readFlow(const std::filesystem::path& path);

/// FNV-1a content hash of a mask's label grid; keys the flow cache.
uint64_t maskContentHash(const InstanceMask& mask);

}  // namespace cyclepose::imageio
