#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cyclepose {

/// 2-D integer label grid. 0 = background, k > 0 = nucleus instance k.
struct InstanceMask {
  int height = 0;
  int width = 0;
  std::vector<int32_t> labels;

  InstanceMask() = default;
  InstanceMask(int h, int w) : height(h), width(w), labels(static_cast<size_t>(h) * w, 0) {}

  int32_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
  int32_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }
  bool inBounds(int y, int x) const { return y >= 0 && y < height && x >= 0 && x < width; }
  size_t size() const { return labels.size(); }

  int32_t maxLabel() const {
    int32_t m = 0;
    for (int32_t v : labels) if (v > m) m = v;
    return m;
  }

  /// Relabel instances to a gap-free 1..K in order of first appearance.
  void compact();
};

/// 2-D scalar grid, grayscale intensity image.
struct IntensityImage {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  IntensityImage() = default;
  IntensityImage(int h, int w, float fill = 0.f)
      : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

  float& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return data.size(); }
};

/// Per-pixel flow representation: vertical flow, horizontal flow, nucleus probability.
struct FlowTarget {
  int height = 0;
  int width = 0;
  std::vector<float> flow_y;
  std::vector<float> flow_x;
  std::vector<float> prob;

  FlowTarget() = default;
  FlowTarget(int h, int w)
      : height(h),
        width(w),
        flow_y(static_cast<size_t>(h) * w, 0.f),
        flow_x(static_cast<size_t>(h) * w, 0.f),
        prob(static_cast<size_t>(h) * w, 0.f) {}

  size_t idx(int y, int x) const { return static_cast<size_t>(y) * width + x; }
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cyclepose
