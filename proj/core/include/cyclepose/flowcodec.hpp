#pragma once

#include <cstdint>

#include "cyclepose/common.hpp"

namespace cyclepose::flowcodec {

struct DecodeConfig {
  double prob_threshold = 0.5;
  int min_size = 15;          // px; smaller decoded instances are dropped
  int n_steps = 200;          // Euler integration steps
  double step_size = 1.0;     // px
  double cluster_radius = 2.5;  // px, terminal-point merge radius

  void validate() const;
};

/// Instance mask -> Cellpose flow representation. Per instance: unit heat
/// source at the median pixel, fixed-point diffusion confined to instance
/// pixels (2x diameter iterations), flows = per-pixel-normalized spatial
/// gradient of the diffused field. Background flow is exactly 0; prob is the
/// binarized mask. A 1-pixel instance gets zero flow and prob 1.
FlowTarget encodeFlows(const InstanceMask& mask);

/// Flow representation -> instance mask. Pixels above prob_threshold follow
/// the bilinearly sampled flow field for a fixed step count; terminal points
/// are clustered by proximity and each pixel inherits its cluster id.
/// Instances under min_size are removed and labels compacted.
InstanceMask decodeFlows(const FlowTarget& flows, const DecodeConfig& cfg = {});

}  // namespace cyclepose::flowcodec
