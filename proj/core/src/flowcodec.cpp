#include "cyclepose/flowcodec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <vector>

namespace cyclepose::flowcodec {

void DecodeConfig::validate() const {
  if (prob_threshold < 0.0 || prob_threshold > 1.0)
    throw ConfigError("decode: prob_threshold must be in [0,1]");
  if (min_size < 0 || n_steps < 1 || step_size <= 0.0 || cluster_radius <= 0.0)
    throw ConfigError("decode: invalid integration parameters");
}

namespace {

struct Instance {
  int32_t label;
  int y0, y1, x0, x1;             // inclusive bbox
  std::vector<std::pair<int, int>> pixels;
};

std::vector<Instance> collectInstances(const InstanceMask& mask) {
  std::unordered_map<int32_t, size_t> index;
  std::vector<Instance> out;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const int32_t lbl = mask.at(y, x);
      if (lbl == 0) continue;
      auto it = index.find(lbl);
      if (it == index.end()) {
        it = index.emplace(lbl, out.size()).first;
        out.push_back({lbl, y, y, x, x, {}});
      }
      Instance& inst = out[it->second];
      inst.y0 = std::min(inst.y0, y);
      inst.y1 = std::max(inst.y1, y);
      inst.x0 = std::min(inst.x0, x);
      inst.x1 = std::max(inst.x1, x);
      inst.pixels.emplace_back(y, x);
    }
  }
  return out;
}

std::pair<int, int> medianPixel(const Instance& inst) {
  std::vector<int> ys, xs;
  ys.reserve(inst.pixels.size());
  xs.reserve(inst.pixels.size());
  for (const auto& [y, x] : inst.pixels) { ys.push_back(y); xs.push_back(x); }
  auto med = [](std::vector<int>& v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  const int my = med(ys), mx = med(xs);
  // Snap to the nearest actual instance pixel (median may fall outside).
  long best = std::numeric_limits<long>::max();
  std::pair<int, int> best_px = inst.pixels.front();
  for (const auto& [y, x] : inst.pixels) {
    const long d = static_cast<long>(y - my) * (y - my) + static_cast<long>(x - mx) * (x - mx);
    if (d < best) { best = d; best_px = {y, x}; }
  }
  return best_px;
}

}  // namespace

FlowTarget encodeFlows(const InstanceMask& mask) {
  FlowTarget out(mask.height, mask.width);
  for (size_t i = 0; i < mask.labels.size(); ++i)
    out.prob[i] = mask.labels[i] > 0 ? 1.f : 0.f;

  for (const auto& inst : collectInstances(mask)) {
    // Padded local window keeps the diffusion stencil in bounds.
    const int lh = inst.y1 - inst.y0 + 3, lw = inst.x1 - inst.x0 + 3;
    const int oy = inst.y0 - 1, ox = inst.x0 - 1;
    std::vector<uint8_t> in_inst(static_cast<size_t>(lh) * lw, 0);
    for (const auto& [y, x] : inst.pixels)
      in_inst[static_cast<size_t>(y - oy) * lw + (x - ox)] = 1;

    const auto [my, mx] = medianPixel(inst);
    const size_t src = static_cast<size_t>(my - oy) * lw + (mx - ox);

    const int diameter = std::max(inst.y1 - inst.y0, inst.x1 - inst.x0) + 1;
    const int n_iter = 2 * diameter;

    std::vector<double> heat(static_cast<size_t>(lh) * lw, 0.0), next(heat.size(), 0.0);
    for (int it = 0; it < n_iter; ++it) {
      heat[src] += 1.0;
      for (const auto& [y, x] : inst.pixels) {
        const size_t c = static_cast<size_t>(y - oy) * lw + (x - ox);
        // 9-point neighborhood mean over the padded window (zeros outside).
        double s = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) s += heat[c + static_cast<size_t>(dy) * lw + dx];
        next[c] = s / 9.0;
      }
      for (const auto& [y, x] : inst.pixels) {
        const size_t c = static_cast<size_t>(y - oy) * lw + (x - ox);
        heat[c] = next[c];
      }
    }

    for (const auto& [y, x] : inst.pixels) {
      const size_t c = static_cast<size_t>(y - oy) * lw + (x - ox);
      const double gy = heat[c + lw] - heat[c - lw];
      const double gx = heat[c + 1] - heat[c - 1];
      const double norm = std::sqrt(gy * gy + gx * gx);
      const size_t gi = out.idx(y, x);
      if (norm > 1e-12) {
        out.flow_y[gi] = static_cast<float>(gy / norm);
        out.flow_x[gi] = static_cast<float>(gx / norm);
      }
      // 1-pixel or fully symmetric degenerate pixels keep zero flow.
    }
  }
  return out;
}

namespace {

float bilinear(const std::vector<float>& grid, int h, int w, double y, double x) {
  y = std::clamp(y, 0.0, h - 1.0);
  x = std::clamp(x, 0.0, w - 1.0);
  const int y0 = std::min(static_cast<int>(y), h - 2 >= 0 ? h - 2 : 0);
  const int x0 = std::min(static_cast<int>(x), w - 2 >= 0 ? w - 2 : 0);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = y - y0, fx = x - x0;
  const size_t r0 = static_cast<size_t>(y0) * w, r1 = static_cast<size_t>(y1) * w;
  const double top = grid[r0 + x0] + fx * (grid[r0 + x1] - grid[r0 + x0]);
  const double bot = grid[r1 + x0] + fx * (grid[r1 + x1] - grid[r1 + x0]);
  return static_cast<float>(top + fy * (bot - top));
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) { while (parent[a] != a) a = parent[a] = parent[parent[a]]; return a; }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

InstanceMask decodeFlows(const FlowTarget& flows, const DecodeConfig& cfg) {
  cfg.validate();
  const int h = flows.height, w = flows.width;
  InstanceMask out(h, w);

  std::vector<size_t> active;
  for (size_t i = 0; i < flows.prob.size(); ++i)
    if (flows.prob[i] > cfg.prob_threshold) active.push_back(i);
  if (active.empty()) return out;

  // Follow the flow field to each pixel's terminal point.
  std::vector<std::pair<double, double>> terminal(active.size());
  for (size_t k = 0; k < active.size(); ++k) {
    double py = static_cast<double>(active[k] / w);
    double px = static_cast<double>(active[k] % w);
    for (int s = 0; s < cfg.n_steps; ++s) {
      const double vy = bilinear(flows.flow_y, h, w, py, px);
      const double vx = bilinear(flows.flow_x, h, w, py, px);
      py = std::clamp(py + cfg.step_size * vy, 0.0, h - 1.0);
      px = std::clamp(px + cfg.step_size * vx, 0.0, w - 1.0);
    }
    terminal[k] = {py, px};
  }

  // Cluster terminal points: bin to integer cells, merge occupied cells
  // within the cluster radius.
  std::unordered_map<int64_t, int> bin_id;
  std::vector<std::pair<int, int>> bins;
  std::vector<int> pixel_bin(active.size());
  for (size_t k = 0; k < active.size(); ++k) {
    const int by = static_cast<int>(std::lround(terminal[k].first));
    const int bx = static_cast<int>(std::lround(terminal[k].second));
    const int64_t key = static_cast<int64_t>(by) * (w + 2) + bx;
    auto it = bin_id.find(key);
    if (it == bin_id.end()) {
      it = bin_id.emplace(key, static_cast<int>(bins.size())).first;
      bins.emplace_back(by, bx);
    }
    pixel_bin[k] = it->second;
  }

  UnionFind uf(static_cast<int>(bins.size()));
  const int reach = static_cast<int>(std::ceil(cfg.cluster_radius));
  for (size_t b = 0; b < bins.size(); ++b) {
    const auto [by, bx] = bins[b];
    for (int dy = 0; dy <= reach; ++dy) {
      for (int dx = -reach; dx <= reach; ++dx) {
        if (dy == 0 && dx <= 0) continue;
        if (dy * dy + dx * dx > cfg.cluster_radius * cfg.cluster_radius) continue;
        auto it = bin_id.find(static_cast<int64_t>(by + dy) * (w + 2) + (bx + dx));
        if (it != bin_id.end()) uf.unite(static_cast<int>(b), it->second);
      }
    }
  }

  std::unordered_map<int, int32_t> root_label;
  std::vector<int> label_area;
  for (size_t k = 0; k < active.size(); ++k) {
    const int root = uf.find(pixel_bin[k]);
    auto it = root_label.find(root);
    if (it == root_label.end()) {
      it = root_label.emplace(root, static_cast<int32_t>(label_area.size() + 1)).first;
      label_area.push_back(0);
    }
    out.labels[active[k]] = it->second;
    ++label_area[it->second - 1];
  }

  if (cfg.min_size > 0) {
    for (auto& v : out.labels)
      if (v > 0 && label_area[v - 1] < cfg.min_size) v = 0;
  }
  out.compact();
  return out;
}

}  // namespace cyclepose::flowcodec
