#include "cyclepose/imageio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace cyclepose::imageio {

namespace fs = std::filesystem;

IntensityImage readIntensity(const fs::path& path, bool allow_rgb) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError("cannot read image: " + path.string());
  if (raw.channels() > 1) {
    if (!allow_rgb)
      throw IoError("RGB input without conversion flag: " + path.string());
    cv::cvtColor(raw, raw, raw.channels() == 4 ? cv::COLOR_BGRA2GRAY : cv::COLOR_BGR2GRAY);
  }
  double scale = 1.0;
  if (raw.depth() == CV_8U) scale = 1.0 / 255.0;
  else if (raw.depth() == CV_16U) scale = 1.0 / 65535.0;
  cv::Mat f;
  raw.convertTo(f, CV_32F, scale);

  IntensityImage img(f.rows, f.cols);
  std::copy_n(f.ptr<float>(), img.size(), img.data.begin());
  return img;
}

void writeIntensity(const fs::path& path, const IntensityImage& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw IoError("bit_depth must be 8 or 16");
  cv::Mat f(img.height, img.width, CV_32F, const_cast<float*>(img.data.data()));
  cv::Mat out;
  if (bit_depth == 8)
    f.convertTo(out, CV_8U, 255.0);
  else
    f.convertTo(out, CV_16U, 65535.0);
  if (!cv::imwrite(path.string(), out)) throw IoError("cannot write image: " + path.string());
}

InstanceMask readMask(const fs::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError("cannot read mask: " + path.string());
  if (raw.channels() > 1) throw IoError("mask must be single-channel: " + path.string());
  if (raw.depth() == CV_32F || raw.depth() == CV_64F) {
    // Float TIFF masks are accepted only if every value is an exact integer.
    cv::Mat rounded;
    raw.convertTo(rounded, CV_32F);
    for (int y = 0; y < rounded.rows; ++y)
      for (int x = 0; x < rounded.cols; ++x) {
        const float v = rounded.at<float>(y, x);
        if (std::abs(v - std::round(v)) > 1e-4f)
          throw IoError("non-integer mask values: " + path.string());
      }
  }
  cv::Mat labels;
  raw.convertTo(labels, CV_32S);
  InstanceMask mask(labels.rows, labels.cols);
  std::copy_n(labels.ptr<int32_t>(), mask.size(), mask.labels.begin());
  return mask;
}

void writeMask(const fs::path& path, const InstanceMask& mask) {
  if (mask.maxLabel() > 65535) throw IoError("more than 65535 labels");
  cv::Mat labels(mask.height, mask.width, CV_32S, const_cast<int32_t*>(mask.labels.data()));
  cv::Mat out;
  labels.convertTo(out, CV_16U);
  if (!cv::imwrite(path.string(), out)) throw IoError("cannot write mask: " + path.string());
}

// The three planes (flow_y, flow_x, prob) are stacked vertically into one
// single-channel float image: multi-channel float TIFFs do not round-trip
// exactly through OpenCV's codec, single-channel ones do.
void writeFlow(const fs::path& path, const FlowTarget& flow) {
  const size_t plane = size_t(flow.height) * flow.width;
  cv::Mat out(flow.height * 3, flow.width, CV_32F);
  std::memcpy(out.ptr<float>(0), flow.flow_y.data(), plane * sizeof(float));
  std::memcpy(out.ptr<float>(flow.height), flow.flow_x.data(), plane * sizeof(float));
  std::memcpy(out.ptr<float>(2 * flow.height), flow.prob.data(), plane * sizeof(float));
  if (!cv::imwrite(path.string(), out)) throw IoError("cannot write flow: " + path.string());
}

FlowTarget readFlow(const fs::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty() || raw.type() != CV_32F || raw.rows % 3 != 0)
    throw IoError("cannot read flow cache: " + path.string());
  raw = raw.isContinuous() ? raw : raw.clone();
  const int h = raw.rows / 3;
  FlowTarget flow(h, raw.cols);
  const size_t plane = size_t(h) * raw.cols;
  std::memcpy(flow.flow_y.data(), raw.ptr<float>(0), plane * sizeof(float));
  std::memcpy(flow.flow_x.data(), raw.ptr<float>(h), plane * sizeof(float));
  std::memcpy(flow.prob.data(), raw.ptr<float>(2 * h), plane * sizeof(float));
  return flow;
}

uint64_t maskContentHash(const InstanceMask& mask) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  feed(static_cast<uint64_t>(mask.height));
  feed(static_cast<uint64_t>(mask.width));
  for (int32_t v : mask.labels) feed(static_cast<uint64_t>(static_cast<uint32_t>(v)));
  return h;
}

}  // namespace cyclepose::imageio
