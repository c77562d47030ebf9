#include "cyclepose/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "cyclepose/imageio.hpp"

namespace cyclepose::data {

namespace fs = std::filesystem;

DatasetManifest DatasetManifest::fromConfig(const config::Table& cfg) {
  DatasetManifest m;
  m.name = cfg.getString("dataset", "name", "dataset");
  m.image_dir = cfg.getString("dataset", "image_dir", "");
  const std::string mask_dir = cfg.getString("dataset", "mask_dir", "");
  if (!mask_dir.empty()) m.mask_dir = mask_dir;
  m.train = cfg.getStrings("dataset", "train");
  m.val = cfg.getStrings("dataset", "val");
  m.test = cfg.getStrings("dataset", "test");
  m.norm_lo_percentile = cfg.getDouble("dataset", "norm_lo_percentile", 1.0);
  m.norm_hi_percentile = cfg.getDouble("dataset", "norm_hi_percentile", 99.0);
  m.allow_rgb = cfg.getBool("dataset", "allow_rgb", false);
  return m;
}

float percentile(const IntensityImage& img, double p) {
  if (img.data.empty()) throw ConfigError("percentile of empty image");
  std::vector<float> v = img.data;
  const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * (v.size() - 1);
  const size_t k = static_cast<size_t>(rank);
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

namespace {

ImageRecord makeRecord(const DatasetManifest& m, const std::string& name, bool with_mask) {
  ImageRecord rec;
  rec.name = name;
  rec.image_path = m.image_dir / name;
  if (!fs::exists(rec.image_path))
    throw IoError("manifest lists missing file: " + rec.image_path.string());
  const auto img = imageio::readIntensity(rec.image_path, m.allow_rgb);
  rec.norm_lo = percentile(img, m.norm_lo_percentile);
  rec.norm_hi = percentile(img, m.norm_hi_percentile);
  if (rec.norm_hi <= rec.norm_lo) rec.norm_hi = rec.norm_lo + 1e-6f;
  if (with_mask && m.mask_dir) {
    fs::path mp = *m.mask_dir / name;
    if (!fs::exists(mp)) {
      // Common layout: masks share the stem with a different extension.
      for (const char* ext : {".png", ".tif", ".tiff"}) {
        fs::path alt = *m.mask_dir / (fs::path(name).stem().string() + ext);
        if (fs::exists(alt)) { mp = alt; break; }
      }
    }
    if (fs::exists(mp)) {
      imageio::readMask(mp);  // validates label content
      rec.mask_path = mp;
    }
  }
  return rec;
}

}  // namespace

Dataset ingest(const DatasetManifest& manifest) {
  if (manifest.train.empty() && manifest.val.empty() && manifest.test.empty())
    throw ConfigError("ingest: manifest lists no files");
  if (!fs::is_directory(manifest.image_dir))
    throw IoError("ingest: image_dir does not exist: " + manifest.image_dir.string());

  std::set<std::string> seen;
  for (const auto* split : {&manifest.train, &manifest.val, &manifest.test})
    for (const auto& name : *split)
      if (!seen.insert(name).second)
        throw ConfigError("ingest: file appears in multiple splits: " + name);

  Dataset ds;
  ds.manifest = manifest;
  // Unsupervised contract: the train split never resolves mask paths.
  for (const auto& name : manifest.train) ds.train.push_back(makeRecord(manifest, name, false));
  for (const auto& name : manifest.val) ds.val.push_back(makeRecord(manifest, name, true));
  for (const auto& name : manifest.test) ds.test.push_back(makeRecord(manifest, name, true));
  return ds;
}

IntensityImage Dataset::loadNormalized(const ImageRecord& rec) const {
  auto img = imageio::readIntensity(rec.image_path, manifest.allow_rgb);
  const float lo = rec.norm_lo, span = rec.norm_hi - rec.norm_lo;
  for (auto& v : img.data) v = std::clamp((v - lo) / span, 0.f, 1.f);
  return img;
}

void AugmentConfig::validate() const {
  if (crop < 1) throw ConfigError("augment: crop must be positive");
  if (scale_range.first <= 0 || scale_range.first > scale_range.second)
    throw ConfigError("augment: scale_range invalid");
}

std::pair<IntensityImage, std::optional<InstanceMask>> augment(
    const IntensityImage& image, const std::optional<InstanceMask>& mask,
    const AugmentConfig& cfg, uint64_t seed) {
  cfg.validate();
  if (mask && (mask->height != image.height || mask->width != image.width))
    throw ConfigError("augment: image/mask shape mismatch");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rot(-cfg.rotation_deg, cfg.rotation_deg);
  std::uniform_real_distribution<double> scl(cfg.scale_range.first, cfg.scale_range.second);
  std::uniform_real_distribution<double> trs(-cfg.translation_px, cfg.translation_px);
  const double angle = rot(rng), scale = scl(rng), ty = trs(rng), tx = trs(rng);

  const cv::Point2f center(image.width / 2.f, image.height / 2.f);
  cv::Mat M = cv::getRotationMatrix2D(center, angle, scale);
  M.at<double>(0, 2) += tx;
  M.at<double>(1, 2) += ty;

  cv::Mat src(image.height, image.width, CV_32F, const_cast<float*>(image.data.data()));
  cv::Mat w_img;
  cv::warpAffine(src, w_img, M, src.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT);

  cv::Mat w_mask;
  if (mask) {
    cv::Mat msrc(mask->height, mask->width, CV_32S, const_cast<int32_t*>(mask->labels.data()));
    msrc.convertTo(msrc, CV_32F);
    cv::warpAffine(msrc, w_mask, M, msrc.size(), cv::INTER_NEAREST, cv::BORDER_CONSTANT, 0);
  }

  const int ch = std::min(cfg.crop, image.height), cw = std::min(cfg.crop, image.width);
  const int y0 = (image.height - ch) / 2, x0 = (image.width - cw) / 2;

  IntensityImage out_img(ch, cw);
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x) out_img.at(y, x) = w_img.at<float>(y0 + y, x0 + x);

  std::optional<InstanceMask> out_mask;
  if (mask) {
    out_mask.emplace(ch, cw);
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x)
        out_mask->at(y, x) = static_cast<int32_t>(std::lround(w_mask.at<float>(y0 + y, x0 + x)));
  }
  return {std::move(out_img), std::move(out_mask)};
}

std::vector<std::pair<IntensityImage, InstanceMask>> dihedralExpand(const IntensityImage& image,
                                                                    const InstanceMask& mask) {
  std::vector<std::pair<IntensityImage, InstanceMask>> out;
  auto rot90 = [](auto& grid, auto& make) {
    auto r = make(grid.width, grid.height);
    for (int y = 0; y < grid.height; ++y)
      for (int x = 0; x < grid.width; ++x) r.at(x, grid.height - 1 - y) = grid.at(y, x);
    return r;
  };
  auto flipH = [](auto& grid, auto& make) {
    auto r = make(grid.height, grid.width);
    for (int y = 0; y < grid.height; ++y)
      for (int x = 0; x < grid.width; ++x) r.at(y, grid.width - 1 - x) = grid.at(y, x);
    return r;
  };
  auto make_img = [](int h, int w) { return IntensityImage(h, w); };
  auto make_msk = [](int h, int w) { return InstanceMask(h, w); };

  IntensityImage img = image;
  InstanceMask msk = mask;
  for (int r = 0; r < 4; ++r) {
    out.emplace_back(img, msk);
    out.emplace_back(flipH(img, make_img), flipH(msk, make_msk));
    img = rot90(img, make_img);
    msk = rot90(msk, make_msk);
  }
  return out;
}

}  // namespace cyclepose::data
