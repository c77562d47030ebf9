// cyclepose command-line interface: synth, train, infer, eval, select, ablate.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cyclepose/data.hpp"
#include "cyclepose/engine.hpp"
#include "cyclepose/imageio.hpp"
#include "cyclepose/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cyclepose;

namespace {

constexpr const char* kVersion = "cyclepose 0.1.0";

config::Table loadConfig(const std::string& path, int64_t seed_override) {
  config::Table t = path.empty() ? config::Table{} : config::Table::parseFile(path);
  if (seed_override >= 0) t.set("", "seed", seed_override);
  return t;
}

std::vector<fs::path> listImages(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (ext == ".png" || ext == ".tif" || ext == ".tiff") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void applyAblation(config::Table& t, const std::string& ablate) {
  std::stringstream ss(ablate);
  std::string term;
  while (std::getline(ss, term, ',')) {
    if (term.empty()) continue;
    if (term != "adv" && term != "perlin" && term != "m2i" && term != "cyc")
      throw ConfigError("unknown ablation term: " + term);
    t.set("ablation", term, false);
  }
}

void writeManifest(const fs::path& run_dir, const config::Table& cfg,
                   const data::Dataset& dataset) {
  json j;
  j["config_hash"] = cfg.contentHash();
  j["seed"] = cfg.getInt("", "seed", 0);
  j["dataset"] = dataset.manifest.name;
  j["splits"] = {{"train", dataset.train.size()},
                 {"val", dataset.val.size()},
                 {"test", dataset.test.size()}};
  j["version"] = kVersion;
  std::ofstream(run_dir / "manifest.json") << j.dump(2) << "\n";
}

int cmdSynth(const std::string& config_path, int64_t seed, int n, const std::string& out_dir,
             int size) {
  auto t = loadConfig(config_path, seed);
  t.set("train", "crop", static_cast<int64_t>(size));
  const auto rc = engine::RunConfig::fromTable(t);
  fs::create_directories(out_dir);
  std::mt19937_64 rng(static_cast<uint64_t>(t.getInt("", "seed", 0)));
  for (int i = 0; i < n; ++i) {
    auto mask = synthmask::elasticDeform(synthmask::sampleEllipseMask(rc.ellipse, rng()),
                                         rc.deform, rng());
    const auto img = perlin::renderPerlinImage(mask, rc.perlin_cfg, rng());
    const auto flow = flowcodec::encodeFlows(mask);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%04d", i);
    imageio::writeMask(fs::path(out_dir) / (std::string("mask_") + stem + ".png"), mask);
    imageio::writeIntensity(fs::path(out_dir) / (std::string("image_") + stem + ".png"), img);
    imageio::writeFlow(fs::path(out_dir) / (std::string("flow_") + stem + ".tiff"), flow);
  }
  std::cout << "wrote " << n << " (mask, image, flow) triples to " << out_dir << "\n";
  return 0;
}

int cmdTrain(const std::string& config_path, int64_t seed, const std::string& ablate,
             const std::string& out_dir, int epochs_override, bool resume) {
  auto t = loadConfig(config_path, seed);
  applyAblation(t, ablate);
  const auto rc = engine::RunConfig::fromTable(t);
  auto dataset = data::ingest(data::DatasetManifest::fromConfig(t));

  fs::create_directories(out_dir);
  writeManifest(out_dir, t, dataset);
  engine::Trainer trainer(rc, dataset, out_dir, t.contentHash());
  if (resume && trainer.resumeLatest())
    std::cout << "resumed at epoch " << trainer.state().epoch << "\n";
  const int until = epochs_override > 0 ? epochs_override
                                        : rc.train.epochs_const + rc.train.epochs_decay;
  trainer.runEpochs(until);
  std::cout << "trained to epoch " << trainer.state().epoch << "; run dir: " << out_dir << "\n";
  return 0;
}

int cmdInfer(const std::string& weights, const std::string& in_dir, const std::string& out_dir,
             const std::string& config_path) {
  const auto t = loadConfig(config_path, -1);
  const auto rc = engine::RunConfig::fromTable(t);
  auto seg = nets::buildSegmenter(rc.s_spec);
  engine::loadSegmenter(weights, seg);
  fs::create_directories(out_dir);
  int n = 0;
  for (const auto& path : listImages(in_dir)) {
    auto img = imageio::readIntensity(path, /*allow_rgb=*/true);
    const float lo = data::percentile(img, 1.0), hi = data::percentile(img, 99.0);
    const float span = std::max(hi - lo, 1e-6f);
    for (auto& v : img.data) v = std::clamp((v - lo) / span, 0.f, 1.f);
    const auto mask = engine::infer(img, seg, rc.decode);
    imageio::writeMask(fs::path(out_dir) / (path.stem().string() + ".png"), mask);
    ++n;
  }
  std::cout << "segmented " << n << " images into " << out_dir << "\n";
  return 0;
}

int cmdEval(const std::string& pred_dir, const std::string& gt_dir, const std::string& out_json,
            bool per_image_agg) {
  const auto preds = listImages(pred_dir);
  if (preds.empty()) throw IoError("no predictions in " + pred_dir);
  std::vector<InstanceMask> pred_masks, gt_masks;
  json per_image = json::array();
  for (const auto& p : preds) {
    fs::path g = fs::path(gt_dir) / p.filename();
    if (!fs::exists(g)) {
      for (const char* ext : {".png", ".tif", ".tiff"}) {
        fs::path alt = fs::path(gt_dir) / (p.stem().string() + ext);
        if (fs::exists(alt)) { g = alt; break; }
      }
    }
    if (!fs::exists(g)) throw IoError("missing ground truth for " + p.filename().string());
    pred_masks.push_back(imageio::readMask(p));
    gt_masks.push_back(imageio::readMask(g));
    const auto r50 = metrics::matchInstances(pred_masks.back(), gt_masks.back(), 0.5);
    const auto pq = metrics::panopticQuality(r50);
    per_image.push_back({{"image", p.filename().string()},
                         {"jac_50", metrics::jaccard(r50)},
                         {"tp", r50.tp},
                         {"fp", r50.fp},
                         {"fn", r50.fn},
                         {"pq_50", pq.pq},
                         {"sq_50", pq.sq},
                         {"dq_50", pq.dq}});
  }
  const auto sweep = metrics::jaccardSweep(pred_masks, gt_masks, !per_image_agg);

  json agg;
  agg["jac_50"] = sweep.jac_50;
  agg["jac_50_95"] = sweep.jac_50_95;
  agg["per_tau"] = sweep.per_tau;
  agg["aggregation"] = per_image_agg ? "per_image" : "pooled";
  json out = {{"aggregate", agg}, {"per_image", per_image}};
  if (!out_json.empty()) {
    std::ofstream(out_json) << out.dump(2) << "\n";
  }
  std::cout << "JAC_0.5 = " << sweep.jac_50 << "  JAC_0.5:0.05:0.95 = " << sweep.jac_50_95
            << "  (" << preds.size() << " images)\n";
  return 0;
}

std::vector<std::pair<IntensityImage, InstanceMask>> loadValPairs(const fs::path& val_dir) {
  const fs::path img_dir = val_dir / "images", msk_dir = val_dir / "masks";
  std::vector<std::pair<IntensityImage, InstanceMask>> pairs;
  for (const auto& p : listImages(img_dir)) {
    fs::path g;
    for (const char* ext : {".png", ".tif", ".tiff"}) {
      fs::path alt = msk_dir / (p.stem().string() + ext);
      if (fs::exists(alt)) { g = alt; break; }
    }
    if (g.empty()) throw IoError("missing mask for validation image " + p.filename().string());
    auto img = imageio::readIntensity(p, true);
    const float lo = data::percentile(img, 1.0), hi = data::percentile(img, 99.0);
    const float span = std::max(hi - lo, 1e-6f);
    for (auto& v : img.data) v = std::clamp((v - lo) / span, 0.f, 1.f);
    pairs.emplace_back(std::move(img), imageio::readMask(g));
  }
  return pairs;
}

int cmdSelect(const std::string& runs_dir, const std::string& val_dir,
              const std::string& config_path) {
  const auto t = loadConfig(config_path, -1);
  const auto rc = engine::RunConfig::fromTable(t);

  std::vector<fs::path> cands;
  for (const auto& e : fs::recursive_directory_iterator(runs_dir))
    if (e.path().extension() == ".seg") cands.push_back(e.path());
  std::sort(cands.begin(), cands.end());
  if (cands.empty()) throw IoError("no segmenter exports (*.seg) under " + runs_dir);

  const auto pairs = loadValPairs(val_dir);
  std::vector<double> scores;
  const size_t best = engine::selectModel(cands, pairs, rc.s_spec, rc.decode, &scores);
  for (size_t i = 0; i < cands.size(); ++i)
    std::cout << (i == best ? "* " : "  ") << cands[i].string() << "  JAC_0.5:0.05:0.95 = "
              << scores[i] << "\n";
  std::cout << cands[best].string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CyclePose: annotation-free nuclei instance segmentation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir, in_dir, weights, pred_dir, gt_dir, runs_dir, val_dir;
  std::string ablate_terms, out_json;
  int64_t seed = -1;
  int n = 10, size = 224, epochs = 0;
  bool resume = false, per_image = false;

  auto* synth = app.add_subcommand("synth", "Generate synthetic (mask, image, flow) triples");
  synth->add_option("--config", config_path);
  synth->add_option("--seed", seed);
  synth->add_option("--n", n, "number of triples");
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--size", size, "canvas side length");

  auto* train = app.add_subcommand("train", "Train CyclePose on a dataset");
  train->add_option("--config", config_path)->required();
  train->add_option("--seed", seed);
  train->add_option("--ablate", ablate_terms, "comma list of adv,perlin,m2i,cyc to drop");
  train->add_option("--out", out_dir)->required();
  train->add_option("--epochs", epochs, "stop after this epoch (override)");
  train->add_flag("--resume", resume);

  auto* infer = app.add_subcommand("infer", "Segment a folder of images with exported S weights");
  infer->add_option("--weights", weights)->required();
  infer->add_option("--in", in_dir)->required();
  infer->add_option("--out", out_dir)->required();
  infer->add_option("--config", config_path);

  auto* eval = app.add_subcommand("eval", "Instance metrics for predictions vs ground truth");
  eval->add_option("--pred", pred_dir)->required();
  eval->add_option("--gt", gt_dir)->required();
  eval->add_option("--out", out_json, "write metrics JSON here");
  eval->add_flag("--per-image", per_image, "average per-image instead of pooling counts");

  auto* select = app.add_subcommand("select", "Pick the best checkpoint on the validation subset");
  select->add_option("--runs", runs_dir)->required();
  select->add_option("--val", val_dir, "folder with images/ and masks/")->required();
  select->add_option("--config", config_path);

  auto* ablate = app.add_subcommand("ablate", "Train with loss terms removed");
  ablate->add_option("--config", config_path)->required();
  ablate->add_option("--seed", seed);
  ablate->add_option("--drop", ablate_terms, "comma list of adv,perlin,m2i,cyc")->required();
  ablate->add_option("--out", out_dir)->required();
  ablate->add_option("--epochs", epochs);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmdSynth(config_path, seed, n, out_dir, size);
    if (train->parsed()) return cmdTrain(config_path, seed, ablate_terms, out_dir, epochs, resume);
    if (infer->parsed()) return cmdInfer(weights, in_dir, out_dir, config_path);
    if (eval->parsed()) return cmdEval(pred_dir, gt_dir, out_json, per_image);
    if (select->parsed()) return cmdSelect(runs_dir, val_dir, config_path);
    if (ablate->parsed()) return cmdTrain(config_path, seed, ablate_terms, out_dir, epochs, false);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
