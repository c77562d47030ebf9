#include "cyclepose/engine.hpp"

#include <fstream>
#include <sstream>

#include "cyclepose/metrics.hpp"

namespace cyclepose::engine {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs_const < 0 || epochs_decay < 0 || lr <= 0 || weight_decay < 0 || batch_size < 1 ||
      pool_size < 1 || crop < 8)
    throw ConfigError("train config: values must be positive");
  if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1)
    throw ConfigError("train config: betas must be in (0,1)");
  if (!ablation.cyc && !ablation.adv && !ablation.perlin && !ablation.m2i)
    throw ConfigError("train config: disabling every loss leaves nothing to train on");
}

double lrAt(int epoch, const TrainConfig& cfg) {
  if (epoch < cfg.epochs_const) return cfg.lr;
  const int past = epoch - cfg.epochs_const;
  if (past >= cfg.epochs_decay) return 0.0;
  return cfg.lr * static_cast<double>(cfg.epochs_decay - past) / cfg.epochs_decay;
}

torch::Tensor ImagePool::query(const torch::Tensor& fresh, std::mt19937_64& rng) {
  if (static_cast<int>(buffer_.size()) < capacity_) {
    buffer_.push_back(fresh.clone());
    return fresh;
  }
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5) return fresh;
  const size_t i = std::uniform_int_distribution<size_t>(0, buffer_.size() - 1)(rng);
  torch::Tensor stale = buffer_[i];
  buffer_[i] = fresh.clone();
  return stale;
}

TrainState TrainState::init(const TrainConfig& cfg, const nets::GeneratorSpec& g_spec,
                            const nets::SegmenterSpec& s_spec) {
  cfg.validate();
  torch::manual_seed(cfg.seed);
  TrainState st;
  st.generator = nets::buildGenerator(g_spec);
  st.segmenter = nets::buildSegmenter(s_spec);
  st.d_img = nets::buildDiscriminator({.in_channels = 1});
  st.d_seg = nets::buildDiscriminator({.in_channels = 3});

  std::vector<torch::Tensor> gs_params = st.generator->parameters();
  for (auto& p : st.segmenter->parameters()) gs_params.push_back(p);
  std::vector<torch::Tensor> d_params = st.d_img->parameters();
  for (auto& p : st.d_seg->parameters()) d_params.push_back(p);

  auto opts = torch::optim::AdamWOptions(cfg.lr)
                  .betas({cfg.beta1, cfg.beta2})
                  .weight_decay(cfg.weight_decay);
  st.opt_gs = std::make_unique<torch::optim::AdamW>(gs_params, opts);
  st.opt_d = std::make_unique<torch::optim::AdamW>(d_params, opts);
  st.pool_img = ImagePool(cfg.pool_size);
  st.pool_seg = ImagePool(cfg.pool_size);
  st.rng.seed(cfg.seed ^ 0xc2b2ae3d27d4eb4fULL);
  return st;
}

void TrainState::setLr(double lr) {
  for (auto* opt : {opt_gs.get(), opt_d.get()})
    for (auto& group : opt->param_groups())
      static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
}

namespace {

void setRequiresGrad(torch::nn::Module& m, bool value) {
  for (auto& p : m.parameters()) p.set_requires_grad(value);
}

// S output -> the flow-representation tensor fed to G and D_seg
// (flows pass through, prob logit mapped to probability).
torch::Tensor segOutputToRepr(const torch::Tensor& s_out) {
  return torch::cat({s_out.narrow(1, 0, 2), torch::sigmoid(s_out.narrow(1, 2, 1))}, 1);
}

}  // namespace

losses::LossRecord trainStep(const Batch& batch, TrainState& state,
                             const losses::LossWeights& weights, const TrainConfig& cfg,
                             const std::optional<fs::path>& diag_dir) {
  weights.validate();
  const auto& fl = cfg.ablation;
  losses::LossRecord rec;

  auto& G = state.generator;
  auto& S = state.segmenter;
  G->train();
  S->train();
  state.d_img->train();
  state.d_seg->train();

  // ---- G + S update (discriminators frozen) ----
  setRequiresGrad(*state.d_img, false);
  setRequiresGrad(*state.d_seg, false);
  state.opt_gs->zero_grad();

  torch::Tensor total = torch::zeros({}, batch.real_img.options());
  torch::Tensor fake_img, real_repr;

  // Mask cycle: flows -> fake image -> flows.
  fake_img = G->forward(batch.synth_flow);
  if (fl.cyc) {
    const auto cyc = losses::segLoss(S->forward(fake_img), batch.synth_flow, weights.flow_scale);
    const auto cyc_mask = cyc.total() * weights.w_cyc_mask;
    rec.cyc_mask = cyc_mask.item<double>();
    total = total + cyc_mask;
  }
  if (fl.m2i) {
    const auto m2i = losses::m2iTotal(batch.synth_mask, fake_img, weights);
    rec.m2i = m2i.item<double>();
    total = total + m2i;
  }
  if (fl.adv) {
    const auto adv_g = losses::lsganLoss(state.d_img->forward(fake_img), true);
    rec.adv_g = adv_g.item<double>();
    total = total + adv_g;
  }

  // Image cycle: real image -> flows -> reconstructed image.
  const auto s_real = S->forward(batch.real_img);
  real_repr = segOutputToRepr(s_real);
  if (fl.cyc) {
    const auto cyc_img =
        torch::l1_loss(G->forward(real_repr), batch.real_img) * weights.w_cyc_img;
    rec.cyc_img = cyc_img.item<double>();
    total = total + cyc_img;
  }
  if (fl.adv) {
    const auto adv_s = losses::lsganLoss(state.d_seg->forward(real_repr), true);
    rec.adv_s = adv_s.item<double>();
    total = total + adv_s;
  }

  // Perlin term: self-supervision of S on rendered pseudo-microscopy.
  if (fl.perlin) {
    const auto per =
        losses::segLoss(S->forward(batch.perlin_img), batch.perlin_flow, weights.flow_scale)
            .total() *
        weights.w_perlin;
    rec.perlin = per.item<double>();
    total = total + per;
  }

  auto abortNonFinite = [&](const char* where) {
    if (diag_dir) {
      std::error_code ec;
      fs::create_directories(*diag_dir, ec);
      saveCheckpoint(*diag_dir / "diagnostics.ckpt", state, 0);
    }
    throw std::runtime_error(std::string("non-finite loss in ") + where + " at step " +
                             std::to_string(state.step));
  };
  if (!std::isfinite(rec.total())) abortNonFinite("G/S objective");

  total.backward();
  state.opt_gs->step();

  setRequiresGrad(*state.d_img, true);
  setRequiresGrad(*state.d_seg, true);

  // ---- Discriminator updates on pooled fakes ----
  if (fl.adv) {
    state.opt_d->zero_grad();
    const auto fake_pooled = state.pool_img.query(fake_img.detach(), state.rng);
    auto d_img_loss = 0.5 * (losses::lsganLoss(state.d_img->forward(batch.real_img), true) +
                             losses::lsganLoss(state.d_img->forward(fake_pooled), false));
    const auto seg_pooled = state.pool_seg.query(real_repr.detach(), state.rng);
    auto d_seg_loss = 0.5 * (losses::lsganLoss(state.d_seg->forward(batch.synth_flow), true) +
                             losses::lsganLoss(state.d_seg->forward(seg_pooled), false));
    rec.d_img = d_img_loss.item<double>();
    rec.d_seg = d_seg_loss.item<double>();
    if (!std::isfinite(rec.d_img) || !std::isfinite(rec.d_seg)) abortNonFinite("discriminators");
    (d_img_loss + d_seg_loss).backward();
    state.opt_d->step();
  }

  ++state.step;
  return rec;
}

// ---------------------------------------------------------------- checkpoints

namespace {

torch::Tensor stringToTensor(const std::string& s) {
  auto t = torch::empty({static_cast<int64_t>(s.size())}, torch::kUInt8);
  std::memcpy(t.data_ptr(), s.data(), s.size());
  return t;
}

std::string tensorToString(const torch::Tensor& t) {
  const auto c = t.contiguous();
  return std::string(static_cast<const char*>(c.data_ptr()), c.numel());
}

}  // namespace

void saveCheckpoint(const fs::path& path, const TrainState& state, uint64_t config_hash) {
  torch::serialize::OutputArchive ar;
  auto writeModule = [&ar](const char* name, const torch::nn::Module& m) {
    torch::serialize::OutputArchive sub;
    m.save(sub);
    ar.write(name, sub);
  };
  writeModule("generator", *state.generator);
  writeModule("segmenter", *state.segmenter);
  writeModule("d_img", *state.d_img);
  writeModule("d_seg", *state.d_seg);
  {
    torch::serialize::OutputArchive sub;
    state.opt_gs->save(sub);
    ar.write("opt_gs", sub);
  }
  {
    torch::serialize::OutputArchive sub;
    state.opt_d->save(sub);
    ar.write("opt_d", sub);
  }
  ar.write("step", torch::tensor(static_cast<int64_t>(state.step)));
  ar.write("epoch", torch::tensor(static_cast<int64_t>(state.epoch)));
  ar.write("config_hash", torch::tensor(static_cast<int64_t>(config_hash)));
  std::ostringstream rng_ss;
  rng_ss << state.rng;
  ar.write("rng", stringToTensor(rng_ss.str()));
  ar.write("torch_rng", at::detail::getDefaultCPUGenerator().get_state());
  // The image pools feed past fakes to the discriminators; their contents are
  // training state and must be restored for a resumed run to match.
  auto writePool = [&ar](const std::string& prefix, const ImagePool& pool) {
    const auto& buf = pool.buffer();
    ar.write(prefix + "_n", torch::tensor(static_cast<int64_t>(buf.size())));
    for (size_t i = 0; i < buf.size(); ++i)
      ar.write(prefix + "_" + std::to_string(i), buf[i]);
  };
  writePool("pool_img", state.pool_img);
  writePool("pool_seg", state.pool_seg);

  const fs::path tmp = path.string() + ".tmp";
  ar.save_to(tmp.string());
  fs::rename(tmp, path);
}

void loadCheckpoint(const fs::path& path, TrainState& state, uint64_t* config_hash) {
  if (!fs::exists(path)) throw IoError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive ar;
  ar.load_from(path.string());
  auto readModule = [&ar](const char* name, torch::nn::Module& m) {
    torch::serialize::InputArchive sub;
    ar.read(name, sub);
    m.load(sub);
  };
  readModule("generator", *state.generator);
  readModule("segmenter", *state.segmenter);
  readModule("d_img", *state.d_img);
  readModule("d_seg", *state.d_seg);
  {
    torch::serialize::InputArchive sub;
    ar.read("opt_gs", sub);
    state.opt_gs->load(sub);
  }
  {
    torch::serialize::InputArchive sub;
    ar.read("opt_d", sub);
    state.opt_d->load(sub);
  }
  // Tensors read from the archive alias its storage and cannot be resized,
  // so every read needs a fresh destination.
  torch::Tensor step_t, epoch_t, hash_t, rng_t, torch_rng_t;
  ar.read("step", step_t);
  state.step = step_t.item<int64_t>();
  ar.read("epoch", epoch_t);
  state.epoch = static_cast<int>(epoch_t.item<int64_t>());
  ar.read("config_hash", hash_t);
  if (config_hash) *config_hash = static_cast<uint64_t>(hash_t.item<int64_t>());
  ar.read("rng", rng_t);
  std::istringstream rng_ss(tensorToString(rng_t));
  rng_ss >> state.rng;
  ar.read("torch_rng", torch_rng_t);
  auto gen = at::detail::getDefaultCPUGenerator();
  gen.set_state(torch_rng_t);
  auto readPool = [&ar](const std::string& prefix, ImagePool& pool) {
    torch::Tensor n_t;
    ar.read(prefix + "_n", n_t);
    const auto n = n_t.item<int64_t>();
    std::vector<torch::Tensor> buf;
    buf.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      torch::Tensor t;
      ar.read(prefix + "_" + std::to_string(i), t);
      buf.push_back(t.clone());
    }
    pool.setBuffer(std::move(buf));
  };
  readPool("pool_img", state.pool_img);
  readPool("pool_seg", state.pool_seg);
}

void exportSegmenter(const fs::path& path, const TrainState& state) {
  torch::serialize::OutputArchive ar;
  state.segmenter->save(ar);
  const fs::path tmp = path.string() + ".tmp";
  ar.save_to(tmp.string());
  fs::rename(tmp, path);
}

void loadSegmenter(const fs::path& path, nets::Segmenter& segmenter) {
  if (!fs::exists(path)) throw IoError("weights not found: " + path.string());
  torch::serialize::InputArchive ar;
  ar.load_from(path.string());
  segmenter->load(ar);
}

// ------------------------------------------------------------------ inference

torch::Tensor imageToTensor(const IntensityImage& img) {
  auto t = torch::from_blob(const_cast<float*>(img.data.data()), {1, 1, img.height, img.width},
                            torch::kFloat32)
               .clone();
  return t * 2.0 - 1.0;
}

torch::Tensor flowToTensor(const FlowTarget& flow) {
  const int64_t h = flow.height, w = flow.width;
  auto t = torch::empty({1, 3, h, w}, torch::kFloat32);
  std::memcpy(t[0][0].data_ptr<float>(), flow.flow_y.data(), sizeof(float) * h * w);
  std::memcpy(t[0][1].data_ptr<float>(), flow.flow_x.data(), sizeof(float) * h * w);
  std::memcpy(t[0][2].data_ptr<float>(), flow.prob.data(), sizeof(float) * h * w);
  return t;
}

torch::Tensor maskToBinaryTensor(const InstanceMask& mask) {
  auto t = torch::empty({1, 1, mask.height, mask.width}, torch::kFloat32);
  float* p = t.data_ptr<float>();
  for (size_t i = 0; i < mask.labels.size(); ++i) p[i] = mask.labels[i] > 0 ? 1.f : 0.f;
  return t;
}

IntensityImage tensorToImage(const torch::Tensor& t) {
  const auto c = ((t.squeeze() + 1.0) * 0.5).clamp(0.0, 1.0).to(torch::kFloat32).contiguous();
  TORCH_CHECK(c.dim() == 2, "expected one-channel image tensor");
  IntensityImage img(static_cast<int>(c.size(0)), static_cast<int>(c.size(1)));
  std::memcpy(img.data.data(), c.data_ptr<float>(), sizeof(float) * img.size());
  return img;
}

FlowTarget tensorToFlow(const torch::Tensor& t, bool sigmoid_prob) {
  auto c = t.squeeze(0).to(torch::kFloat32).contiguous();
  TORCH_CHECK(c.dim() == 3 && c.size(0) == 3, "expected 3xHxW flow tensor");
  const int h = static_cast<int>(c.size(1)), w = static_cast<int>(c.size(2));
  FlowTarget flow(h, w);
  auto prob = sigmoid_prob ? torch::sigmoid(c[2]) : c[2];
  std::memcpy(flow.flow_y.data(), c[0].contiguous().data_ptr<float>(), sizeof(float) * h * w);
  std::memcpy(flow.flow_x.data(), c[1].contiguous().data_ptr<float>(), sizeof(float) * h * w);
  std::memcpy(flow.prob.data(), prob.contiguous().data_ptr<float>(), sizeof(float) * h * w);
  return flow;
}

InstanceMask infer(const IntensityImage& image, nets::Segmenter& segmenter,
                   const flowcodec::DecodeConfig& decode_cfg) {
  torch::NoGradGuard no_grad;
  segmenter->eval();
  const int stride = 1 << (segmenter->spec.depth - 1);
  auto t = imageToTensor(image);
  const int64_t h = t.size(2), w = t.size(3);
  const int64_t ph = (stride - h % stride) % stride, pw = (stride - w % stride) % stride;
  namespace F = torch::nn::functional;
  if (ph || pw)
    t = F::pad(t, F::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReflect));
  auto out = segmenter->forward(t);
  out = out.slice(2, 0, h).slice(3, 0, w);
  return flowcodec::decodeFlows(tensorToFlow(out, /*sigmoid_prob=*/true), decode_cfg);
}

double selectionScore(nets::Segmenter& segmenter,
                      const std::vector<std::pair<IntensityImage, InstanceMask>>& val_pairs,
                      const flowcodec::DecodeConfig& decode_cfg) {
  if (val_pairs.empty()) throw ConfigError("selectionScore: empty validation subset");
  std::vector<InstanceMask> preds, gts;
  for (const auto& [img, gt] : val_pairs) {
    for (const auto& [aug_img, aug_gt] : data::dihedralExpand(img, gt)) {
      preds.push_back(infer(aug_img, segmenter, decode_cfg));
      gts.push_back(aug_gt);
    }
  }
  return metrics::jaccardSweep(preds, gts).jac_50_95;
}

size_t selectModel(const std::vector<fs::path>& checkpoints,
                   const std::vector<std::pair<IntensityImage, InstanceMask>>& val_pairs,
                   const nets::SegmenterSpec& s_spec, const flowcodec::DecodeConfig& decode_cfg,
                   std::vector<double>* scores_out) {
  if (checkpoints.empty()) throw ConfigError("selectModel: no checkpoints");
  if (val_pairs.empty()) throw ConfigError("selectModel: empty validation subset");
  size_t best = 0;
  double best_score = -1.0;
  std::vector<double> scores;
  for (size_t i = 0; i < checkpoints.size(); ++i) {
    auto seg = nets::buildSegmenter(s_spec);
    loadSegmenter(checkpoints[i], seg);
    const double score = selectionScore(seg, val_pairs, decode_cfg);
    scores.push_back(score);
    if (score >= best_score) {  // >= breaks ties toward the later checkpoint
      best_score = score;
      best = i;
    }
  }
  if (scores_out) *scores_out = std::move(scores);
  return best;
}

// -------------------------------------------------------------------- trainer

RunConfig RunConfig::fromTable(const config::Table& t) {
  RunConfig rc;
  auto& tc = rc.train;
  tc.epochs_const = static_cast<int>(t.getInt("train", "epochs_const", tc.epochs_const));
  tc.epochs_decay = static_cast<int>(t.getInt("train", "epochs_decay", tc.epochs_decay));
  tc.lr = t.getDouble("train", "lr", tc.lr);
  tc.weight_decay = t.getDouble("train", "weight_decay", tc.weight_decay);
  tc.beta1 = t.getDouble("train", "beta1", tc.beta1);
  tc.beta2 = t.getDouble("train", "beta2", tc.beta2);
  tc.batch_size = static_cast<int>(t.getInt("train", "batch_size", tc.batch_size));
  tc.pool_size = static_cast<int>(t.getInt("train", "pool_size", tc.pool_size));
  tc.seed = static_cast<uint64_t>(t.getInt("", "seed", 0));
  tc.crop = static_cast<int>(t.getInt("train", "crop", tc.crop));
  tc.steps_per_epoch = static_cast<int>(t.getInt("train", "steps_per_epoch", 0));
  tc.checkpoint_every = static_cast<int>(t.getInt("train", "checkpoint_every", 5));
  tc.ablation.adv = t.getBool("ablation", "adv", true);
  tc.ablation.perlin = t.getBool("ablation", "perlin", true);
  tc.ablation.m2i = t.getBool("ablation", "m2i", true);
  tc.ablation.cyc = t.getBool("ablation", "cyc", true);

  auto& w = rc.weights;
  w.w_cyc_img = t.getDouble("loss", "w_cyc_img", w.w_cyc_img);
  w.w_cyc_mask = t.getDouble("loss", "w_cyc_mask", w.w_cyc_mask);
  w.w_perlin = t.getDouble("loss", "w_perlin", w.w_perlin);
  w.lambda_m2i = t.getDouble("loss", "lambda_m2i", w.lambda_m2i);
  w.t_n = t.getDouble("loss", "t_n", w.t_n);
  w.t_b = t.getDouble("loss", "t_b", w.t_b);
  w.dilation_d = static_cast<int>(t.getInt("loss", "dilation_d", w.dilation_d));
  w.flow_scale = t.getDouble("loss", "flow_scale", w.flow_scale);

  auto& e = rc.ellipse;
  auto pairFrom = [&t](const char* sec, const char* key, auto& dst) {
    const auto v = t.getDoubles(sec, key);
    if (v.size() == 2) {
      using P = std::decay_t<decltype(dst.first)>;
      dst = {static_cast<P>(v[0]), static_cast<P>(v[1])};
    } else if (!v.empty()) {
      throw ConfigError(std::string("config [") + sec + "]." + key + ": expected a pair");
    }
  };
  pairFrom("ellipse", "major_axis_range", e.major_axis_range);
  pairFrom("ellipse", "eccentricity_range", e.eccentricity_range);
  e.max_overlap_fraction = t.getDouble("ellipse", "max_overlap_fraction", e.max_overlap_fraction);
  pairFrom("ellipse", "count_range", e.count_range);
  e.canvas_size = {rc.train.crop, rc.train.crop};

  pairFrom("deform", "grid_size_range", rc.deform.grid_size_range);
  pairFrom("deform", "variance_range", rc.deform.variance_range);

  auto& p = rc.perlin_cfg;
  p.octaves = static_cast<int>(t.getInt("perlin", "octaves", p.octaves));
  p.base_frequency = t.getDouble("perlin", "base_frequency", p.base_frequency);
  p.persistence = t.getDouble("perlin", "persistence", p.persistence);
  pairFrom("perlin", "fg_intensity_range", p.fg_intensity_range);
  pairFrom("perlin", "bg_intensity_range", p.bg_intensity_range);
  pairFrom("perlin", "blur_sigma_range", p.blur_sigma_range);
  p.poisson_scale = t.getDouble("perlin", "poisson_scale", p.poisson_scale);

  auto& d = rc.decode;
  d.prob_threshold = t.getDouble("decode", "prob_threshold", d.prob_threshold);
  d.min_size = static_cast<int>(t.getInt("decode", "min_size", d.min_size));
  d.n_steps = static_cast<int>(t.getInt("decode", "n_steps", d.n_steps));
  d.step_size = t.getDouble("decode", "step_size", d.step_size);
  d.cluster_radius = t.getDouble("decode", "cluster_radius", d.cluster_radius);

  auto& a = rc.augment;
  a.rotation_deg = t.getDouble("augment", "rotation_deg", a.rotation_deg);
  pairFrom("augment", "scale_range", a.scale_range);
  a.translation_px = t.getDouble("augment", "translation_px", a.translation_px);
  a.crop = rc.train.crop;

  rc.g_spec.residual_blocks =
      static_cast<int>(t.getInt("nets", "g_residual_blocks", rc.g_spec.residual_blocks));
  rc.g_spec.base_width = static_cast<int>(t.getInt("nets", "g_base_width", rc.g_spec.base_width));
  rc.s_spec.depth = static_cast<int>(t.getInt("nets", "s_depth", rc.s_spec.depth));
  rc.s_spec.base_width = static_cast<int>(t.getInt("nets", "s_base_width", rc.s_spec.base_width));
  rc.s_spec.use_style = t.getBool("nets", "s_use_style", rc.s_spec.use_style);
  return rc;
}

Trainer::Trainer(RunConfig cfg, data::Dataset dataset, fs::path run_dir, uint64_t config_hash)
    : cfg_(std::move(cfg)),
      dataset_(std::move(dataset)),
      run_dir_(std::move(run_dir)),
      config_hash_(config_hash) {
  if (dataset_.train.empty()) throw ConfigError("trainer: empty train split");
  fs::create_directories(run_dir_ / "checkpoints");
  state_ = TrainState::init(cfg_.train, cfg_.g_spec, cfg_.s_spec);
}

Batch Trainer::makeBatch(int height, int width) {
  Batch b;
  auto& rng = state_.rng;

  const size_t idx =
      std::uniform_int_distribution<size_t>(0, dataset_.train.size() - 1)(rng);
  auto real = dataset_.loadNormalized(dataset_.train[idx]);
  auto aug_cfg = cfg_.augment;
  aug_cfg.crop = height;
  auto [aug_img, unused] = data::augment(real, std::nullopt, aug_cfg, rng());
  b.real_img = imageToTensor(aug_img);

  auto ell = cfg_.ellipse;
  ell.canvas_size = {height, width};
  const auto mask =
      synthmask::elasticDeform(synthmask::sampleEllipseMask(ell, rng()), cfg_.deform, rng());
  b.synth_flow = flowToTensor(flowcodec::encodeFlows(mask));
  b.synth_mask = maskToBinaryTensor(mask);

  const auto perlin_mask =
      synthmask::elasticDeform(synthmask::sampleEllipseMask(ell, rng()), cfg_.deform, rng());
  const auto perlin_img = perlin::renderPerlinImage(perlin_mask, cfg_.perlin_cfg, rng());
  b.perlin_img = imageToTensor(perlin_img);
  b.perlin_flow = flowToTensor(flowcodec::encodeFlows(perlin_mask));
  return b;
}

void Trainer::appendLossCsv(const losses::LossRecord& rec) {
  const fs::path csv = run_dir_ / "losses.csv";
  const bool fresh = !fs::exists(csv);
  std::ofstream out(csv, std::ios::app);
  if (fresh)
    out << "step,epoch,total,adv_s,adv_g,cyc_img,cyc_mask,perlin,m2i,d_img,d_seg\n";
  out.precision(17);
  out << state_.step << ',' << state_.epoch << ',' << rec.total() << ',' << rec.adv_s << ','
      << rec.adv_g << ',' << rec.cyc_img << ',' << rec.cyc_mask << ',' << rec.perlin << ','
      << rec.m2i << ',' << rec.d_img << ',' << rec.d_seg << '\n';
}

bool Trainer::resumeLatest() {
  int best_epoch = -1;
  fs::path best_path;
  const fs::path dir = run_dir_ / "checkpoints";
  if (!fs::exists(dir)) return false;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".ckpt") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.rfind("epoch_", 0) != 0) continue;
    const int ep = std::stoi(stem.substr(6));
    if (ep > best_epoch) {
      best_epoch = ep;
      best_path = entry.path();
    }
  }
  if (best_epoch < 0) return false;
  uint64_t hash = 0;
  loadCheckpoint(best_path, state_, &hash);
  if (hash != config_hash_)
    throw ConfigError("resume: checkpoint config hash does not match the run config");
  return true;
}

void Trainer::runEpochs(int until_epoch) {
  const int steps =
      cfg_.train.steps_per_epoch > 0 ? cfg_.train.steps_per_epoch
                                     : static_cast<int>(dataset_.train.size());
  while (state_.epoch < until_epoch) {
    state_.setLr(lrAt(state_.epoch, cfg_.train));
    for (int s = 0; s < steps; ++s) {
      const auto batch = makeBatch(cfg_.train.crop, cfg_.train.crop);
      const auto rec = trainStep(batch, state_, cfg_.weights, cfg_.train, run_dir_ / "diag");
      records_.push_back(rec);
      appendLossCsv(rec);
    }
    ++state_.epoch;
    if (state_.epoch % cfg_.train.checkpoint_every == 0 || state_.epoch == until_epoch) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", state_.epoch);
      saveCheckpoint(run_dir_ / "checkpoints" / name, state_, config_hash_);
      std::snprintf(name, sizeof(name), "epoch_%04d.seg", state_.epoch);
      exportSegmenter(run_dir_ / "checkpoints" / name, state_);
    }
  }
}

}  // namespace cyclepose::engine
