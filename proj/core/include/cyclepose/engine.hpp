#pragma once

#include <torch/torch.h>

#include <deque>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "cyclepose/common.hpp"
#include "cyclepose/config.hpp"
#include "cyclepose/data.hpp"
#include "cyclepose/flowcodec.hpp"
#include "cyclepose/losses.hpp"
#include "cyclepose/nets.hpp"
#include "cyclepose/perlin.hpp"
#include "cyclepose/synthmask.hpp"

namespace cyclepose::engine {

struct AblationFlags {
  bool adv = true;
  bool perlin = true;
  bool m2i = true;
  bool cyc = true;
};

struct TrainConfig {
  int epochs_const = 100;
  int epochs_decay = 100;
  double lr = 0.0008;
  double weight_decay = 0.01;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 1;
  int pool_size = 50;
  uint64_t seed = 0;
  AblationFlags ablation;
  int crop = 224;
  int steps_per_epoch = 0;      // 0: one step per training image
  int checkpoint_every = 5;     // epochs; also the model-selection cadence

  void validate() const;
};

/// Piecewise-linear schedule: constant lr for the first epochs_const epochs,
/// then linear decay to zero over epochs_decay more.
double lrAt(int epoch, const TrainConfig& cfg);

/// Buffer of previously generated outputs; once full, a query returns the
/// fresh item or swaps it with a stored one with probability 1/2.
class ImagePool {
 public:
  explicit ImagePool(int capacity = 50) : capacity_(capacity) {}
  torch::Tensor query(const torch::Tensor& fresh, std::mt19937_64& rng);
  size_t size() const { return buffer_.size(); }
  // Buffer access for checkpointing: the stored fakes are part of the
  // training state and must survive a resume for bitwise reproducibility.
  const std::vector<torch::Tensor>& buffer() const { return buffer_; }
  void setBuffer(std::vector<torch::Tensor> buf) { buffer_ = std::move(buf); }

 private:
  int capacity_;
  std::vector<torch::Tensor> buffer_;
};

struct Batch {
  torch::Tensor real_img;     // 1 x 1 x H x W, in [-1, 1]
  torch::Tensor synth_flow;   // 1 x 3 x H x W, flow target of the synthetic mask
  torch::Tensor synth_mask;   // 1 x 1 x H x W, binary
  torch::Tensor perlin_img;   // 1 x 1 x H x W, in [-1, 1]
  torch::Tensor perlin_flow;  // 1 x 3 x H x W
};

/// All trainable state of one run.
struct TrainState {
  nets::Generator generator{nullptr};
  nets::Segmenter segmenter{nullptr};
  nets::Discriminator d_img{nullptr};
  nets::Discriminator d_seg{nullptr};
  std::unique_ptr<torch::optim::AdamW> opt_gs;       // joint G + S
  std::unique_ptr<torch::optim::AdamW> opt_d;        // both discriminators
  ImagePool pool_img{50};
  ImagePool pool_seg{50};
  std::mt19937_64 rng;  // pool swaps + data sampling; checkpointed
  int64_t step = 0;
  int epoch = 0;

  static TrainState init(const TrainConfig& cfg, const nets::GeneratorSpec& g_spec = {},
                         const nets::SegmenterSpec& s_spec = {});
  void setLr(double lr);
};

/// One optimization step over both cycle directions, the Perlin term, the
/// mask-to-image term, and the pooled discriminator updates.
/// Throws on non-finite loss after dumping a diagnostics checkpoint next to
/// diag_dir (when provided).
losses::LossRecord trainStep(const Batch& batch, TrainState& state,
                             const losses::LossWeights& weights, const TrainConfig& cfg,
                             const std::optional<std::filesystem::path>& diag_dir = {});

/// Checkpoints hold all four networks, optimizer state, counters, RNG
/// states, and the config hash; writes are write-temp-then-rename.
void saveCheckpoint(const std::filesystem::path& path, const TrainState& state,
                    uint64_t config_hash);
void loadCheckpoint(const std::filesystem::path& path, TrainState& state,
                    uint64_t* config_hash = nullptr);
/// Weights-only export of S for standalone inference.
void exportSegmenter(const std::filesystem::path& path, const TrainState& state);
void loadSegmenter(const std::filesystem::path& path, nets::Segmenter& segmenter);

/// Normalize, forward S (reflect-padded to the required stride), sigmoid the
/// prob logit, decode flows. Input intensities in [0, 1].
InstanceMask infer(const IntensityImage& image, nets::Segmenter& segmenter,
                   const flowcodec::DecodeConfig& decode_cfg = {});

/// Evaluate JAC_{0.5:0.05:0.95} of S on the 8x dihedral expansion of the
/// given image-mask pairs (model-selection metric).
double selectionScore(nets::Segmenter& segmenter,
                      const std::vector<std::pair<IntensityImage, InstanceMask>>& val_pairs,
                      const flowcodec::DecodeConfig& decode_cfg = {});

/// Pick the best segmenter export (as written by exportSegmenter) by
/// selection score; ties break to the later one.
size_t selectModel(const std::vector<std::filesystem::path>& checkpoints,
                   const std::vector<std::pair<IntensityImage, InstanceMask>>& val_pairs,
                   const nets::SegmenterSpec& s_spec = {},
                   const flowcodec::DecodeConfig& decode_cfg = {},
                   std::vector<double>* scores_out = nullptr);

// Tensor bridges.
torch::Tensor imageToTensor(const IntensityImage& img);        // [0,1] -> 1x1xHxW in [-1,1]
torch::Tensor flowToTensor(const FlowTarget& flow);            // 1x3xHxW
torch::Tensor maskToBinaryTensor(const InstanceMask& mask);    // 1x1xHxW
IntensityImage tensorToImage(const torch::Tensor& t);          // [-1,1] -> [0,1]
FlowTarget tensorToFlow(const torch::Tensor& t, bool sigmoid_prob);

/// Full training orchestration used by the CLI: synthetic data stream,
/// epochs, loss CSV, periodic checkpoints, resume.
struct RunConfig {
  TrainConfig train;
  losses::LossWeights weights;
  synthmask::EllipseConfig ellipse;
  synthmask::DeformConfig deform;
  perlin::PerlinConfig perlin_cfg;
  flowcodec::DecodeConfig decode;
  data::AugmentConfig augment;
  nets::GeneratorSpec g_spec;
  nets::SegmenterSpec s_spec;

  static RunConfig fromTable(const config::Table& t);
};

class Trainer {
 public:
  Trainer(RunConfig cfg, data::Dataset dataset, std::filesystem::path run_dir,
          uint64_t config_hash);

  /// Train until the given epoch (exclusive upper bound over already-done
  /// epochs); appends to losses.csv and writes periodic checkpoints.
  void runEpochs(int until_epoch);
  /// Resume state from the latest checkpoint under run_dir, if any.
  bool resumeLatest();

  Batch makeBatch(int height, int width);
  TrainState& state() { return state_; }
  const std::vector<losses::LossRecord>& records() const { return records_; }

 private:
  RunConfig cfg_;
  data::Dataset dataset_;
  std::filesystem::path run_dir_;
  uint64_t config_hash_;
  TrainState state_;
  std::vector<losses::LossRecord> records_;
  void appendLossCsv(const losses::LossRecord& rec);
};

}  // namespace cyclepose::engine
