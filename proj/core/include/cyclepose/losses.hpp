#pragma once

#include <torch/torch.h>

namespace cyclepose::losses {

struct LossWeights {
  double w_cyc_img = 10.0;
  double w_cyc_mask = 15.0;
  double w_perlin = 15.0;
  double lambda_m2i = 7.5;
  double t_n = 0.2;
  double t_b = 0.3;
  int dilation_d = 5;  // px, square kernel for the background transition zone
  double flow_scale = 5.0;  // flow-term scaling inside the segmentation loss

  void validate() const;
};

struct SegLossTerms {
  torch::Tensor flow_l2;  // scalar, includes the flow scaling
  torch::Tensor prob_ce;  // scalar
  torch::Tensor total() const { return flow_l2 + prob_ce; }
};

/// Segmentation loss: MSE over the two flow channels (targets and
/// predictions on the same scale, scaled by flow_scale) plus binary
/// cross-entropy between the prob logit and the binary target.
/// pred and target are N x 3 x H x W (flow_y, flow_x, prob); pred's third
/// channel is a logit, target's is binary.
SegLossTerms segLoss(const torch::Tensor& pred, const torch::Tensor& target,
                     double flow_scale = 5.0);

/// Per-pixel minimum-intensity penalty on nucleus pixels:
/// 1[m=1] * max(t_n * (c_max - c_min) + c_min - c, 0).
/// The image extrema are detached normalization constants.
torch::Tensor m2iNuclei(const torch::Tensor& mask, const torch::Tensor& fake_img, double t_n);

/// Per-pixel maximum-intensity penalty on clear background (the nucleus mask
/// dilated by a square kernel of size d is exempt):
/// 1[m_bar=1] * max(c - c_min - t_b * (c_max - c_min), 0).
torch::Tensor m2iBg(const torch::Tensor& mask, const torch::Tensor& fake_img, double t_b,
                    int dilation_d);

/// lambda / |m| * sum(nuclei + bg) over all pixels.
torch::Tensor m2iTotal(const torch::Tensor& mask, const torch::Tensor& fake_img,
                       const LossWeights& w);

/// Least-squares GAN objective. For the generator side target_real=true on
/// fake scores; the discriminator averages real-vs-1 and fake-vs-0 halves.
torch::Tensor lsganLoss(const torch::Tensor& scores, bool target_real);

/// Named per-step loss components; total() is their plain sum (weights are
/// already applied inside each component).
struct LossRecord {
  double adv_s = 0.0;   // adversarial term backing S (image cycle direction)
  double adv_g = 0.0;   // adversarial term backing G (mask cycle direction)
  double cyc_img = 0.0;
  double cyc_mask = 0.0;
  double perlin = 0.0;
  double m2i = 0.0;
  double d_img = 0.0;   // discriminator updates, logged separately
  double d_seg = 0.0;
  double total() const { return adv_s + adv_g + cyc_img + cyc_mask + perlin + m2i; }
};

}  // namespace cyclepose::losses
