#include "cyclepose/losses.hpp"

namespace cyclepose::losses {

void LossWeights::validate() const {
  if (w_cyc_img < 0 || w_cyc_mask < 0 || w_perlin < 0 || lambda_m2i < 0 || flow_scale < 0)
    throw std::invalid_argument("loss weights must be >= 0");
  if (t_n < 0 || t_n > 1 || t_b < 0 || t_b > 1)
    throw std::invalid_argument("t_n, t_b must be in [0,1]");
  if (dilation_d < 0) throw std::invalid_argument("dilation_d must be >= 0");
}

SegLossTerms segLoss(const torch::Tensor& pred, const torch::Tensor& target, double flow_scale) {
  TORCH_CHECK(pred.sizes() == target.sizes(), "segLoss: shape mismatch ", pred.sizes(), " vs ",
              target.sizes());
  TORCH_CHECK(pred.size(1) == 3, "segLoss: expected 3 channels");
  const auto pred_flow = pred.narrow(1, 0, 2) * flow_scale;
  const auto tgt_flow = target.narrow(1, 0, 2) * flow_scale;
  SegLossTerms terms;
  terms.flow_l2 = torch::mse_loss(pred_flow, tgt_flow);
  terms.prob_ce = torch::binary_cross_entropy_with_logits(pred.narrow(1, 2, 1),
                                                          target.narrow(1, 2, 1));
  return terms;
}

namespace {

// Detached per-image extrema over all dims but batch, broadcast back to NCHW.
std::pair<torch::Tensor, torch::Tensor> imageExtrema(const torch::Tensor& img) {
  const auto flat = img.detach().reshape({img.size(0), -1});
  const auto cmin = std::get<0>(flat.min(1)).reshape({img.size(0), 1, 1, 1});
  const auto cmax = std::get<0>(flat.max(1)).reshape({img.size(0), 1, 1, 1});
  return {cmin, cmax};
}

}  // namespace

torch::Tensor m2iNuclei(const torch::Tensor& mask, const torch::Tensor& fake_img, double t_n) {
  TORCH_CHECK(mask.sizes() == fake_img.sizes(), "m2iNuclei: shape mismatch");
  const auto [cmin, cmax] = imageExtrema(fake_img);
  const auto fg = (mask > 0).to(fake_img.dtype());
  return fg * torch::clamp_min(t_n * (cmax - cmin) + cmin - fake_img, 0.0);
}

torch::Tensor m2iBg(const torch::Tensor& mask, const torch::Tensor& fake_img, double t_b,
                    int dilation_d) {
  TORCH_CHECK(mask.sizes() == fake_img.sizes(), "m2iBg: shape mismatch");
  auto fg = (mask > 0).to(fake_img.dtype());
  if (dilation_d > 1) {
    // Square-kernel dilation of the nucleus mask; the grown band is the
    // unconstrained transition zone.
    fg = torch::max_pool2d(fg, dilation_d, 1, dilation_d / 2);
    if (dilation_d % 2 == 0)  // even kernels shift the grid by one
      fg = fg.slice(2, 0, mask.size(2)).slice(3, 0, mask.size(3));
  }
  const auto bg = 1.0 - (fg > 0).to(fake_img.dtype());
  const auto [cmin, cmax] = imageExtrema(fake_img);
  return bg * torch::clamp_min(fake_img - cmin - t_b * (cmax - cmin), 0.0);
}

torch::Tensor m2iTotal(const torch::Tensor& mask, const torch::Tensor& fake_img,
                       const LossWeights& w) {
  const auto grid = m2iNuclei(mask, fake_img, w.t_n) + m2iBg(mask, fake_img, w.t_b, w.dilation_d);
  const double n_pixels = static_cast<double>(grid.numel() / grid.size(0));
  return w.lambda_m2i / n_pixels * grid.sum() / grid.size(0);
}

torch::Tensor lsganLoss(const torch::Tensor& scores, bool target_real) {
  const auto target = target_real ? torch::ones_like(scores) : torch::zeros_like(scores);
  return torch::mse_loss(scores, target);
}

}  // namespace cyclepose::losses
