#pragma once

#include <torch/torch.h>

namespace cyclepose::nets {

struct GeneratorSpec {
  int in_channels = 3;   // flow_y, flow_x, prob
  int out_channels = 1;  // grayscale image
  int residual_blocks = 9;
  int base_width = 64;
};

struct SegmenterSpec {
  int in_channels = 1;
  int out_channels = 3;  // flow_y, flow_x, prob logit
  int depth = 4;         // encoder-decoder levels
  int base_width = 32;
  bool use_style = true;
};

struct DiscriminatorSpec {
  int in_channels = 1;  // 1 for D_img, 3 for D_seg
  int base_width = 64;
  int layers = 3;       // 70x70 receptive field at the default
};

/// Residual block: reflect-pad 3x3 convs with instance norm.
struct ResnetBlockImpl : torch::nn::Module {
  explicit ResnetBlockImpl(int width);
  torch::Tensor forward(torch::Tensor x);
  torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(ResnetBlock);

/// Image generator: c7s1 stem, two stride-2 downsamples, residual blocks,
/// two transposed-conv upsamples, tanh output in [-1, 1]. Fully
/// convolutional for H, W divisible by 4.
struct GeneratorImpl : torch::nn::Module {
  explicit GeneratorImpl(const GeneratorSpec& spec = {});
  torch::Tensor forward(torch::Tensor x);
  GeneratorSpec spec;
  torch::nn::Sequential model{nullptr};
};
TORCH_MODULE(Generator);

/// Cellpose-style residual U-Net with an optional style vector: the
/// bottleneck feature is globally pooled and injected into each decoder
/// level as a learned per-channel bias.
struct SegmenterImpl : torch::nn::Module {
  explicit SegmenterImpl(const SegmenterSpec& spec = {});
  torch::Tensor forward(torch::Tensor x);
  SegmenterSpec spec;

  struct ConvBlockImpl : torch::nn::Module {
    ConvBlockImpl(int in_ch, int out_ch);
    torch::Tensor forward(torch::Tensor x);
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
    torch::nn::BatchNorm2d norm1{nullptr}, norm2{nullptr};
  };
  TORCH_MODULE_IMPL(ConvBlock, ConvBlockImpl);

  std::vector<ConvBlock> down_blocks, up_blocks;
  torch::nn::Linear style_fc{nullptr};
  std::vector<torch::nn::Linear> style_proj;
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(Segmenter);

/// PatchGAN discriminator: stride-2 conv stack to a grid of patch scores.
struct DiscriminatorImpl : torch::nn::Module {
  explicit DiscriminatorImpl(const DiscriminatorSpec& spec = {});
  torch::Tensor forward(torch::Tensor x);
  DiscriminatorSpec spec;
  torch::nn::Sequential model{nullptr};
};
TORCH_MODULE(Discriminator);

Generator buildGenerator(const GeneratorSpec& spec = {});
Segmenter buildSegmenter(const SegmenterSpec& spec = {});
Discriminator buildDiscriminator(const DiscriminatorSpec& spec = {});

int64_t parameterCount(const torch::nn::Module& m);

/// Throws if H or W is not divisible by the networks' downsampling factor.
void checkSpatial(const torch::Tensor& x, int factor);

}  // namespace cyclepose::nets
