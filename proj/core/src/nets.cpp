#include "cyclepose/nets.hpp"

namespace cyclepose::nets {

using torch::nn::Conv2d;
using torch::nn::Conv2dOptions;
using torch::nn::ConvTranspose2d;
using torch::nn::ConvTranspose2dOptions;
using torch::nn::Functional;
using torch::nn::InstanceNorm2d;
using torch::nn::InstanceNorm2dOptions;
using torch::nn::LeakyReLU;
using torch::nn::LeakyReLUOptions;
using torch::nn::ReflectionPad2d;
using torch::nn::ReLU;

void checkSpatial(const torch::Tensor& x, int factor) {
  TORCH_CHECK(x.dim() == 4, "expected NCHW input, got dim ", x.dim());
  const auto h = x.size(2), w = x.size(3);
  TORCH_CHECK(h % factor == 0 && w % factor == 0, "spatial size ", h, "x", w,
              " not divisible by ", factor);
}

ResnetBlockImpl::ResnetBlockImpl(int width) {
  body = torch::nn::Sequential(
      ReflectionPad2d(1), Conv2d(Conv2dOptions(width, width, 3)),
      InstanceNorm2d(InstanceNorm2dOptions(width)), ReLU(),
      ReflectionPad2d(1), Conv2d(Conv2dOptions(width, width, 3)),
      InstanceNorm2d(InstanceNorm2dOptions(width)));
  register_module("body", body);
}

torch::Tensor ResnetBlockImpl::forward(torch::Tensor x) { return x + body->forward(x); }

GeneratorImpl::GeneratorImpl(const GeneratorSpec& s) : spec(s) {
  const int w = spec.base_width;
  model = torch::nn::Sequential();
  model->push_back(ReflectionPad2d(3));
  model->push_back(Conv2d(Conv2dOptions(spec.in_channels, w, 7)));
  model->push_back(InstanceNorm2d(InstanceNorm2dOptions(w)));
  model->push_back(ReLU());
  model->push_back(Conv2d(Conv2dOptions(w, 2 * w, 3).stride(2).padding(1)));
  model->push_back(InstanceNorm2d(InstanceNorm2dOptions(2 * w)));
  model->push_back(ReLU());
  model->push_back(Conv2d(Conv2dOptions(2 * w, 4 * w, 3).stride(2).padding(1)));
  model->push_back(InstanceNorm2d(InstanceNorm2dOptions(4 * w)));
  model->push_back(ReLU());
  for (int i = 0; i < spec.residual_blocks; ++i) model->push_back(ResnetBlock(4 * w));
  model->push_back(
      ConvTranspose2d(ConvTranspose2dOptions(4 * w, 2 * w, 3).stride(2).padding(1).output_padding(1)));
  model->push_back(InstanceNorm2d(InstanceNorm2dOptions(2 * w)));
  model->push_back(ReLU());
  model->push_back(
      ConvTranspose2d(ConvTranspose2dOptions(2 * w, w, 3).stride(2).padding(1).output_padding(1)));
  model->push_back(InstanceNorm2d(InstanceNorm2dOptions(w)));
  model->push_back(ReLU());
  model->push_back(ReflectionPad2d(3));
  model->push_back(Conv2d(Conv2dOptions(w, spec.out_channels, 7)));
  model->push_back(Functional(torch::tanh));
  register_module("model", model);
}

torch::Tensor GeneratorImpl::forward(torch::Tensor x) {
  checkSpatial(x, 4);
  return model->forward(x);
}

SegmenterImpl::ConvBlockImpl::ConvBlockImpl(int in_ch, int out_ch) {
  conv1 = register_module("conv1", Conv2d(Conv2dOptions(in_ch, out_ch, 3).padding(1)));
  norm1 = register_module("norm1", torch::nn::BatchNorm2d(out_ch));
  conv2 = register_module("conv2", Conv2d(Conv2dOptions(out_ch, out_ch, 3).padding(1)));
  norm2 = register_module("norm2", torch::nn::BatchNorm2d(out_ch));
  skip = register_module("skip", Conv2d(Conv2dOptions(in_ch, out_ch, 1)));
}

torch::Tensor SegmenterImpl::ConvBlockImpl::forward(torch::Tensor x) {
  auto y = torch::relu(norm1->forward(conv1->forward(x)));
  y = norm2->forward(conv2->forward(y));
  return torch::relu(y + skip->forward(x));
}

SegmenterImpl::SegmenterImpl(const SegmenterSpec& s) : spec(s) {
  TORCH_CHECK(spec.depth >= 1, "segmenter depth must be >= 1");
  int ch = spec.in_channels;
  for (int d = 0; d < spec.depth; ++d) {
    const int out_ch = spec.base_width << d;
    down_blocks.push_back(ConvBlock(ch, out_ch));
    register_module("down" + std::to_string(d), down_blocks.back());
    ch = out_ch;
  }
  const int bottom = ch;
  if (spec.use_style) {
    style_fc = register_module("style_fc", torch::nn::Linear(bottom, bottom));
  }
  for (int d = spec.depth - 2; d >= 0; --d) {
    const int out_ch = spec.base_width << d;
    up_blocks.push_back(ConvBlock(ch + out_ch, out_ch));
    register_module("up" + std::to_string(d), up_blocks.back());
    if (spec.use_style) {
      style_proj.push_back(
          register_module("style_proj" + std::to_string(d), torch::nn::Linear(bottom, out_ch)));
    }
    ch = out_ch;
  }
  head = register_module("head", Conv2d(Conv2dOptions(ch, spec.out_channels, 1)));
}

torch::Tensor SegmenterImpl::forward(torch::Tensor x) {
  checkSpatial(x, 1 << (spec.depth - 1));
  std::vector<torch::Tensor> skips;
  for (int d = 0; d < spec.depth; ++d) {
    x = down_blocks[d]->forward(x);
    if (d + 1 < spec.depth) {
      skips.push_back(x);
      x = torch::max_pool2d(x, 2);
    }
  }
  torch::Tensor style;
  if (spec.use_style) {
    style = torch::tanh(style_fc->forward(x.mean({2, 3})));
  }
  for (size_t i = 0; i < up_blocks.size(); ++i) {
    namespace F = torch::nn::functional;
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .scale_factor(std::vector<double>{2.0, 2.0})
                              .mode(torch::kNearest));
    x = torch::cat({x, skips[skips.size() - 1 - i]}, 1);
    x = up_blocks[i]->forward(x);
    if (spec.use_style) {
      x = x + style_proj[i]->forward(style).unsqueeze(-1).unsqueeze(-1);
    }
  }
  return head->forward(x);
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorSpec& s) : spec(s) {
  const int w = spec.base_width;
  model = torch::nn::Sequential();
  model->push_back(Conv2d(Conv2dOptions(spec.in_channels, w, 4).stride(2).padding(1)));
  model->push_back(LeakyReLU(LeakyReLUOptions().negative_slope(0.2)));
  int ch = w;
  for (int n = 1; n < spec.layers; ++n) {
    const int out_ch = w * std::min(1 << n, 8);
    model->push_back(Conv2d(Conv2dOptions(ch, out_ch, 4).stride(2).padding(1)));
    model->push_back(InstanceNorm2d(InstanceNorm2dOptions(out_ch)));
    model->push_back(LeakyReLU(LeakyReLUOptions().negative_slope(0.2)));
    ch = out_ch;
  }
  const int out_ch = w * std::min(1 << spec.layers, 8);
  model->push_back(Conv2d(Conv2dOptions(ch, out_ch, 4).stride(1).padding(1)));
  model->push_back(InstanceNorm2d(InstanceNorm2dOptions(out_ch)));
  model->push_back(LeakyReLU(LeakyReLUOptions().negative_slope(0.2)));
  model->push_back(Conv2d(Conv2dOptions(out_ch, 1, 4).stride(1).padding(1)));
  register_module("model", model);
}

torch::Tensor DiscriminatorImpl::forward(torch::Tensor x) {
  checkSpatial(x, 1 << spec.layers);
  return model->forward(x);
}

Generator buildGenerator(const GeneratorSpec& spec) { return Generator(spec); }
Segmenter buildSegmenter(const SegmenterSpec& spec) { return Segmenter(spec); }
Discriminator buildDiscriminator(const DiscriminatorSpec& spec) { return Discriminator(spec); }

int64_t parameterCount(const torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

}  // namespace cyclepose::nets
