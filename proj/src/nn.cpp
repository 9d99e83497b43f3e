// Copyright 2026 The bornprior Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bornprior/nn.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include "json.hpp"
#include <numeric>
#include <sstream>

#include "bornprior/errors.hpp"
#include "bornprior/random.hpp"

namespace bornprior::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {
  for (int d : shape_)
    if (d < 0) throw ConfigError("negative tensor dimension");
}

Tensor::Tensor(Shape shape, std::span<const double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (values_.size() != shape_size(shape_)) throw ConfigError("tensor value count does not match shape");
}

Tensor::Tensor(Shape shape, AlignedValues values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) throw ConfigError("tensor value count does not match shape");
}

Tensor Tensor::reshaped(Shape shape) const& { return Tensor(std::move(shape), values_); }

Tensor Tensor::reshaped(Shape shape) && { return Tensor(std::move(shape), std::move(values_)); }

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string_view layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::conv2d_transpose: return "conv2d_transpose";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::tanh: return "tanh";
    case LayerKind::flatten: return "flatten";
    case LayerKind::reshape: return "reshape";
  }
  return "dense";
}

LayerKind parse_layer_kind(std::string_view s) {
  for (LayerKind k : {LayerKind::dense, LayerKind::conv2d, LayerKind::conv2d_transpose, LayerKind::batchnorm,
                      LayerKind::leaky_relu, LayerKind::sigmoid, LayerKind::tanh, LayerKind::flatten,
                      LayerKind::reshape}) {
    if (layer_kind_name(k) == s) return k;
  }
  throw ConfigError("unknown layer kind: " + std::string(s));
}

LayerSpec LayerSpec::dense(int units) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::conv2d(int channels, int kernel, int stride, int padding) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.channels = channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::conv2d_transpose(int channels, int kernel, int stride, int padding) {
  LayerSpec s = conv2d(channels, kernel, stride, padding);
  s.kind = LayerKind::conv2d_transpose;
  return s;
}

LayerSpec LayerSpec::batchnorm() {
  LayerSpec s;
  s.kind = LayerKind::batchnorm;
  return s;
}

LayerSpec LayerSpec::leaky_relu(double negative_slope) {
  LayerSpec s;
  s.kind = LayerKind::leaky_relu;
  s.negative_slope = negative_slope;
  return s;
}

LayerSpec LayerSpec::sigmoid() {
  LayerSpec s;
  s.kind = LayerKind::sigmoid;
  return s;
}

LayerSpec LayerSpec::tanh() {
  LayerSpec s;
  s.kind = LayerKind::tanh;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}

LayerSpec LayerSpec::reshape(Shape target) {
  LayerSpec s;
  s.kind = LayerKind::reshape;
  s.target_shape = std::move(target);
  return s;
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::dense:
      if (units < 1) throw ConfigError("dense layer needs units >= 1");
      break;
    case LayerKind::conv2d:
    case LayerKind::conv2d_transpose:
      if (channels < 1 || kernel < 1 || stride < 1 || padding < 0) {
        throw ConfigError("convolution needs channels, kernel, stride >= 1 and padding >= 0");
      }
      break;
    case LayerKind::leaky_relu:
      if (!(negative_slope > 0.0 && negative_slope < 1.0)) throw ConfigError("leaky ReLU slope must be in (0, 1)");
      break;
    case LayerKind::reshape:
      if (target_shape.empty()) throw ConfigError("reshape needs a target shape");
      for (int d : target_shape)
        if (d < 1) throw ConfigError("reshape dimensions must be >= 1");
      break;
    default: break;
  }
}

namespace {

Shape batched(int batch, const Shape& per_sample) {
  Shape s{batch};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

void check_input(const Tensor& x, const Shape& per_sample, std::string_view what) {
  if (x.rank() != per_sample.size() + 1 || !std::equal(per_sample.begin(), per_sample.end(), x.shape().begin() + 1)) {
    throw ConfigError(std::string(what) + ": input shape " + shape_string(x.shape()) + " does not match expected [B, " +
                      shape_string(per_sample).substr(1));
  }
}

void init_normal(Tensor& t, double stddev, Rng& rng) {
  for (double& v : t.values()) v = stddev * standard_normal(rng);
}

Parameter make_param(std::string name, Shape shape) {
  Parameter p{std::move(name), Tensor(shape), Tensor(shape)};
  return p;
}

// Convolution geometry for one sample.
struct ConvGeometry {
  int channels, height, width;  // image side
  int kernel, stride, padding;
  int out_h, out_w;             // sliding-window grid
};

// col[(c k k + ki k + kj), oh Wo + ow] = x[c, oh s - p + ki, ow s - p + kj]
void im2col(const double* x, const ConvGeometry& g, double* col) {
  const int k = g.kernel;
  const int grid = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double* row = col + static_cast<std::ptrdiff_t>((c * k + ki) * k + kj) * grid;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.padding + ki;
          double* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::ptrdiff_t>(c) * g.height + ih) * g.width;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.padding + kj;
            dst[ow] = (iw < 0 || iw >= g.width) ? 0.0 : src[iw];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates columns back into the image (x must be zeroed by the caller).
void col2im(const double* col, const ConvGeometry& g, double* x) {
  const int k = g.kernel;
  const int grid = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double* row = col + static_cast<std::ptrdiff_t>((c * k + ki) * k + kj) * grid;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.padding + ki;
          if (ih < 0 || ih >= g.height) continue;
          double* dst = x + (static_cast<std::ptrdiff_t>(c) * g.height + ih) * g.width;
          const double* src = row + oh * g.out_w;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.padding + kj;
            if (iw >= 0 && iw < g.width) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

class DenseLayer final : public Layer {
 public:
  DenseLayer(const LayerSpec& spec, const Shape& in, Init init, Rng& rng) : spec_(spec) {
    if (in.size() != 1) throw ConfigError("dense layer expects flat input, got " + shape_string(in));
    in_ = in[0];
    out_shape_ = {spec.units};
    weight_ = make_param("weight", {spec.units, in_});
    bias_ = make_param("bias", {spec.units});
    init_normal(weight_.value, init == Init::he_normal ? std::sqrt(2.0 / in_) : 0.02, rng);
  }
  const LayerSpec& spec() const override { return spec_; }
  const Shape& output_shape() const override { return out_shape_; }

  Tensor forward(const Tensor& x, Mode mode, LayerCache& cache) override {
    check_input(x, {in_}, "dense");
    const int batch = x.dim(0);
    Tensor y({batch, spec_.units});
    ConstMapMat X(x.data(), batch, in_);
    ConstMapMat W(weight_.value.data(), spec_.units, in_);
    MapMat Y(y.data(), batch, spec_.units);
    Y.noalias() = X * W.transpose();
    Y.rowwise() += ConstMapVec(bias_.value.data(), spec_.units).transpose();
    cache.input = x;
    cache.mode = mode;
    return y;
  }

  Tensor backward(const Tensor& dy, const LayerCache& cache) override {
    const int batch = cache.input.dim(0);
    ConstMapMat X(cache.input.data(), batch, in_);
    ConstMapMat dY(dy.data(), batch, spec_.units);
    ConstMapMat W(weight_.value.data(), spec_.units, in_);
    MapMat(weight_.grad.data(), spec_.units, in_).noalias() += dY.transpose() * X;
    MapVec(bias_.grad.data(), spec_.units) += dY.colwise().sum().transpose();
    Tensor dx({batch, in_});
    MapMat(dx.data(), batch, in_).noalias() = dY * W;
    return dx;
  }

  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

 private:
  LayerSpec spec_;
  int in_ = 0;
  Shape out_shape_;
  Parameter weight_, bias_;
};

class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(const LayerSpec& spec, const Shape& in, Init init, Rng& rng) : spec_(spec), in_shape_(in) {
    if (in.size() != 3) throw ConfigError("conv2d expects [C, H, W] input, got " + shape_string(in));
    geom_ = {in[0], in[1], in[2], spec.kernel, spec.stride, spec.padding, 0, 0};
    const int span_h = in[1] + 2 * spec.padding - spec.kernel;
    const int span_w = in[2] + 2 * spec.padding - spec.kernel;
    if (span_h < 0 || span_w < 0) throw ConfigError("conv2d kernel larger than padded input");
    geom_.out_h = span_h / spec.stride + 1;
    geom_.out_w = span_w / spec.stride + 1;
    out_shape_ = {spec.channels, geom_.out_h, geom_.out_w};
    patch_ = in[0] * spec.kernel * spec.kernel;
    weight_ = make_param("weight", {spec.channels, in[0], spec.kernel, spec.kernel});
    bias_ = make_param("bias", {spec.channels});
    init_normal(weight_.value, init == Init::he_normal ? std::sqrt(2.0 / patch_) : 0.02, rng);
  }
  const LayerSpec& spec() const override { return spec_; }
  const Shape& output_shape() const override { return out_shape_; }

  Tensor forward(const Tensor& x, Mode mode, LayerCache& cache) override {
    check_input(x, in_shape_, "conv2d");
    const int batch = x.dim(0);
    const int grid = geom_.out_h * geom_.out_w;
    const std::size_t in_size = shape_size(in_shape_);
    Tensor y(batched(batch, out_shape_));
    RowMat col(patch_, grid);
    ConstMapMat W(weight_.value.data(), spec_.channels, patch_);
    ConstMapVec b(bias_.value.data(), spec_.channels);
    for (int n = 0; n < batch; ++n) {
      im2col(x.data() + n * in_size, geom_, col.data());
      MapMat Y(y.data() + static_cast<std::ptrdiff_t>(n) * spec_.channels * grid, spec_.channels, grid);
      Y.noalias() = W * col;
      Y.colwise() += b;
    }
    cache.input = x;
    cache.mode = mode;
    return y;
  }

  Tensor backward(const Tensor& dy, const LayerCache& cache) override {
    const int batch = cache.input.dim(0);
    const int grid = geom_.out_h * geom_.out_w;
    const std::size_t in_size = shape_size(in_shape_);
    Tensor dx(cache.input.shape());
    RowMat col(patch_, grid);
    RowMat dcol(patch_, grid);
    ConstMapMat W(weight_.value.data(), spec_.channels, patch_);
    MapMat dW(weight_.grad.data(), spec_.channels, patch_);
    MapVec db(bias_.grad.data(), spec_.channels);
    for (int n = 0; n < batch; ++n) {
      ConstMapMat dY(dy.data() + static_cast<std::ptrdiff_t>(n) * spec_.channels * grid, spec_.channels, grid);
      im2col(cache.input.data() + n * in_size, geom_, col.data());
      dW.noalias() += dY * col.transpose();
      db += dY.rowwise().sum();
      dcol.noalias() = W.transpose() * dY;
      col2im(dcol.data(), geom_, dx.data() + n * in_size);
    }
    return dx;
  }

  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

 private:
  LayerSpec spec_;
  Shape in_shape_, out_shape_;
  ConvGeometry geom_{};
  int patch_ = 0;
  Parameter weight_, bias_;
};

class ConvTranspose2dLayer final : public Layer {
 public:
  ConvTranspose2dLayer(const LayerSpec& spec, const Shape& in, Init init, Rng& rng) : spec_(spec), in_shape_(in) {
    if (in.size() != 3) throw ConfigError("conv2d_transpose expects [C, H, W] input, got " + shape_string(in));
    const int out_h = (in[1] - 1) * spec.stride - 2 * spec.padding + spec.kernel;
    const int out_w = (in[2] - 1) * spec.stride - 2 * spec.padding + spec.kernel;
    if (out_h < 1 || out_w < 1) throw ConfigError("conv2d_transpose output would be empty");
    // Geometry of the adjoint convolution: output image, sliding grid = input.
    geom_ = {spec.channels, out_h, out_w, spec.kernel, spec.stride, spec.padding, in[1], in[2]};
    out_shape_ = {spec.channels, out_h, out_w};
    patch_ = spec.channels * spec.kernel * spec.kernel;
    weight_ = make_param("weight", {in[0], spec.channels, spec.kernel, spec.kernel});
    bias_ = make_param("bias", {spec.channels});
    init_normal(weight_.value, init == Init::he_normal ? std::sqrt(2.0 / in[0]) : 0.02, rng);
  }
  const LayerSpec& spec() const override { return spec_; }
  const Shape& output_shape() const override { return out_shape_; }

  Tensor forward(const Tensor& x, Mode mode, LayerCache& cache) override {
    check_input(x, in_shape_, "conv2d_transpose");
    const int batch = x.dim(0);
    const int cin = in_shape_[0];
    const int grid = in_shape_[1] * in_shape_[2];
    const std::size_t out_size = shape_size(out_shape_);
    const int plane = geom_.height * geom_.width;
    Tensor y(batched(batch, out_shape_));
    RowMat col(patch_, grid);
    ConstMapMat W(weight_.value.data(), cin, patch_);
    for (int n = 0; n < batch; ++n) {
      ConstMapMat X(x.data() + static_cast<std::ptrdiff_t>(n) * cin * grid, cin, grid);
      col.noalias() = W.transpose() * X;
      double* yn = y.data() + n * out_size;
      col2im(col.data(), geom_, yn);
      for (int c = 0; c < spec_.channels; ++c) {
        const double b = bias_.value[static_cast<std::size_t>(c)];
        for (int i = 0; i < plane; ++i) yn[c * plane + i] += b;
      }
    }
    cache.input = x;
    cache.mode = mode;
    return y;
  }

  Tensor backward(const Tensor& dy, const LayerCache& cache) override {
    const int batch = cache.input.dim(0);
    const int cin = in_shape_[0];
    const int grid = in_shape_[1] * in_shape_[2];
    const std::size_t out_size = shape_size(out_shape_);
    const int plane = geom_.height * geom_.width;
    Tensor dx(cache.input.shape());
    RowMat dcol(patch_, grid);
    ConstMapMat W(weight_.value.data(), cin, patch_);
    MapMat dW(weight_.grad.data(), cin, patch_);
    for (int n = 0; n < batch; ++n) {
      const double* dyn = dy.data() + n * out_size;
      im2col(dyn, geom_, dcol.data());
      ConstMapMat X(cache.input.data() + static_cast<std::ptrdiff_t>(n) * cin * grid, cin, grid);
      dW.noalias() += X * dcol.transpose();
      MapMat(dx.data() + static_cast<std::ptrdiff_t>(n) * cin * grid, cin, grid).noalias() = W * dcol;
      for (int c = 0; c < spec_.channels; ++c) {
        double s = 0.0;
        for (int i = 0; i < plane; ++i) s += dyn[c * plane + i];
        bias_.grad[static_cast<std::size_t>(c)] += s;
      }
    }
    return dx;
  }

  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

 private:
  LayerSpec spec_;
  Shape in_shape_, out_shape_;
  ConvGeometry geom_{};
  int patch_ = 0;
  Parameter weight_, bias_;
};

// Per-channel normalization over batch (and spatial positions for [C, H, W] input).
class BatchNormLayer final : public Layer {
 public:
  BatchNormLayer(const LayerSpec& spec, const Shape& in) : spec_(spec), shape_(in) {
    if (in.size() != 1 && in.size() != 3) throw ConfigError("batchnorm expects [F] or [C, H, W] input");
    channels_ = in[0];
    spatial_ = in.size() == 3 ? in[1] * in[2] : 1;
    gamma_ = make_param("gamma", {channels_});
    beta_ = make_param("beta", {channels_});
    gamma_.value.fill(1.0);
    running_mean_ = Tensor({channels_}, 0.0);
    running_var_ = Tensor({channels_}, 1.0);
  }
  const LayerSpec& spec() const override { return spec_; }
  const Shape& output_shape() const override { return shape_; }

  Tensor forward(const Tensor& x, Mode mode, LayerCache& cache) override {
    check_input(x, shape_, "batchnorm");
    const int batch = x.dim(0);
    const double count = static_cast<double>(batch) * spatial_;
    Tensor y(x.shape());
    Tensor xhat(x.shape());
    std::vector<double> inv(static_cast<std::size_t>(channels_));
    for (int c = 0; c < channels_; ++c) {
      double mean, var;
      if (mode == Mode::train) {
        if (batch < 2 && spatial_ < 2) throw ConfigError("batchnorm in train mode needs more than one value per channel");
        double s = 0.0;
        for (int n = 0; n < batch; ++n)
          for (int i = 0; i < spatial_; ++i) s += x[index(n, c, i)];
        mean = s / count;
        double ss = 0.0;
        for (int n = 0; n < batch; ++n)
          for (int i = 0; i < spatial_; ++i) {
            const double d = x[index(n, c, i)] - mean;
            ss += d * d;
          }
        var = ss / count;
        const auto cu = static_cast<std::size_t>(c);
        running_mean_[cu] = kBatchNormMomentum * running_mean_[cu] + (1.0 - kBatchNormMomentum) * mean;
        running_var_[cu] = kBatchNormMomentum * running_var_[cu] +
                           (1.0 - kBatchNormMomentum) * var * count / std::max(1.0, count - 1.0);
      } else {
        mean = running_mean_[static_cast<std::size_t>(c)];
        var = running_var_[static_cast<std::size_t>(c)];
      }
      const double is = 1.0 / std::sqrt(var + kBatchNormEpsilon);
      inv[static_cast<std::size_t>(c)] = is;
      const double g = gamma_.value[static_cast<std::size_t>(c)];
      const double b = beta_.value[static_cast<std::size_t>(c)];
      for (int n = 0; n < batch; ++n)
        for (int i = 0; i < spatial_; ++i) {
          const std::size_t k = index(n, c, i);
          xhat[k] = (x[k] - mean) * is;
          y[k] = g * xhat[k] + b;
        }
    }
    cache.input = x;
    cache.aux = std::move(xhat);
    cache.inv = std::move(inv);
    cache.mode = mode;
    return y;
  }

  Tensor backward(const Tensor& dy, const LayerCache& cache) override {
    const int batch = cache.input.dim(0);
    const double count = static_cast<double>(batch) * spatial_;
    const Tensor& xhat = cache.aux;
    Tensor dx(cache.input.shape());
    for (int c = 0; c < channels_; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int n = 0; n < batch; ++n)
        for (int i = 0; i < spatial_; ++i) {
          const std::size_t k = index(n, c, i);
          sum_dy += dy[k];
          sum_dy_xhat += dy[k] * xhat[k];
        }
      gamma_.grad[cu] += sum_dy_xhat;
      beta_.grad[cu] += sum_dy;
      const double g = gamma_.value[cu];
      const double is = cache.inv[cu];
      for (int n = 0; n < batch; ++n)
        for (int i = 0; i < spatial_; ++i) {
          const std::size_t k = index(n, c, i);
          if (cache.mode == Mode::train) {
            dx[k] = g * is / count * (count * dy[k] - sum_dy - xhat[k] * sum_dy_xhat);
          } else {
            dx[k] = g * is * dy[k];
          }
        }
    }
    return dx;
  }

  std::vector<Parameter*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<Tensor*> buffers() override { return {&running_mean_, &running_var_}; }

 private:
  std::size_t index(int n, int c, int i) const {
    return (static_cast<std::size_t>(n) * channels_ + static_cast<std::size_t>(c)) * spatial_ + static_cast<std::size_t>(i);
  }

  LayerSpec spec_;
  Shape shape_;
  int channels_ = 0;
  int spatial_ = 1;
  Parameter gamma_, beta_;
  Tensor running_mean_, running_var_;
};

enum class Activation { leaky_relu, sigmoid, tanh };

class ActivationLayer final : public Layer {
 public:
  ActivationLayer(const LayerSpec& spec, const Shape& in, Activation act) : spec_(spec), shape_(in), act_(act) {}
  const LayerSpec& spec() const override { return spec_; }
  const Shape& output_shape() const override { return shape_; }

  Tensor forward(const Tensor& x, Mode mode, LayerCache& cache) override {
    check_input(x, shape_, layer_kind_name(spec_.kind));
    Tensor y(x.shape());
    const double slope = spec_.negative_slope;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x[i];
      switch (act_) {
        case Activation::leaky_relu: y[i] = v > 0.0 ? v : slope * v; break;
        case Activation::sigmoid: y[i] = 1.0 / (1.0 + std::exp(-v)); break;
        case Activation::tanh: y[i] = std::tanh(v); break;
      }
    }
    cache.input = x;
    cache.output = y;
    cache.mode = mode;
    return y;
  }

  Tensor backward(const Tensor& dy, const LayerCache& cache) override {
    Tensor dx(cache.input.shape());
    const double slope = spec_.negative_slope;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      switch (act_) {
        case Activation::leaky_relu: dx[i] = dy[i] * (cache.input[i] > 0.0 ? 1.0 : slope); break;
        case Activation::sigmoid: {
          const double s = cache.output[i];
          dx[i] = dy[i] * s * (1.0 - s);
          break;
        }
        case Activation::tanh: {
          const double t = cache.output[i];
          dx[i] = dy[i] * (1.0 - t * t);
          break;
        }
      }
    }
    return dx;
  }

 private:
  LayerSpec spec_;
  Shape shape_;
  Activation act_;
};

class ReshapeLayer final : public Layer {
 public:
  ReshapeLayer(const LayerSpec& spec, const Shape& in) : spec_(spec), in_shape_(in) {
    out_shape_ = spec.kind == LayerKind::flatten ? Shape{static_cast<int>(shape_size(in))} : spec.target_shape;
    if (shape_size(out_shape_) != shape_size(in)) {
      throw ConfigError("reshape from " + shape_string(in) + " to " + shape_string(out_shape_) + " changes size");
    }
  }
  const LayerSpec& spec() const override { return spec_; }
  const Shape& output_shape() const override { return out_shape_; }

  Tensor forward(const Tensor& x, Mode mode, LayerCache& cache) override {
    check_input(x, in_shape_, layer_kind_name(spec_.kind));
    cache.input = Tensor(x.shape());  // shape only; values are not needed
    cache.mode = mode;
    return x.reshaped(batched(x.dim(0), out_shape_));
  }

  Tensor backward(const Tensor& dy, const LayerCache& cache) override { return dy.reshaped(cache.input.shape()); }

 private:
  LayerSpec spec_;
  Shape in_shape_, out_shape_;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& in, Init init, Rng& rng) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::dense: return std::make_unique<DenseLayer>(spec, in, init, rng);
    case LayerKind::conv2d: return std::make_unique<Conv2dLayer>(spec, in, init, rng);
    case LayerKind::conv2d_transpose: return std::make_unique<ConvTranspose2dLayer>(spec, in, init, rng);
    case LayerKind::batchnorm: return std::make_unique<BatchNormLayer>(spec, in);
    case LayerKind::leaky_relu: return std::make_unique<ActivationLayer>(spec, in, Activation::leaky_relu);
    case LayerKind::sigmoid: return std::make_unique<ActivationLayer>(spec, in, Activation::sigmoid);
    case LayerKind::tanh: return std::make_unique<ActivationLayer>(spec, in, Activation::tanh);
    case LayerKind::flatten:
    case LayerKind::reshape: return std::make_unique<ReshapeLayer>(spec, in);
  }
  throw ConfigError("unhandled layer kind");
}

}  // namespace

Network::Network(Shape input_shape, std::vector<LayerSpec> specs, std::uint64_t seed, Init init)
    : input_shape_(std::move(input_shape)), specs_(std::move(specs)) {
  if (input_shape_.empty()) throw ConfigError("network input shape is empty");
  Rng rng(seed);
  Shape shape = input_shape_;
  for (const LayerSpec& s : specs_) {
    layers_.push_back(make_layer(s, shape, init, rng));
    shape = layers_.back()->output_shape();
  }
}

Network::Network(const Network& other) : input_shape_(other.input_shape_), specs_(other.specs_) {
  Rng rng(0);
  Shape shape = input_shape_;
  for (const LayerSpec& s : specs_) {
    layers_.push_back(make_layer(s, shape, Init::dcgan_normal, rng));
    shape = layers_.back()->output_shape();
  }
  set_state(other.state());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) *this = Network(other);
  return *this;
}

const Shape& Network::output_shape() const { return layers_.empty() ? input_shape_ : layers_.back()->output_shape(); }

const Shape& Network::layer_output_shape(std::size_t layer) const { return layers_.at(layer)->output_shape(); }

Network::Result Network::forward(const Tensor& input, Mode mode) {
  check_input(input, input_shape_, "network");
  Result r;
  r.cache.layers.resize(layers_.size());
  Tensor x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i]->forward(x, mode, r.cache.layers[i]);
    r.cache.layers[i].output = x;
  }
  r.output = std::move(x);
  return r;
}

Tensor Network::backward(const ForwardCache& cache, const Tensor& grad_output, std::size_t skip_last) {
  if (cache.layers.size() != layers_.size()) throw StateError("backward called without a matching forward cache");
  if (skip_last > layers_.size()) throw ConfigError("skip_last exceeds layer count");
  const std::size_t top = layers_.size() - skip_last;
  const Shape& expected = top == 0 ? cache.layers.front().input.shape() : cache.layers[top - 1].output.shape();
  if (grad_output.shape() != expected) {
    throw ConfigError("output gradient shape " + shape_string(grad_output.shape()) + " does not match " +
                      shape_string(expected));
  }
  Tensor g = grad_output;
  for (std::size_t i = top; i-- > 0;) g = layers_[i]->backward(g, cache.layers[i]);
  return g;
}

void Network::zero_grad() {
  for (Parameter* p : parameters()) p->grad.fill(0.0);
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_)
    for (Parameter* p : l->parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Network::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& l : layers_)
    for (Parameter* p : l->parameters()) out.push_back(p);
  return out;
}

std::size_t Network::count_parameters() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.size();
  return n;
}

std::vector<const Tensor*> Network::buffer_ptrs() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers_)
    for (Tensor* t : l->buffers()) out.push_back(t);
  return out;
}

std::vector<double> Network::flat_parameters() const {
  std::vector<double> flat;
  for (const Parameter* p : parameters()) flat.insert(flat.end(), p->value.values().begin(), p->value.values().end());
  return flat;
}

std::vector<double> Network::flat_gradients() const {
  std::vector<double> flat;
  for (const Parameter* p : parameters()) flat.insert(flat.end(), p->grad.values().begin(), p->grad.values().end());
  return flat;
}

void Network::set_flat_parameters(std::span<const double> flat) {
  if (flat.size() != count_parameters()) throw ConfigError("flat parameter vector has wrong length");
  std::size_t off = 0;
  for (Parameter* p : parameters()) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + p->value.size()), p->value.values().begin());
    off += p->value.size();
  }
}

std::vector<double> Network::state() const {
  std::vector<double> flat = flat_parameters();
  for (const Tensor* t : buffer_ptrs()) flat.insert(flat.end(), t->values().begin(), t->values().end());
  return flat;
}

void Network::set_state(std::span<const double> flat) {
  std::size_t buffers = 0;
  for (const Tensor* t : buffer_ptrs()) buffers += t->size();
  const std::size_t params = count_parameters();
  if (flat.size() != params + buffers) throw ConfigError("network state vector has wrong length");
  set_flat_parameters(flat.subspan(0, params));
  std::size_t off = params;
  for (auto& l : layers_) {
    for (Tensor* t : l->buffers()) {
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                flat.begin() + static_cast<std::ptrdiff_t>(off + t->size()), t->values().begin());
      off += t->size();
    }
  }
}

std::size_t count_parameters(const Shape& input_shape, const std::vector<LayerSpec>& specs) {
  if (specs.empty()) return 0;
  return Network(input_shape, specs, 0).count_parameters();
}

namespace {

constexpr char kMagic[4] = {'B', 'P', 'N', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json spec_to_json(const LayerSpec& s) {
  nlohmann::json j;
  j["kind"] = std::string(layer_kind_name(s.kind));
  switch (s.kind) {
    case LayerKind::dense: j["units"] = s.units; break;
    case LayerKind::conv2d:
    case LayerKind::conv2d_transpose:
      j["channels"] = s.channels;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["padding"] = s.padding;
      break;
    case LayerKind::leaky_relu: j["negative_slope"] = s.negative_slope; break;
    case LayerKind::reshape: j["target_shape"] = s.target_shape; break;
    default: break;
  }
  return j;
}

LayerSpec spec_from_json(const nlohmann::json& j) {
  LayerSpec s;
  s.kind = parse_layer_kind(j.at("kind").get<std::string>());
  s.units = j.value("units", 0);
  s.channels = j.value("channels", 0);
  s.kernel = j.value("kernel", 0);
  s.stride = j.value("stride", 1);
  s.padding = j.value("padding", 0);
  s.negative_slope = j.value("negative_slope", 0.2);
  if (j.contains("target_shape")) s.target_shape = j.at("target_shape").get<Shape>();
  return s;
}

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw StateError("checkpoint truncated");
  return v;
}

}  // namespace

void save_network(const std::filesystem::path& path, const Network& net, const std::string& metadata_json) {
  nlohmann::json header;
  header["input_shape"] = net.input_shape();
  header["layers"] = nlohmann::json::array();
  for (const LayerSpec& s : net.specs()) header["layers"].push_back(spec_to_json(s));
  header["metadata"] = nlohmann::json::parse(metadata_json);
  const std::string text = header.dump();
  const auto state = net.state();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StateError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, kCheckpointVersion);
  write_le<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_le<std::uint64_t>(os, state.size());
  os.write(reinterpret_cast<const char*>(state.data()), static_cast<std::streamsize>(state.size() * sizeof(double)));
  if (!os) throw StateError("failed writing checkpoint: " + path.string());
}

LoadedNetwork load_network(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StateError("cannot open checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw StateError("not a network checkpoint: " + path.string());
  if (read_le<std::uint32_t>(is) != kCheckpointVersion) throw StateError("unsupported checkpoint version");
  const auto header_len = read_le<std::uint64_t>(is);
  std::string text(header_len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw StateError("checkpoint truncated");
  const auto header = nlohmann::json::parse(text);
  std::vector<LayerSpec> specs;
  for (const auto& j : header.at("layers")) specs.push_back(spec_from_json(j));
  Network net(header.at("input_shape").get<Shape>(), std::move(specs), 0);
  const auto count = read_le<std::uint64_t>(is);
  std::vector<double> state(count);
  is.read(reinterpret_cast<char*>(state.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw StateError("checkpoint truncated");
  net.set_state(state);
  return {std::move(net), header.at("metadata").dump()};
}

}  // namespace bornprior::nn
