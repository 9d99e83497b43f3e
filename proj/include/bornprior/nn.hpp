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

#ifndef BORNPRIOR_NN_HPP
#define BORNPRIOR_NN_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bornprior::nn {

using Shape = std::vector<int>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// 64-byte aligned storage, so vectorized kernels peel identically on every run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using AlignedValues = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major real array. Batched tensors carry the batch as dimension 0.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::span<const double> values);
  Tensor(Shape shape, AlignedValues values);

  const Shape& shape() const { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  const double& operator[](std::size_t i) const { return values_[i]; }

  /// Same values under a new shape of equal size.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;
  void fill(double v);

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  AlignedValues values_;
};

/// Trainable array with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

enum class LayerKind { dense, conv2d, conv2d_transpose, batchnorm, leaky_relu, sigmoid, tanh, flatten, reshape };

std::string_view layer_kind_name(LayerKind k);
LayerKind parse_layer_kind(std::string_view s);

/// Layer hyperparameters. Input sizes are inferred when the network is built.
///
/// conv2d output:            H_out = (H + 2 padding - kernel) / stride + 1
/// conv2d_transpose output:  H_out = (H - 1) stride - 2 padding + kernel
/// (the transposed convolution is the adjoint of conv2d with the same geometry).
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int units = 0;     // dense
  int channels = 0;  // conv output channels
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  double negative_slope = 0.2;  // leaky_relu
  Shape target_shape;           // reshape, per sample

  static LayerSpec dense(int units);
  static LayerSpec conv2d(int channels, int kernel, int stride, int padding);
  static LayerSpec conv2d_transpose(int channels, int kernel, int stride, int padding);
  static LayerSpec batchnorm();
  static LayerSpec leaky_relu(double negative_slope = 0.2);
  static LayerSpec sigmoid();
  static LayerSpec tanh();
  static LayerSpec flatten();
  static LayerSpec reshape(Shape target);

  void validate() const;
  bool operator==(const LayerSpec&) const = default;
};

enum class Mode { train, eval };

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEpsilon = 1e-5;

struct LayerCache {
  Tensor input;
  Tensor output;
  Tensor aux;               // batchnorm: normalized input
  std::vector<double> inv;  // batchnorm: per-channel 1/sqrt(var + eps)
  Mode mode = Mode::train;
};

/// Activations recorded by Network::forward, consumed by Network::backward.
struct ForwardCache {
  std::vector<LayerCache> layers;
  bool empty() const { return layers.empty(); }
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual const LayerSpec& spec() const = 0;
  /// Per-sample output shape.
  virtual const Shape& output_shape() const = 0;
  virtual Tensor forward(const Tensor& x, Mode mode, LayerCache& cache) = 0;
  /// Accumulates parameter gradients and returns the input gradient.
  virtual Tensor backward(const Tensor& grad_out, const LayerCache& cache) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  /// Non-trainable state (batchnorm running statistics).
  virtual std::vector<Tensor*> buffers() { return {}; }
};

enum class Init { dcgan_normal, he_normal };

/// Sequential stack of layers.
class Network {
 public:
  Network() = default;
  Network(Shape input_shape, std::vector<LayerSpec> specs, std::uint64_t seed, Init init = Init::dcgan_normal);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const;
  const Shape& layer_output_shape(std::size_t layer) const;
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<LayerSpec>& specs() const { return specs_; }

  struct Result {
    Tensor output;
    ForwardCache cache;
  };

  /// Runs the stack on a batch [B, input_shape...]. Train mode uses batch
  /// statistics in batchnorm and updates the running statistics.
  Result forward(const Tensor& input, Mode mode);
  /// Backpropagates `grad_output` from the output of layer
  /// (num_layers - 1 - skip_last) down to the input. Returns the input gradient.
  Tensor backward(const ForwardCache& cache, const Tensor& grad_output, std::size_t skip_last = 0);

  void zero_grad();
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t count_parameters() const;

  /// Trainable parameters followed by buffers, in layer order.
  std::vector<double> state() const;
  void set_state(std::span<const double> flat);
  std::vector<double> flat_parameters() const;
  std::vector<double> flat_gradients() const;
  void set_flat_parameters(std::span<const double> flat);

 private:
  std::vector<const Tensor*> buffer_ptrs() const;

  Shape input_shape_;
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Sum of trainable parameter counts of a layer stack.
std::size_t count_parameters(const Shape& input_shape, const std::vector<LayerSpec>& specs);

/// Binary checkpoint: "BPNN", u32 version, u64 header length, JSON header
/// (input shape, layer specs, caller metadata), u64 value count, then the
/// network state as little-endian IEEE-754 doubles.
void save_network(const std::filesystem::path& path, const Network& net, const std::string& metadata_json = "{}");
struct LoadedNetwork {
  Network network;
  std::string metadata_json;
};
LoadedNetwork load_network(const std::filesystem::path& path);

}  // namespace bornprior::nn

#endif
