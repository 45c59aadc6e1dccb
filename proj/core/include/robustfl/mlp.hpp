#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "robustfl/matrix.hpp"
#include "robustfl/rng.hpp"

namespace robustfl {

/// Fully connected classifier shape: input_dim -> hidden_dims... -> num_classes.
/// Hidden layers use tanh, the output layer is linear (logits).
struct MlpArchitecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_classes = 0;

  /// Throws ConfigError if any dimension is zero or there is no hidden layer.
  void validate() const;

  std::size_t num_layers() const { return hidden_dims.size() + 1; }
  std::size_t layer_input_dim(std::size_t layer) const;
  std::size_t layer_output_dim(std::size_t layer) const;
  std::size_t param_count() const;
  /// Width of the last hidden layer: the projected-feature dimension.
  std::size_t projection_dim() const { return hidden_dims.back(); }

  friend bool operator==(const MlpArchitecture&, const MlpArchitecture&) = default;
};

/// The default desk-scale network: input_dim -> 64 -> 32 -> num_classes.
MlpArchitecture default_architecture(std::size_t input_dim, std::size_t num_classes);

/// Position of one dense layer inside the flat parameter vector.
struct LayerSlice {
  std::size_t weights_offset;
  std::size_t biases_offset;
  std::size_t in_dim;
  std::size_t out_dim;
};

/// Parameter layout, layer-major: for each layer the in_dim x out_dim weight
/// matrix in row-major order (weight (i, o) at weights_offset + i * out_dim + o),
/// followed by its out_dim biases. A layer maps x -> x W + b.
std::vector<LayerSlice> parameter_layout(const MlpArchitecture& arch);

/// Flat parameter vector of an MLP. `theta` is vec(theta) for distance
/// computations; its layout is parameter_layout(arch).
struct ModelParams {
  MlpArchitecture arch;
  std::vector<double> theta;

  static ModelParams zeros(const MlpArchitecture& arch);

  /// Throws ConfigError if theta.size() != arch.param_count().
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Throws ConfigError unless both models share an architecture.
void require_same_arch(const ModelParams& a, const ModelParams& b);

struct DenseLayer {
  Matrix weights;  // in_dim x out_dim
  std::vector<double> biases;
};

std::vector<DenseLayer> unflatten(const ModelParams& model);
ModelParams flatten(const MlpArchitecture& arch, const std::vector<DenseLayer>& layers);

/// Examples with integer class labels.
struct LabeledBatch {
  Matrix inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  /// Throws ConfigError on row/label count mismatch, InputError on a label >= num_classes.
  void validate(std::size_t num_classes) const;
};

/// Rows of `batch` at the given indices.
LabeledBatch gather(const LabeledBatch& batch, std::span<const std::size_t> indices);

/// Activations recorded by forward(). layer_inputs[l] is the input to dense
/// layer l (layer_inputs[0] is the network input); pre_activations[l] is
/// x W + b for layer l.
struct ForwardCache {
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> pre_activations;
};

struct ForwardResult {
  Matrix logits;
  ForwardCache cache;
};

ForwardResult forward(const ModelParams& model, const Matrix& inputs);

/// Output of the last hidden layer (post-tanh), rows x projection_dim.
Matrix project(const ModelParams& model, const Matrix& inputs);

/// Applies only the final dense layer to projected features.
Matrix output_layer(const ModelParams& model, const Matrix& projected);

/// Mean over rows of -log softmax(logits)[label], stabilised by subtracting
/// each row's maximum.
double cross_entropy(const Matrix& logits, std::span<const std::size_t> labels);

double batch_loss(const ModelParams& model, const LabeledBatch& batch);
double accuracy(const ModelParams& model, const LabeledBatch& batch);

/// Gradient of batch_loss with respect to theta, same layout as theta.
std::vector<double> backward(const ModelParams& model, const LabeledBatch& batch);

/// theta - learning_rate * gradient. learning_rate must be >= 0.
ModelParams sgd_step(const ModelParams& model, std::span<const double> gradient,
                     double learning_rate);

/// Glorot-uniform weights, U(-sqrt(6/(fan_in+fan_out)), +...); zero biases.
ModelParams glorot_init(const MlpArchitecture& arch, Rng& rng);

}  // namespace robustfl
