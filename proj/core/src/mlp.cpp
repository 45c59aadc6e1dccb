#include "robustfl/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "robustfl/error.hpp"

namespace robustfl {

namespace {

// y = x W + b over the slice of theta described by `layer`.
Matrix affine(std::span<const double> theta, const LayerSlice& layer, const Matrix& x) {
  Matrix y(x.rows(), layer.out_dim);
  const double* w = theta.data() + layer.weights_offset;
  const double* b = theta.data() + layer.biases_offset;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto out = y.row(r);
    std::copy(b, b + layer.out_dim, out.begin());
    const auto in = x.row(r);
    for (std::size_t i = 0; i < layer.in_dim; ++i) {
      const double xi = in[i];
      const double* wrow = w + i * layer.out_dim;
      for (std::size_t o = 0; o < layer.out_dim; ++o) out[o] += xi * wrow[o];
    }
  }
  return y;
}

void apply_tanh(Matrix& m) {
  for (double& v : m.values()) v = std::tanh(v);
}

void require_input_dim(const ModelParams& model, const Matrix& inputs) {
  model.validate();
  if (inputs.cols() != model.arch.input_dim) {
    throw ConfigError("input has " + std::to_string(inputs.cols()) +
                      " columns, architecture expects " + std::to_string(model.arch.input_dim));
  }
}

}  // namespace

void MlpArchitecture::validate() const {
  if (input_dim == 0) throw ConfigError("input_dim must be >= 1");
  if (num_classes == 0) throw ConfigError("num_classes must be >= 1");
  if (hidden_dims.empty()) throw ConfigError("at least one hidden layer is required");
  for (std::size_t d : hidden_dims) {
    if (d == 0) throw ConfigError("hidden layer widths must be >= 1");
  }
}

std::size_t MlpArchitecture::layer_input_dim(std::size_t layer) const {
  return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

std::size_t MlpArchitecture::layer_output_dim(std::size_t layer) const {
  return layer < hidden_dims.size() ? hidden_dims[layer] : num_classes;
}

std::size_t MlpArchitecture::param_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    total += layer_input_dim(l) * layer_output_dim(l) + layer_output_dim(l);
  }
  return total;
}

MlpArchitecture default_architecture(std::size_t input_dim, std::size_t num_classes) {
  return MlpArchitecture{input_dim, {64, 32}, num_classes};
}

std::vector<LayerSlice> parameter_layout(const MlpArchitecture& arch) {
  std::vector<LayerSlice> layout;
  layout.reserve(arch.num_layers());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const std::size_t in = arch.layer_input_dim(l);
    const std::size_t out = arch.layer_output_dim(l);
    layout.push_back({offset, offset + in * out, in, out});
    offset += in * out + out;
  }
  return layout;
}

ModelParams ModelParams::zeros(const MlpArchitecture& arch) {
  arch.validate();
  return ModelParams{arch, std::vector<double>(arch.param_count(), 0.0)};
}

void ModelParams::validate() const {
  arch.validate();
  if (theta.size() != arch.param_count()) {
    throw ConfigError("theta length " + std::to_string(theta.size()) +
                      " != parameter count " + std::to_string(arch.param_count()));
  }
}

void require_same_arch(const ModelParams& a, const ModelParams& b) {
  if (!(a.arch == b.arch) || a.theta.size() != b.theta.size()) {
    throw ConfigError("models do not share an architecture");
  }
}

std::vector<DenseLayer> unflatten(const ModelParams& model) {
  model.validate();
  std::vector<DenseLayer> layers;
  for (const LayerSlice& s : parameter_layout(model.arch)) {
    const auto w_begin = model.theta.begin() + static_cast<std::ptrdiff_t>(s.weights_offset);
    const auto b_begin = model.theta.begin() + static_cast<std::ptrdiff_t>(s.biases_offset);
    layers.push_back(DenseLayer{
        Matrix(s.in_dim, s.out_dim,
               std::vector<double>(w_begin, w_begin + static_cast<std::ptrdiff_t>(s.in_dim * s.out_dim))),
        std::vector<double>(b_begin, b_begin + static_cast<std::ptrdiff_t>(s.out_dim))});
  }
  return layers;
}

ModelParams flatten(const MlpArchitecture& arch, const std::vector<DenseLayer>& layers) {
  ModelParams model = ModelParams::zeros(arch);
  const auto layout = parameter_layout(arch);
  if (layers.size() != layout.size()) throw ConfigError("layer count does not match architecture");
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const LayerSlice& s = layout[l];
    const DenseLayer& layer = layers[l];
    if (layer.weights.rows() != s.in_dim || layer.weights.cols() != s.out_dim ||
        layer.biases.size() != s.out_dim) {
      throw ConfigError("layer " + std::to_string(l) + " has the wrong shape");
    }
    std::copy(layer.weights.values().begin(), layer.weights.values().end(),
              model.theta.begin() + static_cast<std::ptrdiff_t>(s.weights_offset));
    std::copy(layer.biases.begin(), layer.biases.end(),
              model.theta.begin() + static_cast<std::ptrdiff_t>(s.biases_offset));
  }
  return model;
}

void LabeledBatch::validate(std::size_t num_classes) const {
  if (inputs.rows() != labels.size()) {
    throw ConfigError("batch has " + std::to_string(inputs.rows()) + " rows but " +
                      std::to_string(labels.size()) + " labels");
  }
  for (std::size_t label : labels) {
    if (label >= num_classes) {
      throw InputError("label " + std::to_string(label) + " out of range [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
}

LabeledBatch gather(const LabeledBatch& batch, std::span<const std::size_t> indices) {
  LabeledBatch out{select_rows(batch.inputs, indices), {}};
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(batch.labels.at(i));
  return out;
}

ForwardResult forward(const ModelParams& model, const Matrix& inputs) {
  require_input_dim(model, inputs);
  const auto layout = parameter_layout(model.arch);
  ForwardResult result;
  result.cache.layer_inputs.reserve(layout.size());
  result.cache.pre_activations.reserve(layout.size());

  Matrix activation = inputs;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    Matrix z = affine(model.theta, layout[l], activation);
    result.cache.layer_inputs.push_back(std::move(activation));
    result.cache.pre_activations.push_back(z);
    if (l + 1 < layout.size()) apply_tanh(z);
    activation = std::move(z);
  }
  result.logits = std::move(activation);
  return result;
}

Matrix project(const ModelParams& model, const Matrix& inputs) {
  require_input_dim(model, inputs);
  const auto layout = parameter_layout(model.arch);
  Matrix activation = inputs;
  for (std::size_t l = 0; l + 1 < layout.size(); ++l) {
    activation = affine(model.theta, layout[l], activation);
    apply_tanh(activation);
  }
  return activation;
}

Matrix output_layer(const ModelParams& model, const Matrix& projected) {
  model.validate();
  if (projected.cols() != model.arch.projection_dim()) {
    throw ConfigError("projected features have the wrong width");
  }
  return affine(model.theta, parameter_layout(model.arch).back(), projected);
}

double cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
  if (logits.rows() != labels.size()) {
    throw ConfigError("logit rows and label count differ");
  }
  if (labels.empty()) throw InputError("cross_entropy of an empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    if (labels[r] >= row.size()) {
      throw InputError("label " + std::to_string(labels[r]) + " out of range [0, " +
                       std::to_string(row.size()) + ")");
    }
    // logsumexp = max + log1p(sum over the other entries of exp(v - max))
    const auto top = std::max_element(row.begin(), row.end());
    double tail = 0.0;
    for (auto it = row.begin(); it != row.end(); ++it) {
      if (it != top) tail += std::exp(*it - *top);
    }
    total += (*top - row[labels[r]]) + std::log1p(tail);
  }
  return total / static_cast<double>(logits.rows());
}

double batch_loss(const ModelParams& model, const LabeledBatch& batch) {
  return cross_entropy(forward(model, batch.inputs).logits, batch.labels);
}

double accuracy(const ModelParams& model, const LabeledBatch& batch) {
  if (batch.empty()) throw InputError("accuracy of an empty batch");
  const Matrix logits = forward(model, batch.inputs).logits;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == batch.labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

std::vector<double> backward(const ModelParams& model, const LabeledBatch& batch) {
  batch.validate(model.arch.num_classes);
  if (batch.empty()) throw InputError("backward on an empty batch");
  ForwardResult fwd = forward(model, batch.inputs);
  const auto layout = parameter_layout(model.arch);
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  // dL/dlogits = (softmax - onehot) / n
  Matrix delta = std::move(fwd.logits);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = delta.row(r);
    const double max_logit = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - max_logit);
      sum += v;
    }
    for (double& v : row) v = v / sum * inv_n;
    row[batch.labels[r]] -= inv_n;
  }

  std::vector<double> grad(model.theta.size(), 0.0);
  for (std::size_t l = layout.size(); l-- > 0;) {
    const LayerSlice& s = layout[l];
    const Matrix& x = fwd.cache.layer_inputs[l];
    double* gw = grad.data() + s.weights_offset;
    double* gb = grad.data() + s.biases_offset;
    for (std::size_t r = 0; r < n; ++r) {
      const auto d = delta.row(r);
      const auto in = x.row(r);
      for (std::size_t i = 0; i < s.in_dim; ++i) {
        const double xi = in[i];
        double* gwrow = gw + i * s.out_dim;
        for (std::size_t o = 0; o < s.out_dim; ++o) gwrow[o] += xi * d[o];
      }
      for (std::size_t o = 0; o < s.out_dim; ++o) gb[o] += d[o];
    }
    if (l == 0) break;

    // Propagate through W^T, then through tanh' = 1 - tanh^2 of the previous layer.
    const double* w = model.theta.data() + s.weights_offset;
    Matrix prev(n, s.in_dim);
    for (std::size_t r = 0; r < n; ++r) {
      const auto d = delta.row(r);
      const auto a = x.row(r);
      auto p = prev.row(r);
      for (std::size_t i = 0; i < s.in_dim; ++i) {
        const double* wrow = w + i * s.out_dim;
        double acc = 0.0;
        for (std::size_t o = 0; o < s.out_dim; ++o) acc += wrow[o] * d[o];
        p[i] = acc * (1.0 - a[i] * a[i]);
      }
    }
    delta = std::move(prev);
  }
  return grad;
}

ModelParams sgd_step(const ModelParams& model, std::span<const double> gradient,
                     double learning_rate) {
  if (gradient.size() != model.theta.size()) {
    throw ConfigError("gradient length " + std::to_string(gradient.size()) +
                      " != theta length " + std::to_string(model.theta.size()));
  }
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  ModelParams next = model;
  for (std::size_t i = 0; i < next.theta.size(); ++i) next.theta[i] -= learning_rate * gradient[i];
  return next;
}

ModelParams glorot_init(const MlpArchitecture& arch, Rng& rng) {
  ModelParams model = ModelParams::zeros(arch);
  for (const LayerSlice& s : parameter_layout(arch)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
    for (std::size_t k = 0; k < s.in_dim * s.out_dim; ++k) {
      model.theta[s.weights_offset + k] = rng.uniform(-limit, limit);
    }
  }
  return model;
}

}  // namespace robustfl
