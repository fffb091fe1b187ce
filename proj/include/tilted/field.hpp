#pragma once

// Hybrid field: factored volume -> per-channel Fourier features (annealed by
// a low-pass schedule) -> small ReLU MLP.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tilted/grid_kernels.hpp"
#include "tilted/grids.hpp"

namespace tilted {

struct FourierEncoding {
  int frequencies = 6;  // J; band j uses frequency 2^j * pi
  bool include_identity = true;

  int output_dim(int input_dim) const {
    return input_dim * ((include_identity ? 1 : 0) + 2 * frequencies);
  }
};

// eta_k moves linearly from eta_start to frequencies over ramp_steps, then
// stays at frequencies.
struct LowPassSchedule {
  int frequencies = 6;
  std::int64_t ramp_steps = 0;  // 0 disables the filter (all weights 1)
  double eta_start = 0.0;

  double eta(std::int64_t step) const;
};

std::vector<double> lowpass_weights_at_eta(double eta, int frequencies);
std::vector<double> lowpass_weights(std::int64_t step, const LowPassSchedule& schedule);

// Per channel z_c: [z_c (identity), w_j sin(2^j pi z_c), w_j cos(2^j pi z_c)]_{j<J}.
std::vector<double> fourier_encode(std::span<const double> z, std::span<const double> weights,
                                   const FourierEncoding& encoding);
// Gradient of <grad_out, fourier_encode(z)> with respect to z.
std::vector<double> fourier_encode_vjp(std::span<const double> z, std::span<const double> weights,
                                       const FourierEncoding& encoding,
                                       std::span<const double> grad_out);

enum class OutputActivation { Identity, Sigmoid };

// Fully connected ReLU network; parameters live in one flat buffer, per
// layer W (out x in, column-major) followed by b.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, OutputActivation output);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void initialize(std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
  OutputActivation output_activation() const { return output_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  std::size_t weight_offset(int layer) const { return offsets_[layer]; }

  // inputs: input_dim x batch. Keeps activations for backward().
  struct Activations {
    std::vector<Eigen::MatrixXd> values;  // values[0] = input, values[L] = output
  };
  const Eigen::MatrixXd& forward(const Eigen::Ref<const Eigen::MatrixXd>& inputs, Activations& acts) const;

  // grad_output: dL/d(output), output_dim x batch. Accumulates parameter
  // gradients into grad_params and returns dL/d(input).
  Eigen::MatrixXd backward(const Activations& acts, const Eigen::Ref<const Eigen::MatrixXd>& grad_output,
                           std::span<double> grad_params) const;

 private:
  std::vector<int> sizes_;
  OutputActivation output_ = OutputActivation::Identity;
  std::vector<std::size_t> offsets_;
  // Aligned so Eigen's vectorized reductions see the same layout in every copy.
  std::vector<double, Eigen::aligned_allocator<double>> params_;
};

struct FieldConfig {
  FourierEncoding encoding;
  LowPassSchedule lowpass;
  std::vector<int> hidden{32, 32};
  int output_dim = 1;
  OutputActivation output = OutputActivation::Identity;
  bool contract_input = false;
  bool learn_transforms = true;
  double grid_init_scale = 0.1;
  double grid_init_mean = 0.0;  // products of factors need a nonzero mean
};

class HybridField {
 public:
  HybridField() = default;
  HybridField(FactoredVolume volume, const FieldConfig& config);

  // Random grids, decoder, and (when learnable) random transforms.
  static HybridField create(const DecompositionSpec& spec, const FieldConfig& config,
                            std::uint64_t seed);

  FactoredVolume volume;
  FourierEncoding encoding;
  LowPassSchedule lowpass;
  Mlp decoder;
  bool contract_input = false;
  bool learn_transforms = true;

  int input_dim() const { return volume.spec().input_dim(); }
  int output_dim() const { return decoder.output_dim(); }
  std::size_t parameter_count() const {
    return volume.parameter_count() + decoder.parameter_count();
  }

  // Throws NumericError naming the first tensor holding a non-finite value.
  void check_finite() const;
};

std::vector<double> field_forward(const HybridField& field, std::span<const double> p,
                                  std::int64_t step);

// Batched forward (outputs: batch * output_dim, sample-major).
void field_forward_batch(const HybridField& field, std::span<const double> points,
                         std::int64_t step, std::span<double> outputs, int threads = 1);

struct FieldGradients {
  std::vector<double> grid;       // volume parameter layout
  std::vector<double> transform;  // tangent_dim per transform
  std::vector<double> decoder;    // decoder parameter layout
  double loss = 0.0;              // data term only

  void resize_for(const HybridField& field);
  void zero();
};

enum class BatchReduction { Mean, Sum };

// Squared-error loss sum_o (y_o - target_o)^2 averaged over output channels
// and reduced over the batch, with gradients for every parameter class.
FieldGradients field_backward(const HybridField& field, std::span<const double> points,
                              std::span<const double> targets, std::int64_t step,
                              BatchReduction reduction = BatchReduction::Mean, int threads = 1);

// Reusable buffers for the training loop.
struct FieldWorkspace {
  std::vector<double> latent;
  QueryCache cache;
  Eigen::MatrixXd encoded;
  Mlp::Activations acts;
  std::vector<Mat3> rotation_grad;
  std::vector<double> weights;
};

void field_backward_into(const HybridField& field, std::span<const double> points,
                         std::span<const double> targets, std::int64_t step,
                         BatchReduction reduction, int threads, FieldWorkspace& ws,
                         FieldGradients& grads);

}  // namespace tilted
