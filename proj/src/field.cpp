#include "tilted/field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "tilted/errors.hpp"
#include "tilted/rng.hpp"

namespace tilted {

// ---------------------------------------------------------------------------
// Low-pass schedule and Fourier features

double LowPassSchedule::eta(std::int64_t step) const {
  if (ramp_steps <= 0) return static_cast<double>(frequencies);
  const double t = std::clamp(static_cast<double>(step) / static_cast<double>(ramp_steps), 0.0, 1.0);
  return eta_start + (static_cast<double>(frequencies) - eta_start) * t;
}

std::vector<double> lowpass_weights_at_eta(double eta, int frequencies) {
  std::vector<double> w(frequencies);
  for (int j = 0; j < frequencies; ++j) {
    const double a = std::clamp(eta - j, 0.0, 1.0);
    w[j] = (1.0 - std::cos(std::numbers::pi * a)) / 2.0;
  }
  return w;
}

std::vector<double> lowpass_weights(std::int64_t step, const LowPassSchedule& schedule) {
  return lowpass_weights_at_eta(schedule.eta(step), schedule.frequencies);
}

namespace {

// Number of leading bands that must be evaluated (trailing zero-weight bands
// contribute nothing and are skipped).
int active_bands(std::span<const double> weights) {
  int n = static_cast<int>(weights.size());
  while (n > 0 && weights[n - 1] == 0.0) --n;
  return n;
}

// Encodes `count` latents into `out` (stride = per-channel block width).
void encode_values(const double* z, int count, const double* w, int J, int active, bool identity,
                   double* out) {
  const int block = (identity ? 1 : 0) + 2 * J;
  for (int c = 0; c < count; ++c) {
    double* o = out + static_cast<std::size_t>(c) * block;
    if (identity) *o++ = z[c];
    double s = 0.0, co = 1.0;
    if (active > 0) {
      s = std::sin(std::numbers::pi * z[c]);
      co = std::cos(std::numbers::pi * z[c]);
    }
    for (int j = 0; j < J; ++j) {
      if (j < active) {
        o[2 * j] = w[j] * s;
        o[2 * j + 1] = w[j] * co;
        const double s2 = 2.0 * s * co;
        const double c2 = co * co - s * s;
        s = s2;
        co = c2;
      } else {
        o[2 * j] = 0.0;
        o[2 * j + 1] = 0.0;
      }
    }
  }
}

void encode_vjp_values(const double* z, int count, const double* w, int J, int active,
                       bool identity, const double* grad_out, double* grad_z) {
  const int block = (identity ? 1 : 0) + 2 * J;
  for (int c = 0; c < count; ++c) {
    const double* g = grad_out + static_cast<std::size_t>(c) * block;
    double acc = 0.0;
    if (identity) acc = *g++;
    if (active > 0) {
      double s = std::sin(std::numbers::pi * z[c]);
      double co = std::cos(std::numbers::pi * z[c]);
      double freq = std::numbers::pi;
      for (int j = 0; j < active; ++j) {
        acc += w[j] * freq * (g[2 * j] * co - g[2 * j + 1] * s);
        const double s2 = 2.0 * s * co;
        const double c2 = co * co - s * s;
        s = s2;
        co = c2;
        freq *= 2.0;
      }
    }
    grad_z[c] = acc;
  }
}

}  // namespace

std::vector<double> fourier_encode(std::span<const double> z, std::span<const double> weights,
                                   const FourierEncoding& enc) {
  if (static_cast<int>(weights.size()) != enc.frequencies) {
    throw StructuralError("fourier_encode: weight count must equal frequency count");
  }
  std::vector<double> out(enc.output_dim(static_cast<int>(z.size())));
  encode_values(z.data(), static_cast<int>(z.size()), weights.data(), enc.frequencies,
                active_bands(weights), enc.include_identity, out.data());
  return out;
}

std::vector<double> fourier_encode_vjp(std::span<const double> z, std::span<const double> weights,
                                       const FourierEncoding& enc, std::span<const double> grad_out) {
  if (static_cast<int>(weights.size()) != enc.frequencies ||
      static_cast<int>(grad_out.size()) != enc.output_dim(static_cast<int>(z.size()))) {
    throw StructuralError("fourier_encode_vjp: shape mismatch");
  }
  std::vector<double> out(z.size());
  encode_vjp_values(z.data(), static_cast<int>(z.size()), weights.data(), enc.frequencies,
                    active_bands(weights), enc.include_identity, grad_out.data(), out.data());
  return out;
}

// ---------------------------------------------------------------------------
// MLP

Mlp::Mlp(std::vector<int> layer_sizes, OutputActivation output)
    : sizes_(std::move(layer_sizes)), output_(output) {
  if (sizes_.size() < 2) throw StructuralError("Mlp: need at least input and output sizes");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw StructuralError("Mlp: layer sizes must be >= 1");
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l] + sizes_[l + 1];
  }
  params_.assign(offset, 0.0);
}

void Mlp::initialize(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x6d6c70));
  for (int l = 0; l < layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    auto W = weight(l);
    for (Eigen::Index j = 0; j < W.cols(); ++j)
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = rng.uniform(-bound, bound);
    auto b = bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-bound, bound);
  }
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(int l) {
  return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int l) const {
  return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(int l) {
  return {params_.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(int l) const {
  return {params_.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
}

const Eigen::MatrixXd& Mlp::forward(const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                    Activations& acts) const {
  if (inputs.rows() != input_dim()) throw StructuralError("Mlp::forward: input dimension mismatch");
  const int L = layer_count();
  acts.values.resize(L + 1);
  acts.values[0] = inputs;
  for (int l = 0; l < L; ++l) {
    Eigen::MatrixXd& out = acts.values[l + 1];
    out.noalias() = weight(l) * acts.values[l];
    out.colwise() += bias(l);
    if (l + 1 < L) {
      out = out.cwiseMax(0.0);
    } else if (output_ == OutputActivation::Sigmoid) {
      out = (1.0 + (-out.array()).exp()).inverse().matrix();
    }
  }
  return acts.values[L];
}

Eigen::MatrixXd Mlp::backward(const Activations& acts, const Eigen::Ref<const Eigen::MatrixXd>& grad_output,
                              std::span<double> grad_params) const {
  if (grad_params.size() != params_.size()) throw StructuralError("Mlp::backward: gradient buffer size");
  const int L = layer_count();
  Eigen::MatrixXd delta = grad_output;
  if (output_ == OutputActivation::Sigmoid) {
    const auto& y = acts.values[L].array();
    delta = (delta.array() * y * (1.0 - y)).matrix();
  }
  for (int l = L - 1; l >= 0; --l) {
    Eigen::Map<Eigen::MatrixXd> gW(grad_params.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
    Eigen::Map<Eigen::VectorXd> gb(
        grad_params.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]);
    const Eigen::MatrixXd dW = delta * acts.values[l].transpose();
    const Eigen::VectorXd db = delta.rowwise().sum();
    gW += dW;
    gb += db;
    Eigen::MatrixXd prev = weight(l).transpose() * delta;
    if (l > 0) {
      prev = (acts.values[l].array() > 0.0).select(prev, 0.0);
    }
    delta = std::move(prev);
  }
  return delta;
}

// ---------------------------------------------------------------------------
// Hybrid field

HybridField::HybridField(FactoredVolume vol, const FieldConfig& config)
    : volume(std::move(vol)),
      encoding(config.encoding),
      lowpass(config.lowpass),
      contract_input(config.contract_input),
      learn_transforms(config.learn_transforms) {
  lowpass.frequencies = encoding.frequencies;
  std::vector<int> sizes{encoding.output_dim(volume.spec().latent_dim())};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(config.output_dim);
  decoder = Mlp(std::move(sizes), config.output);
}

HybridField HybridField::create(const DecompositionSpec& spec, const FieldConfig& config,
                                std::uint64_t seed) {
  TransformSet transforms = config.learn_transforms
                                ? TransformSet::random(spec.input_dim(), spec.transforms, seed)
                                : TransformSet::identity(spec.input_dim(), spec.transforms);
  FactoredVolume volume(spec, std::move(transforms));
  volume.randomize(seed, config.grid_init_scale, config.grid_init_mean);
  HybridField field(std::move(volume), config);
  field.decoder.initialize(seed);
  return field;
}

void HybridField::check_finite() const {
  const auto params = volume.parameters();
  for (const auto& s : volume.slots()) {
    for (std::size_t i = 0; i < s.size; ++i) {
      if (!std::isfinite(params[s.offset + i])) {
        std::ostringstream msg;
        msg << "non-finite value in volume factor grid (transform " << s.transform << ", level "
            << s.level << ", factor " << s.factor << ")";
        throw NumericError(msg.str());
      }
    }
  }
  for (int l = 0; l < decoder.layer_count(); ++l) {
    if (!decoder.weight(l).allFinite()) {
      throw NumericError("non-finite value in decoder weight of layer " + std::to_string(l));
    }
    if (!decoder.bias(l).allFinite()) {
      throw NumericError("non-finite value in decoder bias of layer " + std::to_string(l));
    }
  }
  const auto check_rotation = [](double v, int t) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in transform " + std::to_string(t));
  };
  for (int t = 0; t < volume.transforms().size(); ++t) {
    const Mat3 R = volume.transforms().matrix(t);
    for (const auto& row : R)
      for (double v : row) check_rotation(v, t);
  }
}

namespace {

// Points after optional contraction.
std::span<const double> prepare_points(const HybridField& field, std::span<const double> points,
                                       std::vector<double>& storage) {
  if (!field.contract_input) return points;
  const int dim = field.input_dim();
  storage.resize(points.size());
  for (std::size_t b = 0; b < points.size() / dim; ++b) {
    const auto c = contract(points.subspan(b * dim, dim));
    std::copy(c.begin(), c.end(), storage.begin() + b * dim);
  }
  return storage;
}

void encode_batch(const HybridField& field, std::span<const double> latent, std::size_t batch,
                  std::span<const double> weights, Eigen::MatrixXd& encoded) {
  const int d = field.volume.spec().latent_dim();
  const int J = field.encoding.frequencies;
  encoded.resize(field.encoding.output_dim(d), static_cast<Eigen::Index>(batch));
  const int active = active_bands(weights);
  for (std::size_t b = 0; b < batch; ++b) {
    encode_values(latent.data() + b * d, d, weights.data(), J, active, field.encoding.include_identity,
                  encoded.data() + b * encoded.rows());
  }
}

}  // namespace

void field_forward_batch(const HybridField& field, std::span<const double> points, std::int64_t step,
                         std::span<double> outputs, int threads) {
  field.check_finite();
  const int dim = field.input_dim();
  if (points.size() % dim != 0) throw StructuralError("field_forward: ragged point buffer");
  const std::size_t batch = points.size() / dim;
  if (outputs.size() != batch * field.output_dim()) {
    throw StructuralError("field_forward: output buffer has wrong size");
  }
  std::vector<double> storage;
  const auto pts = prepare_points(field, points, storage);
  std::vector<double> latent(batch * field.volume.spec().latent_dim());
  query_batch(field.volume, pts, latent, nullptr, threads);
  const auto weights = lowpass_weights(step, field.lowpass);
  Eigen::MatrixXd encoded;
  encode_batch(field, latent, batch, weights, encoded);
  Mlp::Activations acts;
  const Eigen::MatrixXd& y = field.decoder.forward(encoded, acts);
  std::copy(y.data(), y.data() + y.size(), outputs.begin());
}

std::vector<double> field_forward(const HybridField& field, std::span<const double> p, std::int64_t step) {
  std::vector<double> out(field.output_dim());
  field_forward_batch(field, p, step, out, 1);
  return out;
}

void FieldGradients::resize_for(const HybridField& field) {
  grid.assign(field.volume.parameter_count(), 0.0);
  transform.assign(static_cast<std::size_t>(field.volume.transforms().size()) *
                       field.volume.transforms().tangent_dim(),
                   0.0);
  decoder.assign(field.decoder.parameter_count(), 0.0);
  loss = 0.0;
}

void FieldGradients::zero() {
  std::fill(grid.begin(), grid.end(), 0.0);
  std::fill(transform.begin(), transform.end(), 0.0);
  std::fill(decoder.begin(), decoder.end(), 0.0);
  loss = 0.0;
}

void field_backward_into(const HybridField& field, std::span<const double> points,
                         std::span<const double> targets, std::int64_t step, BatchReduction reduction,
                         int threads, FieldWorkspace& ws, FieldGradients& grads) {
  field.check_finite();
  const int dim = field.input_dim();
  const int out_dim = field.output_dim();
  if (points.empty() || points.size() % dim != 0) {
    throw StructuralError("field_backward: batch must be non-empty");
  }
  const std::size_t batch = points.size() / dim;
  if (targets.size() != batch * out_dim) throw StructuralError("field_backward: target size mismatch");
  if (grads.grid.size() != field.volume.parameter_count() ||
      grads.decoder.size() != field.decoder.parameter_count()) {
    grads.resize_for(field);
  } else {
    grads.zero();
  }

  std::vector<double> storage;
  const auto pts = prepare_points(field, points, storage);
  const int d = field.volume.spec().latent_dim();
  ws.latent.resize(batch * d);
  query_batch(field.volume, pts, ws.latent, &ws.cache, threads);
  ws.weights = lowpass_weights(step, field.lowpass);
  encode_batch(field, ws.latent, batch, ws.weights, ws.encoded);
  const Eigen::MatrixXd& y = field.decoder.forward(ws.encoded, ws.acts);

  const double scale = 1.0 / (static_cast<double>(out_dim) *
                              (reduction == BatchReduction::Mean ? static_cast<double>(batch) : 1.0));
  Eigen::Map<const Eigen::MatrixXd> target(targets.data(), out_dim, static_cast<Eigen::Index>(batch));
  const Eigen::MatrixXd residual = y - target;
  grads.loss = residual.squaredNorm() * scale;
  const Eigen::MatrixXd grad_y = (2.0 * scale) * residual;

  const Eigen::MatrixXd grad_encoded = field.decoder.backward(ws.acts, grad_y, grads.decoder);

  std::vector<double> grad_latent(batch * d);
  const int active = active_bands(ws.weights);
  for (std::size_t b = 0; b < batch; ++b) {
    encode_vjp_values(ws.latent.data() + b * d, d, ws.weights.data(), field.encoding.frequencies, active,
                      field.encoding.include_identity, grad_encoded.data() + b * grad_encoded.rows(),
                      grad_latent.data() + b * d);
  }
  ws.rotation_grad.assign(field.volume.transforms().size(), Mat3{});
  query_batch_vjp(field.volume, pts, ws.cache, grad_latent, grads.grid, ws.rotation_grad, threads);
  if (field.learn_transforms) {
    grads.transform = field.volume.transforms().tangent_gradients(ws.rotation_grad);
  }
}

FieldGradients field_backward(const HybridField& field, std::span<const double> points,
                              std::span<const double> targets, std::int64_t step,
                              BatchReduction reduction, int threads) {
  FieldWorkspace ws;
  FieldGradients grads;
  grads.resize_for(field);
  field_backward_into(field, points, targets, step, reduction, threads, ws, grads);
  return grads;
}

}  // namespace tilted
