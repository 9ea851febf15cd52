#include "mfls/nn/network.hpp"

#include <cmath>
#include <random>
#include <string>

#include "mfls/util/error.hpp"
#include "mfls/util/rng.hpp"

namespace mfls::nn {

OutputTransform OutputTransform::box(std::vector<double> lo, std::vector<double> hi) {
  if (lo.size() != hi.size()) throw DimensionError("box bounds have different lengths");
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (!(lo[k] <= hi[k]) || !std::isfinite(lo[k]) || !std::isfinite(hi[k]))
      throw ConfigError("box bound " + std::to_string(k) + " is empty or not finite");
  }
  OutputTransform t;
  t.kind_ = Kind::box;
  t.lo_ = std::move(lo);
  t.hi_ = std::move(hi);
  return t;
}

double OutputTransform::apply(std::size_t k, double y) const {
  if (kind_ == Kind::identity) return y;
  const double s = 1.0 / (1.0 + std::exp(-y));
  const double a = lo_[k] + (hi_[k] - lo_[k]) * s;
  return a < lo_[k] ? lo_[k] : (a > hi_[k] ? hi_[k] : a);
}

double OutputTransform::slope_at_output(std::size_t k, double a) const {
  if (kind_ == Kind::identity) return 1.0;
  const double w = hi_[k] - lo_[k];
  if (w == 0.0) return 0.0;
  const double s = (a - lo_[k]) / w;
  return w * s * (1.0 - s);
}

PolicyNetwork::PolicyNetwork(std::size_t input_dim, std::vector<std::size_t> hidden,
                             std::size_t output_dim, Activation hidden_activation,
                             OutputTransform transform)
    : input_dim_(input_dim),
      output_dim_(output_dim),
      hidden_(std::move(hidden)),
      activation_(hidden_activation),
      transform_(std::move(transform)) {
  if (input_dim_ == 0 || output_dim_ == 0) throw DimensionError("network dimensions must be positive");
  for (auto w : hidden_)
    if (w == 0) throw DimensionError("hidden layer width must be positive");
  if (transform_.is_box() && transform_.lo().size() != output_dim_)
    throw DimensionError("box transform has " + std::to_string(transform_.lo().size()) +
                         " bounds, network has " + std::to_string(output_dim_) + " outputs");
  std::size_t total = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    offsets_.push_back(total);
    total += (layer_in(l) + 1) * layer_out(l);
  }
  params_.assign(total, 0.0);
  input_offset_.assign(input_dim_, 0.0);
  input_scale_.assign(input_dim_, 1.0);
}

std::size_t PolicyNetwork::layer_in(std::size_t layer) const {
  if (layer >= num_layers()) throw DimensionError("layer index out of range");
  return layer == 0 ? input_dim_ : hidden_[layer - 1];
}

std::size_t PolicyNetwork::layer_out(std::size_t layer) const {
  if (layer >= num_layers()) throw DimensionError("layer index out of range");
  return layer + 1 == num_layers() ? output_dim_ : hidden_[layer];
}

std::span<double> PolicyNetwork::weights(std::size_t layer) {
  return {params_.data() + weight_offset(layer), layer_in(layer) * layer_out(layer)};
}
std::span<const double> PolicyNetwork::weights(std::size_t layer) const {
  return {params_.data() + weight_offset(layer), layer_in(layer) * layer_out(layer)};
}
std::span<double> PolicyNetwork::biases(std::size_t layer) {
  return {params_.data() + bias_offset(layer), layer_out(layer)};
}
std::span<const double> PolicyNetwork::biases(std::size_t layer) const {
  return {params_.data() + bias_offset(layer), layer_out(layer)};
}

void PolicyNetwork::initialize_uniform(std::uint64_t seed) {
  Engine eng(seed);
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer_in(l)));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& w : weights(l)) w = u(eng);
    for (auto& b : biases(l)) b = u(eng);
  }
}

void PolicyNetwork::set_zero() { std::fill(params_.begin(), params_.end(), 0.0); }

std::vector<double> PolicyNetwork::forward(std::span<const double> x) const {
  if (x.size() != input_dim_)
    throw DimensionError("input has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(input_dim_));
  std::vector<double> h(input_dim_);
  for (std::size_t i = 0; i < input_dim_; ++i) {
    if (!std::isfinite(x[i])) throw NonFiniteError("non-finite network input");
    h[i] = (x[i] - input_offset_[i]) / input_scale_[i];
  }
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const auto w = weights(l);
    const auto b = biases(l);
    const std::size_t n_in = layer_in(l), n_out = layer_out(l);
    std::vector<double> next(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < n_in; ++i) acc += w[o * n_in + i] * h[i];
      const bool hidden_layer = l + 1 < num_layers();
      next[o] = hidden_layer && activation_ == Activation::tanh ? std::tanh(acc) : acc;
    }
    h = std::move(next);
  }
  for (std::size_t k = 0; k < output_dim_; ++k) h[k] = transform_.apply(k, h[k]);
  return h;
}

bool PolicyNetwork::parameters_finite() const {
  for (double p : params_)
    if (!std::isfinite(p)) return false;
  return true;
}

PolicyNetwork PolicyNetwork::with_appended_inputs(std::size_t extra, double offset,
                                                  double scale) const {
  PolicyNetwork out(input_dim_ + extra, hidden_, output_dim_, activation_, transform_);
  const std::size_t n_in = input_dim_, n_out = layer_out(0);
  auto w_new = out.weights(0);
  const auto w_old = weights(0);
  for (std::size_t o = 0; o < n_out; ++o)
    for (std::size_t i = 0; i < n_in; ++i) w_new[o * (n_in + extra) + i] = w_old[o * n_in + i];
  std::copy(biases(0).begin(), biases(0).end(), out.biases(0).begin());
  for (std::size_t l = 1; l < num_layers(); ++l) {
    std::copy(weights(l).begin(), weights(l).end(), out.weights(l).begin());
    std::copy(biases(l).begin(), biases(l).end(), out.biases(l).begin());
  }
  for (std::size_t i = 0; i < n_in; ++i) {
    out.input_offset_[i] = input_offset_[i];
    out.input_scale_[i] = input_scale_[i];
  }
  for (std::size_t i = n_in; i < n_in + extra; ++i) {
    out.input_offset_[i] = offset;
    out.input_scale_[i] = scale;
  }
  return out;
}

}  // namespace mfls::nn
