#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mfls::nn {

enum class Activation { tanh, identity };

/// Post-processing of the last affine layer. `box` maps each output
/// coordinate y to lo + (hi - lo) * logistic(y), so outputs always lie in [lo, hi].
class OutputTransform {
 public:
  enum class Kind { identity, box };

  static OutputTransform identity() { return {}; }
  static OutputTransform box(std::vector<double> lo, std::vector<double> hi);

  Kind kind() const noexcept { return kind_; }
  bool is_box() const noexcept { return kind_ == Kind::box; }
  const std::vector<double>& lo() const noexcept { return lo_; }
  const std::vector<double>& hi() const noexcept { return hi_; }

  double apply(std::size_t k, double y) const;
  /// da/dy expressed through the transformed output a.
  double slope_at_output(std::size_t k, double a) const;

  friend bool operator==(const OutputTransform&, const OutputTransform&) = default;

 private:
  Kind kind_ = Kind::identity;
  std::vector<double> lo_, hi_;
};

/// Dense feedforward map: fixed input standardization u = (x - offset) / scale,
/// hidden layers with a shared activation, a linear output layer, then the
/// output transform. All parameters live in one flat array, layer by layer,
/// weights (row-major, out x in) followed by biases.
class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t output_dim,
                Activation hidden_activation = Activation::tanh,
                OutputTransform transform = OutputTransform::identity());

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept { return output_dim_; }
  const std::vector<std::size_t>& hidden() const noexcept { return hidden_; }
  Activation activation() const noexcept { return activation_; }
  const OutputTransform& output_transform() const noexcept { return transform_; }

  std::size_t num_layers() const noexcept { return hidden_.size() + 1; }
  std::size_t layer_in(std::size_t layer) const;
  std::size_t layer_out(std::size_t layer) const;
  std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_.at(layer) + layer_in(layer) * layer_out(layer);
  }

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> biases(std::size_t layer);
  std::span<const double> biases(std::size_t layer) const;

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::vector<double>& input_offset() noexcept { return input_offset_; }
  const std::vector<double>& input_offset() const noexcept { return input_offset_; }
  std::vector<double>& input_scale() noexcept { return input_scale_; }
  const std::vector<double>& input_scale() const noexcept { return input_scale_; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  void initialize_uniform(std::uint64_t seed);
  void set_zero();

  /// Reference evaluation, one input at a time (uses std::tanh).
  std::vector<double> forward(std::span<const double> x) const;

  bool parameters_finite() const;

  /// Copy with extra inputs appended after the existing ones; their weights are zero,
  /// so outputs are unchanged for any value of the new inputs.
  PolicyNetwork with_appended_inputs(std::size_t extra, double offset = 0.0,
                                     double scale = 1.0) const;

  friend bool operator==(const PolicyNetwork&, const PolicyNetwork&) = default;

 private:
  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
  std::vector<std::size_t> hidden_;
  Activation activation_ = Activation::tanh;
  OutputTransform transform_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  std::vector<double> input_offset_;
  std::vector<double> input_scale_;
};

}  // namespace mfls::nn
