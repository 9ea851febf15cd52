#include "mfls/levelset/policy.hpp"

#include <algorithm>
#include <cmath>

#include "mfls/util/error.hpp"
#include "mfls/util/rng.hpp"

namespace mfls::levelset {

std::size_t PolicySet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& net : alpha) n += net.parameter_count();
  for (const auto& net : beta) n += net.parameter_count();
  return n;
}

std::size_t PolicySet::alpha_offset(std::size_t step) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < step; ++i) off += alpha[i].parameter_count();
  return off;
}

std::size_t PolicySet::beta_offset(std::size_t step) const {
  std::size_t off = alpha_offset(alpha.size());
  for (std::size_t i = 0; i < step; ++i) off += beta[i].parameter_count();
  return off;
}

std::vector<double> PolicySet::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& net : alpha) out.insert(out.end(), net.parameters().begin(), net.parameters().end());
  for (const auto& net : beta) out.insert(out.end(), net.parameters().begin(), net.parameters().end());
  return out;
}

void PolicySet::unflatten(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw DimensionError("flat parameter vector has wrong size");
  std::size_t off = 0;
  auto load = [&](nn::PolicyNetwork& net) {
    auto p = net.parameters();
    std::copy_n(flat.data() + off, p.size(), p.begin());
    off += p.size();
  };
  for (auto& net : alpha) load(net);
  for (auto& net : beta) load(net);
}

PolicySet PolicySet::build(const dynamics::ProblemSpec& spec, const Architecture& arch, bool common,
                           std::uint64_t seed) {
  const auto dm = spec.dims();
  const std::size_t p = common ? dm.common : 0;
  if (common && p == 0) throw ConfigError("common-noise policies need a model with common noise");
  nn::OutputTransform transform = spec.control_lo.empty()
                                      ? nn::OutputTransform::identity()
                                      : nn::OutputTransform::box(spec.control_lo, spec.control_hi);
  PolicySet set;
  for (std::size_t i = 0; i < spec.steps; ++i) {
    nn::PolicyNetwork net(dm.state + 1 + p, arch.hidden, dm.control, arch.activation, transform);
    net.initialize_uniform(derive_seed(seed, "init", {0, i}));
    for (std::size_t k = 0; k < dm.state; ++k) {
      if (!spec.state_center.empty()) net.input_offset()[k] = spec.state_center[k];
      if (!spec.state_scale.empty()) net.input_scale()[k] = spec.state_scale[k];
    }
    set.alpha.push_back(std::move(net));
    if (common) {
      nn::PolicyNetwork b(1 + p, arch.hidden, p, arch.activation);
      b.initialize_uniform(derive_seed(seed, "init", {1, i}));
      set.beta.push_back(std::move(b));
    }
  }
  return set;
}

PolicySet PolicySet::with_zero_common(std::size_t p, const Architecture& beta_arch) const {
  if (common()) throw ConfigError("policy already has common-noise inputs");
  PolicySet out;
  for (const auto& net : alpha) {
    out.alpha.push_back(net.with_appended_inputs(p));
    out.beta.emplace_back(1 + p, beta_arch.hidden, p, beta_arch.activation);
    out.beta.back().input_offset()[0] = net.input_offset().back();
    out.beta.back().input_scale()[0] = net.input_scale().back();
  }
  return out;
}

void PolicySet::set_z_normalization(std::span<const double> offset, std::span<const double> scale,
                                    const dynamics::TimeGrid& grid, std::size_t state_dim) {
  if (offset.size() != alpha.size() || scale.size() != alpha.size())
    throw DimensionError("Z normalization needs one entry per step");
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double w_scale = i == 0 ? 1.0 : std::sqrt(grid.time(i));
    auto& a = alpha[i];
    a.input_offset()[state_dim] = offset[i];
    a.input_scale()[state_dim] = scale[i];
    for (std::size_t k = state_dim + 1; k < a.input_dim(); ++k) a.input_scale()[k] = w_scale;
    if (common()) {
      auto& b = beta[i];
      b.input_offset()[0] = offset[i];
      b.input_scale()[0] = scale[i];
      for (std::size_t k = 1; k < b.input_dim(); ++k) b.input_scale()[k] = w_scale;
    }
  }
}

void NetworkLaw::control(std::size_t step, double, std::span<const double> x, double z,
                         std::span<const double> w0, std::span<double> a) const {
  const auto& net = set_->alpha.at(step);
  std::vector<double> in(x.begin(), x.end());
  in.push_back(z);
  if (set_->common()) in.insert(in.end(), w0.begin(), w0.end());
  const auto out = net.forward(in);
  std::copy(out.begin(), out.end(), a.begin());
}

void NetworkLaw::martingale(std::size_t step, double z, std::span<const double> w0,
                            std::span<double> beta) const {
  if (!set_->common()) {
    std::fill(beta.begin(), beta.end(), 0.0);
    return;
  }
  std::vector<double> in{z};
  in.insert(in.end(), w0.begin(), w0.end());
  const auto out = set_->beta.at(step).forward(in);
  std::copy(out.begin(), out.end(), beta.begin());
}

}  // namespace mfls::levelset
