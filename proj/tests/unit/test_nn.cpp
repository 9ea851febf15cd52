#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mfls/nn/activation.hpp"
#include "mfls/nn/adam.hpp"
#include "mfls/nn/batch.hpp"
#include "mfls/nn/network.hpp"
#include "mfls/util/error.hpp"

using namespace mfls;
using nn::kLanes;

namespace {

// Plain matrix-vector evaluation, written independently of PolicyNetwork::forward.
std::vector<double> naive_forward(const nn::PolicyNetwork& net, const std::vector<double>& x) {
  std::vector<double> h(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) h[i] = (x[i] - net.input_offset()[i]) / net.input_scale()[i];
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto w = net.weights(l);
    const auto b = net.biases(l);
    const std::size_t n_in = net.layer_in(l), n_out = net.layer_out(l);
    std::vector<double> out(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < n_in; ++i) s += w[o * n_in + i] * h[i];
      out[o] = (l + 1 < net.num_layers() && net.activation() == nn::Activation::tanh) ? std::tanh(s) : s;
    }
    h = out;
  }
  if (net.output_transform().is_box())
    for (std::size_t k = 0; k < h.size(); ++k) {
      const double lo = net.output_transform().lo()[k], hi = net.output_transform().hi()[k];
      h[k] = lo + (hi - lo) / (1.0 + std::exp(-h[k]));
    }
  return h;
}

}  // namespace

TEST_CASE("zero network outputs zero") {
  nn::PolicyNetwork net(3, {5, 4}, 2);
  net.set_zero();
  for (double v : net.forward(std::vector<double>{0.3, -2.0, 7.0})) CHECK(v == 0.0);
}

TEST_CASE("identity single-layer network returns its input") {
  nn::PolicyNetwork net(3, {}, 3, nn::Activation::identity);
  net.set_zero();
  auto w = net.weights(0);
  for (std::size_t k = 0; k < 3; ++k) w[k * 3 + k] = 1.0;
  const std::vector<double> x{0.25, -1.5, 4.0};
  CHECK(net.forward(x) == x);
}

TEST_CASE("forward matches an independent matrix routine") {
  nn::PolicyNetwork net(3, {15, 15}, 2, nn::Activation::tanh, nn::OutputTransform::box({-1, 0}, {1, 2}));
  net.initialize_uniform(11);
  net.input_offset() = {0.1, -0.2, 0.3};
  net.input_scale() = {2.0, 0.5, 1.5};
  std::mt19937_64 eng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x{nd(eng), nd(eng), nd(eng)};
    const auto ref = naive_forward(net, x);
    const auto out = net.forward(x);
    for (std::size_t k = 0; k < 2; ++k) CHECK(out[k] == doctest::Approx(ref[k]).epsilon(1e-14));
  }
}

TEST_CASE("batched forward agrees with the reference forward") {
  nn::PolicyNetwork net(2, {15, 15}, 1, nn::Activation::tanh, nn::OutputTransform::box({-0.2}, {0.2}));
  net.initialize_uniform(3);
  nn::BatchEvaluator ev(net);
  std::vector<double> x(2 * kLanes), tape(ev.tape_size()), out(kLanes);
  std::mt19937_64 eng(9);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (auto& v : x) v = nd(eng);
  ev.forward(x.data(), 37, tape.data(), out.data());
  for (std::size_t p = 0; p < 37; ++p) {
    const auto ref = net.forward(std::vector<double>{x[p], x[kLanes + p]});
    CHECK(out[p] == doctest::Approx(ref[0]).epsilon(1e-13));
  }
}

TEST_CASE("fast tanh and logistic stay within a few ulp of libm") {
  for (double x = -30.0; x <= 30.0; x += 0.0137) {
    CHECK(std::abs(nn::fast_tanh(x) - std::tanh(x)) <= 4e-16 * std::max(1.0, std::abs(std::tanh(x))));
    const double lg = 1.0 / (1.0 + std::exp(-x));
    CHECK(std::abs(nn::fast_logistic(x) - lg) <= 9e-16 * lg);
  }
}

TEST_CASE("backward of half squared output at a zero network is zero") {
  nn::PolicyNetwork net(2, {4}, 2);
  net.set_zero();
  nn::BatchEvaluator ev(net);
  std::vector<double> x(2 * kLanes, 0.7), tape(ev.tape_size()), out(2 * kLanes), grad(net.parameter_count(), 0.0);
  ev.forward(x.data(), 5, tape.data(), out.data());
  // d(1/2 |y|^2)/dy = y = 0
  ev.backward(tape.data(), 5, out.data(), nullptr, grad.data());
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("backward of a linear function of the output bias") {
  // loss = c * y with an identity network: dy / d(bias) = 1, so the bias gradient is c.
  nn::PolicyNetwork net(2, {}, 1, nn::Activation::identity);
  net.initialize_uniform(4);
  nn::BatchEvaluator ev(net);
  std::vector<double> x(2 * kLanes, 0.0), tape(ev.tape_size()), out(kLanes), dout(kLanes, 0.0),
      grad(net.parameter_count(), 0.0);
  x[0] = 0.0;
  x[kLanes] = 0.0;
  ev.forward(x.data(), 1, tape.data(), out.data());
  dout[0] = 2.5;
  ev.backward(tape.data(), 1, dout.data(), nullptr, grad.data());
  CHECK(grad[net.bias_offset(0)] == 2.5);
  CHECK(grad[0] == 0.0);
  CHECK(grad[1] == 0.0);
}

TEST_CASE("network gradients match central differences") {
  nn::PolicyNetwork net(3, {15, 15}, 1, nn::Activation::tanh, nn::OutputTransform::box({-1}, {1}));
  net.initialize_uniform(21);
  nn::BatchEvaluator ev(net);
  const std::size_t n = 50;
  std::vector<double> x(3 * kLanes), tape(ev.tape_size()), out(kLanes), dout(kLanes), dx(3 * kLanes),
      grad(net.parameter_count(), 0.0);
  std::mt19937_64 eng(2);
  std::normal_distribution<double> nd;
  for (auto& v : x) v = nd(eng);
  for (auto& v : dout) v = nd(eng);
  auto loss = [&] {
    std::vector<double> t2(ev.tape_size()), o2(kLanes);
    ev.forward(x.data(), n, t2.data(), o2.data());
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p) s += dout[p] * o2[p];
    return s;
  };
  ev.forward(x.data(), n, tape.data(), out.data());
  ev.backward(tape.data(), n, dout.data(), dx.data(), grad.data());
  auto params = net.parameters();
  const double h = 1e-5;
  for (std::size_t k = 0; k < params.size(); k += 7) {
    const double keep = params[k];
    params[k] = keep + h;
    const double up = loss();
    params[k] = keep - h;
    const double dn = loss();
    params[k] = keep;
    const double fd = (up - dn) / (2 * h);
    CHECK(std::abs(fd - grad[k]) <= 1e-6 * std::max({std::abs(fd), std::abs(grad[k]), 1e-3}));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    double* xi = x.data() + i * kLanes;
    const double keep = xi[4];
    xi[4] = keep + h;
    const double up = loss();
    xi[4] = keep - h;
    const double dn = loss();
    xi[4] = keep;
    CHECK(dx[i * kLanes + 4] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("adam with zero gradient leaves parameters and advances t") {
  std::vector<double> p{1.0, -2.0, 3.0}, g(3, 0.0);
  nn::AdamState st(3, {});
  nn::adam_step(p, g, st);
  nn::adam_step(p, g, st);
  CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
  CHECK(st.t == 2);
}

TEST_CASE("adam matches a scalar hand trace for two steps") {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.5;
  // hand trace
  double th = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double lr_t = lr * std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
    th -= lr_t * m / (std::sqrt(v) + eps);
  }
  std::vector<double> p{1.0}, gr{g};
  nn::AdamState st(1, {lr, b1, b2, eps});
  nn::adam_step(p, gr, st);
  nn::adam_step(p, gr, st);
  CHECK(p[0] == th);
  CHECK(st.m[0] == m);
  CHECK(st.v[0] == v);
  // First step moves by lr (up to epsilon), second by slightly less than lr.
  CHECK(p[0] == doctest::Approx(1.0 - 0.2).epsilon(1e-6));
}

TEST_CASE("adam rejects mismatched sizes") {
  std::vector<double> p(2), g(3);
  nn::AdamState st(2, {});
  CHECK_THROWS_AS(nn::adam_step(p, g, st), DimensionError);
}
