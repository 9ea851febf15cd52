#include "mfls/nn/batch.hpp"

#include <algorithm>
#include <vector>

#include "mfls/nn/activation.hpp"

namespace mfls::nn {

namespace {

// out[o][:] = b[o] + sum_i w[o][i] * in[i][:]
void affine(const double* __restrict w, const double* __restrict b, const double* __restrict in,
            std::size_t n_in, std::size_t n_out, std::size_t n, double* __restrict out) {
  for (std::size_t o = 0; o < n_out; ++o) {
    double* __restrict row = out + o * kLanes;
    const double bo = b[o];
#pragma omp simd
    for (std::size_t p = 0; p < n; ++p) row[p] = bo;
    for (std::size_t i = 0; i < n_in; ++i) {
      const double wi = w[o * n_in + i];
      const double* __restrict src = in + i * kLanes;
#pragma omp simd
      for (std::size_t p = 0; p < n; ++p) row[p] += wi * src[p];
    }
  }
}

// Reductions use the vector partial-sum order; it is fixed for a given build.
double lane_sum(const double* __restrict v, std::size_t n) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (std::size_t p = 0; p < n; ++p) s += v[p];
  return s;
}

double lane_dot(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (std::size_t p = 0; p < n; ++p) s += a[p] * b[p];
  return s;
}

}  // namespace

BatchEvaluator::BatchEvaluator(const PolicyNetwork& net) : net_(&net) {
  std::size_t rows = net.input_dim() + net.output_dim();
  max_width_ = std::max(net.input_dim(), net.output_dim());
  for (auto w : net.hidden()) {
    rows += w;
    max_width_ = std::max(max_width_, w);
  }
  tape_size_ = rows * kLanes;
}

void BatchEvaluator::forward(const double* x, std::size_t n, double* tape, double* out) const {
  const auto& net = *net_;
  const std::size_t d = net.input_dim();
  const auto& off = net.input_offset();
  const auto& scl = net.input_scale();
  double* u = tape;
  for (std::size_t i = 0; i < d; ++i) {
    const double o = off[i], inv = 1.0 / scl[i];
    const double* __restrict src = x + i * kLanes;
    double* __restrict dst = u + i * kLanes;
#pragma omp simd
    for (std::size_t p = 0; p < n; ++p) dst[p] = (src[p] - o) * inv;
  }
  const auto params = net.parameters();
  const double* in = u;
  double* cur = u + d * kLanes;
  const std::size_t layers = net.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n_in = net.layer_in(l), n_out = net.layer_out(l);
    affine(params.data() + net.weight_offset(l), params.data() + net.bias_offset(l), in, n_in,
           n_out, n, cur);
    if (l + 1 < layers && net.activation() == Activation::tanh)
      for (std::size_t o = 0; o < n_out; ++o) tanh_inplace(cur + o * kLanes, n);
    in = cur;
    cur += n_out * kLanes;
  }
  double* y = cur - net.output_dim() * kLanes;
  const auto& tr = net.output_transform();
  if (tr.is_box()) {
    for (std::size_t k = 0; k < net.output_dim(); ++k) {
      const double lo = tr.lo()[k], width = tr.hi()[k] - tr.lo()[k];
      double* __restrict row = y + k * kLanes;
#pragma omp simd
      for (std::size_t p = 0; p < n; ++p) row[p] = lo + width * fast_logistic(row[p]);
    }
  }
  for (std::size_t k = 0; k < net.output_dim(); ++k)
    std::copy(y + k * kLanes, y + k * kLanes + n, out + k * kLanes);
}

void BatchEvaluator::backward(const double* tape, std::size_t n, const double* dout, double* dx,
                              double* grad) const {
  const auto& net = *net_;
  const std::size_t layers = net.num_layers();
  const auto params = net.parameters();
  thread_local std::vector<double> scratch;
  scratch.resize(2 * max_width_ * kLanes);
  double* delta = scratch.data();
  double* delta_in = scratch.data() + max_width_ * kLanes;

  // Offsets of each layer's input block inside the tape.
  std::vector<std::size_t> in_at(layers + 1);
  in_at[0] = 0;
  for (std::size_t l = 0; l < layers; ++l) in_at[l + 1] = in_at[l] + net.layer_in(l) * kLanes;
  const double* a = tape + in_at[layers];

  const auto& tr = net.output_transform();
  for (std::size_t k = 0; k < net.output_dim(); ++k) {
    const double* __restrict g = dout + k * kLanes;
    double* __restrict dk = delta + k * kLanes;
    if (tr.is_box()) {
      const double lo = tr.lo()[k], width = tr.hi()[k] - tr.lo()[k];
      const double inv = width > 0.0 ? 1.0 / width : 0.0;
      const double* __restrict ak = a + k * kLanes;
#pragma omp simd
      for (std::size_t p = 0; p < n; ++p) {
        const double s = (ak[p] - lo) * inv;
        dk[p] = g[p] * width * s * (1.0 - s);
      }
    } else {
      std::copy(g, g + n, dk);
    }
  }

  for (std::size_t li = layers; li-- > 0;) {
    const std::size_t n_in = net.layer_in(li), n_out = net.layer_out(li);
    const double* h_in = tape + in_at[li];
    const double* w = params.data() + net.weight_offset(li);
    double* gw = grad + net.weight_offset(li);
    double* gb = grad + net.bias_offset(li);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* dlt = delta + o * kLanes;
      gb[o] += lane_sum(dlt, n);
      for (std::size_t i = 0; i < n_in; ++i) gw[o * n_in + i] += lane_dot(dlt, h_in + i * kLanes, n);
    }
    if (li == 0 && dx == nullptr) break;
    for (std::size_t i = 0; i < n_in; ++i) {
      double* __restrict row = delta_in + i * kLanes;
#pragma omp simd
      for (std::size_t p = 0; p < n; ++p) row[p] = 0.0;
      for (std::size_t o = 0; o < n_out; ++o) {
        const double wi = w[o * n_in + i];
        const double* __restrict dlt = delta + o * kLanes;
#pragma omp simd
        for (std::size_t p = 0; p < n; ++p) row[p] += wi * dlt[p];
      }
      if (li > 0 && net.activation() == Activation::tanh) {
        const double* __restrict h = h_in + i * kLanes;
#pragma omp simd
        for (std::size_t p = 0; p < n; ++p) row[p] *= 1.0 - h[p] * h[p];
      }
    }
    std::swap(delta, delta_in);
  }
  if (dx != nullptr) {
    const auto& scl = net.input_scale();
    for (std::size_t i = 0; i < net.input_dim(); ++i) {
      const double inv = 1.0 / scl[i];
      const double* __restrict src = delta + i * kLanes;
      double* __restrict dst = dx + i * kLanes;
#pragma omp simd
      for (std::size_t p = 0; p < n; ++p) dst[p] = src[p] * inv;
    }
  }
}

}  // namespace mfls::nn
