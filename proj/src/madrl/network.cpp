#include "pseudochain/madrl/network.hpp"

#include <algorithm>
#include <cmath>

#include "pseudochain/common/error.hpp"

namespace pseudochain {

Mlp::Mlp(std::size_t in, std::size_t hidden, std::size_t out)
    : in_(in), hidden_(hidden), out_(out),
      params_(hidden * in + hidden + out * hidden + out, 0.0) {
  if (in == 0 || hidden == 0 || out == 0) {
    throw Error(ErrorCode::kConfigError, "network widths must be positive");
  }
}

void Mlp::init(Rng& rng, double output_scale) {
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in_));
  const double s2 = output_scale / std::sqrt(static_cast<double>(hidden_));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < hidden_ * in_ + hidden_; ++i) params_[k++] = s1 * u(rng);
  for (std::size_t i = 0; i < out_ * hidden_ + out_; ++i) params_[k++] = s2 * u(rng);
}

void Mlp::forward(std::span<const double> x, Cache& cache) const {
  hidden_layer(x, cache);
  cache.output.resize(out_);
  for (std::size_t o = 0; o < out_; ++o) cache.output[o] = output_unit(cache, o);
}

double Mlp::forward_one(std::span<const double> x, std::size_t index, Cache& cache) const {
  if (index >= out_) throw Error(ErrorCode::kInvalidArgument, "output index out of range");
  hidden_layer(x, cache);
  cache.output.clear();
  return output_unit(cache, index);
}

void Mlp::hidden_layer(std::span<const double> x, Cache& cache) const {
  if (x.size() != in_) {
    throw Error(ErrorCode::kInvalidArgument, "input width mismatch");
  }
  cache.input.assign(x.begin(), x.end());
  cache.hidden.resize(hidden_);
  const double* w1 = params_.data();
  const double* b1 = w1 + hidden_ * in_;
  for (std::size_t h = 0; h < hidden_; ++h) {
    double z = b1[h];
    const double* row = w1 + h * in_;
    for (std::size_t i = 0; i < in_; ++i) z += row[i] * x[i];
    cache.hidden[h] = std::tanh(z);
  }
}

double Mlp::output_unit(const Cache& cache, std::size_t o) const {
  const double* w2 = params_.data() + hidden_ * in_ + hidden_;
  const double* b2 = w2 + out_ * hidden_;
  const double* row = w2 + o * hidden_;
  double z = b2[o];
  for (std::size_t h = 0; h < hidden_; ++h) z += row[h] * cache.hidden[h];
  return z;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Cache c;
  forward(x, c);
  return std::move(c.output);
}

void Mlp::backward(const Cache& cache, std::span<const double> d_output,
                   std::span<double> grad) const {
  if (d_output.size() != out_ || grad.size() != params_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "gradient width mismatch");
  }
  const double* w2 = params_.data() + hidden_ * in_ + hidden_;
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + hidden_ * in_;
  double* g_w2 = g_b1 + hidden_;
  double* g_b2 = g_w2 + out_ * hidden_;

  std::vector<double> d_hidden(hidden_, 0.0);
  for (std::size_t o = 0; o < out_; ++o) {
    const double d = d_output[o];
    if (d == 0.0) continue;
    g_b2[o] += d;
    double* grow = g_w2 + o * hidden_;
    const double* wrow = w2 + o * hidden_;
    for (std::size_t h = 0; h < hidden_; ++h) {
      grow[h] += d * cache.hidden[h];
      d_hidden[h] += d * wrow[h];
    }
  }
  for (std::size_t h = 0; h < hidden_; ++h) {
    const double a = cache.hidden[h];
    const double dz = d_hidden[h] * (1.0 - a * a);
    g_b1[h] += dz;
    double* grow = g_w1 + h * in_;
    for (std::size_t i = 0; i < in_; ++i) grow[i] += dz * cache.input[i];
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& x : p) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : p) x /= sum;
  return p;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

// Moments of parameters that stop receiving gradient (critic rows of
// untaken actions) decay geometrically into subnormals, which are very slow
// to compute with. Below these magnitudes the step is far under one ulp of
// any parameter, so the moment is zeroed instead.
constexpr double kTinyMoment = 1e-100;
constexpr double kTinySquare = 1e-200;

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "optimizer size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    if (std::abs(m_[i]) < kTinyMoment) m_[i] = 0.0;
    if (v_[i] < kTinySquare) v_[i] = 0.0;
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace pseudochain
