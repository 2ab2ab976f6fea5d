#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pseudochain/common/rng.hpp"

namespace pseudochain {

// Fully connected in -> hidden (tanh) -> out (linear). Parameters are one
// flat vector laid out as W1[hidden][in], b1[hidden], W2[out][hidden], b2[out].
class Mlp {
 public:
  struct Cache {
    std::vector<double> input;
    std::vector<double> hidden;  // post-activation
    std::vector<double> output;  // pre-softmax logits or Q-values
  };

  Mlp() = default;
  Mlp(std::size_t in, std::size_t hidden, std::size_t out);

  // Uniform(-s, s) with s = 1/sqrt(fan_in); the output layer is scaled by
  // output_scale.
  void init(Rng& rng, double output_scale = 1.0);

  std::size_t in() const { return in_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t out() const { return out_; }
  std::size_t size() const { return params_.size(); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  void forward(std::span<const double> x, Cache& cache) const;
  std::vector<double> forward(std::span<const double> x) const;
  // Only output `index`; cache.output is left empty.
  double forward_one(std::span<const double> x, std::size_t index, Cache& cache) const;
  // Accumulates dL/dparams into grad given dL/doutput.
  void backward(const Cache& cache, std::span<const double> d_output,
                std::span<double> grad) const;

 private:
  void hidden_layer(std::span<const double> x, Cache& cache) const;
  double output_unit(const Cache& cache, std::size_t o) const;

  std::size_t in_ = 0, hidden_ = 0, out_ = 0;
  std::vector<double> params_;
};

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  // Descends along grad.
  void step(std::span<double> params, std::span<const double> grad);

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace pseudochain
