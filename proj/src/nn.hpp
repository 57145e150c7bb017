#pragma once
#include <cstdint>
#include <vector>

#include "mat.hpp"
#include "rng.hpp"

namespace altlab::nn {

// Fully-connected ReLU network. Hidden layers apply ReLU; the output layer is
// affine (squashing/exp heads live with the algorithms that need them).
// Weights are stored (fan_in x fan_out) per layer so the batched forward pass
// runs on the fast matmul kernel; biases start at zero.
struct DenseNetwork {
  std::vector<int> layer_sizes;             // [input, hidden..., output]
  std::vector<Matrix> weights;              // layer l: (layer_sizes[l] x layer_sizes[l+1])
  std::vector<std::vector<double>> biases;  // layer l: layer_sizes[l+1]

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  std::size_t param_count() const;
  bool same_architecture(const DenseNetwork& o) const { return layer_sizes == o.layer_sizes; }
};

// Fan-in scaled uniform init: w ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), drawn
// in storage order (layer by layer, fan_in-major); biases zero.
DenseNetwork init_network(const std::vector<int>& layer_sizes, std::uint64_t seed);

// Everything backward() needs from the corresponding forward() call.
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre;   // affine outputs per layer
  std::vector<Matrix> post;  // activations per layer; post.back() == output
  const Matrix& output() const { return post.back(); }
};

// Batched forward; input is (batch x input_dim).
ForwardTrace forward(const DenseNetwork& net, const Matrix& input);

struct ParamGrads {
  std::vector<Matrix> weight_grads;
  std::vector<std::vector<double>> bias_grads;
  void scale(double f);
  double squared_norm() const;
  void add(const ParamGrads& o);
};

ParamGrads zeros_like(const DenseNetwork& net);

// Reverse mode for a scalar loss L given dL/d(output). The trace must come
// from forward() on this same network (shapes are checked). If input_grad is
// non-null it receives dL/d(input).
ParamGrads backward(const DenseNetwork& net, const ForwardTrace& trace, const Matrix& output_grad,
                    Matrix* input_grad = nullptr);
// dL/d(input) only; skips parameter gradients.
Matrix backward_input(const DenseNetwork& net, const ForwardTrace& trace, const Matrix& output_grad);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter first/second moments, zero until the first step.
struct AdamState {
  AdamConfig cfg;
  std::vector<Matrix> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;
  std::uint64_t step_count = 0;
};

AdamState make_adam_state(const DenseNetwork& net, const AdamConfig& cfg);

// One bias-corrected Adam step; increments step_count exactly once. Throws
// NumericError on non-finite gradients.
void adam_step(DenseNetwork& net, const ParamGrads& grads, AdamState& state);

// Adam over a flat parameter vector (temperature, PPO log-std).
struct AdamVec {
  AdamConfig cfg;
  std::vector<double> m, v;
  std::uint64_t step_count = 0;
};

AdamVec make_adam_vec(std::size_t dim, const AdamConfig& cfg);
void adam_step_vec(std::vector<double>& params, const std::vector<double>& grads, AdamVec& state);

// target <- (1 - tau) * target + tau * online, elementwise.
void polyak_update(DenseNetwork& target, const DenseNetwork& online, double tau);

// Redraw parameters as a fresh init with `seed`; zero the optimizer moments
// and its step count. Architecture and Adam hyperparameters are preserved.
void reset_parameters(DenseNetwork& net, AdamState& state, std::uint64_t seed);

// Flat parameter serialization (weights then biases, layer by layer, storage
// order). Used by checkpointing.
std::vector<double> flatten_params(const DenseNetwork& net);
void unflatten_params(DenseNetwork& net, const std::vector<double>& flat);

}  // namespace altlab::nn
