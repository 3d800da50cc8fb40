#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "scriptor/tensor.hpp"

namespace scriptor {

// Gradients of one layer: d_input mirrors the forward input shape,
// d_params mirror the parameter shapes in declaration order.
struct LayerGradients {
  Tensor d_input;
  std::vector<Tensor> d_params;
};

// ---- convolution (cross-correlation, zero padding) ----

struct Conv2dContext {
  std::vector<std::size_t> in_shape;
  Tensor weight;
  int stride = 1;
  int pad = 0;
  std::size_t out_h = 0, out_w = 0;
  Tensor cols;  // im2col matrix [C_in*k*k, out_h*out_w], reused by backward
};

// input [C_in,H,W], weight [C_out,C_in,k,k], bias [C_out].
// Output extent: floor((H + 2*pad - k)/stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad,
              Conv2dContext* ctx = nullptr);
LayerGradients conv2d_backward(const Conv2dContext& ctx, const Tensor& d_output);

// ---- max pooling ----

struct MaxPoolContext {
  std::vector<std::size_t> in_shape;
  int k = 2;
  int stride = 2;
  std::size_t out_h = 0, out_w = 0;
  // Flat input index of each window winner, -1 when the whole window was
  // padding (gradient is dropped there).
  std::vector<std::ptrdiff_t> argmax;
};

// Extents not divisible by the stride are zero-padded on the bottom/right.
Tensor maxpool2d(const Tensor& input, int k = 2, int stride = 2, MaxPoolContext* ctx = nullptr);
Tensor maxpool2d_backward(const MaxPoolContext& ctx, const Tensor& d_output);

// ---- activation ----

Tensor relu(const Tensor& input);
// Subgradient 0 at the kink: passes d_output only where input > 0.
Tensor relu_backward(const Tensor& input, const Tensor& d_output);

// ---- fully connected ----

// input [D_in], weight [D_out,D_in], bias [D_out].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);
LayerGradients linear_backward(const Tensor& input, const Tensor& weight, const Tensor& d_output);

// ---- loss ----

struct SoftmaxXentResult {
  double loss = 0.0;
  Tensor probs;
  Tensor d_logits;  // softmax(logits) - one_hot(label)
};

Tensor softmax(const Tensor& logits);
SoftmaxXentResult softmax_cross_entropy(const Tensor& logits, std::size_t label);

// ---- optimizer ----

struct OptimizerState {
  std::vector<Tensor> velocity;
  double learning_rate = 0.01;
  double momentum = 0.9;
};

OptimizerState make_optimizer_state(const std::vector<Tensor*>& params, double learning_rate,
                                    double momentum);
// v <- momentum*v - lr*g; w <- w + v
void sgd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              OptimizerState& state);

// ---- finite-difference oracle ----

// Central differences (f(x+h*e_i) - f(x-h*e_i)) / (2h) per coordinate.
Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& point,
                        double h);

// ---- initialization ----

// Zero-mean normal with stddev sqrt(2/fan_in); deterministic per seed.
void init_kaiming_normal(Tensor& w, std::size_t fan_in, std::uint64_t seed);

}  // namespace scriptor
