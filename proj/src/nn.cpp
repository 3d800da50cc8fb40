#include "scriptor/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <string>

#include "scriptor/errors.hpp"
#include "scriptor/rng.hpp"

namespace scriptor {

namespace {

// C[M,N] += A[M,K] * B[K,N]
void matmul_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void matmul_acc_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
void matmul_acc_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// input [C,H,W] -> cols [C*k*k, out_h*out_w], zero padded
Tensor im2col(const Tensor& input, int k, int stride, int pad, std::size_t out_h,
              std::size_t out_w) {
  const std::size_t c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
  Tensor cols({c_in * static_cast<std::size_t>(k) * k, out_h * out_w});
  double* col = cols.data.data();
  const double* src = input.data.data();
  for (std::size_t c = 0; c < c_in; ++c) {
    const double* plane = src + c * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = col + ((c * k + ky) * k + kx) * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad + ky;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          const double* line = plane + iy * w;
          double* out = row + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad + kx;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) out[ox] = line[ix];
          }
        }
      }
    }
  }
  return cols;
}

// scatter-add of d_cols back to the input layout
Tensor col2im(const Tensor& d_cols, const std::vector<std::size_t>& in_shape, int k, int stride,
              int pad, std::size_t out_h, std::size_t out_w) {
  const std::size_t c_in = in_shape[0], h = in_shape[1], w = in_shape[2];
  Tensor d_input(in_shape);
  double* dst = d_input.data.data();
  const double* col = d_cols.data.data();
  for (std::size_t c = 0; c < c_in; ++c) {
    double* plane = dst + c * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col + ((c * k + ky) * k + kx) * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad + ky;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* line = plane + iy * w;
          const double* in = row + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad + kx;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) line[ix] += in[ox];
          }
        }
      }
    }
  }
  return d_input;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad,
              Conv2dContext* ctx) {
  if (input.rank() != 3) throw shape_error("conv2d: input must be [C,H,W], got " + shape_string(input.shape));
  if (weight.rank() != 4)
    throw shape_error("conv2d: weight must be [C_out,C_in,k,k], got " + shape_string(weight.shape));
  if (weight.shape[2] != weight.shape[3]) throw shape_error("conv2d: kernel must be square");
  if (input.shape[0] != weight.shape[1])
    throw shape_error("conv2d: input channels " + std::to_string(input.shape[0]) +
                      " != weight C_in " + std::to_string(weight.shape[1]));
  if (bias.rank() != 1 || bias.shape[0] != weight.shape[0])
    throw shape_error("conv2d: bias must be [C_out]");
  if (stride < 1) throw parameter_error("conv2d: stride must be positive");
  if (pad < 0) throw parameter_error("conv2d: pad must be non-negative");

  const std::size_t c_out = weight.shape[0];
  const int k = static_cast<int>(weight.shape[2]);
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(input.shape[1]);
  const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(input.shape[2]);
  if (k > h + 2 * pad || k > w + 2 * pad)
    throw shape_error("conv2d: kernel larger than padded input");
  const std::size_t out_h = static_cast<std::size_t>((h + 2 * pad - k) / stride) + 1;
  const std::size_t out_w = static_cast<std::size_t>((w + 2 * pad - k) / stride) + 1;

  Tensor cols = im2col(input, k, stride, pad, out_h, out_w);
  Tensor output({c_out, out_h, out_w});
  const std::size_t spatial = out_h * out_w;
  for (std::size_t c = 0; c < c_out; ++c)
    std::fill_n(output.data.data() + c * spatial, spatial, bias[c]);
  matmul_acc(weight.data.data(), cols.data.data(), output.data.data(), c_out,
             input.shape[0] * k * k, spatial);

  if (ctx) {
    ctx->in_shape = input.shape;
    ctx->weight = weight;
    ctx->stride = stride;
    ctx->pad = pad;
    ctx->out_h = out_h;
    ctx->out_w = out_w;
    ctx->cols = std::move(cols);
  }
  return output;
}

LayerGradients conv2d_backward(const Conv2dContext& ctx, const Tensor& d_output) {
  const std::size_t c_out = ctx.weight.shape[0];
  if (d_output.rank() != 3 || d_output.shape[0] != c_out || d_output.shape[1] != ctx.out_h ||
      d_output.shape[2] != ctx.out_w)
    throw shape_error("conv2d_backward: d_output shape " + shape_string(d_output.shape) +
                      " does not match forward output");
  const int k = static_cast<int>(ctx.weight.shape[2]);
  const std::size_t kk = ctx.in_shape[0] * k * k;
  const std::size_t spatial = ctx.out_h * ctx.out_w;

  Tensor d_weight(ctx.weight.shape);
  matmul_acc_nt(d_output.data.data(), ctx.cols.data.data(), d_weight.data.data(), c_out, spatial,
                kk);

  Tensor d_bias({c_out});
  for (std::size_t c = 0; c < c_out; ++c) {
    const double* row = d_output.data.data() + c * spatial;
    double acc = 0.0;
    for (std::size_t i = 0; i < spatial; ++i) acc += row[i];
    d_bias[c] = acc;
  }

  Tensor d_cols({kk, spatial});
  matmul_acc_tn(ctx.weight.data.data(), d_output.data.data(), d_cols.data.data(), kk, c_out,
                spatial);
  Tensor d_input = col2im(d_cols, ctx.in_shape, k, ctx.stride, ctx.pad, ctx.out_h, ctx.out_w);

  LayerGradients g;
  g.d_input = std::move(d_input);
  g.d_params.push_back(std::move(d_weight));
  g.d_params.push_back(std::move(d_bias));
  return g;
}

Tensor maxpool2d(const Tensor& input, int k, int stride, MaxPoolContext* ctx) {
  if (input.rank() != 3) throw shape_error("maxpool2d: input must be [C,H,W]");
  if (k < 1) throw parameter_error("maxpool2d: window must be positive");
  if (stride < 1) throw parameter_error("maxpool2d: stride must be positive");
  const std::size_t c_n = input.shape[0], h = input.shape[1], w = input.shape[2];
  // bottom/right zero padding when an extent is not divisible by the stride
  const std::size_t out_h = (h + stride - 1) / stride;
  const std::size_t out_w = (w + stride - 1) / stride;

  Tensor output({c_n, out_h, out_w});
  std::vector<std::ptrdiff_t> argmax(c_n * out_h * out_w, -1);
  const double* src = input.data.data();
  for (std::size_t c = 0; c < c_n; ++c) {
    const double* plane = src + c * h * w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double best = 0.0;  // padded cells contribute zeros
        std::ptrdiff_t best_idx = -1;
        bool any_real = false;
        for (int ky = 0; ky < k; ++ky) {
          const std::size_t iy = oy * stride + ky;
          if (iy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const std::size_t ix = ox * stride + kx;
            if (ix >= w) continue;
            const double v = plane[iy * w + ix];
            if (!any_real || v > best) {
              best = v;
              best_idx = static_cast<std::ptrdiff_t>(c * h * w + iy * w + ix);
              any_real = true;
            }
          }
        }
        const bool window_padded = oy * stride + k > h || ox * stride + k > w;
        if (window_padded && any_real && best < 0.0) {
          best = 0.0;  // a padding zero wins over all-negative real cells
          best_idx = -1;
        }
        output.at3(c, oy, ox) = any_real ? best : 0.0;
        argmax[(c * out_h + oy) * out_w + ox] = best_idx;
      }
    }
  }
  if (ctx) {
    ctx->in_shape = input.shape;
    ctx->k = k;
    ctx->stride = stride;
    ctx->out_h = out_h;
    ctx->out_w = out_w;
    ctx->argmax = std::move(argmax);
  }
  return output;
}

Tensor maxpool2d_backward(const MaxPoolContext& ctx, const Tensor& d_output) {
  if (d_output.rank() != 3 || d_output.shape[0] != ctx.in_shape[0] ||
      d_output.shape[1] != ctx.out_h || d_output.shape[2] != ctx.out_w)
    throw shape_error("maxpool2d_backward: d_output shape mismatch");
  Tensor d_input(ctx.in_shape);
  for (std::size_t i = 0; i < d_output.size(); ++i) {
    const std::ptrdiff_t idx = ctx.argmax[i];
    if (idx >= 0) d_input[static_cast<std::size_t>(idx)] += d_output[i];
  }
  return d_input;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& d_output) {
  if (!input.same_shape(d_output)) throw shape_error("relu_backward: shape mismatch");
  Tensor d_input(input.shape);
  for (std::size_t i = 0; i < input.size(); ++i)
    d_input[i] = input[i] > 0.0 ? d_output[i] : 0.0;
  return d_input;
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 1) throw shape_error("linear: input must be a vector");
  if (weight.rank() != 2 || weight.shape[1] != input.shape[0])
    throw shape_error("linear: weight " + shape_string(weight.shape) + " incompatible with input " +
                      shape_string(input.shape));
  if (bias.rank() != 1 || bias.shape[0] != weight.shape[0])
    throw shape_error("linear: bias must be [D_out]");
  const std::size_t d_out = weight.shape[0], d_in = weight.shape[1];
  Tensor out({d_out});
  for (std::size_t i = 0; i < d_out; ++i) {
    const double* row = weight.data.data() + i * d_in;
    double acc = bias[i];
    for (std::size_t j = 0; j < d_in; ++j) acc += row[j] * input[j];
    out[i] = acc;
  }
  return out;
}

LayerGradients linear_backward(const Tensor& input, const Tensor& weight, const Tensor& d_output) {
  if (d_output.rank() != 1 || d_output.shape[0] != weight.shape[0])
    throw shape_error("linear_backward: d_output shape mismatch");
  const std::size_t d_out = weight.shape[0], d_in = weight.shape[1];
  LayerGradients g;
  g.d_input = Tensor({d_in});
  Tensor d_weight({d_out, d_in});
  for (std::size_t i = 0; i < d_out; ++i) {
    const double go = d_output[i];
    const double* wrow = weight.data.data() + i * d_in;
    double* dwrow = d_weight.data.data() + i * d_in;
    for (std::size_t j = 0; j < d_in; ++j) {
      g.d_input[j] += wrow[j] * go;
      dwrow[j] = input[j] * go;
    }
  }
  g.d_params.push_back(std::move(d_weight));
  g.d_params.push_back(d_output);  // d_bias
  return g;
}

Tensor softmax(const Tensor& logits) {
  Tensor p(logits.shape);
  const double mx = *std::max_element(logits.data.begin(), logits.data.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p.data) v /= sum;
  return p;
}

SoftmaxXentResult softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (logits.rank() != 1) throw shape_error("softmax_cross_entropy: logits must be a vector");
  if (label >= logits.shape[0])
    throw parameter_error("softmax_cross_entropy: label " + std::to_string(label) +
                          " out of range for " + std::to_string(logits.shape[0]) + " classes");
  SoftmaxXentResult r;
  r.probs = softmax(logits);
  r.loss = -std::log(r.probs[label]);
  r.d_logits = r.probs;
  r.d_logits[label] -= 1.0;
  return r;
}

OptimizerState make_optimizer_state(const std::vector<Tensor*>& params, double learning_rate,
                                    double momentum) {
  if (learning_rate <= 0.0) throw parameter_error("learning_rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw parameter_error("momentum must be in [0,1)");
  OptimizerState st;
  st.learning_rate = learning_rate;
  st.momentum = momentum;
  st.velocity.reserve(params.size());
  for (const Tensor* p : params) st.velocity.emplace_back(p->shape);
  return st;
}

void sgd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.velocity.size())
    throw shape_error("sgd_step: parameter/gradient/velocity count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& w = *params[t];
    const Tensor& g = *grads[t];
    Tensor& v = state.velocity[t];
    if (!w.same_shape(g) || !w.same_shape(v)) throw shape_error("sgd_step: shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = state.momentum * v[i] - state.learning_rate * g[i];
      w[i] += v[i];
    }
  }
}

Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& point,
                        double h) {
  if (h <= 0.0) throw parameter_error("numeric_gradient: h must be positive");
  Tensor grad(point.shape);
  Tensor x = point;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

void init_kaiming_normal(Tensor& w, std::size_t fan_in, std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : w.data) v = dist(rng);
}

}  // namespace scriptor
