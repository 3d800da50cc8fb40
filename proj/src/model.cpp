#include "scriptor/model.hpp"

#include <algorithm>
#include <string>

#include "scriptor/errors.hpp"
#include "scriptor/rng.hpp"

namespace scriptor {

std::string variant_name(Variant v) {
  return v == Variant::SubRegion ? "sub_region" : "char_level";
}

Variant variant_from_name(const std::string& name) {
  if (name == "sub_region") return Variant::SubRegion;
  if (name == "char_level") return Variant::CharLevel;
  throw spec_error("unknown network variant: " + name);
}

NetworkSpec NetworkSpec::sub_region(std::vector<int> filters) {
  NetworkSpec s;
  s.variant = Variant::SubRegion;
  s.block_filters = std::move(filters);
  s.fc_width = 0;
  s.validate();
  return s;
}

NetworkSpec NetworkSpec::char_level(std::vector<int> filters, int fc_width) {
  NetworkSpec s;
  s.variant = Variant::CharLevel;
  s.block_filters = std::move(filters);
  s.fc_width = fc_width;
  s.validate();
  return s;
}

int NetworkSpec::feature_side() const {
  if (variant == Variant::CharLevel) return 1;
  int side = 64;
  for (std::size_t b = 0; b < block_filters.size(); ++b) side /= pool;
  return side;
}

void NetworkSpec::validate() const {
  if (block_filters.empty()) throw spec_error("network spec: at least one block required");
  for (int f : block_filters)
    if (f <= 0) throw spec_error("network spec: filter counts must be positive");
  if (kernel <= 0 || pool <= 0 || conv_stride <= 0 || pad < 0)
    throw spec_error("network spec: kernel/pool/stride must be positive, pad non-negative");
  if (variant == Variant::CharLevel) {
    if (fc_width <= 0) throw spec_error("network spec: char_level requires fc_width > 0");
  } else if (fc_width != 0) {
    throw spec_error("network spec: sub_region takes no FC layer");
  }
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> ps;
  for (std::size_t b = 0; b < conv_weights.size(); ++b) {
    ps.push_back(&conv_weights[b]);
    ps.push_back(&conv_biases[b]);
  }
  if (spec.fc_width > 0) {
    ps.push_back(&fc_weight);
    ps.push_back(&fc_bias);
  }
  return ps;
}

std::vector<const Tensor*> Network::parameters() const {
  std::vector<const Tensor*> ps;
  for (std::size_t b = 0; b < conv_weights.size(); ++b) {
    ps.push_back(&conv_weights[b]);
    ps.push_back(&conv_biases[b]);
  }
  if (spec.fc_width > 0) {
    ps.push_back(&fc_weight);
    ps.push_back(&fc_bias);
  }
  return ps;
}

Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Network net;
  net.spec = spec;
  const std::size_t k = static_cast<std::size_t>(spec.kernel);
  std::size_t c_in = 1;
  std::size_t side = 64;
  for (std::size_t b = 0; b < spec.block_filters.size(); ++b) {
    const std::size_t c_out = static_cast<std::size_t>(spec.block_filters[b]);
    Tensor w({c_out, c_in, k, k});
    init_kaiming_normal(w, c_in * k * k, mix_seed(seed, 0x636f6e76ULL, b));
    net.conv_weights.push_back(std::move(w));
    net.conv_biases.emplace_back(std::vector<std::size_t>{c_out});
    c_in = c_out;
    side = (side + spec.pool - 1) / spec.pool;
  }
  if (spec.fc_width > 0) {
    const std::size_t d_in = c_in * side * side;
    net.fc_weight = Tensor({static_cast<std::size_t>(spec.fc_width), d_in});
    init_kaiming_normal(net.fc_weight, d_in, mix_seed(seed, 0x6663ULL));
    net.fc_bias = Tensor({static_cast<std::size_t>(spec.fc_width)});
  }
  return net;
}

LocalFeatureMap forward_local(const Network& net, const Tensor& patch, ForwardContext* ctx) {
  if (patch.rank() != 3 || patch.shape[0] != 1 || patch.shape[1] != 64 || patch.shape[2] != 64)
    throw shape_error("forward_local: patch must be [1,64,64], got " + shape_string(patch.shape));
  const NetworkSpec& spec = net.spec;
  ForwardContext local_ctx;
  ForwardContext& fc = ctx ? *ctx : local_ctx;
  fc.conv.resize(net.conv_weights.size());
  fc.conv_out.resize(net.conv_weights.size());
  fc.pool.resize(net.conv_weights.size());

  Tensor x = patch;
  for (std::size_t b = 0; b < net.conv_weights.size(); ++b) {
    fc.conv_out[b] = conv2d(x, net.conv_weights[b], net.conv_biases[b], spec.conv_stride, spec.pad,
                            &fc.conv[b]);
    x = relu(fc.conv_out[b]);
    x = maxpool2d(x, spec.pool, spec.pool, &fc.pool[b]);
  }

  LocalFeatureMap map;
  map.depth = spec.depth();
  if (spec.variant == Variant::CharLevel) {
    fc.pooled_last = std::move(x);
    Tensor flat({fc.pooled_last.size()}, fc.pooled_last.data);
    fc.fc_out = linear(flat, net.fc_weight, net.fc_bias);
    Tensor activated = relu(fc.fc_out);
    map.side = 1;
    map.values = Tensor({static_cast<std::size_t>(map.depth), 1, 1}, std::move(activated.data));
  } else {
    map.side = static_cast<int>(x.shape[1]);
    map.values = std::move(x);
  }
  return map;
}

std::vector<Tensor> backward_local(const Network& net, const ForwardContext& ctx,
                                   const Tensor& d_values) {
  const NetworkSpec& spec = net.spec;
  std::vector<Tensor> conv_dw(net.conv_weights.size());
  std::vector<Tensor> conv_db(net.conv_weights.size());
  Tensor fc_dw, fc_db;

  Tensor d = d_values;
  if (spec.variant == Variant::CharLevel) {
    Tensor d_fc_out = relu_backward(ctx.fc_out, Tensor({d.size()}, d.data));
    Tensor flat_in({ctx.pooled_last.size()}, ctx.pooled_last.data);
    LayerGradients g = linear_backward(flat_in, net.fc_weight, d_fc_out);
    fc_dw = std::move(g.d_params[0]);
    fc_db = std::move(g.d_params[1]);
    d = Tensor(ctx.pooled_last.shape, std::move(g.d_input.data));
  }

  for (std::size_t bi = net.conv_weights.size(); bi-- > 0;) {
    Tensor d_pool_in = maxpool2d_backward(ctx.pool[bi], d);
    Tensor d_conv_out = relu_backward(ctx.conv_out[bi], d_pool_in);
    LayerGradients g = conv2d_backward(ctx.conv[bi], d_conv_out);
    conv_dw[bi] = std::move(g.d_params[0]);
    conv_db[bi] = std::move(g.d_params[1]);
    d = std::move(g.d_input);
  }

  std::vector<Tensor> grads;
  for (std::size_t b = 0; b < conv_dw.size(); ++b) {
    grads.push_back(std::move(conv_dw[b]));
    grads.push_back(std::move(conv_db[b]));
  }
  if (spec.fc_width > 0) {
    grads.push_back(std::move(fc_dw));
    grads.push_back(std::move(fc_db));
  }
  return grads;
}

ClassifierHead build_head(int num_writers, int depth, std::uint64_t seed) {
  if (num_writers <= 0 || depth <= 0)
    throw spec_error("classifier head: writers and depth must be positive");
  ClassifierHead head;
  head.weight = Tensor({static_cast<std::size_t>(num_writers), static_cast<std::size_t>(depth)});
  // the head starts at zero so initial logits are uniform; a large random head
  // on top of random features produces confident wrong predictions whose
  // gradients shrink the features toward zero and kill the ReLU stack
  (void)seed;
  head.bias = Tensor({static_cast<std::size_t>(num_writers)});
  return head;
}

Tensor classify(const Tensor& global, const ClassifierHead& head) {
  if (global.rank() != 1 || global.shape[0] != head.depth())
    throw shape_error("classify: global feature depth " + shape_string(global.shape) +
                      " does not match head depth " + std::to_string(head.depth()));
  return linear(global, head.weight, head.bias);
}

std::size_t predict(const Tensor& logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

}  // namespace scriptor
