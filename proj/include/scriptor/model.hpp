#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scriptor/nn.hpp"
#include "scriptor/tensor.hpp"

namespace scriptor {

enum class Variant { SubRegion, CharLevel };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Topology of one local-feature extractor: conv(k=5, stride 1, pad 2) +
// 2x2 max-pool blocks, optionally followed by a fully connected layer
// (character-level variant only).
struct NetworkSpec {
  Variant variant = Variant::SubRegion;
  std::vector<int> block_filters;
  int kernel = 5;
  int pad = 2;
  int conv_stride = 1;
  int pool = 2;
  int fc_width = 0;  // 0 = no FC (sub-region variant)

  // Full-size extractors: 4 blocks of 32/64/256/1024 filters, or 3 blocks
  // of 32/64/256 plus an FC of width 1024.
  static NetworkSpec sub_region(std::vector<int> filters = {32, 64, 256, 1024});
  static NetworkSpec char_level(std::vector<int> filters = {32, 64, 256}, int fc_width = 1024);

  // Depth D of the local feature this spec produces.
  int depth() const { return fc_width > 0 ? fc_width : block_filters.back(); }
  // Spatial side L of the local feature map for a 64x64 input.
  int feature_side() const;
  void validate() const;
  bool operator==(const NetworkSpec&) const = default;
};

// L x L x D local feature of one patch; values stored channels-first [D,L,L].
struct LocalFeatureMap {
  int side = 0;
  int depth = 0;
  Tensor values;

  double value(int i, int j, int d) const {
    return values.at3(static_cast<std::size_t>(d), static_cast<std::size_t>(i),
                      static_cast<std::size_t>(j));
  }
};

struct Network {
  NetworkSpec spec;
  std::vector<Tensor> conv_weights;  // [C_out,C_in,k,k] per block
  std::vector<Tensor> conv_biases;   // [C_out] per block
  Tensor fc_weight;                  // [fc_width, C_last*L*L] (char-level only)
  Tensor fc_bias;

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

Network build_network(const NetworkSpec& spec, std::uint64_t seed);

// Saved activations of one forward pass, consumed by backward_local.
struct ForwardContext {
  std::vector<Conv2dContext> conv;
  std::vector<Tensor> conv_out;  // pre-ReLU conv outputs
  std::vector<MaxPoolContext> pool;
  Tensor pooled_last;  // input to the FC (char-level)
  Tensor fc_out;       // pre-ReLU FC output
};

LocalFeatureMap forward_local(const Network& net, const Tensor& patch,
                              ForwardContext* ctx = nullptr);
// Gradients w.r.t. every network parameter, in parameters() order.
std::vector<Tensor> backward_local(const Network& net, const ForwardContext& ctx,
                                   const Tensor& d_values);

struct ClassifierHead {
  Tensor weight;  // [N_c, D]
  Tensor bias;    // [N_c]
  std::size_t num_writers() const { return weight.shape[0]; }
  std::size_t depth() const { return weight.shape[1]; }
};

ClassifierHead build_head(int num_writers, int depth, std::uint64_t seed);

Tensor classify(const Tensor& global, const ClassifierHead& head);
// Argmax with ties to the lowest index.
std::size_t predict(const Tensor& logits);

}  // namespace scriptor
