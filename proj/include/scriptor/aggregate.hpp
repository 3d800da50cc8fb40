#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "scriptor/model.hpp"
#include "scriptor/tensor.hpp"

namespace scriptor {

enum class Aggregation { AA, MA, KMA };

std::string aggregation_name(Aggregation a);
Aggregation aggregation_from_name(const std::string& name);

// One D-vector fusing all local features of an n-tuple.
struct GlobalFeature {
  int depth = 0;
  Tensor values;  // [D]
  Aggregation method = Aggregation::AA;
  int k = 0;  // KMA only
};

// Contributor records for routing d_global back to each tuple member.
// Positions are flat indices member*L*L + i*L + j; per dimension the
// backward weights sum to exactly 1.
struct AggregationContext {
  Aggregation method = Aggregation::AA;
  int n = 0;
  int side = 0;
  int depth = 0;
  int k = 0;
  // MA: one winner per dimension; KMA: K winners per dimension; AA: empty
  // (uniform weights over every position).
  std::vector<std::uint32_t> selected;
};

std::pair<GlobalFeature, AggregationContext> aggregate_aa(const std::vector<LocalFeatureMap>& locals);
std::pair<GlobalFeature, AggregationContext> aggregate_ma(const std::vector<LocalFeatureMap>& locals);
std::pair<GlobalFeature, AggregationContext> aggregate_kma(const std::vector<LocalFeatureMap>& locals,
                                                           int k);
std::pair<GlobalFeature, AggregationContext> aggregate(Aggregation method,
                                                       const std::vector<LocalFeatureMap>& locals,
                                                       int k = 0);

// Per-member gradients w.r.t. the local feature maps, each shaped [D,L,L].
std::vector<Tensor> aggregate_backward(const AggregationContext& ctx, const Tensor& d_global);

}  // namespace scriptor
