#include "scriptor/aggregate.hpp"

#include <algorithm>
#include <numeric>

#include "scriptor/errors.hpp"

namespace scriptor {

namespace {

void check_locals(const std::vector<LocalFeatureMap>& locals) {
  if (locals.empty()) throw parameter_error("aggregate: empty tuple");
  for (const LocalFeatureMap& m : locals)
    if (m.side != locals[0].side || m.depth != locals[0].depth)
      throw shape_error("aggregate: tuple members disagree on L or D");
}

}  // namespace

std::string aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::AA: return "aa";
    case Aggregation::MA: return "ma";
    default: return "kma";
  }
}

Aggregation aggregation_from_name(const std::string& name) {
  if (name == "aa") return Aggregation::AA;
  if (name == "ma") return Aggregation::MA;
  if (name == "kma") return Aggregation::KMA;
  throw parameter_error("unknown aggregation method: " + name);
}

std::pair<GlobalFeature, AggregationContext> aggregate_aa(const std::vector<LocalFeatureMap>& locals) {
  check_locals(locals);
  const int n = static_cast<int>(locals.size());
  const int side = locals[0].side, depth = locals[0].depth;
  const std::size_t positions = static_cast<std::size_t>(n) * side * side;

  GlobalFeature g;
  g.depth = depth;
  g.method = Aggregation::AA;
  g.values = Tensor({static_cast<std::size_t>(depth)});
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  std::vector<double> column(positions);
  for (int d = 0; d < depth; ++d) {
    for (int mem = 0; mem < n; ++mem) {
      const double* vals = locals[static_cast<std::size_t>(mem)].values.data.data() +
                           static_cast<std::size_t>(d) * plane;
      std::copy(vals, vals + plane, column.begin() + static_cast<std::size_t>(mem) * plane);
    }
    // summing in sorted order keeps the mean invariant to member order
    std::sort(column.begin(), column.end());
    double acc = 0.0;
    for (double v : column) acc += v;
    g.values[d] = acc / static_cast<double>(positions);
  }

  AggregationContext ctx;
  ctx.method = Aggregation::AA;
  ctx.n = n;
  ctx.side = side;
  ctx.depth = depth;
  return {std::move(g), std::move(ctx)};
}

std::pair<GlobalFeature, AggregationContext> aggregate_ma(const std::vector<LocalFeatureMap>& locals) {
  check_locals(locals);
  const int n = static_cast<int>(locals.size());
  const int side = locals[0].side, depth = locals[0].depth;
  const std::size_t plane = static_cast<std::size_t>(side) * side;

  GlobalFeature g;
  g.depth = depth;
  g.method = Aggregation::MA;
  g.values = Tensor({static_cast<std::size_t>(depth)});

  AggregationContext ctx;
  ctx.method = Aggregation::MA;
  ctx.n = n;
  ctx.side = side;
  ctx.depth = depth;
  ctx.selected.resize(static_cast<std::size_t>(depth));

  for (int d = 0; d < depth; ++d) {
    double best = 0.0;
    std::uint32_t best_pos = 0;
    bool first = true;
    for (int mem = 0; mem < n; ++mem) {
      const double* vals = locals[mem].values.data.data() + static_cast<std::size_t>(d) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        // strict > keeps the lexicographically first position on ties
        if (first || vals[p] > best) {
          best = vals[p];
          best_pos = static_cast<std::uint32_t>(mem * plane + p);
          first = false;
        }
      }
    }
    g.values[d] = best;
    ctx.selected[static_cast<std::size_t>(d)] = best_pos;
  }
  return {std::move(g), std::move(ctx)};
}

std::pair<GlobalFeature, AggregationContext> aggregate_kma(const std::vector<LocalFeatureMap>& locals,
                                                           int k) {
  check_locals(locals);
  const int n = static_cast<int>(locals.size());
  const int side = locals[0].side, depth = locals[0].depth;
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  const std::size_t positions = static_cast<std::size_t>(n) * plane;
  if (k < 1 || static_cast<std::size_t>(k) > positions)
    throw parameter_error("aggregate_kma: K must be in [1, n*L*L], got " + std::to_string(k));

  GlobalFeature g;
  g.depth = depth;
  g.method = Aggregation::KMA;
  g.k = k;
  g.values = Tensor({static_cast<std::size_t>(depth)});

  AggregationContext ctx;
  ctx.method = Aggregation::KMA;
  ctx.n = n;
  ctx.side = side;
  ctx.depth = depth;
  ctx.k = k;
  ctx.selected.resize(static_cast<std::size_t>(depth) * k);

  std::vector<std::uint32_t> order(positions);
  std::vector<double> column(positions);
  for (int d = 0; d < depth; ++d) {
    for (int mem = 0; mem < n; ++mem) {
      const double* vals = locals[mem].values.data.data() + static_cast<std::size_t>(d) * plane;
      std::copy(vals, vals + plane, column.begin() + static_cast<std::size_t>(mem) * plane);
    }
    std::iota(order.begin(), order.end(), 0u);
    // value descending, position ascending on ties
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        if (column[a] != column[b]) return column[a] > column[b];
                        return a < b;
                      });
    double acc = 0.0;
    for (int t = 0; t < k; ++t) {
      acc += column[order[static_cast<std::size_t>(t)]];
      ctx.selected[static_cast<std::size_t>(d) * k + t] = order[static_cast<std::size_t>(t)];
    }
    g.values[d] = acc / static_cast<double>(k);
  }
  return {std::move(g), std::move(ctx)};
}

std::pair<GlobalFeature, AggregationContext> aggregate(Aggregation method,
                                                       const std::vector<LocalFeatureMap>& locals,
                                                       int k) {
  switch (method) {
    case Aggregation::AA: return aggregate_aa(locals);
    case Aggregation::MA: return aggregate_ma(locals);
    default: return aggregate_kma(locals, k);
  }
}

std::vector<Tensor> aggregate_backward(const AggregationContext& ctx, const Tensor& d_global) {
  if (d_global.rank() != 1 || d_global.shape[0] != static_cast<std::size_t>(ctx.depth))
    throw shape_error("aggregate_backward: d_global must be [D]");
  const std::size_t plane = static_cast<std::size_t>(ctx.side) * ctx.side;
  std::vector<Tensor> grads;
  grads.reserve(static_cast<std::size_t>(ctx.n));
  for (int mem = 0; mem < ctx.n; ++mem)
    grads.emplace_back(std::vector<std::size_t>{static_cast<std::size_t>(ctx.depth),
                                                static_cast<std::size_t>(ctx.side),
                                                static_cast<std::size_t>(ctx.side)});

  if (ctx.method == Aggregation::AA) {
    const double scale = 1.0 / (static_cast<double>(ctx.n) * plane);
    for (int d = 0; d < ctx.depth; ++d) {
      const double gd = d_global[static_cast<std::size_t>(d)] * scale;
      for (int mem = 0; mem < ctx.n; ++mem) {
        double* dst = grads[static_cast<std::size_t>(mem)].data.data() +
                      static_cast<std::size_t>(d) * plane;
        for (std::size_t p = 0; p < plane; ++p) dst[p] += gd;
      }
    }
  } else if (ctx.method == Aggregation::MA) {
    for (int d = 0; d < ctx.depth; ++d) {
      const std::uint32_t pos = ctx.selected[static_cast<std::size_t>(d)];
      const std::size_t mem = pos / plane, p = pos % plane;
      grads[mem].data[static_cast<std::size_t>(d) * plane + p] +=
          d_global[static_cast<std::size_t>(d)];
    }
  } else {
    const double scale = 1.0 / static_cast<double>(ctx.k);
    for (int d = 0; d < ctx.depth; ++d) {
      const double gd = d_global[static_cast<std::size_t>(d)] * scale;
      for (int t = 0; t < ctx.k; ++t) {
        const std::uint32_t pos = ctx.selected[static_cast<std::size_t>(d) * ctx.k + t];
        const std::size_t mem = pos / plane, p = pos % plane;
        grads[mem].data[static_cast<std::size_t>(d) * plane + p] += gd;
      }
    }
  }
  return grads;
}

}  // namespace scriptor
