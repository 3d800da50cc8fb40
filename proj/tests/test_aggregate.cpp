#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "scriptor/aggregate.hpp"
#include "scriptor/errors.hpp"
#include "scriptor/nn.hpp"
#include "test_util.hpp"

using namespace scriptor;
using testutil::max_rel_error;

namespace {

LocalFeatureMap make_map(int side, int depth, std::vector<double> values) {
  LocalFeatureMap m;
  m.side = side;
  m.depth = depth;
  m.values = Tensor({static_cast<std::size_t>(depth), static_cast<std::size_t>(side),
                     static_cast<std::size_t>(side)},
                    std::move(values));
  return m;
}

LocalFeatureMap random_map(int side, int depth, std::uint64_t seed) {
  LocalFeatureMap m;
  m.side = side;
  m.depth = depth;
  m.values = testutil::random_tensor({static_cast<std::size_t>(depth),
                                      static_cast<std::size_t>(side),
                                      static_cast<std::size_t>(side)},
                                     seed);
  return m;
}

}  // namespace

TEST_CASE("AA hand mean and constants") {
  auto [g, ctx] = aggregate_aa({make_map(2, 1, {1, 2, 3, 4})});
  CHECK(g.values[0] == doctest::Approx(2.5).epsilon(1e-15));

  std::vector<LocalFeatureMap> constant;
  for (int i = 0; i < 3; ++i) {
    LocalFeatureMap m = make_map(2, 2, std::vector<double>(8, 0.0));
    m.values.fill(7.5);
    constant.push_back(std::move(m));
  }
  auto [gc, cc] = aggregate_aa(constant);
  for (double v : gc.values.data) CHECK(v == doctest::Approx(7.5).epsilon(1e-15));
}

TEST_CASE("AA over a tuple equals AA over the concatenated position set") {
  LocalFeatureMap a = random_map(2, 3, 1);
  LocalFeatureMap b = random_map(2, 3, 2);
  auto [g, ctx] = aggregate_aa({a, b});
  for (int d = 0; d < 3; ++d) {
    double acc = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) acc += a.value(i, j, d) + b.value(i, j, d);
    CHECK(g.values[static_cast<std::size_t>(d)] == doctest::Approx(acc / 8.0).epsilon(1e-15));
  }
}

TEST_CASE("MA hand max and tie routing") {
  auto [g, ctx] = aggregate_ma({make_map(2, 1, {1, 2, 3, 4})});
  CHECK(g.values[0] == 4.0);
  CHECK(ctx.selected[0] == 3);

  LocalFeatureMap c = make_map(2, 1, {5, 5, 5, 5});
  auto [gc, cc] = aggregate_ma({c, c});
  CHECK(gc.values[0] == 5.0);
  CHECK(cc.selected[0] == 0);  // ties go to member 0, i=0, j=0
}

TEST_CASE("KMA hand mean of top values and range checks") {
  auto [g, ctx] = aggregate_kma({make_map(2, 1, {1, 2, 3, 4})}, 2);
  CHECK(g.values[0] == doctest::Approx(3.5).epsilon(1e-15));
  CHECK_THROWS_AS(aggregate_kma({make_map(2, 1, {1, 2, 3, 4})}, 0), parameter_error);
  CHECK_THROWS_AS(aggregate_kma({make_map(2, 1, {1, 2, 3, 4})}, 5), parameter_error);
}

TEST_CASE("mixed shapes are rejected") {
  CHECK_THROWS_AS(aggregate_aa({random_map(2, 3, 1), random_map(2, 4, 2)}), shape_error);
  CHECK_THROWS_AS(aggregate_ma({random_map(2, 3, 1), random_map(1, 3, 2)}), shape_error);
}

TEST_CASE("KMA endpoints coincide with MA and AA") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::vector<LocalFeatureMap> locals;
    const int n = 1 + static_cast<int>(seed % 4);
    for (int i = 0; i < n; ++i)
      locals.push_back(random_map(2, 5, mix_seed(seed, static_cast<std::uint64_t>(i))));
    auto [ma, mc] = aggregate_ma(locals);
    auto [k1, kc1] = aggregate_kma(locals, 1);
    auto [aa, ac] = aggregate_aa(locals);
    auto [kall, kcall] = aggregate_kma(locals, n * 4);
    for (std::size_t d = 0; d < 5; ++d) {
      CHECK(std::abs(k1.values[d] - ma.values[d]) <= 1e-12);
      CHECK(std::abs(kall.values[d] - aa.values[d]) <= 1e-12);
    }
  }
}

TEST_CASE("sandwich AA <= KMA(K) <= MA with KMA monotone in K") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<LocalFeatureMap> locals = {random_map(3, 4, mix_seed(seed, 100)),
                                           random_map(3, 4, mix_seed(seed, 101))};
    const int total = 2 * 9;
    auto [aa, c1] = aggregate_aa(locals);
    auto [ma, c2] = aggregate_ma(locals);
    std::vector<Tensor> kma_values;
    for (int k = 1; k <= total; ++k) kma_values.push_back(aggregate_kma(locals, k).first.values);
    for (std::size_t d = 0; d < 4; ++d) {
      for (int k = 1; k <= total; ++k) {
        CHECK(kma_values[static_cast<std::size_t>(k - 1)][d] >= aa.values[d] - 1e-12);
        CHECK(kma_values[static_cast<std::size_t>(k - 1)][d] <= ma.values[d] + 1e-12);
        if (k > 1)
          CHECK(kma_values[static_cast<std::size_t>(k - 1)][d] <=
                kma_values[static_cast<std::size_t>(k - 2)][d] + 1e-15);
      }
    }
  }
}

TEST_CASE("permutation invariance is bit exact") {
  std::mt19937_64 perm_rng(7);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<LocalFeatureMap> locals;
    const int n = 2 + static_cast<int>(seed % 4);
    for (int i = 0; i < n; ++i)
      locals.push_back(random_map(2, 3, mix_seed(seed, 200 + static_cast<std::uint64_t>(i))));
    std::vector<LocalFeatureMap> shuffled = locals;
    std::shuffle(shuffled.begin(), shuffled.end(), perm_rng);

    CHECK(aggregate_aa(locals).first.values.data == aggregate_aa(shuffled).first.values.data);
    CHECK(aggregate_ma(locals).first.values.data == aggregate_ma(shuffled).first.values.data);
    CHECK(aggregate_kma(locals, 3).first.values.data ==
          aggregate_kma(shuffled, 3).first.values.data);
  }
}

TEST_CASE("backward weights sum to one per dimension") {
  std::vector<LocalFeatureMap> locals = {random_map(2, 6, 300), random_map(2, 6, 301)};
  Tensor ones({6});
  ones.fill(1.0);
  for (auto method : {Aggregation::AA, Aggregation::MA, Aggregation::KMA}) {
    auto [g, ctx] = aggregate(method, locals, 3);
    std::vector<Tensor> grads = aggregate_backward(ctx, ones);
    for (int d = 0; d < 6; ++d) {
      double mass = 0.0;
      for (const Tensor& t : grads)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            mass += t.at3(static_cast<std::size_t>(d), static_cast<std::size_t>(i),
                          static_cast<std::size_t>(j));
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("aggregation backward matches finite differences on tie-free inputs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int n = 2, side = 2, depth = 3;
    std::vector<LocalFeatureMap> locals = {random_map(side, depth, mix_seed(seed, 400)),
                                           random_map(side, depth, mix_seed(seed, 401))};
    Tensor cotangent = testutil::random_tensor({depth}, mix_seed(seed, 402));

    for (auto method : {Aggregation::AA, Aggregation::MA, Aggregation::KMA}) {
      auto [g, ctx] = aggregate(method, locals, 2);
      std::vector<Tensor> analytic = aggregate_backward(ctx, cotangent);
      for (int mem = 0; mem < n; ++mem) {
        Tensor numeric = numeric_gradient(
            [&](const Tensor& x) {
              std::vector<LocalFeatureMap> perturbed = locals;
              perturbed[static_cast<std::size_t>(mem)].values = x;
              auto [gg, cc] = aggregate(method, perturbed, 2);
              double acc = 0.0;
              for (int d = 0; d < depth; ++d)
                acc += gg.values[static_cast<std::size_t>(d)] * cotangent[static_cast<std::size_t>(d)];
              return acc;
            },
            locals[static_cast<std::size_t>(mem)].values, 1e-6);
        CHECK(max_rel_error(analytic[static_cast<std::size_t>(mem)], numeric) < 1e-6);
      }
    }
  }
}
