#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "scriptor/errors.hpp"
#include "scriptor/model.hpp"
#include "scriptor/nn.hpp"
#include "test_util.hpp"

using namespace scriptor;
using testutil::rel_error;

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(NetworkSpec::sub_region({}), spec_error);
  CHECK_THROWS_AS(NetworkSpec::sub_region({8, -1}), spec_error);
  CHECK_THROWS_AS(NetworkSpec::char_level({8, 16, 32}, 0), spec_error);
  CHECK(NetworkSpec::sub_region().depth() == 1024);
  CHECK(NetworkSpec::char_level().depth() == 1024);
}

TEST_CASE("sub-region layer trace ends at 4x4") {
  const NetworkSpec spec = NetworkSpec::sub_region({4, 8, 16, 32});
  Network net = build_network(spec, 1);
  // weight shapes follow the filter ladder
  CHECK(net.conv_weights[0].shape == std::vector<std::size_t>{4, 1, 5, 5});
  CHECK(net.conv_weights[1].shape == std::vector<std::size_t>{8, 4, 5, 5});
  CHECK(net.conv_weights[3].shape == std::vector<std::size_t>{32, 16, 5, 5});

  ForwardContext ctx;
  Tensor patch = testutil::random_tensor({1, 64, 64}, 2, 0.0, 1.0);
  LocalFeatureMap map = forward_local(net, patch, &ctx);
  CHECK(map.side == 4);
  CHECK(map.depth == 32);
  CHECK(map.values.shape == std::vector<std::size_t>{32, 4, 4});

  // spatial extents after each pool: 32, 16, 8, 4
  const std::vector<std::size_t> extents = {32, 16, 8, 4};
  for (std::size_t b = 0; b < 4; ++b) CHECK(ctx.pool[b].out_h == extents[b]);
  // pre-pool conv extents stay at the input resolution of the block
  const std::vector<std::size_t> conv_extents = {64, 32, 16, 8};
  for (std::size_t b = 0; b < 4; ++b) CHECK(ctx.conv_out[b].shape[1] == conv_extents[b]);
}

TEST_CASE("char-level trace ends at 1x1 after the FC") {
  const NetworkSpec spec = NetworkSpec::char_level({4, 8, 16}, 32);
  Network net = build_network(spec, 3);
  ForwardContext ctx;
  Tensor patch = testutil::random_tensor({1, 64, 64}, 4, 0.0, 1.0);
  LocalFeatureMap map = forward_local(net, patch, &ctx);
  CHECK(map.side == 1);
  CHECK(map.depth == 32);
  // 3 blocks leave 8x8 maps in front of the FC
  CHECK(ctx.pool[2].out_h == 8);
  CHECK(net.fc_weight.shape == std::vector<std::size_t>{32, 16 * 8 * 8});
}

TEST_CASE("same seed gives bit-identical parameters") {
  const NetworkSpec spec = NetworkSpec::sub_region({4, 8, 16, 32});
  Network a = build_network(spec, 42);
  Network b = build_network(spec, 42);
  for (std::size_t i = 0; i < a.conv_weights.size(); ++i)
    CHECK(a.conv_weights[i].data == b.conv_weights[i].data);
  Network c = build_network(spec, 43);
  CHECK(a.conv_weights[0].data != c.conv_weights[0].data);
}

TEST_CASE("zero patch with zero biases maps to zero features") {
  Network net = build_network(NetworkSpec::sub_region({2, 4, 4, 8}), 5);
  Tensor patch({1, 64, 64});
  LocalFeatureMap map = forward_local(net, patch);
  for (double v : map.values.data) CHECK(v == 0.0);
}

TEST_CASE("forward_local rejects wrong patch shape") {
  Network net = build_network(NetworkSpec::sub_region({2, 4, 4, 8}), 6);
  CHECK_THROWS_AS(forward_local(net, Tensor({1, 32, 32})), shape_error);
}

TEST_CASE("forward_local is deterministic") {
  Network net = build_network(NetworkSpec::sub_region({2, 4, 4, 8}), 7);
  Tensor patch = testutil::random_tensor({1, 64, 64}, 8, 0.0, 1.0);
  LocalFeatureMap a = forward_local(net, patch);
  LocalFeatureMap b = forward_local(net, patch);
  CHECK(a.values.data == b.values.data);
}

TEST_CASE("classify hand cases") {
  ClassifierHead head;
  head.weight = Tensor({3, 2}, {1, 0, 0, 1, 1, 1});
  head.bias = Tensor({3});
  Tensor logits = classify(Tensor({2}, {2, 3}), head);
  CHECK(logits.data == std::vector<double>{2, 3, 5});
  CHECK(predict(logits) == 2);

  ClassifierHead id_head;
  id_head.weight = Tensor({2, 2}, {1, 0, 0, 1});
  id_head.bias = Tensor({2});
  Tensor g({2}, {0.25, -0.5});
  Tensor same = classify(g, id_head);
  CHECK(same.data == g.data);

  Tensor zero({2});
  ClassifierHead bias_head;
  bias_head.weight = Tensor({2, 2});
  bias_head.bias = Tensor({2}, {0.5, -1.0});
  CHECK(classify(zero, bias_head).data == bias_head.bias.data);

  CHECK_THROWS_AS(classify(Tensor({3}), id_head), shape_error);
}

TEST_CASE("predict breaks ties to the lowest index") {
  CHECK(predict(Tensor({3}, {1.0, 1.0, 0.5})) == 0);
  CHECK(predict(Tensor({3}, {0.5, 1.0, 1.0})) == 1);
}

TEST_CASE("end-to-end backward matches sampled finite differences") {
  // depth-8 scaled spec: loss = sum(local_features * cotangent), checked
  // against central differences on sampled parameter coordinates
  const NetworkSpec spec = NetworkSpec::sub_region({2, 2, 4, 8});
  Network net = build_network(spec, 11);
  Tensor patch = testutil::random_tensor({1, 64, 64}, 12, 0.0, 1.0);
  Tensor cotangent = testutil::random_tensor({8, 4, 4}, 13);

  ForwardContext ctx;
  LocalFeatureMap map = forward_local(net, patch, &ctx);
  std::vector<Tensor> grads = backward_local(net, ctx, cotangent);

  auto loss = [&]() {
    LocalFeatureMap m = forward_local(net, patch);
    double acc = 0.0;
    for (std::size_t i = 0; i < m.values.size(); ++i) acc += m.values[i] * cotangent[i];
    return acc;
  };

  std::vector<Tensor*> params = net.parameters();
  REQUIRE(params.size() == grads.size());
  std::mt19937_64 pick(99);
  const double h = 1e-5;
  int checked = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    for (int s = 0; s < 4; ++s) {
      const std::size_t i = pick() % p.size();
      const double orig = p[i];
      p[i] = orig + h;
      const double fp = loss();
      p[i] = orig - h;
      const double fm = loss();
      p[i] = orig;
      const double numeric = (fp - fm) / (2 * h);
      const double analytic = grads[t][i];
      if (std::abs(numeric) < 1e-7 && std::abs(analytic) < 1e-7) continue;  // dead ReLU path
      CHECK(rel_error(analytic, numeric) < 1e-3);
      ++checked;
    }
  }
  CHECK(checked >= 16);
}
