#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "scriptor/errors.hpp"
#include "scriptor/nn.hpp"
#include "test_util.hpp"

using namespace scriptor;
using testutil::max_rel_error;
using testutil::random_tensor;

TEST_CASE("tensor shape/data invariant") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), shape_error);
  CHECK_THROWS_AS(Tensor({0, 3}), shape_error);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
}

TEST_CASE("conv2d hand-computed cross-correlation") {
  Tensor input({1, 3, 3}, {1, 2, 0, 0, 1, 0, 0, 0, 1});
  Tensor weight({1, 1, 2, 2}, {1, 0, 0, 1});
  Tensor bias({1});
  Tensor out = conv2d(input, weight, bias, 1, 0);
  REQUIRE(out.shape == std::vector<std::size_t>{1, 2, 2});
  CHECK(out[0] == 2.0);
  CHECK(out[1] == 2.0);
  CHECK(out[2] == 0.0);
  CHECK(out[3] == 2.0);
}

TEST_CASE("conv2d canonical patch shape") {
  Tensor input = random_tensor({1, 64, 64}, 1);
  Tensor weight = random_tensor({32, 1, 5, 5}, 2);
  Tensor bias({32});
  Tensor out = conv2d(input, weight, bias, 1, 2);
  CHECK(out.shape == std::vector<std::size_t>{32, 64, 64});
}

TEST_CASE("conv2d zero input zero bias gives zero output") {
  Tensor input({2, 6, 6});
  Tensor weight = random_tensor({3, 2, 3, 3}, 3);
  Tensor bias({3});
  Tensor out = conv2d(input, weight, bias, 1, 1);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("conv2d rejects channel mismatch") {
  Tensor input({2, 4, 4});
  Tensor weight({1, 3, 3, 3});
  Tensor bias({1});
  CHECK_THROWS_AS(conv2d(input, weight, bias, 1, 1), shape_error);
}

TEST_CASE("conv2d stride-1 odd-kernel same padding preserves extent") {
  for (int k : {1, 3, 5, 7}) {
    Tensor input = random_tensor({1, 11, 13}, static_cast<std::uint64_t>(k));
    Tensor weight = random_tensor({2, 1, static_cast<std::size_t>(k), static_cast<std::size_t>(k)},
                                  static_cast<std::uint64_t>(k) + 10);
    Tensor bias({2});
    Tensor out = conv2d(input, weight, bias, 1, k / 2);
    CHECK(out.shape == std::vector<std::size_t>{2, 11, 13});
  }
}

TEST_CASE("conv2d_backward zero cotangent and bias identity") {
  Conv2dContext ctx;
  Tensor input = random_tensor({2, 5, 5}, 4);
  Tensor weight = random_tensor({3, 2, 3, 3}, 5);
  Tensor bias = random_tensor({3}, 6);
  Tensor out = conv2d(input, weight, bias, 1, 1, &ctx);

  LayerGradients zero = conv2d_backward(ctx, Tensor(out.shape));
  for (double v : zero.d_input.data) CHECK(v == 0.0);
  for (const Tensor& g : zero.d_params)
    for (double v : g.data) CHECK(v == 0.0);

  Tensor d_out = random_tensor(out.shape, 7);
  LayerGradients g = conv2d_backward(ctx, d_out);
  for (std::size_t c = 0; c < 3; ++c) {
    double want = 0.0;
    for (std::size_t i = 0; i < 25; ++i) want += d_out[c * 25 + i];
    CHECK(g.d_params[1][c] == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK_THROWS_AS(conv2d_backward(ctx, Tensor({3, 4, 4})), shape_error);
}

TEST_CASE("conv2d gradients match finite differences over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor input = random_tensor({2, 5, 5}, mix_seed(seed, 1));
    Tensor weight = random_tensor({3, 2, 3, 3}, mix_seed(seed, 2));
    Tensor bias = random_tensor({3}, mix_seed(seed, 3));
    Conv2dContext ctx;
    Tensor out = conv2d(input, weight, bias, 1, 1, &ctx);
    Tensor cotangent = random_tensor(out.shape, mix_seed(seed, 4));

    LayerGradients g = conv2d_backward(ctx, cotangent);
    auto loss_with = [&](const Tensor& in, const Tensor& w, const Tensor& b) {
      Tensor o = conv2d(in, w, b, 1, 1);
      double acc = 0.0;
      for (std::size_t i = 0; i < o.size(); ++i) acc += o[i] * cotangent[i];
      return acc;
    };
    Tensor num_in = numeric_gradient([&](const Tensor& x) { return loss_with(x, weight, bias); },
                                     input, 1e-5);
    Tensor num_w = numeric_gradient([&](const Tensor& x) { return loss_with(input, x, bias); },
                                    weight, 1e-5);
    Tensor num_b = numeric_gradient([&](const Tensor& x) { return loss_with(input, weight, x); },
                                    bias, 1e-5);
    CHECK(max_rel_error(g.d_input, num_in) < 1e-4);
    CHECK(max_rel_error(g.d_params[0], num_w) < 1e-4);
    CHECK(max_rel_error(g.d_params[1], num_b) < 1e-4);
  }
}

TEST_CASE("maxpool2d hand cases") {
  Tensor input({1, 2, 2}, {1, 2, 3, 4});
  MaxPoolContext ctx;
  Tensor out = maxpool2d(input, 2, 2, &ctx);
  REQUIRE(out.shape == std::vector<std::size_t>{1, 1, 1});
  CHECK(out[0] == 4.0);
  CHECK(ctx.argmax[0] == 3);  // position (1,1)

  Tensor constant({1, 4, 4});
  constant.fill(2.5);
  Tensor cout = maxpool2d(constant);
  for (double v : cout.data) CHECK(v == 2.5);

  Tensor big({1, 64, 64});
  CHECK(maxpool2d(big).shape == std::vector<std::size_t>{1, 32, 32});

  CHECK_THROWS_AS(maxpool2d(input, 0, 2), parameter_error);
}

TEST_CASE("maxpool2d backward routes to the winner") {
  Tensor input({1, 2, 2}, {1, 4, 3, 2});
  MaxPoolContext ctx;
  maxpool2d(input, 2, 2, &ctx);
  Tensor d_out({1, 1, 1}, {5.0});
  Tensor d_in = maxpool2d_backward(ctx, d_out);
  CHECK(d_in.data == std::vector<double>{0, 5, 0, 0});
}

TEST_CASE("maxpool2d pads odd extents on the bottom/right") {
  Tensor input({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor out = maxpool2d(input, 2, 2);
  REQUIRE(out.shape == std::vector<std::size_t>{1, 2, 2});
  CHECK(out[0] == 5.0);
  CHECK(out[1] == 6.0);
  CHECK(out[2] == 8.0);
  CHECK(out[3] == 9.0);
}

TEST_CASE("maxpool2d gradients match finite differences over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor input = random_tensor({2, 6, 6}, mix_seed(seed, 10));
    MaxPoolContext ctx;
    Tensor out = maxpool2d(input, 2, 2, &ctx);
    Tensor cotangent = random_tensor(out.shape, mix_seed(seed, 11));
    Tensor analytic = maxpool2d_backward(ctx, cotangent);
    Tensor numeric = numeric_gradient(
        [&](const Tensor& x) {
          Tensor o = maxpool2d(x, 2, 2);
          double acc = 0.0;
          for (std::size_t i = 0; i < o.size(); ++i) acc += o[i] * cotangent[i];
          return acc;
        },
        input, 1e-5);
    CHECK(max_rel_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("relu definition and gradient") {
  Tensor x({3}, {-1, 0, 2});
  Tensor y = relu(x);
  CHECK(y.data == std::vector<double>{0, 0, 2});

  Tensor neg({4}, {-3, -2, -1, -0.5});
  Tensor yneg = relu(neg);
  Tensor dneg = relu_backward(neg, Tensor({4}, {1, 1, 1, 1}));
  for (double v : yneg.data) CHECK(v == 0.0);
  for (double v : dneg.data) CHECK(v == 0.0);

  // away from the kink the gradient matches finite differences
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor input = random_tensor({8}, mix_seed(seed, 20));
    for (double& v : input.data)
      if (std::abs(v) < 0.05) v = 0.1;  // keep clear of the kink
    Tensor cotangent = random_tensor({8}, mix_seed(seed, 21));
    Tensor analytic = relu_backward(input, cotangent);
    Tensor numeric = numeric_gradient(
        [&](const Tensor& x2) {
          Tensor o = relu(x2);
          double acc = 0.0;
          for (std::size_t i = 0; i < o.size(); ++i) acc += o[i] * cotangent[i];
          return acc;
        },
        input, 1e-5);
    CHECK(max_rel_error(analytic, numeric) < 1e-6);
  }
}

TEST_CASE("linear hand cases and gradients") {
  Tensor weight({2, 2}, {1, 2, 3, 4});
  Tensor bias({2});
  Tensor input({2}, {1, 1});
  Tensor out = linear(input, weight, bias);
  CHECK(out.data == std::vector<double>{3, 7});

  Tensor id_w({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor v = random_tensor({3}, 30);
  Tensor same = linear(v, id_w, Tensor({3}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(same[i] == v[i]);

  CHECK_THROWS_AS(linear(Tensor({3}), weight, bias), shape_error);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor in = random_tensor({4}, mix_seed(seed, 31));
    Tensor w = random_tensor({3, 4}, mix_seed(seed, 32));
    Tensor b = random_tensor({3}, mix_seed(seed, 33));
    Tensor cot = random_tensor({3}, mix_seed(seed, 34));
    LayerGradients g = linear_backward(in, w, cot);
    auto loss_with = [&](const Tensor& xin, const Tensor& xw, const Tensor& xb) {
      Tensor o = linear(xin, xw, xb);
      double acc = 0.0;
      for (std::size_t i = 0; i < o.size(); ++i) acc += o[i] * cot[i];
      return acc;
    };
    CHECK(max_rel_error(g.d_input,
                        numeric_gradient([&](const Tensor& x) { return loss_with(x, w, b); }, in,
                                         1e-5)) < 1e-6);
    CHECK(max_rel_error(g.d_params[0],
                        numeric_gradient([&](const Tensor& x) { return loss_with(in, x, b); }, w,
                                         1e-5)) < 1e-6);
    CHECK(max_rel_error(g.d_params[1],
                        numeric_gradient([&](const Tensor& x) { return loss_with(in, w, x); }, b,
                                         1e-5)) < 1e-6);
  }
}

TEST_CASE("softmax cross entropy values") {
  for (std::size_t c : {2, 3, 10}) {
    Tensor logits({c});
    SoftmaxXentResult r = softmax_cross_entropy(logits, 0);
    CHECK(r.loss == doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-12));
  }

  Tensor logits({2}, {0.0, std::log(3.0)});
  SoftmaxXentResult r = softmax_cross_entropy(logits, 1);
  CHECK(r.loss == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-9));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor l = random_tensor({7}, mix_seed(seed, 40), -5, 5);
    SoftmaxXentResult rr = softmax_cross_entropy(l, seed % 7);
    double sum = 0.0;
    for (double v : rr.d_logits.data) sum += v;
    CHECK(std::abs(sum) < 1e-12);
    CHECK(rr.loss > 0.0);  // strictly positive for all finite logits
  }
  CHECK_THROWS_AS(softmax_cross_entropy(logits, 2), parameter_error);
}

TEST_CASE("softmax cross entropy is numerically stable for large logits") {
  Tensor logits({3}, {1000.0, 999.0, -1000.0});
  SoftmaxXentResult r = softmax_cross_entropy(logits, 0);
  CHECK(std::isfinite(r.loss));
  CHECK(r.d_logits.all_finite());
}

TEST_CASE("sgd momentum update rule") {
  Tensor w({1}, {1.0});
  Tensor g({1}, {2.0});
  OptimizerState st = make_optimizer_state({&w}, 0.1, 0.0);
  sgd_step({&w}, {&g}, st);
  CHECK(w[0] == doctest::Approx(0.8).epsilon(1e-15));

  Tensor w2 = testutil::random_tensor({5}, 50);
  Tensor orig = w2;
  Tensor zero({5});
  OptimizerState st2 = make_optimizer_state({&w2}, 0.1, 0.9);
  sgd_step({&w2}, {&zero}, st2);
  for (std::size_t i = 0; i < 5; ++i) CHECK(w2[i] == orig[i]);

  Tensor w3({1});
  Tensor g3({1}, {1.0});
  OptimizerState st3 = make_optimizer_state({&w3}, 0.1, 0.9);
  sgd_step({&w3}, {&g3}, st3);
  CHECK(w3[0] == doctest::Approx(-0.1).epsilon(1e-15));
  sgd_step({&w3}, {&g3}, st3);
  CHECK(w3[0] == doctest::Approx(-0.29).epsilon(1e-12));

  CHECK_THROWS_AS(make_optimizer_state({&w3}, -1.0, 0.9), parameter_error);
}

TEST_CASE("numeric_gradient oracle sanity") {
  Tensor point({2}, {1, 2});
  Tensor g = numeric_gradient(
      [](const Tensor& x) {
        double acc = 0.0;
        for (double v : x.data) acc += v * v;
        return acc;
      },
      point, 1e-5);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-8));

  Tensor c = numeric_gradient([](const Tensor&) { return 42.0; }, point, 1e-5);
  CHECK(c[0] == 0.0);
  CHECK(c[1] == 0.0);

  Tensor prod({2}, {3, 5});
  Tensor gp = numeric_gradient([](const Tensor& x) { return x[0] * x[1]; }, prod, 1e-5);
  CHECK(gp[0] == doctest::Approx(5.0).epsilon(1e-8));
  CHECK(gp[1] == doctest::Approx(3.0).epsilon(1e-8));

  CHECK_THROWS_AS(numeric_gradient([](const Tensor&) { return 0.0; }, point, 0.0),
                  parameter_error);
}

TEST_CASE("operations are deterministic") {
  Tensor input = random_tensor({2, 8, 8}, 60);
  Tensor weight = random_tensor({4, 2, 3, 3}, 61);
  Tensor bias = random_tensor({4}, 62);
  Tensor a = conv2d(input, weight, bias, 1, 1);
  Tensor b = conv2d(input, weight, bias, 1, 1);
  CHECK(a.data == b.data);
  CHECK(a.all_finite());
}
