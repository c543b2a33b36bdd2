#include <cmath>

#include "evaflow/nn/model.hpp"
#include "evaflow/nn/ops.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace evaflow;
using namespace evaflow::nn;
using evaflow::testing::grad_check;
using evaflow::testing::random_tensor;

namespace {

/// Direct cross-correlation loop.
Tensor<double> oracle_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int stride,
                           int pad) {
  const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3), Co = w.dim(0), K = w.dim(2);
  const int Ho = (H + 2 * pad - K) / stride + 1, Wo = (W + 2 * pad - K) / stride + 1;
  Tensor<double> out({N, Co, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = b.empty() ? 0.0 : b[co];
          for (int ci = 0; ci < Ci; ++ci)
            for (int ky = 0; ky < K; ++ky)
              for (int kx = 0; kx < K; ++kx) {
                const int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                if (iy < 0 || ix < 0 || iy >= H || ix >= W) continue;
                acc += w.at(co, ci, ky, kx) * x.at(n, ci, iy, ix);
              }
          out.at(n, co, oy, ox) = acc;
        }
  return out;
}

}  // namespace

TEST_SUITE("nn_ops") {

TEST_CASE("conv2d: identity kernel, constant bias, direct-loop oracle") {
  std::mt19937_64 rng(1);
  Graph<double> g;
  const auto xt = random_tensor(rng, {2, 3, 5, 6});
  Tensor<double> eye({3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) eye.at(c, c, 0, 0) = 1.0;
  const Var x = g.constant(xt);
  CHECK(g.value(conv2d(g, x, g.constant(eye), Var{}, 1, 0)).values() == xt.values());
  const Var zero_w = g.constant(Tensor<double>({4, 3, 3, 3}));
  const Var bias = g.constant(Tensor<double>({4}, 0.75));
  const auto& c = g.value(conv2d(g, x, zero_w, bias, 2, 1));
  CHECK(c.shape() == std::vector<int>{2, 4, 3, 3});
  for (double v : c.values()) CHECK(v == 0.75);
  for (int stride : {1, 2})
    for (int pad : {0, 1}) {
      const auto wt = random_tensor(rng, {4, 3, 3, 3});
      const auto bt = random_tensor(rng, {4});
      const auto& got = g.value(conv2d(g, x, g.constant(wt), g.constant(bt), stride, pad));
      const auto want = oracle_conv(xt, wt, bt, stride, pad);
      REQUIRE(got.shape() == want.shape());
      for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  evaflow::testing::expect_error(ErrorKind::kShape, [&] { conv2d(g, x, g.constant(Tensor<double>({4, 2, 3, 3})), Var{}, 1, 1); });
}

TEST_CASE("conv2d gradients match finite differences") {
  std::mt19937_64 rng(2);
  for (int stride : {1, 2}) {
    const auto r = grad_check({random_tensor(rng, {2, 3, 7, 6}), random_tensor(rng, {4, 3, 3, 3}), random_tensor(rng, {4})},
                              [stride](Graph<double>& g, const std::vector<Var>& v) { return conv2d(g, v[0], v[1], v[2], stride, 1); },
                              10 + stride);
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.checked > 50);
  }
}

TEST_CASE("pointwise op gradients") {
  std::mt19937_64 rng(3);
  const std::vector<int> s{1, 2, 4, 3};
  using F = evaflow::testing::GraphFn;
  const std::vector<std::pair<const char*, F>> unary{
      {"sigmoid", [](Graph<double>& g, const std::vector<Var>& v) { return sigmoid(g, v[0]); }},
      {"tanh", [](Graph<double>& g, const std::vector<Var>& v) { return nn::tanh(g, v[0]); }},
      {"relu", [](Graph<double>& g, const std::vector<Var>& v) { return relu(g, v[0]); }},
      {"leaky", [](Graph<double>& g, const std::vector<Var>& v) { return leaky_relu(g, v[0], 0.1); }},
      {"one_minus", [](Graph<double>& g, const std::vector<Var>& v) { return one_minus(g, v[0]); }},
      {"scale", [](Graph<double>& g, const std::vector<Var>& v) { return scale(g, v[0], 2.5); }},
      {"upsample", [](Graph<double>& g, const std::vector<Var>& v) { return upsample2x(g, v[0]); }},
      {"slice", [](Graph<double>& g, const std::vector<Var>& v) { return slice_batch(g, v[0], 0); }},
  };
  for (const auto& [name, fn] : unary) {
    CAPTURE(name);
    CHECK(grad_check({random_tensor(rng, s)}, fn, 5).max_rel_error < 1e-6);
  }
  const std::vector<std::pair<const char*, F>> binary{
      {"add", [](Graph<double>& g, const std::vector<Var>& v) { return add(g, v[0], v[1]); }},
      {"sub", [](Graph<double>& g, const std::vector<Var>& v) { return sub(g, v[0], v[1]); }},
      {"mul", [](Graph<double>& g, const std::vector<Var>& v) { return mul(g, v[0], v[1]); }},
      {"concat", [](Graph<double>& g, const std::vector<Var>& v) { return concat_channels(g, {v[0], v[1], v[0]}); }},
  };
  for (const auto& [name, fn] : binary) {
    CAPTURE(name);
    CHECK(grad_check({random_tensor(rng, s), random_tensor(rng, s)}, fn, 6).max_rel_error < 1e-6);
  }
}

TEST_CASE("warp: zero flow identity, integer shift, gradients in both inputs") {
  std::mt19937_64 rng(4);
  Graph<double> g;
  const auto ft = random_tensor(rng, {1, 3, 5, 6});
  const Var f = g.constant(ft);
  CHECK(g.value(warp(g, f, g.constant(Tensor<double>({1, 2, 5, 6})))).values() == ft.values());
  Tensor<double> shift({1, 2, 5, 6});
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) shift.at(0, 1, y, x) = -1.0;
  const auto& moved = g.value(warp(g, f, g.constant(shift)));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) CHECK(moved.at(0, c, y, x) == (y > 0 ? ft.at(0, c, y - 1, x) : 0.0));
  const auto r = grad_check({random_tensor(rng, {1, 3, 6, 7}), random_tensor(rng, {1, 2, 6, 7}, 1.7)},
                            [](Graph<double>& gg, const std::vector<Var>& v) { return warp(gg, v[0], v[1]); }, 7, 84);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("upsample2x uses half-pixel taps with edge clamping") {
  Graph<double> g;
  Tensor<double> t({1, 1, 1, 3}, std::vector<double>{0.0, 4.0, 8.0});
  const auto& up = g.value(upsample2x(g, g.constant(t)));
  REQUIRE(up.shape() == std::vector<int>{1, 1, 2, 6});
  const std::vector<double> row{0.0, 1.0, 3.0, 5.0, 7.0, 8.0};
  for (int x = 0; x < 6; ++x) {
    CHECK(up.at(0, 0, 0, x) == row[x]);
    CHECK(up.at(0, 0, 1, x) == row[x]);
  }
}

TEST_CASE("l1_mean gradient and masking") {
  std::mt19937_64 rng(5);
  const auto target = random_tensor(rng, {1, 2, 4, 4});
  std::vector<std::uint8_t> mask(16, 1);
  mask[3] = 0;
  const auto r = grad_check({random_tensor(rng, {1, 2, 4, 4})},
                            [&](Graph<double>& g, const std::vector<Var>& v) { return l1_mean(g, v[0], target, mask); }, 8);
  CHECK(r.max_rel_error < 1e-6);
  Graph<double> g;
  Tensor<double> pred = target;
  pred.at(0, 0, 0, 3) += 100.0;  // masked pixel
  pred.at(0, 1, 1, 1) += 1.5;
  CHECK(g.value(l1_mean(g, g.constant(pred), target, mask))[0] == doctest::Approx(1.5 / 15));
}

TEST_CASE("convgru cell gates") {
  std::mt19937_64 rng(6);
  Graph<double> g;
  const auto ht = random_tensor(rng, {1, 3, 4, 4});
  const auto xt = random_tensor(rng, {1, 2, 4, 4});
  Tensor<double> zw({3, 5, 3, 3}), zb({3});
  ParamVars p{{"c.z.w", g.constant(zw)}, {"c.z.b", g.constant(zb)}, {"c.r.w", g.constant(zw)},
              {"c.r.b", g.constant(zb)}, {"c.q.w", g.constant(zw)}, {"c.q.b", g.constant(zb)}};
  const auto& half = g.value(convgru_cell(g, p, "c", g.constant(ht), g.constant(xt)));
  for (std::size_t i = 0; i < half.size(); ++i) CHECK(half[i] == doctest::Approx(0.5 * ht[i]).epsilon(1e-15));
  p["c.z.b"] = g.constant(Tensor<double>({3}, -60.0));
  const auto& pass = g.value(convgru_cell(g, p, "c", g.constant(ht), g.constant(Tensor<double>({1, 2, 4, 4}))));
  for (std::size_t i = 0; i < pass.size(); ++i) CHECK(pass[i] == doctest::Approx(ht[i]).epsilon(1e-12));

  const auto r = grad_check(
      {ht, xt, random_tensor(rng, {3, 5, 3, 3}, 0.4), random_tensor(rng, {3}), random_tensor(rng, {3, 5, 3, 3}, 0.4),
       random_tensor(rng, {3}), random_tensor(rng, {3, 5, 3, 3}, 0.4), random_tensor(rng, {3})},
      [](Graph<double>& gg, const std::vector<Var>& v) {
        const ParamVars pv{{"c.z.w", v[2]}, {"c.z.b", v[3]}, {"c.r.w", v[4]}, {"c.r.b", v[5]}, {"c.q.w", v[6]}, {"c.q.b", v[7]}};
        return convgru_cell(gg, pv, "c", v[0], v[1]);
      },
      9);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("graph bookkeeping") {
  Graph<double> g;
  const Var a = g.variable(Tensor<double>({2}, 3.0));
  const Var c = g.constant(Tensor<double>({2}, 2.0));
  const Var m = mul(g, a, c);
  CHECK(g.requires_grad(m));
  CHECK_FALSE(g.requires_grad(mul(g, c, c)));
  evaflow::testing::expect_error(ErrorKind::kShape, [&] { g.backward(m); });
  const Var s = weighted_sum(g, m, Tensor<double>({2}, 1.0));
  g.backward(s);
  CHECK(g.grad(a)[0] == 2.0);
  CHECK_FALSE(g.has_grad(c));
}

}
