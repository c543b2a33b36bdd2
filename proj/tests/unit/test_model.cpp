#include <cmath>
#include <fstream>
#include <random>

#include "evaflow/nn/model.hpp"
#include "evaflow/nn/ops.hpp"
#include "evaflow/nn/train.hpp"
#include "evaflow/representation.hpp"
#include "evaflow/simulate.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace evaflow;
using namespace evaflow::nn;
using evaflow::testing::grad_check;
using evaflow::testing::random_tensor;

namespace {

ModelConfig small_config(int levels, int size, int bins) {
  ModelConfig c;
  c.levels = levels;
  c.channels.assign(levels, 4);
  c.hidden.assign(levels, 4);
  c.head_mid = 6;
  c.height = c.width = size;
  c.bins = bins;
  return c;
}

Grid moving_grid(const ModelConfig& c, double vx, double vy, std::uint64_t seed) {
  const SensorGeometry geom{c.height, c.width};
  const auto pattern = make_random_pattern(geom, 40, 2.0, seed);
  const auto window = generate_events(pattern, MotionModel::constant_velocity(vx, vy), 0.1);
  return build_unified_voxel_grid(window, make_bin_spec(window, c.bins));
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("config validation and map round trip") {
  ModelConfig c;
  CHECK_NOTHROW(validate_config(c));
  const auto back = config_from_map(config_to_map(c));
  CHECK(config_to_map(back) == config_to_map(c));
  ModelConfig bad = c;
  bad.height = 72;
  evaflow::testing::expect_error(ErrorKind::kInvalidArgument, [&] { validate_config(bad); });
  bad = c;
  bad.channels.pop_back();
  evaflow::testing::expect_error(ErrorKind::kInvalidArgument, [&] { validate_config(bad); });
  bad = c;
  bad.bins = 1;
  evaflow::testing::expect_error(ErrorKind::kInvalidArgument, [&] { validate_config(bad); });
  auto m = config_to_map(c);
  m["bins"] = "many";
  evaflow::testing::expect_error(ErrorKind::kFormat, [&] { config_from_map(m); });
}

TEST_CASE("encoder pyramid shapes and zero input") {
  const ModelConfig c;
  const auto params = init_params<double>(c, 3);
  Graph<double> g;
  const auto p = bind_params(g, params, false);
  const auto pyr = encoder_forward(g, c, p, g.constant(Tensor<double>({2, 1, 64, 64})));
  REQUIRE(pyr.size() == 4);
  const std::vector<std::vector<int>> want{{2, 8, 32, 32}, {2, 16, 16, 16}, {2, 24, 8, 8}, {2, 32, 4, 4}};
  for (int l = 0; l < 4; ++l) {
    CHECK(g.value(pyr[l]).shape() == want[l]);
    for (double v : g.value(pyr[l]).values()) CHECK(v == 0.0);  // zero biases
  }
  evaflow::testing::expect_error(ErrorKind::kShape,
                                 [&] { encoder_forward(g, c, p, g.constant(Tensor<double>({1, 2, 64, 64}))); });
}

TEST_CASE("parameter layout, init determinism, EVP1 round trip") {
  const ModelConfig c;
  const auto layout = parameter_layout(c);
  CHECK(layout.front().first == "enc.stem.w");
  CHECK(layout.front().second == std::vector<int>{8, 1, 3, 3});
  const auto a = init_params<float>(c, 11), b = init_params<float>(c, 11), d = init_params<float>(c, 12);
  CHECK(encode_params(a) == encode_params(b));
  CHECK(encode_params(a) != encode_params(d));
  CHECK(a.get("smr3.gru.z.w").shape() == std::vector<int>{32, 32 + 2 + 32, 3, 3});
  CHECK(a.get("smr0.gru.z.w").shape() == std::vector<int>{8, 8 + 2 + 8 + 8, 3, 3});
  CHECK(a.get("smr0.adapter.w").shape() == std::vector<int>{8, 16, 1, 1});
  CHECK_FALSE(a.contains("smr3.adapter.w"));
  const double bound = 1.0 / std::sqrt(9.0);
  for (float v : a.get("enc.stem.w").values()) CHECK(std::abs(v) <= bound);

  evaflow::testing::TempDir dir("params");
  save_params(a, dir.file("p.evp"));
  const auto loaded = load_params(dir.file("p.evp"));
  CHECK(encode_params(loaded) == encode_params(a));
  CHECK_NOTHROW(check_params(c, loaded));
  auto bytes = encode_params(a);
  bytes.push_back(0);
  {
    std::ofstream out(dir.file("trail.evp"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  evaflow::testing::expect_error(ErrorKind::kFormat, [&] { load_params(dir.file("trail.evp")); });
  evaflow::testing::expect_error(ErrorKind::kShape, [&] { check_params(small_config(2, 16, 3), a); });
}

TEST_CASE("smr_step: zero head gives residual identity, gradients match finite differences") {
  const ModelConfig c = small_config(2, 16, 3);
  std::mt19937_64 rng(21);
  auto params = init_params<double>(c, 5);
  for (const char* name : {"smr0.head2.w", "smr0.head2.b"}) params.get(name).fill(0.0);
  Graph<double> g;
  const auto p = bind_params(g, params, false);
  const Var feat = g.constant(random_tensor(rng, {1, 4, 8, 8}));
  const auto flow_t = random_tensor(rng, {1, 2, 8, 8}, 2.0);
  const Var flow = g.constant(flow_t);
  const Var hc = g.constant(random_tensor(rng, {1, 4, 8, 8}));
  const Var hp = g.constant(random_tensor(rng, {1, 4, 8, 8}));
  const auto out = smr_step(g, c, p, 0, feat, flow, hc, hp);
  CHECK(g.value(out.flow).values() == flow_t.values());
  CHECK(g.value(out.hidden).shape() == std::vector<int>{1, 4, 8, 8});
  evaflow::testing::expect_error(ErrorKind::kInvalidArgument, [&] { smr_step(g, c, p, 0, feat, flow, Var{}, hp); });

  const auto full = init_params<double>(c, 6);
  const auto layout = parameter_layout(c);
  std::vector<Tensor<double>> inputs{random_tensor(rng, {1, 4, 8, 8}), random_tensor(rng, {1, 2, 8, 8}, 1.5),
                                     random_tensor(rng, {1, 4, 8, 8}), random_tensor(rng, {1, 4, 8, 8})};
  std::vector<std::string> names;
  for (const auto& [name, shape] : layout)
    if (name.rfind("smr0.", 0) == 0 && name.find("adapter") == std::string::npos) {
      names.push_back(name);
      inputs.push_back(full.get(name));
    }
  const auto r = grad_check(
      inputs,
      [&](Graph<double>& gg, const std::vector<Var>& v) {
        ParamVars pv;
        for (std::size_t k = 0; k < names.size(); ++k) pv[names[k]] = v[4 + k];
        const auto o = smr_step(gg, c, pv, 0, v[0], v[1], v[2], v[3]);
        return concat_channels(gg, {o.flow, o.hidden});
      },
      22, 24);
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("sequence: B-1 outputs at j*tau, batch path equals streaming path") {
  const ModelConfig c = small_config(3, 32, 5);
  const auto params = init_params<float>(c, 8);
  const Grid grid = moving_grid(c, 30.0, -20.0, 4);
  const auto seq = model_forward(grid, c, params);
  REQUIRE(seq.steps() == 4);
  for (int j = 1; j <= 4; ++j) {
    CHECK(seq.at(j).duration_s == doctest::Approx(j * grid.spec.tau_s).epsilon(1e-12));
    CHECK(seq.time_s(j) == doctest::Approx(grid.spec.t0_s + j * grid.spec.tau_s));
  }
  const std::size_t plane = grid.bin_size();
  auto bin = [&](int b) { return grid.bin(b); };
  auto state = model_init(c, params, bin(0), grid.spec.tau_s, grid.spec.t0_s);
  for (int j = 1; j < c.bins; ++j) {
    const FlowField f = model_step(state, c, params, bin(j));
    CHECK(f.duration_s == doctest::Approx(seq.at(j).duration_s));
    double diff = 0.0;
    for (std::size_t i = 0; i < f.u.size(); ++i)
      diff = std::max({diff, std::abs(f.u[i] - seq.at(j).u[i]), std::abs(f.v[i] - seq.at(j).v[i])});
    CHECK(diff < 1e-5);
  }
  const auto again = model_forward(grid, c, params);
  for (int j = 1; j <= 4; ++j) CHECK(again.at(j).u == seq.at(j).u);

  Grid zero = grid;
  std::fill(zero.data.begin(), zero.data.end(), 0.0f);
  for (const auto& f : model_forward(zero, c, params).flows)
    for (double u : f.u) CHECK(u == 0.0);
  Grid wrong = grid;
  wrong.spec.bins = 4;
  wrong.data.resize(4 * plane);
  evaflow::testing::expect_error(ErrorKind::kShape, [&] { model_forward(wrong, c, params); });
}

TEST_CASE("end-to-end loss gradient matches finite differences") {
  for (bool prior : {false, true}) {
    CAPTURE(prior);
    ModelConfig c = small_config(2, 16, 3);
    c.temporal_flow_prior = prior;
    const Grid grid = moving_grid(c, 40.0, 10.0, 9);
    TrainSample sample{grid, ground_truth_flow(MotionModel::constant_velocity(40.0, 10.0), 0.0, 0.1, {16, 16})};
    auto params = init_params<double>(c, 31);
    // Nonzero biases keep pre-activations of empty pixels off the activation kinks.
    std::mt19937_64 brng(30);
    std::uniform_real_distribution<double> bias(-0.3, 0.3);
    for (auto& [name, t] : params.tensors)
      if (name.ends_with(".b"))
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = bias(brng);
    ModelParams<double> grads;
    const double loss = loss_and_gradients(c, params, sample, &grads);
    REQUIRE(std::isfinite(loss));
    std::mt19937_64 rng(32);
    double worst = 0.0;
    int checked = 0;
    for (auto& [name, t] : params.tensors) {
      std::uniform_int_distribution<std::size_t> pick(0, t.size() - 1);
      for (int k = 0; k < 3; ++k) {
        const std::size_t i = pick(rng);
        const double saved = t[i], h = 1e-6;
        t[i] = saved + h;
        const double up = loss_and_gradients<double>(c, params, sample, nullptr);
        t[i] = saved - h;
        const double down = loss_and_gradients<double>(c, params, sample, nullptr);
        t[i] = saved;
        worst = std::max(worst, evaflow::testing::rel_error(grads.get(name)[i], (up - down) / (2 * h), 1e-4));
        ++checked;
      }
    }
    CHECK(checked > 60);
    CHECK(worst < 1e-3);
  }
}

}
