#include <cmath>
#include <limits>

#include "evaflow/nn/train.hpp"
#include "evaflow/simulate.hpp"
#include "support.hpp"

using namespace evaflow;
using namespace evaflow::nn;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.levels = 2;
  c.channels = {4, 6};
  c.hidden = {4, 6};
  c.head_mid = 8;
  c.height = c.width = 16;
  c.bins = 3;
  return c;
}

TrainSample sample(double vx, double vy, std::uint64_t seed, int size = 16, int bins = 3) {
  const SensorGeometry geom{size, size};
  const auto motion = MotionModel::constant_velocity(vx, vy);
  const auto w = generate_events(make_random_pattern(geom, 25, 2.0, seed), motion, 0.1);
  return {build_unified_voxel_grid(w, make_bin_spec(w, bins)), ground_truth_flow(motion, 0.0, 0.1, geom)};
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("train config map round trip") {
  TrainConfig t;
  t.iterations = 17;
  t.grad_clip = 2.5;
  t.augment_flip = true;
  t.seed = 99;
  const auto back = train_config_from_map(train_config_to_map(t));
  CHECK(back.iterations == 17);
  CHECK(back.grad_clip == 2.5);
  CHECK(back.augment_flip);
  CHECK(back.seed == 99);
}

TEST_CASE("training is deterministic and lowers the loss") {
  const ModelConfig c = tiny();
  const std::vector<TrainSample> data{sample(30.0, 0.0, 1), sample(0.0, -25.0, 2)};
  TrainConfig t;
  t.iterations = 60;
  t.learning_rate = 3e-3;
  t.seed = 4;
  const auto a = train_toy(c, t, data);
  const auto b = train_toy(c, t, data);
  CHECK(encode_params(a.params) == encode_params(b.params));
  CHECK(a.losses == b.losses);
  REQUIRE(a.losses.size() == 60);
  const auto init = init_params<float>(c, t.seed);
  ModelParams<float> start = init;
  const double before = final_flow_epe(c, start, data);
  CHECK(final_flow_epe(c, a.params, data) < before);
  t.seed = 5;
  CHECK(encode_params(train_toy(c, t, data).params) != encode_params(a.params));
}

TEST_CASE("NaN loss raises a numeric error") {
  const ModelConfig c = tiny();
  auto s = sample(20.0, 5.0, 3);
  s.gt.u[7] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig t;
  t.iterations = 3;
  evaflow::testing::expect_error(ErrorKind::kNumeric, [&] { train_toy(c, t, {s}); });
}

TEST_CASE("flip and crop keep grids and flow consistent") {
  const auto s = sample(30.0, -10.0, 6, 32, 3);
  const auto f = flip_horizontal(s);
  const int W = s.gt.width;
  for (int y = 0; y < s.gt.height; ++y)
    for (int x = 0; x < W; ++x) {
      CHECK(f.gt.u[y * W + x] == -s.gt.u[y * W + (W - 1 - x)]);
      CHECK(f.gt.v[y * W + x] == s.gt.v[y * W + (W - 1 - x)]);
      for (int b = 0; b < 3; ++b) CHECK(f.grid.at(b, y, x) == s.grid.at(b, y, W - 1 - x));
    }
  const auto ff = flip_horizontal(f);
  CHECK(ff.grid.data == s.grid.data);
  CHECK(ff.gt.u == s.gt.u);

  const auto cr = crop(s, 8, 4, 16, 16);
  CHECK(cr.grid.height() == 16);
  CHECK(cr.gt.width == 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      CHECK(cr.gt.u[y * 16 + x] == s.gt.u[(y + 8) * W + x + 4]);
      CHECK(cr.grid.at(2, y, x) == s.grid.at(2, y + 8, x + 4));
    }
  evaflow::testing::expect_error(ErrorKind::kInvalidArgument, [&] { crop(s, 20, 0, 16, 16); });

  TrainConfig t;
  t.iterations = 4;
  t.augment_crop = true;
  t.augment_flip = true;
  CHECK(train_toy(tiny(), t, {s}).losses.size() == 4);
}

TEST_CASE("training set loader pairs events with flow files") {
  evaflow::testing::TempDir dir("trainset");
  for (int k = 0; k < 2; ++k) {
    const SensorGeometry geom{16, 16};
    const auto motion = MotionModel::constant_velocity(10.0 * (k + 1), 0.0);
    const auto w = generate_events(make_random_pattern(geom, 20, 2.0, k), motion, 0.1);
    const std::string stem = dir.file("sample_000" + std::to_string(k));
    save_events(w, stem + ".evt1", EventFormat::kBinary);
    save_flow(ground_truth_flow(motion, 0.0, 0.1, geom), stem + ".evaf");
  }
  const auto set = load_training_set(dir.path().string(), 3);
  REQUIRE(set.size() == 2);
  CHECK(set[1].gt.u[0] == doctest::Approx(2.0));
  CHECK(set[0].grid.bins() == 3);
  std::filesystem::remove(dir.file("sample_0001.evaf"));
  CHECK_THROWS_AS(load_training_set(dir.path().string(), 3), evaflow::Error);
}

}
