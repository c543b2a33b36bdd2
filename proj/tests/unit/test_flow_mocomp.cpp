#include <cmath>

#include "evaflow/flow.hpp"
#include "evaflow/mocomp.hpp"
#include "support.hpp"

using namespace evaflow;
using evaflow::testing::expect_error;

namespace {

/// Bilinear interpolation written from the four-corner formula with explicit zero padding.
double oracle_sample(const std::vector<double>& img, int h, int w, double x, double y) {
  if (x < 0 || y < 0 || x > w - 1 || y > h - 1) return 0.0;
  auto px = [&](int yy, int xx) { return (xx < 0 || yy < 0 || xx >= w || yy >= h) ? 0.0 : img[yy * w + xx]; };
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double a = x - x0, b = y - y0;
  return (1 - a) * (1 - b) * px(y0, x0) + a * (1 - b) * px(y0, x0 + 1) + (1 - a) * b * px(y0 + 1, x0) +
         a * b * px(y0 + 1, x0 + 1);
}

/// Per-event warp and splat, then variances, computed without the library's frame code.
struct OracleFrames {
  std::vector<double> raw, mc;
  std::size_t kept = 0;
};

OracleFrames oracle_frames(const EventWindow& w, const FlowField& f, double t_ref) {
  const int W = w.geometry().width, H = w.geometry().height;
  OracleFrames o;
  o.raw.assign(W * H, 0.0);
  o.mc.assign(W * H, 0.0);
  auto splat = [&](std::vector<double>& img, double x, double y) {
    for (int yy = 0; yy < H; ++yy)
      for (int xx = 0; xx < W; ++xx)
        img[yy * W + xx] += std::max(0.0, 1 - std::abs(xx - x)) * std::max(0.0, 1 - std::abs(yy - y));
  };
  for (const Event& e : w.events()) {
    splat(o.raw, e.x, e.y);
    const double u = oracle_sample(f.u, H, W, e.x, e.y), v = oracle_sample(f.v, H, W, e.x, e.y);
    const double x = e.x + (t_ref - e.t_seconds()) * u / f.duration_s;
    const double y = e.y + (t_ref - e.t_seconds()) * v / f.duration_s;
    if (x < 0 || y < 0 || x > W - 1 || y > H - 1) continue;
    splat(o.mc, x, y);
    ++o.kept;
  }
  return o;
}

double var(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= v.size();
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / v.size();
}

double sum(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST_SUITE("flow") {

TEST_CASE("bilinear sampling matches the corner formula") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> val(-3, 3), pos(-1.5, 9.5);
  std::vector<double> img(7 * 9);
  for (auto& v : img) v = val(rng);
  for (int i = 0; i < 2000; ++i) {
    const double x = pos(rng), y = pos(rng);
    CHECK(bilinear_sample(img, 7, 9, x, y) == doctest::Approx(oracle_sample(img, 7, 9, x, y)).epsilon(1e-12));
  }
  CHECK(bilinear_sample(img, 7, 9, 8.0, 6.0) == img[6 * 9 + 8]);
  CHECK(bilinear_sample(img, 7, 9, 8.0001, 6.0) == 0.0);
}

TEST_CASE("backward warp: zero flow is the identity, integer flow shifts") {
  std::mt19937_64 rng(2);
  std::vector<double> img(2 * 5 * 6);
  for (auto& v : img) v = static_cast<double>(rng() % 100);
  const FlowField zero(5, 6, 1.0);
  CHECK(backward_warp(img, 2, zero) == img);
  const auto shifted = backward_warp(img, 2, FlowField::uniform(5, 6, 1.0, 1.0, 0.0));
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) CHECK(shifted[c * 30 + y * 6 + x] == (x + 1 < 6 ? img[c * 30 + y * 6 + x + 1] : 0.0));
  expect_error(ErrorKind::kShape, [&] { backward_warp(img, 3, zero); });
}

TEST_CASE("EVAF round trip with and without mask") {
  evaflow::testing::TempDir dir("flow");
  std::mt19937_64 rng(3);
  FlowField f = evaflow::testing::random_flow(rng, 6, 5, 2.0, 0.05);
  for (auto& v : f.u) v = static_cast<float>(v);
  for (auto& v : f.v) v = static_cast<float>(v);
  f.valid[4] = 0;
  save_flow(f, dir.file("a.evaf"));
  const FlowField back = load_flow(dir.file("a.evaf"));
  CHECK(back.u == f.u);
  CHECK(back.v == f.v);
  CHECK(back.valid == f.valid);
  CHECK(back.duration_s == 0.05);
  save_flow(f, dir.file("b.evaf"), false);
  CHECK(load_flow(dir.file("b.evaf")).valid_count() == f.size());
  CHECK(evaflow::testing::slurp(dir.file("b.evaf")).size() == 21 + 8 * f.size());
}

TEST_CASE("flow validation") {
  FlowField f(3, 3, 1.0);
  f.duration_s = 0.0;
  expect_error(ErrorKind::kInvalidArgument, [&] { validate_flow(f); });
  f.duration_s = 1.0;
  f.u.pop_back();
  expect_error(ErrorKind::kShape, [&] { validate_flow(f); });
}

}

TEST_SUITE("mocomp") {

TEST_CASE("frames and variances match a per-event oracle") {
  std::mt19937_64 rng(4);
  const SensorGeometry g{9, 8};
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = evaflow::testing::random_window(rng, g, 80, 0, 50000, false);
    const FlowField f = evaflow::testing::random_flow(rng, 8, 9, 3.0, 0.05);
    const double t_ref = (trial % 3) * 0.025;
    const auto o = oracle_frames(w, f, t_ref);
    const MCFrame mc = motion_compensate(w, f, t_ref);
    REQUIRE(mc.counts.size() == o.mc.size());
    for (std::size_t i = 0; i < o.mc.size(); ++i) CHECK(mc.counts[i] == doctest::Approx(o.mc[i]).epsilon(1e-12));
    CHECK(mc.n_in == o.kept);
    CHECK(mc.n_total == w.size());
    const WarpLossReport r = warp_loss_report(w, f, t_ref);
    CHECK(r.fwl == doctest::Approx(var(o.mc) / var(o.raw)).epsilon(1e-10));
    if (o.kept > 0) {
      std::vector<double> rn(o.raw), mn(o.mc);
      const double sr = sum(o.raw), sm = sum(o.mc);
      for (auto& v : rn) v /= sr;
      for (auto& v : mn) v /= sm;
      CHECK(r.rfwl == doctest::Approx(var(mn) / var(rn)).epsilon(1e-10));
    }
  }
}

TEST_CASE("zero flow gives FWL = RFWL = 1 exactly") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = evaflow::testing::random_window(rng, SensorGeometry{16, 12}, 200, 0, 1000);
    const FlowField zero(12, 16, 0.001);
    CHECK(fwl(w, zero, 0.0) == 1.0);
    CHECK(rfwl(w, zero, 0.0) == 1.0);
  }
}

TEST_CASE("retention uses the closed sensor box") {
  const SensorGeometry g{4, 4};
  const EventWindow w({{0, 2.0, 1.0, 1}, {0, 2.0, 2.0, -1}}, 0, 1000, g);
  // Displaced to x = 0, the left edge of the closed box.
  const MCFrame in = motion_compensate(w, FlowField::uniform(4, 4, 1e-3, -2.0, 0.0), 1e-3);
  CHECK(in.n_in == 2);
  const MCFrame out = motion_compensate(w, FlowField::uniform(4, 4, 1e-3, -2.5, 0.0), 1e-3);
  CHECK(out.n_in == 0);
  CHECK(out.sum() == 0.0);
  CHECK(std::isnan(warp_loss_report(w, FlowField::uniform(4, 4, 1e-3, -2.5, 0.0), 1e-3).rfwl));
  expect_error(ErrorKind::kNumeric, [&] { rfwl(w, FlowField::uniform(4, 4, 1e-3, -2.5, 0.0), 1e-3); });
}

TEST_CASE("polarity does not affect counts") {
  const SensorGeometry g{4, 4};
  const EventWindow a({{0, 1.0, 1.0, 1}, {5, 2.5, 2.0, 1}}, 0, 10, g);
  const EventWindow b({{0, 1.0, 1.0, -1}, {5, 2.5, 2.0, -1}}, 0, 10, g);
  CHECK(event_count_image(a, 0.0).counts == event_count_image(b, 0.0).counts);
}

TEST_CASE("degenerate windows") {
  const SensorGeometry g{4, 4};
  const EventWindow empty({}, 0, 10, g);
  expect_error(ErrorKind::kNumeric, [&] { fwl(empty, FlowField(4, 4, 1.0), 0.0); });
  expect_error(ErrorKind::kShape, [&] { motion_compensate(empty, FlowField(5, 4, 1.0), 0.0); });
  CHECK(population_variance(std::vector<double>{1, 2, 3, 4}) == doctest::Approx(1.25));
}

}
