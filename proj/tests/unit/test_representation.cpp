#include <cmath>

#include "evaflow/representation.hpp"
#include "support.hpp"

using namespace evaflow;
using evaflow::testing::expect_error;
using evaflow::testing::random_window;

namespace {

double tri(double a) { return std::max(0.0, 1.0 - std::abs(a)); }

/// Direct evaluation of sum_i p_i k(x - x_i) k(y - y_i) k((t_i - t_b) / tau) for every voxel.
std::vector<double> oracle_uvg(const EventWindow& w, const BinSpec& s) {
  const int W = s.geometry.width, H = s.geometry.height;
  std::vector<double> out(static_cast<std::size_t>(s.bins) * W * H, 0.0);
  for (const Event& e : w.events()) {
    for (int b = 0; b < s.bins; ++b) {
      const double kt = tri((e.t_seconds() - s.center_s(b)) / s.tau_s);
      if (kt == 0.0) continue;
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) out[(static_cast<std::size_t>(b) * H + y) * W + x] += e.p * kt * tri(x - e.x) * tri(y - e.y);
    }
  }
  return out;
}

Grid streamed(const EventWindow& w, const BinSpec& spec) {
  UvgStreamer s(spec);
  std::vector<EmittedBin> bins;
  for (const Event& e : w.events())
    for (auto& b : s.push(e)) bins.push_back(std::move(b));
  for (auto& b : s.finish()) bins.push_back(std::move(b));
  return assemble_grid(spec, bins);
}

}  // namespace

TEST_SUITE("representation") {

TEST_CASE("bin spacing bookkeeping for a 100 ms window") {
  const EventWindow w({}, 0, 100000, SensorGeometry{4, 4});
  CHECK(make_bin_spec(w, 15).tau_s == doctest::Approx(0.1 / 14).epsilon(1e-12));
  CHECK(make_bin_spec(w, 21).tau_s == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(make_bin_spec(w, 6).tau_s == doctest::Approx(0.020).epsilon(1e-12));
  expect_error(ErrorKind::kInvalidArgument, [&] { make_bin_spec(w, 1); });
  expect_error(ErrorKind::kInvalidArgument, [&] { make_bin_spec(EventWindow({}, 5, 5, SensorGeometry{4, 4}), 5); });
}

TEST_CASE("temporal weights form a partition of unity") {
  std::mt19937_64 rng(3);
  const BinSpec spec{15, 0.1 / 14, 0.25, SensorGeometry{8, 8}};
  std::uniform_int_distribution<std::int64_t> t(250000, 350000);
  for (int i = 0; i < 2000; ++i) {
    const auto tw = uvg_temporal_weights(spec, t(rng));
    double total = 0.0;
    for (int b = 0; b < spec.bins; ++b) {
      const double w = b == tw.lower ? tw.w_lower : (b == tw.lower + 1 ? tw.w_upper : 0.0);
      total += w;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
  const auto center = uvg_temporal_weights(spec, 250000 + 50000);  // 7 tau exactly
  CHECK(center.lower == 7);
  CHECK(center.w_lower == 1.0);
  CHECK(center.w_upper == 0.0);
}

TEST_CASE("UVG matches the direct kernel sum") {
  std::mt19937_64 rng(5);
  const SensorGeometry g{12, 9};
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = random_window(rng, g, 60, 1000, 41000, false);
    const BinSpec spec = make_bin_spec(w, 5);
    const Grid grid = build_unified_voxel_grid(w, spec);
    const auto oracle = oracle_uvg(w, spec);
    REQUIRE(grid.data.size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(grid.data[i] == doctest::Approx(oracle[i]).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("single event at a bin center lands on one voxel") {
  const EventWindow w({{20000, 3.0, 2.0, -1}}, 0, 40000, SensorGeometry{6, 5});
  const Grid g = build_unified_voxel_grid(w, make_bin_spec(w, 5));
  CHECK(g.at(2, 2, 3) == -1.0f);
  double total = 0.0;
  for (float v : g.data) total += std::abs(v);
  CHECK(total == 1.0);
}

TEST_CASE("mass conservation on interior events") {
  std::mt19937_64 rng(9);
  const SensorGeometry g{16, 16};
  for (int trial = 0; trial < 20; ++trial) {
    // Dyadic positions and timestamps keep every weight exact in binary floating point.
    std::vector<Event> ev;
    std::uniform_int_distribution<int> q(0, 15 * 4), tq(0, 16);
    double expected = 0.0;
    for (int i = 0; i < 200; ++i) {
      ev.push_back({static_cast<std::int64_t>(tq(rng)) * 1024, q(rng) / 4.0, q(rng) / 4.0,
                    static_cast<std::int8_t>(rng() % 2 ? 1 : -1)});
      expected += ev.back().p;
    }
    std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
    const EventWindow w(ev, 0, 4 * 4096, g);
    const Grid grid = build_unified_voxel_grid(w, BinSpec{5, 4096e-6, 0.0, g});
    double total = 0.0;
    for (float v : grid.data) total += v;
    CHECK(total == expected);
  }
}

TEST_CASE("bin spec must cover the window and match its geometry") {
  const SensorGeometry g{4, 4};
  const EventWindow w({{0, 1, 1, 1}, {100, 1, 1, 1}}, 0, 100, g);
  BuildReport r;
  build_unified_voxel_grid(w, BinSpec{3, 50e-6, 0.0, g}, &r);
  expect_error(ErrorKind::kInvalidArgument, [&] { build_unified_voxel_grid(w, BinSpec{3, 20e-6, 0.0, g}); });
  CHECK(r.accumulated == 2);
  expect_error(ErrorKind::kShape, [&] { build_unified_voxel_grid(w, BinSpec{3, 50e-6, 0.0, SensorGeometry{5, 4}}); });
}

TEST_CASE("voxel grid normalizes time between first and last event") {
  const SensorGeometry g{4, 4};
  const EventWindow w({{100, 0, 0, 1}, {150, 1, 0, 1}, {200, 2, 0, -1}}, 0, 300, g);
  const Grid vg = build_voxel_grid(w, 3);
  CHECK(vg.kind == GridKind::kVoxelGrid);
  CHECK(vg.at(0, 0, 0) == 1.0f);
  CHECK(vg.at(1, 0, 1) == 1.0f);
  CHECK(vg.at(2, 0, 2) == -1.0f);
  const EventWindow same_t({{7, 0, 0, 1}, {7, 1, 1, 1}}, 0, 10, g);
  const Grid single = build_voxel_grid(same_t, 4);
  CHECK(single.at(0, 0, 0) == 1.0f);
  CHECK(single.at(0, 1, 1) == 1.0f);
  expect_error(ErrorKind::kInvalidArgument, [&] { build_voxel_grid(EventWindow({}, 0, 1, g), 3); });
}

TEST_CASE("interior voxel-grid bins agree with UVG") {
  std::mt19937_64 rng(21);
  const SensorGeometry g{10, 10};
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = random_window(rng, g, 300, 0, 70000);
    const auto cover = EventWindow::covering({w.events().begin(), w.events().end()}, g);
    const Grid vg = build_voxel_grid(w, 8);
    const Grid uvg = build_unified_voxel_grid(cover, make_bin_spec(cover, 8));
    for (int b = 1; b < 7; ++b)
      for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) CHECK(std::abs(vg.at(b, y, x) - uvg.at(b, y, x)) <= 1e-6);
  }
}

TEST_CASE("streaming equals batch byte for byte") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 30; ++trial) {
    const SensorGeometry g{1 + static_cast<int>(rng() % 40), 1 + static_cast<int>(rng() % 40)};
    const auto w = random_window(rng, g, rng() % 500, 5000, 5000 + 1 + rng() % 90000, trial % 2 == 0);
    const BinSpec spec = make_bin_spec(w, 2 + static_cast<int>(rng() % 20));
    CHECK(encode_evgr(streamed(w, spec)) == encode_evgr(build_unified_voxel_grid(w, spec)));
  }
}

TEST_CASE("a bin is emitted exactly when an event reaches t_b + tau") {
  const SensorGeometry g{4, 4};
  const BinSpec spec{4, 10e-6, 0.0, g};
  UvgStreamer s(spec);
  CHECK(s.push(Event{0, 0, 0, 1}).empty());
  CHECK(s.push(Event{9, 0, 0, 1}).empty());
  auto out = s.push(Event{10, 0, 0, 1});
  REQUIRE(out.size() == 1);
  CHECK(out[0].index == 0);
  CHECK(s.next_bin() == 1);
  out = s.push(Event{35, 0, 0, 1});
  REQUIRE(out.size() == 2);
  CHECK(out[1].index == 2);
  const auto msg = expect_error(ErrorKind::kData, [&] { s.push(Event{12, 0, 0, 1}); });
  CHECK(msg.find("{1,2}") != std::string::npos);
  out = s.finish();
  REQUIRE(out.size() == 1);
  CHECK(s.finished());
}

TEST_CASE("emitted bins depend only on events before t_b + tau") {
  std::mt19937_64 rng(41);
  const SensorGeometry g{8, 8};
  const auto w = random_window(rng, g, 400, 0, 60000);
  const BinSpec spec = make_bin_spec(w, 7);
  const Grid full = build_unified_voxel_grid(w, spec);
  for (int b = 0; b < spec.bins; ++b) {
    const double limit_us = (spec.center_s(b) + spec.tau_s) * 1e6;
    UvgStreamer s(spec);
    std::vector<EmittedBin> seen;
    for (const Event& e : w.events()) {
      if (static_cast<double>(e.t_us) >= limit_us - 1e-6) break;
      for (auto& x : s.push(e)) seen.push_back(std::move(x));
    }
    CHECK(static_cast<int>(seen.size()) <= b);
    for (auto& x : s.finish()) seen.push_back(std::move(x));
    const auto truth = full.bin(b);
    CHECK(std::equal(truth.begin(), truth.end(), seen[b].image.begin()));
  }
}

TEST_CASE("EVGR round trip and corruption") {
  evaflow::testing::TempDir dir("grid");
  std::mt19937_64 rng(2);
  const auto w = random_window(rng, SensorGeometry{7, 5}, 100, 0, 1000);
  const Grid g = build_unified_voxel_grid(w, make_bin_spec(w, 4));
  save_grid(g, dir.file("g.evgr"));
  const Grid back = load_grid(dir.file("g.evgr"));
  CHECK(back.spec == g.spec);
  CHECK(back.kind == g.kind);
  CHECK(back.data == g.data);
  auto bytes = evaflow::testing::slurp(dir.file("g.evgr"));
  bytes.pop_back();
  std::ofstream(dir.file("bad.evgr"), std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  expect_error(ErrorKind::kFormat, [&] { load_grid(dir.file("bad.evgr")); });
}

}
