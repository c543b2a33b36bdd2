#include "evaflow/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "evaflow/error.hpp"

namespace evaflow {

MotionModel MotionModel::constant_velocity(double vx, double vy) {
  MotionModel m;
  m.kind = MotionKind::kConstantVelocity;
  m.vx = vx;
  m.vy = vy;
  return m;
}

MotionModel MotionModel::circular_arc(double cx, double cy, double omega) {
  MotionModel m;
  m.kind = MotionKind::kCircularArc;
  m.cx = cx;
  m.cy = cy;
  m.omega = omega;
  return m;
}

Point2 MotionModel::position(Point2 p0, double t) const {
  const Point2 d = displacement(p0, 0.0, t);
  return {p0.x + d.x, p0.y + d.y};
}

Point2 MotionModel::displacement(Point2 p, double t0, double t1) const {
  const double dt = t1 - t0;
  if (kind == MotionKind::kConstantVelocity) return {vx * dt, vy * dt};
  const double angle = omega * dt;
  const double c = std::cos(angle), s = std::sin(angle);
  const double rx = p.x - cx, ry = p.y - cy;
  return {(c * rx - s * ry) - rx, (s * rx + c * ry) - ry};
}

double MotionModel::speed_at(Point2 p) const {
  if (kind == MotionKind::kConstantVelocity) return std::hypot(vx, vy);
  return std::hypot(p.x - cx, p.y - cy) * std::abs(omega);
}

ScenePattern make_lattice_pattern(SensorGeometry geometry, double spacing, double margin) {
  validate_geometry(geometry);
  if (!(spacing > 0.0)) throw invalid_argument("lattice spacing must be positive");
  ScenePattern pattern{{}, geometry};
  int row = 0;
  for (double y = margin; y <= geometry.height - 1 - margin; y += spacing, ++row) {
    int col = 0;
    for (double x = margin; x <= geometry.width - 1 - margin; x += spacing, ++col)
      pattern.points.push_back({x, y, static_cast<std::int8_t>((row + col) % 2 == 0 ? 1 : -1)});
  }
  return pattern;
}

ScenePattern make_random_pattern(SensorGeometry geometry, int count, double margin, std::uint64_t seed) {
  validate_geometry(geometry);
  if (geometry.width - 1 - 2 * margin < 0 || geometry.height - 1 - 2 * margin < 0)
    throw invalid_argument("random pattern margin leaves no room inside the frame");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(margin, geometry.width - 1 - margin);
  std::uniform_real_distribution<double> uy(margin, geometry.height - 1 - margin);
  ScenePattern pattern{{}, geometry};
  pattern.points.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double x = ux(rng);
    const double y = uy(rng);
    pattern.points.push_back({x, y, static_cast<std::int8_t>(rng() & 1 ? 1 : -1)});
  }
  return pattern;
}

ScenePattern make_segment_pattern(SensorGeometry geometry, std::span<const std::pair<Point2, Point2>> segments,
                                  std::int8_t polarity) {
  validate_geometry(geometry);
  ScenePattern pattern{{}, geometry};
  for (const auto& [a, b] : segments) {
    const double length = std::hypot(b.x - a.x, b.y - a.y);
    const int steps = std::max(1, static_cast<int>(std::ceil(length)));
    for (int k = 0; k <= steps; ++k) {
      const double s = static_cast<double>(k) / steps;
      const Point2 p{a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
      if (!geometry.contains(p.x, p.y)) throw invalid_argument("segment leaves the frame");
      pattern.points.push_back({p.x, p.y, polarity});
    }
  }
  return pattern;
}

EventWindow generate_events(const ScenePattern& pattern, const MotionModel& motion, double duration_s,
                            const SimulationOptions& options) {
  if (pattern.points.empty()) throw invalid_argument("generate_events: pattern has no generator points");
  if (!(duration_s > 0.0)) throw invalid_argument("generate_events: duration must be positive");
  if (!(options.rate > 0.0)) throw invalid_argument("generate_events: rate must be positive");
  const SensorGeometry& g = pattern.geometry;
  validate_geometry(g);

  std::vector<Event> events;
  for (std::size_t i = 0; i < pattern.points.size(); ++i) {
    const GeneratorPoint& gp = pattern.points[i];
    if (!g.contains(gp.x0, gp.y0))
      throw invalid_argument("generate_events: generator point " + std::to_string(i) + " starts outside the frame");
    const Point2 p0{gp.x0, gp.y0};
    const double speed = motion.speed_at(p0);
    const double arc_length = speed * duration_s;
    const long steps = speed > 0.0 ? static_cast<long>(std::floor(arc_length * options.rate + 1e-9)) : 0;
    for (long k = 0; k <= steps; ++k) {
      const double t = k == 0 ? 0.0 : static_cast<double>(k) / (options.rate * speed);
      const Point2 p = motion.position(p0, t);
      double x = p.x, y = p.y;
      if (options.round_positions) {
        x = std::nearbyint(x) + 0.0;
        y = std::nearbyint(y) + 0.0;
      }
      if (!g.contains(x, y)) break;
      events.push_back({std::llround(t * 1e6), x, y, gp.polarity});
    }
  }

  const std::int64_t t_end_us = std::llround(duration_s * 1e6);
  if (options.noise_rate > 0.0) {
    std::mt19937_64 rng(options.seed);
    std::poisson_distribution<long> count(options.noise_rate * duration_s * static_cast<double>(g.pixels()));
    std::uniform_int_distribution<std::int64_t> ut(0, t_end_us);
    std::uniform_int_distribution<int> ux(0, g.width - 1), uy(0, g.height - 1);
    const long n = count(rng);
    for (long k = 0; k < n; ++k) {
      const std::int64_t t = ut(rng);
      const int x = ux(rng), y = uy(rng);
      events.push_back({t, static_cast<double>(x), static_cast<double>(y), static_cast<std::int8_t>(rng() & 1 ? 1 : -1)});
    }
  }

  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
  return EventWindow(std::move(events), 0, t_end_us, g);
}

FlowField ground_truth_flow(const MotionModel& motion, double t0_s, double t1_s, SensorGeometry geometry) {
  validate_geometry(geometry);
  if (!(t1_s > t0_s)) throw invalid_argument("ground_truth_flow: t1 must exceed t0");
  FlowField flow(geometry.height, geometry.width, t1_s - t0_s);
  for (int y = 0; y < geometry.height; ++y) {
    for (int x = 0; x < geometry.width; ++x) {
      const Point2 d = motion.displacement({static_cast<double>(x), static_cast<double>(y)}, t0_s, t1_s);
      flow.u[flow.index(y, x)] = d.x;
      flow.v[flow.index(y, x)] = d.y;
    }
  }
  return flow;
}

std::vector<std::vector<Point2>> ground_truth_trajectory(const MotionModel& motion, std::span<const Point2> seeds,
                                                         std::span<const double> times_s) {
  if (!std::is_sorted(times_s.begin(), times_s.end()))
    throw invalid_argument("ground_truth_trajectory: times must be sorted ascending");
  std::vector<std::vector<Point2>> out;
  out.reserve(seeds.size());
  for (const Point2& seed : seeds) {
    std::vector<Point2> track;
    track.reserve(times_s.size());
    for (double t : times_s) track.push_back(motion.position(seed, t));
    out.push_back(std::move(track));
  }
  return out;
}

}  // namespace evaflow
