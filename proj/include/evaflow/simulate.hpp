#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "evaflow/events.hpp"
#include "evaflow/flow.hpp"

namespace evaflow {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

enum class MotionKind { kConstantVelocity, kCircularArc };

/// Rigid image-plane motion with a closed-form position function.
struct MotionModel {
  MotionKind kind = MotionKind::kConstantVelocity;
  double vx = 0.0, vy = 0.0;           // px/s (constant velocity)
  double cx = 0.0, cy = 0.0, omega = 0.0;  // center px, rad/s (circular arc)

  static MotionModel constant_velocity(double vx, double vy);
  static MotionModel circular_arc(double cx, double cy, double omega);

  /// Position at time t (seconds) of the point that sits at p0 at time 0.
  Point2 position(Point2 p0, double t) const;
  /// Displacement from t0 to t1 of the scene point located at p at time t0.
  Point2 displacement(Point2 p, double t0, double t1) const;
  /// Trajectory speed (px/s) of a point located at p.
  double speed_at(Point2 p) const;
};

struct GeneratorPoint {
  double x0 = 0.0;
  double y0 = 0.0;
  std::int8_t polarity = 1;
};

struct ScenePattern {
  std::vector<GeneratorPoint> points;
  SensorGeometry geometry;
};

/// Corner lattice with alternating polarity, `spacing` px apart, `margin` px from the border.
ScenePattern make_lattice_pattern(SensorGeometry geometry, double spacing, double margin);
/// `count` points drawn uniformly from the box [margin, W-1-margin] x [margin, H-1-margin].
ScenePattern make_random_pattern(SensorGeometry geometry, int count, double margin, std::uint64_t seed);
/// Straight segments of generator points, one point per pixel along each segment.
ScenePattern make_segment_pattern(SensorGeometry geometry, std::span<const std::pair<Point2, Point2>> segments,
                                  std::int8_t polarity = 1);

struct SimulationOptions {
  double rate = 1.0;          // events per pixel of traversal
  bool round_positions = true;
  double noise_rate = 0.0;    // background events / s / pixel
  std::uint64_t seed = 0;     // only consumed by the noise generator
};

/// Emits events at arc-length spacing 1/rate along each point's trajectory over
/// [0, duration]; a point stops emitting once it leaves the frame.
EventWindow generate_events(const ScenePattern& pattern, const MotionModel& motion, double duration_s,
                            const SimulationOptions& options = {});

/// Dense displacement pos(p, t1) - pos(p, t0) at every pixel, all valid.
FlowField ground_truth_flow(const MotionModel& motion, double t0_s, double t1_s, SensorGeometry geometry);

/// Exact positions of every seed (its location at time 0) at each requested time.
std::vector<std::vector<Point2>> ground_truth_trajectory(const MotionModel& motion, std::span<const Point2> seeds,
                                                         std::span<const double> times_s);

}  // namespace evaflow
