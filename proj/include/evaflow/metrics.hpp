#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evaflow/events.hpp"
#include "evaflow/flow.hpp"
#include "evaflow/simulate.hpp"

namespace evaflow {

enum class AngularConvention {
  kHomogeneous3d,  // angle between (u, v, 1) vectors
  kPlanar2d,       // angle between (u, v) vectors; pixels where either is zero count as 0
};

enum class OutlierConvention {
  kAbsoluteAndRelative,  // EPE > 3 px and EPE > 5% of |gt|
  kAbsoluteOnly,         // EPE > 3 px
};

/// Mean endpoint error over pixels valid in `gt`.
double epe(const FlowField& pred, const FlowField& gt);
/// Percentage of valid pixels with endpoint error strictly greater than `n_px`.
double n_pixel_error(const FlowField& pred, const FlowField& gt, double n_px);
/// Mean angular error in degrees.
double angular_error(const FlowField& pred, const FlowField& gt,
                     AngularConvention convention = AngularConvention::kHomogeneous3d);
double outlier_pct(const FlowField& pred, const FlowField& gt,
                   OutlierConvention convention = OutlierConvention::kAbsoluteAndRelative);
/// Mean over valid pixels of |du| + |dv|.
double l1_loss(const FlowField& pred, const FlowField& gt);

struct EvalReport {
  double epe = 0.0;
  double ae_degrees = 0.0;
  double npe_1px = 0.0;
  double npe_3px = 0.0;
  double outlier_pct = 0.0;
  std::size_t n_valid = 0;
};

EvalReport evaluate(const FlowField& pred, const FlowField& gt,
                    AngularConvention ae = AngularConvention::kHomogeneous3d,
                    OutlierConvention outlier = OutlierConvention::kAbsoluteAndRelative);
/// Weighted average by n_valid, merged in the given order.
EvalReport merge_reports(std::span<const EvalReport> reports);

inline constexpr const char* kMetricsHeader = "epe,ae_deg,npe1,npe3,outlier_pct,n_valid";
std::string format_metrics_row(const EvalReport& report);
EvalReport parse_metrics_row(const std::string& row);

/// Time-dense output: element j-1 holds V_{0,j}, the displacement from t0 to t0 + j * tau.
struct FlowSequence {
  std::vector<FlowField> flows;
  double t0_s = 0.0;
  double tau_s = 0.0;

  int steps() const { return static_cast<int>(flows.size()); }
  const FlowField& at(int j) const { return flows.at(j - 1); }
  double time_s(int j) const { return t0_s + j * tau_s; }
};

void validate_sequence(const FlowSequence& seq);

struct TrajectoryPoint {
  int step = 0;
  double t_s = 0.0;
  double x = 0.0;
  double y = 0.0;
  bool in_bounds = true;  // false when the seed lies outside the raster (zero displacement used)
};

/// Anchored integration: point j = seed + V_{0,j}(seed), bilinearly sampled.
std::vector<std::vector<TrajectoryPoint>> integrate_trajectory(const FlowSequence& seq, std::span<const Point2> seeds);

struct RfwlProfileEntry {
  int step = 0;
  double t_s = 0.0;
  std::size_t n_events = 0;
  std::optional<double> model;     // RFWL of V_{0,j}
  std::optional<double> baseline;  // RFWL of (j / (B-1)) * V_{0,B-1}
};

/// RFWL of each intermediate flow on the events of [t0, t_j], compensated to t0,
/// next to the linearly interpolated final-flow baseline.
std::vector<RfwlProfileEntry> dense_rfwl_profile(const FlowSequence& seq, const EventWindow& window);

}  // namespace evaflow
