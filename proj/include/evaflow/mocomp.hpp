#pragma once

#include <span>
#include <vector>

#include "evaflow/events.hpp"
#include "evaflow/flow.hpp"

namespace evaflow {

/// Motion-compensated event count image. Each retained event adds weight 1,
/// bilinearly splatted, regardless of polarity.
struct MCFrame {
  int height = 0;
  int width = 0;
  std::vector<double> counts;
  std::size_t n_in = 0;
  std::size_t n_total = 0;
  double t_ref_s = 0.0;

  double sum() const;
};

/// Moves every event to t_ref along the flow sampled at its own position:
/// x' = x + (t_ref - t) * V(x, y) / duration. Events whose target leaves
/// [0,W-1]x[0,H-1] are dropped.
MCFrame motion_compensate(const EventWindow& window, const FlowField& flow, double t_ref_s);

/// Same as motion_compensate with a zero flow field.
MCFrame event_count_image(const EventWindow& window, double t_ref_s);

/// Population variance (divide by N) over all pixels.
double population_variance(std::span<const double> values);

struct WarpLossReport {
  std::size_t n_total = 0;
  std::size_t n_in = 0;
  double var_raw = 0.0;             // sigma^2(I(E, 0))
  double var_compensated = 0.0;     // sigma^2(I(E, V))
  double sum_raw = 0.0;
  double sum_compensated = 0.0;
  double var_raw_normalized = 0.0;  // sigma^2(I(E, 0) / sum)
  double var_compensated_normalized = 0.0;
  double fwl = 0.0;
  double rfwl = 0.0;
};

/// Computes both losses from one pair of MC frames. FWL / RFWL fields are NaN
/// when undefined for this window; use fwl() / rfwl() for the throwing variants.
WarpLossReport warp_loss_report(const EventWindow& window, const FlowField& flow, double t_ref_s);

/// sigma^2(I(E,V)) / sigma^2(I(E,0)); throws when the raw frame has zero variance.
double fwl(const EventWindow& window, const FlowField& flow, double t_ref_s);

/// Variance ratio of the frames after dividing each by its own total count;
/// throws when either frame has zero total count.
double rfwl(const EventWindow& window, const FlowField& flow, double t_ref_s);

}  // namespace evaflow
