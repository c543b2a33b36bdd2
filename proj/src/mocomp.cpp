#include "evaflow/mocomp.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "evaflow/error.hpp"

namespace evaflow {

namespace {

void splat_unit(MCFrame& frame, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const double ax = x - fx, ay = y - fy;
  const std::size_t row0 = static_cast<std::size_t>(y0) * frame.width;
  frame.counts[row0 + x0] += (1.0 - ay) * (1.0 - ax);
  if (ax > 0.0) frame.counts[row0 + x0 + 1] += (1.0 - ay) * ax;
  if (ay > 0.0) {
    const std::size_t row1 = row0 + frame.width;
    frame.counts[row1 + x0] += ay * (1.0 - ax);
    if (ax > 0.0) frame.counts[row1 + x0 + 1] += ay * ax;
  }
}

MCFrame compensate(const EventWindow& window, const FlowField* flow, double t_ref_s) {
  const SensorGeometry& g = window.geometry();
  MCFrame frame;
  frame.height = g.height;
  frame.width = g.width;
  frame.counts.assign(g.pixels(), 0.0);
  frame.n_total = window.size();
  frame.t_ref_s = t_ref_s;
  if (flow) {
    validate_flow(*flow);
    if (flow->height != g.height || flow->width != g.width)
      throw shape_error("motion_compensate: flow raster " + std::to_string(flow->height) + "x" +
                        std::to_string(flow->width) + " does not match the sensor " + std::to_string(g.height) + "x" +
                        std::to_string(g.width));
  }
  for (const Event& e : window.events()) {
    double x = e.x, y = e.y;
    if (flow) {
      const double dt = t_ref_s - e.t_seconds();
      const double vx = bilinear_sample(flow->u, g.height, g.width, e.x, e.y) / flow->duration_s;
      const double vy = bilinear_sample(flow->v, g.height, g.width, e.x, e.y) / flow->duration_s;
      x += dt * vx;
      y += dt * vy;
    }
    if (!g.contains(x, y)) continue;
    splat_unit(frame, x, y);
    ++frame.n_in;
  }
  return frame;
}

std::vector<double> normalized(const MCFrame& frame, double total) {
  std::vector<double> out(frame.counts.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = frame.counts[i] / total;
  return out;
}

}  // namespace

double MCFrame::sum() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

MCFrame motion_compensate(const EventWindow& window, const FlowField& flow, double t_ref_s) {
  return compensate(window, &flow, t_ref_s);
}

MCFrame event_count_image(const EventWindow& window, double t_ref_s) { return compensate(window, nullptr, t_ref_s); }

double population_variance(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / n;
}

WarpLossReport warp_loss_report(const EventWindow& window, const FlowField& flow, double t_ref_s) {
  // Both frames go through the same path so a zero flow reproduces the raw frame bit for bit.
  const FlowField zero(flow.height, flow.width, flow.duration_s);
  const MCFrame raw = motion_compensate(window, zero, t_ref_s);
  const MCFrame comp = motion_compensate(window, flow, t_ref_s);
  WarpLossReport r;
  r.n_total = window.size();
  r.n_in = comp.n_in;
  r.var_raw = population_variance(raw.counts);
  r.var_compensated = population_variance(comp.counts);
  r.sum_raw = raw.sum();
  r.sum_compensated = comp.sum();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  r.fwl = r.var_raw > 0.0 ? r.var_compensated / r.var_raw : nan;
  if (r.sum_raw > 0.0 && r.sum_compensated > 0.0) {
    r.var_raw_normalized = population_variance(normalized(raw, r.sum_raw));
    r.var_compensated_normalized = population_variance(normalized(comp, r.sum_compensated));
    r.rfwl = r.var_raw_normalized > 0.0 ? r.var_compensated_normalized / r.var_raw_normalized : nan;
  } else {
    r.var_raw_normalized = r.var_compensated_normalized = nan;
    r.rfwl = nan;
  }
  return r;
}

double fwl(const EventWindow& window, const FlowField& flow, double t_ref_s) {
  if (window.empty()) throw numeric_error("FWL undefined: empty event window");
  const WarpLossReport r = warp_loss_report(window, flow, t_ref_s);
  if (!(r.var_raw > 0.0)) throw numeric_error("FWL undefined: zero-flow frame has zero variance");
  return r.fwl;
}

double rfwl(const EventWindow& window, const FlowField& flow, double t_ref_s) {
  const WarpLossReport r = warp_loss_report(window, flow, t_ref_s);
  if (!(r.sum_raw > 0.0)) throw numeric_error("RFWL undefined: zero-flow frame has zero total count");
  if (!(r.sum_compensated > 0.0)) throw numeric_error("RFWL undefined: compensated frame has zero total count");
  if (!(r.var_raw_normalized > 0.0)) throw numeric_error("RFWL undefined: normalized raw frame has zero variance");
  return r.rfwl;
}

}  // namespace evaflow
