#include "evaflow/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "evaflow/error.hpp"
#include "evaflow/mocomp.hpp"

namespace evaflow {

namespace {

void check_pair(const FlowField& pred, const FlowField& gt, const char* op) {
  validate_flow(pred);
  validate_flow(gt);
  if (pred.height != gt.height || pred.width != gt.width)
    throw shape_error(std::string(op) + ": prediction " + std::to_string(pred.height) + "x" +
                      std::to_string(pred.width) + " vs ground truth " + std::to_string(gt.height) + "x" +
                      std::to_string(gt.width));
}

// Applies fn(i) over gt-valid pixels and returns the count; throws when nothing is valid.
template <typename Fn>
std::size_t for_valid(const FlowField& pred, const FlowField& gt, const char* op, Fn&& fn) {
  check_pair(pred, gt, op);
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.valid[i]) continue;
    fn(i);
    ++n;
  }
  if (n == 0) throw data_error(std::string(op) + ": ground truth has no valid pixels");
  return n;
}

double endpoint(const FlowField& pred, const FlowField& gt, std::size_t i) {
  return std::hypot(pred.u[i] - gt.u[i], pred.v[i] - gt.v[i]);
}

double angle_degrees(double cosine) { return std::acos(std::clamp(cosine, -1.0, 1.0)) * 180.0 / std::numbers::pi; }

}  // namespace

double epe(const FlowField& pred, const FlowField& gt) {
  double acc = 0.0;
  const auto n = for_valid(pred, gt, "epe", [&](std::size_t i) { acc += endpoint(pred, gt, i); });
  return acc / static_cast<double>(n);
}

double n_pixel_error(const FlowField& pred, const FlowField& gt, double n_px) {
  std::size_t over = 0;
  const auto n = for_valid(pred, gt, "n_pixel_error", [&](std::size_t i) { over += endpoint(pred, gt, i) > n_px; });
  return 100.0 * static_cast<double>(over) / static_cast<double>(n);
}

double angular_error(const FlowField& pred, const FlowField& gt, AngularConvention convention) {
  double acc = 0.0;
  const auto n = for_valid(pred, gt, "angular_error", [&](std::size_t i) {
    const double pu = pred.u[i], pv = pred.v[i], gu = gt.u[i], gv = gt.v[i];
    if (convention == AngularConvention::kHomogeneous3d) {
      const double num = pu * gu + pv * gv + 1.0;
      const double den = std::sqrt(pu * pu + pv * pv + 1.0) * std::sqrt(gu * gu + gv * gv + 1.0);
      acc += angle_degrees(num / den);
    } else {
      const double np = std::hypot(pu, pv), ng = std::hypot(gu, gv);
      if (np > 0.0 && ng > 0.0) acc += angle_degrees((pu * gu + pv * gv) / (np * ng));
    }
  });
  return acc / static_cast<double>(n);
}

double outlier_pct(const FlowField& pred, const FlowField& gt, OutlierConvention convention) {
  std::size_t over = 0;
  const auto n = for_valid(pred, gt, "outlier_pct", [&](std::size_t i) {
    const double err = endpoint(pred, gt, i);
    bool outlier = err > 3.0;
    if (convention == OutlierConvention::kAbsoluteAndRelative) outlier = outlier && err > 0.05 * std::hypot(gt.u[i], gt.v[i]);
    over += outlier;
  });
  return 100.0 * static_cast<double>(over) / static_cast<double>(n);
}

double l1_loss(const FlowField& pred, const FlowField& gt) {
  double acc = 0.0;
  const auto n = for_valid(pred, gt, "l1_loss",
                           [&](std::size_t i) { acc += std::abs(pred.u[i] - gt.u[i]) + std::abs(pred.v[i] - gt.v[i]); });
  return acc / static_cast<double>(n);
}

EvalReport evaluate(const FlowField& pred, const FlowField& gt, AngularConvention ae, OutlierConvention outlier) {
  EvalReport r;
  r.epe = epe(pred, gt);
  r.ae_degrees = angular_error(pred, gt, ae);
  r.npe_1px = n_pixel_error(pred, gt, 1.0);
  r.npe_3px = n_pixel_error(pred, gt, 3.0);
  r.outlier_pct = outlier_pct(pred, gt, outlier);
  r.n_valid = gt.valid_count();
  return r;
}

EvalReport merge_reports(std::span<const EvalReport> reports) {
  EvalReport merged;
  double weight = 0.0;
  for (const EvalReport& r : reports) {
    const double w = static_cast<double>(r.n_valid);
    merged.epe += w * r.epe;
    merged.ae_degrees += w * r.ae_degrees;
    merged.npe_1px += w * r.npe_1px;
    merged.npe_3px += w * r.npe_3px;
    merged.outlier_pct += w * r.outlier_pct;
    merged.n_valid += r.n_valid;
    weight += w;
  }
  if (weight > 0.0) {
    merged.epe /= weight;
    merged.ae_degrees /= weight;
    merged.npe_1px /= weight;
    merged.npe_3px /= weight;
    merged.outlier_pct /= weight;
  }
  return merged;
}

std::string format_metrics_row(const EvalReport& r) {
  std::ostringstream os;
  os.precision(9);
  os << r.epe << ',' << r.ae_degrees << ',' << r.npe_1px << ',' << r.npe_3px << ',' << r.outlier_pct << ','
     << r.n_valid;
  return os.str();
}

EvalReport parse_metrics_row(const std::string& row) {
  std::vector<std::string> fields;
  std::stringstream ss(row);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (fields.size() != 6) throw format_error("metrics row needs 6 fields: '" + row + "'");
  auto number = [&](int k) {
    double v = 0.0;
    const auto& f = fields[k];
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size()) throw format_error("bad metrics field '" + f + "'");
    return v;
  };
  EvalReport r;
  r.epe = number(0);
  r.ae_degrees = number(1);
  r.npe_1px = number(2);
  r.npe_3px = number(3);
  r.outlier_pct = number(4);
  r.n_valid = static_cast<std::size_t>(number(5));
  return r;
}

void validate_sequence(const FlowSequence& seq) {
  if (!(seq.tau_s > 0.0)) throw invalid_argument("flow sequence needs a positive bin spacing");
  for (std::size_t k = 0; k < seq.flows.size(); ++k) {
    validate_flow(seq.flows[k]);
    if (seq.flows[k].height != seq.flows[0].height || seq.flows[k].width != seq.flows[0].width)
      throw shape_error("flow sequence elements differ in geometry");
    if (k > 0 && !(seq.flows[k].duration_s > seq.flows[k - 1].duration_s))
      throw invalid_argument("flow sequence durations must strictly increase");
  }
}

std::vector<std::vector<TrajectoryPoint>> integrate_trajectory(const FlowSequence& seq, std::span<const Point2> seeds) {
  validate_sequence(seq);
  std::vector<std::vector<TrajectoryPoint>> out;
  out.reserve(seeds.size());
  for (const Point2& seed : seeds) {
    std::vector<TrajectoryPoint> track;
    for (int j = 1; j <= seq.steps(); ++j) {
      const FlowField& f = seq.at(j);
      const bool inside = seed.x >= 0.0 && seed.y >= 0.0 && seed.x <= f.width - 1 && seed.y <= f.height - 1;
      const double du = bilinear_sample(f.u, f.height, f.width, seed.x, seed.y);
      const double dv = bilinear_sample(f.v, f.height, f.width, seed.x, seed.y);
      track.push_back({j, seq.time_s(j), seed.x + du, seed.y + dv, inside});
    }
    out.push_back(std::move(track));
  }
  return out;
}

std::vector<RfwlProfileEntry> dense_rfwl_profile(const FlowSequence& seq, const EventWindow& window) {
  validate_sequence(seq);
  if (seq.flows.empty()) return {};
  const int last = seq.steps();
  const FlowField& final_flow = seq.at(last);
  const std::int64_t t0_us = std::llround(seq.t0_s * 1e6);
  auto safe_rfwl = [](const EventWindow& w, const FlowField& f, double t_ref) -> std::optional<double> {
    const WarpLossReport r = warp_loss_report(w, f, t_ref);
    if (!std::isfinite(r.rfwl)) return std::nullopt;
    return r.rfwl;
  };
  std::vector<RfwlProfileEntry> profile;
  for (int j = 1; j <= last; ++j) {
    RfwlProfileEntry entry;
    entry.step = j;
    entry.t_s = seq.time_s(j);
    const std::int64_t tj_us = static_cast<std::int64_t>(std::floor(entry.t_s * 1e6 + 1e-6));
    const EventWindow sub = slice_window(window, t0_us, std::max(t0_us, tj_us));
    entry.n_events = sub.size();
    if (!sub.empty()) {
      entry.model = safe_rfwl(sub, seq.at(j), seq.t0_s);
      FlowField interpolated = final_flow.scaled(static_cast<double>(j) / last);
      interpolated.duration_s = seq.at(j).duration_s;
      entry.baseline = safe_rfwl(sub, interpolated, seq.t0_s);
    }
    profile.push_back(entry);
  }
  return profile;
}

}  // namespace evaflow
