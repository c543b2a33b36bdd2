#include "evaflow/representation.hpp"

#include <cmath>
#include <string>

#include "evaflow/detail/binary_io.hpp"
#include "evaflow/error.hpp"

namespace evaflow {

namespace {

constexpr char kEvgrMagic[5] = "EVGR";

// Kernel positions within 1e-9 of a bin center are snapped onto it so events
// stamped exactly at t_b hit the kernel peak despite decimal tau values.
constexpr double kSnap = 1e-9;

struct SpatialSplat {
  std::size_t index[4];
  double weight[4];
  int count = 0;
};

inline bool spatial_splat(const SensorGeometry& g, double x, double y, SpatialSplat& s) {
  if (!g.contains(x, y)) return false;
  const double fx0 = std::floor(x), fy0 = std::floor(y);
  const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
  const double ax = x - fx0, ay = y - fy0;
  const double wx[2] = {1.0 - ax, ax};
  const double wy[2] = {1.0 - ay, ay};
  s.count = 0;
  for (int dy = 0; dy < 2; ++dy) {
    if (wy[dy] == 0.0) continue;
    for (int dx = 0; dx < 2; ++dx) {
      if (wx[dx] == 0.0) continue;
      s.index[s.count] = static_cast<std::size_t>(y0 + dy) * g.width + static_cast<std::size_t>(x0 + dx);
      s.weight[s.count] = wy[dy] * wx[dx];
      ++s.count;
    }
  }
  return true;
}

inline TemporalWeights weights_from_position(double a) {
  const double nearest = std::nearbyint(a);
  if (std::abs(a - nearest) < kSnap) a = nearest;
  const double lower = std::floor(a);
  const double frac = a - lower;
  return {static_cast<int>(lower), 1.0 - frac, frac};
}

// Adds p * w_t * w_xy for every non-zero weight whose bin lies in [0, B).
// Returns false when no temporal weight lands inside the grid.
template <typename PlaneFor>
inline bool accumulate(const TemporalWeights& tw, int bins, const SpatialSplat& s, double polarity,
                       PlaneFor&& plane_for) {
  bool touched = false;
  const int b_idx[2] = {tw.lower, tw.lower + 1};
  const double b_w[2] = {tw.w_lower, tw.w_upper};
  for (int k = 0; k < 2; ++k) {
    if (b_w[k] == 0.0 || b_idx[k] < 0 || b_idx[k] >= bins) continue;
    double* plane = plane_for(b_idx[k]);
    const double pw = polarity * b_w[k];
    for (int c = 0; c < s.count; ++c) plane[s.index[c]] += pw * s.weight[c];
    touched = true;
  }
  return touched;
}

std::vector<float> to_float(const std::vector<double>& acc) {
  std::vector<float> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

}  // namespace

void validate_bin_spec(const BinSpec& spec) {
  validate_geometry(spec.geometry);
  if (spec.bins < 2) throw invalid_argument("bin spec needs at least 2 bins, got " + std::to_string(spec.bins));
  if (!(spec.tau_s > 0.0) || !std::isfinite(spec.tau_s))
    throw invalid_argument("bin spacing tau must be positive and finite");
  if (!std::isfinite(spec.t0_s)) throw invalid_argument("bin origin t0 must be finite");
}

BinSpec make_bin_spec(const EventWindow& window, int bins) {
  if (bins < 2) throw invalid_argument("bin spec needs at least 2 bins, got " + std::to_string(bins));
  const std::int64_t span = window.t_end_us() - window.t_start_us();
  if (span <= 0) throw invalid_argument("cannot derive a bin spacing from a zero-length window");
  BinSpec spec{bins, static_cast<double>(span) * 1e-6 / (bins - 1), window.t_start_seconds(), window.geometry()};
  return spec;
}

TemporalWeights uvg_temporal_weights(const BinSpec& spec, std::int64_t t_us) {
  const double t0_us = spec.t0_s * 1e6;
  const double tau_us = spec.tau_s * 1e6;
  return weights_from_position((static_cast<double>(t_us) - t0_us) / tau_us);
}

Grid build_voxel_grid(const EventWindow& window, int bins, BuildReport* report) {
  if (window.empty()) throw invalid_argument("build_voxel_grid: empty window leaves the time normalization undefined");
  if (bins < 2) throw invalid_argument("build_voxel_grid: need at least 2 bins");
  const auto events = window.events();
  const std::int64_t t1 = events.front().t_us;
  const std::int64_t tn = events.back().t_us;
  const std::int64_t span = tn - t1;

  Grid grid;
  grid.kind = GridKind::kVoxelGrid;
  const std::int64_t nominal = span > 0 ? span : std::max<std::int64_t>(window.t_end_us() - window.t_start_us(), 1);
  grid.spec = BinSpec{bins, static_cast<double>(nominal) * 1e-6 / (bins - 1), static_cast<double>(t1) * 1e-6,
                      window.geometry()};

  const std::size_t plane_size = window.geometry().pixels();
  std::vector<double> acc(plane_size * bins, 0.0);
  BuildReport local;
  SpatialSplat splat;
  for (const Event& e : events) {
    if (!spatial_splat(window.geometry(), e.x, e.y, splat)) {
      ++local.dropped_spatial;
      continue;
    }
    // Single-instant windows put every event at t* = 0.
    const double t_star =
        span > 0 ? static_cast<double>((bins - 1) * (e.t_us - t1)) / static_cast<double>(span) : 0.0;
    const double lower = std::floor(t_star);
    const TemporalWeights tw{static_cast<int>(lower), 1.0 - (t_star - lower), t_star - lower};
    if (accumulate(tw, bins, splat, e.p, [&](int b) { return acc.data() + b * plane_size; }))
      ++local.accumulated;
    else
      ++local.dropped_temporal;
  }
  grid.data = to_float(acc);
  if (report) *report = local;
  return grid;
}

Grid build_unified_voxel_grid(const EventWindow& window, const BinSpec& spec, BuildReport* report) {
  validate_bin_spec(spec);
  if (!(spec.geometry == window.geometry())) throw shape_error("bin spec geometry differs from the window geometry");
  const double t0_us = spec.t0_s * 1e6;
  const double t_last_us = (spec.t0_s + spec.duration_s()) * 1e6;
  if (t0_us > static_cast<double>(window.t_start_us()) + 1.0 ||
      t_last_us < static_cast<double>(window.t_end_us()) - 1.0) {
    throw invalid_argument("bin spec [" + std::to_string(t0_us) + ", " + std::to_string(t_last_us) +
                           "] us does not cover the window [" + std::to_string(window.t_start_us()) + ", " +
                           std::to_string(window.t_end_us()) + "] us");
  }

  const std::size_t plane_size = spec.geometry.pixels();
  std::vector<double> acc(plane_size * spec.bins, 0.0);
  BuildReport local;
  SpatialSplat splat;
  for (const Event& e : window.events()) {
    if (!spatial_splat(spec.geometry, e.x, e.y, splat)) {
      ++local.dropped_spatial;
      continue;
    }
    const TemporalWeights tw = uvg_temporal_weights(spec, e.t_us);
    if (accumulate(tw, spec.bins, splat, e.p, [&](int b) { return acc.data() + b * plane_size; }))
      ++local.accumulated;
    else
      ++local.dropped_temporal;
  }
  Grid grid{spec, GridKind::kUnifiedVoxelGrid, to_float(acc)};
  if (report) *report = local;
  return grid;
}

UvgStreamer::UvgStreamer(BinSpec spec) : spec_(spec) {
  validate_bin_spec(spec_);
  planes_.resize(spec_.bins);
}

std::vector<double>& UvgStreamer::plane(int b) {
  auto& p = planes_[b];
  if (p.empty()) p.assign(spec_.geometry.pixels(), 0.0);
  return p;
}

void UvgStreamer::emit_until(int end, std::vector<EmittedBin>& out) {
  end = std::min(end, spec_.bins);
  for (; next_emit_ < end; ++next_emit_) {
    out.push_back({next_emit_, to_float(plane(next_emit_))});
    planes_[next_emit_].clear();
    planes_[next_emit_].shrink_to_fit();
  }
}

std::vector<EmittedBin> UvgStreamer::push(const Event& event) {
  std::vector<EmittedBin> out;
  const TemporalWeights tw = uvg_temporal_weights(spec_, event.t_us);
  if (last_t_us_ && event.t_us < *last_t_us_) {
    std::string touched;
    const int b_idx[2] = {tw.lower, tw.lower + 1};
    const double b_w[2] = {tw.w_lower, tw.w_upper};
    for (int k = 0; k < 2; ++k) {
      if (b_w[k] != 0.0 && b_idx[k] >= 0 && b_idx[k] < next_emit_)
        touched += (touched.empty() ? "" : ",") + std::to_string(b_idx[k]);
    }
    throw data_error("stream_bins: out-of-order event t=" + std::to_string(event.t_us) + " us after t=" +
                     std::to_string(*last_t_us_) + " us; already-emitted bins it would touch: {" + touched + "}");
  }
  last_t_us_ = event.t_us;

  // Every bin whose kernel support ends at or before this event is final.
  const double t0_us = spec_.t0_s * 1e6;
  const double tau_us = spec_.tau_s * 1e6;
  const double a = (static_cast<double>(event.t_us) - t0_us) / tau_us;
  const double nearest = std::nearbyint(a);
  const double snapped = std::abs(a - nearest) < kSnap ? nearest : a;
  if (snapped >= 1.0) {
    const double limit = std::floor(snapped);  // bins b with b + 1 <= a
    emit_until(limit >= spec_.bins ? spec_.bins : static_cast<int>(limit), out);
  }

  SpatialSplat splat;
  if (!spatial_splat(spec_.geometry, event.x, event.y, splat)) {
    ++report_.dropped_spatial;
    return out;
  }
  if (accumulate(tw, spec_.bins, splat, event.p, [&](int b) { return plane(b).data(); }))
    ++report_.accumulated;
  else
    ++report_.dropped_temporal;
  return out;
}

std::vector<EmittedBin> UvgStreamer::push(std::span<const Event> events) {
  std::vector<EmittedBin> out;
  for (const Event& e : events) {
    auto emitted = push(e);
    for (auto& b : emitted) out.push_back(std::move(b));
  }
  return out;
}

std::vector<EmittedBin> UvgStreamer::finish() {
  std::vector<EmittedBin> out;
  emit_until(spec_.bins, out);
  return out;
}

Grid assemble_grid(const BinSpec& spec, std::span<const EmittedBin> bins) {
  validate_bin_spec(spec);
  if (static_cast<int>(bins.size()) != spec.bins)
    throw shape_error("assemble_grid: expected " + std::to_string(spec.bins) + " bins, got " +
                      std::to_string(bins.size()));
  Grid grid{spec, GridKind::kUnifiedVoxelGrid, {}};
  grid.data.reserve(spec.bins * spec.geometry.pixels());
  for (int b = 0; b < spec.bins; ++b) {
    if (bins[b].index != b || bins[b].image.size() != spec.geometry.pixels())
      throw shape_error("assemble_grid: bin " + std::to_string(b) + " missing or malformed");
    grid.data.insert(grid.data.end(), bins[b].image.begin(), bins[b].image.end());
  }
  return grid;
}

std::vector<char> encode_evgr(const Grid& grid) {
  detail::ByteWriter w;
  w.reserve(33 + grid.data.size() * 4);
  w.put_magic(kEvgrMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.bins()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.height()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.width()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(grid.kind));
  w.put<double>(grid.spec.tau_s);
  w.put<double>(grid.spec.t0_s);
  w.put_bytes(grid.data.data(), grid.data.size() * sizeof(float));
  return w.bytes();
}

void save_grid(const Grid& grid, const std::string& path) {
  detail::ByteWriter w;
  const auto bytes = encode_evgr(grid);
  w.put_bytes(bytes.data(), bytes.size());
  w.write_to(path);
}

Grid load_grid(const std::string& path) {
  auto r = detail::ByteReader::from_file(path);
  r.expect_magic(kEvgrMagic);
  Grid grid;
  grid.spec.bins = static_cast<int>(r.get<std::uint32_t>("B"));
  grid.spec.geometry.height = static_cast<int>(r.get<std::uint32_t>("H"));
  grid.spec.geometry.width = static_cast<int>(r.get<std::uint32_t>("W"));
  const auto kind = r.get<std::uint8_t>("kind");
  if (kind > 1) throw format_error(path + ": unknown grid kind " + std::to_string(kind));
  grid.kind = static_cast<GridKind>(kind);
  grid.spec.tau_s = r.get<double>("tau_s");
  grid.spec.t0_s = r.get<double>("t0_s");
  if (grid.spec.bins < 1 || grid.spec.geometry.height < 1 || grid.spec.geometry.width < 1)
    throw format_error(path + ": grid header has a zero extent");
  const std::size_t n = static_cast<std::size_t>(grid.spec.bins) * grid.spec.geometry.pixels();
  if (r.remaining() != n * sizeof(float))
    throw format_error(path + ": payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
                       std::to_string(n * sizeof(float)));
  grid.data.resize(n);
  r.get_bytes(grid.data.data(), n * sizeof(float), "values");
  return grid;
}

}  // namespace evaflow
