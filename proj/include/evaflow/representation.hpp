#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evaflow/events.hpp"

namespace evaflow {

/// Temporal layout of a voxelized window: B bins centered at t0 + b * tau.
struct BinSpec {
  int bins = 0;
  double tau_s = 0.0;
  double t0_s = 0.0;
  SensorGeometry geometry;

  double center_s(int b) const { return t0_s + b * tau_s; }
  double duration_s() const { return (bins - 1) * tau_s; }
  friend bool operator==(const BinSpec&, const BinSpec&) = default;
};

void validate_bin_spec(const BinSpec& spec);

/// Bin spec whose first center sits at the window start and whose last center sits at
/// the window end, i.e. tau = (t_end - t_start) / (B - 1).
BinSpec make_bin_spec(const EventWindow& window, int bins);

enum class GridKind : std::uint8_t { kVoxelGrid = 0, kUnifiedVoxelGrid = 1 };

/// B x H x W float tensor, bin-major then row-major.
struct Grid {
  BinSpec spec;
  GridKind kind = GridKind::kUnifiedVoxelGrid;
  std::vector<float> data;

  int bins() const { return spec.bins; }
  int height() const { return spec.geometry.height; }
  int width() const { return spec.geometry.width; }
  std::size_t bin_size() const { return spec.geometry.pixels(); }
  float at(int b, int y, int x) const { return data[b * bin_size() + static_cast<std::size_t>(y) * width() + x]; }
  std::span<const float> bin(int b) const { return {data.data() + b * bin_size(), bin_size()}; }
};

/// Observability counters; events are never rejected for falling outside a kernel.
struct BuildReport {
  std::size_t accumulated = 0;
  std::size_t dropped_temporal = 0;
  std::size_t dropped_spatial = 0;
};

/// Classic voxel grid: timestamps normalized by the first and last event.
Grid build_voxel_grid(const EventWindow& window, int bins, BuildReport* report = nullptr);

/// Unified voxel grid: every bin integrates |t - t_b| < tau with the same triangle kernel.
Grid build_unified_voxel_grid(const EventWindow& window, const BinSpec& spec, BuildReport* report = nullptr);

/// Triangle temporal weights for one timestamp: bin `lower` gets `w_lower`, bin
/// `lower + 1` gets 1 - w_lower. Bins outside [0, B-1] must be ignored by the caller.
struct TemporalWeights {
  int lower = 0;
  double w_lower = 0.0;
  double w_upper = 0.0;
};
TemporalWeights uvg_temporal_weights(const BinSpec& spec, std::int64_t t_us);

struct EmittedBin {
  int index = 0;
  std::vector<float> image;  // H x W
};

/// Incremental UVG builder. Bin b is finalized as soon as an event with t >= t_b + tau
/// arrives, or at finish(). Emitted bins match build_unified_voxel_grid bit for bit.
class UvgStreamer {
 public:
  explicit UvgStreamer(BinSpec spec);

  std::vector<EmittedBin> push(const Event& event);
  std::vector<EmittedBin> push(std::span<const Event> events);
  /// Emits every remaining bin, including all-zero ones.
  std::vector<EmittedBin> finish();

  int next_bin() const { return next_emit_; }
  bool finished() const { return next_emit_ >= spec_.bins; }
  const BinSpec& spec() const { return spec_; }
  const BuildReport& report() const { return report_; }

 private:
  void emit_until(int end, std::vector<EmittedBin>& out);
  std::vector<double>& plane(int b);

  BinSpec spec_;
  std::vector<std::vector<double>> planes_;
  int next_emit_ = 0;
  std::optional<std::int64_t> last_t_us_;
  BuildReport report_;
};

/// Assembles a full grid from streamer output (bins must arrive complete and in order).
Grid assemble_grid(const BinSpec& spec, std::span<const EmittedBin> bins);

void save_grid(const Grid& grid, const std::string& path);
Grid load_grid(const std::string& path);
std::vector<char> encode_evgr(const Grid& grid);

}  // namespace evaflow
