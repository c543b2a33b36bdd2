#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace evaflow {

/// Per-pixel displacement (u, v) in pixels accumulated over `duration_s` seconds.
struct FlowField {
  int height = 0;
  int width = 0;
  double duration_s = 0.0;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<std::uint8_t> valid;  // 1 where the displacement is defined

  FlowField() = default;
  FlowField(int h, int w, double duration);
  static FlowField uniform(int h, int w, double duration, double du, double dv);

  std::size_t size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * width + x; }
  std::size_t valid_count() const;

  /// Same geometry and mask, displacements multiplied by `factor`, duration kept.
  FlowField scaled(double factor) const;
};

void validate_flow(const FlowField& flow);

/// Bilinear interpolation with zero padding: positions outside [0,W-1]x[0,H-1] yield 0.
double bilinear_sample(std::span<const double> raster, int height, int width, double x, double y);
float bilinear_sample(std::span<const float> raster, int height, int width, double x, double y);

/// out(c, y, x) = bilinear_sample(in_c, x + u(y,x), y + v(y,x)) for each of `channels` planes.
std::vector<double> backward_warp(std::span<const double> input, int channels, const FlowField& flow);
std::vector<float> backward_warp(std::span<const float> input, int channels, const FlowField& flow);

/// EVAF flow files (f32 planes, optional u8 mask).
void save_flow(const FlowField& flow, const std::string& path, bool with_mask = true);
FlowField load_flow(const std::string& path);

}  // namespace evaflow
