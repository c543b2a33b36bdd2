#include "evaflow/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "evaflow/error.hpp"

namespace evaflow {

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw io_error("write failed for '" + path + "'");
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

std::vector<std::uint8_t> flow_to_rgb(const FlowField& flow, double max_magnitude) {
  validate_flow(flow);
  if (max_magnitude <= 0.0) {
    for (std::size_t i = 0; i < flow.size(); ++i)
      if (flow.valid[i]) max_magnitude = std::max(max_magnitude, std::hypot(flow.u[i], flow.v[i]));
  }
  std::vector<std::uint8_t> rgb(flow.size() * 3, 0);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (!flow.valid[i]) continue;
    const double mag = std::hypot(flow.u[i], flow.v[i]);
    const double s = max_magnitude > 0.0 ? std::min(1.0, mag / max_magnitude) : 0.0;
    double hue = std::atan2(flow.v[i], flow.u[i]) / (2.0 * std::numbers::pi);
    if (hue < 0.0) hue += 1.0;
    const double h6 = hue * 6.0;
    const int sector = static_cast<int>(std::floor(h6)) % 6;
    const double f = h6 - std::floor(h6);
    const double p = 1.0 - s;
    const double q = 1.0 - s * f;
    const double t = 1.0 - s * (1.0 - f);
    double r = 1.0, g = 1.0, b = 1.0;
    switch (sector) {
      case 0: r = 1.0; g = t; b = p; break;
      case 1: r = q; g = 1.0; b = p; break;
      case 2: r = p; g = 1.0; b = t; break;
      case 3: r = p; g = q; b = 1.0; break;
      case 4: r = t; g = p; b = 1.0; break;
      default: r = 1.0; g = p; b = q; break;
    }
    rgb[3 * i] = to_byte(r);
    rgb[3 * i + 1] = to_byte(g);
    rgb[3 * i + 2] = to_byte(b);
  }
  return rgb;
}

void render_flow_image(const FlowField& flow, const std::string& path, double max_magnitude) {
  const auto rgb = flow_to_rgb(flow, max_magnitude);
  auto out = open_output(path);
  out << "P6\n" << flow.width << " " << flow.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  finish(out, path);
}

void render_count_image(const MCFrame& frame, const std::string& path) {
  const double peak = frame.counts.empty() ? 0.0 : *std::max_element(frame.counts.begin(), frame.counts.end());
  auto out = open_output(path);
  out << "P5\n" << frame.width << " " << frame.height << "\n65535\n";
  for (double c : frame.counts) {
    const auto v = static_cast<std::uint16_t>(peak > 0.0 ? std::lround(c / peak * 65535.0) : 0);
    const char be[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(be, 2);
  }
  finish(out, path);
}

}  // namespace evaflow
