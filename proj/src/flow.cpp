#include "evaflow/flow.hpp"

#include <cmath>

#include "evaflow/detail/binary_io.hpp"
#include "evaflow/error.hpp"

namespace evaflow {

namespace {

constexpr char kEvafMagic[5] = "EVAF";

template <typename T>
T sample(std::span<const T> raster, int height, int width, double x, double y) {
  if (!(x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1)) return T(0);
  const double fx = std::floor(x), fy = std::floor(y);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const double ax = x - fx, ay = y - fy;
  const std::size_t row0 = static_cast<std::size_t>(y0) * width;
  double acc = (1.0 - ay) * (1.0 - ax) * raster[row0 + x0];
  if (ax > 0.0) acc += (1.0 - ay) * ax * raster[row0 + x0 + 1];
  if (ay > 0.0) {
    const std::size_t row1 = row0 + width;
    acc += ay * (1.0 - ax) * raster[row1 + x0];
    if (ax > 0.0) acc += ay * ax * raster[row1 + x0 + 1];
  }
  return static_cast<T>(acc);
}

template <typename T>
std::vector<T> warp(std::span<const T> input, int channels, const FlowField& flow) {
  validate_flow(flow);
  const std::size_t plane = flow.size();
  if (channels < 1 || input.size() != plane * static_cast<std::size_t>(channels))
    throw shape_error("backward_warp: input holds " + std::to_string(input.size()) + " values, flow raster is " +
                      std::to_string(flow.height) + "x" + std::to_string(flow.width) + " with " +
                      std::to_string(channels) + " channels");
  std::vector<T> out(input.size());
  for (int c = 0; c < channels; ++c) {
    const auto in_c = input.subspan(c * plane, plane);
    T* out_c = out.data() + c * plane;
    for (int y = 0; y < flow.height; ++y) {
      for (int x = 0; x < flow.width; ++x) {
        const std::size_t i = flow.index(y, x);
        out_c[i] = sample<T>(in_c, flow.height, flow.width, x + flow.u[i], y + flow.v[i]);
      }
    }
  }
  return out;
}

}  // namespace

FlowField::FlowField(int h, int w, double duration)
    : height(h), width(w), duration_s(duration), u(size(), 0.0), v(size(), 0.0), valid(size(), 1) {}

FlowField FlowField::uniform(int h, int w, double duration, double du, double dv) {
  FlowField f(h, w, duration);
  std::fill(f.u.begin(), f.u.end(), du);
  std::fill(f.v.begin(), f.v.end(), dv);
  return f;
}

std::size_t FlowField::valid_count() const {
  std::size_t n = 0;
  for (auto m : valid) n += m != 0;
  return n;
}

FlowField FlowField::scaled(double factor) const {
  FlowField out = *this;
  for (auto& value : out.u) value *= factor;
  for (auto& value : out.v) value *= factor;
  return out;
}

void validate_flow(const FlowField& flow) {
  if (flow.height < 1 || flow.width < 1) throw shape_error("flow field has an empty raster");
  if (flow.u.size() != flow.size() || flow.v.size() != flow.size() || flow.valid.size() != flow.size())
    throw shape_error("flow field planes do not match its " + std::to_string(flow.height) + "x" +
                      std::to_string(flow.width) + " raster");
  if (!(flow.duration_s > 0.0) || !std::isfinite(flow.duration_s))
    throw invalid_argument("flow duration must be positive");
}

double bilinear_sample(std::span<const double> raster, int height, int width, double x, double y) {
  return sample<double>(raster, height, width, x, y);
}

float bilinear_sample(std::span<const float> raster, int height, int width, double x, double y) {
  return sample<float>(raster, height, width, x, y);
}

std::vector<double> backward_warp(std::span<const double> input, int channels, const FlowField& flow) {
  return warp<double>(input, channels, flow);
}

std::vector<float> backward_warp(std::span<const float> input, int channels, const FlowField& flow) {
  return warp<float>(input, channels, flow);
}

void save_flow(const FlowField& flow, const std::string& path, bool with_mask) {
  validate_flow(flow);
  detail::ByteWriter w;
  w.reserve(21 + flow.size() * 9);
  w.put_magic(kEvafMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(flow.height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(flow.width));
  w.put<std::uint8_t>(with_mask ? 1 : 0);
  w.put<double>(flow.duration_s);
  for (double value : flow.u) w.put<float>(static_cast<float>(value));
  for (double value : flow.v) w.put<float>(static_cast<float>(value));
  if (with_mask)
    for (auto m : flow.valid) w.put<std::uint8_t>(m ? 1 : 0);
  w.write_to(path);
}

FlowField load_flow(const std::string& path) {
  auto r = detail::ByteReader::from_file(path);
  r.expect_magic(kEvafMagic);
  const int h = static_cast<int>(r.get<std::uint32_t>("H"));
  const int w = static_cast<int>(r.get<std::uint32_t>("W"));
  const auto has_mask = r.get<std::uint8_t>("has_mask");
  const double duration = r.get<double>("duration_s");
  if (h < 1 || w < 1) throw format_error(path + ": flow header has a zero extent");
  if (has_mask > 1) throw format_error(path + ": has_mask must be 0 or 1");
  FlowField flow(h, w, duration);
  const std::size_t n = flow.size();
  if (r.remaining() != n * (8 + has_mask))
    throw format_error(path + ": payload size does not match a " + std::to_string(h) + "x" + std::to_string(w) +
                       " flow");
  for (auto& value : flow.u) value = r.get<float>("u");
  for (auto& value : flow.v) value = r.get<float>("v");
  if (has_mask)
    for (auto& m : flow.valid) m = r.get<std::uint8_t>("mask") ? 1 : 0;
  if (!(duration > 0.0)) throw format_error(path + ": non-positive duration");
  return flow;
}

}  // namespace evaflow
