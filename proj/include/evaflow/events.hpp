#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace evaflow {

/// One sensor spike. Timestamps are integer microseconds; coordinates may be
/// fractional for undistorted streams. Polarity is always -1 or +1 in memory.
struct Event {
  std::int64_t t_us = 0;
  double x = 0.0;
  double y = 0.0;
  std::int8_t p = 1;

  double t_seconds() const { return static_cast<double>(t_us) * 1e-6; }
  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
  int width = 0;
  int height = 0;

  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1;
  }
  std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

void validate_geometry(const SensorGeometry& geometry);

/// Time-ordered events over [t_start_us, t_end_us]. Immutable once built.
class EventWindow {
 public:
  EventWindow() = default;
  /// Validates ordering, bounds and polarity; throws evaflow::Error on violation.
  EventWindow(std::vector<Event> events, std::int64_t t_start_us, std::int64_t t_end_us,
              SensorGeometry geometry);

  /// Window spanning the first to the last event (0,0 when empty).
  static EventWindow covering(std::vector<Event> events, SensorGeometry geometry);

  std::span<const Event> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  std::int64_t t_start_us() const { return t_start_us_; }
  std::int64_t t_end_us() const { return t_end_us_; }
  double t_start_seconds() const { return static_cast<double>(t_start_us_) * 1e-6; }
  double t_end_seconds() const { return static_cast<double>(t_end_us_) * 1e-6; }
  const SensorGeometry& geometry() const { return geometry_; }

 private:
  std::vector<Event> events_;
  std::int64_t t_start_us_ = 0;
  std::int64_t t_end_us_ = 0;
  SensorGeometry geometry_;
};

enum class IntervalMode {
  kClosed,    // t0 <= t <= t1
  kHalfOpen,  // t0 <= t <  t1
};

EventWindow slice_window(const EventWindow& window, std::int64_t t0_us, std::int64_t t1_us,
                         IntervalMode mode = IntervalMode::kClosed);

enum class EventFormat { kBinary, kText };

/// EVT1 binary or "# evt1 W H" text. Raw polarity {0,1} is mapped to {-1,+1}.
EventWindow load_events(const std::string& path, EventFormat format);
/// Picks the format from the extension (.txt / .csv are text, anything else binary).
EventWindow load_events(const std::string& path);

void save_events(const EventWindow& window, const std::string& path, EventFormat format);

std::vector<char> encode_evt1(const EventWindow& window);
EventWindow decode_evt1(std::vector<char> bytes, const std::string& origin = "<memory>");

}  // namespace evaflow
