#include "evaflow/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evaflow/detail/binary_io.hpp"
#include "evaflow/error.hpp"

namespace evaflow {

namespace {

constexpr char kEvt1Magic[5] = "EVT1";
constexpr std::uint32_t kEvt1Version = 1;
constexpr std::size_t kEvt1RecordBytes = 14;

std::string describe(const Event& e) {
  std::ostringstream os;
  os << "(t=" << e.t_us << ", x=" << e.x << ", y=" << e.y << ", p=" << int(e.p) << ")";
  return os.str();
}

// Validates a decoded stream and builds the covering window.
EventWindow finish_stream(std::vector<Event> events, SensorGeometry geometry, const std::string& origin) {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].t_us < events[i - 1].t_us) {
      throw data_error(origin + ": timestamp regression at index " + std::to_string(i) + " (t=" +
                       std::to_string(events[i].t_us) + " after t=" + std::to_string(events[i - 1].t_us) + ")");
    }
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!geometry.contains(events[i].x, events[i].y))
      throw data_error(origin + ": coordinate out of bounds at index " + std::to_string(i) + " " + describe(events[i]));
  }
  return EventWindow::covering(std::move(events), geometry);
}

std::int8_t polarity_from_raw(long raw, const std::string& where) {
  if (raw == 0 || raw == -1) return -1;
  if (raw == 1) return 1;
  throw format_error(where + ": polarity must be 0 or 1, got " + std::to_string(raw));
}

std::uint16_t to_q8(double v, const char* axis) {
  const double scaled = v * 256.0;
  const double rounded = std::nearbyint(scaled);
  if (rounded < 0.0 || rounded > 65535.0)
    throw data_error(std::string("EVT1 cannot represent ") + axis + "=" + std::to_string(v) +
                     " (u16 8.8 fixed point covers 0..255.996)");
  if (rounded != scaled)
    throw data_error(std::string("EVT1 cannot represent ") + axis + "=" + std::to_string(v) +
                     " exactly at 1/256 px resolution");
  return static_cast<std::uint16_t>(rounded);
}

template <typename T>
T parse_number(std::string_view token, const std::string& where) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r')) token.remove_suffix(1);
  T value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw format_error(where + ": cannot parse '" + std::string(token) + "'");
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void validate_geometry(const SensorGeometry& geometry) {
  if (geometry.width < 1 || geometry.height < 1)
    throw invalid_argument("sensor geometry must be at least 1x1, got " + std::to_string(geometry.width) + "x" +
                           std::to_string(geometry.height));
}

EventWindow::EventWindow(std::vector<Event> events, std::int64_t t_start_us, std::int64_t t_end_us,
                         SensorGeometry geometry)
    : events_(std::move(events)), t_start_us_(t_start_us), t_end_us_(t_end_us), geometry_(geometry) {
  validate_geometry(geometry_);
  if (t_start_us_ > t_end_us_) throw invalid_argument("event window start after end");
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const Event& e = events_[i];
    if (e.p != 1 && e.p != -1) throw data_error("event " + std::to_string(i) + " has polarity outside {-1,+1}");
    if (e.t_us < t_start_us_ || e.t_us > t_end_us_)
      throw data_error("event " + std::to_string(i) + " lies outside the window bounds");
    if (i > 0 && e.t_us < events_[i - 1].t_us)
      throw data_error("timestamp regression at index " + std::to_string(i));
    if (!geometry_.contains(e.x, e.y)) throw data_error("event " + std::to_string(i) + " out of sensor bounds");
  }
}

EventWindow EventWindow::covering(std::vector<Event> events, SensorGeometry geometry) {
  std::int64_t t0 = 0, t1 = 0;
  if (!events.empty()) {
    t0 = events.front().t_us;
    t1 = events.back().t_us;
  }
  return EventWindow(std::move(events), t0, t1, geometry);
}

EventWindow slice_window(const EventWindow& window, std::int64_t t0_us, std::int64_t t1_us, IntervalMode mode) {
  if (t0_us > t1_us)
    throw invalid_argument("slice_window: t0 (" + std::to_string(t0_us) + ") > t1 (" + std::to_string(t1_us) + ")");
  const auto events = window.events();
  const auto first = std::lower_bound(events.begin(), events.end(), t0_us,
                                      [](const Event& e, std::int64_t t) { return e.t_us < t; });
  const auto last = mode == IntervalMode::kClosed
                        ? std::upper_bound(first, events.end(), t1_us,
                                           [](std::int64_t t, const Event& e) { return t < e.t_us; })
                        : std::lower_bound(first, events.end(), t1_us,
                                           [](const Event& e, std::int64_t t) { return e.t_us < t; });
  return EventWindow(std::vector<Event>(first, last), t0_us, t1_us, window.geometry());
}

std::vector<char> encode_evt1(const EventWindow& window) {
  detail::ByteWriter w;
  w.reserve(28 + window.size() * kEvt1RecordBytes);
  w.put_magic(kEvt1Magic);
  w.put<std::uint32_t>(kEvt1Version);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(window.geometry().width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(window.geometry().height));
  w.put<std::uint64_t>(window.size());
  for (const Event& e : window.events()) {
    if (e.t_us < 0) throw data_error("EVT1 cannot store negative timestamps");
    w.put<std::uint64_t>(static_cast<std::uint64_t>(e.t_us));
    w.put<std::uint16_t>(to_q8(e.x, "x"));
    w.put<std::uint16_t>(to_q8(e.y, "y"));
    w.put<std::uint8_t>(e.p > 0 ? 1 : 0);
    w.put<std::uint8_t>(0);
  }
  return w.bytes();
}

EventWindow decode_evt1(std::vector<char> bytes, const std::string& origin) {
  detail::ByteReader r(std::move(bytes), origin);
  r.expect_magic(kEvt1Magic);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kEvt1Version) throw format_error(origin + ": unsupported EVT1 version " + std::to_string(version));
  SensorGeometry geometry{static_cast<int>(r.get<std::uint32_t>("width")),
                          static_cast<int>(r.get<std::uint32_t>("height"))};
  if (geometry.width < 1 || geometry.height < 1) throw format_error(origin + ": header geometry must be non-zero");
  const auto count = r.get<std::uint64_t>("count");
  if (count > r.remaining() / kEvt1RecordBytes || r.remaining() != count * kEvt1RecordBytes)
    throw format_error(origin + ": header declares " + std::to_string(count) + " records but body holds " +
                       std::to_string(r.remaining()) + " bytes");
  std::vector<Event> events;
  events.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Event e;
    e.t_us = static_cast<std::int64_t>(r.get<std::uint64_t>("t"));
    e.x = r.get<std::uint16_t>("x") / 256.0;
    e.y = r.get<std::uint16_t>("y") / 256.0;
    const auto raw_p = r.get<std::uint8_t>("p");
    const auto pad = r.get<std::uint8_t>("pad");
    if (raw_p > 1) throw format_error(origin + ": record " + std::to_string(i) + " has polarity byte " + std::to_string(raw_p));
    if (pad != 0) throw format_error(origin + ": record " + std::to_string(i) + " has non-zero pad byte");
    e.p = raw_p ? 1 : -1;
    events.push_back(e);
  }
  return finish_stream(std::move(events), geometry, origin);
}

namespace {

EventWindow load_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw format_error(path + ": missing '# evt1 W H' header");
  std::istringstream header(line);
  std::string hash, tag;
  long w = 0, h = 0;
  if (!(header >> hash >> tag >> w >> h) || hash != "#" || tag != "evt1" || w < 1 || h < 1)
    throw format_error(path + ": malformed header '" + line + "', expected '# evt1 W H'");
  const SensorGeometry geometry{static_cast<int>(w), static_cast<int>(h)};
  std::vector<Event> events;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path + ":" + std::to_string(line_no);
    std::string_view rest(line);
    std::string_view fields[4];
    for (int f = 0; f < 4; ++f) {
      const auto comma = rest.find(',');
      if ((f < 3) == (comma == std::string_view::npos)) throw format_error(where + ": expected 't_us,x,y,p'");
      fields[f] = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    Event e;
    e.t_us = parse_number<std::int64_t>(fields[0], where);
    e.x = parse_number<double>(fields[1], where);
    e.y = parse_number<double>(fields[2], where);
    e.p = polarity_from_raw(parse_number<long>(fields[3], where), where);
    events.push_back(e);
  }
  return finish_stream(std::move(events), geometry, path);
}

}  // namespace

EventWindow load_events(const std::string& path, EventFormat format) {
  if (format == EventFormat::kText) return load_text(path);
  return decode_evt1(detail::read_file_bytes(path), path);
}

EventWindow load_events(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  return load_events(path, (ext == ".txt" || ext == ".csv") ? EventFormat::kText : EventFormat::kBinary);
}

void save_events(const EventWindow& window, const std::string& path, EventFormat format) {
  if (format == EventFormat::kBinary) {
    detail::ByteWriter w;
    const auto bytes = encode_evt1(window);
    w.put_bytes(bytes.data(), bytes.size());
    w.write_to(path);
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << "# evt1 " << window.geometry().width << ' ' << window.geometry().height << '\n';
  for (const Event& e : window.events())
    out << e.t_us << ',' << format_double(e.x) << ',' << format_double(e.y) << ',' << (e.p > 0 ? 1 : 0) << '\n';
  if (!out) throw io_error("write failed for '" + path + "'");
}

}  // namespace evaflow
