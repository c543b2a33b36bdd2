#pragma once

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "evaflow/error.hpp"
#include "evaflow/events.hpp"
#include "evaflow/flow.hpp"

namespace evaflow::testing {

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("evaflow_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Random sorted events inside the closed sensor box, on the EVT1 1/256 lattice
/// when `quantized` is set.
inline EventWindow random_window(std::mt19937_64& rng, SensorGeometry g, std::size_t n, std::int64_t t0_us,
                                 std::int64_t t1_us, bool quantized = true) {
  std::uniform_int_distribution<std::int64_t> t(t0_us, t1_us);
  std::uniform_real_distribution<double> x(0.0, g.width - 1), y(0.0, g.height - 1);
  std::bernoulli_distribution pol(0.5);
  std::vector<Event> events(n);
  for (auto& e : events) {
    e.t_us = t(rng);
    e.x = x(rng);
    e.y = y(rng);
    if (quantized) {
      e.x = std::floor(e.x * 256.0) / 256.0;
      e.y = std::floor(e.y * 256.0) / 256.0;
    }
    e.p = pol(rng) ? 1 : -1;
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
  return EventWindow(std::move(events), t0_us, t1_us, g);
}

inline FlowField random_flow(std::mt19937_64& rng, int h, int w, double scale, double duration = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  FlowField f(h, w, duration);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.u[i] = n(rng);
    f.v[i] = n(rng);
  }
  return f;
}

}  // namespace evaflow::testing

namespace evaflow::testing {

/// Runs `fn` and returns the message of the evaflow::Error it throws with the given kind.
template <typename Fn>
std::string expect_error(ErrorKind kind, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
    return e.what();
  }
  FAIL("expected an evaflow::Error");
  return {};
}

}  // namespace evaflow::testing
