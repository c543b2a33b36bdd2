#pragma once

#include <map>
#include <string>

namespace evaflow {

/// Library version string.
std::string version();

/// Reproducibility record written once per CLI run. Text form is sorted
/// `key=value` lines; keys under `time.` hold wall-clock seconds.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::map<std::string, double> timings_s;
  std::map<std::string, std::string> results;

  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;
  /// Text form without wall-clock fields; identical runs give identical strings.
  std::string comparable_text() const;
  void write(const std::string& path) const;

  static RunManifest from_map(const std::map<std::string, std::string>& values);
  static RunManifest read(const std::string& path);
};

}  // namespace evaflow
