#include "evaflow/manifest.hpp"

#include <sstream>

#include "evaflow/config.hpp"
#include "evaflow/error.hpp"

#ifndef EVAFLOW_VERSION
#define EVAFLOW_VERSION "0.0.0"
#endif

namespace evaflow {

namespace {

constexpr const char* kTimePrefix = "time.";

bool take_prefixed(const std::string& key, const std::string& prefix, std::string* rest) {
  if (key.rfind(prefix, 0) != 0) return false;
  *rest = key.substr(prefix.size());
  return true;
}

}  // namespace

std::string version() { return EVAFLOW_VERSION; }

std::map<std::string, std::string> RunManifest::to_map() const {
  std::map<std::string, std::string> m;
  m["command"] = command;
  m["version"] = version();
  for (const auto& [k, v] : config) m["config." + k] = v;
  for (const auto& [k, v] : inputs) m["input." + k] = v;
  for (const auto& [k, v] : outputs) m["output." + k] = v;
  for (const auto& [k, v] : results) m["result." + k] = v;
  for (const auto& [k, v] : timings_s) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    m[kTimePrefix + k] = s.str();
  }
  return m;
}

std::string RunManifest::to_text() const { return format_key_values(to_map()); }

std::string RunManifest::comparable_text() const {
  auto m = to_map();
  std::erase_if(m, [](const auto& kv) { return kv.first.rfind(kTimePrefix, 0) == 0; });
  return format_key_values(m);
}

void RunManifest::write(const std::string& path) const { write_key_values(to_map(), path); }

RunManifest RunManifest::from_map(const std::map<std::string, std::string>& values) {
  RunManifest r;
  for (const auto& [k, v] : values) {
    std::string rest;
    if (k == "command") r.command = v;
    else if (take_prefixed(k, "config.", &rest)) r.config[rest] = v;
    else if (take_prefixed(k, "input.", &rest)) r.inputs[rest] = v;
    else if (take_prefixed(k, "output.", &rest)) r.outputs[rest] = v;
    else if (take_prefixed(k, "result.", &rest)) r.results[rest] = v;
    else if (take_prefixed(k, kTimePrefix, &rest)) {
      try {
        r.timings_s[rest] = std::stod(v);
      } catch (const std::logic_error&) {
        throw format_error("manifest timing '" + k + "' is not a number");
      }
    }
  }
  return r;
}

RunManifest RunManifest::read(const std::string& path) { return from_map(read_key_values(path)); }

}  // namespace evaflow
