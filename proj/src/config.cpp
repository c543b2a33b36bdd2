#include "evaflow/config.hpp"

#include <fstream>
#include <sstream>

#include "evaflow/detail/binary_io.hpp"
#include "evaflow/error.hpp"

namespace evaflow {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0)
      throw format_error(origin + ":" + std::to_string(line_no) + ": expected key=value");
    values[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return values;
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  return parse_key_values(std::string(bytes.begin(), bytes.end()), path);
}

std::string format_key_values(const std::map<std::string, std::string>& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + "=" + v + "\n";
  return out;
}

void write_key_values(const std::map<std::string, std::string>& values, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << format_key_values(values);
  if (!out) throw io_error("write failed for '" + path + "'");
}

}  // namespace evaflow
