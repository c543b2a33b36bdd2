#pragma once

#include <map>
#include <string>

namespace evaflow {

/// `key=value` lines; blank lines and lines starting with '#' are skipped.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin = "<memory>");
std::map<std::string, std::string> read_key_values(const std::string& path);
std::string format_key_values(const std::map<std::string, std::string>& values);
void write_key_values(const std::map<std::string, std::string>& values, const std::string& path);

}  // namespace evaflow
