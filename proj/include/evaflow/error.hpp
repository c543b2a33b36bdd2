#pragma once

#include <stdexcept>
#include <string>

namespace evaflow {

enum class ErrorKind {
  kInvalidArgument,  // precondition violated by the caller
  kFormat,           // malformed file or header
  kData,             // well-formed input with invalid content
  kShape,            // tensor / raster dimension mismatch
  kNumeric,          // NaN, divergence, undefined ratio
  kIo,               // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_argument(const std::string& what) { return {ErrorKind::kInvalidArgument, what}; }
inline Error format_error(const std::string& what) { return {ErrorKind::kFormat, what}; }
inline Error data_error(const std::string& what) { return {ErrorKind::kData, what}; }
inline Error shape_error(const std::string& what) { return {ErrorKind::kShape, what}; }
inline Error numeric_error(const std::string& what) { return {ErrorKind::kNumeric, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::kIo, what}; }

}  // namespace evaflow
