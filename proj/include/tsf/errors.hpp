#pragma once

#include <stdexcept>
#include <string>

namespace tsf {

// Exit-code mapping in the CLI: usage 1, data 2, numerical 3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : DataError {
  ParseError(const std::string& file, int line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_number(line) {}
  int line_number;
};

}  // namespace tsf
