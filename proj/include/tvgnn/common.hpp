#pragma once

#include <stdexcept>
#include <string>

namespace tvgnn {

// Single exception type for contract violations, shape mismatches and
// malformed inputs. Messages carry the offending values.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

inline std::string shape_str(int rows, int cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace tvgnn
