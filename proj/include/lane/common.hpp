#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lane {

// Contract violation (bad arguments, shape mismatch, malformed input).
// CLI maps this to exit code 2 when raised during config validation.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Runtime failure (I/O, NaN loss, truncated file).  CLI exit code 3.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline std::string format_check_msg(const char* expr, const char* file, int line,
                                    const std::string& msg) {
  std::ostringstream os;
  os << msg << " [" << expr << " at " << file << ":" << line << "]";
  return os.str();
}
}  // namespace detail

#define LANE_CHECK(cond, msg)                                                       \
  do {                                                                              \
    if (!(cond))                                                                    \
      throw ::lane::ContractError(                                                  \
          ::lane::detail::format_check_msg(#cond, __FILE__, __LINE__, (msg)));      \
  } while (0)

#define LANE_FAIL(msg)                                                              \
  throw ::lane::RuntimeFailure(                                                     \
      ::lane::detail::format_check_msg("failure", __FILE__, __LINE__, (msg)))

// Single RNG type used everywhere so that seeded runs are reproducible across
// modules and platforms (mt19937_64 is fully specified by the standard).
using Rng = std::mt19937_64;

inline std::int64_t numel_of(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }

}  // namespace lane
