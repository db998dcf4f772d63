#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace ghost {

/// Thrown for every contract violation or numerical failure in the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Infinite-radius sentinel. Zero logit spread means no ghosts at all.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline constexpr double kPi = 3.141592653589793238462643383279502884;

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(what);
}

}  // namespace ghost
