#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace sipmask {

// CHECK-style validation used across the library. SIP_CHECK throws
// std::runtime_error, SIP_CHECK_ARG throws std::invalid_argument.
#define SIP_CHECK(cond, msg)                                        \
  do {                                                              \
    if (!(cond)) {                                                  \
      std::ostringstream oss_;                                      \
      oss_ << "check failed: " << #cond << ": " << msg;             \
      throw std::runtime_error(oss_.str());                         \
    }                                                               \
  } while (0)

#define SIP_CHECK_ARG(cond, msg)                                    \
  do {                                                              \
    if (!(cond)) {                                                  \
      std::ostringstream oss_;                                      \
      oss_ << "invalid argument: " << msg;                          \
      throw std::invalid_argument(oss_.str());                      \
    }                                                               \
  } while (0)

}  // namespace sipmask
