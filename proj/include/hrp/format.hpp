#pragma once

#include <cstdio>
#include <string>

namespace hrp {

// 17 significant digits: enough to round-trip any double.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace hrp
