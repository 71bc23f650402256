#pragma once

#include <cstdio>
#include <string>

namespace hte {

// 17 significant digits: enough for doubles to round-trip through text.
inline std::string to_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace hte
