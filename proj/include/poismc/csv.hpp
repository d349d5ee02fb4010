#pragma once

#include <cstdio>
#include <string>

namespace poismc {

/// Formats a double with 17 significant digits (round-trip exact), dot
/// decimal separator regardless of locale.
inline std::string csv_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline std::string csv_value(long v) { return std::to_string(v); }
inline std::string csv_value(int v) { return std::to_string(v); }
inline std::string csv_value(bool v) { return v ? "1" : "0"; }

}  // namespace poismc
