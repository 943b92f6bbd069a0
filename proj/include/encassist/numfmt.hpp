#pragma once

#include <string>

namespace encassist {

/// Rounds half away from zero to `decimals` places. Values are nudged by a
/// relative 1e-9 so decimal halves stored as x.xx4999... round up, which is
/// how two-decimal table values like (79.52 + 79.29) / 2 are expected to print.
double round_decimals(double value, int decimals);

/// Fixed notation with exactly `decimals` digits after the point, using the
/// same rounding as round_decimals.
std::string fixed(double value, int decimals);

/// Shortest representation that parses back to the same double.
std::string shortest(double value);

}  // namespace encassist
