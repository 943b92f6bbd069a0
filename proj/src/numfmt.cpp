#include "encassist/numfmt.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <string>

namespace encassist {

namespace {

// Integer count of 10^-decimals units, rounded half away from zero.
std::int64_t scaled_units(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double magnitude = std::fabs(value) * scale;
  const double nudged = magnitude + 0.5 + magnitude * 1e-9 + 1e-9;
  const auto units = static_cast<std::int64_t>(std::floor(nudged));
  return value < 0 ? -units : units;
}

}  // namespace

double round_decimals(double value, int decimals) {
  if (!std::isfinite(value)) return value;
  return static_cast<double>(scaled_units(value, decimals)) / std::pow(10.0, decimals);
}

std::string fixed(double value, int decimals) {
  if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
  const std::int64_t units = scaled_units(value, decimals);
  std::int64_t divisor = 1;
  for (int i = 0; i < decimals; ++i) divisor *= 10;
  const std::int64_t mag = units < 0 ? -units : units;
  std::string out = units < 0 ? "-" : "";
  out += std::to_string(mag / divisor);
  if (decimals > 0) {
    std::string frac = std::to_string(mag % divisor);
    out += '.';
    out.append(static_cast<std::size_t>(decimals) - frac.size(), '0');
    out += frac;
  }
  return out;
}

std::string shortest(double value) {
  std::array<char, 64> buf{};
  const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), result.ptr);
}

}  // namespace encassist
