#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdc {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Reduced Planck constant [J s]. Momenta are carried internally as p/hbar
// [1/m], so this value only enters documentation and unit labels.
inline constexpr double kHbar = 1.054571817e-34;

// Config files and reports speak nm / um / mm / hbar per mm; the library
// computes in SI (m, 1/m).
inline constexpr double from_nm(double v) { return v * 1e-9; }
inline constexpr double from_um(double v) { return v * 1e-6; }
inline constexpr double from_mm(double v) { return v * 1e-3; }
inline constexpr double to_um(double v) { return v * 1e6; }
inline constexpr double to_mm(double v) { return v * 1e3; }
inline constexpr double from_hbar_per_mm(double v) { return v * 1e3; }
inline constexpr double to_hbar_per_mm(double v) { return v * 1e-3; }

struct Rect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  bool contains(int x, int y) const {
    return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h;
  }
  bool overlaps(const Rect& o) const {
    return x0 < o.x0 + o.w && o.x0 < x0 + w && y0 < o.y0 + o.h && o.y0 < y0 + h;
  }
  long long area() const { return static_cast<long long>(w) * h; }
  // geometric center in pixel coordinates (half-integer for even sizes)
  double center_x() const { return x0 + 0.5 * (w - 1); }
  double center_y() const { return y0 + 0.5 * (h - 1); }
  bool operator==(const Rect&) const = default;
};

// Dense row-major real-valued grid.
struct Image {
  int w = 0;
  int h = 0;
  std::vector<double> v;

  Image() = default;
  Image(int width, int height) : w(width), h(height), v(static_cast<size_t>(width) * height, 0.0) {}

  double& at(int x, int y) { return v[static_cast<size_t>(y) * w + x]; }
  double at(int x, int y) const { return v[static_cast<size_t>(y) * w + x]; }
  size_t size() const { return v.size(); }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace spdc
