#include "kge/isometry.hpp"

#include <cmath>

namespace kge::isometry {

void rotate_into(std::span<double> out, std::span<const double> angles,
                 std::span<const double> x) {
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double cs = std::cos(angles[i]);
    const double sn = std::sin(angles[i]);
    const double a = x[2 * i];
    const double b = x[2 * i + 1];
    out[2 * i] = cs * a - sn * b;
    out[2 * i + 1] = sn * a + cs * b;
  }
}

void reflect_into(std::span<double> out, std::span<const double> angles,
                  std::span<const double> x) {
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double cs = std::cos(angles[i]);
    const double sn = std::sin(angles[i]);
    const double a = x[2 * i];
    const double b = x[2 * i + 1];
    out[2 * i] = cs * a + sn * b;
    out[2 * i + 1] = sn * a - cs * b;
  }
}

namespace {

void validate(std::span<const double> angles, std::span<const double> x) {
  if (x.size() % 2 != 0)
    throw std::invalid_argument("isometry: vector dimension must be even");
  if (angles.size() * 2 != x.size())
    throw std::invalid_argument("isometry: need one angle per coordinate pair");
  if (!all_finite(angles) || !all_finite(x))
    throw std::invalid_argument("isometry: non-finite input");
}

}  // namespace

Vec apply_rotation(std::span<const double> angles, std::span<const double> x) {
  validate(angles, x);
  Vec out(x.size());
  rotate_into(out, angles, x);
  return out;
}

Vec apply_reflection(std::span<const double> angles,
                     std::span<const double> x) {
  validate(angles, x);
  Vec out(x.size());
  reflect_into(out, angles, x);
  return out;
}

}  // namespace kge::isometry
