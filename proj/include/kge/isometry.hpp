#pragma once

#include <span>

#include "kge/common.hpp"

// Block-diagonal Givens maps acting on coordinate pairs (2i, 2i+1) of an
// even-dimensional vector; one angle per pair, applied in linear time.
// Both maps are orthogonal and fix the origin, so they restrict to
// isometries of the Poincare ball when applied to ball coordinates.
namespace kge::isometry {

// Raw kernels, no validation; out must not alias x.
// Rotation block:  [cos -sin; sin cos]
// Reflection block: [cos sin; sin -cos]
void rotate_into(std::span<double> out, std::span<const double> angles,
                 std::span<const double> x);
void reflect_into(std::span<double> out, std::span<const double> angles,
                  std::span<const double> x);

// Validated ops: x even-dimensional, angles of length dim(x)/2.
Vec apply_rotation(std::span<const double> angles, std::span<const double> x);
Vec apply_reflection(std::span<const double> angles,
                     std::span<const double> x);

}  // namespace kge::isometry
