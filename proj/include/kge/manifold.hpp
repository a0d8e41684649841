#pragma once

#include <span>

#include "kge/common.hpp"

// Poincare ball of curvature -c (c > 0), radius 1/sqrt(c). All trainable
// state lives in the tangent space at the origin; these ops move points in
// and out of the ball and measure distances inside it.
namespace kge::manifold {

inline constexpr double kBallEps = 1e-5;   // projection margin from the boundary
inline constexpr double kTanhEps = 1e-15;  // arctanh argument clamp
inline constexpr double kNormEps = 1e-15;  // near-origin guard

// Scalar state saved by the *_into kernels so reverse-mode code can replay
// them without recomputing norms. `events` entries count clamp/clip
// activations; gradients are one-sided there and finite-difference checks
// skip coordinates whose perturbation flips a counter.

struct ExpCache {
  double n = 0.0;        // ||v||
  double th = 0.0;       // tanh(sqrt(c)*n)
  double g = 1.0;        // tanh(sqrt(c)*n)/(sqrt(c)*n)
  bool trivial = true;   // n < kNormEps: treated as identity
};

struct LogCache {
  double n = 0.0;        // ||y||
  double A = 0.0;        // arctanh of the (clamped) argument
  double q = 1.0;        // A/(sqrt(c)*n)
  bool trivial = true;
  bool clamped = false;
};

struct ProjCache {
  double n = 0.0;        // input norm
  double scale = 1.0;    // applied rescale factor
  bool clipped = false;
};

struct MobCache {
  double P = 0.0;        // <x,y> (with x already negated for mobius_diff)
  double X = 0.0;        // ||x||^2
  double Y = 0.0;        // ||y||^2
  double al = 1.0;
  double be = 1.0;
  double D = 1.0;
};

struct DistCache {
  MobCache mob;
  double n = 0.0;        // ||(-x) + y|| in the Mobius sense
  double t = 0.0;        // clamped sqrt(c)*n
  double A = 0.0;        // arctanh(t)
  double dd = 0.0;       // distance value
  bool trivial = true;   // coincident points
  bool clamped = false;
};

// Raw kernels: no validation, no projection, out may not alias inputs.

void expmap0_into(std::span<double> out, std::span<const double> v, double c,
                  ExpCache* cache = nullptr);

void logmap0_into(std::span<double> out, std::span<const double> y, double c,
                  LogCache* cache = nullptr);

/// In-place rescale into the ball of radius (1 - kBallEps)/sqrt(c).
/// Idempotent: a second application leaves the vector bitwise unchanged.
void project_into(std::span<double> x, double c, ProjCache* cache = nullptr);

/// out = x (+)_c y, unprojected.
void mobius_add_into(std::span<double> out, std::span<const double> x,
                     std::span<const double> y, double c,
                     MobCache* cache = nullptr);

/// out = (-x) (+)_c y, unprojected.
void mobius_diff_into(std::span<double> out, std::span<const double> x,
                      std::span<const double> y, double c,
                      MobCache* cache = nullptr);

/// Geodesic distance; z is scratch of the same dimension and receives
/// (-x) (+)_c y.
double distance_kernel(std::span<const double> x, std::span<const double> y,
                       double c, std::span<double> z,
                       DistCache* cache = nullptr);

// Validated value-returning ops built on the kernels above.

Vec project_to_ball(std::span<const double> x, double c);
Vec expmap0(std::span<const double> v, double c);  // projected into the ball
Vec logmap0(std::span<const double> y, double c);  // domain: closed ball
Vec mobius_add(std::span<const double> x, std::span<const double> y,
               double c);                          // projected into the ball
double distance(std::span<const double> x, std::span<const double> y,
                double c);

}  // namespace kge::manifold
