#include "kge/manifold.hpp"

#include <algorithm>
#include <cmath>

namespace kge::manifold {

namespace {

void check_curvature(double c) {
  if (!std::isfinite(c) || c <= 0.0)
    throw std::invalid_argument("curvature must be a positive finite real");
}

void check_finite(std::span<const double> x, const char* what) {
  if (!all_finite(x))
    throw std::invalid_argument(std::string(what) + ": non-finite input");
}

void check_same_dim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dimension mismatch");
}

}  // namespace

void expmap0_into(std::span<double> out, std::span<const double> v, double c,
                  ExpCache* cache) {
  const double n = norm(v);
  if (n < kNormEps) {
    std::copy(v.begin(), v.end(), out.begin());
    if (cache) *cache = ExpCache{n, 0.0, 1.0, true};
    return;
  }
  const double s = std::sqrt(c);
  const double th = std::tanh(s * n);
  const double g = th / (s * n);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = g * v[i];
  if (cache) *cache = ExpCache{n, th, g, false};
}

void logmap0_into(std::span<double> out, std::span<const double> y, double c,
                  LogCache* cache) {
  const double n = norm(y);
  if (n < kNormEps) {
    std::copy(y.begin(), y.end(), out.begin());
    if (cache) *cache = LogCache{n, 0.0, 1.0, true, false};
    return;
  }
  const double s = std::sqrt(c);
  const double r = s * n;
  const bool clamped = r > 1.0 - kTanhEps;
  const double rc = clamped ? 1.0 - kTanhEps : r;
  const double A = std::atanh(rc);
  const double q = A / (s * n);
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = q * y[i];
  if (cache) *cache = LogCache{n, A, q, false, clamped};
}

void project_into(std::span<double> x, double c, ProjCache* cache) {
  const double n = norm(x);
  const double radius = (1.0 - kBallEps) / std::sqrt(c);
  if (n <= radius) {
    if (cache) *cache = ProjCache{n, 1.0, false};
    return;
  }
  const double f = radius / n;
  for (double& xi : x) xi *= f;
  // rounding can leave the norm one ulp over; shave until idempotent
  while (norm(x) > radius)
    for (double& xi : x) xi *= 1.0 - 2.3e-16;
  if (cache) *cache = ProjCache{n, f, true};
}

namespace {

// Shared Mobius core; sx = +/-1 applies the sign of x without copying.
inline void mobius_core(std::span<double> out, std::span<const double> x,
                        std::span<const double> y, double c, double sx,
                        MobCache* cache) {
  const double P = sx * dot(x, y);
  const double X = norm_sq(x);
  const double Y = norm_sq(y);
  const double al = 1.0 + 2.0 * c * P + c * Y;
  const double be = 1.0 - c * X;
  const double D = 1.0 + 2.0 * c * P + c * c * X * Y;
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = (al * sx * x[i] + be * y[i]) / D;
  if (cache) *cache = MobCache{P, X, Y, al, be, D};
}

}  // namespace

void mobius_add_into(std::span<double> out, std::span<const double> x,
                     std::span<const double> y, double c, MobCache* cache) {
  mobius_core(out, x, y, c, 1.0, cache);
}

void mobius_diff_into(std::span<double> out, std::span<const double> x,
                      std::span<const double> y, double c, MobCache* cache) {
  mobius_core(out, x, y, c, -1.0, cache);
}

double distance_kernel(std::span<const double> x, std::span<const double> y,
                       double c, std::span<double> z, DistCache* cache) {
  mobius_diff_into(z, x, y, c, cache ? &cache->mob : nullptr);
  const double n = norm(z);
  if (n < kNormEps) {
    if (cache) {
      cache->n = n;
      cache->t = cache->A = cache->dd = 0.0;
      cache->trivial = true;
      cache->clamped = false;
    }
    return 0.0;
  }
  const double s = std::sqrt(c);
  const double r = s * n;
  const bool clamped = r > 1.0 - kTanhEps;
  const double t = clamped ? 1.0 - kTanhEps : r;
  const double A = std::atanh(t);
  const double dd = (2.0 / s) * A;
  if (cache) {
    cache->n = n;
    cache->t = t;
    cache->A = A;
    cache->dd = dd;
    cache->trivial = false;
    cache->clamped = clamped;
  }
  return dd;
}

Vec project_to_ball(std::span<const double> x, double c) {
  check_curvature(c);
  check_finite(x, "project_to_ball");
  Vec out(x.begin(), x.end());
  project_into(out, c);
  return out;
}

Vec expmap0(std::span<const double> v, double c) {
  check_curvature(c);
  check_finite(v, "expmap0");
  Vec out(v.size());
  expmap0_into(out, v, c);
  project_into(out, c);
  return out;
}

Vec logmap0(std::span<const double> y, double c) {
  check_curvature(c);
  check_finite(y, "logmap0");
  if (norm(y) * std::sqrt(c) > 1.0)
    throw std::invalid_argument("logmap0: point outside the closed ball");
  Vec out(y.size());
  logmap0_into(out, y, c);
  return out;
}

Vec mobius_add(std::span<const double> x, std::span<const double> y,
               double c) {
  check_curvature(c);
  check_same_dim(x, y);
  check_finite(x, "mobius_add");
  check_finite(y, "mobius_add");
  Vec out(x.size());
  mobius_add_into(out, x, y, c);
  project_into(out, c);
  return out;
}

double distance(std::span<const double> x, std::span<const double> y,
                double c) {
  check_curvature(c);
  check_same_dim(x, y);
  check_finite(x, "distance");
  check_finite(y, "distance");
  Vec z(x.size());
  return distance_kernel(x, y, c, z);
}

}  // namespace kge::manifold
