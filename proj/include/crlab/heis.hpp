#pragma once

#include <cmath>
#include <complex>

#include <nlohmann/json.hpp>

#include "crlab/error.hpp"

namespace crlab {

using cplx = std::complex<double>;

/// A point of the Heisenberg group H^1 = C x R, stored as real (x, y, t).
struct HPoint {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;

  cplx z() const { return {x, y}; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(t); }
  friend bool operator==(const HPoint&, const HPoint&) = default;
};

inline HPoint from_complex(cplx z, double t) { return {z.real(), z.imag(), t}; }

// The group operations are templated on the coordinate scalar so that the
// differentiable field machinery can push jets through them.
namespace detail {

template <class S>
struct Coords {
  S x, y, t;
};

// (z,t)(w,s) = (z+w, t+s+2 Im(z conj w)),  Im(z conj w) = y_z x_w - x_z y_w.
template <class S>
Coords<S> mul(const Coords<S>& p, const Coords<S>& q) {
  return {p.x + q.x, p.y + q.y, p.t + q.t + 2.0 * (p.y * q.x - p.x * q.y)};
}

template <class S>
Coords<S> inv(const Coords<S>& p) {
  return {-p.x, -p.y, -p.t};
}

template <class S>
Coords<S> dil(double lambda, const Coords<S>& p) {
  return {lambda * p.x, lambda * p.y, (lambda * lambda) * p.t};
}

}  // namespace detail

HPoint group_mul(const HPoint& p, const HPoint& q);
HPoint group_inv(const HPoint& p);

/// Heisenberg dilation (z, t) -> (lambda z, lambda^2 t). Throws DomainError for lambda <= 0.
HPoint dilate(double lambda, const HPoint& p);

/// L_x(y) = x^{-1} y.
HPoint left_translate(const HPoint& x, const HPoint& y);

/// (|z|^4 + t^2)^{1/4}
double koranyi_norm(const HPoint& p);

/// Koranyi distance d(p, q) = |q^{-1} p|; a genuine metric on H^1.
double koranyi_distance(const HPoint& p, const HPoint& q);

class KoranyiBall {
 public:
  KoranyiBall(HPoint center, double radius);

  const HPoint& center() const { return center_; }
  double radius() const { return radius_; }
  bool contains(const HPoint& p) const { return koranyi_distance(p, center_) < radius_; }

 private:
  HPoint center_;
  double radius_;
};

void to_json(nlohmann::json& j, const HPoint& p);
void from_json(const nlohmann::json& j, HPoint& p);

}  // namespace crlab
