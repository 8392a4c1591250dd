#pragma once

#include <array>
#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "crlab/heis.hpp"

namespace crlab {

/// Second-order forward-mode jet of a complex-valued function of the real
/// coordinates (x, y, t): value, gradient and symmetric Hessian.
/// Hessian storage order: xx, xy, xt, yy, yt, tt.
struct Dual2 {
  cplx v{};
  std::array<cplx, 3> g{};
  std::array<cplx, 6> h{};

  Dual2() = default;
  Dual2(double c) : v(c) {}  // NOLINT(google-explicit-constructor)
  Dual2(cplx c) : v(c) {}    // NOLINT(google-explicit-constructor)

  /// The coordinate function number `axis` (0 = x, 1 = y, 2 = t) seeded at `value`.
  static Dual2 variable(int axis, double value);

  static constexpr int hidx(int i, int j) {
    constexpr int table[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
    return table[i][j];
  }
  cplx hess(int i, int j) const { return h[hidx(i, j)]; }

  Dual2& operator+=(const Dual2& o);
  Dual2& operator-=(const Dual2& o);
  Dual2& operator*=(const Dual2& o);
  Dual2& operator/=(const Dual2& o);
};

Dual2 operator-(const Dual2& a);
Dual2 operator+(Dual2 a, const Dual2& b);
Dual2 operator-(Dual2 a, const Dual2& b);
Dual2 operator*(const Dual2& a, const Dual2& b);
Dual2 operator/(const Dual2& a, const Dual2& b);
Dual2 operator+(Dual2 a, double b);
Dual2 operator+(double b, Dual2 a);
Dual2 operator-(Dual2 a, double b);
Dual2 operator-(double b, const Dual2& a);
Dual2 operator*(Dual2 a, cplx b);
Dual2 operator*(cplx b, Dual2 a);
Dual2 operator*(Dual2 a, double b);
Dual2 operator*(double b, Dual2 a);
Dual2 operator/(Dual2 a, double b);

/// Applies a holomorphic function given its value and first two derivatives at a.v.
Dual2 chain(const Dual2& a, cplx g0, cplx g1, cplx g2);
Dual2 pow(const Dual2& a, double p);
Dual2 sqrt(const Dual2& a);
Dual2 exp(const Dual2& a);
Dual2 log(const Dual2& a);
Dual2 reciprocal(const Dual2& a);
Dual2 conj(const Dual2& a);
Dual2 real(const Dual2& a);
Dual2 imag(const Dual2& a);
/// a * conj(a)
Dual2 abs2(const Dual2& a);

/// Value and exact frame derivatives up to order 2 of a complex field at a point.
/// Second-order entries compose operators right-to-left: ZZb = Z(Zb u).
struct Jet2 {
  cplx value{};
  cplx Z{}, Zb{}, T{};
  cplx ZZ{}, ZbZb{}, ZZb{}, ZbZ{};

  /// Jet of the complex conjugate field.
  Jet2 conjugate() const;
  Jet2 scaled(cplx c) const;
};

/// Converts coordinate derivatives at p into frame derivatives
/// Z = d/dz + i conj(z) d/dt, Zb = d/dzb - i z d/dt, T = d/dt.
Jet2 frame_from_dual(const Dual2& u, const HPoint& p);

/// A complex scalar field on H^1 evaluable on second-order jets.
class ScalarField {
 public:
  using Fn = std::function<Dual2(const Dual2& x, const Dual2& y, const Dual2& t)>;

  ScalarField() = default;
  ScalarField(Fn fn, bool real_valued) : fn_(std::move(fn)), real_(real_valued) {}

  explicit operator bool() const { return static_cast<bool>(fn_); }
  bool is_real_valued() const { return real_; }

  Dual2 operator()(const Dual2& x, const Dual2& y, const Dual2& t) const { return fn_(x, y, t); }
  Dual2 dual(const HPoint& p) const;
  cplx value(const HPoint& p) const;

 private:
  Fn fn_;
  bool real_ = false;
};

/// u o L_x, i.e. p -> u(x^{-1} p).
ScalarField translate_field(const ScalarField& u, const HPoint& x);
/// p -> u(delta_lambda p).
ScalarField dilate_field(const ScalarField& u, double lambda);
ScalarField constant_field(cplx c);
ScalarField scale_field(const ScalarField& u, cplx c);

Jet2 frame_jet(const ScalarField& u, const HPoint& p);

/// Xi u = z Zu + zbar Zbar u + 2t Tu, the generator of the dilations.
cplx xi_apply(const ScalarField& u, const HPoint& p);
cplx xi_apply(const Jet2& j, const HPoint& p);

using PointwiseField = std::function<cplx(const HPoint&)>;

/// Central differences at steps h and h/2 combined by one Richardson level.
Jet2 fd_fallback_jet(const PointwiseField& u, const HPoint& p, double h);

/// Probe-cloud estimate of the Gamma^2 norm: the sum of the sup-norms of
/// f, Zf, Zbf, Z^2 f, Zb^2 f, Z Zb f, Zb Z f.
double gamma2_norm_estimate(const ScalarField& f, std::span<const HPoint> probes);

/// Per-component sup norms used by gamma2_norm_estimate, in the same order.
std::array<double, 7> gamma2_components(const ScalarField& f, std::span<const HPoint> probes);

}  // namespace crlab
