#pragma once

#include "crlab/heis.hpp"

namespace crlab {

/// A point of the unit sphere S^3 in C^2.
struct SpherePoint {
  cplx w1{};
  cplx w2{};

  double norm2() const { return std::norm(w1) + std::norm(w2); }
};

/// F(w1, w2) = (w1/(1+w2), Re(i(1-w2)/(1+w2))). Throws DomainError at the pole w2 = -1.
HPoint cayley(const SpherePoint& w);

/// F^{-1}(z, t) = (2iz/(t+i(1+|z|^2)), (-t+i(1-|z|^2))/(t+i(1+|z|^2))).
SpherePoint cayley_inv(const HPoint& p);

/// Components of a complex tangent vector in the frame (Z, Zb, T) at p.
struct FrameComponents {
  cplx z{}, zb{}, t{};
};

/// Splits the coordinate vector (vx, vy, vt) at p into Z, Zb, T parts.
FrameComponents decompose_frame(const HPoint& p, cplx vx, cplx vy, cplx vt);

struct PushforwardCheck {
  FrameComponents measured;
  cplx predicted{};
};

/// (i/2) (t + i(1+|z|^2))^3 / (t^2 + (1+|z|^2)^2)
cplx pushforward_coefficient(const HPoint& p);

/// Numerical dF(W) at F^{-1}(p), W = conj(w2) d/dw1 - conj(w1) d/dw2, against the closed form.
PushforwardCheck pushforward_W_check(const HPoint& p, double h = 1e-5);

/// dF(Wb) at F^{-1}(p) in the frame at p.
FrameComponents pushforward_Wbar(const HPoint& p, double h = 1e-5);

/// Ratio of the Zb to the Z coefficient of dF(W + s Wb) at p.
cplx rossi_pushforward_ratio(const HPoint& p, double s, double h = 1e-5);

}  // namespace crlab
