#include "crlab/webster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace crlab {

namespace {

constexpr cplx I{0.0, 1.0};
const double kNaN = std::numeric_limits<double>::quiet_NaN();

// First jet in the frame: value and its Z, Zb, T derivatives. The T slot is
// NaN where the needed mixed derivative is not available.
struct J1 {
  cplx v{}, z{}, zb{}, t{};
};

J1 operator+(const J1& a, const J1& b) { return {a.v + b.v, a.z + b.z, a.zb + b.zb, a.t + b.t}; }
J1 operator-(const J1& a, const J1& b) { return {a.v - b.v, a.z - b.z, a.zb - b.zb, a.t - b.t}; }
J1 operator-(const J1& a) { return {-a.v, -a.z, -a.zb, -a.t}; }
J1 operator*(const J1& a, const J1& b) {
  return {a.v * b.v, a.z * b.v + a.v * b.z, a.zb * b.v + a.v * b.zb, a.t * b.v + a.v * b.t};
}
J1 operator+(double c, const J1& a) { return {c + a.v, a.z, a.zb, a.t}; }
J1 inv(const J1& a) {
  const cplx r = 1.0 / a.v;
  const cplx d = -r * r;
  return {r, d * a.z, d * a.zb, d * a.t};
}
J1 operator/(const J1& a, const J1& b) { return a * inv(b); }
J1 conj(const J1& a) { return {std::conj(a.v), std::conj(a.zb), std::conj(a.z), std::conj(a.t)}; }

// The frame quantities of f used throughout.
struct FrameData {
  J1 f, fb;      // with T slot
  J1 Zf, Zbf;    // horizontal only
  J1 Zfb, Zbfb;  // horizontal only
  J1 D;          // 1 - |f|^2 with T slot
};

FrameData frame_data(const Jet2& F) {
  FrameData d;
  d.f = {F.value, F.Z, F.Zb, F.T};
  d.fb = conj(d.f);
  d.Zf = {F.Z, F.ZZ, F.ZbZ, kNaN};
  d.Zbf = {F.Zb, F.ZZb, F.ZbZb, kNaN};
  d.Zfb = conj(d.Zbf);
  d.Zbfb = conj(d.Zf);
  d.D = 1.0 + (-(d.f * d.fb));
  if (!(d.D.v.real() > 0.0)) throw DomainError("degenerate Levi form: |f| >= 1");
  return d;
}

// Z~ g = Zg + f Zb g and Zb~ g = Zb g + fb Zg, as values.
cplx apply_zt(const FrameData& d, const J1& g) { return g.z + d.f.v * g.zb; }
cplx apply_ztb(const FrameData& d, const J1& g) { return g.zb + d.fb.v * g.z; }

struct Bracket {
  J1 c1, c2;
  cplx c3;
};

// [Z~, Zb~] in the frame (Z, Zb, T).
Bracket bracket_zt_ztb(const FrameData& d) {
  Bracket b;
  b.c1 = d.Zfb + d.f * d.Zbfb;
  b.c2 = -(d.Zbf + d.fb * d.Zf);
  b.c3 = -2.0 * I * d.D.v;
  return b;
}

cplx theta1(const FrameData& d, cplx v1, cplx v2) { return (v1 - d.fb.v * v2) / d.D.v; }
cplx theta1b(const FrameData& d, cplx v1, cplx v2) { return (v2 - d.f.v * v1) / d.D.v; }

struct BracketConnection {
  cplx a;
  J1 b, c;
  cplx A;
  Bracket B;
};

BracketConnection bracket_connection(const FrameData& d) {
  BracketConnection k;
  k.B = bracket_zt_ztb(d);
  k.c = -((k.B.c1 - d.fb * k.B.c2) / d.D);
  k.a = theta1(d, 0.0, d.f.t);
  k.A = -theta1(d, d.fb.t, 0.0);
  // Z~ D as a horizontal jet: -(fb Z~f + f Z~fb)
  const J1 ztf = d.Zf + d.f * d.Zbf;
  const J1 ztfb = d.Zfb + d.f * d.Zbfb;
  const J1 ztD = -(d.fb * ztf + d.f * ztfb);
  k.b = ztD / d.D - conj(k.c);
  return k;
}

double sup_abs(std::initializer_list<cplx> xs) {
  double m = 0.0;
  for (cplx x : xs) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const ConnectionData& c) {
  auto cj = [](cplx v) { return nlohmann::json::array({v.real(), v.imag()}); };
  j = nlohmann::json{{"omega_theta", cj(c.omega_theta)},
                     {"omega_1", cj(c.omega_1)},
                     {"omega_1bar", cj(c.omega_1bar)},
                     {"torsion", cj(c.torsion)},
                     {"levi", c.levi}};
}

ConnectionData connection_closed(const Jet2& F) {
  const FrameData d = frame_data(F);
  const cplx D = d.D.v;
  const cplx f = d.f.v, fb = d.fb.v;
  ConnectionData c;
  c.omega_theta = -fb * d.f.t / D;
  c.omega_1 = d.Zbf.v;
  const cplx zb_abs2 = fb * d.Zbf.v + f * d.Zbfb.v;
  c.omega_1bar = -(d.Zfb.v + fb * fb * d.Zf.v + zb_abs2) / D;
  c.torsion = -d.fb.t / D;
  c.levi = 2.0 * D.real();
  return c;
}

ConnectionData connection_brackets(const Jet2& F) {
  const FrameData d = frame_data(F);
  const BracketConnection k = bracket_connection(d);
  ConnectionData c;
  c.omega_theta = k.a;
  c.omega_1 = k.b.v;
  c.omega_1bar = k.c.v;
  c.torsion = k.A;
  c.levi = 2.0 * d.D.v.real();
  return c;
}

ConnectionData connection_form(const Deformation& d, const HPoint& p) {
  return connection_closed(frame_jet(d.f, p));
}

StructureResiduals structure_residuals(const Jet2& F) {
  const FrameData d = frame_data(F);
  const ConnectionData w = connection_closed(F);
  // theta^1 = g dz + k dzb
  const J1 one{1.0, 0.0, 0.0, 0.0};
  const J1 g = one / d.D;
  const J1 k = -(d.fb / d.D);
  struct Vec {
    cplx v1, v2, v3;
  };
  const Vec e[3] = {{1.0, d.f.v, 0.0}, {d.fb.v, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  auto deriv = [](const J1& q, const Vec& v) { return v.v1 * q.z + v.v2 * q.zb + v.v3 * q.t; };
  auto dtheta1 = [&](const Vec& a, const Vec& b) {
    return deriv(g, a) * b.v1 - deriv(g, b) * a.v1 + deriv(k, a) * b.v2 - deriv(k, b) * a.v2;
  };
  StructureResiduals r;
  r.first = sup_abs({dtheta1(e[0], e[1]) - w.omega_1bar, dtheta1(e[2], e[0]) + w.omega_theta,
                     dtheta1(e[2], e[1]) - w.torsion});
  // omega_1^1 + conj = d h / h
  const cplx ztD = -(d.fb.v * (d.Zf.v + d.f.v * d.Zbf.v) + d.f.v * (d.Zfb.v + d.f.v * d.Zbfb.v));
  const cplx ztbD = std::conj(ztD);
  const cplx tD = d.D.t;
  const cplx D = d.D.v;
  r.second = sup_abs({w.omega_theta + std::conj(w.omega_theta) - tD / D,
                      w.omega_1 + std::conj(w.omega_1bar) - ztD / D,
                      w.omega_1bar + std::conj(w.omega_1) - ztbD / D});
  return r;
}

StructureResiduals structure_residuals(const Deformation& d, const HPoint& p) {
  return structure_residuals(frame_jet(d.f, p));
}

double curvature_leading(const Jet2& F) {
  const Jet2 G = F.conjugate();
  const cplx f = F.value, fb = G.value;
  const cplx v = F.ZbZb + G.ZZ + fb * F.ZZb + fb * F.ZbZ + f * G.ZZb + f * G.ZbZ + std::norm(F.Z) +
                 3.0 * std::norm(F.Zb);
  return -v.real();
}

namespace {

double curvature_display(const FrameData& d) {
  const cplx f = d.f.v, fb = d.fb.v, D = d.D.v;
  const cplx Zf = d.Zf.v, Zbf = d.Zbf.v, Zfb = d.Zfb.v, Zbfb = d.Zbfb.v;
  const cplx ZZf = d.Zf.z, ZbZbf = d.Zbf.zb, ZZfb = d.Zfb.z, ZbZbfb = d.Zbfb.zb;
  const cplx ZZbf = d.Zbf.z, ZbZf = d.Zf.zb, ZZbfb = d.Zbfb.z, ZbZfb = d.Zfb.zb;
  const cplx ff = f * fb;
  const cplx Zff = fb * Zf + f * Zfb;
  const cplx Zbff = fb * Zbf + f * Zbfb;
  const cplx D2 = D * D;
  const cplx v = -ZbZbf / D - ZZfb / D - fb * fb / D * ZZf - f * f / D * ZbZbfb - fb / D * ZZbf - fb / D * ZbZf -
                 f / D * ZZbfb - f / D * ZbZfb - (Zf * Zbfb + Zbf * Zfb) / D - Zbf * Zfb / D -
                 fb * fb / D2 * Zf * Zbf - fb / D2 * Zbf * Zbf - (3.0 - ff) / D2 * f * Zbf * Zbfb -
                 f / D2 * Zfb * Zfb - (3.0 - ff) / D2 * fb * Zf * Zfb - fb * fb * fb / D2 * Zf * Zf -
                 Zff * Zbff / D2 - f * f / D2 * Zfb * Zbfb - (2.0 * ff - ff * ff) / D2 * Zf * Zbfb -
                 f * f * f / D2 * Zbfb * Zbfb - (Zfb + fb * fb * Zf + Zbff) * (Zbf + f * f * Zbfb + Zff) / D2;
  return v.real();
}

}  // namespace

CurvatureValue webster_curvature(const Jet2& F) {
  const FrameData d = frame_data(F);
  const BracketConnection k = bracket_connection(d);
  const cplx R = apply_zt(d, k.c) - apply_ztb(d, k.b) -
                 (theta1(d, k.B.c1.v, k.B.c2.v) * k.b.v + theta1b(d, k.B.c1.v, k.B.c2.v) * k.c.v + k.B.c3 * k.a);
  CurvatureValue out;
  out.R_exact = R.real();
  out.imag_residue = std::abs(R.imag());
  out.R_display = curvature_display(d);
  out.R_leading = curvature_leading(F);
  out.f_abs = std::abs(F.value);
  out.grad_abs = std::abs(F.Z) + std::abs(F.Zb);
  out.hess_abs = std::abs(F.ZZ) + std::abs(F.ZbZb) + std::abs(F.ZZb) + std::abs(F.ZbZ);
  return out;
}

CurvatureValue webster_curvature(const Deformation& d, const HPoint& p) { return webster_curvature(frame_jet(d.f, p)); }

void to_json(nlohmann::json& j, const CurvatureValue& c) {
  j = nlohmann::json{{"R_exact", c.R_exact},     {"R_display", c.R_display}, {"R_leading", c.R_leading},
                     {"imag_residue", c.imag_residue}, {"f_abs", c.f_abs},   {"grad_abs", c.grad_abs},
                     {"hess_abs", c.hess_abs}};
}

cplx sublaplacian_flat(const Jet2& u) { return 0.5 * (u.ZZb + u.ZbZ); }

cplx sublaplacian(const Jet2& F, const Jet2& u) {
  const FrameData d = frame_data(F);
  const BracketConnection k = bracket_connection(d);
  const J1 Zu{u.Z, u.ZZ, u.ZbZ, kNaN};
  const J1 Zbu{u.Zb, u.ZZb, u.ZbZb, kNaN};
  const J1 ztbu = Zbu + d.fb * Zu;
  const J1 ztu = Zu + d.f * Zbu;
  const cplx c = k.c.v;
  const cplx second = apply_zt(d, ztbu) + apply_ztb(d, ztu);
  return (second - c * ztu.v - std::conj(c) * ztbu.v) / (2.0 * d.D.v);
}

cplx sublaplacian(const Deformation& d, const ScalarField& u, const HPoint& p) {
  return sublaplacian(frame_jet(d.f, p), frame_jet(u, p));
}

cplx sublaplacian_closed(const Jet2& F, const Jet2& u) {
  const FrameData d = frame_data(F);
  const cplx f = d.f.v, fb = d.fb.v, D = d.D.v;
  const cplx ztfb = d.Zfb.v + f * d.Zbfb.v;
  const cplx ztbf = d.Zbf.v + fb * d.Zf.v;
  const cplx first = ((1.0 + f * fb) * sublaplacian_flat(u) + f * u.ZbZb + fb * u.ZZ) / D;
  const cplx corr = ((ztfb + fb * ztbf) * u.Z + (ztbf + f * ztfb) * u.Zb) / (D * D);
  return first + corr;
}

cplx sublaplacian_linear(const Jet2& F, const Jet2& u, double a, double b) {
  const cplx f = F.value, fb = std::conj(F.value);
  const cplx Zfb = std::conj(F.Zb);
  return sublaplacian_flat(u) + a * (f * u.ZbZb + fb * u.ZZ) + b * (Zfb * u.Z + F.Zb * u.Zb);
}

double conformal_sublaplacian(const Jet2& F, const Jet2& u) {
  return -4.0 * sublaplacian(F, u).real() + webster_curvature(F).R_exact * u.value.real();
}

double conformal_sublaplacian(const Deformation& d, const ScalarField& u, const HPoint& p) {
  if (!u.is_real_valued()) throw DomainError("conformal_sublaplacian: u must be real-valued");
  return conformal_sublaplacian(frame_jet(d.f, p), frame_jet(u, p));
}

}  // namespace crlab
