#pragma once

#include <nlohmann/json.hpp>

#include "crlab/deform.hpp"
#include "crlab/jets.hpp"

namespace crlab {

/// omega_1^1 = omega_theta theta + omega_1 theta^1 + omega_1bar theta^1bar, torsion A^1_1bar,
/// Levi form h_11bar = 2(1 - |f|^2).
struct ConnectionData {
  cplx omega_theta{};
  cplx omega_1{};
  cplx omega_1bar{};
  cplx torsion{};
  double levi = 2.0;
};

void to_json(nlohmann::json& j, const ConnectionData& c);

/// Closed-form connection of Z + f Zb from the jets of f.
ConnectionData connection_closed(const Jet2& f);
/// Connection solved from the Lie brackets of the frame Z~, Zb~, T.
ConnectionData connection_brackets(const Jet2& f);
ConnectionData connection_form(const Deformation& d, const HPoint& p);

/// Largest absolute coefficient mismatch in the two structure equations, with the closed-form
/// connection against d theta^1 assembled from the coframe coefficients.
struct StructureResiduals {
  double first = 0.0;
  double second = 0.0;
};

StructureResiduals structure_residuals(const Jet2& f);
StructureResiduals structure_residuals(const Deformation& d, const HPoint& p);

struct CurvatureValue {
  /// from d omega_1^1 with the bracket connection
  double R_exact = 0.0;
  /// the closed final expansion with (1 - |f|^2)^{-2} denominators
  double R_display = 0.0;
  double R_leading = 0.0;
  /// |Im| of the exact value before it is made real
  double imag_residue = 0.0;
  double f_abs = 0.0;
  double grad_abs = 0.0;
  double hess_abs = 0.0;
};

void to_json(nlohmann::json& j, const CurvatureValue& c);

CurvatureValue webster_curvature(const Jet2& f);
CurvatureValue webster_curvature(const Deformation& d, const HPoint& p);

/// -(Zb^2 f + Z^2 fb + fb Z Zb f + fb Zb Z f + f Z Zb fb + f Zb Z fb + |Zf|^2 + 3|Zb f|^2)
double curvature_leading(const Jet2& f);

/// h^{11bar}(Z~Zb~ + Zb~Z~ - omega(Zb~) Z~ - conj(omega(Zb~)) Zb~) u.
cplx sublaplacian(const Jet2& f, const Jet2& u);
cplx sublaplacian(const Deformation& d, const ScalarField& u, const HPoint& p);

/// [(1+|f|^2) D0 u + f Zb^2 u + fb Z^2 u] / (1-|f|^2)
///   + [(Z~fb + fb Zb~f) Zu + (Zb~f + f Z~fb) Zb u] / (1-|f|^2)^2
cplx sublaplacian_closed(const Jet2& f, const Jet2& u);

/// First-order part D0 u + a (f Zb^2 u + fb Z^2 u) + b (Zfb Zu + Zbf Zb u).
cplx sublaplacian_linear(const Jet2& f, const Jet2& u, double a, double b);

/// D0 u = (Z Zb u + Zb Z u) / 2
cplx sublaplacian_flat(const Jet2& u);

/// -4 Re(Delta u) + R u
double conformal_sublaplacian(const Jet2& f, const Jet2& u);
double conformal_sublaplacian(const Deformation& d, const ScalarField& u, const HPoint& p);

}  // namespace crlab
