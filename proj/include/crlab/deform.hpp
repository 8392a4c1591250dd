#pragma once

#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crlab/jets.hpp"

namespace crlab {

/// The field f of the structure Z~ = Z + f Zb, with support metadata.
struct Deformation {
  ScalarField f;
  /// Koranyi radius about `support_center` outside of which f vanishes.
  double support_radius = std::numeric_limits<double>::infinity();
  HPoint support_center{};
  double sup_bound = 0.0;
  std::string kind = "zero";
  /// Balls whose union contains the support, when it is bounded.
  std::vector<KoranyiBall> support_balls;

  bool is_zero() const { return kind == "zero"; }
};

Deformation zero_deformation();

/// phi(z,t) = ((t - i(1+|z|^2)) / (t + i(1+|z|^2)))^3, unimodular.
cplx rossi_phi(const HPoint& p);
ScalarField rossi_phi_field();

/// f = s phi. Throws DomainError for |s| >= 1.
Deformation rossi_deformation(double s);

struct GluingSpec {
  std::vector<HPoint> centers;
  std::vector<double> radii;
  std::vector<double> amplitudes;
  double annulus = 2.0;
  /// "quintic" or "smooth"
  std::string profile = "quintic";

  /// Throws ConfigError on size mismatch, |s_k| >= 1, A <= 1 or overlapping balls.
  void validate() const;
};

void to_json(nlohmann::json& j, const GluingSpec& g);
void from_json(const nlohmann::json& j, GluingSpec& g);

/// chi(u) for u = (rho - 1)/(A - 1): 1 - (10u^3 - 15u^4 + 6u^5) on [0, 1].
double quintic_cutoff(double u);
/// C-infinity alternative: psi(1-u) / (psi(1-u) + psi(u)) with psi(x) = exp(-1/x).
double smooth_cutoff(double u);

/// f(p) = s_k chi(|L_{x_k} p| / r_k) phi(p) on B_{A r_k}(x_k), 0 elsewhere.
Deformation glued_deformation(const GluingSpec& spec);

struct DeformationReport {
  double sup_f = 0.0;
  double gamma2 = 0.0;
  std::array<double, 7> gamma2_components{};
  bool admissible = true;
  bool support_ok = true;
  double alpha = 0.0;
  bool pass = true;
};

void to_json(nlohmann::json& j, const DeformationReport& r);

DeformationReport validate_deformation(const Deformation& d, std::span<const HPoint> probes, double alpha);

}  // namespace crlab
