#pragma once

#include <array>
#include <vector>

#include <nlohmann/json.hpp>

#include "crlab/jets.hpp"

namespace crlab {

/// Center and concentration scale of U_{x,lambda}.
struct BubbleParams {
  HPoint center{};
  double lambda = 1.0;

  /// Throws DomainError unless lambda > 0 and the center is finite.
  void validate() const;
};

struct BubbleConstant {
  double c1 = 0.0;
  /// ratio L_{J0}w / (2 w^3) averaged over the probes; c1 = sqrt(rho)
  double rho = 0.0;
  double rho_spread = 0.0;
  double residual = 0.0;
  std::vector<HPoint> probes;
};

void to_json(nlohmann::json& j, const BubbleConstant& c);

/// w(p) = (t^2 + (1 + |z|^2)^2)^{-1/2}, the bubble profile without its constant.
ScalarField bubble_profile();

/// Derives c1 from the flat Yamabe identity L_{J0}(c1 w) = 2 (c1 w)^3.
/// Throws CalibrationError if the ratio is not constant over the probes.
BubbleConstant calibrate_c1(int nprobes = 24, double spread_tol = 1e-9, double residual_tol = 1e-8);

/// Index of the four real tangent generators.
enum class Tangent { ReZ = 0, ImZ = 1, T = 2, Xi = 3 };

/// The bubble family for a given calibrated constant.
class BubbleFamily {
 public:
  explicit BubbleFamily(const BubbleConstant& c);

  double c1() const { return c1_; }

  double standard(const HPoint& p) const;
  Jet2 standard_jet(const HPoint& p) const;

  /// u_{x,lambda}(p) = lambda U(delta_lambda(L_x p)).
  double value(const BubbleParams& b, const HPoint& p) const;
  Jet2 jet(const BubbleParams& b, const HPoint& p) const;

  ScalarField standard_field() const;
  ScalarField field(const BubbleParams& b) const;

  /// Z U_{x,lambda}, Zb U_{x,lambda}, T U_{x,lambda}, Xi U_{x,lambda} in closed form.
  /// Xi acts as the dilation generator about the center x.
  std::array<ScalarField, 4> tangent_fields(const BubbleParams& b) const;

  /// Real basis of the tangent space of the family: Re ZU, Im ZU, TU and U + XiU = lambda dU/dlambda
  /// (Zb U is the conjugate of ZU; XiU alone is not tangent, since <U, XiU>_X = -|U|_X^2).
  std::array<ScalarField, 4> tangent_basis(const BubbleParams& b) const;

  /// Factors d_j with basis_j(x, lambda) = d_j * (lambda-rescaled basis_j(e, 1)) in X norm.
  static std::array<double, 4> tangent_scaling(double lambda);

 private:
  double c1_;
};

/// Process-wide family, calibrated on first use.
const BubbleFamily& default_bubbles();

}  // namespace crlab
