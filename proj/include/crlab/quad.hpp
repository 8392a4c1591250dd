#pragma once

#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "crlab/bubbles.hpp"
#include "crlab/heis.hpp"

namespace crlab {

/// theta ^ d theta = kVolumeDensity dx dy dt for theta = dt + 2x dy - 2y dx.
inline constexpr double kVolumeDensity = 4.0;

struct QuadratureParams {
  /// Gauss-Legendre nodes per panel and panels per axis on (-1, 1)
  int order = 6;
  int panels_xy = 6;
  int panels_t = 6;
  /// stretch lengths of xi -> L xi / (1 - xi^2)
  double scale_xy = 1.5;
  double scale_t = 2.5;
  double kappa = kVolumeDensity;

  QuadratureParams refined() const;
};

void to_json(nlohmann::json& j, const QuadratureParams& q);
void from_json(const nlohmann::json& j, QuadratureParams& q);

/// Compactified tensor rule on R^3 with weights including the contact volume density.
class QuadratureRule {
 public:
  explicit QuadratureRule(const QuadratureParams& params = {});

  /// The same rule carried by p -> c . delta_{1/lambda}(p), concentrated at scale 1/lambda about c.
  QuadratureRule mapped(const HPoint& center, double lambda) const;

  /// Gauss-Legendre panels on c . ([-a, a]^2 x [-a^2, a^2]), which contains the Koranyi ball B_a(c).
  static QuadratureRule koranyi_box(const HPoint& center, double a, int order, int panels,
                                    double kappa = kVolumeDensity);

  /// Concatenation of node sets (disjoint supports are the caller's responsibility).
  void append(const QuadratureRule& other);

  const std::vector<HPoint>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return nodes_.size(); }
  const QuadratureParams& params() const { return params_; }

 private:
  struct Empty {};
  explicit QuadratureRule(Empty) {}
  QuadratureParams params_;
  std::vector<HPoint> nodes_;
  std::vector<double> weights_;
};

/// Pairwise sum, independent of thread count.
double pairwise_sum(std::span<const double> v);

/// Weighted sum over the nodes. Throws DomainError naming the first non-finite node.
double integrate(const std::function<double(const HPoint&)>& u, const QuadratureRule& rule);
double integrate_values(std::span<const double> values, const QuadratureRule& rule);

/// <u, v>_X = kappa int Re(Zu conj(Zv)) dx dy dt = -int u D0 v.
double x_inner(const ScalarField& u, const ScalarField& v, const QuadratureRule& rule);

/// (int |u|^p)^{1/p}
double lp_norm(const std::function<double(const HPoint&)>& u, double p, const QuadratureRule& rule);

struct VolumeCalibration {
  double kappa = 0.0;
  double integral = 0.0;
  double target = 0.0;
  double relative_error = 0.0;
  double refined_relative_error = 0.0;
  bool pass = false;
};

void to_json(nlohmann::json& j, const VolumeCalibration& v);

/// Checks int U^4 = 4 pi^2 at the given density on the rule and on its refinement.
VolumeCalibration calibrate_volume(const BubbleFamily& fam, const QuadratureParams& q, double tol = 1e-3,
                                   double refined_tol = 5e-4);

}  // namespace crlab
