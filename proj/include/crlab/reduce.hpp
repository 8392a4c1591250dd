#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "crlab/bubbles.hpp"
#include "crlab/deform.hpp"
#include "crlab/quad.hpp"

namespace crlab {

/// Tensor grid on [-Lxy, Lxy]^2 x [-Lt, Lt]. Each axis is x = c sinh(b xi) on uniform xi,
/// with spacing h0 at the origin (uniform when the requested spacing already covers L).
struct GridParams {
  int n_xy = 25;
  int n_t = 25;
  double half_xy = 12.0;
  double half_t = 64.0;
  double h0_xy = 0.4 / 3.0;
  double h0_t = 0.4 / 3.0;
  double kappa = kVolumeDensity;
  /// "cholesky" (sparse LL^T with one refinement step) or "cg" (incomplete-Cholesky CG)
  std::string solver = "cholesky";
  double solver_tol = 1e-8;
  int solver_max_iter = 5000;

  /// About 25% more nodes per axis (kept odd) on the same coordinate map.
  GridParams refined() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const GridParams& g);
void from_json(const nlohmann::json& j, GridParams& g);

class Grid {
 public:
  explicit Grid(const GridParams& params);

  const GridParams& params() const { return params_; }
  int nx() const { return static_cast<int>(axes_[0].size()); }
  int ny() const { return static_cast<int>(axes_[1].size()); }
  int nt() const { return static_cast<int>(axes_[2].size()); }
  const std::vector<double>& axis(int a) const { return axes_[a]; }

  int full_size() const { return nx() * ny() * nt(); }
  int interior_size() const { return static_cast<int>(interior_to_full_.size()); }
  int full_index(int i, int j, int k) const { return (i * ny() + j) * nt() + k; }
  /// -1 on boundary nodes
  int interior_index(int full) const { return full_to_interior_[full]; }
  int full_of_interior(int n) const { return interior_to_full_[n]; }
  bool on_boundary(int full) const { return full_to_interior_[full] < 0; }
  HPoint point(int full) const;

  /// Lumped volume weights (kappa times the dual cell volume) on interior nodes.
  const Eigen::VectorXd& weights() const { return weights_; }

 private:
  GridParams params_;
  std::array<std::vector<double>, 3> axes_;
  std::vector<int> full_to_interior_;
  std::vector<int> interior_to_full_;
  Eigen::VectorXd weights_;
};

/// Values on the interior nodes of a grid; boundary values are implicit (zero unless stated).
struct GridField {
  std::shared_ptr<const Grid> grid;
  Eigen::VectorXd values;
};

GridField sample(const std::shared_ptr<const Grid>& grid, const std::function<double(const HPoint&)>& u);

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Stiffness of q(u) = sum over cells of the forward- and backward-anchored half contributions
/// w (A Xu Xu + B Yu Yu + 2C Xu Yu), with one-sided differences for X = dx + 2y dt, Y = dy - 2x dt.
/// coeffs[full] = (A, B, C); rows and columns cover all nodes.
SparseMatrix assemble_stiffness(const Grid& grid, const std::vector<std::array<double, 3>>& coeffs);

/// Stiffness restricted to the anchors where `active` is set, with coefficient (A, B, C) - flat.
SparseMatrix assemble_stiffness_delta(const Grid& grid, const std::vector<std::array<double, 3>>& coeffs,
                                      const std::vector<char>& active);

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> history;
};

/// Discrete D0 = (X^2 + Y^2)/4 on a grid: D_h = -W^{-1} K with K the flat stiffness.
class PoissonOperator {
 public:
  explicit PoissonOperator(std::shared_ptr<const Grid> grid);

  const Grid& grid() const { return *grid_; }
  std::shared_ptr<const Grid> grid_ptr() const { return grid_; }

  /// Interior-interior and interior-boundary blocks of K.
  const SparseMatrix& stiffness() const { return K_ii_; }
  const SparseMatrix& boundary_coupling() const { return K_ib_; }

  /// D_h u on interior nodes for interior values u and boundary values bc (full-grid boundary order).
  Eigen::VectorXd apply(const Eigen::VectorXd& u, const Eigen::VectorXd& bc) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;

  /// Solves K u = b on interior nodes; throws SolverError with the residual history on failure.
  Eigen::VectorXd solve_stiffness(const Eigen::VectorXd& b, SolveReport* report = nullptr) const;

  /// <u, v>_X = u^T K v
  double x_inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;

  /// Boundary values of g in the boundary ordering used by `apply`.
  Eigen::VectorXd boundary_values(const std::function<double(const HPoint&)>& g) const;

 private:
  std::shared_ptr<const Grid> grid_;
  SparseMatrix K_ii_;
  SparseMatrix K_ib_;
  std::vector<int> boundary_nodes_;
  struct Factor;
  std::shared_ptr<const Factor> factor_;
};

/// D_h u = rhs with u = bc on the boundary.
GridField solve_poisson(const PoissonOperator& op, const GridField& rhs,
                        const std::function<double(const HPoint&)>& bc, SolveReport* report = nullptr);

/// int u L_J u - int u^4 on the rule (u real).
double functional_value(const Deformation& d, const ScalarField& u, const QuadratureRule& rule);

/// Preconditioned MINRES for symmetric A with a symmetric positive semidefinite preconditioner.
struct MinresResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

MinresResult minres(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& A,
                    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& precond,
                    const Eigen::VectorXd& b, double tol, int max_iter);

struct ReduceOptions {
  GridParams grid;
  QuadratureParams quad;
  /// The grid lives in frame coordinates q with p = frame_center . delta_{1/frame_scale}(q).
  HPoint frame_center{};
  double frame_scale = 1.0;
  /// Gauss-Legendre rule on each support ball, for the bubble functional.
  int support_order = 8;
  int support_panels = 3;
  double tol = 1e-8;
  int max_outer = 25;
  double minres_tol = 1e-10;
  int minres_max_iter = 400;
  double gram_condition_max = 1e8;

  /// Frame centred on the first support ball of d with that ball at unit radius; identity otherwise.
  ReduceOptions with_frame_for(const Deformation& d) const;
};

void to_json(nlohmann::json& j, const ReduceOptions& o);
void from_json(const nlohmann::json& j, ReduceOptions& o);

struct ReducedState {
  BubbleParams params;
  /// In frame coordinates; the X norm is invariant under the change of frame.
  GridField v;
  double residual_norm = 0.0;
  int iterations = 0;
  Eigen::Matrix4d gram = Eigen::Matrix4d::Zero();
  std::vector<double> residual_history;
  int linear_iterations = 0;
  double v_norm_x = 0.0;
  /// max of U_{x,lambda} + v over grid nodes in the support (all nodes when unbounded)
  double max_u = 0.0;
  /// max_j |<v, e_j>_X| / (|v|_X |e_j|_X)
  double orthogonality = 0.0;
  double bubble_value = 0.0;
  double value = 0.0;
  /// |grad J(U + v)|_X and its component along the tangent span
  double gradient_norm = 0.0;
  double tangent_gradient_norm = 0.0;
};

void to_json(nlohmann::json& j, const ReducedState& s);

/// Discrete tangent span: m_j = -W D0 e_j, q_j = K^{-1} m_j, G = M^T Q.
struct TangentData {
  Eigen::Matrix<double, Eigen::Dynamic, 4> M;
  Eigen::Matrix<double, Eigen::Dynamic, 4> Q;
  Eigen::Matrix4d G;
  Eigen::Matrix4d G_inv;

  /// u minus its X-orthogonal projection on span(q_j)
  Eigen::VectorXd project(const Eigen::VectorXd& u) const;
};

/// Per-cell discrete problem in frame coordinates.
struct CellProblem {
  BubbleParams params;
  /// the bubble seen in frame coordinates
  BubbleParams frame_params;
  Eigen::VectorXd U;
  /// L_J U - 2U^3 at interior nodes (exact pointwise)
  Eigen::VectorXd rho0;
  /// Webster curvature at interior nodes
  Eigen::VectorXd curvature;
  /// K_J - K_0 on interior nodes
  SparseMatrix delta_stiffness;
  bool flat = true;
  std::vector<char> in_support;
  TangentData tangent;
  /// J_J(U_{x,lambda}) from quadrature
  double bubble_value = 0.0;
};

class Reducer {
 public:
  Reducer(const BubbleFamily& family, const ReduceOptions& options = {});

  const ReduceOptions& options() const { return options_; }
  const BubbleFamily& family() const { return family_; }
  const PoissonOperator& poisson() const { return *poisson_; }
  std::shared_ptr<const Grid> grid() const { return grid_; }

  /// (x, lambda) as seen from the frame.
  BubbleParams to_frame(const BubbleParams& params) const;
  /// Frame point to original point.
  HPoint from_frame(const HPoint& q) const;

  /// X Gram matrix of the real tangent basis at (x, lambda) from the closed forms.
  Eigen::Matrix4d gram_matrix(const BubbleParams& params) const;

  TangentData tangent_data(const BubbleParams& params) const;
  /// u minus its X-orthogonal projection on the discrete tangent span at params.
  GridField project_E(const GridField& u, const BubbleParams& params) const;

  /// J_J(U_{x,lambda}) = int U^4 + int U (L_J - L_0) U; `refined` doubles the quadrature.
  double bubble_functional(const BubbleParams& params, const Deformation& d, bool refined = false) const;

  CellProblem prepare(const BubbleParams& params, const Deformation& d) const;

  /// Phi(v) = J_J(U + v) on the grid, exact at v = 0 up to quadrature.
  double discrete_functional(const CellProblem& cell, const Eigen::VectorXd& v) const;
  /// L_J(U + v) - 2(U + v)^3 on interior nodes.
  Eigen::VectorXd residual(const CellProblem& cell, const Eigen::VectorXd& v) const;
  /// X representative of dPhi: <g, w>_X = dPhi(v)[w].
  GridField functional_gradient(const CellProblem& cell, const Eigen::VectorXd& v) const;

  ReducedState ls_solve(const BubbleParams& params, const Deformation& d) const;
  ReducedState ls_solve(const CellProblem& cell) const;
  double reduced_functional(const BubbleParams& params, const Deformation& d) const;

  /// X norm of the tangent component of the fully discrete flat gradient at U_{x,lambda}:
  /// what the grid reports along the tangent span at an exact critical point.
  double gradient_floor(const BubbleParams& params) const;

 private:
  const BubbleFamily& family_;
  ReduceOptions options_;
  std::shared_ptr<const Grid> grid_;
  std::shared_ptr<const PoissonOperator> poisson_;
  Eigen::Matrix4d gram_unit_;
  double bubble_l4_ = 0.0;
  double bubble_l4_refined_ = 0.0;
};

/// Omega = {(x, lambda) : |x_k^{-1} x| < R, alpha/R < lambda < beta/r}.
struct ScanWindow {
  HPoint center{};
  double R = 1.0;
  double r = 0.1;
  double alpha = 2.0;
  double beta = 1.0;
  int n_x = 9;
  int n_y = 9;
  int n_t = 5;
  int n_lambda = 7;

  void validate() const;
  double lambda_min() const { return alpha / R; }
  double lambda_max() const { return beta / r; }
};

void to_json(nlohmann::json& j, const ScanWindow& w);
void from_json(const nlohmann::json& j, ScanWindow& w);

struct ScanCell {
  std::array<int, 4> index{};
  BubbleParams params;
  bool boundary = false;
  std::string status = "pending";
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  double bubble_value = 0.0;
  double v_norm = 0.0;
  double max_u = 0.0;
  double gradient_norm = 0.0;
  double tangent_gradient_norm = 0.0;
};

struct ScanVerdict {
  std::string verdict;
  double interior_max = 0.0;
  double boundary_max = 0.0;
  double margin = 0.0;
  double quadrature_noise = 0.0;
  /// |value on the refined grid - value| at the two argmax cells
  double grid_noise = 0.0;
  double valid_fraction = 0.0;
  int interior_argmax = -1;
  int boundary_argmax = -1;
  double gradient_norm = 0.0;
  double tangent_gradient_noise = 0.0;
  bool gradient_ok = false;
  double blowup_proxy = 0.0;
  int exit_code = 2;
};

void to_json(nlohmann::json& j, const ScanVerdict& v);

struct ScanResult {
  ScanWindow window;
  std::vector<ScanCell> cells;
  ScanVerdict verdict;
};

/// Evaluates the reduced functional on the window grid (cells with |x_k^{-1} x| <= R) and compares the
/// interior maximum with the maximum over boundary cells (extreme lambda, or a grid neighbour outside).
ScanResult scan_window(const Reducer& red, const ScanWindow& w, const Deformation& d, int threads = 1);

/// Columns: x, y, t, lambda, value, residual, iterations, cell_status, boundary, bubble_value, v_norm, max_u
std::string scan_csv(const ScanResult& s);

}  // namespace crlab
