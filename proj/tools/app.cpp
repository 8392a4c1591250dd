#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "crlab/bubbles.hpp"
#include "crlab/cayley.hpp"
#include "crlab/error.hpp"
#include "crlab/heis.hpp"
#include "crlab/jets.hpp"
#include "crlab/webster.hpp"

#ifndef CRLAB_VERSION
#define CRLAB_VERSION "unknown"
#endif

namespace crlab::app {

namespace {

constexpr double kFourPi2 = 4.0 * std::numbers::pi * std::numbers::pi;

const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> t{
      {"c1_residual", 1e-8},  {"volume", 1e-3},        {"volume_refined", 5e-4}, {"pushforward", 1e-7},
      {"structure", 1e-8},    {"sublaplacian", 1e-8},  {"group", 1e-12},         {"commutator", 1e-10},
      {"gradient_fd", 1e-3},  {"orthogonality", 1e-6}, {"harmonic", 1e-10},     {"stencil_order", 0.3},
      {"s_slope", 0.2},       {"lambda_slope", 0.3},   {"curvature_slope", 0.1}};
  return t;
}

HPoint random_point(std::mt19937_64& rng, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  const double x = u(rng), y = u(rng), t = u(rng);
  return {x, y, t};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Report base_report(const RunConfig& cfg, const std::string& command) {
  Report r;
  r.json["command"] = command;
  r.json["config_hash"] = cfg.hash();
  r.json["version"] = CRLAB_VERSION;
  r.json["seed"] = cfg.seed;
  return r;
}

Check below(std::string name, double value, double threshold, bool gating = true) {
  return {std::move(name), value, threshold, value < threshold, gating};
}

void add_checks(Report& r, const std::vector<Check>& checks) {
  bool pass = true;
  for (const Check& c : checks) {
    r.json["checks"].push_back(c);
    if (c.gating && !c.pass) pass = false;
    r.summary.push_back(std::string(c.pass ? "PASS " : (c.gating ? "FAIL " : "INFO ")) + c.name + " = " +
                        short_fmt(c.value) + " (threshold " + short_fmt(c.threshold) + ")");
  }
  if (!pass) r.exit_code = kFail;
  r.json["pass"] = pass;
}

ScalarField generic_field() {
  const cplx I{0.0, 1.0};
  return ScalarField(
      [I](const Dual2& x, const Dual2& y, const Dual2& t) {
        return (x + 2.0 * I * y) * exp(-0.5 * (x * x + y * y) - 0.3 * t * t) + t * x * y;
      },
      false);
}

std::vector<Check> suite_heis(std::mt19937_64& rng, const RunConfig& cfg) {
  double assoc = 0.0, inv = 0.0, autom = 0.0, homog = 0.0, triangle = 0.0;
  auto diff = [](const HPoint& a, const HPoint& b) {
    return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.t - b.t)});
  };
  std::uniform_real_distribution<double> lam(0.2, 5.0);
  for (int n = 0; n < 200; ++n) {
    const HPoint p = random_point(rng, 2.0), q = random_point(rng, 2.0), s = random_point(rng, 2.0);
    const double l = lam(rng);
    assoc = std::max(assoc, diff(group_mul(group_mul(p, q), s), group_mul(p, group_mul(q, s))));
    inv = std::max(inv, diff(group_mul(p, group_inv(p)), HPoint{}));
    autom = std::max(autom, diff(dilate(l, group_mul(p, q)), group_mul(dilate(l, p), dilate(l, q))) / (l * l));
    homog = std::max(homog, std::abs(koranyi_norm(dilate(l, p)) - l * koranyi_norm(p)) / (l * koranyi_norm(p)));
    triangle = std::max(triangle, koranyi_distance(p, s) - koranyi_distance(p, q) - koranyi_distance(q, s));
  }
  const double g = cfg.tol("group");
  return {below("associativity", assoc, g), below("inverse", inv, g), below("dilation automorphism", autom, g),
          below("Koranyi homogeneity", homog, g), below("triangle inequality excess", std::max(triangle, 0.0), g)};
}

std::vector<Check> suite_jets(std::mt19937_64& rng, const RunConfig& cfg) {
  double comm = 0.0, xi = 0.0;
  const ScalarField u = generic_field();
  const ScalarField b = default_bubbles().field({{0.3, -0.2, 0.1}, 1.4});
  for (int n = 0; n < 100; ++n) {
    const HPoint p = random_point(rng, 1.5);
    for (const ScalarField* f : {&u, &b}) {
      const Jet2 j = frame_jet(*f, p);
      const double s = std::max({1.0, std::abs(j.ZZb), std::abs(j.ZbZ)});
      comm = std::max(comm, std::abs(j.ZZb - j.ZbZ + cplx(0.0, 2.0) * j.T) / s);
      const double h = 1e-5;
      const cplx fd = (f->value(dilate(std::exp(h), p)) - f->value(dilate(std::exp(-h), p))) / (2 * h);
      xi = std::max(xi, std::abs(xi_apply(*f, p) - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return {below("commutator [Z, Zb] + 2iT", comm, cfg.tol("commutator")),
          below("Xi against the dilation derivative", xi, 1e-7)};
}

double yamabe_residual(std::mt19937_64& rng, int probes) {
  const BubbleFamily& fam = default_bubbles();
  std::uniform_real_distribution<double> lam(0.3, 4.0);
  double worst = 0.0;
  for (int n = 0; n < probes; ++n) {
    const BubbleParams b{random_point(rng, 1.0), lam(rng)};
    const HPoint p = group_mul(b.center, dilate(1.0 / b.lambda, random_point(rng, 3.0)));
    const Jet2 j = fam.jet(b, p);
    const double v = j.value.real();
    const double L = -2.0 * (j.ZZb + j.ZbZ).real();
    worst = std::max(worst, std::abs(L - 2 * v * v * v) / (v * v * v));
  }
  return worst;
}

std::vector<Check> suite_bubbles(std::mt19937_64& rng, const RunConfig& cfg) {
  return {below("Yamabe identity |L U - 2U^3| / U^3", yamabe_residual(rng, 1000), cfg.tol("c1_residual")),
          below("|c1 - sqrt 2|", std::abs(default_bubbles().c1() - std::numbers::sqrt2), 1e-12)};
}

std::vector<Check> suite_quad(std::mt19937_64&, const RunConfig& cfg) {
  const BubbleFamily& fam = default_bubbles();
  const VolumeCalibration v = calibrate_volume(fam, cfg.quad, cfg.tol("volume"), cfg.tol("volume_refined"));
  const QuadratureRule rule(cfg.quad.refined());
  const double xn = x_inner(fam.standard_field(), fam.standard_field(), rule);
  const double target = 0.5 * kFourPi2;
  return {below("int U^4 relative error", v.relative_error, cfg.tol("volume")),
          below("int U^4 relative error, refined", v.refined_relative_error, cfg.tol("volume_refined")),
          below("|U|_X^2 relative error, refined rule", std::abs(xn - target) / target, cfg.tol("volume"))};
}

std::vector<Check> suite_deform(std::mt19937_64& rng, const RunConfig& cfg) {
  double unimodular = 0.0, inside = 0.0, outside = 0.0;
  const GluingSpec g = cfg.deformation.gluing;
  const Deformation d = glued_deformation(g);
  const double r = g.radii.at(0), s = g.amplitudes.at(0);
  std::vector<HPoint> probes;
  for (int n = 0; n < 200; ++n) {
    const HPoint p = random_point(rng, 3.0);
    unimodular = std::max(unimodular, std::abs(std::abs(rossi_phi(p)) - 1.0));
    const HPoint q = group_mul(g.centers[0], dilate(r * g.annulus, random_point(rng, 0.8)));
    probes.push_back(q);
    const double rho = koranyi_distance(q, g.centers[0]);
    if (rho < r) inside = std::max(inside, std::abs(d.f.value(q) - s * rossi_phi(q)));
    if (rho > g.annulus * r) outside = std::max(outside, std::abs(d.f.value(q)));
  }
  const DeformationReport rep = validate_deformation(d, probes, 1e300);
  return {below("| |phi| - 1 |", unimodular, 1e-14),
          below("glued f - s phi inside the ball", inside, 1e-14),
          below("glued f outside the annulus", outside, 1e-300),
          below("sup |f| / s", rep.sup_f / std::abs(s), 1.0 + 1e-12),
          Check{"support and admissibility", rep.admissible && rep.support_ok ? 1.0 : 0.0, 1.0,
                rep.admissible && rep.support_ok, true}};
}

std::vector<Check> suite_cayley(std::mt19937_64& rng, const RunConfig& cfg, int points) {
  double z = 0.0, spurious = 0.0, ratio = 0.0, roundtrip = 0.0;
  for (int n = 0; n < points; ++n) {
    const HPoint p = random_point(rng, 2.0);
    const PushforwardCheck c = pushforward_W_check(p);
    const double scale = std::abs(c.predicted);
    z = std::max(z, std::abs(c.measured.z - c.predicted) / scale);
    spurious = std::max(spurious, std::max(std::abs(c.measured.zb), std::abs(c.measured.t)) / scale);
    const double s = 0.1;
    ratio = std::max(ratio, std::abs(rossi_pushforward_ratio(p, s) + s * rossi_phi(p)));
    const HPoint q = cayley(cayley_inv(p));
    roundtrip = std::max({roundtrip, std::abs(q.x - p.x), std::abs(q.y - p.y), std::abs(q.t - p.t)});
  }
  const double t = cfg.tol("pushforward");
  return {below("dF(W) Z coefficient relative error", z, t), below("dF(W) spurious Zb/T components", spurious, t),
          below("dF(W + sWb) ratio + s phi", ratio, t), below("F(F^-1(p)) - p", roundtrip, 1e-10)};
}

Deformation polynomial_deformation(double s) {
  const cplx I{0.0, 1.0};
  Deformation d;
  d.f = ScalarField(
      [s, I](const Dual2& x, const Dual2& y, const Dual2& t) {
        const Dual2 z = x + I * y;
        return s * (x + 2.0 * I * y * t + x * y + I * t * t + z * z / 3.0);
      },
      false);
  d.kind = "polynomial";
  return d;
}

/// |R_exact - R_leading| over s = 1e-1, 1e-2, 1e-3 at a fixed point.
std::vector<double> curvature_remainders(Deformation (*make)(double)) {
  const HPoint p{0.3, -0.2, 0.5};
  std::vector<double> rem;
  for (double v : {1e-1, 1e-2, 1e-3}) {
    const CurvatureValue c = webster_curvature(make(v), p);
    rem.push_back(std::abs(c.R_exact - c.R_leading));
  }
  return rem;
}

std::vector<Check> suite_webster(std::mt19937_64& rng, const RunConfig& cfg) {
  double structure = 0.0, sub = 0.0, imag = 0.0;
  const Deformation glued = glued_deformation(cfg.deformation.gluing);
  const HPoint c0 = cfg.deformation.gluing.centers.at(0);
  const double reach = cfg.deformation.gluing.radii.at(0) * cfg.deformation.gluing.annulus;
  const ScalarField u = default_bubbles().field({{0.1, 0.2, -0.1}, 1.3});
  for (const Deformation& d : {rossi_deformation(0.1), rossi_deformation(0.05), rossi_deformation(0.01), glued}) {
    for (int n = 0; n < 200; ++n) {
      const HPoint p = d.kind == "glued" ? group_mul(c0, dilate(reach, random_point(rng, 0.8))) : random_point(rng, 3.0);
      const StructureResiduals r = structure_residuals(d, p);
      structure = std::max({structure, r.first, r.second});
      const Jet2 f = frame_jet(d.f, p), j = frame_jet(u, p);
      const cplx a = sublaplacian(f, j), b = sublaplacian_closed(f, j);
      sub = std::max(sub, std::abs(a - b) / std::abs(a));
      const CurvatureValue cv = webster_curvature(f);
      imag = std::max(imag, cv.imag_residue / std::max(1.0, std::abs(cv.R_exact)));
    }
  }
  const std::vector<double> rossi_rem = curvature_remainders(rossi_deformation);
  const double generic = loglog_slope({1e-1, 1e-2, 1e-3}, curvature_remainders(polynomial_deformation)).slope;
  return {below("structure equation residual", structure, cfg.tol("structure")),
          below("closed-form vs defining sublaplacian", sub, cfg.tol("sublaplacian")),
          below("imaginary residue of R", imag, 1e-10),
          below("curvature remainder for f = s phi", *std::max_element(rossi_rem.begin(), rossi_rem.end()), 1e-12,
                false),
          Check{"curvature remainder slope in s, generic polynomial f (target 2)", generic, cfg.tol("curvature_slope"),
                std::abs(generic - 2.0) < cfg.tol("curvature_slope"), false}};
}

GridParams uniform_grid(int n, double half_xy, double half_t) {
  GridParams g;
  g.n_xy = g.n_t = n;
  g.half_xy = half_xy;
  g.half_t = half_t;
  g.h0_xy = 2.0 * half_xy / (n - 1);
  g.h0_t = 2.0 * half_t / (n - 1);
  return g;
}

double manufactured_error(int n) {
  const ScalarField u(
      [](const Dual2& x, const Dual2& y, const Dual2& t) { return exp(-1.0 * (x * x + y * y) - 0.25 * t * t + 0.3 * x * t); },
      true);
  auto exact = [&](const HPoint& p) { return u.value(p).real(); };
  auto g = std::make_shared<const Grid>(uniform_grid(n, 4.0, 8.0));
  const PoissonOperator op(g);
  const GridField lap = sample(g, [&](const HPoint& p) { return sublaplacian_flat(frame_jet(u, p)).real(); });
  return (solve_poisson(op, lap, exact).values - sample(g, exact).values).cwiseAbs().maxCoeff();
}

std::vector<Check> suite_reduce(std::mt19937_64& rng, const RunConfig& cfg) {
  std::vector<Check> out;
  auto g = std::make_shared<const Grid>(uniform_grid(11, 3.0, 6.0));
  const PoissonOperator op(g);
  const GridField zero{g, Eigen::VectorXd::Zero(g->interior_size())};
  const GridField c = solve_poisson(op, zero, [](const HPoint&) { return 1.5; });
  out.push_back(below("harmonic constant", (c.values.array() - 1.5).abs().maxCoeff(), cfg.tol("harmonic")));

  std::normal_distribution<double> nd;
  Eigen::VectorXd a(g->interior_size()), b(g->interior_size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a[i] = nd(rng);
    b[i] = nd(rng);
  }
  const Eigen::VectorXd& W = g->weights();
  const double ab = b.dot(W.cwiseProduct(op.apply(a))), ba = a.dot(W.cwiseProduct(op.apply(b)));
  out.push_back(below("symmetry of the discrete sublaplacian", std::abs(ab - ba) / std::abs(ab), 1e-12));

  const double order = std::log(manufactured_error(13) / manufactured_error(25)) / std::log(2.0);
  out.push_back(below("|observed stencil order - 2|", std::abs(order - 2.0), cfg.tol("stencil_order")));

  GluingSpec gs;
  gs.centers = {{0.0, 0.0, 0.0}};
  gs.radii = {0.1};
  gs.amplitudes = {0.08};
  const Deformation d = glued_deformation(gs);
  ReduceOptions o = cfg.reduce;
  o.grid = uniform_grid(13, 8.0, 32.0);
  o.grid.h0_xy = o.grid.h0_t = 0.4;
  o = o.with_frame_for(d);
  const Reducer red(default_bubbles(), o);
  const CellProblem cell = red.prepare({{0.02, 0.01, 0.0}, 3.0}, d);
  const int n = red.grid()->interior_size();
  Eigen::VectorXd v(n), w(n);
  for (int i = 0; i < n; ++i) {
    v[i] = 0.05 * nd(rng) * cell.U[i];
    w[i] = nd(rng) * cell.U[i];
  }
  const double analytic = red.poisson().x_inner(red.functional_gradient(cell, v).values, w);
  const double eps = 1e-4;
  const double fd = (red.discrete_functional(cell, v + eps * w) - red.discrete_functional(cell, v - eps * w)) / (2 * eps);
  out.push_back(below("gradient vs finite differences", std::abs(fd - analytic) / std::abs(analytic), cfg.tol("gradient_fd")));

  const ReducedState flat = red.ls_solve({{0.02, 0.0, 0.0}, 3.0}, zero_deformation());
  out.push_back(below("flat problem: iterations + |v|", flat.iterations + flat.v.values.norm(), 1e-300));
  const ReducedState s = red.ls_solve(cell);
  out.push_back(below("tangent orthogonality of v", s.orthogonality, cfg.tol("orthogonality")));
  return out;
}

using Suite = std::vector<Check> (*)(std::mt19937_64&, const RunConfig&);

const std::map<std::string, Suite>& suites() {
  static const std::map<std::string, Suite> m{
      {"heis", suite_heis},
      {"jets", suite_jets},
      {"bubbles", suite_bubbles},
      {"quad", suite_quad},
      {"deform", suite_deform},
      {"cayley", [](std::mt19937_64& r, const RunConfig& c) { return suite_cayley(r, c, 100); }},
      {"webster", suite_webster},
      {"reduce", suite_reduce}};
  return m;
}

void check_keys(const nlohmann::json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError(path + "/" + it.key(), "unknown key");
}

template <class T>
T get_at(const nlohmann::json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + "/" + key, e.what());
  }
}

}  // namespace

Deformation DeformationConfig::build() const {
  if (kind == "glued") return glued_deformation(gluing);
  if (kind == "rossi") return rossi_deformation(s);
  return zero_deformation();
}

void to_json(nlohmann::json& j, const DeformationConfig& d) {
  j = nlohmann::json{{"kind", d.kind}, {"gluing", d.gluing}, {"s", d.s}};
}

void from_json(const nlohmann::json& j, DeformationConfig& d) {
  check_keys(j, "/deformation", {"kind", "gluing", "s"});
  d.kind = get_at(j, "kind", "/deformation", d.kind);
  if (d.kind != "glued" && d.kind != "rossi" && d.kind != "zero")
    throw ConfigError("/deformation/kind", "expected \"glued\", \"rossi\" or \"zero\"");
  if (j.contains("gluing")) {
    try {
      d.gluing = j.at("gluing").get<GluingSpec>();
      d.gluing.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("/deformation/gluing", e.what());
    }
  }
  d.s = get_at(j, "s", "/deformation", d.s);
  if (!(std::abs(d.s) < 1.0)) throw ConfigError("/deformation/s", "|s| must be below 1");
}

void to_json(nlohmann::json& j, const ExpansionConfig& e) {
  j = nlohmann::json{{"s", e.s},           {"lambda_for_s", e.lambda_for_s}, {"lambda", e.lambda},
                     {"s_for_lambda", e.s_for_lambda}, {"center", e.center},  {"deformation", e.deformation},
                     {"radius", e.radius}, {"symmetrize", e.symmetrize}};
}

void from_json(const nlohmann::json& j, ExpansionConfig& e) {
  const std::string p = "/expansion";
  check_keys(j, p, {"s", "lambda_for_s", "lambda", "s_for_lambda", "center", "deformation", "radius", "symmetrize"});
  e.s = get_at(j, "s", p, e.s);
  e.lambda_for_s = get_at(j, "lambda_for_s", p, e.lambda_for_s);
  e.lambda = get_at(j, "lambda", p, e.lambda);
  e.s_for_lambda = get_at(j, "s_for_lambda", p, e.s_for_lambda);
  e.center = get_at(j, "center", p, e.center);
  e.deformation = get_at(j, "deformation", p, e.deformation);
  e.radius = get_at(j, "radius", p, e.radius);
  e.symmetrize = get_at(j, "symmetrize", p, e.symmetrize);
  if (e.deformation != "rossi" && e.deformation != "glued")
    throw ConfigError(p + "/deformation", "expected \"rossi\" or \"glued\"");
  for (double s : e.s)
    if (!(std::abs(s) < 1.0)) throw ConfigError(p + "/s", "|s| must be below 1");
  for (double l : e.lambda)
    if (!(l > 0.0)) throw ConfigError(p + "/lambda", "must be positive");
  if (!(e.lambda_for_s > 0.0)) throw ConfigError(p + "/lambda_for_s", "must be positive");
  if (!(e.radius > 0.0)) throw ConfigError(p + "/radius", "must be positive");
}

RunConfig::RunConfig() : tolerances(default_tolerances()) {
  deformation.gluing.centers = {{0.0, 0.0, 0.0}};
  deformation.gluing.radii = {0.1};
  deformation.gluing.amplitudes = {0.05};
}

double RunConfig::tol(const std::string& name) const {
  auto it = tolerances.find(name);
  if (it == tolerances.end()) throw ConfigError("/tolerances/" + name, "unknown tolerance");
  return it->second;
}

void RunConfig::set_tol(const std::string& name, double value) {
  if (!default_tolerances().count(name)) throw ConfigError("/tolerances/" + name, "unknown tolerance");
  if (!(value > 0.0)) throw ConfigError("/tolerances/" + name, "must be positive");
  tolerances[name] = value;
}

std::string RunConfig::hash() const {
  nlohmann::json j = *this;
  j.erase("out_dir");
  j.erase("threads");
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"quadrature", c.quad},   {"reduce", c.reduce},       {"deformation", c.deformation},
                     {"window", c.window},     {"expansion", c.expansion}, {"tolerances", c.tolerances},
                     {"out_dir", c.out_dir},   {"threads", c.threads},     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  check_keys(j, "", {"quadrature", "reduce", "deformation", "window", "expansion", "tolerances", "out_dir", "threads",
                     "seed"});
  try {
    if (j.contains("quadrature")) c.quad = j.at("quadrature").get<QuadratureParams>();
    if (j.contains("reduce")) c.reduce = j.at("reduce").get<ReduceOptions>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("/reduce", e.what());
  }
  if (j.contains("deformation")) c.deformation = j.at("deformation").get<DeformationConfig>();
  if (j.contains("window")) c.window = j.at("window").get<ScanWindow>();
  if (j.contains("expansion")) c.expansion = j.at("expansion").get<ExpansionConfig>();
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    if (!t.is_object()) throw ConfigError("/tolerances", "expected an object");
    for (auto it = t.begin(); it != t.end(); ++it) {
      if (!it.value().is_number()) throw ConfigError("/tolerances/" + it.key(), "expected a number");
      c.set_tol(it.key(), it.value().get<double>());
    }
  }
  c.out_dir = get_at(j, "out_dir", "", c.out_dir);
  c.threads = get_at(j, "threads", "", c.threads);
  c.seed = get_at(j, "seed", "", c.seed);
  if (c.threads < 1) throw ConfigError("/threads", "must be at least 1");
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path, e.what());
  }
  return j.get<RunConfig>();
}

void to_json(nlohmann::json& j, const Check& c) {
  j = nlohmann::json{{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass},
                     {"gating", c.gating}};
}

SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  SlopeFit f;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  f.points = static_cast<int>(lx.size());
  if (f.points < 2) return f;
  const double n = f.points;
  double mx = 0, my = 0;
  for (int i = 0; i < f.points; ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0, sxy = 0;
  for (int i = 0; i < f.points; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.defined = true;
  if (f.points > 2) {
    double sse = 0;
    for (int i = 0; i < f.points; ++i) {
      const double e = ly[i] - f.intercept - f.slope * lx[i];
      sse += e * e;
    }
    const double se = std::sqrt(sse / (n - 2) / sxx);
    const boost::math::students_t t(n - 2);
    f.half_width = boost::math::quantile(boost::math::complement(t, 0.025)) * se;
  }
  return f;
}

Report cmd_calibrate(const RunConfig& cfg) {
  Report r = base_report(cfg, "calibrate");
  try {
    const BubbleConstant c = calibrate_c1();
    const BubbleFamily fam(c);
    const VolumeCalibration v = calibrate_volume(fam, cfg.quad, cfg.tol("volume"), cfg.tol("volume_refined"));
    r.json["bubble"] = c;
    r.json["volume"] = v;
    add_checks(r, {below("c1 residual", c.residual, cfg.tol("c1_residual")),
                   below("int U^4 relative error", v.relative_error, cfg.tol("volume")),
                   below("int U^4 relative error, refined", v.refined_relative_error, cfg.tol("volume_refined"))});
    r.summary.insert(r.summary.begin(), "c1 = " + fmt(c.c1) + ", kappa = " + fmt(v.kappa) +
                                            ", int U^4 = " + fmt(v.integral) + " (target " + fmt(v.target) + ")");
  } catch (const CalibrationError& e) {
    r.json["error"] = e.what();
    r.json["pass"] = false;
    r.summary.push_back(std::string("calibration failed: ") + e.what());
    r.exit_code = kFail;
  }
  return r;
}

std::vector<std::string> suite_names() {
  std::vector<std::string> n;
  for (const auto& [k, v] : suites()) n.push_back(k);
  n.push_back("all");
  return n;
}

Report cmd_verify(const RunConfig& cfg, const std::string& suite) {
  std::vector<std::string> run;
  if (suite == "all") {
    for (const auto& [k, v] : suites()) run.push_back(k);
  } else if (suites().count(suite)) {
    run.push_back(suite);
  } else {
    throw ConfigError("suite", "unknown suite \"" + suite + "\"");
  }
  Report r = base_report(cfg, "verify");
  r.json["suites"] = run;
  std::vector<Check> all;
  for (const std::string& name : run) {
    std::mt19937_64 rng(cfg.seed);
    for (Check c : suites().at(name)(rng, cfg)) {
      c.name = name + ": " + c.name;
      all.push_back(c);
    }
  }
  add_checks(r, all);
  return r;
}

Report cmd_expansion(const RunConfig& cfg) {
  const ExpansionConfig& e = cfg.expansion;
  Report r = base_report(cfg, "expansion");
  const bool s_zero = std::all_of(e.s.begin(), e.s.end(), [](double s) { return s == 0.0; });
  if (e.s.size() < 3 && e.lambda.size() < 3 && !s_zero)
    throw ConfigError("/expansion", "fit degeneracy: fewer than 3 points per axis");

  const BubbleFamily& fam = default_bubbles();
  auto deformation = [&](double s) {
    if (e.deformation == "rossi") return rossi_deformation(s);
    GluingSpec g;
    g.centers = {e.center};
    g.radii = {e.radius};
    g.amplitudes = {s};
    return glued_deformation(g);
  };
  auto value = [&](double s, double lambda) {
    const BubbleParams b{e.center, lambda};
    const QuadratureRule rule = QuadratureRule(cfg.quad).mapped(b.center, b.lambda);
    const ScalarField u = fam.field(b);
    const double flat = functional_value(zero_deformation(), u, rule);
    if (s == 0.0) return std::pair{flat, 0.0};
    double j = functional_value(deformation(s), u, rule);
    if (e.symmetrize) j = 0.5 * (j + functional_value(deformation(-s), u, rule));
    return std::pair{j, j - flat};
  };

  std::string csv = "sweep,s,lambda,value,excess\n";
  std::vector<double> ss, se, ls, le;
  for (double s : e.s) {
    const auto [v, x] = value(s, e.lambda_for_s);
    csv += "s," + fmt(s) + ',' + fmt(e.lambda_for_s) + ',' + fmt(v) + ',' + fmt(x) + '\n';
    ss.push_back(std::abs(s));
    se.push_back(std::abs(x));
  }
  for (double l : e.lambda) {
    const auto [v, x] = value(e.s_for_lambda, l);
    csv += "lambda," + fmt(e.s_for_lambda) + ',' + fmt(l) + ',' + fmt(v) + ',' + fmt(x) + '\n';
    ls.push_back(l);
    le.push_back(std::abs(x));
  }
  r.tables["expansion.csv"] = csv;

  if (s_zero) {
    r.json["s_slope"] = nullptr;
    r.json["lambda_slope"] = nullptr;
    r.json["flag"] = "constant column: slopes undefined";
    r.summary.push_back("s = 0 only: J is the flat value, slopes undefined");
    r.exit_code = kInconclusive;
    return r;
  }
  std::vector<Check> checks;
  auto fit = [&](const char* key, const std::vector<double>& x, const std::vector<double>& y, double target,
                 double tol) {
    if (x.size() < 3) {
      r.json[key] = nullptr;
      return;
    }
    const SlopeFit f = loglog_slope(x, y);
    r.json[key] = {{"slope", f.slope}, {"ci95", f.half_width}, {"points", f.points}, {"defined", f.defined},
                   {"target", target}};
    if (!f.defined) {
      r.exit_code = std::max(r.exit_code, static_cast<int>(kInconclusive));
      r.summary.push_back(std::string(key) + " undefined");
      return;
    }
    checks.push_back(Check{std::string(key) + " (target " + short_fmt(target) + ", 95% ci +-" +
                               short_fmt(f.half_width) + ")",
                           f.slope, tol, std::abs(f.slope - target) < tol, true});
  };
  fit("s_slope", ss, se, 2.0, cfg.tol("s_slope"));
  fit("lambda_slope", ls, le, -2.0, cfg.tol("lambda_slope"));
  const int before = r.exit_code;
  add_checks(r, checks);
  r.exit_code = std::max(before, r.exit_code);
  return r;
}

Report cmd_scan(const RunConfig& cfg) {
  Report r = base_report(cfg, "scan");
  const Deformation d = cfg.deformation.build();
  const ReduceOptions opts = cfg.reduce.with_frame_for(d);
  const Reducer red(default_bubbles(), opts);
  ScanWindow w = cfg.window;
  const ScanResult res = scan_window(red, w, d, cfg.threads);
  r.tables["scan.csv"] = scan_csv(res);
  r.json["window"] = res.window;
  r.json["verdict"] = res.verdict;
  r.json["cells"] = res.cells.size();
  r.json["blowup_proxy"] = res.verdict.blowup_proxy;
  const ScanVerdict& v = res.verdict;
  r.summary.push_back("verdict: " + v.verdict);
  r.summary.push_back("interior max " + fmt(v.interior_max) + ", boundary max " + fmt(v.boundary_max));
  r.summary.push_back("margin " + short_fmt(v.margin) + ", quadrature noise " + short_fmt(v.quadrature_noise) +
                      ", grid noise " + short_fmt(v.grid_noise));
  r.summary.push_back("gradient at the maximizer " + short_fmt(v.gradient_norm) + " (floor " +
                      short_fmt(v.tangent_gradient_noise) + "), blow-up proxy " + short_fmt(v.blowup_proxy));
  r.exit_code = v.exit_code;
  return r;
}

Report cmd_cayley_check(const RunConfig& cfg, int points) {
  Report r = base_report(cfg, "cayley-check");
  std::mt19937_64 rng(cfg.seed);
  r.json["points"] = points;
  add_checks(r, suite_cayley(rng, cfg, points));
  return r;
}

void write_report(const Report& r, const std::string& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(std::filesystem::path(dir) / (stem + ".json"));
    out << r.json.dump(2) << '\n';
  }
  for (const auto& [name, text] : r.tables) {
    std::ofstream out(std::filesystem::path(dir) / name);
    out << text;
  }
}

}  // namespace crlab::app
