#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crlab/deform.hpp"
#include "crlab/quad.hpp"
#include "crlab/reduce.hpp"

namespace crlab::app {

struct DeformationConfig {
  /// "glued", "rossi" or "zero"
  std::string kind = "glued";
  GluingSpec gluing;
  /// amplitude for kind == "rossi"
  double s = 0.05;

  Deformation build() const;
};

struct ExpansionConfig {
  std::vector<double> s{0.02, 0.04, 0.08};
  double lambda_for_s = 8.0;
  std::vector<double> lambda{4.0, 8.0, 16.0};
  double s_for_lambda = 0.05;
  HPoint center{};
  /// "rossi" or "glued" (a single ball at `center`, radius `radius`)
  std::string deformation = "rossi";
  double radius = 0.1;
  /// average J over s and -s, which removes the odd part of the expansion
  bool symmetrize = true;
};

struct RunConfig {
  QuadratureParams quad;
  ReduceOptions reduce;
  DeformationConfig deformation;
  ScanWindow window;
  ExpansionConfig expansion;
  std::map<std::string, double> tolerances;
  std::string out_dir = ".";
  int threads = 1;
  std::uint64_t seed = 42;

  RunConfig();
  double tol(const std::string& name) const;
  /// Sets a known tolerance; throws ConfigError for unknown names or non-positive values.
  void set_tol(const std::string& name, double value);
  /// FNV-1a of the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
};

void to_json(nlohmann::json& j, const DeformationConfig& d);
void from_json(const nlohmann::json& j, DeformationConfig& d);
void to_json(nlohmann::json& j, const ExpansionConfig& e);
void from_json(const nlohmann::json& j, ExpansionConfig& e);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_config(const std::string& path);

enum Exit { kPass = 0, kFail = 1, kInconclusive = 2 };

/// What a command produces: a JSON report, optional CSV tables keyed by file name, a summary.
struct Report {
  nlohmann::json json;
  std::map<std::string, std::string> tables;
  std::vector<std::string> summary;
  int exit_code = kPass;
};

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  /// informational checks are reported without deciding the exit code
  bool gating = true;
};

void to_json(nlohmann::json& j, const Check& c);

Report cmd_calibrate(const RunConfig& cfg);
std::vector<std::string> suite_names();
/// Throws ConfigError for an unknown suite.
Report cmd_verify(const RunConfig& cfg, const std::string& suite);
Report cmd_expansion(const RunConfig& cfg);
Report cmd_scan(const RunConfig& cfg);
Report cmd_cayley_check(const RunConfig& cfg, int points = 100);

/// Least-squares slope of log y against log x with a 95% Student-t interval.
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double half_width = 0.0;
  int points = 0;
  bool defined = false;
};

SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Writes the JSON report and tables under dir (created if missing).
void write_report(const Report& r, const std::string& dir, const std::string& stem);

}  // namespace crlab::app
