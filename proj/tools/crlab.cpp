#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "app.hpp"
#include "crlab/error.hpp"

using namespace crlab;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> tols;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--tol", c.tols, "tolerance override NAME=VAL (repeatable)");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "seed for random probes");
}

app::RunConfig resolve(const Common& c) {
  app::RunConfig cfg = c.config.empty() ? app::RunConfig{} : app::load_config(c.config);
  for (const std::string& t : c.tols) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("--tol", "expected NAME=VAL, got \"" + t + "\"");
    double v = 0.0;
    try {
      v = std::stod(t.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("--tol", "not a number in \"" + t + "\"");
    }
    cfg.set_tol(t.substr(0, eq), v);
  }
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.threads) cfg.threads = *c.threads;
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

int finish(const app::Report& r, const app::RunConfig& cfg, const std::string& stem) {
  app::write_report(r, cfg.out_dir, stem);
  for (const std::string& line : r.summary) std::cout << line << '\n';
  std::cout << stem << ": exit " << r.exit_code << " (report in " << cfg.out_dir << ")\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"crlab: numerical experiments on deformed CR structures of the Heisenberg group"};
  cli.require_subcommand(1);

  Common calib_opts, verify_opts, exp_opts, scan_opts, cayley_opts;
  std::optional<double> kappa;
  std::string suite = "all";
  std::vector<double> s_list, lambda_list;
  int points = 100;

  auto* calibrate = cli.add_subcommand("calibrate", "calibrate c1 and the volume density");
  add_common(calibrate, calib_opts);
  calibrate->add_option("--kappa", kappa, "volume density to test instead of the configured one");

  auto* verify = cli.add_subcommand("verify", "run module invariant suites");
  add_common(verify, verify_opts);
  verify->add_option("--suite", suite, "suite name")->check(CLI::IsMember(app::suite_names()));

  auto* expansion = cli.add_subcommand("expansion", "J(U_{x,lambda}) against s and lambda with log-log fits");
  add_common(expansion, exp_opts);
  expansion->add_option("--s", s_list, "amplitudes of the s sweep");
  expansion->add_option("--lambda", lambda_list, "scales of the lambda sweep");

  auto* scan = cli.add_subcommand("scan", "reduced functional over the window, with the verdict");
  add_common(scan, scan_opts);

  auto* cayley = cli.add_subcommand("cayley-check", "push-forward of the sphere frame");
  add_common(cayley, cayley_opts);
  cayley->add_option("--points", points, "random points")->check(CLI::PositiveNumber);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? app::kPass : app::kFail;
  }

  try {
    if (*calibrate) {
      app::RunConfig cfg = resolve(calib_opts);
      if (kappa) cfg.quad.kappa = *kappa;
      return finish(app::cmd_calibrate(cfg), cfg, "calibrate");
    }
    if (*verify) {
      const app::RunConfig cfg = resolve(verify_opts);
      return finish(app::cmd_verify(cfg, suite), cfg, "verify");
    }
    if (*expansion) {
      app::RunConfig cfg = resolve(exp_opts);
      if (!s_list.empty()) cfg.expansion.s = s_list;
      if (!lambda_list.empty()) cfg.expansion.lambda = lambda_list;
      return finish(app::cmd_expansion(cfg), cfg, "expansion");
    }
    if (*scan) {
      const app::RunConfig cfg = resolve(scan_opts);
      return finish(app::cmd_scan(cfg), cfg, "scan");
    }
    if (*cayley) {
      const app::RunConfig cfg = resolve(cayley_opts);
      return finish(app::cmd_cayley_check(cfg, points), cfg, "cayley");
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return app::kFail;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return app::kFail;
  }
  return app::kFail;
}
