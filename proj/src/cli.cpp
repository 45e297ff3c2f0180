#include "rwmcv/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rwmcv/diagnostics.hpp"
#include "rwmcv/errors.hpp"
#include "rwmcv/estimator.hpp"
#include "rwmcv/experiment.hpp"
#include "rwmcv/numerics.hpp"
#include "rwmcv/version.hpp"

namespace rwmcv {

namespace {

using nlohmann::json;

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config error: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Map the byte offset to a line number for the error message.
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError("config error: " + path + ":" + std::to_string(line) +
                      ": " + e.what());
  }
}

ScalarDensity density_from(const json& j) {
  const std::string family = j.at("family").get<std::string>();
  if (family != "product_mixture")
    throw ConfigError(
        "config error at /density/family: expected product_mixture");
  const auto& p = j.at("params");
  return GaussianMixture1D(p.at("weights").get<std::vector<double>>(),
                           p.at("means").get<std::vector<double>>(),
                           p.at("std_devs").get<std::vector<double>>())
      .to_density(family);
}

double resolve_l(const json& j, const ScalarDensity& rho) {
  if (j.contains("l") && !j.at("l").is_string()) {
    const double l = j.at("l").get<double>();
    if (!(l > 0.0)) throw ConfigError("config error at /l: l must be > 0");
    return l;
  }
  return optimal_l(fisher_J(rho));
}

std::string out_path(const std::string& dir, const std::string& file) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / file).string();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

int cmd_experiment(const std::string& config_path, std::uint64_t seed_override,
                   bool has_seed, const std::string& dir_override,
                   unsigned workers) {
  ExperimentConfig config = ExperimentConfig::from_json(load_config(config_path));
  if (has_seed) config.seed = seed_override;
  if (!dir_override.empty()) config.output_dir = dir_override;
  config.validate();

  const VRReport report =
      run_experiment(config, workers, [](const VRRow& row) {
        if (row.ok)
          std::fprintf(stderr, "cell d=%d %s=%g: VR=%.3g (%.1fs)\n", row.d,
                       row.knob_name.c_str(), row.knob_value, row.VR,
                       row.runtime_s);
        else
          std::fprintf(stderr, "cell d=%d %s=%g: FAILED (%s)\n", row.d,
                       row.knob_name.c_str(), row.knob_value,
                       row.error.c_str());
      });
  write_report_csv(report, out_path(report.config.output_dir, "report.csv"));
  write_report_json(report, out_path(report.config.output_dir, "report.json"));
  return report.any_failed ? 2 : 0;
}

int cmd_poisson(const std::string& config_path, std::uint64_t seed_override,
                bool has_seed, const std::string& dir_override) {
  const json j = load_config(config_path);
  const ScalarDensity rho = density_from(j.at("density"));
  if (j.contains("f") && j.at("f").get<std::string>() != "first_coordinate")
    throw ConfigError("config error at /f: only first_coordinate is built in");
  const auto f = [](double x) { return x; };
  const double l = resolve_l(j, rho);
  const LimitConstants constants = LimitConstants::from(fisher_J(rho), l);
  const std::string solver =
      j.value("solver", std::string("closed_form"));
  std::uint64_t seed = j.value("seed", std::uint64_t{1});
  if (has_seed) seed = seed_override;
  std::string dir = j.value("output_dir", std::string("."));
  if (!dir_override.empty()) dir = dir_override;

  std::vector<double> nodes;
  PoissonSolution sol = [&] {
    if (solver == "closed_form") {
      const double rho_f = expectation(rho, f);
      auto s = solve_closed_form(rho, f, rho_f, constants);
      const int n_points = j.value("n_points", 200);
      DensityTable table(rho);
      for (int i = 0; i < n_points; ++i)
        nodes.push_back(table.quantile((i + 0.5) / n_points));
      return s;
    }
    if (solver != "grid")
      throw ConfigError("config error at /solver: expected closed_form|grid");
    const int d = j.value("d", 5);
    const int chain_T = j.value("chain_T", 20000);
    RWMConfig rc{d, l, chain_T, seed};
    const ChainSample chain =
        rwm_run(TargetDistribution::product(rho, d), rc);
    std::vector<double> coord1(chain.states.col(0).data(),
                               chain.states.col(0).data() + chain_T);
    const double rho_f_hat = mean(coord1);
    auto s = solve_grid([&](double x) { return rho.log_rho(x); }, f,
                        rho_f_hat, coord1, l, d, constants,
                        j.value("grid_m", 100));
    nodes = s.meta().grid_nodes;
    return s;
  }();

  std::ofstream out(out_path(dir, "poisson.csv"), std::ios::binary);
  out << "node,fhat,fhat_prime,generator_residual\n";
  for (double x : nodes) {
    const double resid = generator_limit(rho, sol, constants, x) -
                         (sol.meta().rho_f - f(x));
    out << fmt(x) << ',' << fmt(sol.evaluate(x)) << ','
        << fmt(sol.derivative(x)) << ',' << fmt(resid) << "\n";
  }
  return 0;
}

int cmd_generator_check(const std::string& config_path,
                        std::uint64_t seed_override, bool has_seed,
                        const std::string& dir_override, unsigned workers) {
  const json j = load_config(config_path);
  const ScalarDensity rho = density_from(j.at("density"));
  const std::string g_name = j.value("g", std::string("first_coordinate"));
  SmoothFn g = g_name == "constant" ? SmoothFn::constant(1.0)
                                    : SmoothFn::coordinate();
  if (g_name != "constant" && g_name != "first_coordinate")
    throw ConfigError("config error at /g: expected first_coordinate|constant");
  const std::vector<int> d_grid = j.at("d_grid").get<std::vector<int>>();
  if (d_grid.empty()) throw ConfigError("config error at /d_grid: empty grid");
  const int n_points = j.value("n_points", 100);
  const int n_inner = j.value("n_inner", 20000);
  std::uint64_t seed = j.value("seed", std::uint64_t{1});
  if (has_seed) seed = seed_override;
  std::string dir = j.value("output_dir", std::string("."));
  if (!dir_override.empty()) dir = dir_override;
  double l_override = 0.0;
  if (j.contains("l") && !j.at("l").is_string())
    l_override = j.at("l").get<double>();

  const GeneratorGapReport report = generator_gap_study(
      rho, g, d_grid, n_points, n_inner, seed, workers, nullptr, l_override);

  std::ofstream out(out_path(dir, "generator_gap.csv"), std::ios::binary);
  out << "d,n_points,n_inner,mean_abs_gap,q95_abs_gap,mean_inner_se\n";
  for (const auto& r : report.rows)
    out << r.d << ',' << r.n_points << ',' << r.n_inner << ','
        << fmt(r.mean_abs_gap) << ',' << fmt(r.q95_abs_gap) << ','
        << fmt(r.mean_inner_se) << "\n";
  return 0;
}

int cmd_ad_check(const std::string& config_path, std::uint64_t seed_override,
                 bool has_seed, const std::string& dir_override) {
  const json j = load_config(config_path);
  const ScalarDensity rho = density_from(j.at("density"));
  const int d = j.at("d").get<int>();
  if (d < 2) throw ConfigError("config error at /d: need d >= 2");
  const int n_draws = j.value("n_draws", 100000);
  std::uint64_t seed = j.value("seed", std::uint64_t{1});
  if (has_seed) seed = seed_override;
  std::string dir = j.value("output_dir", std::string("."));
  if (!dir_override.empty()) dir = dir_override;
  const std::vector<double> c_A_grid =
      j.contains("c_A_grid") ? j.at("c_A_grid").get<std::vector<double>>()
                             : std::vector<double>{1.5, 2.0, 3.0, 4.0, 6.0, 8.0};
  const double a_d = (j.contains("a_d") && !j.at("a_d").is_string())
                         ? j.at("a_d").get<double>()
                         : sluggish_default(d);

  const AdConstants consts = compute_ad_constants(rho, c_A_grid);
  const TargetDistribution target = TargetDistribution::product(rho, d);

  long miss = 0;
  long cond_fail[4] = {0, 0, 0, 0};
  RngStream rng(seed);
  for (int n = 0; n < n_draws; ++n) {
    const Eigen::VectorXd x = target.sample(rng);
    const AdMembership m = ad_membership(consts, x, a_d);
    if (!m.in_Ad) ++miss;
    for (int c = 0; c < 4; ++c)
      if (!m.cond[c]) ++cond_fail[c];
  }

  std::ofstream out(out_path(dir, "ad_check.csv"), std::ios::binary);
  out << "d,a_d,n_draws,miss_rate,cond1_fail_rate,cond2_fail_rate,"
         "cond3_fail_rate,cond4_fail_rate,c_A,rho_A\n";
  out << d << ',' << fmt(a_d) << ',' << n_draws << ','
      << fmt(static_cast<double>(miss) / n_draws);
  for (long cf : cond_fail) out << ',' << fmt(static_cast<double>(cf) / n_draws);
  out << ',' << fmt(consts.c_A) << ',' << fmt(consts.rho_A) << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Random-walk Metropolis estimation with scaling-limit "
               "Poisson-equation control variates"};
  app.set_version_flag("--version", std::string(kVersion));

  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string output_dir;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--seed", seed, "Master seed (overrides the config)")
      ->each([&](const std::string&) { has_seed = true; });
  app.add_option("--workers", workers, "Worker threads (default: cores)");
  app.add_option("--output-dir", output_dir,
                 "Output directory (overrides the config)");

  std::string config_path;
  auto* experiment =
      app.add_subcommand("experiment", "Run a variance-reduction experiment");
  auto* poisson = app.add_subcommand(
      "poisson", "Solve the limit Poisson equation and dump (node, fhat, "
                 "fhat', residual)");
  auto* generator = app.add_subcommand(
      "generator-check", "Measure |G f - G_d f| across dimensions");
  auto* ad = app.add_subcommand("ad-check",
                                "Measure concentration-set membership rates");
  for (auto* sub : {experiment, poisson, generator, ad}) {
    sub->add_option("config", config_path, "JSON config")->required();
    sub->fallthrough();  // accept the global flags after the subcommand
  }
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (experiment->parsed())
      return cmd_experiment(config_path, seed, has_seed, output_dir, workers);
    if (poisson->parsed())
      return cmd_poisson(config_path, seed, has_seed, output_dir);
    if (generator->parsed())
      return cmd_generator_check(config_path, seed, has_seed, output_dir,
                                 workers);
    if (ad->parsed())
      return cmd_ad_check(config_path, seed, has_seed, output_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace rwmcv
