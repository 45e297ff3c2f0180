#include "rwmcv/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>

#include "rwmcv/errors.hpp"
#include "rwmcv/estimator.hpp"
#include "rwmcv/numerics.hpp"
#include "rwmcv/version.hpp"

namespace rwmcv {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

GaussianMixture1D mixture_from(const ExperimentConfig::Target& t) {
  return GaussianMixture1D(t.weights, t.means, t.std_devs);
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& states,
                                  double burn_in_fraction) {
  const int T = static_cast<int>(states.rows());
  const int start = static_cast<int>(burn_in_fraction * T);
  const int n = T - start;
  if (n < 2) throw std::runtime_error("sample_covariance: too few states");
  const Eigen::MatrixXd block = states.bottomRows(n);
  const Eigen::RowVectorXd mean = block.colwise().mean();
  const Eigen::MatrixXd centered = block.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(n - 1);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    const auto& jt = j.at("target");
    c.target.family = jt.at("family").get<std::string>();
    if (jt.contains("params")) {
      const auto& p = jt.at("params");
      if (p.contains("weights"))
        c.target.weights = p.at("weights").get<std::vector<double>>();
      if (p.contains("means"))
        c.target.means = p.at("means").get<std::vector<double>>();
      if (p.contains("std_devs"))
        c.target.std_devs = p.at("std_devs").get<std::vector<double>>();
      if (p.contains("h")) c.target.h = p.at("h").get<double>();
      if (p.contains("lambda_max"))
        c.target.lambda_max = p.at("lambda_max").get<double>();
    }
    if (j.contains("f")) c.f = j.at("f").get<std::string>();
    c.d_grid = j.at("d_grid").get<std::vector<int>>();
    const auto& jk = j.at("knob");
    c.knob.name = jk.at("name").get<std::string>();
    c.knob.values = jk.at("values").get<std::vector<double>>();
    if (j.contains("T")) c.T = j.at("T").get<int>();
    if (j.contains("n_R")) c.n_R = j.at("n_R").get<int>();
    if (j.contains("n_MC_default"))
      c.n_MC_default = j.at("n_MC_default").get<int>();
    if (j.contains("l")) {
      if (j.at("l").is_string()) {
        if (j.at("l").get<std::string>() != "auto")
          throw ConfigError("config error at /l: expected \"auto\" or number");
        c.l_auto = true;
      } else {
        c.l_auto = false;
        c.l_value = j.at("l").get<double>();
      }
    }
    if (j.contains("cv")) c.cv = j.at("cv").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir"))
      c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("full_scale")) c.full_scale = j.at("full_scale").get<bool>();
    if (j.contains("cv_sigma")) c.cv_sigma = j.at("cv_sigma").get<std::string>();
    if (j.contains("sigma_burn_in_fraction"))
      c.sigma_burn_in_fraction = j.at("sigma_burn_in_fraction").get<double>();
    if (j.contains("grid_m")) c.grid_m = j.at("grid_m").get<int>();
    if (j.contains("chain_dump"))
      c.chain_dump = j.at("chain_dump").get<std::string>();
    if (j.contains("l_resolved")) c.l_resolved = j.at("l_resolved").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }
  return c;
}

json ExperimentConfig::to_json() const {
  json p;
  if (target.family == "product_mixture") {
    p["weights"] = target.weights;
    p["means"] = target.means;
    p["std_devs"] = target.std_devs;
  } else {
    p["h"] = target.h;
    p["lambda_max"] = target.lambda_max;
  }
  json j{{"target", {{"family", target.family}, {"params", p}}},
         {"f", f},
         {"d_grid", d_grid},
         {"knob", {{"name", knob.name}, {"values", knob.values}}},
         {"T", T},
         {"n_R", n_R},
         {"n_MC_default", n_MC_default},
         {"cv", cv},
         {"seed", seed},
         {"output_dir", output_dir},
         {"full_scale", full_scale},
         {"cv_sigma", cv_sigma},
         {"sigma_burn_in_fraction", sigma_burn_in_fraction},
         {"grid_m", grid_m}};
  if (l_auto)
    j["l"] = "auto";
  else
    j["l"] = l_value;
  if (l_resolved > 0.0) j["l_resolved"] = l_resolved;
  if (!chain_dump.empty()) j["chain_dump"] = chain_dump;
  return j;
}

void ExperimentConfig::validate() const {
  if (target.family != "product_mixture" &&
      target.family != "mv_gaussian_mixture")
    throw ConfigError("config error at /target/family: unknown family '" +
                      target.family + "'");
  if (target.family == "product_mixture" &&
      (target.weights.empty() || target.means.empty() ||
       target.std_devs.empty()))
    throw ConfigError(
        "config error at /target/params: product_mixture needs weights, "
        "means, std_devs");
  if (f != "first_coordinate")
    throw ConfigError("config error at /f: only 'first_coordinate' is built in");
  if (d_grid.empty()) throw ConfigError("config error at /d_grid: empty grid");
  for (int d : d_grid)
    if (d < 1) throw ConfigError("config error at /d_grid: d must be >= 1");
  if (knob.values.empty())
    throw ConfigError("config error at /knob/values: empty grid");
  if (knob.name != "n_MC" && knob.name != "h")
    throw ConfigError("config error at /knob/name: expected n_MC or h");
  if (knob.name == "h" && target.family != "mv_gaussian_mixture")
    throw ConfigError(
        "config error at /knob/name: knob h requires mv_gaussian_mixture");
  if (T < 2) throw ConfigError("config error at /T: need T >= 2");
  if (n_R < 1) throw ConfigError("config error at /n_R: need n_R >= 1");
  if (n_MC_default < 1)
    throw ConfigError("config error at /n_MC_default: need >= 1");
  if (!l_auto && !(l_value > 0.0))
    throw ConfigError("config error at /l: l must be > 0");
  if (cv != "closed_form" && cv != "grid" && cv != "gaussian_analytic" &&
      cv != "none")
    throw ConfigError("config error at /cv: unknown control variate '" + cv +
                      "'");
  if ((cv == "closed_form" || cv == "grid") &&
      target.family != "product_mixture")
    throw ConfigError(
        "config error at /cv: closed_form/grid apply to product targets");
  if (cv == "gaussian_analytic" && target.family == "product_mixture") {
    // Allowed only for a product Gaussian (single-component mixture).
    if (target.weights.size() != 1)
      throw ConfigError(
          "config error at /cv: gaussian_analytic needs an mv target or a "
          "product Gaussian");
  }
  if (cv_sigma != "estimated" && cv_sigma != "true")
    throw ConfigError("config error at /cv_sigma: expected estimated or true");
  if (sigma_burn_in_fraction < 0.0 || sigma_burn_in_fraction >= 1.0)
    throw ConfigError("config error at /sigma_burn_in_fraction: need [0,1)");
  if (grid_m < 10) throw ConfigError("config error at /grid_m: need >= 10");
}

namespace {

struct CellTask {
  int d = 0;
  double knob_value = 0.0;
  int n_MC = 0;
};

struct RunOutput {
  double plain = 0.0;
  double corrected = 0.0;
};

double mv_J0(int d, double lambda_max) {
  // Sigma^-1 = I + (1/lambda - 1) v v^T; trace of the (2:d, 2:d) block.
  const double diag_inv =
      1.0 + (1.0 / lambda_max - 1.0) / static_cast<double>(d);
  return static_cast<double>(d - 1) * diag_inv / static_cast<double>(d);
}

}  // namespace

ExperimentConfig resolved_scale(ExperimentConfig config) {
  if (config.full_scale) {
    config.T = 200000;
    config.n_R = 500;
    std::fprintf(stderr,
                 "warning: full_scale run (T=2e5, n_R=500); expect a long "
                 "runtime\n");
  }
  return config;
}

VRReport run_experiment(const ExperimentConfig& config_in, unsigned workers,
                        const ProgressFn& on_row) {
  ExperimentConfig config = resolved_scale(config_in);
  config.validate();

  VRReport report;
  const bool product = config.target.family == "product_mixture";

  std::shared_ptr<const ScalarDensity> rho;
  double truth = 0.0;
  double J = 0.0;
  if (product) {
    rho = std::make_shared<const ScalarDensity>(
        mixture_from(config.target).to_density(config.target.family));
    truth = expectation(*rho, [](double x) { return x; });
    J = fisher_J(*rho);
    if (config.l_auto) config.l_resolved = optimal_l(J);
  }
  const Observable f = first_coordinate();

  report.config = config;

  std::size_t cell_index = 0;
  for (int d : config.d_grid) {
    for (double knob_value : config.knob.values) {
      const auto t0 = std::chrono::steady_clock::now();
      CellTask cell;
      cell.d = d;
      cell.knob_value = knob_value;
      cell.n_MC = config.knob.name == "n_MC"
                      ? static_cast<int>(knob_value)
                      : config.n_MC_default;
      const double h_mode =
          config.knob.name == "h" ? knob_value : config.target.h;

      VRRow row;
      row.target_name = config.target.family;
      row.d = d;
      row.knob_name = config.knob.name;
      row.knob_value = knob_value;
      row.T = config.T;
      row.n_R = config.n_R;
      row.n_MC = cell.n_MC;
      row.seed = config.seed;

      try {
        TargetDistribution target =
            product ? TargetDistribution::product(*rho, d)
                    : TargetDistribution::bimodal_gaussian(
                          d, h_mode, config.target.lambda_max);
        double l = config.l_auto ? 0.0 : config.l_value;
        if (config.l_auto)
          l = product ? config.l_resolved
                      : optimal_l(mv_J0(d, config.target.lambda_max));
        row.l = l;
        const LimitConstants constants =
            product ? LimitConstants::from(J, l) : LimitConstants{};

        // Cell-level CV solutions that do not depend on the chain.
        std::shared_ptr<const PoissonSolution> shared_cv;
        CVMode mode = CVMode::FirstCoordinate;
        if (config.cv == "closed_form") {
          shared_cv = std::make_shared<const PoissonSolution>(
              solve_closed_form(*rho, [](double x) { return x; }, truth,
                                constants));
        } else if (config.cv == "gaussian_analytic") {
          mode = CVMode::FullState;
          if (!product && config.cv_sigma == "true") {
            shared_cv = std::make_shared<const PoissonSolution>(gaussian_cv(
                TargetDistribution::bimodal_gaussian(d, h_mode,
                                                     config.target.lambda_max)
                        .covariance() +
                    0.25 * h_mode * h_mode *
                        (Eigen::VectorXd::Unit(d, 0) *
                         Eigen::VectorXd::Unit(d, 0).transpose()),
                l, d));
          } else if (product && config.cv_sigma == "true") {
            const double sd = config.target.std_devs.at(0);
            shared_cv = std::make_shared<const PoissonSolution>(gaussian_cv(
                sd * sd * Eigen::MatrixXd::Identity(d, d), l, d));
          }
        }

        std::vector<RunOutput> runs(config.n_R);
        parallel_for(
            static_cast<std::size_t>(config.n_R), workers, [&](std::size_t k) {
              RWMConfig rc;
              rc.d = d;
              rc.l = l;
              rc.T = config.T;
              rc.seed = derive_seed(config.seed, cell_index, k);
              const ChainSample chain = rwm_run(target, rc);
              if (!config.chain_dump.empty() && cell_index == 0 && k == 0)
                write_chain_csv(chain, config.chain_dump);

              CVSpec spec;
              spec.applies_to = mode;
              spec.n_MC = cell.n_MC;
              spec.d = d;
              spec.l = l;
              if (config.cv == "grid") {
                std::vector<double> coord1(chain.states.col(0).data(),
                                           chain.states.col(0).data() +
                                               config.T);
                const double rho_f_hat = plain_average(chain, f);
                spec.solution = std::make_shared<const PoissonSolution>(
                    solve_grid([&](double x) { return rho->log_rho(x); },
                               [](double x) { return x; }, rho_f_hat, coord1,
                               l, d, constants, config.grid_m));
              } else if (config.cv == "gaussian_analytic" &&
                         config.cv_sigma == "estimated") {
                spec.solution =
                    std::make_shared<const PoissonSolution>(gaussian_cv(
                        sample_covariance(chain.states,
                                          config.sigma_burn_in_fraction),
                        l, d));
              } else {
                spec.solution = shared_cv;  // may be null for cv == none
              }

              const EstimateResult est =
                  cv_average(chain, target, spec,
                             derive_seed(rc.seed, 0xC0DAull), f,
                             /*keep_cv_values=*/false);
              runs[k] = {est.plain, est.corrected};
            });

        std::vector<double> plain(config.n_R), corrected(config.n_R);
        for (int k = 0; k < config.n_R; ++k) {
          plain[k] = runs[k].plain;
          corrected[k] = runs[k].corrected;
        }
        row.VR = variance_reduction(plain, corrected, truth);
        double pm = 0.0, cm = 0.0;
        for (int k = 0; k < config.n_R; ++k) {
          pm += (plain[k] - truth) * (plain[k] - truth);
          cm += (corrected[k] - truth) * (corrected[k] - truth);
        }
        row.plain_mse = pm / config.n_R;
        row.cv_mse = cm / config.n_R;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
        report.any_failed = true;
      }
      row.runtime_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      report.rows.push_back(row);
      if (on_row) on_row(row);
      ++cell_index;
    }
  }
  return report;
}

void write_report_csv(const VRReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  // runtime_s is wall time and would break byte-stable reruns; it lives in
  // report.json only.
  out << "target,d,knob_name,knob_value,T,n_R,n_MC,l,VR,plain_mse,cv_mse,"
         "seed\n";
  for (const auto& r : report.rows) {
    if (!r.ok) continue;
    out << r.target_name << ',' << r.d << ',' << r.knob_name << ','
        << fmt_double(r.knob_value) << ',' << r.T << ',' << r.n_R << ','
        << r.n_MC << ',' << fmt_double(r.l) << ',' << fmt_double(r.VR) << ','
        << fmt_double(r.plain_mse) << ',' << fmt_double(r.cv_mse) << ','
        << r.seed << "\n";
  }
}

void write_report_json(const VRReport& report, const std::string& path) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json jr{{"target", r.target_name}, {"d", r.d},
            {"knob_name", r.knob_name}, {"knob_value", r.knob_value},
            {"T", r.T},                 {"n_R", r.n_R},
            {"n_MC", r.n_MC},           {"l", r.l},
            {"VR", r.VR},               {"plain_mse", r.plain_mse},
            {"cv_mse", r.cv_mse},       {"runtime_s", r.runtime_s},
            {"seed", r.seed},           {"ok", r.ok}};
    if (!r.ok) jr["error"] = r.error;
    rows.push_back(jr);
  }
  json j{{"version", kVersion},
         {"seed", report.config.seed},
         {"config", report.config.to_json()},
         {"rows", rows}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace rwmcv
