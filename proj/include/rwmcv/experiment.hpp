#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace rwmcv {

/// Experiment configuration, a single JSON document. See README for the
/// schema. The paper-scale settings (T = 2e5, n_R = 500) sit behind
/// full_scale; the defaults are desk scale.
struct ExperimentConfig {
  struct Target {
    std::string family;  // "product_mixture" | "mv_gaussian_mixture"
    std::vector<double> weights, means, std_devs;  // product_mixture
    double h = 0.0;                                // mv_gaussian_mixture
    double lambda_max = 25.0;
  } target;

  struct Knob {
    std::string name;  // "n_MC" | "h"
    std::vector<double> values;
  } knob;

  std::string f = "first_coordinate";
  std::vector<int> d_grid;
  int T = 20000;
  int n_R = 100;
  int n_MC_default = 50;
  bool l_auto = true;
  double l_value = 0.0;
  std::string cv = "grid";  // closed_form|grid|gaussian_analytic|none
  std::uint64_t seed = 1;
  std::string output_dir = ".";
  bool full_scale = false;
  std::string cv_sigma = "estimated";  // estimated|true
  double sigma_burn_in_fraction = 0.0;
  int grid_m = 100;
  std::string chain_dump;  // optional trajectory CSV (first run, first cell)

  // Resolved during validation / run.
  double l_resolved = 0.0;  // product targets (d-independent)

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws ConfigError on semantic problems (empty grids, bad knob, ...).
  void validate() const;
};

/// Applies the full_scale opt-in: T = 2e5 and n_R = 500, with a stderr
/// warning about the runtime.
ExperimentConfig resolved_scale(ExperimentConfig config);

struct VRRow {
  std::string target_name;
  int d = 0;
  std::string knob_name;
  double knob_value = 0.0;
  int T = 0;
  int n_R = 0;
  int n_MC = 0;
  double l = 0.0;
  double VR = 0.0;
  double plain_mse = 0.0;
  double cv_mse = 0.0;
  double runtime_s = 0.0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
};

struct VRReport {
  ExperimentConfig config;  // resolved
  std::vector<VRRow> rows;
  bool any_failed = false;
};

using ProgressFn = std::function<void(const VRRow&)>;

/// Runs the full grid of (d, knob) cells: n_R independent chains per cell,
/// both estimators on each trajectory, VR per cell. Cells run in order and
/// rows are emitted incrementally through on_row; runs within a cell fan
/// out over the worker pool with per-(cell, run) derived seeds, so the
/// report is identical for any worker count. Per-cell failures are
/// recorded in the row and the run continues.
VRReport run_experiment(const ExperimentConfig& config, unsigned workers = 1,
                        const ProgressFn& on_row = nullptr);

/// report.csv: fixed column order, '.' decimal, LF endings. Byte-identical
/// across reruns of the same config+seed (wall times live in the JSON).
void write_report_csv(const VRReport& report, const std::string& path);
/// report.json: rows (with runtime_s) plus the resolved config echo.
void write_report_json(const VRReport& report, const std::string& path);

}  // namespace rwmcv
