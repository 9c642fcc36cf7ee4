#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <ostream>

#include "matd3/harness/config.hpp"
#include "matd3/marl/train.hpp"

namespace matd3::harness {

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double final_reward = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  std::vector<double> reward_curve;       // per episode, mean over agents
  std::vector<marl::BiasRow> bias_rows;
};

/// Cross-seed aggregate of one experiment. Statistics (mean, 95% CI of the
/// mean) are computed across seeds only, never within a run.
struct RunSummary {
  ExperimentConfig config;
  std::vector<SeedResult> seeds;
  double mean_final = std::numeric_limits<double>::quiet_NaN();
  double ci95_final = std::numeric_limits<double>::quiet_NaN();
  bool all_ok = false;
};

/// Trailing-window mean with the window clipped to available history.
std::vector<double> windowed_mean(const std::vector<double>& series, int window);

/// Resolves output_dir against the MATD3_OUTPUT_ROOT environment variable
/// (absolute paths are kept as-is).
std::filesystem::path resolve_output_dir(const std::string& output_dir);

/// Runs train() once per seed (up to `jobs` in parallel, 0 = hardware
/// concurrency), writing metrics.csv, bias.csv and checkpoints under
/// output_dir/seed_<k>/, then summary.csv and plot_data.csv at the top.
/// A failing seed is recorded and the remaining seeds continue.
RunSummary run(const ExperimentConfig& config, int jobs = 0);

void write_summary_csv(std::ostream& os, const RunSummary& summary);

/// Long-format plot series (series, x, mean, ci_lo, ci_hi): the windowed
/// reward curve plus one bias series per agent when the probe ran.
void emit_plot_data(std::ostream& os, const RunSummary& summary);

/// Per-column (task) affine rescale of final team rewards onto [0, 1].
/// Degenerate columns (max == min) map to 0.5 and append a warning.
Eigen::MatrixXd normalize_scores(const Eigen::MatrixXd& rewards,
                                 std::vector<std::string>* warnings = nullptr);

struct GridAxis {
  std::string name;                 // hyperparameter key
  std::vector<std::string> values;  // textual values, applied via apply_hyperparam
};

std::vector<GridAxis> parse_axes_file(const std::string& path);

struct GridCell {
  std::map<std::string, std::string> assignment;
  RunSummary summary;
};

/// Cartesian product over the axes; every axis name is validated before any
/// run starts. Cells are returned ranked by mean final reward (best first)
/// and the ranked table is written to output_dir/grid.csv.
std::vector<GridCell> grid_search(const ExperimentConfig& base, const std::vector<GridAxis>& axes,
                                  int jobs = 0);

}  // namespace matd3::harness
