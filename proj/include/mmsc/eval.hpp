#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmsc/env.hpp"
#include "mmsc/policy_net.hpp"

namespace mmsc {

enum class EvalMode { in_distribution, out_of_distribution };

std::string to_string(EvalMode mode);
EvalMode eval_mode_from_string(const std::string& name);

struct EvalRun {
  EpisodeConfig episode;
  EvalMode mode = EvalMode::in_distribution;
  int samples = 30;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<double> snapshot_times = {0.0, 0.25, 0.5, 0.75, 1.0};
};

/// Per-timestep quantiles across samples. Quantiles use linear interpolation
/// between order statistics: with n sorted values, q(p) interpolates between
/// ranks floor(h) and floor(h)+1 at h = (n - 1) p.
struct CurveStats {
  std::vector<double> q25;
  std::vector<double> median;
  std::vector<double> q75;
};

double quantile(std::vector<double> values, double p);
CurveStats curve_stats(const std::vector<std::vector<double>>& per_sample_curves);

/// 1 - rl/cgs per timestep; timesteps with cgs below 1e-14 report 0.
std::vector<double> error_reduction(const std::vector<double>& cgs_median,
                                    const std::vector<double>& rl_median);

struct EvalResult {
  CurveStats cgs_mse, rl_mse;          // per-step MSE quantiles
  CurveStats cgs_cumulative, rl_cumulative;
  std::vector<double> reduction;       // from the median MSE curves
  std::vector<double> cum_reduction;   // from the median cumulative curves
  int excluded_samples = 0;            // blow-ups, reported but not aggregated

  // First sample's per-step records and field snapshots for the output files.
  EpisodeTrace sample0_cgs, sample0_rl;
  std::vector<std::pair<double, ChannelField>> snaps_cgs, snaps_rl, snaps_ref;
};

/// Runs the coarse baseline (zero action) and the deterministic policy
/// (Gaussian mean) on `samples` fresh specs and aggregates MSE statistics.
/// The policy may be null to evaluate the baseline against itself.
EvalResult evaluate(const EvalRun& run, const NetworkParams* policy);

/// mse.csv / cumulative.csv / reduction.csv plus SVG median-and-IQR plots and
/// field snapshots of the first sample at the configured times.
void write_outputs(const EvalResult& result, const EvalRun& run);

/// Renders one median/IQR comparison plot (log10 y-axis) as a standalone SVG.
void write_curve_svg(const std::string& path, const std::string& title, double dt,
                     const CurveStats& cgs, const CurveStats& rl);

/// Rebuilds the SVG plots from a previously written mse.csv/cumulative.csv.
void plot_from_csv(const std::string& in_dir, const std::string& out_dir, double dt);

}  // namespace mmsc
