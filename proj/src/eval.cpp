#include "mmsc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mmsc/ppo.hpp"

namespace mmsc {

std::string to_string(EvalMode mode) {
  return mode == EvalMode::in_distribution ? "in_distribution" : "out_of_distribution";
}

EvalMode eval_mode_from_string(const std::string& name) {
  if (name == "in_distribution" || name == "in") return EvalMode::in_distribution;
  if (name == "out_of_distribution" || name == "out") return EvalMode::out_of_distribution;
  throw std::invalid_argument("unknown eval mode: " + name);
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

CurveStats curve_stats(const std::vector<std::vector<double>>& per_sample_curves) {
  if (per_sample_curves.empty()) throw std::invalid_argument("curve_stats: no samples");
  const size_t T = per_sample_curves.front().size();
  for (const auto& c : per_sample_curves)
    if (c.size() != T) throw std::invalid_argument("curve_stats: ragged curves");

  CurveStats stats;
  stats.q25.resize(T);
  stats.median.resize(T);
  stats.q75.resize(T);
  std::vector<double> column(per_sample_curves.size());
  for (size_t t = 0; t < T; ++t) {
    for (size_t s = 0; s < per_sample_curves.size(); ++s) column[s] = per_sample_curves[s][t];
    stats.q25[t] = quantile(column, 0.25);
    stats.median[t] = quantile(column, 0.5);
    stats.q75[t] = quantile(column, 0.75);
  }
  return stats;
}

std::vector<double> error_reduction(const std::vector<double>& cgs_median,
                                    const std::vector<double>& rl_median) {
  if (cgs_median.size() != rl_median.size())
    throw std::invalid_argument("error_reduction: curve length mismatch");
  std::vector<double> out(cgs_median.size(), 0.0);
  for (size_t t = 0; t < out.size(); ++t)
    if (cgs_median[t] >= 1e-14) out[t] = 1.0 - rl_median[t] / cgs_median[t];
  return out;
}

namespace {

struct SampleCurves {
  std::vector<double> cgs_mse;
  std::vector<double> rl_mse;
  EpisodeTrace trace_cgs;
  EpisodeTrace trace_rl;
  std::vector<std::pair<double, ChannelField>> snaps_cgs, snaps_rl, snaps_ref;
  bool ok = false;
};

int snapshot_step(double t, const EpisodeConfig& cfg) {
  int step = static_cast<int>(std::lround(t / cfg.coarse_dt));
  return std::clamp(step, 0, cfg.max_steps);
}

}  // namespace

EvalResult evaluate(const EvalRun& run, const NetworkParams* policy) {
  if (run.samples < 1) throw std::invalid_argument("evaluate: samples must be >= 1");
  EpisodeConfig cfg = run.episode;
  cfg.terminate_on_mae = false;  // full-horizon curves
  cfg.validate();

  PolicyFn mean_policy;
  if (policy) mean_policy = make_mean_policy(*policy);

  Rng spec_rng(run.seed, rng_streams::kEval);
  std::vector<SampleCurves> samples;
  samples.reserve(run.samples);

  for (int s = 0; s < run.samples; ++s) {
    MmsSpec spec = sample_spec(cfg.pde, spec_rng);
    SampleCurves sample;

    std::shared_ptr<const ReferenceTrajectory> ref;
    if (run.mode == EvalMode::out_of_distribution)
      ref = std::make_shared<ReferenceTrajectory>(build_fgs_reference(cfg, spec, cfg.max_steps));

    auto reset_env = [&](ClosureEnv& env) {
      if (run.mode == EvalMode::out_of_distribution)
        env.reset_homogeneous(spec, ref);
      else
        env.reset_with_spec(spec);
    };

    // Snapshots (and per-step records) are captured for the first sample only.
    const bool capture = s == 0;
    std::vector<int> snap_steps;
    for (double t : run.snapshot_times) snap_steps.push_back(snapshot_step(t, cfg));

    auto run_one = [&](const PolicyFn& pol, std::vector<std::pair<double, ChannelField>>* snaps,
                       EpisodeTrace& trace_out) {
      ClosureEnv env(cfg);
      reset_env(env);
      SnapshotFn on_step;
      if (capture && snaps) {
        on_step = [&](int step, const ChannelField& field) {
          for (size_t k = 0; k < snap_steps.size(); ++k)
            if (snap_steps[k] == step) snaps->emplace_back(run.snapshot_times[k], field);
        };
      }
      trace_out = run_episode(env, pol, on_step);
      if (capture && snaps == &sample.snaps_rl) {
        // Side channel: grab the reference snapshots once.
        for (size_t k = 0; k < snap_steps.size(); ++k)
          sample.snaps_ref.emplace_back(run.snapshot_times[k], env.reference_at(snap_steps[k]));
      }
    };

    run_one(PolicyFn{}, capture ? &sample.snaps_cgs : nullptr, sample.trace_cgs);
    run_one(mean_policy, capture ? &sample.snaps_rl : nullptr, sample.trace_rl);

    sample.cgs_mse = sample.trace_cgs.mse;
    sample.rl_mse = sample.trace_rl.mse;
    sample.ok = !sample.trace_cgs.nonfinite && !sample.trace_rl.nonfinite &&
                all_finite(sample.cgs_mse) && all_finite(sample.rl_mse) &&
                static_cast<int>(sample.cgs_mse.size()) == cfg.max_steps + 1 &&
                static_cast<int>(sample.rl_mse.size()) == cfg.max_steps + 1;
    samples.push_back(std::move(sample));
  }

  std::vector<std::vector<double>> cgs_curves, rl_curves, cgs_cum, rl_cum;
  EvalResult result;
  for (auto& s : samples) {
    if (!s.ok) {
      ++result.excluded_samples;
      continue;
    }
    cgs_curves.push_back(s.cgs_mse);
    rl_curves.push_back(s.rl_mse);
    cgs_cum.push_back(cumulative_error(s.cgs_mse));
    rl_cum.push_back(cumulative_error(s.rl_mse));
  }
  if (cgs_curves.empty()) throw std::runtime_error("evaluate: every sample blew up");

  result.cgs_mse = curve_stats(cgs_curves);
  result.rl_mse = curve_stats(rl_curves);
  result.cgs_cumulative = curve_stats(cgs_cum);
  result.rl_cumulative = curve_stats(rl_cum);
  result.reduction = error_reduction(result.cgs_mse.median, result.rl_mse.median);
  result.cum_reduction = error_reduction(result.cgs_cumulative.median, result.rl_cumulative.median);

  result.sample0_cgs = std::move(samples.front().trace_cgs);
  result.sample0_rl = std::move(samples.front().trace_rl);
  result.snaps_cgs = std::move(samples.front().snaps_cgs);
  result.snaps_rl = std::move(samples.front().snaps_rl);
  result.snaps_ref = std::move(samples.front().snaps_ref);
  return result;
}

namespace {

void write_stats_csv(const std::string& path, double dt, const CurveStats& cgs,
                     const CurveStats& rl) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "step,t,cgs_q25,cgs_median,cgs_q75,rl_q25,rl_median,rl_q75\n";
  char buf[256];
  for (size_t k = 0; k < cgs.median.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", k, k * dt,
                  cgs.q25[k], cgs.median[k], cgs.q75[k], rl.q25[k], rl.median[k], rl.q75[k]);
    out << buf;
  }
}

std::string snapshot_name(const std::string& base, int channel, int channels, double t) {
  char tbuf[32];
  std::snprintf(tbuf, sizeof(tbuf), "%g", t);
  std::string comp = channels > 1 ? (channel == 0 ? "_u" : "_v") : "";
  return base + comp + "_t" + tbuf + ".csv";
}

void write_snapshot_fields(const std::string& dir, const std::string& base,
                           const std::vector<std::pair<double, ChannelField>>& snaps) {
  for (const auto& [t, field] : snaps) {
    for (int c = 0; c < field.channels; ++c) {
      std::string path = dir + "/" + snapshot_name(base, c, field.channels, t);
      if (field.shape.is_2d()) {
        ScalarField2D f(field.shape.nx, field.shape.ny);
        f.v.assign(field.channel(c), field.channel(c) + field.cells());
        write_csv(path, f);
      } else {
        ScalarField1D f;
        f.v.assign(field.channel(c), field.channel(c) + field.cells());
        write_csv(path, f);
      }
    }
  }
}

}  // namespace

void write_outputs(const EvalResult& result, const EvalRun& run) {
  namespace fs = std::filesystem;
  fs::create_directories(run.out_dir);
  const double dt = run.episode.coarse_dt;

  write_stats_csv(run.out_dir + "/mse.csv", dt, result.cgs_mse, result.rl_mse);
  write_stats_csv(run.out_dir + "/cumulative.csv", dt, result.cgs_cumulative, result.rl_cumulative);

  {
    std::ofstream out(run.out_dir + "/reduction.csv");
    if (!out) throw std::runtime_error("cannot open reduction.csv");
    out << "step,t,reduction,cum_reduction\n";
    char buf[128];
    for (size_t k = 0; k < result.reduction.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", k, k * dt, result.reduction[k],
                    result.cum_reduction[k]);
      out << buf;
    }
  }

  write_curve_svg(run.out_dir + "/mse.svg", "MSE per step", dt, result.cgs_mse, result.rl_mse);
  write_curve_svg(run.out_dir + "/cumulative.svg", "Cumulative MSE", dt, result.cgs_cumulative,
                  result.rl_cumulative);

  write_episode_csv(run.out_dir + "/episode_cgs.csv", result.sample0_cgs, dt);
  write_episode_csv(run.out_dir + "/episode_rl.csv", result.sample0_rl, dt);

  write_snapshot_fields(run.out_dir, "snapshot_cgs", result.snaps_cgs);
  write_snapshot_fields(run.out_dir, "snapshot_rl", result.snaps_rl);
  write_snapshot_fields(run.out_dir, "snapshot_ref", result.snaps_ref);
}

namespace {

struct PlotBox {
  double x0 = 70, y0 = 40, w = 640, h = 320;
};

double log_floor(const CurveStats& a, const CurveStats& b) {
  double lo = std::numeric_limits<double>::infinity();
  auto scan = [&](const std::vector<double>& v) {
    for (double x : v)
      if (x > 0.0) lo = std::min(lo, x);
  };
  scan(a.q25);
  scan(a.q75);
  scan(b.q25);
  scan(b.q75);
  if (!std::isfinite(lo)) lo = 1e-16;
  return lo / 10.0;
}

}  // namespace

void write_curve_svg(const std::string& path, const std::string& title, double dt,
                     const CurveStats& cgs, const CurveStats& rl) {
  const size_t T = cgs.median.size();
  if (T < 2 || rl.median.size() != T) throw std::invalid_argument("write_curve_svg: bad curves");

  const PlotBox box;
  const double floor = log_floor(cgs, rl);
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  auto expand = [&](const std::vector<double>& v) {
    for (double x : v) {
      double lx = std::log10(std::max(x, floor));
      ymin = std::min(ymin, lx);
      ymax = std::max(ymax, lx);
    }
  };
  expand(cgs.q25);
  expand(cgs.q75);
  expand(rl.q25);
  expand(rl.q75);
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;

  auto px = [&](size_t k) { return box.x0 + box.w * static_cast<double>(k) / static_cast<double>(T - 1); };
  auto py = [&](double v) {
    double lv = std::log10(std::max(v, floor));
    return box.y0 + box.h * (1.0 - (lv - ymin) / (ymax - ymin));
  };

  auto polyline = [&](const std::vector<double>& v) {
    std::ostringstream pts;
    for (size_t k = 0; k < T; ++k) pts << px(k) << "," << py(v[k]) << " ";
    return pts.str();
  };
  auto band = [&](const std::vector<double>& lo, const std::vector<double>& hi) {
    std::ostringstream pts;
    for (size_t k = 0; k < T; ++k) pts << px(k) << "," << py(hi[k]) << " ";
    for (size_t k = T; k-- > 0;) pts << px(k) << "," << py(lo[k]) << " ";
    return pts.str();
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"780\" height=\"420\" "
         "viewBox=\"0 0 780 420\">\n"
      << "<rect width=\"780\" height=\"420\" fill=\"white\"/>\n";
  out << "<text x=\"" << box.x0 + box.w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

  // Axes with a handful of ticks.
  out << "<line x1=\"" << box.x0 << "\" y1=\"" << box.y0 + box.h << "\" x2=\"" << box.x0 + box.w
      << "\" y2=\"" << box.y0 + box.h << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << box.x0 << "\" y1=\"" << box.y0 << "\" x2=\"" << box.x0 << "\" y2=\""
      << box.y0 + box.h << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double frac = i / 4.0;
    double x = box.x0 + frac * box.w;
    double tval = frac * dt * static_cast<double>(T - 1);
    out << "<line x1=\"" << x << "\" y1=\"" << box.y0 + box.h << "\" x2=\"" << x << "\" y2=\""
        << box.y0 + box.h + 5 << "\" stroke=\"black\"/>\n";
    char lbl[32];
    std::snprintf(lbl, sizeof(lbl), "%.3g", tval);
    out << "<text x=\"" << x << "\" y=\"" << box.y0 + box.h + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << lbl
        << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    double frac = i / 4.0;
    double y = box.y0 + box.h * (1.0 - frac);
    double lv = ymin + frac * (ymax - ymin);
    out << "<line x1=\"" << box.x0 - 5 << "\" y1=\"" << y << "\" x2=\"" << box.x0 << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n";
    char lbl[32];
    std::snprintf(lbl, sizeof(lbl), "1e%.1f", lv);
    out << "<text x=\"" << box.x0 - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << lbl
        << "</text>\n";
  }
  out << "<text x=\"" << box.x0 + box.w / 2 << "\" y=\"" << box.y0 + box.h + 38
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">t</text>\n";

  const char* cgs_color = "#4878cf";
  const char* rl_color = "#e1812c";
  out << "<polygon points=\"" << band(cgs.q25, cgs.q75) << "\" fill=\"" << cgs_color
      << "\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
  out << "<polygon points=\"" << band(rl.q25, rl.q75) << "\" fill=\"" << rl_color
      << "\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
  out << "<polyline points=\"" << polyline(cgs.median) << "\" fill=\"none\" stroke=\"" << cgs_color
      << "\" stroke-width=\"2\"/>\n";
  out << "<polyline points=\"" << polyline(rl.median) << "\" fill=\"none\" stroke=\"" << rl_color
      << "\" stroke-width=\"2\"/>\n";

  double lx = box.x0 + box.w - 150, ly = box.y0 + 14;
  out << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 28 << "\" y2=\"" << ly
      << "\" stroke=\"" << cgs_color << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << lx + 34 << "\" y=\"" << ly + 4
      << "\" font-family=\"sans-serif\" font-size=\"12\">CGS</text>\n";
  ly += 18;
  out << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 28 << "\" y2=\"" << ly
      << "\" stroke=\"" << rl_color << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << lx + 34 << "\" y=\"" << ly + 4
      << "\" font-family=\"sans-serif\" font-size=\"12\">Closure-RL</text>\n";
  out << "</svg>\n";
}

namespace {

struct StatsCsv {
  CurveStats cgs, rl;
  double dt = 0.0;
};

StatsCsv read_stats_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty stats csv: " + path);

  StatsCsv out;
  double prev_t = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    std::vector<double> row;
    while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
    if (row.size() != 8) throw std::runtime_error("malformed stats csv row in " + path);
    if (out.cgs.median.size() == 1) out.dt = row[1] - prev_t;
    prev_t = row[1];
    out.cgs.q25.push_back(row[2]);
    out.cgs.median.push_back(row[3]);
    out.cgs.q75.push_back(row[4]);
    out.rl.q25.push_back(row[5]);
    out.rl.median.push_back(row[6]);
    out.rl.q75.push_back(row[7]);
  }
  return out;
}

}  // namespace

void plot_from_csv(const std::string& in_dir, const std::string& out_dir, double dt) {
  std::filesystem::create_directories(out_dir);
  StatsCsv mse_stats = read_stats_csv(in_dir + "/mse.csv");
  StatsCsv cum_stats = read_stats_csv(in_dir + "/cumulative.csv");
  if (dt <= 0.0) dt = mse_stats.dt > 0.0 ? mse_stats.dt : 1.0;
  write_curve_svg(out_dir + "/mse.svg", "MSE per step", dt, mse_stats.cgs, mse_stats.rl);
  write_curve_svg(out_dir + "/cumulative.svg", "Cumulative MSE", dt, cum_stats.cgs, cum_stats.rl);
}

}  // namespace mmsc
