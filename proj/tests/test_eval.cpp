#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mmsc/eval.hpp"
#include "mmsc/ppo.hpp"

using namespace mmsc;

namespace {

EpisodeConfig fast_config() {
  EpisodeConfig cfg = EpisodeConfig::defaults(PdeType::burgers_1d);
  cfg.coarse_n = 16;
  cfg.fine_n = 64;
  cfg.fine_dt = 1e-4;
  cfg.max_steps = 30;
  return cfg;
}

EvalRun fast_run(EvalMode mode, const std::string& out_dir = "") {
  EvalRun run;
  run.episode = fast_config();
  run.mode = mode;
  run.samples = 4;
  run.seed = 7;
  run.out_dir = out_dir;
  run.snapshot_times = {0.0, 0.075, 0.15};
  return run;
}

}  // namespace

TEST_CASE("quantiles interpolate between order statistics") {
  std::vector<double> v = {4, 1, 3, 2};
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile(v, 0.75) == doctest::Approx(3.25));
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile({5.0}, 0.5) == 5.0);
}

TEST_CASE("curve stats keep quantile ordering per timestep") {
  Rng rng(3);
  std::vector<std::vector<double>> curves(9, std::vector<double>(20));
  for (auto& c : curves)
    for (double& v : c) v = rng.uniform(0, 5);
  CurveStats stats = curve_stats(curves);
  for (size_t t = 0; t < 20; ++t) {
    CHECK(stats.q25[t] <= stats.median[t]);
    CHECK(stats.median[t] <= stats.q75[t]);
  }
}

TEST_CASE("error reduction definition and guard") {
  std::vector<double> cgs = {1.0, 2.0, 1e-20, 4.0};
  std::vector<double> rl = {1.0, 1.0, 1e-20, 0.8};
  auto red = error_reduction(cgs, rl);
  CHECK(red[0] == doctest::Approx(0.0));
  CHECK(red[1] == doctest::Approx(0.5));
  CHECK(red[2] == 0.0);  // below the 1e-14 guard
  CHECK(red[3] == doctest::Approx(0.8));
}

TEST_CASE("zero-action policy reproduces the baseline exactly") {
  EvalRun run = fast_run(EvalMode::in_distribution);
  EvalResult result = evaluate(run, nullptr);  // null policy: RL run == zero action
  REQUIRE(result.cgs_mse.median.size() == static_cast<size_t>(run.episode.max_steps + 1));
  CHECK(result.rl_mse.median == result.cgs_mse.median);
  CHECK(result.rl_mse.q25 == result.cgs_mse.q25);
  CHECK(result.rl_mse.q75 == result.cgs_mse.q75);
  for (double r : result.reduction) CHECK(r == 0.0);
  CHECK(result.excluded_samples == 0);

  // Baseline starts exact and the cumulative curves are monotone.
  CHECK(result.cgs_mse.median.front() == 0.0);
  for (size_t t = 1; t < result.cgs_cumulative.median.size(); ++t)
    CHECK(result.cgs_cumulative.median[t] >= result.cgs_cumulative.median[t - 1]);
}

TEST_CASE("out-of-distribution baseline grows and starts from the shared IC") {
  EvalRun run = fast_run(EvalMode::out_of_distribution);
  EvalResult result = evaluate(run, nullptr);
  CHECK(result.cgs_mse.median.front() == 0.0);  // FGS IC equals coarse IC
  CHECK(result.cgs_cumulative.median.back() > 0.0);
  CHECK(result.rl_mse.median == result.cgs_mse.median);
}

TEST_CASE("a real policy changes the curves while quantile ordering holds") {
  Rng rng(11);
  EvalRun run = fast_run(EvalMode::in_distribution);
  NetworkConfig net_cfg = network_config_for(run.episode);
  net_cfg.hidden_channels = 8;
  net_cfg.dilations = {1, 2};
  NetworkParams params = init_params(net_cfg, rng);
  EvalResult result = evaluate(run, &params);

  for (size_t t = 0; t < result.rl_mse.median.size(); ++t) {
    CHECK(result.rl_mse.q25[t] <= result.rl_mse.median[t]);
    CHECK(result.rl_mse.median[t] <= result.rl_mse.q75[t]);
  }
  // A fresh random policy differs from the exact zero action.
  CHECK(result.rl_mse.median.back() != result.cgs_mse.median.back());
}

TEST_CASE("outputs land on disk with the documented names") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mmsc_eval_outputs";
  fs::remove_all(dir);

  EvalRun run = fast_run(EvalMode::in_distribution, dir.string());
  EvalResult result = evaluate(run, nullptr);
  write_outputs(result, run);

  for (const char* name : {"mse.csv", "cumulative.csv", "reduction.csv", "mse.svg",
                           "cumulative.svg", "episode_cgs.csv", "episode_rl.csv"})
    CHECK(fs::exists(dir / name));

  // Snapshot files exist for the configured times (1-channel 1D fields).
  CHECK(fs::exists(dir / "snapshot_cgs_t0.csv"));
  CHECK(fs::exists(dir / "snapshot_rl_t0.075.csv"));
  CHECK(fs::exists(dir / "snapshot_ref_t0.15.csv"));

  // Columns round-trip through a generic reader.
  std::ifstream in(dir / "mse.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,t,cgs_q25,cgs_median,cgs_q75,rl_q25,rl_median,rl_q75");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == run.episode.max_steps + 1);

  // Snapshot alignment: t = 0.075 at dt = 5e-3 is step 15.
  CHECK(static_cast<int>(std::lround(0.075 / run.episode.coarse_dt)) == 15);
}

TEST_CASE("svg plots are well-formed xml") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mmsc_eval_svg";
  fs::remove_all(dir);
  fs::create_directories(dir);

  CurveStats cgs, rl;
  Rng rng(13);
  for (int t = 0; t < 40; ++t) {
    double base = 1e-4 * (t + 1);
    cgs.q25.push_back(base * 0.8);
    cgs.median.push_back(base);
    cgs.q75.push_back(base * 1.3);
    rl.q25.push_back(base * 0.1);
    rl.median.push_back(base * 0.2);
    rl.q75.push_back(base * 0.3);
  }
  std::string path = (dir / "test.svg").string();
  write_curve_svg(path, "MSE per step", 5e-3, cgs, rl);

  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string svg = buf.str();
  CHECK(svg.find("<?xml") == 0);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.rfind("</svg>") != std::string::npos);

  // Minimal well-formedness: every opened tag kind is closed or self-closed.
  size_t opens = 0, closes = 0;
  for (size_t i = 0; i < svg.size(); ++i) {
    if (svg[i] == '<') ++opens;
    if (svg[i] == '>') ++closes;
  }
  CHECK(opens == closes);

  // Python's XML parser is the real well-formedness check in the smoke tests;
  // here assert balanced polyline/polygon/text elements.
  auto count = [&](const std::string& needle) {
    size_t n = 0, pos = 0;
    while ((pos = svg.find(needle, pos)) != std::string::npos) {
      ++n;
      pos += needle.size();
    }
    return n;
  };
  CHECK(count("<polygon") == 2);
  CHECK(count("<polyline") == 2);
  CHECK(count("/>") + count("</") >= count("<polygon") + count("<polyline"));
}

TEST_CASE("plot subcommand machinery rebuilds svgs from csv") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mmsc_eval_replot";
  fs::remove_all(dir);

  EvalRun run = fast_run(EvalMode::in_distribution, dir.string());
  EvalResult result = evaluate(run, nullptr);
  write_outputs(result, run);

  fs::path replot = dir / "replot";
  plot_from_csv(dir.string(), replot.string(), run.episode.coarse_dt);
  CHECK(fs::exists(replot / "mse.svg"));
  CHECK(fs::exists(replot / "cumulative.svg"));
}
