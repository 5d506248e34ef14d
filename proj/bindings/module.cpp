#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "mmsc/config.hpp"
#include "mmsc/eval.hpp"
#include "mmsc/grid.hpp"
#include "mmsc/mms.hpp"
#include "mmsc/policy_net.hpp"
#include "mmsc/ppo.hpp"
#include "mmsc/solvers.hpp"

namespace py = pybind11;
using namespace mmsc;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// numpy <-> field conversions (copies; the fields are small)

ScalarField1D field1d_from_numpy(const DoubleArray& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1D array");
  ScalarField1D f(static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.shape(0), f.v.begin());
  return f;
}

py::array_t<double> field1d_to_numpy(const ScalarField1D& f) {
  py::array_t<double> a(f.size());
  std::copy(f.v.begin(), f.v.end(), a.mutable_data());
  return a;
}

ScalarField2D field2d_from_numpy(const DoubleArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2D array");
  ScalarField2D f(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + f.v.size(), f.v.begin());
  return f;
}

py::array_t<double> field2d_to_numpy(const ScalarField2D& f) {
  py::array_t<double> a({f.nx, f.ny});
  std::copy(f.v.begin(), f.v.end(), a.mutable_data());
  return a;
}

py::array_t<double> channels_to_numpy(const ChannelField& cf) {
  py::array_t<double> a;
  if (cf.shape.is_2d())
    a = py::array_t<double>({cf.channels, cf.shape.nx, cf.shape.ny});
  else
    a = py::array_t<double>({cf.channels, cf.shape.nx});
  std::copy(cf.data.begin(), cf.data.end(), a.mutable_data());
  return a;
}

ChannelField channels_from_numpy(const DoubleArray& a) {
  ChannelField cf;
  if (a.ndim() == 2) {
    cf = ChannelField(static_cast<int>(a.shape(0)), FieldShape{static_cast<int>(a.shape(1)), 0});
  } else if (a.ndim() == 3) {
    cf = ChannelField(static_cast<int>(a.shape(0)),
                      FieldShape{static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))});
  } else {
    throw std::invalid_argument("expected an array of shape (channels, nx) or (channels, nx, ny)");
  }
  std::copy(a.data(), a.data() + cf.data.size(), cf.data.begin());
  return cf;
}

py::dict outcome_to_dict(const StepOutcome& out) {
  py::dict d;
  d["obs"] = channels_to_numpy(out.obs);
  py::array_t<double> reward(static_cast<py::ssize_t>(out.reward.size()));
  std::copy(out.reward.begin(), out.reward.end(), reward.mutable_data());
  d["reward"] = reward;
  d["terminated"] = out.terminated;
  d["truncated"] = out.truncated;
  d["mae"] = out.mae;
  d["mse"] = out.mse;
  return d;
}

py::dict curve_to_dict(const CurveStats& c) {
  py::dict d;
  d["q25"] = c.q25;
  d["median"] = c.median;
  d["q75"] = c.q75;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reinforcement-learning closure models for coarse-grained PDE solvers, "
            "trained on manufactured-solution data";

  py::enum_<PdeType>(m, "PdeType")
      .value("burgers_1d", PdeType::burgers_1d)
      .value("burgers_2d", PdeType::burgers_2d)
      .value("advection_2d", PdeType::advection_2d);

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream") = 0)
      .def("uniform", py::overload_cast<>(&Rng::uniform))
      .def("normal", py::overload_cast<>(&Rng::normal));

  py::class_<Mms1DBurgers>(m, "Mms1DBurgers")
      .def(py::init<>())
      .def_readwrite("A", &Mms1DBurgers::A)
      .def_readwrite("B", &Mms1DBurgers::B)
      .def_readwrite("a", &Mms1DBurgers::a)
      .def_readwrite("b", &Mms1DBurgers::b)
      .def_readwrite("c", &Mms1DBurgers::c)
      .def_readwrite("delta", &Mms1DBurgers::delta);

  py::class_<Mms2DBurgers>(m, "Mms2DBurgers")
      .def(py::init<>())
      .def_readwrite("Au", &Mms2DBurgers::Au)
      .def_readwrite("Bu", &Mms2DBurgers::Bu)
      .def_readwrite("Cu", &Mms2DBurgers::Cu)
      .def_readwrite("Du", &Mms2DBurgers::Du)
      .def_readwrite("Av", &Mms2DBurgers::Av)
      .def_readwrite("Bv", &Mms2DBurgers::Bv)
      .def_readwrite("Cv", &Mms2DBurgers::Cv)
      .def_readwrite("Dv", &Mms2DBurgers::Dv)
      .def_readwrite("z_diff_u", &Mms2DBurgers::z_diff_u)
      .def_readwrite("z_diff_v", &Mms2DBurgers::z_diff_v);

  py::class_<Mms2DAdvection>(m, "Mms2DAdvection")
      .def(py::init<>())
      .def_readwrite("A", &Mms2DAdvection::A)
      .def_readwrite("B", &Mms2DAdvection::B)
      .def_readwrite("C", &Mms2DAdvection::C)
      .def_readwrite("D", &Mms2DAdvection::D)
      .def_readwrite("a", &Mms2DAdvection::a)
      .def_readwrite("b", &Mms2DAdvection::b)
      .def_readwrite("c", &Mms2DAdvection::c)
      .def_readwrite("d", &Mms2DAdvection::d)
      .def_readwrite("e", &Mms2DAdvection::e)
      .def_readwrite("f", &Mms2DAdvection::f)
      .def_readwrite("g", &Mms2DAdvection::g)
      .def_readwrite("h", &Mms2DAdvection::h)
      .def_readwrite("alpha", &Mms2DAdvection::alpha)
      .def_readwrite("beta", &Mms2DAdvection::beta);

  m.def("sample_1d_burgers", &sample_1d_burgers, py::arg("rng"));
  m.def("sample_2d_burgers", &sample_2d_burgers, py::arg("rng"));
  m.def("sample_2d_advection", &sample_2d_advection, py::arg("rng"));

  m.def("eval_solution_1d", &eval_solution_1d, py::arg("spec"), py::arg("x"), py::arg("t"));
  m.def("eval_forcing_1d", &eval_forcing_1d, py::arg("spec"), py::arg("nu"), py::arg("x"), py::arg("t"));
  m.def("fd_residual_1d", &fd_residual_1d, py::arg("spec"), py::arg("nu"), py::arg("x"),
        py::arg("t"), py::arg("h") = 1e-4);
  m.def("eval_solution_2d_advection", &eval_solution_2d_advection, py::arg("spec"), py::arg("x"),
        py::arg("y"), py::arg("t") = 0.0);
  m.def("eval_forcing_2d_advection", &eval_forcing_2d_advection, py::arg("spec"), py::arg("x"),
        py::arg("y"));
  m.def("eval_solution_2d_burgers", [](const Mms2DBurgers& s, double x, double y, double t) {
    UV r = eval_solution_2d_burgers(s, x, y, t);
    return py::make_tuple(r.u, r.v);
  });
  m.def("eval_forcing_2d_burgers", [](const Mms2DBurgers& s, double nu, double x, double y, double t) {
    UV r = eval_forcing_2d_burgers(s, nu, x, y, t);
    return py::make_tuple(r.u, r.v);
  });
  m.def("toy_solution", &toy_solution);
  m.def("toy_forcing", &toy_forcing);

  m.def(
      "solution_field_1d",
      [](const Mms1DBurgers& s, int n, double dt, double t) {
        return field1d_to_numpy(solution_field(s, GridSpec1D::make(n, dt), t));
      },
      py::arg("spec"), py::arg("n"), py::arg("dt"), py::arg("t"));
  m.def(
      "forcing_field_1d",
      [](const Mms1DBurgers& s, double nu, int n, double dt, double t) {
        return field1d_to_numpy(forcing_field(s, nu, GridSpec1D::make(n, dt), t));
      },
      py::arg("spec"), py::arg("nu"), py::arg("n"), py::arg("dt"), py::arg("t"));

  m.def("periodic_index", &periodic_index, py::arg("i"), py::arg("n"));
  m.def("subsample_1d", [](const DoubleArray& a, int d) {
    return field1d_to_numpy(subsample(field1d_from_numpy(a), d));
  });
  m.def("subsample_2d", [](const DoubleArray& a, int d) {
    return field2d_to_numpy(subsample(field2d_from_numpy(a), d));
  });
  m.def("mse", [](const DoubleArray& a, const DoubleArray& b) {
    return mse(std::span(a.data(), static_cast<size_t>(a.size())),
               std::span(b.data(), static_cast<size_t>(b.size())));
  });
  m.def("mae", [](const DoubleArray& a, const DoubleArray& b) {
    return mae(std::span(a.data(), static_cast<size_t>(a.size())),
               std::span(b.data(), static_cast<size_t>(b.size())));
  });
  m.def("cumulative_error", [](const std::vector<double>& s) {
    return cumulative_error(std::span(s));
  });

  m.def(
      "step_burgers_1d",
      [](const DoubleArray& psi, double nu, double dt, std::optional<DoubleArray> forcing) {
        ScalarField1D f = field1d_from_numpy(psi);
        GridSpec1D grid = GridSpec1D::make(f.size(), dt);
        if (forcing) {
          ScalarField1D ff = field1d_from_numpy(*forcing);
          return field1d_to_numpy(step_burgers_1d(f, nu, grid, &ff));
        }
        return field1d_to_numpy(step_burgers_1d(f, nu, grid));
      },
      py::arg("psi"), py::arg("nu"), py::arg("dt"), py::arg("forcing") = py::none());

  py::class_<EpisodeConfig>(m, "EpisodeConfig")
      .def_static("defaults", &EpisodeConfig::defaults, py::arg("pde"))
      .def_readwrite("pde", &EpisodeConfig::pde)
      .def_readwrite("max_steps", &EpisodeConfig::max_steps)
      .def_readwrite("mae_threshold", &EpisodeConfig::mae_threshold)
      .def_readwrite("coarse_n", &EpisodeConfig::coarse_n)
      .def_readwrite("coarse_dt", &EpisodeConfig::coarse_dt)
      .def_readwrite("fine_n", &EpisodeConfig::fine_n)
      .def_readwrite("fine_dt", &EpisodeConfig::fine_dt)
      .def_readwrite("nu", &EpisodeConfig::nu)
      .def_readwrite("terminate_on_mae", &EpisodeConfig::terminate_on_mae)
      .def("obs_channels", &EpisodeConfig::obs_channels)
      .def("action_channels", &EpisodeConfig::action_channels);

  py::class_<ReferenceTrajectory, std::shared_ptr<ReferenceTrajectory>>(m, "ReferenceTrajectory")
      .def("__len__", [](const ReferenceTrajectory& r) { return r.snapshots.size(); })
      .def("snapshot", [](const ReferenceTrajectory& r, int k) {
        return channels_to_numpy(r.snapshots.at(static_cast<size_t>(k)));
      });

  m.def(
      "build_fgs_reference",
      [](const EpisodeConfig& cfg, const Mms1DBurgers& spec, int steps) {
        return std::make_shared<ReferenceTrajectory>(build_fgs_reference(cfg, spec, steps));
      },
      py::arg("config"), py::arg("spec"), py::arg("steps"));

  py::class_<ClosureEnv>(m, "ClosureEnv")
      .def(py::init<EpisodeConfig>(), py::arg("config"))
      .def("obs_channels", &ClosureEnv::obs_channels)
      .def("action_channels", &ClosureEnv::action_channels)
      .def(
          "reset",
          [](ClosureEnv& env, std::uint64_t seed) {
            Rng rng(seed, rng_streams::kTrainEpisodes);
            return channels_to_numpy(env.reset(rng));
          },
          py::arg("seed"))
      .def("reset_with_spec",
           [](ClosureEnv& env, const Mms1DBurgers& s) { return channels_to_numpy(env.reset_with_spec(s)); })
      .def("reset_with_spec",
           [](ClosureEnv& env, const Mms2DBurgers& s) { return channels_to_numpy(env.reset_with_spec(s)); })
      .def("reset_with_spec",
           [](ClosureEnv& env, const Mms2DAdvection& s) { return channels_to_numpy(env.reset_with_spec(s)); })
      .def("reset_homogeneous",
           [](ClosureEnv& env, const Mms1DBurgers& s, std::shared_ptr<ReferenceTrajectory> ref) {
             return channels_to_numpy(env.reset_homogeneous(s, ref));
           })
      .def("step",
           [](ClosureEnv& env, const DoubleArray& action) {
             return outcome_to_dict(env.step(channels_from_numpy(action)));
           })
      .def("current", [](const ClosureEnv& env) { return channels_to_numpy(env.current()); })
      .def("reference_at",
           [](const ClosureEnv& env, int k) { return channels_to_numpy(env.reference_at(k)); })
      .def("step_index", &ClosureEnv::step_index)
      .def("done", &ClosureEnv::done);

  py::class_<NetworkParams>(m, "NetworkParams")
      .def("param_count", &NetworkParams::param_count)
      .def_property_readonly("pde_tag", [](const NetworkParams& p) { return p.config.pde_tag; });

  m.def(
      "init_network",
      [](const EpisodeConfig& cfg, std::uint64_t seed) {
        Rng rng(seed, rng_streams::kParamInit);
        return init_params(network_config_for(cfg), rng);
      },
      py::arg("config"), py::arg("seed"));
  m.def(
      "network_forward",
      [](const NetworkParams& params, const DoubleArray& obs) {
        ForwardResult r = forward(params, channels_from_numpy(obs));
        py::array_t<double> value(static_cast<py::ssize_t>(r.value.size()));
        std::copy(r.value.begin(), r.value.end(), value.mutable_data());
        return py::make_tuple(channels_to_numpy(r.policy.mean),
                              channels_to_numpy(r.policy.log_std), value);
      },
      py::arg("params"), py::arg("obs"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("params"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  py::class_<PpoConfig>(m, "PpoConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &PpoConfig::learning_rate)
      .def_readwrite("entropy_coef", &PpoConfig::entropy_coef)
      .def_readwrite("discount", &PpoConfig::discount)
      .def_readwrite("epochs", &PpoConfig::epochs)
      .def_readwrite("transitions_per_epoch", &PpoConfig::transitions_per_epoch)
      .def_readwrite("episodes_per_update", &PpoConfig::episodes_per_update)
      .def_readwrite("batch_size", &PpoConfig::batch_size)
      .def_readwrite("repeat_per_collect", &PpoConfig::repeat_per_collect)
      .def_readwrite("validation_episodes", &PpoConfig::validation_episodes)
      .def_readwrite("clip_ratio", &PpoConfig::clip_ratio)
      .def_readwrite("gae_lambda", &PpoConfig::gae_lambda)
      .def_readwrite("value_coef", &PpoConfig::value_coef)
      .def_readwrite("max_grad_norm", &PpoConfig::max_grad_norm)
      .def_readwrite("return_normalization", &PpoConfig::return_normalization)
      .def_readwrite("checkpoint_every", &PpoConfig::checkpoint_every);

  m.def(
      "train",
      [](const EpisodeConfig& env_cfg, const PpoConfig& rl, std::uint64_t seed,
         const std::string& out_dir) {
        TrainResult r = train(env_cfg, rl, seed, out_dir);
        py::dict d;
        d["best_score"] = r.best_score;
        d["best_epoch"] = r.best_epoch;
        d["best_checkpoint"] = r.best_checkpoint_path;
        d["validation_scores"] = r.log.validation_scores;
        d["episode_rewards"] = r.log.reward_history();
        d["episode_lengths"] = r.log.length_history();
        return d;
      },
      py::arg("episode_config"), py::arg("ppo_config"), py::arg("seed"), py::arg("out_dir"));

  m.def(
      "evaluate",
      [](const EpisodeConfig& cfg, const std::string& mode, const NetworkParams& params,
         int samples, std::uint64_t seed, const std::string& out_dir) {
        EvalRun run;
        run.episode = cfg;
        run.mode = eval_mode_from_string(mode);
        run.samples = samples;
        run.seed = seed;
        run.out_dir = out_dir;
        EvalResult r = evaluate(run, &params);
        if (!out_dir.empty()) write_outputs(r, run);
        py::dict d;
        d["cgs_mse"] = curve_to_dict(r.cgs_mse);
        d["rl_mse"] = curve_to_dict(r.rl_mse);
        d["cgs_cumulative"] = curve_to_dict(r.cgs_cumulative);
        d["rl_cumulative"] = curve_to_dict(r.rl_cumulative);
        d["reduction"] = r.reduction;
        d["cum_reduction"] = r.cum_reduction;
        d["excluded_samples"] = r.excluded_samples;
        return d;
      },
      py::arg("config"), py::arg("mode"), py::arg("params"), py::arg("samples"), py::arg("seed"),
      py::arg("out_dir") = std::string());

  m.def("moving_average", [](const std::vector<double>& series, int window) {
    return moving_average(std::span(series), window);
  });

  m.attr("__version__") = "0.1.0";
}
