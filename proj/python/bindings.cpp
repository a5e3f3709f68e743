#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sgdnet/baselines.hpp"
#include "sgdnet/config.hpp"
#include "sgdnet/experiment.hpp"
#include "sgdnet/theory.hpp"
#include "sgdnet/training.hpp"

namespace py = pybind11;
using namespace sgdnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() == 0) return Tensor::scalar(*a.data());
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

MeasurementSet to_measurements(const std::vector<Array>& blocks) {
  MeasurementSet y;
  for (const auto& b : blocks) y.blocks.push_back(to_tensor(b));
  return y;
}

std::vector<Array> to_list(const MeasurementSet& y) {
  std::vector<Array> out;
  for (const auto& b : y.blocks) out.push_back(to_array(b));
  return out;
}

std::vector<Array> to_list(const std::vector<Tensor>& ts) {
  std::vector<Array> out;
  for (const auto& t : ts) out.push_back(to_array(t));
  return out;
}

DataMode parse_mode(const std::string& mode) {
  if (mode == "stochastic") return DataMode::kStochastic;
  if (mode == "full-batch") return DataMode::kFullBatch;
  throw ConfigError("mode must be 'stochastic' or 'full-batch'");
}

}  // namespace

PYBIND11_MODULE(_sgdnet, m) {
  m.doc() = "Stochastic deep unfolding for imaging inverse problems";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<CheckpointMismatch>(m, "CheckpointMismatch", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_ArithmeticError);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init<>())
      .def_readwrite("kind", &ModelSpec::kind)
      .def_readwrite("size", &ModelSpec::size)
      .def_readwrite("components", &ModelSpec::components)
      .def_readwrite("detectors", &ModelSpec::detectors)
      .def_readwrite("supersample", &ModelSpec::supersample)
      .def_readwrite("angle_jitter_deg", &ModelSpec::angle_jitter_deg)
      .def_readwrite("kernel_size", &ModelSpec::kernel_size)
      .def_readwrite("seed", &ModelSpec::seed);

  py::class_<ForwardModel>(m, "ForwardModel")
      .def(py::init([](const ModelSpec& spec) { return build_model(spec); }), py::arg("spec"))
      .def_property_readonly("components", &ForwardModel::size)
      .def_property_readonly("image_shape", &ForwardModel::image_shape)
      .def("__len__", &ForwardModel::size)
      .def("apply", [](const ForwardModel& f, const Array& x) { return to_list(apply(f, to_tensor(x))); })
      .def("apply_component",
           [](const ForwardModel& f, std::size_t i, const Array& x) {
             return to_array(f.component(i).apply(to_tensor(x)));
           })
      .def("adjoint_component",
           [](const ForwardModel& f, std::size_t i, const Array& u) {
             return to_array(f.component(i).adjoint(to_tensor(u)));
           })
      .def("adjoint", [](const ForwardModel& f, const std::vector<Array>& y) {
        return to_array(adjoint(f, to_measurements(y)));
      });

  m.def("radon_model", [](std::size_t n, std::size_t views, std::size_t supersample) {
        RadonOptions o;
        o.supersample = supersample;
        return make_radon_model(n, views, o);
      },
      py::arg("n"), py::arg("views"), py::arg("supersample") = 1);
  m.def("conv_model", &make_conv_model, py::arg("n"), py::arg("components"), py::arg("seed"),
        py::arg("kernel_size") = 7);

  m.def("full_gradient", [](const Array& x, const std::vector<Array>& y, const ForwardModel& f) {
    return to_array(full_gradient(to_tensor(x), to_measurements(y), f));
  });
  m.def("minibatch_gradient",
        [](const Array& x, const std::vector<Array>& y, const ForwardModel& f, std::vector<std::size_t> idx) {
          return to_array(minibatch_gradient(to_tensor(x), to_measurements(y), f, idx));
        });
  m.def("sample_indices", [](std::size_t b, std::size_t i, std::uint64_t seed) {
    Rng rng(seed);
    return sample_indices(b, i, rng);
  });
  m.def("bp_init", [](const std::vector<Array>& y, const ForwardModel& f) {
    return to_array(bp_init(to_measurements(y), f));
  });
  m.def("fbp_init", [](const std::vector<Array>& y, const ForwardModel& f) {
    return to_array(fbp_init(to_measurements(y), f));
  });
  m.def("add_awgn", [](const std::vector<Array>& y, double snr_db, std::uint64_t seed) {
        Rng rng(seed);
        return to_list(add_awgn_to_input_snr(to_measurements(y), snr_db, rng));
      },
      py::arg("y"), py::arg("snr_db"), py::arg("seed"));
  m.def("make_phantom", [](std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return to_array(make_phantom(n, rng));
  });

  py::class_<PriorNet>(m, "PriorNet")
      .def(py::init([](std::size_t hidden, std::size_t kernel, double tau) {
             return PriorNet(PriorNetSpec{hidden, kernel}, tau);
           }),
           py::arg("hidden") = 16, py::arg("kernel") = 3, py::arg("tau") = 0.0)
      .def_static("random",
                  [](std::size_t hidden, std::size_t kernel, std::uint64_t seed, double tau, double gain) {
                    return PriorNet::random({hidden, kernel}, seed, tau, gain);
                  },
                  py::arg("hidden") = 16, py::arg("kernel") = 3, py::arg("seed") = 0, py::arg("tau") = 0.0,
                  py::arg("gain") = 1.0)
      .def_static("zeros",
                  [](std::size_t hidden, std::size_t kernel, double tau) {
                    return PriorNet::zeros({hidden, kernel}, tau);
                  },
                  py::arg("hidden") = 16, py::arg("kernel") = 3, py::arg("tau") = 0.0)
      .def_static("identity",
                  [](std::size_t hidden, std::size_t kernel, double tau) {
                    return PriorNet::identity({hidden, kernel}, tau);
                  },
                  py::arg("hidden") = 16, py::arg("kernel") = 3, py::arg("tau") = 0.0)
      .def_property("tau", &PriorNet::tau, &PriorNet::set_tau)
      .def_property(
          "theta", [](const PriorNet& n) { return to_array(n.theta()); },
          [](PriorNet& n, const Array& a) { n.set_theta(to_tensor(a)); })
      .def_property_readonly("parameter_count", py::overload_cast<>(&PriorNet::parameter_count, py::const_))
      .def("spec_hash", &PriorNet::spec_hash)
      .def("r", [](const PriorNet& n, const Array& x) { return to_array(r_theta_apply(n, to_tensor(x))); })
      .def("d", [](const PriorNet& n, const Array& x) { return to_array(d_theta_apply(n, to_tensor(x))); });

  m.def("sgdnet_forward",
        [](const Array& x0, const std::vector<Array>& y, const ForwardModel& f, const PriorNet& net, std::size_t steps,
           double gamma, std::size_t minibatch, const std::string& mode, std::uint64_t seed) {
          UnfoldConfig cfg;
          cfg.steps = steps;
          cfg.gamma = gamma;
          cfg.minibatch = minibatch;
          cfg.mode = parse_mode(mode);
          Rng rng(seed);
          return to_array(sgdnet_forward(to_tensor(x0), to_measurements(y), f, net, cfg, rng).final_image);
        },
        py::arg("x0"), py::arg("y"), py::arg("model"), py::arg("net"), py::arg("steps") = 8, py::arg("gamma") = 5e-3,
        py::arg("minibatch") = 1, py::arg("mode") = "stochastic", py::arg("seed") = 0);
  m.def("ured_forward",
        [](const Array& x0, const std::vector<Array>& y, const ForwardModel& f, const PriorNet& net, std::size_t steps,
           double gamma) {
          UnfoldConfig cfg;
          cfg.steps = steps;
          cfg.gamma = gamma;
          cfg.mode = DataMode::kFullBatch;
          return to_array(ured_forward(to_tensor(x0), to_measurements(y), f, net, cfg).final_image);
        },
        py::arg("x0"), py::arg("y"), py::arg("model"), py::arg("net"), py::arg("steps") = 8, py::arg("gamma") = 5e-3);

  m.def("snr_db", [](const Array& xhat, const Array& x) { return snr_db(to_tensor(xhat), to_tensor(x)); });
  m.def("ssim", [](const Array& xhat, const Array& x, double dynamic_range) {
        return ssim(to_tensor(xhat), to_tensor(x), dynamic_range);
      },
      py::arg("xhat"), py::arg("x"), py::arg("dynamic_range") = 1.0);

  m.def("tv_apgm",
        [](const std::vector<Array>& y, const ForwardModel& f, double tau, std::size_t iterations,
           std::optional<Array> init) {
          TVConfig cfg;
          cfg.tau = tau;
          cfg.iterations = iterations;
          if (init) cfg.init = to_tensor(*init);
          TVResult r = tv_apgm(to_measurements(y), f, cfg);
          return py::make_tuple(to_array(r.image), r.objective);
        },
        py::arg("y"), py::arg("model"), py::arg("tau"), py::arg("iterations") = 240, py::arg("init") = py::none());
  m.def("red_fixed_point",
        [](const std::vector<Array>& y, const ForwardModel& f, const PriorNet& denoiser, double tau,
           std::size_t iterations, std::optional<Array> init) {
          REDConfig cfg;
          cfg.tau = tau;
          cfg.iterations = iterations;
          if (init) cfg.init = to_tensor(*init);
          REDResult r = red_fixed_point(to_measurements(y), f, denoiser, cfg);
          return py::make_tuple(to_array(r.image), r.residual);
        },
        py::arg("y"), py::arg("model"), py::arg("denoiser"), py::arg("tau") = 1.0, py::arg("iterations") = 240,
        py::arg("init") = py::none());

  m.def("check_unbiasedness", [](const ForwardModel& f, const std::vector<Array>& y, const std::vector<Array>& probes) {
    std::vector<Tensor> ps;
    for (const auto& p : probes) ps.push_back(to_tensor(p));
    return check_phi_unbiasedness(f, to_measurements(y), ps).max_deviation;
  });
  m.def("enumerated_variance", [](const ForwardModel& f, const std::vector<Array>& y, const Array& x) {
    return enumerated_variance(f, to_measurements(y), to_tensor(x));
  });

  // Experiment-level entry points driven by the JSON config format.
  m.def("default_config", [] { return config_to_json(ExperimentConfig()); });
  m.def("normalize_config", [](const std::string& text) { return config_to_json(parse_config(text)); });

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def("truth", [](const Dataset& d, std::size_t j) { return to_array(d.samples.at(j).truth); })
      .def("init", [](const Dataset& d, std::size_t j) { return to_array(d.samples.at(j).init); })
      .def("measurements", [](const Dataset& d, std::size_t j) { return to_list(d.samples.at(j).y); });

  py::class_<ProblemData>(m, "Problem")
      .def_readonly("model", &ProblemData::model)
      .def_readonly("train", &ProblemData::train)
      .def_readonly("test", &ProblemData::test);
  m.def("load_problem", [](const std::string& config_json) { return load_problem(parse_config(config_json)); });

  m.def("train",
        [](const std::string& config_json, const ProblemData& problem, const PriorNet& warm) {
          const ExperimentConfig cfg = parse_config(config_json);
          TrainResult r = run_unfolded(cfg, problem, warm, cfg.unfold.unfold);
          std::vector<double> losses;
          for (const auto& row : r.trace.rows) losses.push_back(row.loss);
          return py::make_tuple(r.checkpoint.net, losses);
        },
        py::arg("config"), py::arg("problem"), py::arg("warm"),
        "Trains the unfolded network from `warm`; returns (net, per-iteration losses).");
  m.def("pretrain",
        [](const std::string& config_json, const ProblemData& problem) {
          const ExperimentConfig cfg = parse_config(config_json);
          return run_pretrain(cfg, problem.train).checkpoint.net;
        },
        py::arg("config"), py::arg("problem"));
  m.def("reconstruct",
        [](const ProblemData& problem, const PriorNet& net, std::size_t steps, double gamma, std::size_t minibatch,
           const std::string& mode, std::uint64_t seed) {
          UnfoldConfig u;
          u.steps = steps;
          u.gamma = gamma;
          u.minibatch = minibatch;
          u.mode = parse_mode(mode);
          return to_list(reconstruct_unfolded(problem.test, problem.model, net, u, seed));
        },
        py::arg("problem"), py::arg("net"), py::arg("steps") = 8, py::arg("gamma") = 5e-3, py::arg("minibatch") = 10,
        py::arg("mode") = "stochastic", py::arg("seed") = 0);
}
