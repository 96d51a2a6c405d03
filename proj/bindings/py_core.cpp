#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "icsysid/clustering.hpp"
#include "icsysid/dataset_io.hpp"
#include "icsysid/datagen.hpp"
#include "icsysid/lti.hpp"
#include "icsysid/metrics.hpp"
#include "icsysid/orchestrator.hpp"
#include "icsysid/report.hpp"
#include "icsysid/scenario.hpp"
#include "icsysid/training.hpp"

namespace py = pybind11;
using namespace icsysid;

namespace {

// Shape-checks a (phi, x) pair before handing it to Eigen, which would
// otherwise abort the interpreter on a dimension mismatch.
RegressionView make_view(const Matrix& phi, const Matrix& x) {
  if (phi.cols() != x.cols())
    throw std::invalid_argument("phi and x must have the same number of samples (columns)");
  if (x.rows() < 1 || phi.rows() <= x.rows())
    throw std::invalid_argument("phi must stack states over inputs: rows(phi) > rows(x) >= 1");
  return RegressionView{phi, x};
}

void check_theta(const Matrix& theta, const RegressionView& view) {
  if (theta.rows() != view.x.rows() || theta.cols() != view.phi.rows())
    throw std::invalid_argument("theta must be rows(x) x rows(phi)");
}

FitMode parse_mode(const std::string& mode) {
  if (mode == "prediction") return FitMode::prediction;
  if (mode == "simulation") return FitMode::simulation;
  throw std::invalid_argument("mode must be 'prediction' or 'simulation'");
}

nlohmann::json parse_json(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string(what) + ": " + e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "federated LTI system-identification core";

  py::class_<LtiParams>(m, "LtiParams")
      .def(py::init<Matrix, Matrix>(), py::arg("a"), py::arg("b"))
      .def_readonly("a", &LtiParams::a)
      .def_readonly("b", &LtiParams::b)
      .def_property_readonly("state_dim", &LtiParams::state_dim)
      .def_property_readonly("input_dim", &LtiParams::input_dim)
      .def("theta", &LtiParams::theta)
      .def_static("from_theta", &LtiParams::from_theta, py::arg("theta"), py::arg("input_dim"))
      .def("__repr__", [](const LtiParams& p) {
        return "LtiParams(state_dim=" + std::to_string(p.state_dim()) +
               ", input_dim=" + std::to_string(p.input_dim()) + ")";
      });

  py::class_<Rollout>(m, "Rollout")
      .def(py::init<Matrix, Matrix>(), py::arg("states"), py::arg("inputs"))
      .def_readonly("states", &Rollout::states)
      .def_readonly("inputs", &Rollout::inputs)
      .def_property_readonly("steps", &Rollout::steps);

  // Registered before any function that uses it as a default argument.
  py::enum_<MatrixNorm2>(m, "MatrixNorm2")
      .value("spectral", MatrixNorm2::spectral)
      .value("frobenius", MatrixNorm2::frobenius);

  py::class_<StabilityReport>(m, "StabilityReport")
      .def_readonly("eigen_magnitudes", &StabilityReport::eigen_magnitudes)
      .def_readonly("spectral_radius", &StabilityReport::spectral_radius)
      .def_readonly("is_stable", &StabilityReport::is_stable);

  py::class_<SimulationResult>(m, "SimulationResult")
      .def_readonly("states", &SimulationResult::states)
      .def_readonly("model_unstable", &SimulationResult::model_unstable)
      .def_readonly("overflowed", &SimulationResult::overflowed)
      .def_property_readonly("flagged", &SimulationResult::flagged);

  // --- models and trajectories ---------------------------------------------
  m.def("stability_report", &stability_report, py::arg("a"),
        "Eigenvalue magnitudes, spectral radius and strict stability of A.");
  m.def("predict_rollout", &predict_rollout, py::arg("params"), py::arg("rollout"),
        "One-step-ahead estimates driven by the measured states.");
  m.def("simulate_rollout", &simulate_rollout, py::arg("params"), py::arg("x_initial"),
        py::arg("inputs"), "Free-running simulation from the given initial state.");
  m.def(
      "generate_rollout",
      [](const LtiParams& params, int steps, double sigma_x, double sigma_u, double sigma_w,
         std::uint64_t seed) {
        RngEngine rng = make_engine(seed, Stream::rollout);
        return generate_rollout(params, steps, sigma_x, sigma_u, sigma_w, rng);
      },
      py::arg("params"), py::arg("steps"), py::arg("sigma_x"), py::arg("sigma_u"),
      py::arg("sigma_w"), py::arg("seed"),
      "Noisy trajectory of the model, seeded deterministically.");
  m.def("builtin_ground_truth", &builtin_ground_truth,
        "The five built-in benchmark ground-truth models.");

  // --- losses and updates ---------------------------------------------------
  m.def(
      "mse_loss",
      [](const Matrix& theta, const Matrix& phi, const Matrix& x) {
        const RegressionView view = make_view(phi, x);
        check_theta(theta, view);
        return mse_loss(theta, view);
      },
      py::arg("theta"), py::arg("phi"), py::arg("x"),
      "Mean squared one-step error over the samples.");
  m.def(
      "regularized_loss",
      [](const Matrix& theta, const Matrix& phi, const Matrix& x, double mu) {
        const RegressionView view = make_view(phi, x);
        check_theta(theta, view);
        return regularized_loss(theta, view, mu);
      },
      py::arg("theta"), py::arg("phi"), py::arg("x"), py::arg("mu"),
      "MSE plus mu times the Frobenius norm of the A block.");
  m.def(
      "loss_gradient",
      [](const Matrix& theta, const Matrix& phi, const Matrix& x, double mu) {
        const RegressionView view = make_view(phi, x);
        check_theta(theta, view);
        return loss_gradient(theta, view, mu);
      },
      py::arg("theta"), py::arg("phi"), py::arg("x"), py::arg("mu"),
      "Analytic gradient of the regularized loss.");
  m.def(
      "least_squares_update",
      [](const Matrix& theta, const Matrix& phi, const Matrix& x, double alpha) {
        const RegressionView view = make_view(phi, x);
        check_theta(theta, view);
        return least_squares_update(theta, view, alpha);
      },
      py::arg("theta"), py::arg("phi"), py::arg("x"), py::arg("alpha"),
      "Full-batch step theta + alpha * (X - theta Phi) Phi^T.");

  // --- clustering ------------------------------------------------------------
  m.def(
      "scaled_glorot_init",
      [](int nx, int nu, std::uint64_t seed) {
        RngEngine rng = make_engine(seed, Stream::cluster_init);
        return scaled_glorot_init(nx, nu, rng);
      },
      py::arg("nx"), py::arg("nu"), py::arg("seed"),
      "0.1-scaled Glorot draw for a fresh cluster model.");
  m.def(
      "warm_init",
      [](const std::vector<Matrix>& gt_thetas, double eta, std::uint64_t seed) {
        RngEngine rng = make_engine(seed, Stream::warm);
        return warm_init(gt_thetas, eta, rng);
      },
      py::arg("gt_thetas"), py::arg("eta"), py::arg("seed"),
      "Ground-truth models perturbed within (1/2 - eta) times their separation.");
  m.def(
      "assign_identity",
      [](const Matrix& phi, const Matrix& x, const std::vector<Matrix>& cluster_params) {
        const RegressionView view = make_view(phi, x);
        for (const Matrix& theta : cluster_params) check_theta(theta, view);
        return assign_identity(view, cluster_params);
      },
      py::arg("phi"), py::arg("x"), py::arg("cluster_params"),
      "Index of the cluster model with the lowest MSE on the data.");
  m.def("aggregate_clusters", &aggregate_clusters, py::arg("worker_params"), py::arg("flags"),
        py::arg("previous"), "Per-cluster unweighted mean; empty clusters stay unchanged.");
  m.def("cluster_merge", &cluster_merge, py::arg("cluster_params"), py::arg("eps_theta"),
        py::arg("norm") = MatrixNorm2::spectral,
        "Greedy single-pass merge of clusters within eps_theta of a pivot.");

  // --- metrics ----------------------------------------------------------------
  m.def("fit_per_state", &fit_per_state, py::arg("measured"), py::arg("estimated"),
        "Normalized per-state fit of an estimated series.");
  m.def(
      "score_worker",
      [](const LtiParams& params, const std::vector<Rollout>& rollouts, const std::string& mode) {
        const FitRecord record = score_worker(params, rollouts, parse_mode(mode));
        return py::make_tuple(record.per_state, record.min_fit);
      },
      py::arg("params"), py::arg("rollouts"), py::arg("mode") = "prediction",
      "Per-state fits (concatenated across rollouts) and their minimum.");
  m.def("param_error", &param_error, py::arg("estimated_theta"), py::arg("gt_theta"),
        "Frobenius distance between parameter matrices.");
  m.def("best_match_error", &best_match_error, py::arg("estimates"), py::arg("gt_theta"),
        "Smallest Frobenius distance from any estimate to the target.");
  m.def("delta_min", &delta_min, py::arg("gt_thetas"), py::arg("norm") = MatrixNorm2::spectral,
        "Minimum pairwise separation of the ground-truth models.");
  m.def("misclassified_pct", &misclassified_pct, py::arg("flags"), py::arg("gt_labels"),
        "Percent of workers sharing a cluster with a different ground truth.");
  m.def("unstable_cluster_pct", &unstable_cluster_pct, py::arg("final_registries"),
        "Percent of cluster models with spectral radius >= 1, pooled over runs.");

  // --- experiment drivers ------------------------------------------------------
  m.def(
      "generate_dataset",
      [](const std::string& spec_json, const std::string& out_dir) {
        const DatasetSpec spec = dataset_spec_from_json(parse_json(spec_json, "spec"), "spec");
        const Dataset dataset = build_synthetic_dataset(spec, select_ground_truth(spec));
        export_dataset(dataset, out_dir);
        return static_cast<int>(dataset.workers.size());
      },
      py::arg("spec_json"), py::arg("out_dir"),
      "Builds the synthetic dataset described by a JSON spec and exports it; "
      "returns the worker count.");
  m.def(
      "run_suite_json",
      [](const std::string& config_json, const std::string& out_dir, int threads) {
        const RunConfig config = run_config_from_json(parse_json(config_json, "config"));
        py::gil_scoped_release release;
        SuiteResult suite;
        if (out_dir.empty()) {
          suite = run_suite(config, threads);
        } else {
          SuiteOutputWriter writer(out_dir);
          suite = run_suite(config, threads, false, writer.sink());
          writer.finish(suite);
        }
        return summary_to_json(suite).dump(2);
      },
      py::arg("config_json"), py::arg("out_dir") = std::string(), py::arg("threads") = 1,
      "Runs a full repetition suite from a JSON config; optionally writes the "
      "run artifacts to out_dir. Returns the summary as JSON text.");
  m.def(
      "check_scenario_json",
      [](const std::string& scenario_json, int threads) {
        const ReproductionScenario scenario =
            scenario_from_json(parse_json(scenario_json, "scenario"));
        py::gil_scoped_release release;
        const CheckReport report = check_scenario(scenario, threads, false);
        return check_report_to_json(report).dump(2);
      },
      py::arg("scenario_json"), py::arg("threads") = 1,
      "Runs a reproduction scenario and returns the graded report as JSON text.");
  m.def(
      "render_report",
      [](const std::vector<std::string>& run_dirs, const std::string& format) {
        std::vector<std::filesystem::path> paths(run_dirs.begin(), run_dirs.end());
        return render_report(paths, format);
      },
      py::arg("run_dirs"), py::arg("format") = "md",
      "Side-by-side rendering of previously written run directories.");
}
