#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "raid/cli.hpp"
#include "raid/detector.hpp"
#include "raid/evaluation.hpp"
#include "raid/gaussian.hpp"
#include "raid/moments.hpp"
#include "raid/normal.hpp"
#include "raid/stream_io.hpp"

namespace py = pybind11;
using namespace raid;

namespace {

GaussianParams gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, double regularization) {
    return GaussianParams{mean, cov, regularization};
}

py::dict record_dict(const DetectionRecord& r) {
    return py::module_::import("json").attr("loads")(record_to_json(r).dump());
}

py::dict report_dict(const MetricsReport& r) {
    return py::module_::import("json").attr("loads")(report_to_json(r).dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bindings of the RAID streaming anomaly detector";

    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<SnapshotError>(m, "SnapshotError", PyExc_ValueError);

    py::class_<UnivariateMoments>(m, "UnivariateMoments")
        .def(py::init<>())
        .def(py::init<double, double, double>(), py::arg("count"), py::arg("mean"), py::arg("comoment"))
        .def("update", &UnivariateMoments::update)
        .def("weighted_update", &UnivariateMoments::weighted_update, py::arg("x"), py::arg("w"))
        .def("revert", &UnivariateMoments::revert)
        .def("variance", &UnivariateMoments::variance)
        .def_property_readonly("count", &UnivariateMoments::count)
        .def_property_readonly("mean", &UnivariateMoments::mean)
        .def_property_readonly("comoment", &UnivariateMoments::comoment);

    py::class_<MultivariateMoments>(m, "MultivariateMoments")
        .def(py::init<std::size_t>(), py::arg("dim"))
        .def("update", &MultivariateMoments::update)
        .def("revert", &MultivariateMoments::revert)
        .def("covariance", &MultivariateMoments::covariance)
        .def_property_readonly("count", &MultivariateMoments::count)
        .def_property_readonly("dim", &MultivariateMoments::dim)
        .def_property_readonly("mean", &MultivariateMoments::mean)
        .def_property_readonly("comoment", &MultivariateMoments::comoment);

    m.def("normal_cdf", &normal_cdf);
    m.def("uni_cdf", &uni_cdf, py::arg("x"), py::arg("mean") = 0.0, py::arg("var") = 1.0);
    m.def("uni_ppf", &uni_ppf, py::arg("q"), py::arg("mean") = 0.0, py::arg("var") = 1.0);
    m.def("brent_root", &brent_root, py::arg("f"), py::arg("lo"), py::arg("hi"), py::arg("tol") = 1e-12);

    m.def(
        "pdf",
        [](const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, double regularization) {
            return pdf(x, gaussian(mean, cov, regularization));
        },
        py::arg("x"), py::arg("mean"), py::arg("cov"), py::arg("regularization") = 0.0);

    py::class_<CdfEstimate>(m, "CdfEstimate")
        .def_readonly("log_prob", &CdfEstimate::log_prob)
        .def_readonly("abs_error", &CdfEstimate::abs_error)
        .def_readonly("points_used", &CdfEstimate::points_used)
        .def("__repr__", [](const CdfEstimate& e) {
            return "CdfEstimate(log_prob=" + std::to_string(e.log_prob) + ", abs_error=" + std::to_string(e.abs_error) +
                   ", points_used=" + std::to_string(e.points_used) + ")";
        });

    m.def(
        "mvn_log_cdf",
        [](const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t max_points,
           double target_error, std::uint64_t seed) {
            QmcOptions o;
            o.max_points = max_points;
            o.target_error = target_error;
            o.seed = seed;
            return mvn_log_cdf(x, gaussian(mean, cov, 0.0), o);
        },
        py::arg("x"), py::arg("mean"), py::arg("cov"), py::arg("max_points") = 16384, py::arg("target_error") = 1e-6,
        py::arg("seed") = 0);

    py::class_<DetectorConfig>(m, "DetectorConfig")
        .def(py::init([](double expiration_period, double threshold, std::optional<double> adaptation_period,
                         std::optional<double> grace_period, double q, std::uint64_t seed, bool two_sided_score) {
                 DetectorConfig c;
                 c.expiration_period = expiration_period;
                 c.threshold = threshold;
                 c.adaptation_period = adaptation_period;
                 c.grace_period = grace_period;
                 c.q = q;
                 c.qmc.seed = seed;
                 c.two_sided_score = two_sided_score;
                 c.validate();
                 return c;
             }),
             py::arg("expiration_period"), py::arg("threshold") = -25.0, py::arg("adaptation_period") = py::none(),
             py::arg("grace_period") = py::none(), py::arg("q") = 0.9973, py::arg("seed") = 0,
             py::arg("two_sided_score") = false)
        .def_readonly("expiration_period", &DetectorConfig::expiration_period)
        .def_readonly("threshold", &DetectorConfig::threshold)
        .def_readonly("q", &DetectorConfig::q)
        .def_readonly("two_sided_score", &DetectorConfig::two_sided_score)
        .def_property_readonly("adaptation_period", &DetectorConfig::adaptation)
        .def_property_readonly("grace_period", &DetectorConfig::grace);

    py::class_<DetectionRecord>(m, "DetectionRecord")
        .def_readonly("timestamp", &DetectionRecord::timestamp)
        .def_readonly("score", &DetectionRecord::score)
        .def_readonly("y_g", &DetectionRecord::y_g)
        .def_readonly("y_s", &DetectionRecord::y_s)
        .def_readonly("y_t", &DetectionRecord::y_t)
        .def_readonly("y_c", &DetectionRecord::y_c)
        .def_readonly("x_l", &DetectionRecord::x_l)
        .def_readonly("x_u", &DetectionRecord::x_u)
        .def_readonly("in_grace", &DetectionRecord::in_grace)
        .def_readonly("n", &DetectionRecord::n)
        .def("to_dict", &record_dict)
        .def(py::self == py::self);

    py::class_<Detector>(m, "Detector")
        .def(py::init([](const DetectorConfig& config, double timestamp, const Eigen::VectorXd& values) {
                 return Detector(config, Observation{timestamp, values});
             }),
             py::arg("config"), py::arg("timestamp"), py::arg("values"))
        .def(
            "step",
            [](Detector& d, double timestamp, const Eigen::VectorXd& values) {
                return d.step(Observation{timestamp, values});
            },
            py::arg("timestamp"), py::arg("values"))
        .def_property_readonly("initial_record", [](const Detector& d) { return *d.initial_record(); })
        .def("limits", &Detector::limits)
        .def("score", &Detector::score)
        .def_property_readonly("mean", [](const Detector& d) { return d.params().mean; })
        .def_property_readonly("cov", [](const Detector& d) { return d.params().cov; })
        .def_property_readonly("population", &Detector::population)
        .def_property_readonly("dim", &Detector::dim)
        .def("snapshot", [](const Detector& d) { return snapshot_save(d).dump(); })
        .def_static("from_snapshot",
                    [](const std::string& text) { return snapshot_load(nlohmann::json::parse(text)); });

    m.def(
        "synth_scenario",
        [](const std::string& kind, std::uint64_t seed, std::size_t dim, std::size_t samples) {
            SynthParams p;
            p.dim = dim;
            p.samples = samples;
            const LabeledStream s = synth_scenario(parse_scenario_kind(kind), p, seed);
            Eigen::VectorXd ts(static_cast<Eigen::Index>(samples));
            Eigen::MatrixXd values(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(dim));
            std::vector<int> labels(s.labels.begin(), s.labels.end());
            for (std::size_t i = 0; i < samples; ++i) {
                ts[static_cast<Eigen::Index>(i)] = s.observations[i].timestamp;
                values.row(static_cast<Eigen::Index>(i)) = s.observations[i].values.transpose();
            }
            return py::make_tuple(ts, values, labels);
        },
        py::arg("kind"), py::arg("seed"), py::arg("dim") = 2, py::arg("samples") = 5000,
        "Returns (timestamps, values[n, k], labels).");

    m.def(
        "score_run",
        [](const DetectorConfig& config, const Eigen::VectorXd& timestamps, const Eigen::MatrixXd& values,
           const std::vector<int>& labels) {
            LabeledStream s;
            for (Eigen::Index i = 0; i < timestamps.size(); ++i) {
                s.observations.push_back({timestamps[i], values.row(i).transpose()});
            }
            s.labels.assign(labels.begin(), labels.end());
            py::gil_scoped_release release;
            const MetricsReport r = score_run(config, s);
            py::gil_scoped_acquire acquire;
            return report_dict(r);
        },
        py::arg("config"), py::arg("timestamps"), py::arg("values"), py::arg("labels"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args, const std::string& input) {
            std::istringstream in(input);
            std::ostringstream out;
            std::ostringstream err;
            const int code = cli::run_cli(args, in, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), py::arg("stdin") = std::string(), "Returns (exit_code, stdout, stderr).");
}
