#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stabilitylab/data.hpp"
#include "stabilitylab/experiments.hpp"
#include "stabilitylab/fisher.hpp"
#include "stabilitylab/linalg.hpp"
#include "stabilitylab/models.hpp"
#include "stabilitylab/optim.hpp"
#include "stabilitylab/rng.hpp"
#include "stabilitylab/stability.hpp"

namespace py = pybind11;
using namespace stabilitylab;

namespace {

std::vector<double> to_vec(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    auto buf = arr.request();
    const double* data = static_cast<const double*>(buf.ptr);
    return std::vector<double>(data, data + buf.size);
}

py::array_t<double> to_array(const std::vector<double>& v) {
    return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::array_t<double> to_matrix(const std::vector<double>& v, int rows, int cols) {
    return py::array_t<double>({static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols)},
                               v.data());
}

SymMatrix sym_from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    auto buf = arr.request();
    if (buf.ndim != 2 || buf.shape[0] != buf.shape[1])
        throw std::invalid_argument("expected a square 2-d array");
    const int n = static_cast<int>(buf.shape[0]);
    const double* data = static_cast<const double*>(buf.ptr);
    return SymMatrix::from_dense(n, std::span<const double>(data, static_cast<std::size_t>(n) * n));
}

Dataset dataset_from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> x,
                           py::array_t<double, py::array::c_style | py::array::forcecast> y) {
    auto bx = x.request();
    auto by = y.request();
    if (bx.ndim != 2) throw std::invalid_argument("x must be 2-d");
    if (by.ndim != 1 || by.shape[0] != bx.shape[0])
        throw std::invalid_argument("y must be 1-d with len(x) entries");
    Dataset ds;
    ds.n = static_cast<int>(bx.shape[0]);
    ds.d = static_cast<int>(bx.shape[1]);
    const double* xd = static_cast<const double*>(bx.ptr);
    const double* yd = static_cast<const double*>(by.ptr);
    ds.x.assign(xd, xd + static_cast<std::size_t>(ds.n) * ds.d);
    ds.y.assign(yd, yd + ds.n);
    ds.meta = {"custom", "custom", 0};
    return ds;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "stability-lab core: SGD stability, Fisher sharpness, norm equivalences";

    py::class_<RngStream>(m, "RngStream")
        .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream_id") = 0)
        .def("gaussian", [](RngStream& s, std::size_t n) { return to_array(s.gaussian(n)); })
        .def("uniform",
             [](RngStream& s, std::size_t n, double lo, double hi) {
                 return to_array(s.uniform(n, lo, hi));
             },
             py::arg("n"), py::arg("lo") = 0.0, py::arg("hi") = 1.0)
        .def("unit_sphere", [](RngStream& s, std::size_t d) { return to_array(s.unit_sphere(d)); })
        .def("next_index", &RngStream::next_index)
        .def("derive", &RngStream::derive);

    py::class_<ReluNetParams>(m, "ReluNetParams")
        .def(py::init([](py::array_t<double> a, py::array_t<double> w) {
                 auto av = to_vec(a);
                 auto buf = w.request();
                 if (buf.ndim != 2) throw std::invalid_argument("w must be 2-d (m x d)");
                 ReluNetParams p;
                 p.width = static_cast<int>(buf.shape[0]);
                 p.input_dim = static_cast<int>(buf.shape[1]);
                 if (av.size() != static_cast<std::size_t>(p.width))
                     throw std::invalid_argument("len(a) must equal w.shape[0]");
                 p.a = std::move(av);
                 p.w = to_vec(w);
                 return p;
             }),
             py::arg("a"), py::arg("w"))
        .def_property_readonly("a", [](const ReluNetParams& p) { return to_array(p.a); })
        .def_property_readonly("w",
                               [](const ReluNetParams& p) {
                                   return to_matrix(p.w, p.width, p.input_dim);
                               })
        .def_property_readonly("width", [](const ReluNetParams& p) { return p.width; })
        .def_property_readonly("input_dim", [](const ReluNetParams& p) { return p.input_dim; })
        .def("param_count", &ReluNetParams::param_count);

    py::class_<DiagNetParams>(m, "DiagNetParams")
        .def(py::init([](py::array_t<double> a, py::array_t<double> b, int depth) {
                 DiagNetParams p;
                 p.a = to_vec(a);
                 p.b = to_vec(b);
                 p.depth = depth;
                 if (p.a.size() != p.b.size())
                     throw std::invalid_argument("a and b must have equal length");
                 return p;
             }),
             py::arg("a"), py::arg("b"), py::arg("depth") = 2)
        .def_property_readonly("a", [](const DiagNetParams& p) { return to_array(p.a); })
        .def_property_readonly("b", [](const DiagNetParams& p) { return to_array(p.b); })
        .def_property_readonly("depth", [](const DiagNetParams& p) { return p.depth; })
        .def("param_count", &DiagNetParams::param_count);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&dataset_from_numpy), py::arg("x"), py::arg("y"))
        .def_property_readonly("x", [](const Dataset& ds) { return to_matrix(ds.x, ds.n, ds.d); })
        .def_property_readonly("y", [](const Dataset& ds) { return to_array(ds.y); })
        .def_property_readonly("n", [](const Dataset& ds) { return ds.n; })
        .def_property_readonly("d", [](const Dataset& ds) { return ds.d; });

    py::class_<GramMatrix>(m, "GramMatrix")
        .def_property_readonly("k",
                               [](const GramMatrix& gm) {
                                   const int n = gm.k.dim();
                                   return to_matrix(
                                       std::vector<double>(gm.k.data().begin(), gm.k.data().end()),
                                       n, n);
                               })
        .def_property_readonly("residuals",
                               [](const GramMatrix& gm) { return to_array(gm.residuals); })
        .def_property_readonly("n", [](const GramMatrix& gm) { return gm.sample_count(); });

    py::class_<SharpnessReport>(m, "SharpnessReport")
        .def_readonly("iteration", &SharpnessReport::iteration)
        .def_readonly("trace", &SharpnessReport::trace)
        .def_readonly("frobenius", &SharpnessReport::frobenius)
        .def_readonly("spectral", &SharpnessReport::spectral)
        .def_readonly("risk", &SharpnessReport::risk)
        .def_property_readonly("eigenvalues",
                               [](const SharpnessReport& r) { return to_array(r.eigenvalues); })
        .def_readonly("norms", &SharpnessReport::norms);

    py::class_<CheckResult>(m, "CheckResult")
        .def_readonly("ok", &CheckResult::ok)
        .def_readonly("margin", &CheckResult::margin)
        .def_readonly("high_loss_warning", &CheckResult::high_loss_warning)
        .def("__bool__", [](const CheckResult& c) { return c.ok; });

    py::class_<StabilityVerdict>(m, "StabilityVerdict")
        .def_readonly("eta", &StabilityVerdict::eta)
        .def_readonly("trace_check", &StabilityVerdict::trace_check)
        .def_readonly("spectral_check", &StabilityVerdict::spectral_check)
        .def_readonly("loss_check", &StabilityVerdict::loss_check)
        .def_readonly("mu0_used", &StabilityVerdict::mu0_used)
        .def_readonly("negative_gaps", &StabilityVerdict::negative_gaps)
        .def_readonly("probes", &StabilityVerdict::probes)
        .def_readonly("simulated", &StabilityVerdict::simulated)
        .def_property_readonly("sim_verdict",
                               [](const StabilityVerdict& v) { return to_string(v.sim_verdict); })
        .def_readonly("report", &StabilityVerdict::report);

    py::class_<OptConfig>(m, "OptConfig")
        .def(py::init([](double lr, const std::string& mode, double clip, long max_iters,
                         double loss_tol, long metric_period, std::uint64_t seed) {
                 OptConfig c;
                 c.learning_rate = lr;
                 c.mode = opt_mode_from_string(mode);
                 c.clip_threshold = clip;
                 c.max_iters = max_iters;
                 c.loss_tol = loss_tol;
                 c.metric_period = metric_period;
                 c.seed = seed;
                 return c;
             }),
             py::arg("learning_rate"), py::arg("mode") = "sgd", py::arg("clip_threshold") = 0.0,
             py::arg("max_iters") = 100000, py::arg("loss_tol") = 1e-8,
             py::arg("metric_period") = 0, py::arg("seed") = 0)
        .def_readwrite("learning_rate", &OptConfig::learning_rate)
        .def_readwrite("clip_threshold", &OptConfig::clip_threshold)
        .def_readwrite("max_iters", &OptConfig::max_iters)
        .def_readwrite("loss_tol", &OptConfig::loss_tol)
        .def_readwrite("metric_period", &OptConfig::metric_period);

    py::class_<RunRecord>(m, "RunRecord")
        .def_readonly("converged", &RunRecord::converged)
        .def_readonly("iterations", &RunRecord::iterations)
        .def_readonly("final_loss", &RunRecord::final_loss)
        .def_readonly("test_risk", &RunRecord::test_risk)
        .def_property_readonly("status", [](const RunRecord& r) { return to_string(r.status); })
        .def_property_readonly("loss_curve",
                               [](const RunRecord& r) {
                                   py::list out;
                                   for (const auto& p : r.loss_curve)
                                       out.append(py::make_tuple(p.iteration, p.loss));
                                   return out;
                               })
        .def_property_readonly("clip_fired",
                               [](const RunRecord& r) {
                                   py::list out;
                                   for (auto v : r.clip_fired) out.append(static_cast<bool>(v));
                                   return out;
                               })
        .def_readonly("snapshots", &RunRecord::snapshots)
        .def_property_readonly("final_relu",
                               [](const RunRecord& r) { return relu_from_blob(r.final_params); })
        .def_property_readonly("final_diag",
                               [](const RunRecord& r) { return diag_from_blob(r.final_params); });

    // core numerics
    m.def("sym_eigenvalues",
          [](py::array_t<double> mat) { return to_array(sym_eigenvalues(sym_from_numpy(mat))); });
    m.def("power_iteration_top",
          [](py::array_t<double> mat, double tol, long max_iter) {
              return power_iteration_top(sym_from_numpy(mat), tol, max_iter);
          },
          py::arg("m"), py::arg("tol") = 1e-10, py::arg("max_iter") = 50000);

    // models
    m.def("forward",
          [](const ReluNetParams& p, py::array_t<double> x) { return forward(p, to_vec(x)); });
    m.def("forward",
          [](const DiagNetParams& p, py::array_t<double> x) { return forward(p, to_vec(x)); });
    m.def("per_example_gradient", [](const ReluNetParams& p, py::array_t<double> x) {
        return to_array(per_example_gradient(p, to_vec(x)));
    });
    m.def("per_example_gradient", [](const DiagNetParams& p, py::array_t<double> x) {
        return to_array(per_example_gradient(p, to_vec(x)));
    });
    m.def("path_norm", &path_norm);
    m.def("weighted_l2_norm", &weighted_l2_norm, py::arg("params"), py::arg("q"));
    m.def("alpha_vector", [](const DiagNetParams& p) { return to_array(alpha_vector(p)); });
    m.def("effective_coefficients",
          [](const DiagNetParams& p) { return to_array(effective_coefficients(p)); });
    m.def("balancedness", &balancedness);

    // data
    m.def("sample_sphere_inputs", [](int n, int d, std::uint64_t seed, std::uint64_t stream) {
        RngStream s(seed, stream);
        return to_matrix(sample_sphere_inputs(n, d, s), n, d);
    }, py::arg("n"), py::arg("d"), py::arg("seed"), py::arg("stream") = 0);
    m.def("sample_cube_inputs", [](int n, int d, std::uint64_t seed, std::uint64_t stream) {
        RngStream s(seed, stream);
        return to_matrix(sample_cube_inputs(n, d, s), n, d);
    }, py::arg("n"), py::arg("d"), py::arg("seed"), py::arg("stream") = 0);
    m.def("make_relu_dataset",
          [](int n, int d, int k, std::uint64_t seed) {
              RngStream teacher_stream(seed, 0x7EAC);
              auto teacher = make_teacher_relu(k, d, teacher_stream);
              RngStream data_stream(seed, 0xDA7A);
              auto inputs = sample_sphere_inputs(n, d, data_stream);
              return build_dataset(n, d, std::move(inputs), teacher, {"sphere", "relu-sum", seed});
          },
          py::arg("n"), py::arg("d"), py::arg("k"), py::arg("seed"));
    m.def("make_linear_dataset",
          [](int n, py::array_t<double> beta, std::uint64_t seed, const std::string& distribution) {
              auto teacher = make_teacher_linear(to_vec(beta));
              const int d = teacher.d;
              RngStream data_stream(seed, 0xDA7A);
              auto inputs =
                  sample_inputs(input_distribution_from_string(distribution), n, d, data_stream);
              return build_dataset(n, d, std::move(inputs), teacher, {distribution, "linear", seed});
          },
          py::arg("n"), py::arg("beta"), py::arg("seed"), py::arg("distribution") = "cube");

    // fisher metrics
    m.def("gram_matrix",
          [](const ReluNetParams& p, const Dataset& ds) { return gram_matrix(p, ds); });
    m.def("gram_matrix",
          [](const DiagNetParams& p, const Dataset& ds) { return gram_matrix(p, ds); });
    m.def("fisher_trace", &fisher_trace);
    m.def("fisher_frobenius", &fisher_frobenius);
    m.def("fisher_spectral", &fisher_spectral);
    m.def("fisher_eigenvalues",
          [](const GramMatrix& gm) { return to_array(fisher_eigenvalues(gm)); });
    m.def("noise_covariance_products", [](const GramMatrix& gm) {
        auto np = noise_covariance_products(gm);
        return py::make_tuple(np.tr_g_sigma, np.risk);
    });
    m.def("alignment_factor", &alignment_factor, py::arg("gm"),
          py::arg("risk_floor") = kDefaultRiskFloor);
    m.def("rank_one_stability_gap", [](const GramMatrix& gm, double eta, py::array_t<double> v) {
        return rank_one_stability_gap(gm, eta, to_vec(v));
    });
    m.def("sharpness_report",
          [](const ReluNetParams& p, const Dataset& ds, long iteration, bool with_eigenvalues) {
              return sharpness_report(p, ds, iteration, with_eigenvalues);
          },
          py::arg("params"), py::arg("dataset"), py::arg("iteration") = 0,
          py::arg("with_eigenvalues") = false);
    m.def("sharpness_report",
          [](const DiagNetParams& p, const Dataset& ds, long iteration, bool with_eigenvalues) {
              return sharpness_report(p, ds, iteration, with_eigenvalues);
          },
          py::arg("params"), py::arg("dataset"), py::arg("iteration") = 0,
          py::arg("with_eigenvalues") = false);

    // stability
    m.def("check_linear_stability_trace", &check_linear_stability_trace, py::arg("report"),
          py::arg("eta"), py::arg("loss_tol") = kDefaultLossTol);
    m.def("check_gd_stability", &check_gd_stability, py::arg("report"), py::arg("eta"),
          py::arg("loss_tol") = kDefaultLossTol);
    m.def("check_loss_stability", &check_loss_stability, py::arg("report"), py::arg("eta"),
          py::arg("mu0"), py::arg("loss_tol") = kDefaultLossTol);
    auto simulate = [](const auto& p, const Dataset& ds, double eta, long steps, int trajectories,
                       double init_scale, std::uint64_t seed) {
        RngStream stream(seed, 0x51e1);
        auto sim = simulate_linearized_sgd(p, ds, eta, steps, trajectories, init_scale, stream);
        py::dict out;
        out["checkpoints"] = sim.checkpoints;
        out["mean_sq_deviation"] = sim.mean_sq_deviation;
        out["second_moment_fro"] = sim.second_moment_fro;
        out["verdict"] = to_string(sim.verdict);
        out["growth_rate"] = sim.growth_rate;
        out["overflow_step"] = sim.overflow_step;
        return out;
    };
    m.def("simulate_linearized_sgd",
          [simulate](const ReluNetParams& p, const Dataset& ds, double eta, long steps,
                     int trajectories, double init_scale, std::uint64_t seed) {
              return simulate(p, ds, eta, steps, trajectories, init_scale, seed);
          },
          py::arg("params"), py::arg("dataset"), py::arg("eta"),
          py::arg("steps") = kDefaultSimSteps, py::arg("trajectories") = kDefaultSimTrajectories,
          py::arg("init_scale") = kDefaultSimInitScale, py::arg("seed") = 0);
    m.def("simulate_linearized_sgd",
          [simulate](const DiagNetParams& p, const Dataset& ds, double eta, long steps,
                     int trajectories, double init_scale, std::uint64_t seed) {
              return simulate(p, ds, eta, steps, trajectories, init_scale, seed);
          },
          py::arg("params"), py::arg("dataset"), py::arg("eta"),
          py::arg("steps") = kDefaultSimSteps, py::arg("trajectories") = kDefaultSimTrajectories,
          py::arg("init_scale") = kDefaultSimInitScale, py::arg("seed") = 0);
    auto classify_opts = [](double loss_tol, bool force, double mu0, int n_probes, bool simulate_f,
                            std::uint64_t seed) {
        ClassifyOptions o;
        o.loss_tol = loss_tol;
        o.force = force;
        o.mu0 = mu0;
        o.n_probes = n_probes;
        o.simulate = simulate_f;
        o.seed = seed;
        return o;
    };
    m.def("classify_minimum",
          [classify_opts](const ReluNetParams& p, const Dataset& ds, double eta, double loss_tol,
                          bool force, double mu0, int n_probes, bool simulate_f,
                          std::uint64_t seed) {
              return classify_minimum(p, ds, eta,
                                      classify_opts(loss_tol, force, mu0, n_probes, simulate_f, seed));
          },
          py::arg("params"), py::arg("dataset"), py::arg("eta"),
          py::arg("loss_tol") = kDefaultLossTol, py::arg("force") = false, py::arg("mu0") = 0.0,
          py::arg("n_probes") = 200, py::arg("simulate") = false, py::arg("seed") = 0x51ab);
    m.def("classify_minimum",
          [classify_opts](const DiagNetParams& p, const Dataset& ds, double eta, double loss_tol,
                          bool force, double mu0, int n_probes, bool simulate_f,
                          std::uint64_t seed) {
              return classify_minimum(p, ds, eta,
                                      classify_opts(loss_tol, force, mu0, n_probes, simulate_f, seed));
          },
          py::arg("params"), py::arg("dataset"), py::arg("eta"),
          py::arg("loss_tol") = kDefaultLossTol, py::arg("force") = false, py::arg("mu0") = 0.0,
          py::arg("n_probes") = 200, py::arg("simulate") = false, py::arg("seed") = 0x51ab);

    // optim
    m.def("clipped_gradient", [](py::array_t<double> g, double delta) {
        auto v = to_vec(g);
        bool fired = clip_gradient(v, delta);
        return py::make_tuple(to_array(v), fired);
    });
    m.def("empirical_risk",
          [](const ReluNetParams& p, const Dataset& ds) { return empirical_risk(p, ds); });
    m.def("empirical_risk",
          [](const DiagNetParams& p, const Dataset& ds) { return empirical_risk(p, ds); });
    m.def("train",
          [](const ReluNetParams& p, const Dataset& ds, const OptConfig& cfg, std::uint64_t seed) {
              RngStream stream(seed, 0x7121);
              return train(p, ds, cfg, stream);
          },
          py::arg("params"), py::arg("dataset"), py::arg("config"), py::arg("seed") = 0);
    m.def("train",
          [](const DiagNetParams& p, const Dataset& ds, const OptConfig& cfg, std::uint64_t seed) {
              RngStream stream(seed, 0x7121);
              return train(p, ds, cfg, stream);
          },
          py::arg("params"), py::arg("dataset"), py::arg("config"), py::arg("seed") = 0);
    m.def("init_relu", [](int m_, int d, std::uint64_t seed) {
        RngStream stream(seed, 0x1217);
        return init_relu(m_, d, stream);
    }, py::arg("m"), py::arg("d"), py::arg("seed"));
    m.def("init_diag",
          [](int d, double var_a, double var_b, std::uint64_t seed, int depth) {
              RngStream stream(seed, 0x1217);
              return init_diag(d, var_a, var_b, stream, depth);
          },
          py::arg("d"), py::arg("var_a"), py::arg("var_b"), py::arg("seed"), py::arg("depth") = 2);
}
