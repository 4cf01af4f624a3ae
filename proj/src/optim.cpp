#include "stabilitylab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stabilitylab/linalg.hpp"

namespace stabilitylab {

std::string to_string(OptMode m) {
    return m == OptMode::Sgd ? "sgd" : "gd";
}

OptMode opt_mode_from_string(const std::string& s) {
    if (s == "sgd") return OptMode::Sgd;
    if (s == "gd") return OptMode::Gd;
    throw std::invalid_argument("unknown optimizer mode: " + s);
}

std::string to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Converged: return "converged";
        case RunStatus::MaxIters: return "max_iters";
        case RunStatus::Diverged: return "diverged";
    }
    return "max_iters";
}

RunStatus run_status_from_string(const std::string& s) {
    if (s == "converged") return RunStatus::Converged;
    if (s == "max_iters") return RunStatus::MaxIters;
    if (s == "diverged") return RunStatus::Diverged;
    throw std::invalid_argument("unknown run status: " + s);
}

bool clip_gradient(std::span<double> g, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("clip_gradient: delta must be positive");
    double norm = norm2(g);
    if (norm <= delta || norm == 0.0) return false;
    double scale = delta / norm;
    for (auto& v : g) v *= scale;
    return true;
}

namespace {

template <class Params>
double risk_impl(const Params& p, const Dataset& ds) {
    double s = 0.0;
    for (int i = 0; i < ds.n; ++i) {
        double e = forward(p, ds.row(i)) - ds.y[i];
        s += e * e;
    }
    return s / (2.0 * ds.n);
}

} // namespace

double empirical_risk(const ReluNetParams& p, const Dataset& ds) { return risk_impl(p, ds); }
double empirical_risk(const DiagNetParams& p, const Dataset& ds) { return risk_impl(p, ds); }
double test_risk(const ReluNetParams& p, const Dataset& test_set) { return risk_impl(p, test_set); }
double test_risk(const DiagNetParams& p, const Dataset& test_set) { return risk_impl(p, test_set); }

ParamsBlob to_blob(const ReluNetParams& p) {
    return ParamsBlob{"relu", p.width, p.input_dim, 2, flatten(p)};
}

ParamsBlob to_blob(const DiagNetParams& p) {
    return ParamsBlob{"diag", 0, p.input_dim(), p.depth, flatten(p)};
}

ReluNetParams relu_from_blob(const ParamsBlob& blob) {
    if (blob.family != "relu") throw std::invalid_argument("relu_from_blob: wrong family");
    const int m = blob.width, d = blob.input_dim;
    if (blob.flat.size() != static_cast<std::size_t>(m) * (d + 1))
        throw std::invalid_argument("relu_from_blob: bad flat length");
    ReluNetParams p;
    p.width = m;
    p.input_dim = d;
    p.a.assign(blob.flat.begin(), blob.flat.begin() + m);
    p.w.assign(blob.flat.begin() + m, blob.flat.end());
    return p;
}

DiagNetParams diag_from_blob(const ParamsBlob& blob) {
    if (blob.family != "diag") throw std::invalid_argument("diag_from_blob: wrong family");
    const int d = blob.input_dim;
    if (blob.flat.size() != 2 * static_cast<std::size_t>(d))
        throw std::invalid_argument("diag_from_blob: bad flat length");
    DiagNetParams p;
    p.depth = blob.depth;
    p.a.assign(blob.flat.begin(), blob.flat.begin() + d);
    p.b.assign(blob.flat.begin() + d, blob.flat.end());
    return p;
}

namespace {

constexpr double kDivergenceLoss = 1e12;

template <class Params>
SharpnessReport snapshot(const Params& p, const Dataset& ds, long iteration, bool with_eigs) {
    return sharpness_report(p, ds, iteration, with_eigs);
}

template <class Params>
RunRecord train_impl(Params params, const Dataset& ds, const OptConfig& config, RngStream& stream) {
    if (!(config.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
    if (!(config.loss_tol > 0.0)) throw std::invalid_argument("train: loss_tol must be positive");
    const int n = ds.n;
    const std::size_t pc = params.param_count();
    const double eta = config.learning_rate;
    const bool clip = config.clip_threshold > 0.0;
    const bool sgd = config.mode == OptMode::Sgd;

    long loss_period = config.loss_record_period;
    if (loss_period <= 0) {
        if (config.metric_period > 0) loss_period = config.metric_period;
        else loss_period = sgd ? std::max(1L, config.max_iters / 512) : 1;
    }

    RunRecord rec;
    rec.config = config;

    std::vector<double> step(pc);
    std::vector<double> gi(sgd ? 0 : pc);
    // Trailing window of per-step sample losses (SGD convergence detector).
    std::vector<double> window(sgd ? n : 0, 0.0);
    double window_sum = 0.0;
    long window_count = 0;
    long confirm_cooldown = 0;  // steps until the window may trigger again

    // Mean gradient and loss at the current parameters, one pass.
    auto full_gradient = [&](std::vector<double>& g) {
        std::fill(g.begin(), g.end(), 0.0);
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            double e = forward(params, ds.row(i)) - ds.y[i];
            s += e * e;
            grad_into(params, ds.row(i), gi);
            for (std::size_t k = 0; k < pc; ++k) g[k] += e * gi[k];
        }
        for (auto& v : g) v /= n;
        return s / (2.0 * n);
    };

    rec.loss_curve.push_back({0, empirical_risk(params, ds)});

    long t = 0;
    bool finished = false;
    while (t < config.max_iters && !finished) {
        bool fired = false;
        if (sgd) {
            const auto i = static_cast<int>(stream.next_index(static_cast<std::uint64_t>(n)));
            double e = forward(params, ds.row(i)) - ds.y[i];
            if (!std::isfinite(e) || std::abs(e) > 1e100) {
                rec.status = RunStatus::Diverged;
                break;
            }
            grad_into(params, ds.row(i), step);
            for (auto& v : step) v *= e;
            if (clip) fired = clip_gradient(step, config.clip_threshold);
            axpy_params(params, -eta, step);

            double observed = 0.5 * e * e;
            long slot = t % n;
            if (window_count >= n) window_sum -= window[slot];
            window[slot] = observed;
            window_sum += observed;
            ++window_count;
            rec.clip_fired.push_back(fired ? 1 : 0);
            ++t;

            const bool record_loss = (t % loss_period == 0);
            const bool record_metric = config.metric_period > 0 && (t % config.metric_period == 0);
            if (confirm_cooldown > 0) --confirm_cooldown;
            const bool window_hit =
                window_count >= n && confirm_cooldown == 0 && window_sum / n <= config.loss_tol;
            if (record_loss || record_metric || window_hit) {
                double loss = empirical_risk(params, ds);
                if (record_loss || record_metric) rec.loss_curve.push_back({t, loss});
                if (!std::isfinite(loss) || loss > kDivergenceLoss) {
                    rec.status = RunStatus::Diverged;
                    break;
                }
                if (record_metric && t < config.max_iters)
                    rec.snapshots.push_back(snapshot(params, ds, t, false));
                if (window_hit) {
                    if (loss <= config.loss_tol) {
                        rec.status = RunStatus::Converged;
                        finished = true;
                    } else {
                        confirm_cooldown = n;  // window was optimistic; recheck after an epoch
                    }
                }
            }
        } else {
            double loss = full_gradient(step);
            const bool record_loss = (t % loss_period == 0);
            if (record_loss && t > 0) rec.loss_curve.push_back({t, loss});
            if (config.metric_period > 0 && t > 0 && t % config.metric_period == 0)
                rec.snapshots.push_back(snapshot(params, ds, t, false));
            if (!std::isfinite(loss) || loss > kDivergenceLoss) {
                rec.status = RunStatus::Diverged;
                break;
            }
            if (loss <= config.loss_tol) {
                rec.status = RunStatus::Converged;
                finished = true;
                break;
            }
            if (clip) fired = clip_gradient(step, config.clip_threshold);
            axpy_params(params, -eta, step);
            rec.clip_fired.push_back(fired ? 1 : 0);
            ++t;
        }
    }

    rec.iterations = t;
    rec.final_loss = empirical_risk(params, ds);
    if (!std::isfinite(rec.final_loss) || rec.final_loss > kDivergenceLoss)
        rec.status = RunStatus::Diverged;
    else if (rec.status == RunStatus::MaxIters && rec.final_loss <= config.loss_tol)
        rec.status = RunStatus::Converged;
    rec.converged = rec.status == RunStatus::Converged && rec.final_loss <= config.loss_tol;
    if (rec.loss_curve.empty() || rec.loss_curve.back().iteration != t)
        rec.loss_curve.push_back({t, rec.final_loss});
    if (rec.status != RunStatus::Diverged)
        rec.snapshots.push_back(snapshot(params, ds, t, config.final_eigenvalues));
    rec.final_params = to_blob(params);
    return rec;
}

} // namespace

RunRecord train(ReluNetParams params, const Dataset& ds, const OptConfig& config, RngStream& stream) {
    return train_impl(std::move(params), ds, config, stream);
}

RunRecord train(DiagNetParams params, const Dataset& ds, const OptConfig& config, RngStream& stream) {
    return train_impl(std::move(params), ds, config, stream);
}

ReluNetParams init_relu(int m, int d, RngStream& stream) {
    if (m < 1 || d < 1) throw std::invalid_argument("init_relu: m, d must be positive");
    ReluNetParams p;
    p.width = m;
    p.input_dim = d;
    p.a = stream.gaussian(static_cast<std::size_t>(m));
    p.w = stream.gaussian(static_cast<std::size_t>(m) * d);
    const double w_std = std::pow(static_cast<double>(d), -0.25);  // variance 1/sqrt(d)
    for (auto& v : p.w) v *= w_std;
    return p;
}

DiagNetParams init_diag(int d, double var_a, double var_b, RngStream& stream, int depth) {
    if (d < 1) throw std::invalid_argument("init_diag: d must be positive");
    if (!(var_a > 0.0) || !(var_b > 0.0))
        throw std::invalid_argument("init_diag: variances must be positive");
    if (depth < 2) throw std::invalid_argument("init_diag: depth must be >= 2");
    DiagNetParams p;
    p.depth = depth;
    p.a = stream.gaussian(static_cast<std::size_t>(d));
    p.b = stream.gaussian(static_cast<std::size_t>(d));
    const double sa = std::sqrt(var_a), sb = std::sqrt(var_b);
    for (auto& v : p.a) v *= sa;
    for (auto& v : p.b) v *= sb;
    return p;
}

} // namespace stabilitylab
