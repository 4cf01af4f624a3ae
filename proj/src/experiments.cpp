#include "stabilitylab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <stdexcept>
#include <thread>
#include <type_traits>

#include <json.hpp>

#include "stabilitylab/serialize.hpp"
#include "stabilitylab/svg.hpp"

namespace stabilitylab {

using nlohmann::json;

namespace {

// Stream roles, fixed so every artifact is replayable from (config, seed).
constexpr std::uint64_t kTeacherStream = 0x7EAC;
constexpr std::uint64_t kTrainDataStream = 0xDA7A;
constexpr std::uint64_t kTestDataStream = 0x7E57;
constexpr std::uint64_t kInitStream = 0x1217;
constexpr std::uint64_t kTrainStream = 0x7121;
constexpr std::uint64_t kVerifyStream = 0xEFED;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
    std::vector<double> grid(count);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < count; ++i)
        grid[i] = std::exp(llo + (lhi - llo) * (count == 1 ? 0.0 : static_cast<double>(i) / (count - 1)));
    return grid;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Runs fn(job) for job in [0, jobs) on a small pool; results must be
// written into per-job slots so the output is scheduling-independent.
void parallel_for(int jobs, int workers, const std::function<void(int)>& fn) {
    if (workers <= 0) {
        unsigned hc = std::thread::hardware_concurrency();
        workers = hc ? static_cast<int>(hc) : 1;
    }
    workers = std::max(1, std::min(workers, jobs));
    if (workers == 1) {
        for (int j = 0; j < jobs; ++j) fn(j);
        return;
    }
    std::atomic<int> next{0};
    auto drain = [&]() {
        while (true) {
            int j = next.fetch_add(1);
            if (j >= jobs) break;
            fn(j);
        }
    };
    std::vector<std::future<void>> pool;
    for (int w = 0; w < workers; ++w) pool.push_back(std::async(std::launch::async, drain));
    for (auto& f : pool) f.get();
}

std::vector<double> default_beta_star(int d) {
    std::vector<double> beta(d, 0.0);
    for (int j = 0; j < std::min(3, d); ++j) beta[j] = 1.0;
    return beta;
}

} // namespace

// --- config ---------------------------------------------------------------

void to_json(json& j, const ModelConfig& c) {
    j = json{{"family", c.family}, {"width", c.width}, {"depth", c.depth}};
}
void from_json(const json& j, ModelConfig& c) {
    j.at("family").get_to(c.family);
    if (j.contains("width")) j.at("width").get_to(c.width);
    if (j.contains("depth")) j.at("depth").get_to(c.depth);
}

void to_json(json& j, const TeacherConfig& c) {
    j = json{{"variant", c.variant}, {"k", c.k}, {"beta_star", c.beta_star}};
}
void from_json(const json& j, TeacherConfig& c) {
    j.at("variant").get_to(c.variant);
    if (j.contains("k")) j.at("k").get_to(c.k);
    if (j.contains("beta_star")) j.at("beta_star").get_to(c.beta_star);
}

void to_json(json& j, const DataConfig& c) {
    j = json{{"distribution", c.distribution},
             {"n", c.n},
             {"d", c.d},
             {"n_test", c.n_test},
             {"teacher", c.teacher}};
}
void from_json(const json& j, DataConfig& c) {
    j.at("distribution").get_to(c.distribution);
    j.at("n").get_to(c.n);
    j.at("d").get_to(c.d);
    if (j.contains("n_test")) j.at("n_test").get_to(c.n_test);
    j.at("teacher").get_to(c.teacher);
}

void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"experiment", c.experiment},
             {"seeds", c.seeds},
             {"out_dir", c.out_dir},
             {"model", c.model},
             {"data", c.data},
             {"opt", c.opt},
             {"lr_grid", c.lr_grid},
             {"sgd_lr_grid", c.sgd_lr_grid},
             {"gd_lr_grid", c.gd_lr_grid},
             {"fair_comparison", c.fair_comparison},
             {"balance_r0_grid", c.balance_r0_grid},
             {"balance_sgd_lr", c.balance_sgd_lr},
             {"balance_gd_lr", c.balance_gd_lr},
             {"init_var_a", c.init_var_a},
             {"init_var_b", c.init_var_b},
             {"verify_draws", c.verify_draws},
             {"verify_family", c.verify_family},
             {"workers", c.workers}};
}
void from_json(const json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    j.at("experiment").get_to(c.experiment);
    if (j.contains("seeds")) j.at("seeds").get_to(c.seeds);
    if (j.contains("out_dir")) j.at("out_dir").get_to(c.out_dir);
    if (j.contains("model")) j.at("model").get_to(c.model);
    if (j.contains("data")) j.at("data").get_to(c.data);
    if (j.contains("opt")) j.at("opt").get_to(c.opt);
    if (j.contains("lr_grid")) j.at("lr_grid").get_to(c.lr_grid);
    if (j.contains("sgd_lr_grid")) j.at("sgd_lr_grid").get_to(c.sgd_lr_grid);
    if (j.contains("gd_lr_grid")) j.at("gd_lr_grid").get_to(c.gd_lr_grid);
    if (j.contains("fair_comparison")) j.at("fair_comparison").get_to(c.fair_comparison);
    if (j.contains("balance_r0_grid")) j.at("balance_r0_grid").get_to(c.balance_r0_grid);
    if (j.contains("balance_sgd_lr")) j.at("balance_sgd_lr").get_to(c.balance_sgd_lr);
    if (j.contains("balance_gd_lr")) j.at("balance_gd_lr").get_to(c.balance_gd_lr);
    if (j.contains("init_var_a")) j.at("init_var_a").get_to(c.init_var_a);
    if (j.contains("init_var_b")) j.at("init_var_b").get_to(c.init_var_b);
    if (j.contains("verify_draws")) j.at("verify_draws").get_to(c.verify_draws);
    if (j.contains("verify_family")) j.at("verify_family").get_to(c.verify_family);
    if (j.contains("workers")) j.at("workers").get_to(c.workers);
}

ExperimentConfig default_config(const std::string& experiment) {
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    if (experiment == "relu-process") {
        cfg.seeds = {1};
        cfg.model = {"relu", 100, 2};
        cfg.data = {"sphere", 300, 100, kDefaultTestSetSize, {"relu-sum", 10, {}}};
        cfg.opt.mode = OptMode::Sgd;
        cfg.opt.learning_rate = 1.0 / std::sqrt(100.0);
        cfg.opt.clip_threshold = 1.0;
        cfg.opt.max_iters = 200000;
        cfg.opt.metric_period = 2000;
        cfg.opt.final_eigenvalues = true;
    } else if (experiment == "relu-sweep") {
        cfg.seeds = {1, 2, 3};
        cfg.model = {"relu", 100, 2};
        cfg.data = {"sphere", 300, 100, kDefaultTestSetSize, {"relu-sum", 10, {}}};
        cfg.opt.clip_threshold = 1.0;
        cfg.opt.max_iters = 200000;
        cfg.opt.loss_record_period = 2000;
        cfg.lr_grid = log_spaced(0.05, 2.0, 8);
    } else if (experiment == "diag-sweep") {
        cfg.seeds = {1, 2, 3};
        cfg.model = {"diag", 0, 2};
        cfg.data = {"cube", 300, 1000, kDefaultTestSetSize, {"linear", 0, {}}};
        cfg.opt.clip_threshold = 1.0;
        cfg.opt.max_iters = 100000;
        cfg.opt.loss_record_period = 2000;
    } else if (experiment == "diag-balance") {
        cfg.seeds = {1, 2, 3};
        cfg.model = {"diag", 0, 2};
        cfg.data = {"cube", 300, 1000, kDefaultTestSetSize, {"linear", 0, {}}};
        cfg.opt.clip_threshold = 1.0;
        cfg.opt.max_iters = 100000;
        cfg.opt.loss_record_period = 5000;
        cfg.init_var_a = 0.1;
        cfg.init_var_b = 0.1;  // scaled by r0 per grid point
        cfg.balance_sgd_lr = 0.05;
        cfg.balance_gd_lr = 0.02;
    } else if (experiment == "verify-equivalence") {
        cfg.seeds = {1};
        cfg.verify_family = "both";
        cfg.verify_draws = 50;
    } else {
        throw std::invalid_argument("unknown experiment: " + experiment);
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return load_json(path).get<ExperimentConfig>();
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    save_json(json(cfg), path);
}

// --- data and init assembly -------------------------------------------------

ExperimentData make_experiment_data(const DataConfig& cfg, std::uint64_t seed) {
    ExperimentData out;
    RngStream teacher_stream(seed, kTeacherStream);
    if (cfg.teacher.variant == "relu-sum") {
        out.teacher = make_teacher_relu(cfg.teacher.k, cfg.d, teacher_stream);
    } else if (cfg.teacher.variant == "linear") {
        auto beta = cfg.teacher.beta_star.empty() ? default_beta_star(cfg.d) : cfg.teacher.beta_star;
        if (beta.size() != static_cast<std::size_t>(cfg.d))
            throw std::invalid_argument("beta_star length must equal d");
        out.teacher = make_teacher_linear(std::move(beta));
    } else {
        throw std::invalid_argument("unknown teacher variant: " + cfg.teacher.variant);
    }

    const auto dist = input_distribution_from_string(cfg.distribution);
    RngStream data_stream(seed, kTrainDataStream);
    auto inputs = sample_inputs(dist, cfg.n, cfg.d, data_stream);
    out.train = build_dataset(cfg.n, cfg.d, std::move(inputs), out.teacher,
                              {cfg.distribution, cfg.teacher.variant, seed});
    RngStream test_stream(seed, kTestDataStream);
    out.test = build_test_set(out.teacher, dist, cfg.n_test, test_stream);
    return out;
}

ReluNetParams make_relu_init(const ExperimentConfig& cfg, std::uint64_t seed) {
    RngStream init_stream(seed, kInitStream);
    return init_relu(cfg.model.width, cfg.data.d, init_stream);
}

DiagNetParams make_diag_init(const ExperimentConfig& cfg, std::uint64_t seed, double var_a,
                             double var_b) {
    RngStream init_stream(seed, kInitStream);
    return init_diag(cfg.data.d, var_a, var_b, init_stream, cfg.model.depth);
}

// --- sweeps -----------------------------------------------------------------

namespace {

struct JobSpec {
    OptMode mode;
    double lr;
    int lr_index;
    std::uint64_t seed;
};

template <class Params>
SweepRow run_sweep_point(const ExperimentConfig& cfg, const JobSpec& job, const Params& init,
                         const ExperimentData& data) {
    OptConfig opt = cfg.opt;
    opt.mode = job.mode;
    opt.learning_rate = job.lr;
    opt.seed = job.seed;
    opt.metric_period = 0;  // final snapshot only

    RngStream train_stream =
        RngStream(job.seed, kTrainStream).derive(2 * static_cast<std::uint64_t>(job.lr_index) +
                                                 (job.mode == OptMode::Gd ? 1 : 0));
    RunRecord rec = train(init, data.train, opt, train_stream);

    SweepRow row;
    row.method = to_string(job.mode);
    row.lr = job.lr;
    row.seed = job.seed;
    row.status = rec.status;
    row.converged = rec.converged;
    row.iterations = rec.iterations;
    row.final_loss = rec.final_loss;
    row.test_risk = std::numeric_limits<double>::quiet_NaN();
    if (rec.status != RunStatus::Diverged) {
        Params final_params = [&] {
            if constexpr (std::is_same_v<Params, ReluNetParams>)
                return relu_from_blob(rec.final_params);
            else
                return diag_from_blob(rec.final_params);
        }();
        rec.test_risk = test_risk(final_params, data.test);
        row.test_risk = rec.test_risk;
        row.report = rec.snapshots.back();
        if (rec.converged) {
            GramMatrix gm = gram_matrix(final_params, data.train);
            ClassifyOptions copts;
            copts.loss_tol = opt.loss_tol;
            copts.force = true;  // report computed above; predicates need no gate here
            copts.seed = job.seed;
            row.verdict = classify_from_gram(gm, collect_norms(final_params), job.lr, copts);
        }
    }
    return row;
}

template <class MakeInit>
SweepResult run_sweep(const ExperimentConfig& cfg, const std::vector<JobSpec>& jobs,
                      const std::string& family, MakeInit make_init) {
    SweepResult result;
    result.family = family;
    result.rows.resize(jobs.size());

    // Shared per-seed data and init, built once.
    std::vector<std::uint64_t> seeds = cfg.seeds;
    std::vector<ExperimentData> data(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) data[s] = make_experiment_data(cfg.data, seeds[s]);

    parallel_for(static_cast<int>(jobs.size()), cfg.workers, [&](int j) {
        const auto& job = jobs[j];
        std::size_t s = 0;
        while (seeds[s] != job.seed) ++s;
        auto init = make_init(job.seed);
        result.rows[j] = run_sweep_point(cfg, job, init, data[s]);
    });
    return result;
}

std::vector<JobSpec> grid_jobs(const std::vector<double>& sgd_grid,
                               const std::vector<double>& gd_grid,
                               const std::vector<std::uint64_t>& seeds) {
    std::vector<JobSpec> jobs;
    for (std::size_t i = 0; i < sgd_grid.size(); ++i)
        for (auto seed : seeds) jobs.push_back({OptMode::Sgd, sgd_grid[i], static_cast<int>(i), seed});
    for (std::size_t i = 0; i < gd_grid.size(); ++i)
        for (auto seed : seeds) jobs.push_back({OptMode::Gd, gd_grid[i], static_cast<int>(i), seed});
    return jobs;
}

} // namespace

std::vector<MedianRow> sweep_medians(const SweepResult& result) {
    // Preserve first-appearance order of (method, lr).
    std::vector<MedianRow> medians;
    for (const auto& row : result.rows) {
        auto it = std::find_if(medians.begin(), medians.end(), [&](const MedianRow& m) {
            return m.method == row.method && m.lr == row.lr;
        });
        if (it == medians.end()) {
            medians.push_back({row.method, row.lr, 0, 0, 0, 0, 0});
            it = medians.end() - 1;
        }
    }
    for (auto& m : medians) {
        std::vector<double> risk, tr, fro, spec;
        for (const auto& row : result.rows) {
            if (row.method != m.method || row.lr != m.lr || !row.converged) continue;
            risk.push_back(row.test_risk);
            tr.push_back(row.report.trace);
            fro.push_back(row.report.frobenius);
            spec.push_back(row.report.spectral);
        }
        m.converged_seeds = static_cast<int>(risk.size());
        m.test_risk = median_of(risk);
        m.trace = median_of(tr);
        m.frobenius = median_of(fro);
        m.spectral = median_of(spec);
    }
    return medians;
}

RunRecord run_relu_process(const ExperimentConfig& cfg) {
    const auto seed = cfg.seeds.at(0);
    auto data = make_experiment_data(cfg.data, seed);
    auto init = make_relu_init(cfg, seed);
    OptConfig opt = cfg.opt;
    opt.seed = seed;
    RngStream train_stream = RngStream(seed, kTrainStream).derive(0);
    RunRecord rec = train(std::move(init), data.train, opt, train_stream);
    if (rec.status != RunStatus::Diverged)
        rec.test_risk = test_risk(relu_from_blob(rec.final_params), data.test);
    if (!cfg.out_dir.empty()) write_process_outputs(rec, cfg);
    return rec;
}

SweepResult run_relu_sweep(const ExperimentConfig& cfg) {
    std::vector<double> gd_grid = cfg.lr_grid.empty() ? log_spaced(0.05, 2.0, 8) : cfg.lr_grid;
    std::vector<double> sgd_grid(gd_grid.size());
    const double scale = cfg.fair_comparison ? 1.0 / std::sqrt(static_cast<double>(cfg.data.d)) : 1.0;
    for (std::size_t i = 0; i < gd_grid.size(); ++i) sgd_grid[i] = gd_grid[i] * scale;

    auto jobs = grid_jobs(sgd_grid, gd_grid, cfg.seeds);
    auto result = run_sweep(cfg, jobs, "relu",
                            [&](std::uint64_t seed) { return make_relu_init(cfg, seed); });
    if (!cfg.out_dir.empty()) write_sweep_outputs(result, cfg);
    return result;
}

double find_divergence_lr(const ExperimentConfig& cfg, OptMode mode, std::uint64_t seed) {
    auto data = make_experiment_data(cfg.data, seed);
    auto trial = [&](double lr) {
        OptConfig opt = cfg.opt;
        opt.mode = mode;
        opt.learning_rate = lr;
        opt.metric_period = 0;
        opt.loss_record_period = opt.max_iters;  // curve not needed
        opt.seed = seed;
        auto init = make_diag_init(cfg, seed, cfg.init_var_a, cfg.init_var_b);
        RngStream stream = RngStream(seed, kTrainStream).derive(mode == OptMode::Gd ? 0xBADD : 0xBADC);
        return train(std::move(init), data.train, opt, stream).converged;
    };

    double lr = 1e-3;
    while (!trial(lr)) {
        lr *= 0.5;
        if (lr < 1e-8) throw std::runtime_error("find_divergence_lr: no converging rate found");
    }
    double good = lr;
    double bad = 0.0;
    while (bad == 0.0) {
        double next = good * 2.0;
        if (next > 1e3) { bad = next; break; }
        if (trial(next)) good = next;
        else bad = next;
    }
    for (int it = 0; it < 6; ++it) {
        double mid = std::sqrt(good * bad);
        if (trial(mid)) good = mid;
        else bad = mid;
    }
    return good;
}

SweepResult run_diag_sweep(const ExperimentConfig& cfg) {
    std::vector<double> sgd_grid = cfg.sgd_lr_grid;
    std::vector<double> gd_grid = cfg.gd_lr_grid;
    if (!cfg.lr_grid.empty()) {
        if (sgd_grid.empty()) sgd_grid = cfg.lr_grid;
        if (gd_grid.empty()) gd_grid = cfg.lr_grid;
    }
    if (sgd_grid.empty()) {
        double edge = 0.8 * find_divergence_lr(cfg, OptMode::Sgd, cfg.seeds.at(0));
        sgd_grid = log_spaced(edge / 100.0, edge, 8);
    }
    if (gd_grid.empty()) {
        double edge = 0.8 * find_divergence_lr(cfg, OptMode::Gd, cfg.seeds.at(0));
        gd_grid = log_spaced(edge / 100.0, edge, 8);
    }

    auto jobs = grid_jobs(sgd_grid, gd_grid, cfg.seeds);
    auto result = run_sweep(cfg, jobs, "diag", [&](std::uint64_t seed) {
        return make_diag_init(cfg, seed, cfg.init_var_a, cfg.init_var_b);
    });
    if (!cfg.out_dir.empty()) write_sweep_outputs(result, cfg);
    return result;
}

std::vector<BalanceRow> run_diag_balance(const ExperimentConfig& cfg) {
    const double sgd_lr = cfg.balance_sgd_lr > 0 ? cfg.balance_sgd_lr : 0.05;
    const double gd_lr = cfg.balance_gd_lr > 0 ? cfg.balance_gd_lr : 0.02;

    struct BalanceJob {
        OptMode mode;
        double r0;
        int index;
        std::uint64_t seed;
    };
    std::vector<BalanceJob> jobs;
    for (std::size_t i = 0; i < cfg.balance_r0_grid.size(); ++i)
        for (auto seed : cfg.seeds) {
            jobs.push_back({OptMode::Sgd, cfg.balance_r0_grid[i], static_cast<int>(i), seed});
            jobs.push_back({OptMode::Gd, cfg.balance_r0_grid[i], static_cast<int>(i), seed});
        }

    std::vector<BalanceRow> rows(jobs.size());
    std::vector<ExperimentData> data(cfg.seeds.size());
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
        data[s] = make_experiment_data(cfg.data, cfg.seeds[s]);

    parallel_for(static_cast<int>(jobs.size()), cfg.workers, [&](int j) {
        const auto& job = jobs[j];
        std::size_t s = 0;
        while (cfg.seeds[s] != job.seed) ++s;

        auto init = make_diag_init(cfg, job.seed, cfg.init_var_a, cfg.init_var_b * job.r0);
        BalanceRow row;
        row.method = to_string(job.mode);
        row.r0 = job.r0;
        row.seed = job.seed;
        row.r_init = balancedness(init);
        row.r_l2_init = balancedness_l2_variant(init);

        OptConfig opt = cfg.opt;
        opt.mode = job.mode;
        opt.learning_rate = job.mode == OptMode::Sgd ? sgd_lr : gd_lr;
        opt.metric_period = 0;
        opt.seed = job.seed;
        RngStream stream = RngStream(job.seed, kTrainStream)
                               .derive(0xBA1A + 2 * static_cast<std::uint64_t>(job.index) +
                                       (job.mode == OptMode::Gd ? 1 : 0));
        RunRecord rec = train(std::move(init), data[s].train, opt, stream);
        row.converged = rec.converged;
        if (rec.status != RunStatus::Diverged) {
            auto final_params = diag_from_blob(rec.final_params);
            row.r_final = balancedness(final_params);
            row.r_l2_final = balancedness_l2_variant(final_params);
            row.test_risk = test_risk(final_params, data[s].test);
        } else {
            row.r_final = std::numeric_limits<double>::quiet_NaN();
            row.r_l2_final = std::numeric_limits<double>::quiet_NaN();
            row.test_risk = std::numeric_limits<double>::quiet_NaN();
        }
        rows[j] = row;
    });

    if (!cfg.out_dir.empty()) write_balance_outputs(rows, cfg);
    return rows;
}

// --- norm-equivalence suites --------------------------------------------------

SharpnessReport diag_sharpness_identity_covariance(const DiagNetParams& p) {
    auto alpha = alpha_vector(p);
    SharpnessReport r;
    double l1 = 0.0, l2sq = 0.0, linf = 0.0;
    for (double a : alpha) {
        l1 += a;
        l2sq += a * a;
        linf = std::max(linf, a);
    }
    r.trace = l1;
    r.frobenius = std::sqrt(l2sq);
    r.spectral = linf;
    r.norms = collect_norms(p);
    return r;
}

namespace {

// Smallest n with d log(n/delta)/n <= 1 (theorem regime for the relu case).
long relu_regime_threshold(int d, double delta) {
    for (long n = 1; n < 100000000L; n = std::max(n + 1, n * 11 / 10)) {
        if (d * std::log(static_cast<double>(n) / delta) / static_cast<double>(n) <= 1.0) return n;
    }
    return 100000000L;
}

} // namespace

EquivalenceResult verify_norm_equivalence(const std::string& family, const ExperimentConfig& cfg) {
    EquivalenceResult result;
    result.family = family;
    const int draws = cfg.verify_draws;
    const std::uint64_t seed = cfg.seeds.at(0);
    result.draws.resize(draws);

    if (family == "relu") {
        const int d = 20, m = 30, n = 4000;
        const double delta = 0.01;
        result.regime_warning = n < d * relu_regime_threshold(d, delta);
        parallel_for(draws, cfg.workers, [&](int i) {
            RngStream stream = RngStream(seed, kVerifyStream).derive(static_cast<std::uint64_t>(i));
            RngStream data_stream = stream.derive(1);
            RngStream param_stream = stream.derive(2);
            auto inputs = sample_sphere_inputs(n, d, data_stream);
            Teacher dummy = make_teacher_linear(std::vector<double>(d, 0.0));
            Dataset ds = build_dataset(n, d, std::move(inputs), dummy, {"sphere", "zero", seed});
            auto params = init_relu(m, d, param_stream);
            auto rep = sharpness_report_via_fisher(params, ds);
            result.draws[i] = {rep.trace / rep.norms.at("w2q_d"),
                               rep.frobenius / rep.norms.at("w2q_sqrt_d"),
                               rep.spectral / rep.norms.at("w2q_1")};
        });
        result.stats = {{"trace/w2q_d", 0, 0, 0},
                        {"frobenius/w2q_sqrt_d", 0, 0, 0},
                        {"spectral/w2q_1", 0, 0, 0}};
    } else if (family == "diag") {
        const int d = 20, n = 20000;
        const double delta = 0.01;
        const double eps_n = std::sqrt(std::log(d / delta) / n);
        const double r_n = std::sqrt((d + std::log(1.0 / delta)) / n);
        result.regime_warning = eps_n > 0.1 || r_n > 0.2;
        parallel_for(draws, cfg.workers, [&](int i) {
            RngStream stream = RngStream(seed, kVerifyStream).derive(0x1000 + static_cast<std::uint64_t>(i));
            RngStream data_stream = stream.derive(1);
            RngStream param_stream = stream.derive(2);
            // Unit-covariance inputs: the theorem assumes E[x x^T] = I_d.
            auto inputs = sample_inputs(InputDistribution::CubeIsotropic, n, d, data_stream);
            Teacher dummy = make_teacher_linear(std::vector<double>(d, 0.0));
            Dataset ds = build_dataset(n, d, std::move(inputs), dummy, {"cube-isotropic", "zero", seed});
            auto params = init_diag(d, 1.0, 1.0, param_stream);
            auto rep = sharpness_report_via_fisher(params, ds);
            result.draws[i] = {rep.trace / rep.norms.at("alpha_l1"),
                               rep.frobenius / rep.norms.at("alpha_l2"),
                               rep.spectral / rep.norms.at("alpha_linf")};
        });
        result.stats = {{"trace/alpha_l1", 0, 0, 0},
                        {"frobenius/alpha_l2", 0, 0, 0},
                        {"spectral/alpha_linf", 0, 0, 0}};
    } else {
        throw std::invalid_argument("verify_norm_equivalence: family must be relu or diag");
    }

    for (int k = 0; k < 3; ++k) {
        std::vector<double> vals;
        vals.reserve(draws);
        for (const auto& d3 : result.draws) vals.push_back(d3[k]);
        auto [mn, mx] = std::minmax_element(vals.begin(), vals.end());
        result.stats[k].min = *mn;
        result.stats[k].max = *mx;
        result.stats[k].median = median_of(vals);
    }
    return result;
}

// --- output writers -----------------------------------------------------------

namespace {

void ensure_dirs(const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir / "runs");
    std::filesystem::create_directories(out_dir / "plots");
}

json provenance_json(const ExperimentConfig& cfg, std::uint64_t seed) {
    ExperimentConfig stripped = cfg;
    stripped.out_dir.clear();
    return json{{"experiment", cfg.experiment}, {"seed", seed}, {"config", stripped}};
}

void write_config_copy(const ExperimentConfig& cfg) {
    ExperimentConfig stripped = cfg;
    stripped.out_dir.clear();
    save_config(stripped, std::filesystem::path(cfg.out_dir) / "config.json");
}

std::string csv_cell(double v) {
    return std::isfinite(v) ? fmt17(v) : std::string{};
}

} // namespace

void export_sweep_csv(const SweepResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_sweep_csv: cannot open " + path.string());
    std::vector<std::string> norm_keys;
    if (result.family == "relu")
        norm_keys = {"path_norm", "w2q_1", "w2q_sqrt_d", "w2q_d"};
    else
        norm_keys = {"alpha_l1", "alpha_l2", "alpha_linf", "beta_l1", "balancedness", "balancedness_l2"};

    out << "method,lr,seed,status,converged,iterations,final_loss,test_risk,trace,frobenius,spectral";
    for (const auto& k : norm_keys) out << "," << k;
    out << ",trace_margin,spectral_margin\n";
    for (const auto& row : result.rows) {
        out << row.method << "," << fmt17(row.lr) << "," << row.seed << "," << to_string(row.status)
            << "," << (row.converged ? 1 : 0) << "," << row.iterations << ","
            << csv_cell(row.final_loss) << "," << csv_cell(row.test_risk);
        const bool has_report = row.status != RunStatus::Diverged;
        out << "," << (has_report ? csv_cell(row.report.trace) : "")
            << "," << (has_report ? csv_cell(row.report.frobenius) : "")
            << "," << (has_report ? csv_cell(row.report.spectral) : "");
        for (const auto& k : norm_keys) {
            auto it = row.report.norms.find(k);
            out << "," << (has_report && it != row.report.norms.end() ? csv_cell(it->second) : "");
        }
        const bool has_verdict = row.converged;
        out << "," << (has_verdict ? csv_cell(row.verdict.trace_check.margin) : "")
            << "," << (has_verdict ? csv_cell(row.verdict.spectral_check.margin) : "") << "\n";
    }
}

void export_run_csv(const RunRecord& record, const std::string& family,
                    const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_run_csv: cannot open " + path.string());
    const std::string norm_col = family == "relu" ? "path_norm" : "l1_beta";
    const std::string norm_key = family == "relu" ? "path_norm" : "beta_l1";
    out << "iteration,loss,clipped,trace,frobenius,spectral," << norm_col << ",test_risk\n";

    // One row per recorded iteration; sharpness columns filled at snapshots.
    std::vector<long> iters;
    for (const auto& p : record.loss_curve) iters.push_back(p.iteration);
    for (const auto& s : record.snapshots) iters.push_back(s.iteration);
    std::sort(iters.begin(), iters.end());
    iters.erase(std::unique(iters.begin(), iters.end()), iters.end());

    for (long it : iters) {
        out << it << ",";
        auto lp = std::find_if(record.loss_curve.begin(), record.loss_curve.end(),
                               [&](const LossPoint& p) { return p.iteration == it; });
        if (lp != record.loss_curve.end()) out << fmt17(lp->loss);
        out << ",";
        if (it > 0 && static_cast<std::size_t>(it) <= record.clip_fired.size())
            out << static_cast<int>(record.clip_fired[it - 1]);
        auto sp = std::find_if(record.snapshots.begin(), record.snapshots.end(),
                               [&](const SharpnessReport& s) { return s.iteration == it; });
        if (sp != record.snapshots.end()) {
            out << "," << fmt17(sp->trace) << "," << fmt17(sp->frobenius) << ","
                << fmt17(sp->spectral) << ",";
            auto nk = sp->norms.find(norm_key);
            out << (nk != sp->norms.end() ? fmt17(nk->second) : "");
        } else {
            out << ",,,,";
        }
        out << ",";
        if (sp != record.snapshots.end() && sp + 1 == record.snapshots.end() &&
            std::isfinite(record.test_risk))
            out << fmt17(record.test_risk);
        out << "\n";
    }
}

void write_process_outputs(const RunRecord& record, const ExperimentConfig& cfg) {
    const std::filesystem::path out_dir(cfg.out_dir);
    ensure_dirs(out_dir);
    write_config_copy(cfg);
    const auto seed = cfg.seeds.at(0);

    json j;
    j["record"] = record;
    j["provenance"] = provenance_json(cfg, seed);
    save_json(j, out_dir / "runs" / ("relu_process_seed" + std::to_string(seed) + ".json"));
    export_run_csv(record, cfg.model.family,
                   out_dir / ("relu_process_seed" + std::to_string(seed) + ".csv"));

    PlotSeries loss{"train loss", {}, {}, false};
    for (const auto& p : record.loss_curve) {
        loss.x.push_back(static_cast<double>(p.iteration));
        loss.y.push_back(p.loss);
    }
    emit_svg_plot({loss}, {"SGD training loss", "iteration", "empirical risk", false, true},
                  out_dir / "plots" / "loss.svg");

    PlotSeries trace{"tr(G)", {}, {}, false};
    PlotSeries bound{"2/lr", {}, {}, false};
    PlotSeries pnorm{"path norm", {}, {}, false};
    for (const auto& s : record.snapshots) {
        trace.x.push_back(static_cast<double>(s.iteration));
        trace.y.push_back(s.trace);
        bound.x.push_back(static_cast<double>(s.iteration));
        bound.y.push_back(2.0 / record.config.learning_rate);
        auto it = s.norms.find("path_norm");
        if (it != s.norms.end()) {
            pnorm.x.push_back(static_cast<double>(s.iteration));
            pnorm.y.push_back(it->second);
        }
    }
    emit_svg_plot({trace, bound}, {"Fisher trace along training", "iteration", "tr(G)", false, true},
                  out_dir / "plots" / "trace.svg");
    emit_svg_plot({pnorm}, {"Path norm along training", "iteration", "path norm", false, false},
                  out_dir / "plots" / "path_norm.svg");

    // Clip activity: fraction of clipped steps per window.
    PlotSeries clip{"clip fraction", {}, {}, false};
    const long window = std::max<long>(1, static_cast<long>(record.clip_fired.size()) / 100);
    for (std::size_t start = 0; start < record.clip_fired.size(); start += window) {
        std::size_t end = std::min(record.clip_fired.size(), start + window);
        double frac = 0.0;
        for (std::size_t i = start; i < end; ++i) frac += record.clip_fired[i];
        clip.x.push_back(static_cast<double>(end));
        clip.y.push_back(frac / static_cast<double>(end - start));
    }
    emit_svg_plot({clip}, {"Gradient clipping activity", "iteration", "clipped fraction", false, false},
                  out_dir / "plots" / "clip_activity.svg");
}

void write_sweep_outputs(const SweepResult& result, const ExperimentConfig& cfg) {
    const std::filesystem::path out_dir(cfg.out_dir);
    ensure_dirs(out_dir);
    write_config_copy(cfg);

    for (const auto& row : result.rows) {
        json j;
        j["row"] = json{{"method", row.method},
                        {"lr", row.lr},
                        {"seed", row.seed},
                        {"status", to_string(row.status)},
                        {"converged", row.converged},
                        {"iterations", row.iterations},
                        {"final_loss", row.final_loss}};
        if (std::isfinite(row.test_risk)) j["row"]["test_risk"] = row.test_risk;
        if (row.status != RunStatus::Diverged) j["report"] = row.report;
        if (row.converged) j["verdict"] = row.verdict;
        j["provenance"] = provenance_json(cfg, row.seed);
        save_json(j, out_dir / "runs" /
                         (row.method + "_lr" + fmt6(row.lr) + "_seed" + std::to_string(row.seed) +
                          ".json"));
    }
    export_sweep_csv(result, out_dir / "sweep.csv");

    auto medians = sweep_medians(result);
    for (const char* metric : {"trace", "frobenius", "spectral"}) {
        std::vector<PlotSeries> series;
        for (const char* method : {"sgd", "gd"}) {
            PlotSeries s{std::string(method) + " " + metric, {}, {}, false};
            for (const auto& m : medians) {
                if (m.method != method || m.converged_seeds == 0) continue;
                s.x.push_back(m.lr);
                s.y.push_back(metric == std::string("trace") ? m.trace
                              : metric == std::string("frobenius") ? m.frobenius
                                                                   : m.spectral);
            }
            series.push_back(std::move(s));
        }
        PlotSeries bound{"2/lr", {}, {}, false};
        for (const auto& m : medians) {
            if (m.method != "sgd" || m.converged_seeds == 0) continue;
            bound.x.push_back(m.lr);
            bound.y.push_back(2.0 / m.lr);
        }
        series.push_back(std::move(bound));
        emit_svg_plot(series,
                      {std::string("Final ") + metric + " vs learning rate", "learning rate", metric,
                       true, true},
                      out_dir / "plots" / (std::string("sharpness_") + metric + "_vs_lr.svg"));
    }
    std::vector<PlotSeries> risk_series;
    for (const char* method : {"sgd", "gd"}) {
        PlotSeries s{std::string(method) + " test risk", {}, {}, false};
        for (const auto& m : medians) {
            if (m.method != method || m.converged_seeds == 0) continue;
            s.x.push_back(m.lr);
            s.y.push_back(m.test_risk);
        }
        risk_series.push_back(std::move(s));
    }
    emit_svg_plot(risk_series, {"Test risk vs learning rate", "learning rate", "test risk", true, true},
                  out_dir / "plots" / "test_risk_vs_lr.svg");
}

void write_balance_outputs(const std::vector<BalanceRow>& rows, const ExperimentConfig& cfg) {
    const std::filesystem::path out_dir(cfg.out_dir);
    ensure_dirs(out_dir);
    write_config_copy(cfg);

    std::ofstream out(out_dir / "balance.csv");
    if (!out) throw std::runtime_error("write_balance_outputs: cannot open balance.csv");
    out << "method,r0,seed,converged,r_init,r_final,r_l2_init,r_l2_final,test_risk\n";
    for (const auto& r : rows) {
        out << r.method << "," << fmt17(r.r0) << "," << r.seed << "," << (r.converged ? 1 : 0) << ","
            << csv_cell(r.r_init) << "," << csv_cell(r.r_final) << "," << csv_cell(r.r_l2_init) << ","
            << csv_cell(r.r_l2_final) << "," << csv_cell(r.test_risk) << "\n";
    }
    out.close();

    std::vector<PlotSeries> series;
    for (const char* method : {"sgd", "gd"}) {
        PlotSeries s{std::string(method), {}, {}, true};
        for (const auto& r : rows) {
            if (r.method != method || !std::isfinite(r.r_final)) continue;
            s.x.push_back(r.r_init);
            s.y.push_back(r.r_final);
        }
        series.push_back(std::move(s));
    }
    PlotSeries ident{"identity", {}, {}, false};
    double max_r = 1.0;
    for (const auto& r : rows) max_r = std::max(max_r, r.r_init);
    ident.x = {1.0, max_r};
    ident.y = {1.0, max_r};
    series.push_back(std::move(ident));
    emit_svg_plot(series, {"Balancedness at convergence", "r(init)", "r(final)", false, false},
                  out_dir / "plots" / "balance.svg");
}

void write_equivalence_outputs(const std::vector<EquivalenceResult>& results,
                               const ExperimentConfig& cfg) {
    const std::filesystem::path out_dir(cfg.out_dir);
    ensure_dirs(out_dir);
    write_config_copy(cfg);

    std::ofstream out(out_dir / "equivalence.csv");
    if (!out) throw std::runtime_error("write_equivalence_outputs: cannot open equivalence.csv");
    out << "family,pair,draw,ratio\n";
    for (const auto& res : results)
        for (int k = 0; k < 3; ++k)
            for (std::size_t i = 0; i < res.draws.size(); ++i)
                out << res.family << "," << res.stats[k].pair << "," << i << ","
                    << fmt17(res.draws[i][k]) << "\n";
    out.close();

    json summary = json::array();
    for (const auto& res : results) {
        json stats = json::array();
        for (const auto& s : res.stats)
            stats.push_back(json{{"pair", s.pair}, {"min", s.min}, {"median", s.median}, {"max", s.max}});
        summary.push_back(json{{"family", res.family},
                               {"regime_warning", res.regime_warning},
                               {"stats", stats}});
    }
    save_json(summary, out_dir / "equivalence_summary.json");

    for (const auto& res : results) {
        std::vector<PlotSeries> series;
        for (int k = 0; k < 3; ++k) {
            PlotSeries s{res.stats[k].pair, {}, {}, true};
            for (std::size_t i = 0; i < res.draws.size(); ++i) {
                s.x.push_back(static_cast<double>(i));
                s.y.push_back(res.draws[i][k]);
            }
            series.push_back(std::move(s));
        }
        emit_svg_plot(series,
                      {"Sharpness/norm ratios (" + res.family + ")", "draw", "ratio", false, false},
                      out_dir / "plots" / ("equivalence_" + res.family + ".svg"));
    }
}

void run_experiment(const ExperimentConfig& cfg) {
    if (cfg.experiment == "relu-process") {
        run_relu_process(cfg);
    } else if (cfg.experiment == "relu-sweep") {
        run_relu_sweep(cfg);
    } else if (cfg.experiment == "diag-sweep") {
        run_diag_sweep(cfg);
    } else if (cfg.experiment == "diag-balance") {
        run_diag_balance(cfg);
    } else if (cfg.experiment == "verify-equivalence") {
        std::vector<EquivalenceResult> results;
        if (cfg.verify_family == "relu" || cfg.verify_family == "both")
            results.push_back(verify_norm_equivalence("relu", cfg));
        if (cfg.verify_family == "diag" || cfg.verify_family == "both")
            results.push_back(verify_norm_equivalence("diag", cfg));
        if (results.empty())
            throw std::invalid_argument("verify-equivalence: unknown family " + cfg.verify_family);
        if (!cfg.out_dir.empty()) write_equivalence_outputs(results, cfg);
    } else {
        throw std::invalid_argument("unknown experiment: " + cfg.experiment);
    }
}

} // namespace stabilitylab
