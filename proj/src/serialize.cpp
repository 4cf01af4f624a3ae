#include "stabilitylab/serialize.hpp"

#include <fstream>

namespace stabilitylab {

using nlohmann::json;

void to_json(json& j, const SharpnessReport& r) {
    j = json{{"iteration", r.iteration}, {"trace", r.trace},   {"frobenius", r.frobenius},
             {"spectral", r.spectral},   {"risk", r.risk},     {"eigenvalues", r.eigenvalues},
             {"norms", r.norms}};
}

void from_json(const json& j, SharpnessReport& r) {
    j.at("iteration").get_to(r.iteration);
    j.at("trace").get_to(r.trace);
    j.at("frobenius").get_to(r.frobenius);
    j.at("spectral").get_to(r.spectral);
    j.at("risk").get_to(r.risk);
    j.at("eigenvalues").get_to(r.eigenvalues);
    j.at("norms").get_to(r.norms);
}

void to_json(json& j, const OptConfig& c) {
    j = json{{"learning_rate", c.learning_rate},
             {"mode", to_string(c.mode)},
             {"clip_threshold", c.clip_threshold},
             {"max_iters", c.max_iters},
             {"loss_tol", c.loss_tol},
             {"metric_period", c.metric_period},
             {"loss_record_period", c.loss_record_period},
             {"final_eigenvalues", c.final_eigenvalues},
             {"seed", c.seed}};
}

void from_json(const json& j, OptConfig& c) {
    j.at("learning_rate").get_to(c.learning_rate);
    c.mode = opt_mode_from_string(j.at("mode").get<std::string>());
    j.at("clip_threshold").get_to(c.clip_threshold);
    j.at("max_iters").get_to(c.max_iters);
    j.at("loss_tol").get_to(c.loss_tol);
    j.at("metric_period").get_to(c.metric_period);
    if (j.contains("loss_record_period")) j.at("loss_record_period").get_to(c.loss_record_period);
    if (j.contains("final_eigenvalues")) j.at("final_eigenvalues").get_to(c.final_eigenvalues);
    j.at("seed").get_to(c.seed);
}

void to_json(json& j, const ParamsBlob& b) {
    j = json{{"family", b.family}, {"width", b.width},  {"input_dim", b.input_dim},
             {"depth", b.depth},   {"flat", b.flat}};
}

void from_json(const json& j, ParamsBlob& b) {
    j.at("family").get_to(b.family);
    j.at("width").get_to(b.width);
    j.at("input_dim").get_to(b.input_dim);
    j.at("depth").get_to(b.depth);
    j.at("flat").get_to(b.flat);
}

void to_json(json& j, const RunRecord& r) {
    json curve = json::array();
    for (const auto& p : r.loss_curve) curve.push_back(json{{"iteration", p.iteration}, {"loss", p.loss}});
    j = json{{"config", r.config},
             {"loss_curve", curve},
             {"clip_fired", r.clip_fired},
             {"snapshots", r.snapshots},
             {"final_params", r.final_params},
             {"status", to_string(r.status)},
             {"converged", r.converged},
             {"iterations", r.iterations},
             {"final_loss", r.final_loss}};
    if (std::isfinite(r.test_risk)) j["test_risk"] = r.test_risk;
}

void from_json(const json& j, RunRecord& r) {
    j.at("config").get_to(r.config);
    r.loss_curve.clear();
    for (const auto& p : j.at("loss_curve"))
        r.loss_curve.push_back({p.at("iteration").get<long>(), p.at("loss").get<double>()});
    j.at("clip_fired").get_to(r.clip_fired);
    j.at("snapshots").get_to(r.snapshots);
    j.at("final_params").get_to(r.final_params);
    r.status = run_status_from_string(j.at("status").get<std::string>());
    j.at("converged").get_to(r.converged);
    j.at("iterations").get_to(r.iterations);
    j.at("final_loss").get_to(r.final_loss);
    r.test_risk = j.contains("test_risk") ? j.at("test_risk").get<double>()
                                          : std::numeric_limits<double>::quiet_NaN();
}

void to_json(json& j, const CheckResult& c) {
    j = json{{"ok", c.ok}, {"margin", c.margin}, {"high_loss_warning", c.high_loss_warning}};
}

void from_json(const json& j, CheckResult& c) {
    j.at("ok").get_to(c.ok);
    j.at("margin").get_to(c.margin);
    j.at("high_loss_warning").get_to(c.high_loss_warning);
}

void to_json(json& j, const StabilityVerdict& v) {
    j = json{{"eta", v.eta},
             {"trace_check", v.trace_check},
             {"spectral_check", v.spectral_check},
             {"loss_check", v.loss_check},
             {"mu0_used", v.mu0_used},
             {"mu0_measured", v.mu0_measured},
             {"rank_one", json{{"negative", v.negative_gaps}, {"probes", v.probes}}},
             {"report", v.report}};
    if (v.simulated) {
        j["simulation"] = json{{"verdict", to_string(v.sim_verdict)},
                               {"growth_rate", v.sim_growth_rate}};
    }
}

void from_json(const json& j, StabilityVerdict& v) {
    j.at("eta").get_to(v.eta);
    j.at("trace_check").get_to(v.trace_check);
    j.at("spectral_check").get_to(v.spectral_check);
    j.at("loss_check").get_to(v.loss_check);
    j.at("mu0_used").get_to(v.mu0_used);
    j.at("mu0_measured").get_to(v.mu0_measured);
    v.negative_gaps = j.at("rank_one").at("negative").get<int>();
    v.probes = j.at("rank_one").at("probes").get<int>();
    j.at("report").get_to(v.report);
    v.simulated = j.contains("simulation");
    if (v.simulated) {
        const auto& s = j.at("simulation");
        const auto verdict = s.at("verdict").get<std::string>();
        v.sim_verdict = verdict == "stable" ? SimVerdict::Stable
                        : verdict == "unstable" ? SimVerdict::Unstable
                                                : SimVerdict::Inconclusive;
        s.at("growth_rate").get_to(v.sim_growth_rate);
    }
}

void save_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_json: cannot open " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("save_json: write failed for " + path.string());
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_json: cannot open " + path.string());
    json j;
    in >> j;
    return j;
}

void save_run_json(const RunRecord& record, const std::filesystem::path& path) {
    save_json(json(record), path);
}

RunRecord load_run_json(const std::filesystem::path& path) {
    return load_json(path).get<RunRecord>();
}

} // namespace stabilitylab
