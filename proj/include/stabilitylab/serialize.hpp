#pragma once

#include <filesystem>

#include <json.hpp>

#include "stabilitylab/optim.hpp"
#include "stabilitylab/stability.hpp"

namespace stabilitylab {

// JSON mappings. Doubles survive a save/load cycle bit-exactly (the
// writer emits shortest round-trip representations).

void to_json(nlohmann::json& j, const SharpnessReport& r);
void from_json(const nlohmann::json& j, SharpnessReport& r);

void to_json(nlohmann::json& j, const OptConfig& c);
void from_json(const nlohmann::json& j, OptConfig& c);

void to_json(nlohmann::json& j, const ParamsBlob& b);
void from_json(const nlohmann::json& j, ParamsBlob& b);

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

void to_json(nlohmann::json& j, const CheckResult& c);
void from_json(const nlohmann::json& j, CheckResult& c);

void to_json(nlohmann::json& j, const StabilityVerdict& v);
void from_json(const nlohmann::json& j, StabilityVerdict& v);

void save_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json load_json(const std::filesystem::path& path);

void save_run_json(const RunRecord& record, const std::filesystem::path& path);
RunRecord load_run_json(const std::filesystem::path& path);

} // namespace stabilitylab
