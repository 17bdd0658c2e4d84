#pragma once

#include <string>

#include <json.hpp>

#include "tmle/csv.hpp"
#include "tmle/estimators.hpp"
#include "tmle/nuisance.hpp"
#include "tmle/simulation.hpp"

namespace tmle {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const EstimateResult& result);
nlohmann::json to_json(const sim::ExperimentReport& report);
nlohmann::json to_json(const sim::TruthValue& truth);
nlohmann::json to_json(const LearnerSpec& learner);

// Learner from JSON ({"kind": "glm_main_terms" | "glm_with_basis" | "knn", ...})
// or from the compact flag form: "glm[:logit|:identity]",
// "basis:DEGREE[:ORDER[:LINK]]", "knn:K".
LearnerSpec learner_from_json(const nlohmann::json& j);
LearnerSpec parse_learner(const std::string& text);

sim::DgpConfig dgp_from_json(const nlohmann::json& j);
nlohmann::json to_json(const sim::DgpConfig& dgp);

// Experiment settings: a DgpConfig document, optionally wrapped as
// {"dgp": {...}, "experiment": {...}}. Missing experiment fields keep their defaults.
sim::ExperimentConfig experiment_from_json(const nlohmann::json& j);

// Per-replicate estimates as a flat table.
std::string replicates_csv(const sim::ExperimentReport& report);

nlohmann::json read_json_file(const std::string& path);

}  // namespace tmle
