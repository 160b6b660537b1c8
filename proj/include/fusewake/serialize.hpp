#pragma once

// JSON mappings for the persisted types (model bundle, reports, generator
// parameters). All numbers round-trip exactly.

#include "json.hpp"

#include "fusewake/config.hpp"
#include "fusewake/eval.hpp"
#include "fusewake/fusion.hpp"
#include "fusewake/model.hpp"
#include "fusewake/synth.hpp"

namespace fusewake {
using json = nlohmann::ordered_json;

void to_json(json& j, const RunConfig& c);
// Strict: rejects unknown keys.
void from_json(const json& j, RunConfig& c);
}  // namespace fusewake

namespace fusewake::fusion {
void to_json(nlohmann::ordered_json& j, const ScalerStats& s);
void from_json(const nlohmann::ordered_json& j, ScalerStats& s);
void to_json(nlohmann::ordered_json& j, const PCAModel& p);
void from_json(const nlohmann::ordered_json& j, PCAModel& p);
}  // namespace fusewake::fusion

namespace fusewake::model {
void to_json(nlohmann::ordered_json& j, const TrainConfig& c);
void from_json(const nlohmann::ordered_json& j, TrainConfig& c);
void to_json(nlohmann::ordered_json& j, const ClassifierModel& m);
void from_json(const nlohmann::ordered_json& j, ClassifierModel& m);
void to_json(nlohmann::ordered_json& j, const CvReport& r);
void to_json(nlohmann::ordered_json& j, const SearchResult& r);
}  // namespace fusewake::model

namespace fusewake::eval {
void to_json(nlohmann::ordered_json& j, const ConfusionMatrix& c);
void to_json(nlohmann::ordered_json& j, const MetricsReport& m);
void to_json(nlohmann::ordered_json& j, const LatencyStats& s);
}  // namespace fusewake::eval

namespace fusewake::synth {
void to_json(nlohmann::ordered_json& j, const GenParams& p);
// Missing keys keep defaults; unknown keys throw.
void from_json(const nlohmann::ordered_json& j, GenParams& p);
}  // namespace fusewake::synth
