#include "fusewake/serialize.hpp"

#include "fusewake/error.hpp"

namespace fusewake {

namespace {

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing key \"") + key + "\"");
  return j.at(key);
}

template <typename T>
T get_as(const json& j, const char* key) {
  try {
    return require(j, key).get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("bad value for \"") + key + "\"");
  }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

namespace fusion {

void to_json(json& j, const ScalerStats& s) {
  j = json{{"columns", s.columns}, {"mu", s.mu}, {"sigma", s.sigma}, {"dropped", s.dropped}};
}

void from_json(const json& j, ScalerStats& s) {
  s.columns = get_as<std::vector<std::string>>(j, "columns");
  s.mu = get_as<std::vector<double>>(j, "mu");
  s.sigma = get_as<std::vector<double>>(j, "sigma");
  s.dropped = get_as<std::vector<std::string>>(j, "dropped");
  if (s.mu.size() != s.columns.size() || s.sigma.size() != s.columns.size()) {
    throw DataError("scaler arrays disagree in length");
  }
}

void to_json(json& j, const PCAModel& p) {
  j = json{{"mean", p.mean},
           {"components", p.components},
           {"eigenvalues", p.eigenvalues},
           {"explained_variance_ratios", p.explained_variance_ratios}};
}

void from_json(const json& j, PCAModel& p) {
  p.mean = get_as<std::vector<double>>(j, "mean");
  p.components = get_as<std::vector<std::vector<double>>>(j, "components");
  p.eigenvalues = get_as<std::vector<double>>(j, "eigenvalues");
  p.explained_variance_ratios = get_as<std::vector<double>>(j, "explained_variance_ratios");
  for (const auto& c : p.components) {
    if (c.size() != p.mean.size()) throw DataError("PCA component length mismatch");
  }
}

}  // namespace fusion

namespace model {

void to_json(json& j, const TrainConfig& c) {
  j = json{{"learning_rate", c.learning_rate}, {"l2", c.l2},           {"hidden_units", c.hidden_units},
           {"max_epochs", c.max_epochs},       {"patience", c.patience}, {"batch_size", c.batch_size},
           {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  c.learning_rate = get_as<double>(j, "learning_rate");
  c.l2 = get_as<double>(j, "l2");
  c.hidden_units = get_as<int>(j, "hidden_units");
  c.max_epochs = get_as<int>(j, "max_epochs");
  c.patience = get_as<int>(j, "patience");
  c.batch_size = get_as<int>(j, "batch_size");
  c.seed = get_as<std::uint64_t>(j, "seed");
}

void to_json(json& j, const ClassifierModel& m) {
  j = json{{"kind", to_string(m.kind)},
           {"input_dim", m.input_dim},
           {"hidden_units", m.hidden_units},
           {"params", m.params},
           {"info",
            {{"seed", m.info.seed},
             {"epochs_run", m.info.epochs_run},
             {"best_val_loss", m.info.best_val_loss},
             {"best_loss_history", m.info.best_loss_history}}}};
}

void from_json(const json& j, ClassifierModel& m) {
  try {
    m.kind = parse_model_kind(get_as<std::string>(j, "kind"));
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
  m.input_dim = get_as<std::size_t>(j, "input_dim");
  m.hidden_units = get_as<std::size_t>(j, "hidden_units");
  m.params = get_as<std::vector<double>>(j, "params");
  const json& info = require(j, "info");
  m.info.seed = get_as<std::uint64_t>(info, "seed");
  m.info.epochs_run = get_as<int>(info, "epochs_run");
  m.info.best_val_loss = get_as<double>(info, "best_val_loss");
  m.info.best_loss_history = get_as<std::vector<double>>(info, "best_loss_history");
  try {
    m.validate();
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
}

void to_json(json& j, const CvReport& r) {
  json folds = json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"subjects", f.subjects},
                     {"n_rows", f.n_rows},
                     {"accuracy", f.accuracy},
                     {"f1", optional_number(f.f1)}});
  }
  j = json{{"folds", folds},
           {"mean_accuracy", r.mean_accuracy},
           {"std_accuracy", r.std_accuracy},
           {"mean_f1", r.mean_f1},
           {"std_f1", r.std_f1}};
}

void to_json(json& j, const SearchResult& r) {
  json trials = json::array();
  for (const auto& t : r.trials) {
    trials.push_back({{"index", t.index},
                      {"config", t.config},
                      {"mean_f1", t.mean_f1},
                      {"mean_accuracy", t.mean_accuracy}});
  }
  j = json{{"best", r.best}, {"trials", trials}};
}

}  // namespace model

namespace eval {

void to_json(json& j, const ConfusionMatrix& c) { j = json{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}; }

void to_json(json& j, const MetricsReport& m) {
  j = json{{"accuracy", m.accuracy},
           {"precision", optional_number(m.precision)},
           {"recall", optional_number(m.recall)},
           {"f1", optional_number(m.f1)},
           {"auc", optional_number(m.auc)},
           {"confusion", m.confusion}};
}

void to_json(json& j, const LatencyStats& s) {
  j = json{{"mean_ms", s.mean_ms}, {"p95_ms", s.p95_ms}, {"max_ms", s.max_ms}, {"frames", s.frames}};
}

}  // namespace eval

namespace synth {

namespace {

void emission_to_json(json& j, const StateEmission& e) {
  j = json{{"blink_rate_per_min", e.blink_rate_per_min},
           {"blink_ms_min", e.blink_ms_min},
           {"blink_ms_max", e.blink_ms_max},
           {"microsleep_rate_per_min", e.microsleep_rate_per_min},
           {"microsleep_s_min", e.microsleep_s_min},
           {"microsleep_s_max", e.microsleep_s_max},
           {"ear_baseline", e.ear_baseline},
           {"ear_noise", e.ear_noise},
           {"yawn_rate_per_min", e.yawn_rate_per_min},
           {"eeg_gains", e.eeg_gains},
           {"mean_rr_ms", e.mean_rr_ms},
           {"rr_jitter_ms", e.rr_jitter_ms},
           {"eog_activity", e.eog_activity}};
}

void set_number(const json& v, double& out, const std::string& key) {
  if (!v.is_number()) throw UsageError("generator parameter " + key + " must be a number");
  out = v.get<double>();
}

void emission_from_json(const json& j, StateEmission& e, const std::string& prefix) {
  if (!j.is_object()) throw UsageError("generator parameter " + prefix + " must be an object");
  for (const auto& [key, v] : j.items()) {
    const std::string name = prefix + "." + key;
    if (key == "blink_rate_per_min") set_number(v, e.blink_rate_per_min, name);
    else if (key == "blink_ms_min") set_number(v, e.blink_ms_min, name);
    else if (key == "blink_ms_max") set_number(v, e.blink_ms_max, name);
    else if (key == "microsleep_rate_per_min") set_number(v, e.microsleep_rate_per_min, name);
    else if (key == "microsleep_s_min") set_number(v, e.microsleep_s_min, name);
    else if (key == "microsleep_s_max") set_number(v, e.microsleep_s_max, name);
    else if (key == "ear_baseline") set_number(v, e.ear_baseline, name);
    else if (key == "ear_noise") set_number(v, e.ear_noise, name);
    else if (key == "yawn_rate_per_min") set_number(v, e.yawn_rate_per_min, name);
    else if (key == "mean_rr_ms") set_number(v, e.mean_rr_ms, name);
    else if (key == "rr_jitter_ms") set_number(v, e.rr_jitter_ms, name);
    else if (key == "eog_activity") set_number(v, e.eog_activity, name);
    else if (key == "eeg_gains") {
      if (!v.is_array() || v.size() != 4) throw UsageError("generator parameter " + name + " must have 4 entries");
      for (std::size_t i = 0; i < 4; ++i) set_number(v[i], e.eeg_gains[i], name);
    } else {
      throw UsageError("unknown generator parameter \"" + name + "\"");
    }
  }
}

}  // namespace

void to_json(json& j, const GenParams& p) {
  json alert, drowsy;
  emission_to_json(alert, p.alert);
  emission_to_json(drowsy, p.drowsy);
  j = json{{"p_alert_to_drowsy", p.p_alert_to_drowsy},
           {"p_drowsy_to_alert", p.p_drowsy_to_alert},
           {"alert", alert},
           {"drowsy", drowsy},
           {"drift_tau_s", p.drift_tau_s},
           {"ear_drift_sd", p.ear_drift_sd},
           {"eeg_drift_sd", p.eeg_drift_sd},
           {"rr_drift_ms", p.rr_drift_ms},
           {"eeg_amplitude_uv", p.eeg_amplitude_uv},
           {"eeg_noise_uv", p.eeg_noise_uv},
           {"eog_noise_uv", p.eog_noise_uv},
           {"pulse_noise", p.pulse_noise},
           {"landmark_dropout", p.landmark_dropout},
           {"clip_prob", p.clip_prob},
           {"subject_jitter", p.subject_jitter},
           {"fps", p.fps},
           {"fs", p.fs}};
}

void from_json(const json& j, GenParams& p) {
  if (!j.is_object()) throw UsageError("generator parameters must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "alert") emission_from_json(v, p.alert, key);
    else if (key == "drowsy") emission_from_json(v, p.drowsy, key);
    else if (key == "p_alert_to_drowsy") set_number(v, p.p_alert_to_drowsy, key);
    else if (key == "p_drowsy_to_alert") set_number(v, p.p_drowsy_to_alert, key);
    else if (key == "drift_tau_s") set_number(v, p.drift_tau_s, key);
    else if (key == "ear_drift_sd") set_number(v, p.ear_drift_sd, key);
    else if (key == "eeg_drift_sd") set_number(v, p.eeg_drift_sd, key);
    else if (key == "rr_drift_ms") set_number(v, p.rr_drift_ms, key);
    else if (key == "eeg_amplitude_uv") set_number(v, p.eeg_amplitude_uv, key);
    else if (key == "eeg_noise_uv") set_number(v, p.eeg_noise_uv, key);
    else if (key == "eog_noise_uv") set_number(v, p.eog_noise_uv, key);
    else if (key == "pulse_noise") set_number(v, p.pulse_noise, key);
    else if (key == "landmark_dropout") set_number(v, p.landmark_dropout, key);
    else if (key == "clip_prob") set_number(v, p.clip_prob, key);
    else if (key == "subject_jitter") set_number(v, p.subject_jitter, key);
    else if (key == "fps") set_number(v, p.fps, key);
    else if (key == "fs") set_number(v, p.fs, key);
    else throw UsageError("unknown generator parameter \"" + key + "\"");
  }
  p.validate();
}

}  // namespace synth

}  // namespace fusewake
