#include "fusewake/config.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <fstream>
#include <functional>
#include <sstream>

#include "fusewake/error.hpp"
#include "fusewake/serialize.hpp"

namespace fusewake {

namespace {

void read_value(const json& v, double& out, const std::string& key) {
  if (!v.is_number()) throw UsageError(key + " must be a number");
  out = v.get<double>();
}

template <std::integral T>
void read_value(const json& v, T& out, const std::string& key) {
  if (!v.is_number_integer()) throw UsageError(key + " must be an integer");
  if constexpr (std::is_unsigned_v<T>) {
    if (v.is_number_unsigned()) {
      out = v.get<T>();
      return;
    }
    if (v.get<std::int64_t>() < 0) throw UsageError(key + " must be non-negative");
  }
  out = v.get<T>();
}

template <typename T>
void read_value(const json& v, std::pair<T, T>& out, const std::string& key) {
  if (!v.is_array() || v.size() != 2) throw UsageError(key + " must be a two-element array");
  read_value(v[0], out.first, key);
  read_value(v[1], out.second, key);
}

template <typename T>
void read_value(const json& v, std::optional<T>& out, const std::string& key) {
  if (v.is_null()) {
    out.reset();
    return;
  }
  T tmp{};
  read_value(v, tmp, key);
  out = tmp;
}

template <typename T>
json write_value(const T& v) {
  return json(v);
}

template <typename T>
json write_value(const std::pair<T, T>& v) {
  return json::array({v.first, v.second});
}

template <typename T>
json write_value(const std::optional<T>& v) {
  return v ? write_value(*v) : json(nullptr);
}

json write_value(const physio::BandEdges& b) { return json::array({b.lo, b.hi}); }

void read_value(const json& v, physio::BandEdges& out, const std::string& key) {
  std::pair<double, double> p;
  read_value(v, p, key);
  out = {p.first, p.second};
}

struct Field {
  std::string key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <typename Acc>
Field field(std::string key, Acc acc) {
  return {key, [acc](const RunConfig& c) { return write_value(acc(c)); },
          [acc, key](RunConfig& c, const json& v) { read_value(v, acc(c), key); }};
}

#define FW_FIELD(name, expr) field(name, [](auto& c) -> auto& { return c.expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      FW_FIELD("window_s", window_s),
      FW_FIELD("stride_s", stride_s),
      FW_FIELD("align_tolerance_ms", align_tolerance_ms),
      FW_FIELD("ear_threshold", vision.ear_threshold),
      FW_FIELD("blink_min_frames", vision.blink_min_frames),
      FW_FIELD("mar_threshold", vision.mar_threshold),
      FW_FIELD("yawn_min_s", vision.yawn_min_s),
      FW_FIELD("filter_lo_hz", physio.filter.lo_hz),
      FW_FIELD("filter_hi_hz", physio.filter.hi_hz),
      FW_FIELD("filter_order", physio.filter.order),
      FW_FIELD("band_delta_hz", physio.bands.delta),
      FW_FIELD("band_theta_hz", physio.bands.theta),
      FW_FIELD("band_alpha_hz", physio.bands.alpha),
      FW_FIELD("band_beta_hz", physio.bands.beta),
      FW_FIELD("clip_factor", physio.clip_factor),
      FW_FIELD("max_clip_fraction", physio.max_clip_fraction),
      FW_FIELD("artifact_history_s", physio.artifact_history_s),
      FW_FIELD("refractory_ms", physio.refractory_ms),
      FW_FIELD("mi_bins", mi_bins),
      FW_FIELD("select_k", select_k),
      FW_FIELD("evr_target", evr_target),
      FW_FIELD("learning_rate", train.learning_rate),
      FW_FIELD("l2", train.l2),
      FW_FIELD("hidden_units", train.hidden_units),
      FW_FIELD("max_epochs", train.max_epochs),
      FW_FIELD("patience", train.patience),
      FW_FIELD("batch_size", train.batch_size),
      FW_FIELD("seed", train.seed),
      FW_FIELD("split_train", split.train),
      FW_FIELD("split_val", split.val),
      FW_FIELD("split_test", split.test),
      FW_FIELD("split_seed", split_seed),
      FW_FIELD("cv_folds", cv_folds),
      FW_FIELD("search_budget", search_budget),
      FW_FIELD("search_seed", search_seed),
      FW_FIELD("search_learning_rate", search_space.learning_rate),
      FW_FIELD("search_l2", search_space.l2),
      FW_FIELD("search_hidden_units", search_space.hidden_units),
      FW_FIELD("search_batch_size", search_space.batch_size),
      FW_FIELD("decision_threshold", decision_threshold),
      FW_FIELD("smoothing_alpha", smoothing_alpha),
      FW_FIELD("alarm_threshold", alarm_threshold),
      FW_FIELD("alarm_consecutive", alarm_consecutive),
  };
  return kFields;
}

#undef FW_FIELD

}  // namespace

void RunConfig::validate() const {
  if (!(window_s > 0.0)) throw UsageError("window_s must be positive");
  if (!(stride_s > 0.0)) throw UsageError("stride_s must be positive");
  if (stride_s > window_s) throw UsageError("stride_s must not exceed window_s");
  if (!(align_tolerance_ms > 0.0)) throw UsageError("align_tolerance_ms must be positive");
  vision.validate();
  physio.validate(256.0);
  if (mi_bins < 2) throw UsageError("mi_bins must be at least 2");
  if (select_k < 1) throw UsageError("select_k must be at least 1");
  if (!(evr_target > 0.0 && evr_target <= 1.0)) throw UsageError("evr_target must lie in (0, 1]");
  train.validate();
  if (!(split.train > 0.0 && split.val > 0.0 && split.test > 0.0)) throw UsageError("split ratios must be positive");
  if (std::abs(split.train + split.val + split.test - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");
  if (cv_folds < 2) throw UsageError("cv_folds must be at least 2");
  if (search_budget > 0 && search_space.empty()) throw UsageError("search_budget needs a non-empty search space");
  if (!(decision_threshold > 0.0 && decision_threshold < 1.0)) throw UsageError("decision_threshold must lie in (0, 1)");
  if (!(smoothing_alpha > 0.0 && smoothing_alpha <= 1.0)) throw UsageError("smoothing_alpha must lie in (0, 1]");
  if (!(alarm_threshold > 0.0 && alarm_threshold < 1.0)) throw UsageError("alarm_threshold must lie in (0, 1)");
  if (alarm_consecutive < 1) throw UsageError("alarm_consecutive must be at least 1");
}

void to_json(json& j, const RunConfig& c) {
  j = json::object();
  j["version"] = kConfigVersion;
  for (const auto& f : fields()) j[f.key] = f.get(c);
}

void from_json(const json& j, RunConfig& c) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "version") {
      if (!value.is_string() || value.get<std::string>() != kConfigVersion) {
        throw UsageError(std::string("unsupported config version; expected ") + kConfigVersion);
      }
      continue;
    }
    const auto& all = fields();
    auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) { return f.key == key; });
    if (it == all.end()) throw UsageError("unknown config key \"" + key + "\"");
    it->set(c, value);
  }
  c.validate();
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("malformed config JSON: ") + e.what());
  }
  RunConfig c;
  from_json(j, c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const RunConfig& cfg) {
  json j = cfg;
  return j.dump(2);
}

}  // namespace fusewake
