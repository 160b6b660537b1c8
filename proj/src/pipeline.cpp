#include "fusewake/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "fusewake/error.hpp"

namespace fusewake::pipeline {

namespace {

std::vector<std::string> prefixed(const std::vector<std::string>& names, const std::string& prefix) {
  std::vector<std::string> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(prefix + n);
  return out;
}

const std::vector<std::string>& vision_columns() {
  static const auto kCols = prefixed(vision::VisionFeatures::names(), "v.");
  return kCols;
}

const std::vector<std::string>& physio_columns() {
  static const auto kCols = prefixed(physio::PhysioFeatures::names(), "p.");
  return kCols;
}

const std::vector<std::string>& fused_columns() {
  static const auto kCols = [] {
    auto c = vision_columns();
    const auto& p = physio_columns();
    c.insert(c.end(), p.begin(), p.end());
    return c;
  }();
  return kCols;
}

int label_value(State s) { return s == State::Drowsy ? 1 : 0; }

struct Matrices {
  fusion::FeatureMatrix vision, physio, fused;
};

Matrices build_matrices(std::span<const WindowRecord> records) {
  Matrices m;
  m.vision.columns = vision_columns();
  m.physio.columns = physio_columns();
  m.fused.columns = fused_columns();
  for (const auto& r : records) {
    if (!r.usable()) continue;
    auto v = r.vision.values();
    auto p = r.physio->values();
    const int y = label_value(r.label);
    m.vision.add_row(v, y, r.subject_id);
    m.physio.add_row(p, y, r.subject_id);
    v.insert(v.end(), p.begin(), p.end());
    m.fused.add_row(std::move(v), y, r.subject_id);
  }
  return m;
}

// Applies a fitted scaler to a matrix laid out in the scaler's input columns.
fusion::FeatureMatrix standardize(const fusion::ScalerStats& s, const fusion::FeatureMatrix& m) {
  if (m.n_rows() == 0) {
    fusion::FeatureMatrix out;
    out.columns = s.columns;
    return out;
  }
  return s.apply(m);
}

fusion::FeatureMatrix project(const fusion::PCAModel& pca, const fusion::FeatureMatrix& m) {
  fusion::FeatureMatrix out;
  for (std::size_t i = 0; i < pca.output_dim(); ++i) out.columns.push_back("pc" + std::to_string(i + 1));
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    out.add_row(fusion::pca_transform(pca, m.rows[i]), m.labels[i], m.groups[i]);
  }
  return out;
}

Head train_head(const fusion::FeatureMatrix& train, const fusion::FeatureMatrix& val, const model::TrainConfig& cfg) {
  Head h;
  h.scaler = fit_scaler(train);
  h.model = model::train_classifier(model::ModelKind::Logistic, h.scaler.apply(train), standardize(h.scaler, val), cfg);
  return h;
}

double head_score(const Head& h, const std::vector<double>& values, const std::vector<std::string>& columns) {
  return model::predict_score(h.model, h.scaler.apply(values, columns));
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

eval::MetricsReport metrics_for(std::span<const double> scores, std::span<const State> labels, double threshold) {
  std::vector<State> pred;
  pred.reserve(scores.size());
  for (double s : scores) pred.push_back(s >= threshold ? State::Drowsy : State::Alert);
  auto report = eval::classification_metrics(eval::confusion(pred, labels));
  const bool both = std::find(labels.begin(), labels.end(), State::Drowsy) != labels.end() &&
                    std::find(labels.begin(), labels.end(), State::Alert) != labels.end();
  if (both) report.auc = eval::roc_auc(scores, labels).auc;
  return report;
}

}  // namespace

std::vector<WindowRecord> extract_windows(const Session& session, const RunConfig& cfg) {
  const Session aligned = align_streams(session, cfg.align_tolerance_ms);
  const auto windows = window_session(aligned, cfg.window_s, cfg.stride_s);
  std::vector<WindowRecord> out;
  out.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Window& w = windows[i];
    WindowRecord r;
    r.session_id = session.id;
    r.subject_id = session.subject_id;
    r.window_index = i;
    r.start = w.start;
    r.end = w.end();
    r.label = w.label;
    r.vision = vision::vision_features(w, cfg.vision);
    try {
      r.physio = physio::physio_features(w, cfg.physio);
    } catch (const DataError& e) {
      r.physio_error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<WindowRecord> extract_dataset(std::span<const Session> sessions, const RunConfig& cfg) {
  std::vector<std::vector<WindowRecord>> parts(sessions.size());
  std::vector<std::exception_ptr> errors(sessions.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < sessions.size(); i = next++) {
      try {
        parts[i] = extract_windows(sessions[i], cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(sessions.size(), std::max(1u, std::thread::hardware_concurrency()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(work);
    work();
  }
  std::vector<WindowRecord> out;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    std::move(parts[i].begin(), parts[i].end(), std::back_inserter(out));
  }
  return out;
}

void ModelBundle::validate() const {
  vision.model.validate();
  physio.model.validate();
  fused_net.validate();
  if (vision.model.input_dim != vision.scaler.columns.size()) throw DataError("vision head dimension mismatch");
  if (physio.model.input_dim != physio.scaler.columns.size()) throw DataError("physio head dimension mismatch");
  for (const auto& c : selected_columns) {
    if (std::find(scaler.columns.begin(), scaler.columns.end(), c) == scaler.columns.end()) {
      throw DataError("selected column \"" + c + "\" not produced by the scaler");
    }
  }
  if (pca.input_dim() != selected_columns.size()) throw DataError("PCA input dimension mismatch");
  if (fused_net.input_dim != pca.output_dim()) throw DataError("fused network dimension mismatch");
}

json to_json(const ModelBundle& b) {
  json j = json::object();
  j["version"] = kModelVersion;
  j["scaler"] = b.scaler;
  j["selected_columns"] = b.selected_columns;
  j["pca"] = b.pca;
  j["heads"] = {{"vision", {{"scaler", b.vision.scaler}, {"model", b.vision.model}}},
                {"physio", {{"scaler", b.physio.scaler}, {"model", b.physio.model}}}};
  j["fused_net"] = b.fused_net;
  j["train_config"] = b.train_config;
  j["metrics"] = b.metrics;
  j["run_config"] = b.config;
  return j;
}

ModelBundle bundle_from_json(const json& j) {
  if (!j.is_object() || !j.contains("version") || j["version"] != kModelVersion) {
    throw DataError(std::string("not a model bundle; expected version ") + kModelVersion);
  }
  ModelBundle b;
  try {
    from_json(j.at("run_config"), b.config);
  } catch (const UsageError& e) {
    throw DataError(std::string("bundle run_config: ") + e.what());
  } catch (const json::exception& e) {
    throw DataError(std::string("bundle run_config: ") + e.what());
  }
  try {
    b.scaler = j.at("scaler").get<fusion::ScalerStats>();
    b.selected_columns = j.at("selected_columns").get<std::vector<std::string>>();
    b.pca = j.at("pca").get<fusion::PCAModel>();
    const json& heads = j.at("heads");
    b.vision.scaler = heads.at("vision").at("scaler").get<fusion::ScalerStats>();
    b.vision.model = heads.at("vision").at("model").get<model::ClassifierModel>();
    b.physio.scaler = heads.at("physio").at("scaler").get<fusion::ScalerStats>();
    b.physio.model = heads.at("physio").at("model").get<model::ClassifierModel>();
    b.fused_net = j.at("fused_net").get<model::ClassifierModel>();
    b.train_config = j.at("train_config").get<model::TrainConfig>();
    b.metrics = j.at("metrics");
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model bundle: ") + e.what());
  }
  b.validate();
  return b;
}

std::string dump_bundle(const ModelBundle& bundle) { return to_json(bundle).dump(2) + "\n"; }

void write_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << dump_bundle(bundle);
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model bundle: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed model bundle: ") + e.what());
  }
  return bundle_from_json(j);
}

ModelBundle train_bundle(std::span<const WindowRecord> train, std::span<const WindowRecord> val,
                         const RunConfig& cfg) {
  cfg.validate();
  const Matrices tm = build_matrices(train);
  const Matrices vm = build_matrices(val);
  if (tm.fused.n_rows() < 2) throw DataError("no usable training windows");

  ModelBundle b;
  b.config = cfg;
  b.vision = train_head(tm.vision, vm.vision, cfg.train);
  b.physio = train_head(tm.physio, vm.physio, cfg.train);

  b.scaler = fit_scaler(tm.fused);
  const auto train_std = b.scaler.apply(tm.fused);
  const auto val_std = standardize(b.scaler, vm.fused);
  b.selected_columns =
      fusion::select_features(train_std, cfg.select_k, cfg.mi_bins, model::make_logistic_trainer(cfg.train));
  const auto train_sel = train_std.select_columns(b.selected_columns);
  const auto val_sel = val_std.n_rows() ? val_std.select_columns(b.selected_columns) : fusion::FeatureMatrix{};
  b.pca = fusion::fit_pca(train_sel.rows, cfg.evr_target);
  const auto train_pc = project(b.pca, train_sel);
  const auto val_pc = project(b.pca, val_sel);

  // Small datasets get as many folds as they have training subjects.
  std::vector<std::string> subjects = train_pc.groups;
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  const std::size_t folds = std::min(cfg.cv_folds, subjects.size());

  b.metrics = json::object();
  b.train_config = cfg.train;
  if (cfg.search_budget > 0 && folds >= 2) {
    const auto search = model::random_search(cfg.search_space, cfg.search_budget, train_pc, cfg.train,
                                             cfg.search_seed, folds, model::ModelKind::Mlp);
    b.train_config = search.best;
    b.metrics["search"] = search;
  }
  b.fused_net = model::train_classifier(model::ModelKind::Mlp, train_pc, val_pc, b.train_config);
  if (folds >= 2) {
    b.metrics["cv"] = model::cross_validate(train_pc, folds, b.train_config, model::ModelKind::Mlp);
  } else {
    b.metrics["cv"] = nullptr;
  }
  b.metrics["train_windows"] = tm.fused.n_rows();
  b.metrics["val_windows"] = vm.fused.n_rows();
  if (!val.empty() && vm.fused.n_rows() > 0) {
    const auto report = evaluate_records(b, val, "val");
    json paths = json::object();
    for (const auto& p : report.paths) paths[p.path] = p.metrics;
    b.metrics["validation"] = paths;
  }
  return b;
}

ModelBundle train_bundle(std::span<const Session> sessions, const RunConfig& cfg) {
  cfg.validate();
  const auto split = eval::split_dataset(sessions, cfg.split, cfg.split_seed);
  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<Session> out;
    for (auto i : idx) out.push_back(sessions[i]);
    return extract_dataset(out, cfg);
  };
  const auto train = pick(split.train);
  const auto val = pick(split.val);
  return train_bundle(train, val, cfg);
}

WindowScores score_window(const ModelBundle& b, const vision::VisionFeatures& fv,
                          const std::optional<physio::PhysioFeatures>& fp) {
  WindowScores s;
  std::vector<double> v, p;
  if (!fv.missing) {
    v = fv.values();
    s.vision = head_score(b.vision, v, vision_columns());
  }
  if (fp) {
    p = fp->values();
    s.physio = head_score(b.physio, p, physio_columns());
  }
  if (s.vision && s.physio) {
    std::vector<double> all = v;
    all.insert(all.end(), p.begin(), p.end());
    const auto standardized = b.scaler.apply(all, fused_columns());
    std::vector<double> selected;
    selected.reserve(b.selected_columns.size());
    for (const auto& c : b.selected_columns) {
      const auto it = std::find(b.scaler.columns.begin(), b.scaler.columns.end(), c);
      selected.push_back(standardized[static_cast<std::size_t>(it - b.scaler.columns.begin())]);
    }
    s.feature = model::predict_score(b.fused_net, fusion::pca_transform(b.pca, selected));
  }
  const double q_v = s.vision ? fv.quality : 0.0;
  const double q_p = s.physio ? fp->quality : 0.0;
  if (q_v > 0.0 || q_p > 0.0) {
    const auto w = fusion::fusion_weights(q_v, q_p);
    s.decision = fusion::fuse_scores(w, {s.vision.value_or(0.5), q_v}, {s.physio.value_or(0.5), q_p});
  }
  if (s.feature && s.decision) s.average = 0.5 * (*s.feature + *s.decision);
  return s;
}

const PathReport& EvalReport::path(const std::string& name) const {
  for (const auto& p : paths) {
    if (p.path == name) return p;
  }
  throw UsageError("unknown path \"" + name + "\"");
}

EvalReport evaluate_records(const ModelBundle& bundle, std::span<const WindowRecord> records, std::string subset) {
  EvalReport report;
  report.subset = std::move(subset);
  report.windows = records.size();
  std::vector<std::string> seen;
  std::vector<std::vector<double>> scores(path_names().size());
  std::vector<State> labels;
  for (const auto& r : records) {
    if (seen.empty() || seen.back() != r.session_id) seen.push_back(r.session_id);
    if (!r.usable()) continue;
    const auto s = score_window(bundle, r.vision, r.physio);
    scores[0].push_back(*s.vision);
    scores[1].push_back(*s.physio);
    scores[2].push_back(*s.feature);
    scores[3].push_back(*s.decision);
    scores[4].push_back(*s.average);
    labels.push_back(r.label);
  }
  std::sort(seen.begin(), seen.end());
  report.sessions = static_cast<std::size_t>(std::unique(seen.begin(), seen.end()) - seen.begin());
  report.scored_windows = labels.size();
  if (labels.empty()) throw DataError("no window has both modalities; nothing to evaluate");
  for (std::size_t k = 0; k < path_names().size(); ++k) {
    PathReport p;
    p.path = path_names()[k];
    p.metrics = metrics_for(scores[k], labels, bundle.config.decision_threshold);
    if (p.metrics.confusion.fp > 0) {
      p.fn_fp_ratio = static_cast<double>(p.metrics.confusion.fn) / static_cast<double>(p.metrics.confusion.fp);
    }
    report.paths.push_back(std::move(p));
  }
  return report;
}

json to_json(const EvalReport& r) {
  json paths = json::array();
  for (const auto& p : r.paths) {
    json m = p.metrics;
    json entry = {{"path", p.path}};
    for (auto& [k, v] : m.items()) entry[k] = v;
    entry["fn_fp_ratio"] = optional_json(p.fn_fp_ratio);
    paths.push_back(entry);
  }
  return json{{"version", kReportVersion},
              {"subset", r.subset},
              {"sessions", r.sessions},
              {"windows", r.windows},
              {"scored_windows", r.scored_windows},
              {"paths", paths}};
}

std::string report_csv(const EvalReport& r) {
  std::string out = "path,accuracy,precision,recall,f1,auc,tp,fp,tn,fn,fn_fp_ratio\n";
  for (const auto& p : r.paths) {
    const auto& m = p.metrics;
    out += p.path + "," + format_number(m.accuracy) + "," + format_optional(m.precision) + "," +
           format_optional(m.recall) + "," + format_optional(m.f1) + "," + format_optional(m.auc) + "," +
           std::to_string(m.confusion.tp) + "," + std::to_string(m.confusion.fp) + "," +
           std::to_string(m.confusion.tn) + "," + std::to_string(m.confusion.fn) + "," +
           format_optional(p.fn_fp_ratio) + "\n";
  }
  return out;
}

std::vector<std::size_t> test_sessions(const ModelBundle& bundle, std::span<const Session> sessions) {
  return eval::split_dataset(sessions, bundle.config.split, bundle.config.split_seed).test;
}

void stream_session(const ModelBundle& bundle, const Session& session, std::ostream& out, bool fast) {
  const auto& cfg = bundle.config;
  const auto records = extract_windows(session, cfg);
  model::AlarmTracker tracker(cfg.smoothing_alpha, cfg.alarm_threshold, cfg.alarm_consecutive);
  const auto wall_start = std::chrono::steady_clock::now();
  const std::int64_t t0 = session.frames.empty() ? 0 : session.frames.front().t.micros;
  for (const auto& r : records) {
    if (!fast) std::this_thread::sleep_until(wall_start + std::chrono::microseconds(r.end.micros - t0));
    const auto s = score_window(bundle, r.vision, r.physio);
    const bool alarm = s.decision ? tracker.update(*s.decision) : false;
    json line = {{"t_us", r.end.micros},
                 {"s_vision", optional_json(s.vision)},
                 {"s_physio", optional_json(s.physio)},
                 {"s_fused", optional_json(s.decision)},
                 {"alarm", alarm}};
    out << line.dump() << '\n';
    out.flush();
  }
}

eval::LatencyStats latency_benchmark(const ModelBundle& bundle, const Session& session, int feature_passes) {
  constexpr std::size_t kWarmup = 100;
  if (feature_passes < 1) throw UsageError("feature_passes must be at least 1");
  if (session.duration_s() < 60.0) throw DataError("session too short for the latency benchmark (need 60 s)");
  const auto& cfg = bundle.config;
  const Session aligned = align_streams(session, cfg.align_tolerance_ms);
  const auto windows = window_session(aligned, cfg.window_s, cfg.stride_s);
  const auto& frames = aligned.frames;
  if (frames.size() <= kWarmup) throw DataError("session too short for the latency benchmark");

  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point a) {
    return std::chrono::duration<double, std::milli>(clock::now() - a).count();
  };

  model::AlarmTracker tracker(cfg.smoothing_alpha, cfg.alarm_threshold, cfg.alarm_consecutive);
  std::vector<double> frame_ms(frames.size(), 0.0);
  std::vector<double> window_ms(frames.size(), 0.0);
  std::vector<double> ear_buffer;
  ear_buffer.reserve(frames.size());
  volatile double sink = 0.0;
  std::size_t next_window = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto t_start = clock::now();
    double e = 0.0;
    if (vision::frame_ear(frames[i], e)) ear_buffer.push_back(e);
    frame_ms[i] = ms_since(t_start);
    // A window completes once the frame clock passes its end.
    while (next_window < windows.size() && windows[next_window].end() <= frames[i].t) {
      const auto w_start = clock::now();
      const Window& w = windows[next_window];
      for (int pass = 0; pass < feature_passes; ++pass) {
        const auto fv = vision::vision_features(w, cfg.vision);
        std::optional<physio::PhysioFeatures> fp;
        try {
          fp = physio::physio_features(w, cfg.physio);
        } catch (const DataError&) {
        }
        const auto s = score_window(bundle, fv, fp);
        if (pass == 0 && s.decision) sink = sink + static_cast<double>(tracker.update(*s.decision));
      }
      window_ms[i] += ms_since(w_start);
      ++next_window;
    }
  }
  const auto stride_frames =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.stride_s * aligned.fps)));
  std::vector<double> per_frame = frame_ms;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (window_ms[i] == 0.0) continue;
    const std::size_t lo = i + 1 >= stride_frames ? i + 1 - stride_frames : 0;
    const double share = window_ms[i] / static_cast<double>(i + 1 - lo);
    for (std::size_t k = lo; k <= i; ++k) per_frame[k] += share;
  }
  return eval::latency_stats(std::span<const double>(per_frame).subspan(kWarmup));
}

}  // namespace fusewake::pipeline
