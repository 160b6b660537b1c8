#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "fusewake/error.hpp"
#include "fusewake/eval.hpp"
#include "fusewake/fusion.hpp"
#include "fusewake/model.hpp"
#include "fusewake/physio.hpp"
#include "fusewake/pipeline.hpp"
#include "fusewake/synth.hpp"
#include "fusewake/vision.hpp"

namespace py = pybind11;
using namespace fusewake;

namespace {

EyeLandmarks to_eye(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() != 6) throw py::value_error("an eye needs 6 points");
  EyeLandmarks eye;
  for (std::size_t i = 0; i < 6; ++i) eye[i] = {pts[i].first, pts[i].second};
  return eye;
}

std::vector<State> to_states(const std::vector<int>& labels) {
  std::vector<State> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(l ? State::Drowsy : State::Alert);
  return out;
}

py::dict metrics_dict(const eval::MetricsReport& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  d["auc"] = m.auc;
  d["tp"] = m.confusion.tp;
  d["fp"] = m.confusion.fp;
  d["tn"] = m.confusion.tn;
  d["fn"] = m.confusion.fn;
  return d;
}

}  // namespace

PYBIND11_MODULE(fusewake, m) {
  m.doc() = "Camera and physiological drowsiness detection";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

  // vision
  m.def("ear", [](const std::vector<std::pair<double, double>>& pts) { return vision::ear(to_eye(pts)); },
        py::arg("points"), "Eye aspect ratio of six (x, y) points.");
  m.def("perclos", [](const std::vector<double>& ear, double threshold) { return vision::perclos(ear, threshold); },
        py::arg("ear"), py::arg("threshold") = 0.2);
  m.def(
      "detect_blinks",
      [](const std::vector<double>& ear, double fps, double threshold, int min_frames) {
        std::vector<std::pair<std::size_t, int>> out;
        for (const auto& b : vision::detect_blinks(ear, fps, threshold, min_frames))
          out.emplace_back(b.onset_frame, b.duration_frames);
        return out;
      },
      py::arg("ear"), py::arg("fps") = 30.0, py::arg("threshold") = 0.2, py::arg("min_frames") = 2,
      "List of (onset_frame, duration_frames).");

  // physio
  m.def(
      "bandpass",
      [](const std::vector<double>& x, double fs, double lo, double hi, int order) {
        physio::FilterSpec spec{lo, hi, order};
        spec.validate(fs);
        return physio::bandpass(x, fs, spec);
      },
      py::arg("signal"), py::arg("fs"), py::arg("lo_hz") = 0.5, py::arg("hi_hz") = 40.0, py::arg("order") = 4);
  m.def(
      "zscore",
      [](const std::vector<double>& x) {
        auto z = physio::zscore(x);
        return py::make_tuple(z.values, z.stats.mu, z.stats.sigma);
      },
      py::arg("signal"), "Returns (values, mu, sigma).");
  m.def(
      "band_powers",
      [](const std::vector<double>& x, double fs) {
        const auto b = physio::band_powers(x, fs);
        py::dict d;
        d["delta"] = b.delta;
        d["theta"] = b.theta;
        d["alpha"] = b.alpha;
        d["beta"] = b.beta;
        return d;
      },
      py::arg("signal"), py::arg("fs"));
  m.def("detect_pulse_peaks",
        [](const std::vector<double>& x, double fs, double refractory_ms) {
          return physio::detect_pulse_peaks(x, fs, refractory_ms);
        },
        py::arg("signal"), py::arg("fs"), py::arg("refractory_ms") = 300.0, "Inter-beat intervals in ms.");
  m.def(
      "hrv_metrics",
      [](const std::vector<double>& rr) {
        const auto h = physio::hrv_metrics(rr);
        py::dict d;
        d["mean_rr_ms"] = h.mean_rr_ms;
        d["sdnn_ms"] = h.sdnn_ms;
        d["rmssd_ms"] = h.rmssd_ms;
        return d;
      },
      py::arg("rr_ms"));

  // fusion
  m.def(
      "fusion_weights",
      [](double q_v, double q_p) {
        const auto w = fusion::fusion_weights(q_v, q_p);
        return py::make_tuple(w.w_v, w.w_p);
      },
      py::arg("q_v"), py::arg("q_p"));
  m.def(
      "fuse_scores",
      [](double s_v, double q_v, double s_p, double q_p) {
        return fusion::fuse_scores(fusion::fusion_weights(q_v, q_p), {s_v, q_v}, {s_p, q_p});
      },
      py::arg("s_v"), py::arg("q_v"), py::arg("s_p"), py::arg("q_p"));

  py::class_<fusion::PCAModel>(m, "PCAModel")
      .def_readonly("mean", &fusion::PCAModel::mean)
      .def_readonly("components", &fusion::PCAModel::components)
      .def_readonly("eigenvalues", &fusion::PCAModel::eigenvalues)
      .def_readonly("explained_variance_ratios", &fusion::PCAModel::explained_variance_ratios)
      .def("transform", [](const fusion::PCAModel& p, const std::vector<double>& v) { return fusion::pca_transform(p, v); })
      .def("inverse", [](const fusion::PCAModel& p, const std::vector<double>& z) { return fusion::pca_inverse(p, z); });
  m.def("fit_pca", &fusion::fit_pca, py::arg("rows"), py::arg("evr_target") = 0.95);

  // model and eval
  m.def("ema", [](const std::vector<double>& s, double alpha) { return model::ema(s, alpha); }, py::arg("scores"),
        py::arg("alpha"));
  m.def(
      "smooth_and_alarm",
      [](const std::vector<double>& s, double alpha, double threshold, int consecutive) {
        std::vector<std::size_t> out;
        for (const auto& e : model::smooth_and_alarm(s, alpha, threshold, consecutive)) out.push_back(e.index);
        return out;
      },
      py::arg("scores"), py::arg("alpha") = 0.5, py::arg("threshold") = 0.5, py::arg("consecutive") = 3,
      "Indices at which alarms fire.");
  m.def(
      "classification_metrics",
      [](const std::vector<int>& pred, const std::vector<int>& labels) {
        return metrics_dict(eval::classification_metrics(eval::confusion(to_states(pred), to_states(labels))));
      },
      py::arg("predictions"), py::arg("labels"), "Labels are 1 for drowsy, 0 for alert.");
  m.def("roc_auc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
          return eval::roc_auc(scores, to_states(labels)).auc;
        },
        py::arg("scores"), py::arg("labels"));

  // sessions and the trained pipeline
  py::class_<Session>(m, "Session")
      .def_readonly("id", &Session::id)
      .def_readonly("subject_id", &Session::subject_id)
      .def_readonly("fps", &Session::fps)
      .def_property_readonly("duration_s", &Session::duration_s)
      .def_property_readonly("frame_count", [](const Session& s) { return s.frames.size(); })
      .def("to_jsonl", &serialize_session);
  m.def("generate_session",
        [](std::uint64_t seed, double duration_s) {
          return synth::generate_session(seed, duration_s, synth::GenParams::defaults());
        },
        py::arg("seed"), py::arg("duration_s") = 300.0);
  m.def("generate_dataset",
        [](std::uint64_t seed, std::size_t sessions, std::size_t subjects, double duration_s) {
          return synth::generate_dataset(seed, sessions, subjects, synth::GenParams::defaults(), duration_s);
        },
        py::arg("seed"), py::arg("sessions"), py::arg("subjects"), py::arg("duration_s") = 300.0);
  m.def("load_session", &load_session, py::arg("path"));
  m.def("write_session", &write_session, py::arg("session"), py::arg("path"));

  py::class_<pipeline::ModelBundle>(m, "ModelBundle").def("to_json", &pipeline::dump_bundle);
  m.def(
      "train",
      [](const std::vector<Session>& sessions) {
        const RunConfig cfg;
        py::gil_scoped_release release;
        return pipeline::train_bundle(std::span<const Session>(sessions), cfg);
      },
      py::arg("sessions"), "Trains all heads with the default configuration.");
  m.def("load_bundle", &pipeline::load_bundle, py::arg("path"));
  m.def("write_bundle", &pipeline::write_bundle, py::arg("bundle"), py::arg("path"));
  m.def(
      "stream",
      [](const pipeline::ModelBundle& bundle, const Session& session) {
        std::ostringstream out;
        pipeline::stream_session(bundle, session, out, true);
        return out.str();
      },
      py::arg("bundle"), py::arg("session"), "JSON lines, one per window.");
  m.def(
      "evaluate",
      [](const pipeline::ModelBundle& bundle, const std::vector<Session>& sessions) {
        const auto records = pipeline::extract_dataset(sessions, bundle.config);
        const auto rep = pipeline::evaluate_records(bundle, records, "all");
        py::dict d;
        for (const auto& p : rep.paths) d[py::str(p.path)] = metrics_dict(p.metrics);
        return d;
      },
      py::arg("bundle"), py::arg("sessions"), "Metrics per scoring path over every window.");
}
