#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fusewake/config.hpp"
#include "fusewake/core.hpp"
#include "fusewake/error.hpp"
#include "fusewake/pipeline.hpp"
#include "fusewake/serialize.hpp"
#include "fusewake/synth.hpp"

namespace fs = std::filesystem;
using namespace fusewake;

namespace {

std::vector<fs::path> session_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .jsonl sessions in " + dir.string());
  return files;
}

std::vector<Session> load_sessions(const fs::path& dir) {
  std::vector<Session> out;
  for (const auto& f : session_files(dir)) {
    try {
      out.push_back(load_session(f));
    } catch (const DataError& e) {
      throw DataError(f.filename().string() + ": " + e.what());
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fusewake: dual-sensing drowsiness detection pipeline"};
  app.require_subcommand(1);

  std::uint64_t gen_seed = 42;
  std::size_t gen_sessions = 0, gen_subjects = 0;
  double gen_duration = 300.0;
  std::string gen_out, gen_params;
  auto* gen = app.add_subcommand("generate", "Write seeded synthetic sessions");
  gen->add_option("--seed", gen_seed, "Base seed")->required();
  gen->add_option("--sessions", gen_sessions, "Number of sessions")->required()->check(CLI::PositiveNumber);
  gen->add_option("--subjects", gen_subjects, "Number of subjects")->required()->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--duration", gen_duration, "Session length in seconds");
  gen->add_option("--params", gen_params, "Generator parameter JSON file");

  std::string train_data, train_config, train_out;
  auto* train = app.add_subcommand("train", "Train a model bundle");
  train->add_option("--data", train_data, "Session directory")->required();
  train->add_option("--config", train_config, "Run configuration JSON");
  train->add_option("--out", train_out, "Model bundle path")->required();

  std::string eval_model, eval_data, eval_report, eval_subset = "test";
  auto* ev = app.add_subcommand("eval", "Evaluate a model bundle");
  ev->add_option("--model", eval_model, "Model bundle")->required();
  ev->add_option("--data", eval_data, "Session directory")->required();
  ev->add_option("--report", eval_report, "Report path (JSON; CSV written alongside)")->required();
  ev->add_option("--subset", eval_subset, "Sessions to evaluate")->check(CLI::IsMember({"test", "all"}));

  std::string stream_model, stream_session;
  bool stream_fast = false;
  auto* st = app.add_subcommand("stream", "Replay a session and emit score lines");
  st->add_option("--model", stream_model, "Model bundle")->required();
  st->add_option("--session", stream_session, "Session file")->required();
  st->add_flag("--fast", stream_fast, "Do not pace output to the session clock");

  std::string bench_model, bench_session;
  auto* bench = app.add_subcommand("bench", "Per-frame latency benchmark");
  bench->add_option("--model", bench_model, "Model bundle")->required();
  bench->add_option("--session", bench_session, "Session file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*gen) {
      synth::GenParams params = synth::GenParams::defaults();
      if (!gen_params.empty()) {
        json j;
        try {
          j = json::parse(read_text(gen_params));
        } catch (const json::parse_error& e) {
          throw UsageError(std::string("malformed generator parameters: ") + e.what());
        }
        from_json(j, params);
      }
      const auto sessions = synth::generate_dataset(gen_seed, gen_sessions, gen_subjects, params, gen_duration);
      fs::create_directories(gen_out);
      for (const auto& s : sessions) write_session(s, fs::path(gen_out) / (s.id + ".jsonl"));
    } else if (*train) {
      const RunConfig cfg = train_config.empty() ? RunConfig{} : load_config(train_config);
      const auto sessions = load_sessions(train_data);
      pipeline::write_bundle(pipeline::train_bundle(sessions, cfg), train_out);
    } else if (*ev) {
      const auto bundle = pipeline::load_bundle(eval_model);
      const auto sessions = load_sessions(eval_data);
      std::vector<Session> chosen;
      if (eval_subset == "test") {
        for (auto i : pipeline::test_sessions(bundle, sessions)) chosen.push_back(sessions[i]);
      } else {
        chosen = sessions;
      }
      const auto records = pipeline::extract_dataset(chosen, bundle.config);
      const auto report = pipeline::evaluate_records(bundle, records, eval_subset);
      fs::path json_path = eval_report, csv_path = eval_report;
      if (json_path.extension() == ".csv") {
        json_path.replace_extension(".json");
      } else {
        csv_path.replace_extension(".csv");
      }
      write_text(json_path, pipeline::to_json(report).dump(2) + "\n");
      write_text(csv_path, pipeline::report_csv(report));
    } else if (*st) {
      const auto bundle = pipeline::load_bundle(stream_model);
      pipeline::stream_session(bundle, load_session(stream_session), std::cout, stream_fast);
    } else if (*bench) {
      const auto bundle = pipeline::load_bundle(bench_model);
      json j = pipeline::latency_benchmark(bundle, load_session(bench_session));
      std::cout << j.dump(2) << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
