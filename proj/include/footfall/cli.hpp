#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "footfall/data_io.hpp"
#include "footfall/evaluation.hpp"
#include "footfall/nn/weights_io.hpp"
#include "footfall/pipeline.hpp"
#include "footfall/realtime/detector.hpp"
#include "footfall/realtime/osc.hpp"
#include "footfall/realtime/replay.hpp"
#include "footfall/realtime/telemetry.hpp"
#include "footfall/realtime/ws_server.hpp"
#include "footfall/synth.hpp"

namespace footfall::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kDataDirEnv = "IOLA_DATA_DIR";

// A required input that does not exist. Reported with its path, exit 1.
class MissingFileError : public std::runtime_error {
 public:
  explicit MissingFileError(const fs::path& p) : std::runtime_error("missing file: " + p.string()), path_(p) {}
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

enum class ModelKind { ConvLstm, Cnn, Logistic };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Cnn: return "cnn";
    case ModelKind::Logistic: return "logistic";
    default: return "convlstm";
  }
}

struct Options {
  std::string command = "train";
  std::vector<std::string> train_csv;
  std::vector<std::string> test_csv;
  std::size_t window = 600;
  std::size_t stride = 150;
  std::size_t batch = 64;
  double lr = 1e-3;
  std::size_t epochs = 50;
  double oversample = 10.0;
  std::uint64_t seed = 42;
  std::size_t hidden = 128;
  bool no_test = false;
  bool export_only = false;
  bool window_given = false;
  bool stride_given = false;
  std::string osc_dest;
  std::string listen;
  double rate = 0.0;
  std::string model = "convlstm";
  std::string out_dir = "artifacts";
  std::string data_dir;  // synth output; defaults to IOLA_DATA_DIR
  std::size_t sessions = 8;
  double duration_s = 60.0;
  std::size_t loops = 1;
  std::size_t score_tolerance = kDefaultScoreTolerance;
  DetectorConfig detector;
};

// Files produced by train/export and read by test/replay/serve.
struct ArtifactPaths {
  fs::path dir;
  fs::path weights() const { return dir / "weights.json"; }
  fs::path metadata() const { return dir / "metadata.json"; }
  fs::path epoch_log() const { return dir / "epochs.csv"; }
  fs::path report() const { return dir / "report.json"; }
  fs::path checkpoint_weights() const { return dir / "checkpoint" / "weights.json"; }
  fs::path checkpoint_metadata() const { return dir / "checkpoint" / "metadata.json"; }
};

inline fs::path default_data_dir() {
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return env;
  return "data";
}

inline void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw MissingFileError(p);
}

// Every *.csv directly inside `dir`, sorted by name.
inline std::vector<fs::path> csv_files_in(const fs::path& dir) {
  require_file(dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw MissingFileError(dir / "*.csv");
  return out;
}

// Explicit paths (files or directories), or the default subdirectory of the
// data dir.
inline std::vector<fs::path> resolve_inputs(const std::vector<std::string>& given, const std::string& subdir) {
  if (given.empty()) return csv_files_in(default_data_dir() / subdir);
  std::vector<fs::path> out;
  for (const auto& g : given) {
    const fs::path p(g);
    require_file(p);
    if (fs::is_directory(p)) {
      auto inner = csv_files_in(p);
      out.insert(out.end(), inner.begin(), inner.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

inline std::vector<RawSession> load_sessions(const std::vector<fs::path>& files) {
  std::vector<RawSession> out;
  for (const auto& f : files) out.push_back(load_session(f));
  return out;
}

inline ModelKind parse_model(const std::string& s) {
  if (s == "convlstm") return ModelKind::ConvLstm;
  if (s == "cnn") return ModelKind::Cnn;
  if (s == "logistic") return ModelKind::Logistic;
  throw ValidationError("unknown model '" + s + "'");
}

inline BaselineKind baseline_kind(ModelKind k) { return k == ModelKind::Cnn ? BaselineKind::Cnn : BaselineKind::Logistic; }

inline TrainConfig train_config(const Options& o, ModelKind kind) {
  TrainConfig c;
  c.batch_size = o.batch;
  c.lr = o.lr;
  c.epochs = o.epochs;
  c.oversample = o.oversample;
  c.seed = o.seed;
  c.hidden = o.hidden;
  c.windowing = {o.window, o.stride};
  if (kind != ModelKind::ConvLstm) {
    const BaselineConfig b;
    c.windowing = {o.window_given ? o.window : b.train_windowing.window_size,
                   o.stride_given ? o.stride : b.train_windowing.stride};
  }
  return c;
}

inline void emit(std::ostream& out, const json& j) { out << j.dump() << '\n' << std::flush; }

// ---------------------------------------------------------------------------
// loaded models

struct LoadedModel {
  ModelKind kind = ModelKind::ConvLstm;
  std::optional<nn::ConvLstm> convlstm;
  std::optional<BaselineRun> baseline;
  Metadata metadata;
};

inline LoadedModel load_model(const ArtifactPaths& paths, ModelKind kind) {
  require_file(paths.metadata());
  require_file(paths.weights());
  LoadedModel m;
  m.kind = kind;
  m.metadata = load_metadata(paths.metadata());
  if (kind == ModelKind::ConvLstm) {
    m.convlstm = nn::load_convlstm(paths.weights());
  } else {
    BaselineRun run{baseline_kind(kind), {}, {}, {}, m.metadata, BaselineConfig{}.eval_stride};
    nn::load_weights(paths.weights(), kind == ModelKind::Cnn ? run.cnn.params() : run.logistic.params());
    m.baseline = std::move(run);
  }
  return m;
}

inline EvaluationResult evaluate(const LoadedModel& m, const RawSession& s) {
  if (m.convlstm) return evaluate_convlstm(*m.convlstm, m.metadata, s);
  return evaluate_baseline(*m.baseline, s);
}

// Sums counts over sessions, then recomputes the metrics.
inline ToleranceReport pooled_report(const std::vector<ToleranceReport>& parts) {
  ToleranceReport out = parts.at(0);
  for (std::size_t i = 1; i < parts.size(); ++i)
    for (std::size_t r = 0; r < out.size(); ++r) {
      out[r].counts.tp += parts[i][r].counts.tp;
      out[r].counts.fn += parts[i][r].counts.fn;
      out[r].counts.fp += parts[i][r].counts.fp;
    }
  for (auto& row : out) row.metrics = prf(row.counts);
  return out;
}

// ---------------------------------------------------------------------------
// stages

inline int do_test(const Options& o, std::ostream& out) {
  const ArtifactPaths paths{o.out_dir};
  const LoadedModel m = load_model(paths, parse_model(o.model));
  const auto files = resolve_inputs(o.test_csv, "test");
  std::vector<ToleranceReport> parts;
  for (const auto& f : files) parts.push_back(evaluate(m, load_session(f)).report);
  const json report = report_to_json(pooled_report(parts));
  nn::write_text_file(paths.report(), report.dump(2) + "\n");
  out << report.dump() << '\n';
  return kExitOk;
}

inline void export_checkpoint(const ArtifactPaths& paths) {
  require_file(paths.checkpoint_weights());
  require_file(paths.checkpoint_metadata());
  const Metadata meta = load_metadata(paths.checkpoint_metadata());
  // Copy through the loaders so a damaged checkpoint is caught here.
  const json weights = nn::parse_json(nn::read_text_file(paths.checkpoint_weights()), "checkpoint weights");
  if (!weights.is_object()) throw FormatError("checkpoint weights: expected a JSON object");
  nn::write_text_file(paths.weights(), weights.dump() + "\n");
  save_metadata(meta, paths.metadata());
}

inline int do_train(const Options& o, std::ostream& out) {
  const ModelKind kind = parse_model(o.model);
  const ArtifactPaths paths{o.out_dir};
  if (o.export_only) {
    export_checkpoint(paths);
    emit(out, {{"event", "export"}, {"weights", paths.weights().string()}, {"metadata", paths.metadata().string()}});
    return kExitOk;
  }

  const TrainConfig cfg = train_config(o, kind);
  cfg.validate();
  const auto train_files = resolve_inputs(o.train_csv, "train");
  // Check the test input up front rather than after a long training run.
  std::vector<fs::path> test_files;
  if (!o.no_test) test_files = resolve_inputs(o.test_csv, "test");
  const auto sessions = load_sessions(train_files);

  fs::create_directories(paths.dir / "checkpoint");
  fs::remove(paths.checkpoint_weights());
  fs::remove(paths.checkpoint_metadata());
  std::ofstream log(paths.epoch_log(), std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + paths.epoch_log().string());
  log << epoch_csv_header() << '\n';

  const BaselineConfig bcfg{kind == ModelKind::ConvLstm ? BaselineKind::Cnn : baseline_kind(kind), cfg.windowing,
                            BaselineConfig{}.eval_stride};
  PreparedData data = kind == ModelKind::ConvLstm
                          ? prepare_data(sessions, cfg.windowing, cfg.val_fraction, cfg.seed)
                          : prepare_baseline_data(sessions, bcfg, cfg);
  const ScalerStats scaler = data.scaler;
  emit(out, {{"event", "data"},
             {"model", to_string(kind)},
             {"train_files", train_files.size()},
             {"train_windows", data.train.size()},
             {"val_windows", data.val.size()},
             {"split", data.split_by_files ? "file" : "window"}});

  TrainCallbacks cb;
  cb.on_epoch = [&](const EpochReport& r) {
    log << epoch_csv_row(r) << '\n' << std::flush;
    json j = epoch_json(r);
    j["model"] = to_string(kind);
    j["skipped_batches"] = r.skipped_batches;
    emit(out, j);
  };
  cb.on_checkpoint = [&](const nn::ParamSet& params, double threshold, std::size_t epoch) {
    export_model(params, scaler, threshold, cfg.windowing,
                 {paths.checkpoint_weights(), paths.checkpoint_metadata()});
    emit(out, {{"event", "checkpoint"}, {"epoch", epoch}, {"threshold", threshold}});
  };

  TrainResult result;
  if (kind == ModelKind::ConvLstm) result = train_convlstm(std::move(data), cfg, cb).result;
  else result = train_baseline(std::move(data), bcfg, cfg, cb).result;
  log.close();

  if (!result.has_checkpoint) throw StateError("no checkpoint to export (did training run any epochs?)");
  export_checkpoint(paths);
  emit(out, {{"event", "export"},
             {"weights", paths.weights().string()},
             {"metadata", paths.metadata().string()},
             {"best_val_f1", result.best_f1},
             {"threshold", result.threshold}});
  if (o.no_test) return kExitOk;

  Options t = o;
  t.test_csv.clear();
  for (const auto& f : test_files) t.test_csv.push_back(f.string());
  return do_test(t, out);
}

inline int do_synth(const Options& o, std::ostream& out) {
  const fs::path root = o.data_dir.empty() ? default_data_dir() : fs::path(o.data_dir);
  fs::create_directories(root / "train");
  fs::create_directories(root / "test");
  json files = json::array();
  auto write = [&](std::uint64_t seed, const fs::path& p) {
    SynthConfig c;
    c.duration_s = o.duration_s;
    c.seed = seed;
    const RawSession s = generate_session(c);
    save_session(s, p);
    files.push_back({{"path", p.string()}, {"seed", seed}, {"events", s.events.size()}});
  };
  for (std::size_t i = 0; i < o.sessions; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "session_%03zu.csv", i);
    write(o.seed + i, root / "train" / name);
  }
  write(o.seed + 1000, root / "test" / "session_000.csv");
  emit(out, {{"event", "synth"}, {"files", files}});
  return kExitOk;
}

// Detector settings shared by every replay pass of one serve/replay run, so
// a value set by a client survives into the next pass.
class LiveControl {
 public:
  LiveControl(const DetectorConfig& initial, std::size_t window) : cfg_(initial), window_(window) {}

  SetResult set_param(std::string_view name, double value) {
    std::lock_guard lock(mutex_);
    SetResult r = apply_param(cfg_, name, value, window_);
    if (!r.ok) return r;
    cfg_ = r.config;
    if (active_) active_->set_param(name, value);
    return r;
  }

  DetectorConfig config() const {
    std::lock_guard lock(mutex_);
    return cfg_;
  }

  void attach(StreamingDetector* d) {
    std::lock_guard lock(mutex_);
    active_ = d;
  }

 private:
  mutable std::mutex mutex_;
  DetectorConfig cfg_;
  std::size_t window_;
  StreamingDetector* active_ = nullptr;
};

inline int do_replay(const Options& o, std::ostream& out, const std::atomic<bool>* stop, bool serve) {
  if (o.rate < 0) throw ValidationError("--rate must be >= 0");
  const ArtifactPaths paths{o.out_dir};
  const LoadedModel m = load_model(paths, ModelKind::ConvLstm);
  if (auto err = config_error(o.detector, m.metadata.window_size); !err.empty())
    throw ValidationError("detector: " + err);
  const auto files = resolve_inputs(o.test_csv, "test");
  const RawSession session = load_session(files.front());

  std::optional<OscSender> osc;
  if (!o.osc_dest.empty()) osc.emplace(parse_host_port(o.osc_dest));

  LiveControl control(o.detector, m.metadata.window_size);
  TelemetryHub hub;
  std::optional<TelemetryServer> server;
  const std::string listen = serve && o.listen.empty() ? "127.0.0.1:8765" : o.listen;
  if (!listen.empty()) {
    server.emplace(
        hub, [&] { return hello_message(control.config(), metadata_summary(m.metadata, m.convlstm->hidden())); },
        [&](std::string_view text) { return handle_client_message(control, text); });
    server->start(parse_host_port(listen));
    emit(out, {{"event", "listening"}, {"port", server->bound_port()}});
  }

  const std::size_t passes = serve ? o.loops : 1;
  for (std::size_t pass = 0; passes == 0 || pass < passes; ++pass) {
    if (stop && stop->load()) break;
    StreamingDetector det(*m.convlstm, m.metadata, control.config());
    control.attach(&det);
    ReplayCallbacks cb = hub_callbacks(hub);
    cb.on_event = [&](const DetectionEvent& e, std::size_t total) {
      hub.publish_event(e, total);
      if (osc) osc->send(e.timestamp_ms);
      emit(out, {{"event", "detection"}, {"t", e.timestamp_ms}, {"confidence", e.confidence}, {"total", total}});
    };
    const ReplayResult r = replay(session, det, {o.rate, o.score_tolerance, stop}, cb);
    control.attach(nullptr);
    emit(out, {{"event", "replay"},
               {"pass", pass},
               {"session", files.front().string()},
               {"samples", r.samples_fed},
               {"inferences", r.stats.inferences},
               {"detections", r.events.size()},
               {"tolerance", o.score_tolerance},
               {"tp", r.counts.tp},
               {"fn", r.counts.fn},
               {"fp", r.counts.fp},
               {"f1", r.metrics.f1},
               {"osc_sent", osc ? osc->sent() : 0},
               {"cancelled", r.cancelled}});
    if (r.cancelled) break;
  }
  if (server) server->stop();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// argument parsing

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"synth", "train", "test", "replay", "serve", "baseline"};
  return names;
}

inline void add_options(CLI::App& app, Options& o) {
  const std::string& cmd = o.command;
  const bool trains = cmd == "train" || cmd == "baseline";
  const bool uses_model = trains || cmd == "test" || cmd == "replay" || cmd == "serve";
  if (trains) {
    app.add_option("--train-csv", o.train_csv, "training session CSV file(s) or directories");
    app.add_option("--window", o.window, "window length in samples");
    app.add_option("--stride", o.stride, "window stride in samples");
    app.add_option("--batch", o.batch, "batch size");
    app.add_option("--lr", o.lr, "learning rate");
    app.add_option("--epochs", o.epochs, "training epochs");
    app.add_option("--oversample", o.oversample, "sampling weight of positive windows");
    app.add_option("--hidden", o.hidden, "LSTM hidden size");
    app.add_flag("--no-test", o.no_test, "skip the test stage");
    app.add_flag("--export-only", o.export_only, "export the saved checkpoint and stop");
  }
  if (trains || cmd == "synth") app.add_option("--seed", o.seed, "random seed");
  if (uses_model) {
    app.add_option("--test-csv", o.test_csv, "test session CSV file(s) or directories");
    app.add_option("--model", o.model, "model kind")->check(CLI::IsMember({"convlstm", "cnn", "logistic"}));
    app.add_option("--out-dir", o.out_dir, "artifact directory (weights, metadata, logs)");
  }
  if (cmd == "replay" || cmd == "serve") {
    app.add_option("--osc-dest", o.osc_dest, "send detections as OSC to host:port");
    app.add_option("--listen", o.listen, "serve WebSocket telemetry on host:port");
    app.add_option("--rate", o.rate, "replay speed (1 = real time, 0 = as fast as possible)");
    app.add_option("--score-tolerance", o.score_tolerance, "live scoring tolerance in samples");
    app.add_option("--sample-threshold", o.detector.sample_threshold, "p_t must exceed this for a hit");
    app.add_option("--window-threshold", o.detector.window_threshold, "p_win must exceed this for a hit");
    app.add_option("--inference-stride", o.detector.inference_stride, "samples between inferences");
    app.add_option("--hit-window", o.detector.hit_window, "decisions considered by the N-of-M filter (M)");
    app.add_option("--required-hits", o.detector.required_hits, "hits needed within the last M decisions (N)");
    app.add_option("--min-interval-ms", o.detector.min_interval_ms, "refractory period between detections");
  }
  if (cmd == "serve") app.add_option("--loops", o.loops, "replay passes, 0 = until interrupted");
  if (cmd == "synth") {
    app.add_option("--out-dir", o.data_dir, "output directory (default $IOLA_DATA_DIR or ./data)");
    app.add_option("--sessions", o.sessions, "number of training sessions");
    app.add_option("--duration", o.duration_s, "session length in seconds");
  }
}

inline std::string usage() {
  return "usage: footfall_cli [synth|train|test|replay|serve|baseline] [flags]\n"
         "  (no subcommand: train, export and test)\n"
         "  footfall_cli <subcommand> --help for the flags of a subcommand\n";
}

inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr,
               const std::atomic<bool>* stop = nullptr) {
  Options o;
  if (!args.empty() && !args.front().empty() && args.front()[0] != '-') {
    if (std::find(subcommands().begin(), subcommands().end(), args.front()) == subcommands().end()) {
      err << "unknown subcommand '" << args.front() << "'\n" << usage();
      return kExitUsage;
    }
    o.command = args.front();
    args.erase(args.begin());
  }
  if (o.command == "replay") o.rate = 0.0;
  if (o.command == "serve") o.rate = 1.0;
  if (o.command == "baseline") o.model = "cnn";

  CLI::App app("footfall detector: " + o.command);
  add_options(app, o);
  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << usage() << app.help();
    return kExitUsage;
  }
  auto given = [&](const char* name) {
    const CLI::Option* opt = app.get_option_no_throw(name);
    return opt && opt->count() > 0;
  };
  o.window_given = given("--window");
  o.stride_given = given("--stride");

  try {
    if (o.command == "synth") return do_synth(o, out);
    if (o.command == "test") return do_test(o, out);
    if (o.command == "replay") return do_replay(o, out, stop, false);
    if (o.command == "serve") return do_replay(o, out, stop, true);
    if (o.command == "baseline" && o.model == "convlstm") {
      err << "baseline: --model must be cnn or logistic\n";
      return kExitUsage;
    }
    return do_train(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace footfall::cli
