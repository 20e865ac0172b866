#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "ghlfd/errors.hpp"
#include "ghlfd/parallel.hpp"
#include "ghlfd/pipeline.hpp"
#include "ghlfd/run_config.hpp"

namespace fs = std::filesystem;

namespace ghlfd::cli {

namespace {

// Flags shared by the subcommands. Applied after the config file so they
// win over it.
struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> w;
  std::optional<double> dropout;
  std::optional<double> threshold;
  std::optional<double> quantile;
  std::optional<double> halflife;
  std::optional<std::string> channels;
  std::size_t jobs = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "extra KEY=VALUE setting (repeatable)");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--w", f.w, "batch length in samples");
  cmd->add_option("--dropout", f.dropout, "dropout probability between LSTM layers");
  cmd->add_option("--threshold", f.threshold, "detection threshold (overrides the fitted one)");
  cmd->add_option("--quantile", f.quantile, "quantile of held-out smoothed error used as threshold");
  cmd->add_option("--halflife", f.halflife, "EMA half-life in samples (default 2w)");
  cmd->add_option("--channels", f.channels, "comma-separated channel list");
  cmd->add_option("--jobs", f.jobs, "worker threads for independent traces/cells")->check(CLI::PositiveNumber);
}

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c;
  if (!f.config_file.empty()) apply_config_file(c, f.config_file);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set " + kv + ": expected KEY=VALUE");
    try {
      set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("--set: ") + e.what());
    }
  }
  if (f.seed) c.seed = *f.seed;
  if (f.w) c.pipeline.w = *f.w;
  if (f.dropout) c.pipeline.train.dropout_p = *f.dropout;
  if (f.threshold) c.threshold = *f.threshold;
  if (f.quantile) c.pipeline.quantile_q = *f.quantile;
  if (f.halflife) c.pipeline.halflife = *f.halflife;
  if (f.channels) set_config_value(c, "channels", *f.channels);
  c.finalize();
  return c;
}

// Output directories may be new, but their parent must exist.
void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  if (fs::is_directory(dir)) return;
  const fs::path parent = fs::absolute(dir).parent_path();
  if (!fs::is_directory(parent)) throw DataError(dir.string() + ": parent directory does not exist");
  if (!fs::create_directory(dir, ec) && !fs::is_directory(dir))
    throw DataError(dir.string() + ": cannot create directory: " + ec.message());
}

void echo_config(const RunConfig& c, const fs::path& dir) {
  std::ofstream out(dir / "run.cfg");
  if (!out) throw DataError((dir / "run.cfg").string() + ": cannot open file for writing");
  out << "# effective configuration of this run\n" << to_config_text(c);
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open file for writing");
  out << j.dump(2) << '\n';
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

// Reads a trace and checks it carries every channel the model expects.
TimeSeries read_for_model(const fs::path& path, const std::vector<std::string>& channels) {
  TimeSeries s = read_csv(path);
  std::vector<std::string> missing;
  for (const auto& c : channels)
    if (!s.has_channel(c)) missing.push_back(c);
  if (!missing.empty()) {
    throw DataError(path.string() + ": channel mismatch: model expects [" + join(channels) + "], file has [" +
                    join(s.channel_names()) + "]; missing [" + join(missing) + "]");
  }
  return s;
}

// Expands directories into their labeled traces: manifest attack entries
// when a manifest is present, otherwise every *.csv in name order.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (!fs::is_directory(p)) {
      if (!fs::exists(p)) throw DataError(in + ": no such file");
      out.push_back(p);
      continue;
    }
    std::vector<fs::path> found;
    if (fs::exists(p / "manifest.json")) {
      std::ifstream mf(p / "manifest.json");
      const auto j = nlohmann::json::parse(mf, nullptr, false);
      if (j.is_discarded() || !j.contains("traces")) throw DataError((p / "manifest.json").string() + ": malformed");
      for (const auto& t : j["traces"])
        if (!t["attack"].is_null()) found.push_back(p / t["file"].get<std::string>());
    } else {
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
      std::sort(found.begin(), found.end());
    }
    if (found.empty()) throw DataError(in + ": no trace files found");
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

std::vector<LabeledTrace> load_labeled(const std::vector<fs::path>& files, const std::vector<std::string>& channels,
                                       std::size_t jobs) {
  std::vector<LabeledTrace> traces(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t k) {
    const TimeSeries s = read_for_model(files[k], channels);
    if (!s.has_channel(kDangerChannel))
      throw DataError(files[k].string() + ": no " + std::string(kDangerChannel) + " label column");
    traces[k] = LabeledTrace::from_csv_series(s, channels);
  });
  return traces;
}

std::vector<std::size_t> parse_sizes(const std::string& flag, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t v = 0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (r.ec != std::errc() || r.ptr != item.data() + item.size() || v == 0)
      throw ConfigError(flag + ": bad entry \"" + item + "\"");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

std::vector<double> parse_doubles(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    double v = 0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (r.ec != std::errc() || r.ptr != item.data() + item.size()) throw ConfigError(flag + ": bad entry \"" + item + "\"");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

// Prefixes data/numeric errors raised while processing `file` with its name.
template <class Fn>
auto for_file(const std::string& file, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(file + ": " + e.what());
  } catch (const DataError& e) {
    const std::string msg = e.what();
    if (msg.rfind(file, 0) == 0) throw;
    throw DataError(file + ": " + msg);
  }
}

// ---- simulate

struct SimulateArgs {
  CommonFlags common;
  std::string out;
  bool normal = false;
  std::optional<std::string> attack;
  std::optional<std::size_t> count;
  std::optional<double> horizon;
};

int cmd_simulate(const SimulateArgs& a) {
  RunConfig c = resolve(a.common);
  if (a.attack) c.campaign.attack_kind = parse_attack_kind(*a.attack);
  if (a.count) c.campaign.attack_count = *a.count;
  const bool want_normal = a.normal || !a.attack;
  const bool want_attacks = a.attack.has_value() || !a.normal;
  if (a.horizon) {
    if (want_normal) c.campaign.normal_horizon = *a.horizon;
    if (want_attacks) c.campaign.attack_horizon = *a.horizon;
  }
  c.finalize();
  const fs::path dir(a.out);
  prepare_out_dir(dir);

  struct Job {
    std::string file;
    std::uint64_t seed;
    double horizon;
    std::optional<AttackSpec> attack;
  };
  std::vector<Job> jobs;
  if (want_normal) jobs.push_back({"normal.csv", normal_trace_seed(c), c.campaign.normal_horizon, std::nullopt});
  if (want_attacks) {
    const auto specs = random_attacks(c.campaign.attack_kind, effective_range(c), c.campaign.attack_count,
                                      c.campaign.attack_horizon, c.seed);
    for (std::size_t k = 0; k < specs.size(); ++k) {
      char name[64];
      std::snprintf(name, sizeof name, "attack_%s_%03zu.csv", to_string(specs[k].kind), k);
      jobs.push_back({name, attack_trace_seed(c, k), c.campaign.attack_horizon, specs[k]});
    }
  }
  std::vector<std::size_t> rows(jobs.size());
  parallel_for(jobs.size(), a.common.jobs, [&](std::size_t k) {
    const auto trace = simulate(c.plant, jobs[k].horizon, jobs[k].attack, jobs[k].seed);
    write_csv(trace.to_csv_series(), dir / jobs[k].file);
    rows[k] = trace.series.length();
  });

  nlohmann::json manifest;
  manifest["seed"] = c.seed;
  manifest["config"] = "run.cfg";
  manifest["traces"] = nlohmann::json::array();
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    nlohmann::json t;
    t["file"] = jobs[k].file;
    t["seed"] = jobs[k].seed;
    t["horizon"] = jobs[k].horizon;
    t["rows"] = rows[k];
    if (jobs[k].attack) {
      t["attack"] = {{"kind", to_string(jobs[k].attack->kind)},
                     {"start_time", jobs[k].attack->start_time},
                     {"hacked_value", jobs[k].attack->hacked_value}};
    } else {
      t["attack"] = nullptr;
    }
    manifest["traces"].push_back(t);
  }
  write_json(manifest, dir / "manifest.json");
  echo_config(c, dir);
  std::cout << "wrote " << jobs.size() << " trace(s) to " << dir.string() << '\n';
  return kOk;
}

// ---- train

struct TrainArgs {
  CommonFlags common;
  std::string normal;
  std::string out;
  std::optional<int> epochs;
  std::optional<std::size_t> hidden;
};

int cmd_train(const TrainArgs& a) {
  RunConfig c = resolve(a.common);
  if (a.epochs) c.pipeline.train.epochs = *a.epochs;
  if (a.hidden) c.pipeline.hidden1 = c.pipeline.hidden2 = *a.hidden;
  c.pipeline.allow_unfitted_threshold = true;
  c.finalize();
  const fs::path dir(a.out);
  prepare_out_dir(dir);

  const TimeSeries normal = read_for_model(a.normal, c.pipeline.channels);
  LstmFit fit = for_file(a.normal, [&] { return fit_lstm_detector(normal, c.pipeline); });
  if (c.threshold) fit.model.detector.threshold = *c.threshold;

  save_model(fit.model, dir / "model.bin");
  save_detector_json(fit.model, dir / "detector.json");
  save_norm_stats(fit.model.norm, dir / "norm.json");
  {
    std::ofstream loss(dir / "loss.csv");
    loss << "epoch,loss\n";
    for (std::size_t e = 0; e < fit.history.epoch_loss.size(); ++e)
      loss << e + 1 << ',' << num(fit.history.epoch_loss[e]) << '\n';
  }
  echo_config(c, dir);
  std::cout << "trained " << fit.history.epoch_loss.size() << " epoch(s)"
            << (fit.history.early_stopped ? " (early stop)" : "")
            << ", final loss " << fit.history.epoch_loss.back() << '\n';
  if (fit.model.detector.has_threshold()) {
    std::cout << "threshold " << fit.model.detector.threshold << " (q=" << c.pipeline.quantile_q
              << "), held-out MSE " << fit.model.holdout_mse << '\n';
  } else {
    std::cerr << "warning: " << a.normal << " is too short to hold out data for the threshold fit; "
              << "the model was trained on all of it and detect/eval will need --threshold\n";
  }
  return kOk;
}

// ---- detect

struct DetectArgs {
  CommonFlags common;
  std::string model;
  std::string out;
  std::vector<std::string> inputs;
};

double operating_threshold(const TrainedModel& model, const RunConfig& c) {
  if (c.threshold) return *c.threshold;
  if (!model.detector.has_threshold())
    throw ConfigError("model has no fitted threshold (training trace too short); pass --threshold");
  return model.detector.threshold;
}

int cmd_detect(const DetectArgs& a) {
  const RunConfig c = resolve(a.common);
  const TrainedModel model = load_model(a.model);
  const double thr = operating_threshold(model, c);
  const fs::path dir(a.out);
  prepare_out_dir(dir);

  struct Summary {
    std::size_t scored = 0, faults = 0;
    std::optional<std::size_t> first;
    double first_time = 0.0;
    std::string out_name;
  };
  std::vector<Summary> sums(a.inputs.size());
  parallel_for(a.inputs.size(), a.common.jobs, [&](std::size_t k) {
    const fs::path in(a.inputs[k]);
    const TimeSeries s = read_for_model(in, model.norm.channels);
    const LabeledTrace trace = LabeledTrace::from_csv_series(s, model.norm.channels);
    const TraceDetail d = for_file(a.inputs[k], [&] { return detail_trace(model, trace); });
    const auto decisions = decide(d.errors.smoothed, thr);
    auto& sum = sums[k];
    sum.out_name = in.stem().string() + ".errors.csv";
    std::ofstream out(dir / sum.out_name);
    if (!out) throw DataError((dir / sum.out_name).string() + ": cannot open file for writing");
    out << "row,time,raw,smoothed,fault\n";
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      const std::size_t row = d.errors.valid_from + i;
      out << row << ',' << num(trace.time[row]) << ',' << num(d.errors.raw[i]) << ',' << num(d.errors.smoothed[i])
          << ',' << int(decisions[i]) << '\n';
      if (decisions[i]) {
        ++sum.faults;
        if (!sum.first) {
          sum.first = row;
          sum.first_time = trace.time[row];
        }
      }
    }
    sum.scored = decisions.size();
  });

  std::ofstream summary(dir / "summary.csv");
  summary << "input,output,scored_points,fault_points,first_fault_row,first_fault_time\n";
  for (std::size_t k = 0; k < sums.size(); ++k) {
    const auto& s = sums[k];
    summary << a.inputs[k] << ',' << s.out_name << ',' << s.scored << ',' << s.faults << ',';
    if (s.first) summary << *s.first << ',' << num(s.first_time);
    else summary << ',';
    summary << '\n';
    std::cout << a.inputs[k] << ": " << s.faults << "/" << s.scored << " points above " << thr;
    if (s.first) std::cout << ", first at t=" << s.first_time;
    std::cout << '\n';
  }
  RunConfig echoed = c;
  echoed.threshold = thr;
  echo_config(echoed, dir);
  return kOk;
}

// ---- eval

struct EvalArgs {
  CommonFlags common;
  std::string model;
  std::string out;
  std::string baseline_normal;
  std::vector<std::string> tests;
};

void write_per_trace(const EvalReport& report, std::size_t row, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open file for writing");
  out << "trace,tp,fp,fn,tn,precision,recall,f1\n";
  for (std::size_t t = 0; t < report.trace_names.size(); ++t) {
    const auto& r = report.per_trace[t][row];
    out << report.trace_names[t] << ',' << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ','
        << r.counts.tn << ',' << num(r.precision) << ',' << num(r.recall) << ',' << num(r.f1) << '\n';
  }
}

std::string describe(const char* label, const ScoreRow& r) {
  char line[200];
  std::snprintf(line, sizeof line, "%-14s thr %-10.4g P %.3f  R %.3f  F1 %.3f%s\n", label, r.threshold, r.precision,
                r.recall, r.f1, r.precision_undefined ? "  (no detections)" : "");
  return line;
}

int cmd_eval(const EvalArgs& a) {
  RunConfig c = resolve(a.common);
  const TrainedModel model = load_model(a.model);
  const double thr = operating_threshold(model, c);
  c.pipeline.w = model.batch_length;
  c.pipeline.channels = model.norm.channels;
  c.pipeline.halflife = model.detector.effective_halflife(model.batch_length);
  c.pipeline.burn_in_batches = model.detector.burn_in_batches;
  const fs::path dir(a.out);
  prepare_out_dir(dir);

  const auto files = expand_inputs(a.tests);
  const auto traces = load_labeled(files, model.norm.channels, a.common.jobs);
  std::vector<TraceErrors> errs(traces.size());
  parallel_for(traces.size(), a.common.jobs, [&](std::size_t k) {
    errs[k] = for_file(files[k].string(), [&] { return score_trace(model, traces[k], files[k].filename().string()); });
  });
  const auto lstm = evaluate_method(errs, thr, c.pipeline);
  write_report_csv(lstm.report, dir / "lstm_report.csv");
  write_sweep_csv(lstm.report, dir / "lstm_sweep.csv");
  write_per_trace(lstm.report, 0, dir / "lstm_per_trace.csv");

  std::ostringstream text;
  text << traces.size() << " trace(s), interval length " << c.pipeline.effective_interval() << "\n";
  text << describe("LSTM @operating", lstm.at_fitted) << describe("LSTM best", lstm.best);
  if (!a.baseline_normal.empty()) {
    const TimeSeries normal = read_for_model(a.baseline_normal, model.norm.channels);
    const PcaFit pca = for_file(a.baseline_normal, [&] { return fit_pca_detector(normal, c.pipeline); });
    std::vector<TraceErrors> perrs(traces.size());
    parallel_for(traces.size(), a.common.jobs, [&](std::size_t k) {
      perrs[k] = score_trace(pca.detector, traces[k], files[k].filename().string(), c.pipeline);
    });
    const auto base = evaluate_method(perrs, pca.detector.threshold, c.pipeline);
    write_report_csv(base.report, dir / "pca_report.csv");
    write_sweep_csv(base.report, dir / "pca_sweep.csv");
    text << describe("PCA @fitted", base.at_fitted) << describe("PCA best", base.best);
    text << "PCA components " << pca.detector.components() << " (explained "
         << pca.detector.explained_fraction << ")\n";
  }
  std::ofstream(dir / "summary.txt") << text.str();
  std::cout << text.str();
  RunConfig echoed = c;
  echoed.threshold = thr;
  echo_config(echoed, dir);
  return kOk;
}

// ---- study

struct StudyArgs {
  CommonFlags common;
  std::string normal;
  std::string out;
  std::string ws = "30,60,90,120,150,180";
  std::string dropouts = "0.5,0.1,0.01";
  std::vector<std::string> tests;
  std::optional<int> epochs;
  std::optional<std::size_t> hidden;
};

int cmd_study(const StudyArgs& a) {
  RunConfig c = resolve(a.common);
  if (a.epochs) c.pipeline.train.epochs = *a.epochs;
  if (a.hidden) c.pipeline.hidden1 = c.pipeline.hidden2 = *a.hidden;
  c.finalize();
  const auto ws = parse_sizes("--ws", a.ws);
  const auto ps = parse_doubles("--dropouts", a.dropouts);
  const fs::path dir(a.out);
  prepare_out_dir(dir);

  const TimeSeries normal = read_for_model(a.normal, c.pipeline.channels);
  const auto traces = load_labeled(expand_inputs(a.tests), c.pipeline.channels, a.common.jobs);
  const auto rows = for_file(a.normal, [&] { return run_study(normal, traces, c.pipeline, ws, ps, a.common.jobs); });
  write_study_csv(rows, dir / "study.csv");
  const std::string table = format_study(rows);
  std::ofstream(dir / "study.txt") << table;
  std::cout << table;
  echo_config(c, dir);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Fault detection on a simulated tank-heating plant with a stateful LSTM forecaster", "ghlfd"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ghlfd 0.1.0");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "generate a normal trace and/or attack traces");
  add_common(s, sim.common);
  s->add_option("--out", sim.out, "output directory")->required();
  s->add_flag("--normal", sim.normal, "generate the normal training trace");
  s->add_option("--attack", sim.attack, "attack kind: max-rt-level, max-ht-temp, pump-freq, relax-time");
  s->add_option("--count", sim.count, "number of attack traces");
  s->add_option("--horizon", sim.horizon, "simulated seconds per trace");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train the forecaster and fit the threshold on a normal trace");
  add_common(t, tr.common);
  t->add_option("--normal", tr.normal, "normal trace CSV")->required()->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "output directory")->required();
  t->add_option("--epochs", tr.epochs, "maximum epochs");
  t->add_option("--hidden", tr.hidden, "hidden size of both LSTM layers");

  DetectArgs det;
  auto* d = app.add_subcommand("detect", "write error and fault-decision series for each input trace");
  add_common(d, det.common);
  d->add_option("--model", det.model, "model file")->required()->check(CLI::ExistingFile);
  d->add_option("--out", det.out, "output directory")->required();
  d->add_option("inputs", det.inputs, "trace CSVs")->required()->check(CLI::ExistingFile);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score detections against DANGER labels");
  add_common(e, ev.common);
  e->add_option("--model", ev.model, "model file")->required()->check(CLI::ExistingFile);
  e->add_option("--out", ev.out, "output directory")->required();
  e->add_option("--baseline-normal", ev.baseline_normal, "normal trace for the PCA baseline")
      ->check(CLI::ExistingFile);
  e->add_option("tests", ev.tests, "labeled trace CSVs or directories")->required();

  StudyArgs st;
  auto* y = app.add_subcommand("study", "grid over batch length and dropout");
  add_common(y, st.common);
  y->add_option("--normal", st.normal, "normal trace CSV")->required()->check(CLI::ExistingFile);
  y->add_option("--out", st.out, "output directory")->required();
  y->add_option("--ws", st.ws, "comma-separated batch lengths");
  y->add_option("--dropouts", st.dropouts, "comma-separated dropout probabilities");
  y->add_option("--epochs", st.epochs, "maximum epochs");
  y->add_option("--hidden", st.hidden, "hidden size of both LSTM layers");
  y->add_option("tests", st.tests, "labeled trace CSVs or directories")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim);
    if (t->parsed()) return cmd_train(tr);
    if (d->parsed()) return cmd_detect(det);
    if (e->parsed()) return cmd_eval(ev);
    if (y->parsed()) return cmd_study(st);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  } catch (const NumericError& err) {
    std::cerr << "numeric failure: " << err.what() << '\n';
    return kNumericError;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kDataError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace ghlfd::cli
