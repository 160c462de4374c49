#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "siads/siads.hpp"

using namespace siads;
namespace fs = std::filesystem;

namespace {

enum Exit : int { kClean = 0, kAnomalies = 1, kData = 2, kIo = 3, kUsage = 64 };

struct SignalFlags {
  std::uint32_t can_id{0x1F0};
  unsigned byte_offset{0};
  unsigned bit_length{16};
  double scale{0.01};
  double offset{0.0};
  std::string format{"auto"};

  SignalSpec spec() const {
    SignalSpec s;
    s.can_id = can_id;
    s.byte_offset = byte_offset;
    s.bit_length = bit_length;
    s.scale = scale;
    s.offset = offset;
    return s;
  }

  void add_to(CLI::App* app) {
    app->add_option("--format", format, "Trace format")->check(CLI::IsMember({"auto", "candump", "csv"}));
    app->add_option("--can-id", can_id, "Identifier carrying the signal (candump input)");
    app->add_option("--byte-offset", byte_offset, "First payload byte of the signal");
    app->add_option("--bit-length", bit_length, "Signal width in bits");
    app->add_option("--scale", scale, "Physical value per raw count");
    app->add_option("--offset", offset, "Physical value at raw zero");
  }
};

TraceFormat to_format(const std::string& s) {
  if (s == "candump") return TraceFormat::candump;
  if (s == "csv") return TraceFormat::csv;
  return TraceFormat::automatic;
}

std::vector<Sample> load_trace(const std::string& path, const SignalFlags& sig) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace '" + path + "'");
  auto parsed = parse_trace(in, to_format(sig.format));
  for (const auto& e : parsed.errors) std::cerr << "warning: " << path << ": " << e.message << " (skipped)\n";

  std::vector<Sample> samples;
  if (parsed.format == TraceFormat::candump) {
    auto decoded = decode_trace(parsed.frames, sig.spec());
    if (decoded.out_of_range)
      std::cerr << "warning: " << decoded.out_of_range << " decoded values outside the physical range\n";
    samples = std::move(decoded.samples);
  } else {
    samples = std::move(parsed.samples);
  }
  if (samples.size() < 2)
    throw DataError("trace '" + path + "' has fewer than 2 samples (" + std::to_string(samples.size()) + ")");
  return samples;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw IoError("failed writing '" + path + "'");
}

template <typename Fn>
void write_file(const std::string& path, Fn&& fn) {
  auto out = open_out(path);
  fn(out);
  close_out(out, path);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

void warn_out_of_range(const QuantizedSeries& s, const Quantizer& q) {
  if (s.out_of_range)
    std::cerr << "warning: " << s.out_of_range << " samples outside [" << q.min_value() << ", " << q.max_value()
              << "] were clamped to the edge bins\n";
}

// One candump frame per sample, laid out as described by `spec`.
void write_candump(std::ostream& out, std::span<const Sample> samples, const SignalSpec& spec) {
  spec.validate();
  const std::uint64_t max_raw = spec.bit_length == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << spec.bit_length) - 1;
  for (const auto& s : samples) {
    CanFrame f;
    f.timestamp = s.timestamp;
    f.bus = "vcan0";
    f.can_id = spec.can_id;
    f.extended = spec.can_id > 0x7FF;
    f.length = 8;
    const double raw_d = std::round((s.value - spec.offset) / spec.scale);
    const auto raw = std::min<std::uint64_t>(static_cast<std::uint64_t>(std::max(0.0, raw_d)), max_raw);
    const unsigned span = spec.byte_span();
    const std::uint64_t field = raw << (span * 8 - spec.bit_length);
    for (unsigned b = 0; b < span; ++b)
      f.payload[spec.byte_offset + b] = static_cast<std::uint8_t>(field >> (8 * (span - 1 - b)));
    out << format_candump_line(f) << '\n';
  }
}

// key=value lines become "--key value" arguments placed right after the
// subcommand, so anything given on the command line later wins.
std::vector<std::string> config_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::vector<std::string> args;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = std::string(detail::trim(line));
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
    auto key = std::string(detail::trim(std::string_view(text).substr(0, eq)));
    auto value = std::string(detail::trim(std::string_view(text).substr(eq + 1)));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key.empty()) throw UsageError(path + ":" + std::to_string(line_no) + ": empty key");
    if (value == "true") {
      args.push_back("--" + key);
    } else if (value != "false") {
      args.push_back("--" + key);
      args.push_back(value);
    }
  }
  return args;
}

bool given_on_command_line(const std::vector<std::string>& argv, const std::string& flag) {
  for (const auto& a : argv)
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  return false;
}

std::vector<std::string> expand_config(std::vector<std::string> argv) {
  std::optional<std::string> config;
  std::vector<std::string> rest;
  for (std::size_t k = 0; k < argv.size(); ++k) {
    if (argv[k] == "--config") {
      if (k + 1 >= argv.size()) throw UsageError("--config needs a file name");
      config = argv[++k];
    } else if (argv[k].rfind("--config=", 0) == 0) {
      config = argv[k].substr(9);
    } else {
      rest.push_back(argv[k]);
    }
  }
  if (!config || rest.size() < 2) return rest;

  std::vector<std::string> file_args;
  const auto raw = config_args(*config);
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const bool has_value = k + 1 < raw.size() && raw[k + 1].rfind("--", 0) != 0;
    if (!given_on_command_line(rest, raw[k])) {
      file_args.push_back(raw[k]);
      if (has_value) file_args.push_back(raw[k + 1]);
    }
    if (has_value) ++k;
  }
  // rest[0] is the program, rest[1] the subcommand
  std::vector<std::string> out(rest.begin(), rest.begin() + 2);
  std::size_t insert_at = 2;
  // the repro scenario is positional; keep it in front
  if (rest[1] == "repro" && rest.size() > 2 && rest[2].rfind("-", 0) != 0) {
    out.push_back(rest[2]);
    insert_at = 3;
  }
  out.insert(out.end(), file_args.begin(), file_args.end());
  out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(insert_at), rest.end());
  return out;
}

void print_report(std::ostream& out, std::string_view title, const EvalReport& r) { write_report_text(out, title, r, true); }

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string input, out;
  std::optional<double> bin_width;
  double min{0.0}, max{250.0}, epsilon{kDefaultEpsilon}, quantile{kDefaultQuantile};
  SignalFlags sig;
};

int cmd_train(const TrainArgs& a) {
  if (!a.bin_width) throw UsageError("train requires --bin-width");
  const Quantizer q(a.min, a.max, *a.bin_width);
  SelfInfoMatrix::check_epsilon(a.epsilon);
  const auto samples = load_trace(a.input, a.sig);
  const auto series = quantize_series(samples, q);
  warn_out_of_range(series, q);

  ReferenceLut lut{q, a.epsilon, train(series.bins, q.order())};
  const auto ref = lut.derive();
  const double theta = calibrate_threshold(ref, lut.counts, a.quantile);
  save_lut(lut, a.out);

  std::printf("order          %zu\n", q.order());
  std::printf("samples        %zu\n", samples.size());
  std::printf("transitions    %llu\n", static_cast<unsigned long long>(lut.counts.total()));
  std::printf("seen cells     %zu\n", lut.counts.seen_cells());
  std::printf("e_max (bits)   %.6f\n", ref.e_max());
  std::printf("threshold q=%g %.6f\n", a.quantile, theta);
  return kClean;
}

struct DetectArgs {
  std::string input, lut, events;
  std::string mode{"streaming"};
  std::size_t window{kDefaultWindow};
  std::optional<double> threshold;
  double quantile{kDefaultQuantile};
  std::optional<double> decay;
  SignalFlags sig;
};

int cmd_detect(const DetectArgs& a) {
  DetectorConfig cfg;
  cfg.mode = parse_mode(a.mode);
  cfg.window_len = a.window;
  cfg.calibration_quantile = a.quantile;
  cfg.decay = a.decay;
  if (a.threshold) cfg.threshold_bits = *a.threshold;
  cfg.validate();

  const auto lut = load_lut(a.lut);
  const auto samples = load_trace(a.input, a.sig);
  const auto ref = lut.derive();

  double theta = 0.0;
  if (a.threshold) {
    theta = *a.threshold;
  } else if (cfg.mode == DetectionMode::windowed) {
    throw UsageError("windowed detection needs an explicit --threshold (calibrate with 'evaluate' or 'repro')");
  } else {
    theta = calibrate_threshold(ref, lut.counts, a.quantile);
  }

  const auto series = quantize_series(samples, lut.quantizer);
  warn_out_of_range(series, lut.quantizer);
  const auto events = run_detector(cfg, lut.counts, ref, theta, series);

  if (a.events.empty()) {
    write_events_csv(std::cout, events);
    std::fprintf(stderr, "%zu events over %zu samples, threshold %.6f bits\n", events.size(), samples.size(), theta);
  } else {
    write_file(a.events, [&](std::ostream& o) { write_events_csv(o, events); });
    std::printf("%zu events over %zu samples, threshold %.6f bits\n", events.size(), samples.size(), theta);
  }
  return events.empty() ? kClean : kAnomalies;
}

struct InjectArgs {
  std::string input, out, truth, campaign_in, campaign_out;
  std::size_t one_time{3}, replay{9};
  double deviation{20.0};
  std::uint64_t seed{7};
  double min_valid{0.0}, max_valid{160.0};
  double min_target{0.0}, replay_jump{0.0};
  std::size_t separation{128};
  bool strict{false}, uniform{false};
  SignalFlags sig;
};

int cmd_inject(const InjectArgs& a) {
  const auto clean = load_trace(a.input, a.sig);
  std::vector<AttackSpec> campaign;
  if (!a.campaign_in.empty()) {
    auto in = open_in(a.campaign_in);
    campaign = read_campaign_csv(in);
  } else {
    CampaignOptions opts;
    opts.deviation_pct = a.deviation;
    opts.min_separation = a.separation;
    opts.min_target_value = a.min_target;
    opts.min_replay_jump = a.replay_jump;
    campaign = plan_campaign(clean, a.one_time, a.replay, a.seed, opts);
  }
  InjectOptions io{a.min_valid, a.max_valid, a.strict, a.uniform ? OneTimeValue::uniform_random : OneTimeValue::deviation};
  const auto result = apply_campaign(clean, campaign, io);

  write_file(a.out, [&](std::ostream& o) { write_samples_csv(o, result.samples); });
  if (!a.truth.empty()) write_file(a.truth, [&](std::ostream& o) { write_truth_csv(o, result.truth); });
  if (!a.campaign_out.empty()) write_file(a.campaign_out, [&](std::ostream& o) { write_campaign_csv(o, campaign); });
  std::printf("%zu attacks, %zu samples altered or replaced\n", result.truth.size(), result.truth.covered_samples());
  return kClean;
}

struct EvaluateArgs {
  std::string events, truth, trace, report_csv;
  std::size_t trace_len{0};
  std::size_t tolerance{1};
  std::string label{"run"};
  SignalFlags sig;
};

int cmd_evaluate(const EvaluateArgs& a) {
  std::size_t n = a.trace_len;
  if (!a.trace.empty()) n = load_trace(a.trace, a.sig).size();
  if (n == 0) throw UsageError("evaluate needs --trace or --trace-len");
  auto ein = open_in(a.events);
  const auto events = read_events_csv(ein);
  auto tin = open_in(a.truth);
  const auto truth = read_truth_csv(tin);
  const auto report = score(events, truth, {a.tolerance}, n);
  write_report_text(std::cout, a.label, report, false);
  if (!a.report_csv.empty())
    write_file(a.report_csv, [&](std::ostream& o) { o << kReportCsvHeader << '\n' << report_csv_row(a.label, report) << '\n'; });
  return kClean;
}

struct BenchArgs {
  std::string input, lut, scenario{"urban"};
  std::size_t samples{1000000}, reps{5};
  std::uint64_t seed{7};
  std::optional<double> threshold;
  SignalFlags sig;
};

int cmd_bench(const BenchArgs& a) {
  const Quantizer default_q(0.0, 250.0, 1.0);
  std::vector<Sample> trace =
      a.input.empty() ? gen_drive_trace(parse_scenario(a.scenario), a.samples, a.seed) : load_trace(a.input, a.sig);
  ReferenceLut lut;
  if (a.lut.empty()) {
    lut.quantizer = default_q;
    lut.counts = train(quantize_series(trace, default_q).bins, default_q.order());
  } else {
    lut = load_lut(a.lut);
  }
  const auto ref = lut.derive();
  const double theta = a.threshold ? *a.threshold : calibrate_threshold(ref, lut.counts, 1.0);
  const auto series = quantize_series(trace, lut.quantizer);
  const auto s = bench(ref, theta, series.bins, a.reps);

  std::printf("samples            %zu\n", s.samples);
  std::printf("repetitions        %zu\n", s.repetitions);
  std::printf("events             %zu\n", s.events);
  std::printf("detect (s)         %.6f\n", s.detect_s);
  std::printf("samples per second %.0f\n", s.samples_per_s);
  std::printf("train+detect (s)   %.6f\n", s.build_plus_detect_s);
  std::printf("per-sample ns      p50 %.0f  p99 %.0f  max %.0f\n", s.per_sample_ns.p50_ns, s.per_sample_ns.p99_ns,
              s.per_sample_ns.max_ns);
  return kClean;
}

struct GenArgs {
  std::string scenario{"urban"}, out;
  std::size_t samples{0};
  std::uint64_t seed{7};
  double noise{0.0};
  SignalFlags sig;
};

int cmd_gen(const GenArgs& a) {
  const auto scenario = parse_scenario(a.scenario);
  const std::size_t n = a.samples ? a.samples : default_samples(scenario);
  auto trace = gen_drive_trace(scenario, n, derive_seed(a.seed, 0));
  if (a.noise > 0.0) trace = add_sensor_noise(trace, a.noise, derive_seed(a.seed, 11));
  write_file(a.out, [&](std::ostream& o) {
    if (a.sig.format == "candump")
      write_candump(o, trace, a.sig.spec());
    else
      write_samples_csv(o, trace);
  });
  std::printf("%zu samples written to %s\n", trace.size(), a.out.c_str());
  return kClean;
}

struct ReproArgs {
  std::string scenario, out_dir, mode{"streaming"};
  std::uint64_t seed{7};
  std::size_t seeds{1}, jobs{1}, window{kDefaultWindow}, samples{0};
  bool sweep{false};
  std::vector<double> deviations{10.0, 20.0, 40.0};
};

ScenarioConfig repro_config(const ReproArgs& a, Scenario s, std::uint64_t seed) {
  auto cfg = ScenarioConfig::standard(s, seed);
  if (a.samples) cfg.n_samples = a.samples;
  cfg.detector.mode = parse_mode(a.mode);
  cfg.detector.window_len = a.window;
  cfg.detector.validate();
  return cfg;
}

// Runs fn(k) for k in [0, n) on up to `jobs` threads; results land by index
// so the output order never depends on scheduling.
template <typename T, typename Fn>
std::vector<T> fan_out(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::size_t next = 0;
  std::mutex m;
  auto worker = [&] {
    while (true) {
      std::size_t k;
      {
        std::lock_guard lock(m);
        if (next >= n) return;
        k = next++;
      }
      try {
        out[k] = fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::max<std::size_t>(1, std::min(jobs, n)); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

int cmd_repro(const ReproArgs& a) {
  const auto scenario = parse_scenario(a.scenario);
  if (a.seeds == 0) throw UsageError("--seeds must be at least 1");
  if (a.jobs == 0) throw UsageError("--jobs must be at least 1");
  const auto cfg = repro_config(a, scenario, a.seed);  // validates before any I/O
  const fs::path dir = a.out_dir.empty() ? fs::path("repro_" + a.scenario) : fs::path(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  auto at = [&](const char* name) { return (dir / name).string(); };

  const auto run = run_scenario(cfg);
  const auto title = std::string(a.scenario) + " seed " + std::to_string(a.seed) + " (" + a.mode + ")";
  write_file(at("trace.csv"), [&](std::ostream& o) { write_samples_csv(o, run.clean); });
  write_file(at("attacked.csv"), [&](std::ostream& o) { write_samples_csv(o, run.attacked.samples); });
  write_file(at("campaign.csv"), [&](std::ostream& o) { write_campaign_csv(o, run.campaign); });
  write_file(at("truth.csv"), [&](std::ostream& o) { write_truth_csv(o, run.attacked.truth); });
  write_file(at("events.csv"), [&](std::ostream& o) { write_events_csv(o, run.events); });
  write_file(at("plot.csv"), [&](std::ostream& o) { write_plot_csv(o, run.attacked.samples, run.attacked.truth, run.events); });
  write_file(at("report.txt"), [&](std::ostream& o) {
    write_report_text(o, title, run.report, false);
    char buf[64];
    std::snprintf(buf, sizeof buf, "threshold (bits)    %.6f\n", run.threshold_bits);
    o << buf;
  });
  write_file(at("report.csv"), [&](std::ostream& o) {
    o << kReportCsvHeader << '\n' << report_csv_row(a.scenario, run.report) << '\n';
  });
  print_report(std::cout, title, run.report);
  std::printf("threshold (bits)    %.6f\n", run.threshold_bits);

  if (a.seeds > 1) {
    const auto reports = fan_out<EvalReport>(a.seeds, a.jobs, [&](std::size_t k) {
      return run_scenario(repro_config(a, scenario, a.seed + k)).report;
    });
    double rate = 0.0;
    std::size_t fps = 0;
    write_file(at("seeds.csv"), [&](std::ostream& o) {
      o << "seed," << kReportCsvHeader.substr(kReportCsvHeader.find(',') + 1) << '\n';
      for (std::size_t k = 0; k < reports.size(); ++k) {
        o << report_csv_row(std::to_string(a.seed + k), reports[k]) << '\n';
        rate += reports[k].detection_rate;
        fps += reports[k].false_positives;
      }
    });
    std::printf("seeds %zu: mean detection rate %.6f, total false anomalies %zu\n", a.seeds,
                rate / static_cast<double>(a.seeds), fps);
  }

  if (a.sweep) {
    const auto rows = fan_out<SweepResult>(a.seeds, a.jobs, [&](std::size_t k) {
      SweepConfig sc;
      sc.scenario = scenario;
      sc.seed = a.seed + k;
      const std::size_t n = a.samples ? a.samples : default_samples(scenario);
      const auto clean = gen_drive_trace(scenario, n, derive_seed(sc.seed, 0));
      return deviation_sweep(clean, a.deviations, sc);
    });
    write_file(at("sweep.csv"), [&](std::ostream& o) {
      o << "deviation_pct,seeds,mean_detection_rate,mean_false_anomaly_ratio,mean_fpr_samplewise\n";
      char buf[160];
      for (std::size_t d = 0; d < a.deviations.size(); ++d) {
        double dr = 0, far = 0, fpr = 0;
        for (const auto& r : rows) {
          dr += r.rows[d].report.detection_rate;
          far += r.rows[d].report.false_anomaly_ratio;
          fpr += r.rows[d].report.fpr_samplewise;
        }
        const double m = static_cast<double>(rows.size());
        std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.9f\n", detail::shortest(a.deviations[d]).c_str(), rows.size(),
                      dr / m, far / m, fpr / m);
        o << buf;
        std::cout << "sweep " << buf;
      }
    });
  }
  return kClean;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kUsage;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kIo;
  return kData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-information anomaly detection for in-vehicle signal streams"};
  app.require_subcommand(1);
  app.add_option("--config", "key=value file; command-line flags override it");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Build a reference LUT from a clean trace");
  train_cmd->add_option("-i,--input", ta.input, "Trace (candump log or timestamp,value CSV)")->required();
  train_cmd->add_option("-o,--out", ta.out, "LUT file to write")->required();
  train_cmd->add_option("--bin-width", ta.bin_width, "Quantization bin width");
  train_cmd->add_option("--min", ta.min, "Lowest quantized value");
  train_cmd->add_option("--max", ta.max, "Highest quantized value");
  train_cmd->add_option("--epsilon", ta.epsilon, "Probability assumed for unseen transitions");
  train_cmd->add_option("--quantile", ta.quantile, "Quantile used for the reported threshold");
  ta.sig.add_to(train_cmd);

  DetectArgs da;
  auto* detect_cmd = app.add_subcommand("detect", "Score a trace against a LUT");
  detect_cmd->add_option("-i,--input", da.input, "Trace to test")->required();
  detect_cmd->add_option("--lut", da.lut, "Reference LUT")->required();
  detect_cmd->add_option("--events", da.events, "Events CSV (stdout when omitted)");
  detect_cmd->add_option("--mode", da.mode, "streaming or windowed")->check(CLI::IsMember({"streaming", "windowed"}));
  detect_cmd->add_option("--window", da.window, "Window length for windowed mode");
  detect_cmd->add_option("--threshold", da.threshold, "Threshold in bits; calibrated from the LUT when omitted");
  detect_cmd->add_option("--quantile", da.quantile, "Calibration quantile");
  detect_cmd->add_option("--online-decay", da.decay, "Update the reference online with this decay factor");
  da.sig.add_to(detect_cmd);

  InjectArgs ia;
  auto* inject_cmd = app.add_subcommand("inject", "Inject one-time and replay attacks into a trace");
  inject_cmd->add_option("-i,--input", ia.input, "Clean trace")->required();
  inject_cmd->add_option("-o,--out", ia.out, "Attacked trace CSV")->required();
  inject_cmd->add_option("--truth", ia.truth, "Ground-truth CSV");
  inject_cmd->add_option("--campaign", ia.campaign_in, "Apply this campaign CSV instead of planning one");
  inject_cmd->add_option("--campaign-out", ia.campaign_out, "Write the planned campaign");
  inject_cmd->add_option("--one-time", ia.one_time, "Number of one-time attacks");
  inject_cmd->add_option("--replay", ia.replay, "Number of replay attacks");
  inject_cmd->add_option("--deviation", ia.deviation, "One-time deviation in percent");
  inject_cmd->add_option("--seed", ia.seed, "Campaign seed");
  inject_cmd->add_option("--min-valid", ia.min_valid, "Lowest valid physical value");
  inject_cmd->add_option("--max-valid", ia.max_valid, "Highest valid physical value");
  inject_cmd->add_option("--min-target", ia.min_target, "Lowest clean value a one-time attack may target");
  inject_cmd->add_option("--replay-jump", ia.replay_jump, "Smallest value jump at a replay onset");
  inject_cmd->add_option("--separation", ia.separation, "Minimum samples between attacks");
  inject_cmd->add_flag("--strict", ia.strict, "Reject attacks that leave the valid range instead of clamping");
  inject_cmd->add_flag("--uniform", ia.uniform, "One-time values drawn uniformly from the valid range");
  ia.sig.add_to(inject_cmd);

  EvaluateArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score events against ground truth");
  eval_cmd->add_option("--events", ea.events, "Events CSV")->required();
  eval_cmd->add_option("--truth", ea.truth, "Ground-truth CSV")->required();
  eval_cmd->add_option("--trace", ea.trace, "Tested trace (for its length)");
  eval_cmd->add_option("--trace-len", ea.trace_len, "Tested trace length in samples");
  eval_cmd->add_option("--tolerance", ea.tolerance, "Match tolerance in samples");
  eval_cmd->add_option("--label", ea.label, "Row label in the report");
  eval_cmd->add_option("--report-csv", ea.report_csv, "Also write a one-row CSV report");
  ea.sig.add_to(eval_cmd);

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Measure detection throughput and latency");
  bench_cmd->add_option("-i,--input", ba.input, "Trace (a synthetic drive when omitted)");
  bench_cmd->add_option("--lut", ba.lut, "Reference LUT (trained on the trace when omitted)");
  bench_cmd->add_option("--scenario", ba.scenario, "Synthetic scenario");
  bench_cmd->add_option("--samples", ba.samples, "Synthetic trace length");
  bench_cmd->add_option("--reps", ba.reps, "Repetitions");
  bench_cmd->add_option("--seed", ba.seed, "Synthetic trace seed");
  bench_cmd->add_option("--threshold", ba.threshold, "Threshold in bits");
  ba.sig.add_to(bench_cmd);

  GenArgs ga;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic drive trace");
  gen_cmd->add_option("--scenario", ga.scenario, "urban or highway");
  gen_cmd->add_option("-o,--out", ga.out, "Output file")->required();
  gen_cmd->add_option("--samples", ga.samples, "Length (the scenario's recorded length when omitted)");
  gen_cmd->add_option("--seed", ga.seed, "Seed");
  gen_cmd->add_option("--noise", ga.noise, "Gaussian sensor noise sigma, km/h");
  ga.sig.add_to(gen_cmd);

  ReproArgs ra;
  auto* repro_cmd = app.add_subcommand("repro", "Full pipeline: generate, train, inject, detect, score");
  repro_cmd->add_option("scenario", ra.scenario, "urban or highway")->required();
  repro_cmd->add_option("--seed", ra.seed, "Seed");
  repro_cmd->add_option("--out-dir", ra.out_dir, "Output directory (repro_<scenario> when omitted)");
  repro_cmd->add_option("--mode", ra.mode, "streaming or windowed");
  repro_cmd->add_option("--window", ra.window, "Window length for windowed mode");
  repro_cmd->add_option("--samples", ra.samples, "Trace length (the scenario's recorded length when omitted)");
  repro_cmd->add_option("--seeds", ra.seeds, "Also run this many consecutive seeds and write seeds.csv");
  repro_cmd->add_option("--jobs", ra.jobs, "Worker threads for multi-seed runs");
  repro_cmd->add_flag("--sweep", ra.sweep, "Run the deviation sweep and write sweep.csv");
  repro_cmd->add_option("--deviations", ra.deviations, "Sweep deviation levels in percent");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(std::move(args));
    std::vector<const char*> cargs;
    for (const auto& s : args) cargs.push_back(s.c_str());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return kUsage;
    }

    if (train_cmd->parsed()) return cmd_train(ta);
    if (detect_cmd->parsed()) return cmd_detect(da);
    if (inject_cmd->parsed()) return cmd_inject(ia);
    if (eval_cmd->parsed()) return cmd_evaluate(ea);
    if (bench_cmd->parsed()) return cmd_bench(ba);
    if (gen_cmd->parsed()) return cmd_gen(ga);
    if (repro_cmd->parsed()) return cmd_repro(ra);
    return kUsage;
  } catch (const std::exception& e) {
    const int code = classify(e);
    std::cerr << (code == kUsage ? "usage error: " : "error: ") << e.what() << '\n';
    return code;
  }
}
