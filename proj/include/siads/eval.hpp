#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "siads/detector.hpp"
#include "siads/error.hpp"
#include "siads/ingest.hpp"
#include "siads/inject.hpp"
#include "siads/quantizer.hpp"
#include "siads/rng.hpp"
#include "siads/simatrix.hpp"

namespace siads {

// ---------------------------------------------------------------------------
// Synthetic drive traces

enum class Scenario { highway, urban };

inline std::string_view to_string(Scenario s) { return s == Scenario::highway ? "highway" : "urban"; }

inline Scenario parse_scenario(std::string_view s) {
  if (s == "highway") return Scenario::highway;
  if (s == "urban") return Scenario::urban;
  throw UsageError("unknown scenario '" + std::string(s) + "'");
}

inline constexpr double kSampleRateHz = 260.0;
inline constexpr std::size_t kHighwaySamples = 274487;
inline constexpr std::size_t kUrbanSamples = 263023;

inline std::size_t default_samples(Scenario s) { return s == Scenario::highway ? kHighwaySamples : kUrbanSamples; }

// Kinematic limits of the synthetic driver. Speeds in km/h, accelerations
// in km/h per second.
struct DriveProfile {
  double max_speed{160.0};
  double max_step_delta{6.0};  // hard cap on |v[t] - v[t-1]|
  double cruise_lo{25.0};
  double cruise_hi{60.0};
  double slow_lo{0.0};  // speed band of slowdowns; 0 means full stops
  double slow_hi{0.0};
  double slowdown_probability{0.6};
  double accel_lo{4.0};
  double accel_hi{12.0};
  double brake_lo{6.0};
  double brake_hi{22.0};
  double cruise_s_lo{5.0};
  double cruise_s_hi{35.0};
  double stop_s_lo{3.0};
  double stop_s_hi{25.0};
  double jitter{0.6};        // std-dev of the acceleration wander, km/h/s
  double resolution{0.01};   // signal LSB
  double initial_speed{0.0};

  static DriveProfile highway() {
    DriveProfile p;
    p.max_step_delta = 2.0;
    p.cruise_lo = 95.0;
    p.cruise_hi = 140.0;
    p.slow_lo = 60.0;
    p.slow_hi = 85.0;
    p.slowdown_probability = 0.2;
    p.accel_lo = 1.0;
    p.accel_hi = 4.0;
    p.brake_lo = 1.5;
    p.brake_hi = 6.0;
    p.cruise_s_lo = 20.0;
    p.cruise_s_hi = 90.0;
    p.stop_s_lo = 5.0;
    p.stop_s_hi = 20.0;
    p.jitter = 0.3;
    p.initial_speed = 100.0;
    return p;
  }

  static DriveProfile urban() { return DriveProfile{}; }

  static DriveProfile for_scenario(Scenario s) { return s == Scenario::highway ? highway() : urban(); }
};

// Bounded random-walk speed trace at 260 Hz. Urban drives stop frequently
// and brake harder; highway drives cruise in a high band.
inline std::vector<Sample> gen_drive_trace(const DriveProfile& p, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw DataError("a drive trace needs at least 2 samples");
  Rng rng(seed);
  const double dt = 1.0 / kSampleRateHz;

  enum class Phase { cruise, slow, hold };
  Phase phase = p.initial_speed > 0 ? Phase::cruise : Phase::hold;
  double v = p.initial_speed;
  double accel = 0.0;
  double target = p.initial_speed;
  double phase_left = rng.uniform(p.stop_s_lo, p.stop_s_hi);
  double accel_limit = rng.uniform(p.accel_lo, p.accel_hi);
  double brake_limit = rng.uniform(p.brake_lo, p.brake_hi);
  double wander = 0.0;

  std::vector<Sample> out;
  out.reserve(n_samples);
  double prev_reported = std::round(v / p.resolution) * p.resolution;
  for (std::size_t k = 0; k < n_samples; ++k) {
    phase_left -= dt;
    if (phase_left <= 0.0) {
      if (phase == Phase::cruise && rng.chance(p.slowdown_probability)) {
        phase = Phase::slow;
        target = p.slow_hi > 0.0 ? rng.uniform(p.slow_lo, p.slow_hi) : 0.0;
        brake_limit = rng.uniform(p.brake_lo, p.brake_hi);
        phase_left = rng.uniform(p.stop_s_lo, p.stop_s_hi);
      } else {
        phase = Phase::cruise;
        target = rng.uniform(p.cruise_lo, p.cruise_hi);
        accel_limit = rng.uniform(p.accel_lo, p.accel_hi);
        brake_limit = rng.uniform(p.brake_lo, p.brake_hi);
        phase_left = rng.uniform(p.cruise_s_lo, p.cruise_s_hi);
      }
    }
    if (phase == Phase::slow && target == 0.0 && v == 0.0) phase = Phase::hold;

    // drift of the cruise set point
    if (phase == Phase::cruise) {
      wander = 0.999 * wander + p.jitter * std::sqrt(dt) * rng.normal();
      target = std::clamp(target + wander * dt, p.cruise_lo, p.cruise_hi);
    }
    const double wanted = phase == Phase::hold ? -brake_limit : std::clamp(0.8 * (target - v), -brake_limit, accel_limit);
    accel += (wanted - accel) * 0.02;  // limited jerk
    double next = std::clamp(v + accel * dt, 0.0, p.max_speed);
    if (next == 0.0) accel = std::max(accel, 0.0);
    v = next;

    double reported = std::round(v / p.resolution) * p.resolution;
    reported = std::clamp(reported, prev_reported - p.max_step_delta, prev_reported + p.max_step_delta);
    out.push_back({static_cast<double>(k) / kSampleRateHz, reported});
    prev_reported = reported;
  }
  return out;
}

inline std::vector<Sample> gen_drive_trace(Scenario scenario, std::size_t n_samples, std::uint64_t seed) {
  return gen_drive_trace(DriveProfile::for_scenario(scenario), n_samples, seed);
}

// Additive Gaussian sensor noise, re-rounded to the signal resolution and
// clamped to [lo, hi].
inline std::vector<Sample> add_sensor_noise(std::span<const Sample> clean, double sigma, std::uint64_t seed,
                                            double lo = 0.0, double hi = 160.0, double resolution = 0.01) {
  Rng rng(seed);
  std::vector<Sample> out(clean.begin(), clean.end());
  if (sigma <= 0.0) return out;
  for (auto& s : out) {
    const double noisy = s.value + sigma * rng.normal();
    s.value = std::clamp(std::round(noisy / resolution) * resolution, lo, hi);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring

struct MatchPolicy {
  std::size_t tolerance{1};  // samples on either side of a ground-truth range
};

struct LatencyStats {
  double p50_ns{0.0};
  double p99_ns{0.0};
  double max_ns{0.0};
};

struct EvalReport {
  std::size_t attacks{0};
  std::size_t events{0};  // distinct event indices
  std::size_t true_positives{0};
  std::size_t false_positives{0};  // false events
  std::size_t false_negatives{0};
  std::size_t clean_samples{0};
  double detection_rate{1.0};
  double fpr_samplewise{0.0};
  std::size_t false_anomaly_count{0};
  double false_anomaly_ratio{0.0};  // false events / all events
  double train_time_s{0.0};
  double test_time_s{0.0};
  std::optional<LatencyStats> per_sample_ns;
};

// Matches events to attacks. An event within `tolerance` samples of an
// attacked range detects it; an attack is credited once however many events
// land on it. Events are deduplicated by sample index first.
inline EvalReport score(std::span<const AnomalyEvent> events, const GroundTruth& truth, const MatchPolicy& policy,
                        std::size_t trace_len) {
  for (std::size_t k = 1; k < events.size(); ++k)
    if (events[k].sample_index < events[k - 1].sample_index) throw DataError("events must be sorted by sample index");
  const auto ranges = truth.ranges();
  for (std::size_t k = 1; k < ranges.size(); ++k)
    if (ranges[k].start <= ranges[k - 1].end + 2 * policy.tolerance)
      throw DataError("match tolerance exceeds the separation between attacks; attribution would be ambiguous");
  if (!ranges.empty() && ranges.back().end >= trace_len) throw DataError("ground truth extends past the trace");

  std::vector<std::size_t> indices;
  indices.reserve(events.size());
  for (const auto& e : events) {
    if (e.sample_index >= trace_len) throw DataError("event index past the end of the trace");
    if (indices.empty() || indices.back() != e.sample_index) indices.push_back(e.sample_index);
  }

  EvalReport r;
  r.attacks = ranges.size();
  r.events = indices.size();
  std::vector<char> hit(ranges.size(), 0);
  for (auto idx : indices) {
    // first range whose tolerant end reaches idx
    auto it = std::lower_bound(ranges.begin(), ranges.end(), idx, [&](const TruthRange& range, std::size_t value) {
      return range.end + policy.tolerance < value;
    });
    if (it != ranges.end() && it->start <= idx + policy.tolerance)
      hit[static_cast<std::size_t>(it - ranges.begin())] = 1;
    else
      ++r.false_positives;
  }
  r.true_positives = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  r.false_negatives = r.attacks - r.true_positives;
  r.detection_rate = r.attacks == 0 ? 1.0 : static_cast<double>(r.true_positives) / static_cast<double>(r.attacks);
  r.clean_samples = trace_len - truth.covered_samples();
  r.fpr_samplewise = r.clean_samples == 0 ? 0.0 : static_cast<double>(r.false_positives) / static_cast<double>(r.clean_samples);
  r.false_anomaly_count = r.false_positives;
  r.false_anomaly_ratio = r.events == 0 ? 0.0 : static_cast<double>(r.false_positives) / static_cast<double>(r.events);
  return r;
}

// ---------------------------------------------------------------------------
// Scenario runs

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct ScenarioConfig {
  Scenario scenario{Scenario::urban};
  std::uint64_t seed{7};
  std::size_t n_samples{0};  // 0: the scenario's recorded length
  std::size_t n_one_time{3};
  std::size_t n_replay{9};
  Quantizer quantizer{0.0, 250.0, 1.0};
  double epsilon{kDefaultEpsilon};
  DetectorConfig detector{DetectionMode::streaming, 1.0, kDefaultWindow, 1.0, std::nullopt};
  CampaignOptions campaign{20.0, 2 * kDefaultWindow, 260, 1300, 20.0, 5.0, 10000};
  InjectOptions inject{0.0, 160.0, false, OneTimeValue::deviation};
  std::optional<std::size_t> tolerance;  // default: 1 streaming, W windowed

  static ScenarioConfig standard(Scenario s, std::uint64_t seed) {
    ScenarioConfig c;
    c.scenario = s;
    c.seed = seed;
    c.n_samples = default_samples(s);
    c.n_one_time = s == Scenario::highway ? 6 : 3;
    c.n_replay = s == Scenario::highway ? 0 : 9;
    return c;
  }

  std::size_t match_tolerance() const {
    if (tolerance) return *tolerance;
    return detector.mode == DetectionMode::windowed ? detector.window_len : 1;
  }
};

struct ScenarioRun {
  std::vector<Sample> clean;
  std::vector<AttackSpec> campaign;
  Injection attacked;
  TransitionCounts counts;
  SelfInfoMatrix reference;
  double threshold_bits{0.0};
  std::vector<AnomalyEvent> events;
  EvalReport report;
};

// Detects on an already-quantized series with the configured mode.
inline std::vector<AnomalyEvent> run_detector(const DetectorConfig& cfg, const TransitionCounts& counts,
                                              const SelfInfoMatrix& ref, double threshold,
                                              const QuantizedSeries& series) {
  if (cfg.mode == DetectionMode::windowed)
    return detect_windowed(ref, threshold, series.bins, cfg.window_len, series.timestamps);
  if (cfg.decay) {
    OnlineReference online(counts, ref.epsilon(), *cfg.decay, threshold);
    return detect_streaming_online(online, series.bins, series.timestamps);
  }
  return detect_streaming(ref, threshold, series.bins, series.timestamps);
}

inline double calibrate_for(const DetectorConfig& cfg, const SelfInfoMatrix& ref, std::span<const Bin> training) {
  if (cfg.mode == DetectionMode::windowed)
    return calibrate_window_threshold(ref, training, cfg.window_len, cfg.calibration_quantile);
  return calibrate_threshold(ref, training, cfg.calibration_quantile);
}

// Generate -> train on the clean drive -> inject -> detect -> score.
inline ScenarioRun run_scenario(const ScenarioConfig& cfg) {
  const std::size_t n = cfg.n_samples ? cfg.n_samples : default_samples(cfg.scenario);
  ScenarioRun run;
  run.clean = gen_drive_trace(cfg.scenario, n, derive_seed(cfg.seed, 0));

  auto t0 = Clock::now();
  const auto training = quantize_series(run.clean, cfg.quantizer);
  run.counts = train(training.bins, cfg.quantizer.order());
  run.reference = derive_self_info(run.counts, cfg.epsilon);
  run.threshold_bits = calibrate_for(cfg.detector, run.reference, training.bins);
  const double train_s = seconds_since(t0);

  run.campaign = plan_campaign(run.clean, cfg.n_one_time, cfg.n_replay, derive_seed(cfg.seed, 1), cfg.campaign);
  run.attacked = apply_campaign(run.clean, run.campaign, cfg.inject);

  t0 = Clock::now();
  const auto test = quantize_series(run.attacked.samples, cfg.quantizer);
  run.events = run_detector(cfg.detector, run.counts, run.reference, run.threshold_bits, test);
  const double test_s = seconds_since(t0);

  run.report = score(run.events, run.attacked.truth, {cfg.match_tolerance()}, n);
  run.report.train_time_s = train_s;
  run.report.test_time_s = test_s;
  return run;
}

// ---------------------------------------------------------------------------
// Deviation sweep

struct SweepConfig {
  Scenario scenario{Scenario::urban};
  std::uint64_t seed{7};
  std::size_t n_one_time{12};
  Quantizer quantizer{0.0, 250.0, 1.0};
  double epsilon{kDefaultEpsilon};
  double quantile{kDefaultQuantile};
  std::size_t tolerance{1};
  double train_noise_sigma{0.8};  // contamination of the training drive, km/h
  double test_noise_sigma{0.8};   // independent noise on the tested drive
  CampaignOptions campaign{10.0, 2 * kDefaultWindow, 260, 1300, 20.0, 0.0, 10000};
  InjectOptions inject{0.0, 160.0, false, OneTimeValue::deviation};
};

struct SweepRow {
  double deviation_pct{0.0};
  EvalReport report;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  bool detection_nondecreasing{true};  // detection rate never falls as deviation grows
  bool fpr_nonincreasing{true};        // false-anomaly ratio never rises as deviation grows
};

// Trains on a noise-contaminated copy of `clean`, then injects the same
// one-time campaign at each deviation level into an independently noised
// copy and scores the streaming detector. Levels are evaluated in the
// order given; the monotonicity flags compare neighbours in ascending
// deviation order.
inline SweepResult deviation_sweep(std::span<const Sample> clean, std::span<const double> deviations,
                                   const SweepConfig& cfg) {
  SweepResult result;
  if (deviations.empty()) return result;

  const auto training_trace = add_sensor_noise(clean, cfg.train_noise_sigma, derive_seed(cfg.seed, 11),
                                               cfg.inject.min_valid, cfg.inject.max_valid);
  const auto training = quantize_series(training_trace, cfg.quantizer);
  const auto counts = train(training.bins, cfg.quantizer.order());
  const auto ref = derive_self_info(counts, cfg.epsilon);
  const double theta = calibrate_threshold(ref, training.bins, cfg.quantile);

  const auto tested = add_sensor_noise(clean, cfg.test_noise_sigma, derive_seed(cfg.seed, 12), cfg.inject.min_valid,
                                       cfg.inject.max_valid);
  const auto base_campaign = plan_campaign(clean, cfg.n_one_time, 0, derive_seed(cfg.seed, 13), cfg.campaign);

  for (double dev : deviations) {
    auto campaign = base_campaign;
    for (auto& spec : campaign) spec.deviation_pct = dev;
    const auto attacked = apply_campaign(tested, campaign, cfg.inject);
    const auto series = quantize_series(attacked.samples, cfg.quantizer);
    const auto events = detect_streaming(ref, theta, series.bins, series.timestamps);
    result.rows.push_back({dev, score(events, attacked.truth, {cfg.tolerance}, tested.size())});
  }

  std::vector<const SweepRow*> ordered;
  for (const auto& row : result.rows) ordered.push_back(&row);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const SweepRow* a, const SweepRow* b) { return a->deviation_pct < b->deviation_pct; });
  for (std::size_t k = 1; k < ordered.size(); ++k) {
    if (ordered[k]->report.detection_rate < ordered[k - 1]->report.detection_rate) result.detection_nondecreasing = false;
    if (ordered[k]->report.false_anomaly_ratio > ordered[k - 1]->report.false_anomaly_ratio) result.fpr_nonincreasing = false;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Benchmark

struct BenchStats {
  std::size_t samples{0};
  std::size_t repetitions{0};
  std::size_t events{0};
  double detect_s{0.0};             // best full pass, detection loop only
  double samples_per_s{0.0};
  double build_plus_detect_s{0.0};  // train + derive + detect, best pass
  LatencyStats per_sample_ns;
};

inline constexpr std::size_t kMinBenchSamples = 10000;

inline BenchStats bench(const SelfInfoMatrix& ref, double threshold_bits, std::span<const Bin> bins,
                        std::size_t repetitions) {
  if (repetitions == 0) throw UsageError("benchmark needs at least one repetition");
  if (bins.size() < kMinBenchSamples)
    throw DataError("benchmark trace needs at least " + std::to_string(kMinBenchSamples) + " samples");
  detail::check_series(ref.order(), bins, {});

  BenchStats stats;
  stats.samples = bins.size();
  stats.repetitions = repetitions;
  stats.detect_s = 1e300;
  stats.build_plus_detect_s = 1e300;

  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    StreamingDetector det(ref, threshold_bits);
    std::size_t events = 0;
    const auto t0 = Clock::now();
    for (std::size_t k = 0; k < bins.size(); ++k)
      if (det.push(bins[k], static_cast<double>(k))) ++events;
    stats.detect_s = std::min(stats.detect_s, seconds_since(t0));
    stats.events = events;

    const auto t1 = Clock::now();
    const auto counts = train(bins, ref.order());
    const auto fresh = derive_self_info(counts, ref.epsilon());
    StreamingDetector det2(fresh, threshold_bits);
    std::size_t sink = 0;
    for (std::size_t k = 0; k < bins.size(); ++k)
      if (det2.push(bins[k], static_cast<double>(k))) ++sink;
    stats.build_plus_detect_s = std::min(stats.build_plus_detect_s, seconds_since(t1));
    if (sink == SIZE_MAX) stats.events = sink;  // keeps the loop observable
  }
  stats.samples_per_s = static_cast<double>(bins.size()) / stats.detect_s;

  // per-sample latency, one timed push at a time
  std::vector<double> lat(bins.size());
  StreamingDetector det(ref, threshold_bits);
  std::size_t sink = 0;
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const auto t0 = Clock::now();
    if (det.push(bins[k], static_cast<double>(k))) ++sink;
    lat[k] = static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count());
  }
  if (sink != stats.events) throw Error("benchmark passes disagree on the event count");
  stats.per_sample_ns.max_ns = *std::max_element(lat.begin(), lat.end());
  stats.per_sample_ns.p99_ns = nearest_rank_quantile(lat, 0.99);
  stats.per_sample_ns.p50_ns = nearest_rank_quantile(lat, 0.50);
  return stats;
}

// ---------------------------------------------------------------------------
// Report writers

inline constexpr std::string_view kReportCsvHeader =
    "label,attacks,events,true_positives,false_positives,false_negatives,detection_rate,fpr_samplewise,"
    "false_anomaly_count,false_anomaly_ratio";

inline std::string report_csv_row(std::string_view label, const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.*s,%zu,%zu,%zu,%zu,%zu,%.6f,%.9f,%zu,%.6f", static_cast<int>(label.size()),
                label.data(), r.attacks, r.events, r.true_positives, r.false_positives, r.false_negatives,
                r.detection_rate, r.fpr_samplewise, r.false_anomaly_count, r.false_anomaly_ratio);
  return buf;
}

// Human-readable summary. Wall-clock figures are printed only when
// `with_timing` is set so that files written by repeated runs are identical.
inline void write_report_text(std::ostream& out, std::string_view title, const EvalReport& r, bool with_timing) {
  char buf[512];
  out << "# " << title << '\n';
  out << "# detection_rate      = TP / (TP + FN), 1 when no attacks were injected\n";
  out << "# fpr_samplewise      = false events / samples outside attacked ranges\n";
  out << "# false_anomaly_ratio = false events / all distinct events\n";
  std::snprintf(buf, sizeof buf,
                "attacks             %zu\nevents              %zu\ntrue positives      %zu\nfalse positives     %zu\n"
                "false negatives     %zu\ndetection rate      %.6f\nfpr (sample-wise)   %.9f\n"
                "false anomalies     %zu\nfalse anomaly ratio %.6f\n",
                r.attacks, r.events, r.true_positives, r.false_positives, r.false_negatives, r.detection_rate,
                r.fpr_samplewise, r.false_anomaly_count, r.false_anomaly_ratio);
  out << buf;
  if (with_timing) {
    std::snprintf(buf, sizeof buf, "train time (s)      %.6f\ntest time (s)       %.6f\n", r.train_time_s, r.test_time_s);
    out << buf;
    if (r.per_sample_ns) {
      std::snprintf(buf, sizeof buf, "per-sample ns       p50 %.0f  p99 %.0f  max %.0f\n", r.per_sample_ns->p50_ns,
                    r.per_sample_ns->p99_ns, r.per_sample_ns->max_ns);
      out << buf;
    }
  }
}

// One row per sample (index,timestamp,value,attacked,event) for plotting.
inline void write_plot_csv(std::ostream& out, std::span<const Sample> samples, const GroundTruth& truth,
                           std::span<const AnomalyEvent> events) {
  out << "index,timestamp,value,attacked,event\n";
  std::vector<char> attacked(samples.size(), 0);
  std::vector<char> flagged(samples.size(), 0);
  for (const auto& r : truth.ranges())
    for (std::size_t k = r.start; k <= r.end && k < samples.size(); ++k) attacked[k] = 1;
  for (const auto& e : events)
    if (e.sample_index < samples.size()) flagged[e.sample_index] = 1;
  char buf[128];
  for (std::size_t k = 0; k < samples.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,", k, samples[k].timestamp);
    out << buf << detail::shortest(samples[k].value) << ',' << int{attacked[k]} << ',' << int{flagged[k]} << '\n';
  }
}

inline void write_samples_csv(std::ostream& out, std::span<const Sample> samples) {
  out << "timestamp,value\n";
  char buf[64];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%.6f,", s.timestamp);
    out << buf << detail::shortest(s.value) << '\n';
  }
}

}  // namespace siads
