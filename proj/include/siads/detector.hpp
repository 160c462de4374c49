#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "siads/error.hpp"
#include "siads/ingest.hpp"
#include "siads/quantizer.hpp"
#include "siads/simatrix.hpp"

namespace siads {

enum class DetectionMode { streaming, windowed };

inline std::string_view to_string(DetectionMode m) { return m == DetectionMode::streaming ? "streaming" : "windowed"; }

inline DetectionMode parse_mode(std::string_view s) {
  if (s == "streaming") return DetectionMode::streaming;
  if (s == "windowed") return DetectionMode::windowed;
  throw UsageError("unknown detection mode '" + std::string(s) + "'");
}

inline constexpr double kThresholdMarginBits = 1.0;
inline constexpr double kDefaultQuantile = 0.999;
inline constexpr std::size_t kDefaultWindow = 64;

struct DetectorConfig {
  DetectionMode mode{DetectionMode::streaming};
  double threshold_bits{1.0};
  std::size_t window_len{kDefaultWindow};
  double calibration_quantile{kDefaultQuantile};
  std::optional<double> decay;  // online reference update when set

  void validate() const {
    if (!(threshold_bits > 0.0)) throw UsageError("threshold must be positive");
    if (mode == DetectionMode::windowed && window_len < 2) throw UsageError("window length must be at least 2");
    if (!(calibration_quantile > 0.0 && calibration_quantile <= 1.0))
      throw UsageError("calibration quantile must lie in (0, 1]");
    if (decay && !(*decay > 0.0 && *decay < 1.0)) throw UsageError("decay factor must lie in (0, 1)");
    if (decay && mode != DetectionMode::streaming) throw UsageError("online update is only available in streaming mode");
  }
};

struct AnomalyEvent {
  std::size_t sample_index{0};
  double timestamp{0.0};
  Bin prev_bin{0};
  Bin cur_bin{0};
  double score_bits{0.0};
  DetectionMode mode{DetectionMode::streaming};

  friend bool operator==(const AnomalyEvent&, const AnomalyEvent&) = default;
};

// Nearest-rank quantile: the smallest value with at least q of the data at
// or below it. Reorders `values`.
inline double nearest_rank_quantile(std::vector<double>& values, double q) {
  if (values.empty()) throw DataError("quantile of an empty set");
  if (!(q > 0.0 && q <= 1.0)) throw UsageError("quantile must lie in (0, 1]");
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

namespace detail {

inline double finish_threshold(double quantile_bits, double e_max) {
  const double theta = quantile_bits + kThresholdMarginBits;
  if (!(theta < e_max))
    throw DataError("calibrated threshold " + std::to_string(theta) + " bits does not stay below e_max " +
                    std::to_string(e_max) + " bits; use a smaller epsilon");
  return theta;
}

}  // namespace detail

// theta = quantile q of the training transition scores + 1 bit margin.
inline double calibrate_threshold(const SelfInfoMatrix& ref, std::span<const Bin> training, double q) {
  if (training.size() < 2) throw DataError("calibration needs at least 2 samples, got fewer than 2 samples");
  std::vector<double> scores;
  scores.reserve(training.size() - 1);
  for (std::size_t k = 1; k < training.size(); ++k) {
    if (training[k - 1] >= ref.order() || training[k] >= ref.order()) throw DataError("bin index outside matrix order");
    scores.push_back(ref(training[k - 1], training[k]));
  }
  return detail::finish_threshold(nearest_rank_quantile(scores, q), ref.e_max());
}

// Same rule, computed from the stored counts: each cell contributes its
// count copies of its score, which is exactly the training score multiset.
inline double calibrate_threshold(const SelfInfoMatrix& ref, const TransitionCounts& counts, double q) {
  if (counts.total() == 0) throw DataError("calibration needs at least 2 samples, got fewer than 2 samples");
  if (!(q > 0.0 && q <= 1.0)) throw UsageError("quantile must lie in (0, 1]");
  std::vector<std::pair<double, std::uint64_t>> cells;
  for (Bin j = 0; j < counts.order(); ++j)
    for (Bin i = 0; i < counts.order(); ++i)
      if (auto c = counts.at(j, i)) cells.emplace_back(ref(j, i), c);
  std::sort(cells.begin(), cells.end());
  const auto n = static_cast<double>(counts.total());
  const auto rank = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(q * n)));
  std::uint64_t seen = 0;
  double value = cells.back().first;
  for (const auto& [score, c] : cells) {
    seen += c;
    if (seen >= rank) {
      value = score;
      break;
    }
  }
  return detail::finish_threshold(value, ref.e_max());
}

// Per-transition detector. O(1) per sample and allocation-free after
// construction; the reference must outlive the detector.
class StreamingDetector {
 public:
  StreamingDetector(const SelfInfoMatrix& ref, double threshold_bits)
      : values_(ref.data()), order_(ref.order()), threshold_(threshold_bits) {
    if (!(threshold_bits > 0.0)) throw UsageError("threshold must be positive");
  }

  // Feeds the next sample; returns an event when the transition into it
  // scores above the threshold. Bins must be < order.
  std::optional<AnomalyEvent> push(Bin bin, double timestamp) noexcept {
    const std::size_t index = next_index_++;
    const Bin prev = prev_;
    prev_ = bin;
    if (index == 0) return std::nullopt;
    const double score = values_[static_cast<std::size_t>(prev) * order_ + bin];
    if (score > threshold_) return AnomalyEvent{index, timestamp, prev, bin, score, DetectionMode::streaming};
    return std::nullopt;
  }

  double threshold() const noexcept { return threshold_; }

  void reset() noexcept {
    next_index_ = 0;
    prev_ = 0;
  }

 private:
  const double* values_;
  std::size_t order_;
  double threshold_;
  std::size_t next_index_{0};
  Bin prev_{0};
};

namespace detail {

inline double timestamp_at(std::span<const double> timestamps, std::size_t k) {
  return timestamps.empty() ? static_cast<double>(k) : timestamps[k];
}

inline void check_series(std::size_t order, std::span<const Bin> bins, std::span<const double> timestamps) {
  if (!timestamps.empty() && timestamps.size() != bins.size()) throw DataError("timestamps and bins differ in length");
  for (Bin b : bins)
    if (b >= order) throw DataError("bin index outside matrix order");
}

}  // namespace detail

// `timestamps` may be empty, in which case the sample index is reported.
inline std::vector<AnomalyEvent> detect_streaming(const SelfInfoMatrix& ref, double threshold_bits,
                                                  std::span<const Bin> bins,
                                                  std::span<const double> timestamps = {}) {
  if (bins.size() < 2) throw DataError("detection needs at least 2 samples, got fewer than 2 samples");
  detail::check_series(ref.order(), bins, timestamps);
  StreamingDetector det(ref, threshold_bits);
  std::vector<AnomalyEvent> events;
  for (std::size_t k = 0; k < bins.size(); ++k)
    if (auto e = det.push(bins[k], detail::timestamp_at(timestamps, k))) events.push_back(*e);
  return events;
}

// ---------------------------------------------------------------------------
// Windowed mode

struct WindowScore {
  double score_bits{0.0};
  Bin prev_bin{0};
  Bin cur_bin{0};
};

// Max over the cells visited by `window` of |E_window - E_ref|, where
// E_window is the self-information estimated from the window alone.
inline WindowScore window_score(const SelfInfoMatrix& ref, std::span<const Bin> window,
                                std::vector<std::pair<Bin, Bin>>& scratch) {
  scratch.clear();
  for (std::size_t k = 1; k < window.size(); ++k) scratch.emplace_back(window[k - 1], window[k]);
  std::sort(scratch.begin(), scratch.end());

  WindowScore best;
  bool have = false;
  std::size_t row_begin = 0;
  while (row_begin < scratch.size()) {
    std::size_t row_end = row_begin;
    while (row_end < scratch.size() && scratch[row_end].first == scratch[row_begin].first) ++row_end;
    const auto row_total = static_cast<double>(row_end - row_begin);
    for (std::size_t c = row_begin; c < row_end;) {
      std::size_t c_end = c;
      while (c_end < row_end && scratch[c_end].second == scratch[c].second) ++c_end;
      const double local = self_information_bits(static_cast<double>(c_end - c), row_total);
      const auto [j, i] = scratch[c];
      const double diff = std::abs(local - ref(j, i));
      if (!have || diff > best.score_bits) {
        best = {diff, j, i};
        have = true;
      }
      c = c_end;
    }
    row_begin = row_end;
  }
  return best;
}

// Window starts with stride max(1, W/2); a final window aligned to the end
// of the trace is added when the stride leaves a tail uncovered.
inline std::vector<std::size_t> window_starts(std::size_t n, std::size_t window_len) {
  if (window_len < 2) throw UsageError("window length must be at least 2");
  if (n < window_len) throw DataError("trace shorter than the window length");
  const std::size_t stride = std::max<std::size_t>(1, window_len / 2);
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window_len <= n; s += stride) starts.push_back(s);
  if (starts.back() + window_len < n) starts.push_back(n - window_len);
  return starts;
}

// Lowest score a window can have when it contains a transition that never
// appeared in training: e_max - log2(W - 1).
inline double unseen_window_floor(const SelfInfoMatrix& ref, std::size_t window_len) {
  return ref.e_max() - std::log2(static_cast<double>(window_len - 1));
}

inline std::vector<AnomalyEvent> detect_windowed(const SelfInfoMatrix& ref, double threshold_bits,
                                                 std::span<const Bin> bins, std::size_t window_len,
                                                 std::span<const double> timestamps = {}) {
  if (!(threshold_bits > 0.0)) throw UsageError("threshold must be positive");
  detail::check_series(ref.order(), bins, timestamps);
  std::vector<AnomalyEvent> events;
  std::vector<std::pair<Bin, Bin>> scratch;
  scratch.reserve(window_len);
  for (auto start : window_starts(bins.size(), window_len)) {
    const auto w = window_score(ref, bins.subspan(start, window_len), scratch);
    if (w.score_bits > threshold_bits)
      events.push_back({start, detail::timestamp_at(timestamps, start), w.prev_bin, w.cur_bin, w.score_bits,
                        DetectionMode::windowed});
  }
  return events;
}

// Quantile + margin over the training windows. Fails when the result would
// not stay below the unseen-transition floor.
inline double calibrate_window_threshold(const SelfInfoMatrix& ref, std::span<const Bin> training,
                                         std::size_t window_len, double q) {
  detail::check_series(ref.order(), training, {});
  std::vector<double> scores;
  std::vector<std::pair<Bin, Bin>> scratch;
  for (auto start : window_starts(training.size(), window_len))
    scores.push_back(window_score(ref, training.subspan(start, window_len), scratch).score_bits);
  const double theta = nearest_rank_quantile(scores, q) + kThresholdMarginBits;
  const double floor = unseen_window_floor(ref, window_len);
  if (!(theta < floor))
    throw DataError("window threshold " + std::to_string(theta) + " bits does not stay below the unseen floor " +
                    std::to_string(floor) + " bits; use a smaller epsilon or window");
  return theta;
}

// ---------------------------------------------------------------------------
// Online reference adaptation

// Counts kept in 32.32 fixed point. Each accepted transition (j -> i)
// scales row j by the retention factor and then adds one observation; row
// totals are exact integer sums of their cells, so probabilities stay
// normalized. Self-information rows are re-derived on demand.
class OnlineReference {
 public:
  static constexpr int kFractionBits = 32;
  static constexpr std::uint64_t kOne = std::uint64_t{1} << kFractionBits;

  OnlineReference(const TransitionCounts& counts, double epsilon, double decay, double threshold_bits)
      : order_(counts.order()),
        threshold_(threshold_bits),
        cells_(counts.order() * counts.order()),
        row_totals_(counts.order()),
        dirty_(counts.order(), 0),
        matrix_(derive_self_info(counts, epsilon)) {
    if (!(decay > 0.0 && decay < 1.0)) throw UsageError("decay factor must lie in (0, 1)");
    if (!(threshold_bits > 0.0)) throw UsageError("threshold must be positive");
    retention_ = static_cast<std::uint64_t>(std::llround(std::ldexp(decay, kFractionBits)));
    for (std::size_t j = 0; j < order_; ++j) {
      if (counts.row_total(static_cast<Bin>(j)) >= kOne) throw DataError("row total too large for online update");
      for (std::size_t i = 0; i < order_; ++i) cells_[j * order_ + i] = counts.at(static_cast<Bin>(j), static_cast<Bin>(i)) << kFractionBits;
      row_totals_[j] = counts.row_total(static_cast<Bin>(j)) << kFractionBits;
    }
  }

  std::size_t order() const noexcept { return order_; }
  double threshold() const noexcept { return threshold_; }
  double retention() const noexcept { return std::ldexp(static_cast<double>(retention_), -kFractionBits); }

  double score(Bin from, Bin to) {
    refresh(from);
    return matrix_(from, to);
  }

  double probability(Bin from, Bin to) const noexcept {
    const auto total = row_totals_[from];
    return total == 0 ? 0.0 : static_cast<double>(cells_[index(from, to)]) / static_cast<double>(total);
  }

  // Fixed-point weight of a cell, in observations.
  double weight(Bin from, Bin to) const noexcept {
    return std::ldexp(static_cast<double>(cells_[index(from, to)]), -kFractionBits);
  }

  // Accepts a transition into the reference. Flagged transitions are
  // rejected so anomalies cannot poison the reference.
  void update(Bin from, Bin to) {
    if (from >= order_ || to >= order_) throw DataError("bin index outside matrix order");
    if (score(from, to) > threshold_) throw UsageError("refusing to update the reference with a flagged transition");
    std::uint64_t* row = cells_.data() + static_cast<std::size_t>(from) * order_;
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < order_; ++i) {
      row[i] = static_cast<std::uint64_t>((static_cast<unsigned __int128>(row[i]) * retention_) >> kFractionBits);
      total += row[i];
    }
    row[to] += kOne;
    row_totals_[from] = total + kOne;
    dirty_[from] = 1;
  }

  // Fully refreshed matrix view.
  const SelfInfoMatrix& matrix() {
    for (std::size_t j = 0; j < order_; ++j) refresh(static_cast<Bin>(j));
    return matrix_;
  }

 private:
  std::size_t index(Bin from, Bin to) const noexcept { return static_cast<std::size_t>(from) * order_ + to; }

  void refresh(Bin from) {
    if (!dirty_[from]) return;
    matrix_.set_row(from, std::span<const std::uint64_t>(cells_).subspan(static_cast<std::size_t>(from) * order_, order_),
                    static_cast<double>(row_totals_[from]));
    dirty_[from] = 0;
  }

  std::size_t order_;
  double threshold_;
  std::uint64_t retention_{0};
  std::vector<std::uint64_t> cells_;
  std::vector<std::uint64_t> row_totals_;
  std::vector<char> dirty_;
  SelfInfoMatrix matrix_;
};

// Streaming detection that folds every accepted transition back into the
// reference.
inline std::vector<AnomalyEvent> detect_streaming_online(OnlineReference& ref, std::span<const Bin> bins,
                                                         std::span<const double> timestamps = {}) {
  if (bins.size() < 2) throw DataError("detection needs at least 2 samples, got fewer than 2 samples");
  detail::check_series(ref.order(), bins, timestamps);
  std::vector<AnomalyEvent> events;
  for (std::size_t k = 1; k < bins.size(); ++k) {
    const Bin j = bins[k - 1];
    const Bin i = bins[k];
    const double s = ref.score(j, i);
    if (s > ref.threshold())
      events.push_back({k, detail::timestamp_at(timestamps, k), j, i, s, DetectionMode::streaming});
    else
      ref.update(j, i);
  }
  return events;
}

// ---------------------------------------------------------------------------
// Event CSV: index,timestamp,prev_bin,cur_bin,score_bits,mode

inline constexpr std::string_view kEventCsvHeader = "index,timestamp,prev_bin,cur_bin,score_bits,mode";

inline std::string format_event(const AnomalyEvent& e) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.6f,%u,%u,%.6f,%s", e.sample_index, e.timestamp, e.prev_bin, e.cur_bin,
                e.score_bits, e.mode == DetectionMode::streaming ? "streaming" : "windowed");
  return buf;
}

inline void write_events_csv(std::ostream& out, std::span<const AnomalyEvent> events) {
  out << kEventCsvHeader << '\n';
  for (const auto& e : events) out << format_event(e) << '\n';
}

inline std::vector<AnomalyEvent> read_events_csv(std::istream& in) {
  if (!in) throw IoError("event stream is not readable");
  std::vector<AnomalyEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text == kEventCsvHeader) continue;
    std::vector<std::string_view> cols;
    std::size_t pos = 0;
    while (true) {
      const auto comma = text.find(',', pos);
      cols.push_back(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (cols.size() != 6) throw ParseError(line_no, "event record needs 6 columns");
    double idx = 0, prev = 0, cur = 0;
    AnomalyEvent e;
    if (!detail::parse_double(cols[0], idx) || idx < 0 || !detail::parse_double(cols[1], e.timestamp) ||
        !detail::parse_double(cols[2], prev) || !detail::parse_double(cols[3], cur) ||
        !detail::parse_double(cols[4], e.score_bits))
      throw ParseError(line_no, "bad numeric field in event record");
    e.sample_index = static_cast<std::size_t>(idx);
    e.prev_bin = static_cast<Bin>(prev);
    e.cur_bin = static_cast<Bin>(cur);
    try {
      e.mode = parse_mode(detail::trim(cols[5]));
    } catch (const UsageError&) {
      throw ParseError(line_no, "unknown mode in event record");
    }
    events.push_back(e);
  }
  return events;
}

}  // namespace siads
