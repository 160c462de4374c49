#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <iterator>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "siads/error.hpp"
#include "siads/ingest.hpp"
#include "siads/rng.hpp"

namespace siads {

enum class AttackKind { one_time, replay };

inline std::string_view to_string(AttackKind k) { return k == AttackKind::one_time ? "one_time" : "replay"; }

inline AttackKind parse_attack_kind(std::string_view s) {
  if (s == "one_time") return AttackKind::one_time;
  if (s == "replay") return AttackKind::replay;
  throw UsageError("unknown attack kind '" + std::string(s) + "'");
}

struct AttackSpec {
  AttackKind kind{AttackKind::one_time};
  std::size_t target_index{0};  // one_time
  double deviation_pct{20.0};   // one_time
  std::size_t src_start{0};     // replay
  std::size_t src_len{0};
  std::size_t dst_index{0};
  std::uint64_t rng_seed{0};

  static AttackSpec one_time(std::size_t index, double deviation_pct, std::uint64_t seed = 0) {
    AttackSpec s;
    s.kind = AttackKind::one_time;
    s.target_index = index;
    s.deviation_pct = deviation_pct;
    s.rng_seed = seed;
    return s;
  }

  static AttackSpec replay(std::size_t src_start, std::size_t src_len, std::size_t dst_index, std::uint64_t seed = 0) {
    AttackSpec s;
    s.kind = AttackKind::replay;
    s.src_start = src_start;
    s.src_len = src_len;
    s.dst_index = dst_index;
    s.rng_seed = seed;
    return s;
  }

  // First and last sample index the attack rewrites.
  std::size_t first() const noexcept { return kind == AttackKind::one_time ? target_index : dst_index; }
  std::size_t last() const noexcept { return kind == AttackKind::one_time ? target_index : dst_index + src_len - 1; }

  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

// Inclusive range of sample indices touched by one attack.
struct TruthRange {
  AttackKind kind{AttackKind::one_time};
  std::size_t start{0};
  std::size_t end{0};

  friend bool operator==(const TruthRange&, const TruthRange&) = default;
};

class GroundTruth {
 public:
  void add(const TruthRange& r) {
    if (r.end < r.start) throw DataError("ground-truth range is reversed");
    auto pos = std::lower_bound(ranges_.begin(), ranges_.end(), r,
                                [](const TruthRange& a, const TruthRange& b) { return a.start < b.start; });
    if (pos != ranges_.end() && pos->start <= r.end) throw DataError("ground-truth ranges overlap");
    if (pos != ranges_.begin() && std::prev(pos)->end >= r.start) throw DataError("ground-truth ranges overlap");
    ranges_.insert(pos, r);
  }

  void merge(const GroundTruth& other) {
    for (const auto& r : other.ranges()) add(r);
  }

  std::span<const TruthRange> ranges() const noexcept { return ranges_; }
  std::size_t size() const noexcept { return ranges_.size(); }
  bool empty() const noexcept { return ranges_.empty(); }

  std::size_t covered_samples() const noexcept {
    std::size_t n = 0;
    for (const auto& r : ranges_) n += r.end - r.start + 1;
    return n;
  }

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;

 private:
  std::vector<TruthRange> ranges_;
};

enum class OneTimeValue { deviation, uniform_random };

struct InjectOptions {
  double min_valid{0.0};
  double max_valid{250.0};
  bool strict{false};  // reject deviations leaving the valid range instead of clamping
  OneTimeValue value_mode{OneTimeValue::deviation};
};

struct Injection {
  std::vector<Sample> samples;
  GroundTruth truth;
};

namespace detail {

inline double one_time_value(double clean, const AttackSpec& spec, const InjectOptions& opts) {
  if (opts.value_mode == OneTimeValue::uniform_random) {
    Rng rng(spec.rng_seed);
    return rng.uniform(opts.min_valid, opts.max_valid);
  }
  const double v = clean * (1.0 + spec.deviation_pct / 100.0);
  if (opts.strict && (v < opts.min_valid || v > opts.max_valid))
    throw DataError("deviated value " + std::to_string(v) + " leaves the valid range");
  return std::clamp(v, opts.min_valid, opts.max_valid);
}

inline void check_replay(const AttackSpec& spec, std::size_t n) {
  if (spec.src_len == 0) throw DataError("replay length must be at least 1");
  if (spec.src_start + spec.src_len > n || spec.dst_index + spec.src_len > n)
    throw DataError("replay range outside the trace");
  const bool disjoint = spec.src_start + spec.src_len <= spec.dst_index || spec.dst_index + spec.src_len <= spec.src_start;
  if (!disjoint) throw DataError("replay source and destination overlap");
}

}  // namespace detail

inline Injection inject_one_time(std::span<const Sample> samples, const AttackSpec& spec,
                                 const InjectOptions& opts = {}) {
  if (spec.kind != AttackKind::one_time) throw UsageError("spec is not a one-time attack");
  if (spec.target_index >= samples.size()) throw DataError("one-time target index out of range");
  Injection out{{samples.begin(), samples.end()}, {}};
  out.samples[spec.target_index].value = detail::one_time_value(samples[spec.target_index].value, spec, opts);
  out.truth.add({AttackKind::one_time, spec.target_index, spec.target_index});
  return out;
}

// Content replay: destination timestamps are kept, values are copied.
inline Injection inject_replay(std::span<const Sample> samples, const AttackSpec& spec) {
  if (spec.kind != AttackKind::replay) throw UsageError("spec is not a replay attack");
  detail::check_replay(spec, samples.size());
  Injection out{{samples.begin(), samples.end()}, {}};
  for (std::size_t k = 0; k < spec.src_len; ++k) out.samples[spec.dst_index + k].value = samples[spec.src_start + k].value;
  out.truth.add({AttackKind::replay, spec.dst_index, spec.dst_index + spec.src_len - 1});
  return out;
}

// Applies every attack; replay sources always read the clean trace.
inline Injection apply_campaign(std::span<const Sample> clean, std::span<const AttackSpec> campaign,
                                const InjectOptions& opts = {}) {
  Injection out{{clean.begin(), clean.end()}, {}};
  for (const auto& spec : campaign) {
    if (spec.kind == AttackKind::one_time) {
      if (spec.target_index >= clean.size()) throw DataError("one-time target index out of range");
      out.samples[spec.target_index].value = detail::one_time_value(clean[spec.target_index].value, spec, opts);
      out.truth.add({AttackKind::one_time, spec.target_index, spec.target_index});
    } else {
      detail::check_replay(spec, clean.size());
      for (std::size_t k = 0; k < spec.src_len; ++k)
        out.samples[spec.dst_index + k].value = clean[spec.src_start + k].value;
      out.truth.add({AttackKind::replay, spec.dst_index, spec.dst_index + spec.src_len - 1});
    }
  }
  return out;
}

struct CampaignOptions {
  double deviation_pct{20.0};
  std::size_t min_separation{128};  // samples between any two attacked ranges
  std::size_t replay_len_min{260};
  std::size_t replay_len_max{1300};
  // Used only when planning against an actual trace: attacks whose effect
  // on the signal would be smaller are redrawn.
  double min_target_value{0.0};  // one-time targets must be at least this large
  double min_replay_jump{0.0};   // |replayed onset value - overwritten value|
  std::size_t max_draws{10000};
};

namespace detail {

template <typename Accept>
std::vector<AttackSpec> plan(std::size_t trace_len, std::size_t n_one_time, std::size_t n_replay, std::uint64_t seed,
                             const CampaignOptions& opts, Accept&& accept) {
  const std::size_t total = n_one_time + n_replay;
  if (total == 0) return {};
  if (opts.replay_len_min == 0 || opts.replay_len_min > opts.replay_len_max)
    throw UsageError("replay length bounds are invalid");

  const std::size_t segment = trace_len / total;
  const std::size_t margin = opts.min_separation / 2 + 1;
  const std::size_t footprint = n_replay > 0 ? opts.replay_len_min : 1;
  if (segment < 2 * margin + footprint || (n_replay > 0 && trace_len < 2 * opts.replay_len_min + 2))
    throw DataError("trace of " + std::to_string(trace_len) + " samples is too short for a campaign of " +
                    std::to_string(total) + " attacks");

  Rng rng(seed);
  std::vector<AttackKind> kinds(n_one_time, AttackKind::one_time);
  kinds.insert(kinds.end(), n_replay, AttackKind::replay);
  for (std::size_t k = kinds.size(); k > 1; --k) std::swap(kinds[k - 1], kinds[rng.below(k)]);

  std::vector<AttackSpec> specs;
  specs.reserve(total);
  for (std::size_t k = 0; k < total; ++k) {
    const std::size_t lo = k * segment + margin;
    const std::size_t hi_end = (k + 1) * segment - margin;  // exclusive end of the usable slot
    const std::uint64_t attack_seed = derive_seed(seed, k);
    bool placed = false;
    for (std::size_t draw = 0; draw < opts.max_draws && !placed; ++draw) {
      AttackSpec spec;
      if (kinds[k] == AttackKind::one_time) {
        spec = AttackSpec::one_time(rng.between(lo, hi_end - 1), opts.deviation_pct, attack_seed);
      } else {
        const std::size_t len_cap = std::min(opts.replay_len_max, hi_end - lo);
        const std::size_t len = rng.between(opts.replay_len_min, len_cap);
        const std::size_t dst = rng.between(lo, hi_end - len);
        // source anywhere in the trace that does not overlap the destination
        const std::size_t candidates = trace_len - len + 1;
        std::size_t src = rng.below(candidates);
        if (src + len > dst && dst + len > src) {
          const std::size_t before = dst >= len ? dst - len + 1 : 0;  // sources ending before dst
          const std::size_t after = trace_len - len >= dst + len ? trace_len - len - (dst + len) + 1 : 0;
          if (before + after == 0) continue;
          const std::size_t pick = rng.below(before + after);
          src = pick < before ? pick : dst + len + (pick - before);
        }
        spec = AttackSpec::replay(src, len, dst, attack_seed);
      }
      placed = accept(spec);
      if (placed) specs.push_back(spec);
    }
    if (!placed) throw DataError("could not place attack " + std::to_string(k) + " with the requested effect");
  }
  return specs;
}

}  // namespace detail

// Spreads the attacks over equal slots of the trace, one per slot, in a
// seeded random order.
inline std::vector<AttackSpec> plan_campaign(std::size_t trace_len, std::size_t n_one_time, std::size_t n_replay,
                                             std::uint64_t seed, const CampaignOptions& opts = {}) {
  return detail::plan(trace_len, n_one_time, n_replay, seed, opts, [](const AttackSpec&) { return true; });
}

// Trace-aware variant: redraws positions until each attack changes the
// signal by the minimum effect in `opts`.
inline std::vector<AttackSpec> plan_campaign(std::span<const Sample> clean, std::size_t n_one_time,
                                             std::size_t n_replay, std::uint64_t seed,
                                             const CampaignOptions& opts = {}) {
  return detail::plan(clean.size(), n_one_time, n_replay, seed, opts, [&](const AttackSpec& s) {
    if (s.kind == AttackKind::one_time) return std::abs(clean[s.target_index].value) >= opts.min_target_value;
    return std::abs(clean[s.src_start].value - clean[s.dst_index].value) >= opts.min_replay_jump;
  });
}

// ---------------------------------------------------------------------------
// Campaign CSV: kind,param1,param2,param3,seed
//   one_time: target_index, deviation_pct, 0
//   replay:   src_start, src_len, dst_index
// Ground truth CSV: kind,start,end (inclusive)

inline constexpr std::string_view kCampaignCsvHeader = "kind,param1,param2,param3,seed";
inline constexpr std::string_view kTruthCsvHeader = "kind,start,end";

namespace detail {

inline std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split_csv(std::string_view text) {
  std::vector<std::string_view> cols;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    cols.push_back(trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) return cols;
    pos = comma + 1;
  }
}

inline std::uint64_t parse_unsigned(std::string_view s, std::size_t line_no) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) throw ParseError(line_no, "bad integer field");
  return v;
}

}  // namespace detail

inline void write_campaign_csv(std::ostream& out, std::span<const AttackSpec> campaign) {
  out << kCampaignCsvHeader << '\n';
  for (const auto& s : campaign) {
    if (s.kind == AttackKind::one_time)
      out << "one_time," << s.target_index << ',' << detail::shortest(s.deviation_pct) << ",0," << s.rng_seed << '\n';
    else
      out << "replay," << s.src_start << ',' << s.src_len << ',' << s.dst_index << ',' << s.rng_seed << '\n';
  }
}

inline std::vector<AttackSpec> read_campaign_csv(std::istream& in) {
  if (!in) throw IoError("campaign stream is not readable");
  std::vector<AttackSpec> campaign;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text == kCampaignCsvHeader) continue;
    const auto cols = detail::split_csv(text);
    if (cols.size() != 5) throw ParseError(line_no, "campaign record needs 5 columns");
    const auto seed = detail::parse_unsigned(cols[4], line_no);
    if (cols[0] == "one_time") {
      double dev = 0;
      if (!detail::parse_double(cols[2], dev)) throw ParseError(line_no, "bad deviation");
      campaign.push_back(AttackSpec::one_time(detail::parse_unsigned(cols[1], line_no), dev, seed));
    } else if (cols[0] == "replay") {
      campaign.push_back(AttackSpec::replay(detail::parse_unsigned(cols[1], line_no),
                                            detail::parse_unsigned(cols[2], line_no),
                                            detail::parse_unsigned(cols[3], line_no), seed));
    } else {
      throw ParseError(line_no, "unknown attack kind");
    }
  }
  return campaign;
}

inline void write_truth_csv(std::ostream& out, const GroundTruth& truth) {
  out << kTruthCsvHeader << '\n';
  for (const auto& r : truth.ranges()) out << to_string(r.kind) << ',' << r.start << ',' << r.end << '\n';
}

inline GroundTruth read_truth_csv(std::istream& in) {
  if (!in) throw IoError("ground-truth stream is not readable");
  GroundTruth truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text == kTruthCsvHeader) continue;
    const auto cols = detail::split_csv(text);
    if (cols.size() != 3) throw ParseError(line_no, "ground-truth record needs 3 columns");
    AttackKind kind{};
    try {
      kind = parse_attack_kind(cols[0]);
    } catch (const UsageError&) {
      throw ParseError(line_no, "unknown attack kind");
    }
    try {
      truth.add({kind, detail::parse_unsigned(cols[1], line_no), detail::parse_unsigned(cols[2], line_no)});
    } catch (const ParseError&) {
      throw;
    } catch (const DataError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return truth;
}

}  // namespace siads
