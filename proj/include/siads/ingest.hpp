#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "siads/error.hpp"

namespace siads {

// One classic CAN frame as recorded by candump.
struct CanFrame {
  double timestamp{0.0};
  std::string bus;
  std::uint32_t can_id{0};
  bool extended{false};  // 29-bit identifier (8 hex digits in candump text)
  std::uint8_t length{0};
  std::array<std::uint8_t, 8> payload{};

  std::span<const std::uint8_t> data() const noexcept { return {payload.data(), length}; }
};

// A physical signal value at a point in time.
struct Sample {
  double timestamp{0.0};
  double value{0.0};
};

// Where a physical signal lives inside a frame. The field is an unsigned
// big-endian integer whose most significant bit is bit 7 of `byte_offset`.
struct SignalSpec {
  std::uint32_t can_id{0};
  unsigned byte_offset{0};
  unsigned bit_length{8};
  double scale{1.0};
  double offset{0.0};
  std::string unit{"km/h"};
  double min_physical{0.0};
  double max_physical{250.0};

  unsigned byte_span() const noexcept { return (bit_length + 7) / 8; }

  void validate() const {
    if (bit_length < 1 || bit_length > 64) throw UsageError("signal bit_length must be in 1..64");
    if (byte_offset > 7 || byte_offset + byte_span() > 8)
      throw UsageError("signal does not fit in an 8-byte payload");
    if (scale == 0.0 || !std::isfinite(scale)) throw UsageError("signal scale must be finite and non-zero");
    if (!std::isfinite(offset)) throw UsageError("signal offset must be finite");
    if (!(min_physical < max_physical)) throw UsageError("signal min_physical must be below max_physical");
  }
};

struct DecodedSample {
  Sample sample;
  bool out_of_range{false};
};

enum class TraceFormat { automatic, candump, csv };

struct LineError {
  std::size_t line{0};
  std::string message;
};

struct TraceParseResult {
  TraceFormat format{TraceFormat::automatic};
  std::vector<CanFrame> frames;   // candump input
  std::vector<Sample> samples;    // csv input
  std::vector<LineError> errors;  // malformed lines, in file order
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

inline int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace detail

// Parses `(<secs>.<usecs>) <bus> <ID>#<payload>`.
inline CanFrame parse_candump_line(std::string_view line, std::size_t line_no = 1) {
  line = detail::trim(line);
  if (line.size() < 2 || line.front() != '(') throw ParseError(line_no, "expected '(' timestamp");
  const auto close = line.find(')');
  if (close == std::string_view::npos) throw ParseError(line_no, "unterminated timestamp");

  CanFrame frame;
  if (!detail::parse_double(line.substr(1, close - 1), frame.timestamp) || frame.timestamp < 0)
    throw ParseError(line_no, "bad timestamp");

  auto rest = detail::trim(line.substr(close + 1));
  const auto space = rest.find_first_of(" \t");
  if (space == std::string_view::npos || space == 0) throw ParseError(line_no, "missing bus or frame field");
  frame.bus = std::string(rest.substr(0, space));
  const auto body = detail::trim(rest.substr(space));

  const auto hash = body.find('#');
  if (hash == std::string_view::npos) throw ParseError(line_no, "missing '#' separator");
  const auto id_text = body.substr(0, hash);
  auto payload_text = body.substr(hash + 1);
  if (id_text.size() != 3 && id_text.size() != 8) throw ParseError(line_no, "identifier must have 3 or 8 hex digits");
  if (!payload_text.empty() && (payload_text.front() == '#' || payload_text.front() == 'R'))
    throw ParseError(line_no, "CAN-FD and remote frames are not supported");

  std::uint32_t id = 0;
  for (char c : id_text) {
    const int d = detail::hex_digit(c);
    if (d < 0) throw ParseError(line_no, "bad identifier hex");
    id = (id << 4) | static_cast<std::uint32_t>(d);
  }
  frame.extended = id_text.size() == 8;
  if (frame.extended ? id >= (1u << 29) : id >= (1u << 11)) throw ParseError(line_no, "identifier out of range");
  frame.can_id = id;

  if (payload_text.size() % 2 != 0 || payload_text.size() > 16) throw ParseError(line_no, "bad payload length");
  frame.length = static_cast<std::uint8_t>(payload_text.size() / 2);
  for (std::size_t b = 0; b < frame.length; ++b) {
    const int hi = detail::hex_digit(payload_text[2 * b]);
    const int lo = detail::hex_digit(payload_text[2 * b + 1]);
    if (hi < 0 || lo < 0) throw ParseError(line_no, "bad payload hex");
    frame.payload[b] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return frame;
}

inline std::string format_candump_line(const CanFrame& frame) {
  char head[64];
  std::snprintf(head, sizeof head, "(%.6f) ", frame.timestamp);
  std::string out = head;
  out += frame.bus;
  char id[16];
  std::snprintf(id, sizeof id, frame.extended ? " %08X#" : " %03X#", static_cast<unsigned>(frame.can_id));
  out += id;
  static constexpr char kHex[] = "0123456789ABCDEF";
  for (auto byte : frame.data()) {
    out += kHex[byte >> 4];
    out += kHex[byte & 0xF];
  }
  return out;
}

// Parses `timestamp,value`.
inline Sample parse_csv_sample_line(std::string_view line, std::size_t line_no = 1) {
  line = detail::trim(line);
  const auto comma = line.find(',');
  if (comma == std::string_view::npos) throw ParseError(line_no, "expected 'timestamp,value'");
  Sample s;
  if (!detail::parse_double(line.substr(0, comma), s.timestamp)) throw ParseError(line_no, "bad timestamp");
  if (!detail::parse_double(line.substr(comma + 1), s.value)) throw ParseError(line_no, "bad value");
  return s;
}

// Reads a whole trace. Malformed lines are collected in `errors` and
// parsing continues with the next line.
inline TraceParseResult parse_trace(std::istream& in, TraceFormat format = TraceFormat::automatic) {
  if (!in) throw IoError("trace stream is not readable");
  TraceParseResult result;
  result.format = format;

  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;

    const bool first = !seen_content;
    seen_content = true;
    if (result.format == TraceFormat::automatic)
      result.format = text.front() == '(' ? TraceFormat::candump : TraceFormat::csv;

    try {
      if (result.format == TraceFormat::candump) {
        result.frames.push_back(parse_candump_line(text, line_no));
      } else {
        const bool looks_like_header =
            first && std::any_of(text.begin(), text.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); }) &&
            text.find(',') != std::string_view::npos;
        try {
          result.samples.push_back(parse_csv_sample_line(text, line_no));
        } catch (const ParseError&) {
          if (!looks_like_header) throw;
        }
      }
    } catch (const ParseError& e) {
      result.errors.push_back({line_no, e.what()});
    }
  }
  if (in.bad()) throw IoError("error while reading trace stream");
  return result;
}

inline DecodedSample decode_signal(const CanFrame& frame, const SignalSpec& spec) {
  if (frame.can_id != spec.can_id) throw DataError("frame identifier does not match the signal filter");
  if (frame.length < spec.byte_offset + spec.byte_span()) throw DataError("payload too short for signal");

  std::uint64_t acc = 0;
  for (unsigned b = 0; b < spec.byte_span(); ++b) acc = (acc << 8) | frame.payload[spec.byte_offset + b];
  const std::uint64_t raw = acc >> (spec.byte_span() * 8 - spec.bit_length);

  DecodedSample out;
  out.sample.timestamp = frame.timestamp;
  out.sample.value = static_cast<double>(raw) * spec.scale + spec.offset;
  out.out_of_range = out.sample.value < spec.min_physical || out.sample.value > spec.max_physical;
  return out;
}

struct DecodedSeries {
  std::vector<Sample> samples;
  std::size_t out_of_range{0};
  std::size_t skipped{0};  // frames with other identifiers
};

// Extracts one signal from a frame log, ignoring other identifiers.
inline DecodedSeries decode_trace(std::span<const CanFrame> frames, const SignalSpec& spec) {
  spec.validate();
  DecodedSeries out;
  out.samples.reserve(frames.size());
  for (const auto& frame : frames) {
    if (frame.can_id != spec.can_id) {
      ++out.skipped;
      continue;
    }
    const auto decoded = decode_signal(frame, spec);
    out.samples.push_back(decoded.sample);
    if (decoded.out_of_range) ++out.out_of_range;
  }
  return out;
}

struct SampleGap {
  std::size_t index{0};  // sample that follows the gap
  double interval_s{0.0};
};

struct RateReport {
  std::size_t samples{0};
  double duration_s{0.0};
  double mean_rate_hz{0.0};
  double median_interval_s{0.0};
  std::vector<SampleGap> gaps;  // intervals above 3x the median
};

inline RateReport resample_check(std::span<const Sample> samples) {
  if (samples.size() < 2) throw DataError("rate check needs at least 2 samples");
  RateReport report;
  report.samples = samples.size();
  report.duration_s = samples.back().timestamp - samples.front().timestamp;
  if (!(report.duration_s > 0.0)) throw DataError("trace has no time extent");
  report.mean_rate_hz = static_cast<double>(samples.size() - 1) / report.duration_s;

  std::vector<double> intervals(samples.size() - 1);
  for (std::size_t k = 1; k < samples.size(); ++k) intervals[k - 1] = samples[k].timestamp - samples[k - 1].timestamp;
  auto sorted = intervals;
  const auto mid = sorted.size() / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  double median = sorted[mid];
  if (sorted.size() % 2 == 0) {
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  report.median_interval_s = median;
  for (std::size_t k = 0; k < intervals.size(); ++k)
    if (intervals[k] > 3.0 * median) report.gaps.push_back({k + 1, intervals[k]});
  return report;
}

}  // namespace siads
