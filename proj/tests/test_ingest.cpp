#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "siads/ingest.hpp"
#include "siads/rng.hpp"

using namespace siads;

TEST(Candump, ParsesFields) {
  const auto f = parse_candump_line("(1609459200.123456) can0 0D0#1027");
  EXPECT_DOUBLE_EQ(f.timestamp, 1609459200.123456);
  EXPECT_EQ(f.bus, "can0");
  EXPECT_EQ(f.can_id, 0x0D0u);
  EXPECT_FALSE(f.extended);
  ASSERT_EQ(f.length, 2);
  EXPECT_EQ(f.payload[0], 0x10);
  EXPECT_EQ(f.payload[1], 0x27);
}

TEST(Candump, ExtendedAndEmptyPayload) {
  const auto f = parse_candump_line("(0.000001) vcan1 18DAF110#");
  EXPECT_TRUE(f.extended);
  EXPECT_EQ(f.can_id, 0x18DAF110u);
  EXPECT_EQ(f.length, 0);
  EXPECT_EQ(format_candump_line(f), "(0.000001) vcan1 18DAF110#");
}

TEST(Candump, RejectsMalformed) {
  EXPECT_THROW(parse_candump_line("(1.0) can0 0D0#102"), ParseError);         // odd payload
  EXPECT_THROW(parse_candump_line("(1.0) can0 0D0#112233445566778899"), ParseError);
  EXPECT_THROW(parse_candump_line("(1.0) can0 8D0#10"), ParseError);          // > 11 bit
  EXPECT_THROW(parse_candump_line("(1.0) can0 0D0##11"), ParseError);         // CAN-FD
  EXPECT_THROW(parse_candump_line("1.0 can0 0D0#10"), ParseError);
  EXPECT_THROW(parse_candump_line("(x) can0 0D0#10"), ParseError);
  EXPECT_THROW(parse_candump_line("(1.0) can0 0D0"), ParseError);
}

TEST(Candump, ReserializeKeepsPayloadHex) {
  Rng rng(11);
  for (int n = 0; n < 500; ++n) {
    CanFrame f;
    f.extended = rng.chance(0.3);
    f.can_id = static_cast<std::uint32_t>(rng.below(f.extended ? (1u << 29) : (1u << 11)));
    f.length = static_cast<std::uint8_t>(rng.below(9));
    for (int b = 0; b < f.length; ++b) f.payload[b] = static_cast<std::uint8_t>(rng.below(256));
    f.timestamp = static_cast<double>(rng.below(2000000000)) + static_cast<double>(rng.below(1000000)) * 1e-6;
    f.bus = "can" + std::to_string(rng.below(4));
    const auto line = format_candump_line(f);
    const auto back = parse_candump_line(line);
    EXPECT_EQ(format_candump_line(back), line);
    EXPECT_EQ(line.substr(line.find('#')), format_candump_line(f).substr(line.find('#')));
  }
}

TEST(Csv, ParsesSample) {
  const auto s = parse_csv_sample_line("0.000000,52.0");
  EXPECT_EQ(s.timestamp, 0.0);
  EXPECT_EQ(s.value, 52.0);
}

TEST(ParseTrace, InfersFormatAndCollectsErrors) {
  std::istringstream csv("timestamp,value\n0.0,52.0\n\n0.5,oops\n1.0,53.5\n");
  const auto r = parse_trace(csv);
  EXPECT_EQ(r.format, TraceFormat::csv);
  ASSERT_EQ(r.samples.size(), 2u);
  EXPECT_EQ(r.samples[1].value, 53.5);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 4u);

  std::istringstream dump("(1.000000) can0 0D0#1027\nnot a frame\n(1.003846) can0 0D0#1028\n");
  const auto d = parse_trace(dump);
  EXPECT_EQ(d.format, TraceFormat::candump);
  EXPECT_EQ(d.frames.size(), 2u);
  ASSERT_EQ(d.errors.size(), 1u);
  EXPECT_EQ(d.errors[0].line, 2u);
}

TEST(ParseTrace, GarbageNamesLineOne) {
  std::istringstream in("garbage\n");
  const auto r = parse_trace(in);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 1u);
  EXPECT_NE(r.errors[0].message.find("line 1"), std::string::npos);
  EXPECT_TRUE(r.samples.empty());
}

TEST(ParseTrace, UnreadableStream) {
  std::istringstream in;
  in.setstate(std::ios::badbit);
  EXPECT_THROW(parse_trace(in), IoError);
}

namespace {
SignalSpec spec16() {
  SignalSpec s;
  s.can_id = 0x0D0;
  s.byte_offset = 0;
  s.bit_length = 16;
  s.scale = 0.01;
  return s;
}
}  // namespace

TEST(DecodeSignal, BigEndianScaled) {
  const auto frame = parse_candump_line("(0.5) can0 0D0#1027");
  const auto d = decode_signal(frame, spec16());
  EXPECT_NEAR(d.sample.value, 41.35, 1e-12);
  EXPECT_FALSE(d.out_of_range);
  EXPECT_EQ(d.sample.timestamp, 0.5);
}

TEST(DecodeSignal, SingleByte) {
  SignalSpec s;
  s.can_id = 0x123;
  s.bit_length = 8;
  const auto d = decode_signal(parse_candump_line("(0) can0 123#A0"), s);
  EXPECT_EQ(d.sample.value, 160.0);
}

TEST(DecodeSignal, FlagsOutOfRangeWithoutFailing) {
  SignalSpec s;
  s.can_id = 0x123;
  s.max_physical = 100.0;
  const auto d = decode_signal(parse_candump_line("(0) can0 123#FF"), s);
  EXPECT_EQ(d.sample.value, 255.0);
  EXPECT_TRUE(d.out_of_range);
}

TEST(DecodeSignal, Errors) {
  EXPECT_THROW(decode_signal(parse_candump_line("(0) can0 0D0#10"), spec16()), DataError);
  EXPECT_THROW(decode_signal(parse_candump_line("(0) can0 0D1#1027"), spec16()), DataError);
  SignalSpec bad = spec16();
  bad.byte_offset = 7;
  EXPECT_THROW(bad.validate(), UsageError);
}

namespace {
// Test-only inverse of decode_signal.
CanFrame encode(std::uint64_t raw, const SignalSpec& spec) {
  CanFrame f;
  f.can_id = spec.can_id;
  f.length = 8;
  const std::uint64_t shifted = raw << (spec.byte_span() * 8 - spec.bit_length);
  for (unsigned b = 0; b < spec.byte_span(); ++b)
    f.payload[spec.byte_offset + b] = static_cast<std::uint8_t>(shifted >> (8 * (spec.byte_span() - 1 - b)));
  return f;
}
}  // namespace

TEST(DecodeSignal, RoundTripsThroughTestEncoder) {
  Rng rng(5);
  for (int n = 0; n < 2000; ++n) {
    SignalSpec s;
    s.can_id = 0x200;
    s.bit_length = 1 + static_cast<unsigned>(rng.below(52));
    s.byte_offset = static_cast<unsigned>(rng.below(8 - s.byte_span() + 1));
    s.scale = rng.chance(0.5) ? 0.01 : 0.5;
    s.offset = rng.chance(0.5) ? 0.0 : -40.0;
    s.validate();
    const std::uint64_t raw = rng.below(std::uint64_t{1} << s.bit_length);
    const double value = static_cast<double>(raw) * s.scale + s.offset;
    const auto d = decode_signal(encode(raw, s), s);
    EXPECT_EQ(d.sample.value, value) << "bits=" << s.bit_length << " offset=" << s.byte_offset;
  }
}

TEST(DecodeTrace, FiltersOtherIds) {
  std::istringstream in("(0.0) can0 0D0#1027\n(0.1) can0 1A0#FFFF\n(0.2) can0 0D0#1028\n");
  const auto parsed = parse_trace(in);
  const auto series = decode_trace(parsed.frames, spec16());
  ASSERT_EQ(series.samples.size(), 2u);
  EXPECT_EQ(series.skipped, 1u);
  EXPECT_NEAR(series.samples[1].value, 41.36, 1e-12);
}

TEST(ResampleCheck, UniformRate) {
  std::vector<Sample> s;
  for (int k = 0; k < 260; ++k) s.push_back({k / 260.0, 50.0});
  const auto r = resample_check(s);
  EXPECT_NEAR(r.mean_rate_hz, 260.0, 1e-9);
  EXPECT_TRUE(r.gaps.empty());
}

TEST(ResampleCheck, TwoSamples) {
  const std::vector<Sample> s{{0.0, 1.0}, {1.0, 1.0}};
  const auto r = resample_check(s);
  EXPECT_DOUBLE_EQ(r.mean_rate_hz, 1.0);
  EXPECT_TRUE(r.gaps.empty());
}

TEST(ResampleCheck, ReportsGap) {
  std::vector<Sample> s;
  for (int k = 0; k <= 10; ++k) s.push_back({k * 0.01, 0.0});
  s.push_back({5.0, 0.0});
  const auto r = resample_check(s);
  ASSERT_EQ(r.gaps.size(), 1u);
  EXPECT_EQ(r.gaps[0].index, 11u);
  EXPECT_THROW(resample_check(std::span<const Sample>(s).first(1)), DataError);
}
