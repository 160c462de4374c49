#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "siads/eval.hpp"
#include "siads/inject.hpp"

using namespace siads;

namespace {
std::vector<Sample> ramp(std::size_t n, double base = 50.0) {
  std::vector<Sample> s(n);
  for (std::size_t k = 0; k < n; ++k) s[k] = {static_cast<double>(k) / 260.0, base + static_cast<double>(k % 97) * 0.5};
  return s;
}

std::set<std::size_t> diff(const std::vector<Sample>& a, const std::vector<Sample>& b) {
  std::set<std::size_t> out;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k].value != b[k].value || a[k].timestamp != b[k].timestamp) out.insert(k);
  return out;
}
}  // namespace

TEST(OneTime, MultipliesTargetOnly) {
  auto clean = ramp(200);
  clean[17].value = 100.0;
  const auto r = inject_one_time(clean, AttackSpec::one_time(17, 40.0));
  EXPECT_DOUBLE_EQ(r.samples[17].value, 140.0);
  EXPECT_EQ(diff(clean, r.samples), std::set<std::size_t>{17});
  ASSERT_EQ(r.truth.size(), 1u);
  EXPECT_EQ(r.truth.ranges()[0], (TruthRange{AttackKind::one_time, 17, 17}));
}

TEST(OneTime, ZeroDeviationStillRecorded) {
  const auto clean = ramp(50);
  const auto r = inject_one_time(clean, AttackSpec::one_time(5, 0.0));
  EXPECT_TRUE(diff(clean, r.samples).empty());
  EXPECT_EQ(r.truth.size(), 1u);
}

TEST(OneTime, ClampOrStrict) {
  auto clean = ramp(50);
  clean[3].value = 150.0;
  InjectOptions opts;
  opts.max_valid = 160.0;
  EXPECT_EQ(inject_one_time(clean, AttackSpec::one_time(3, 40.0), opts).samples[3].value, 160.0);
  opts.strict = true;
  EXPECT_THROW(inject_one_time(clean, AttackSpec::one_time(3, 40.0), opts), DataError);
  EXPECT_THROW(inject_one_time(clean, AttackSpec::one_time(50, 10.0)), DataError);
}

TEST(OneTime, UniformRandomMode) {
  const auto clean = ramp(50);
  InjectOptions opts;
  opts.value_mode = OneTimeValue::uniform_random;
  opts.max_valid = 160.0;
  const auto a = inject_one_time(clean, AttackSpec::one_time(9, 0.0, 77), opts);
  const auto b = inject_one_time(clean, AttackSpec::one_time(9, 0.0, 77), opts);
  EXPECT_EQ(a.samples[9].value, b.samples[9].value);
  EXPECT_GE(a.samples[9].value, 0.0);
  EXPECT_LE(a.samples[9].value, 160.0);
}

TEST(Replay, CopiesValuesKeepsTimestamps) {
  const auto clean = ramp(800);
  const auto r = inject_replay(clean, AttackSpec::replay(100, 100, 500));
  for (std::size_t k = 0; k < 100; ++k) {
    ASSERT_EQ(r.samples[500 + k].value, clean[100 + k].value);
    ASSERT_EQ(r.samples[500 + k].timestamp, clean[500 + k].timestamp);
  }
  for (auto k : diff(clean, r.samples)) {
    EXPECT_GE(k, 500u);
    EXPECT_LT(k, 600u);
  }
  EXPECT_EQ(r.truth.ranges()[0], (TruthRange{AttackKind::replay, 500, 599}));
}

TEST(Replay, LengthOneIsHistoricalSubstitution) {
  const auto clean = ramp(100);
  const auto r = inject_replay(clean, AttackSpec::replay(10, 1, 60));
  EXPECT_EQ(r.samples[60].value, clean[10].value);
  EXPECT_EQ(diff(clean, r.samples), std::set<std::size_t>{60});
}

TEST(Replay, Errors) {
  const auto clean = ramp(100);
  EXPECT_THROW(inject_replay(clean, AttackSpec::replay(10, 20, 25)), DataError);
  EXPECT_THROW(inject_replay(clean, AttackSpec::replay(10, 0, 50)), DataError);
  EXPECT_THROW(inject_replay(clean, AttackSpec::replay(10, 20, 90)), DataError);
}

TEST(GroundTruth, SortedAndDisjoint) {
  GroundTruth t;
  t.add({AttackKind::replay, 50, 60});
  t.add({AttackKind::one_time, 10, 10});
  EXPECT_EQ(t.ranges()[0].start, 10u);
  EXPECT_THROW(t.add({AttackKind::one_time, 55, 55}), DataError);
  EXPECT_THROW(t.add({AttackKind::replay, 5, 10}), DataError);
  EXPECT_EQ(t.covered_samples(), 12u);
}

TEST(Campaign, ScenarioProtocols) {
  const auto urban = plan_campaign(263023, 3, 9, 7);
  ASSERT_EQ(urban.size(), 12u);
  EXPECT_EQ(std::count_if(urban.begin(), urban.end(), [](auto& s) { return s.kind == AttackKind::replay; }), 9);
  EXPECT_EQ(urban, plan_campaign(263023, 3, 9, 7));
  EXPECT_NE(urban, plan_campaign(263023, 3, 9, 8));

  const auto highway = plan_campaign(274487, 6, 0, 7);
  ASSERT_EQ(highway.size(), 6u);
  for (const auto& s : highway) EXPECT_EQ(s.kind, AttackKind::one_time);

  EXPECT_THROW(plan_campaign(10, 6, 9, 7), DataError);
  EXPECT_TRUE(plan_campaign(10, 0, 0, 7).empty());
}

TEST(Campaign, SeparationAndValidity) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    CampaignOptions opts;
    const auto specs = plan_campaign(263023, 3, 9, seed, opts);
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& s : specs) {
      ranges.emplace_back(s.first(), s.last());
      if (s.kind == AttackKind::replay) {
        ASSERT_GE(s.src_len, opts.replay_len_min);
        ASSERT_LE(s.src_len, opts.replay_len_max);
        ASSERT_TRUE(s.src_start + s.src_len <= s.dst_index || s.dst_index + s.src_len <= s.src_start);
        ASSERT_LE(s.src_start + s.src_len, 263023u);
      }
    }
    std::sort(ranges.begin(), ranges.end());
    for (std::size_t k = 1; k < ranges.size(); ++k) ASSERT_GE(ranges[k].first - ranges[k - 1].second, opts.min_separation);
    ASSERT_GE(ranges.front().first, 1u);
  }
}

TEST(Campaign, TraceAwareEffect) {
  const auto clean = gen_drive_trace(Scenario::urban, 100000, 3);
  CampaignOptions opts;
  opts.min_target_value = 20.0;
  opts.min_replay_jump = 5.0;
  const auto specs = plan_campaign(clean, 3, 9, 11, opts);
  for (const auto& s : specs) {
    if (s.kind == AttackKind::one_time)
      EXPECT_GE(clean[s.target_index].value, 20.0);
    else
      EXPECT_GE(std::abs(clean[s.src_start].value - clean[s.dst_index].value), 5.0);
  }
  std::vector<Sample> flat(100000, Sample{0.0, 0.0});
  EXPECT_THROW(plan_campaign(flat, 1, 0, 1, opts), DataError);
}

TEST(Campaign, DiffRecoversGroundTruthAndIsDeterministic) {
  const auto clean = gen_drive_trace(Scenario::urban, 60000, 5);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CampaignOptions opts;
    opts.min_target_value = 10.0;
    opts.min_replay_jump = 1.0;
    const auto specs = plan_campaign(clean, 2, 3, seed, opts);
    const auto a = apply_campaign(clean, specs, {0.0, 160.0, false, OneTimeValue::deviation});
    const auto b = apply_campaign(clean, plan_campaign(clean, 2, 3, seed, opts), {0.0, 160.0, false, OneTimeValue::deviation});
    ASSERT_EQ(a.truth, b.truth);
    ASSERT_TRUE(std::equal(a.samples.begin(), a.samples.end(), b.samples.begin(),
                           [](const Sample& x, const Sample& y) { return x.value == y.value && x.timestamp == y.timestamp; }));

    std::set<std::size_t> truth_idx;
    for (const auto& r : a.truth.ranges())
      for (auto k = r.start; k <= r.end; ++k) truth_idx.insert(k);
    const auto changed = diff(clean, a.samples);
    ASSERT_TRUE(std::includes(truth_idx.begin(), truth_idx.end(), changed.begin(), changed.end()));
    for (const auto& s : specs)
      if (s.kind == AttackKind::one_time) { ASSERT_TRUE(changed.count(s.target_index)); }
  }
}

TEST(CampaignCsv, RoundTrip) {
  const auto specs = plan_campaign(263023, 3, 9, 21);
  std::stringstream ss;
  write_campaign_csv(ss, specs);
  EXPECT_EQ(ss.str().substr(0, kCampaignCsvHeader.size()), kCampaignCsvHeader);
  EXPECT_EQ(read_campaign_csv(ss), specs);

  GroundTruth t;
  t.add({AttackKind::one_time, 4, 4});
  t.add({AttackKind::replay, 10, 19});
  std::stringstream ts;
  write_truth_csv(ts, t);
  EXPECT_EQ(ts.str(), "kind,start,end\none_time,4,4\nreplay,10,19\n");
  EXPECT_EQ(read_truth_csv(ts), t);

  std::istringstream bad("teleport,1,2,3,4\n");
  EXPECT_THROW(read_campaign_csv(bad), ParseError);
}
