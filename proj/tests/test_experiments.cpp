#include <gtest/gtest.h>

#include <set>

#include "pathgan/metrics/experiments.hpp"

namespace pathgan::metrics {
namespace {

class Experiments : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    features::TestProjection tp;
    reference_ = new features::FeatureMatrix(synthetic_corpus_features({2400, 64, 0.0f, 1}, tp));
    contaminant_ = new features::FeatureMatrix(synthetic_corpus_features({2400, 64, 1.0f, 2}, tp));
  }
  static void TearDownTestSuite() {
    delete reference_;
    delete contaminant_;
  }
  static ContaminationSpec spec(std::int64_t n, std::vector<std::string> metrics = {"fid", "kid", "onenn"}) {
    ContaminationSpec s;
    s.set_size = n;
    s.seed = 3;
    s.metrics = std::move(metrics);
    return s;
  }
  static inline features::FeatureMatrix* reference_ = nullptr;
  static inline features::FeatureMatrix* contaminant_ = nullptr;
};

TEST_F(Experiments, ContaminationCurveRisesStrictly) {
  const auto reports = contamination_experiment(spec(1000), *reference_, *contaminant_);
  ASSERT_EQ(reports.size(), 3u);
  for (const auto& r : reports) {
    ASSERT_EQ(r.curve.size(), 5u) << r.metric;
    EXPECT_EQ(r.curve[2].fraction, 0.5);
    EXPECT_EQ(r.n1, 1000);
  }
  const auto& fid = reports[0];
  EXPECT_EQ(fid.metric, "fid-contamination");
  EXPECT_TRUE(fid.flags.empty());
  EXPECT_EQ(spearman(fid.curve), 1.0);
  for (std::size_t i = 1; i < fid.curve.size(); ++i) EXPECT_GT(fid.curve[i].value, fid.curve[i - 1].value);
  // Fully contaminated 1-NN separates the palettes almost perfectly.
  EXPECT_GT(reports[2].curve.back().value, 0.9);
  EXPECT_NEAR(reports[2].curve.front().value, 0.5, 0.05);
}

TEST_F(Experiments, ZeroFractionIsTheSameDistributionBaseline) {
  auto s = spec(500, {"fid"});
  s.fractions = {0.0};
  const auto r = contamination_experiment(s, *reference_, *contaminant_);
  // Rebuild the two reference draws by hand.
  detail::Drawer rd(reference_->rows, s.seed);
  const auto a = reference_->select(rd.take(500, "reference"));
  const auto b = reference_->select(rd.take(500, "reference"));
  EXPECT_DOUBLE_EQ(r[0].curve[0].value, fid_report(a, b, 0, 0).value);
}

TEST_F(Experiments, ConsistencyCurveStaysFlat) {
  const auto reports = consistency_experiment(spec(1000), *reference_, *contaminant_);
  const auto& fid = reports[0];
  EXPECT_EQ(fid.metric, "fid-consistency");
  ASSERT_EQ(fid.curve.size(), 5u);
  double lo = 1e300, hi = 0;
  for (const auto& p : fid.curve) lo = std::min(lo, p.value), hi = std::max(hi, p.value);
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi / lo, 3.0);
  EXPECT_TRUE(fid.flags.empty());
  for (const auto& p : reports[2].curve) EXPECT_NEAR(p.value, 0.5, 0.06);
}

TEST_F(Experiments, ReusedDrawGivesZeroDistance) {
  auto s = spec(300, {"fid", "kid"});
  const auto reports = consistency_experiment(s, *reference_, *contaminant_, false);
  for (const auto& p : reports[0].curve) EXPECT_NEAR(p.value, 0.0, 1e-6);
  // With identical sets the unbiased estimator goes negative: the cross term
  // keeps the self-pairs that the within-set terms drop.
  for (const auto& p : reports[1].curve) EXPECT_LT(p.value, 0.0);
}

TEST_F(Experiments, FlagsTrackTheCurveShape) {
  // A contaminant from the reference distribution gives a noisy, unordered curve.
  auto s = spec(300, {"fid"});
  s.fractions = {0.0, 0.25, 0.5, 0.75, 1.0};
  const auto noisy = contamination_experiment(s, *reference_, *reference_);
  bool rises = true;
  for (std::size_t i = 1; i < noisy[0].curve.size(); ++i) rises = rises && noisy[0].curve[i].value > noisy[0].curve[i - 1].value;
  EXPECT_FALSE(rises);
  EXPECT_EQ(noisy[0].flags, std::vector<std::string>{"not-strictly-increasing"});

  // A consistency curve with a zero point cannot be judged flat.
  const auto degenerate = consistency_experiment(s, *reference_, *contaminant_, false);
  EXPECT_EQ(degenerate[0].flags, std::vector<std::string>{"not-flat"});
}

TEST_F(Experiments, DrawsAreDisjointAndBounded) {
  detail::Drawer d(100, 7);
  const auto a = d.take(40, "x"), b = d.take(60, "x");
  std::set<std::size_t> all(a.begin(), a.end());
  all.insert(b.begin(), b.end());
  EXPECT_EQ(all.size(), 100u);
  EXPECT_THROW(d.take(1, "x"), ArgumentError);

  // Consistency at f=0 needs 2n reference rows.
  EXPECT_THROW(consistency_experiment(spec(1300, {"fid"}), *reference_, *contaminant_), ArgumentError);
  auto other = *contaminant_;
  other.space.name = "cellular";
  EXPECT_THROW(contamination_experiment(spec(100), *reference_, other), ArgumentError);
}

TEST_F(Experiments, SeedDeterministic) {
  auto s = spec(200);
  s.fractions = {0.0, 1.0};
  const auto a = contamination_experiment(s, *reference_, *contaminant_);
  const auto b = contamination_experiment(s, *reference_, *contaminant_);
  for (std::size_t m = 0; m < a.size(); ++m)
    for (std::size_t i = 0; i < a[m].curve.size(); ++i) EXPECT_EQ(a[m].curve[i].value, b[m].curve[i].value);
  EXPECT_EQ(a[0].config_digest, b[0].config_digest);
  s.seed = 4;
  EXPECT_NE(contamination_experiment(s, *reference_, *contaminant_)[0].curve[0].value, a[0].curve[0].value);
  EXPECT_NE(contamination_experiment(s, *reference_, *contaminant_)[0].config_digest, a[0].config_digest);
}

TEST(ContaminationSpecJson, ValidatesAndRoundTrips) {
  ContaminationSpec s;
  s.fractions = {0.0, 0.1, 0.9};
  s.set_size = 700;
  s.metrics = {"kid"};
  const auto back = contamination_spec_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  EXPECT_EQ(ContaminationSpec{}.set_size, 5000);
  EXPECT_THROW(contamination_spec_from_json({{"fractions", {0.5, 0.25}}}), ArgumentError);
  EXPECT_THROW(contamination_spec_from_json({{"fractions", {0.0, 1.5}}}), ArgumentError);
  EXPECT_THROW(contamination_spec_from_json({{"fractions", nlohmann::json::array()}}), ArgumentError);
  EXPECT_THROW(contamination_spec_from_json({{"metrics", {"is"}}}), ArgumentError);
  EXPECT_THROW(contamination_spec_from_json({{"set_size", 1}}), ArgumentError);
}

TEST(Spearman, MatchesHandComputedRanks) {
  EXPECT_DOUBLE_EQ(spearman({{0, 1}, {0.5, 2}, {1, 3}}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({{0, 3}, {0.5, 2}, {1, 1}}), -1.0);
  // Ranks (1,2,3,4) vs (1,3,2,4): 1 - 6*2/(4*15) = 0.8.
  EXPECT_NEAR(spearman({{0, 1}, {1, 5}, {2, 4}, {3, 9}}), 0.8, 1e-12);
  EXPECT_DOUBLE_EQ(spearman({{0, 1}, {1, 1}}), 0.0);
}

} // namespace
} // namespace pathgan::metrics
