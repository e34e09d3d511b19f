#include <gtest/gtest.h>

#include <ppsurvey/ppsurvey.hpp>

#include "support.hpp"

using namespace ppsurvey;
namespace ts = testing_support;
using V = std::vector<double>;
using S = std::vector<std::string>;

TEST(BiasPct, Examples) {
  EXPECT_EQ(bias_pct(5.0, 5.0), 0.0);
  EXPECT_NEAR(bias_pct(1900, 1766), 7.5877689694224, 1e-9);
  EXPECT_EQ(bias_pct(3.16, 3.16), 0.0);
  EXPECT_NEAR(bias_pct(-1.1, -1.0), 10.0, 1e-12);
  EXPECT_THROW(bias_pct(1.0, 0.0), Error);
}

TEST(BiasPct, ScaleInvariant) {
  ts::Gen g(31);
  for (int i = 0; i < 500; ++i) {
    const double a = g.uniform(0.001, 1000), t = g.normal(0, 10), s = g.normal(0, 10);
    EXPECT_NEAR(bias_pct(a * t, a * s), bias_pct(t, s), 1e-9 * (1 + bias_pct(t, s)));
  }
}

TEST(EssGain, Examples) {
  EXPECT_EQ(ess_gain_pct(2.0, 2.0), 0.0);
  EXPECT_NEAR(ess_gain_pct(1.5, 1.0), 50.0, 1e-12);
  EXPECT_NEAR(ess_gain_pct(1.0, 2.0), -50.0, 1e-12);
  EXPECT_THROW(ess_gain_pct(1.0, 0.0), Error);
}

TEST(EssGain, SignProperty) {
  ts::Gen g(32);
  for (int i = 0; i < 500; ++i) {
    const double h = g.uniform(1e-6, 10), m = g.uniform(1e-6, 10);
    EXPECT_EQ(ess_gain_pct(h, h), 0.0);
    const double e = ess_gain_pct(h, m);
    EXPECT_EQ(e > 0, h > m);
    EXPECT_EQ(e < 0, h < m);
  }
}

TEST(Mae, Examples) {
  EXPECT_EQ(individual_mae(V{1, 2, 3}, V{1, 2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(individual_mae(V{0, 2}, V{1, 0}), 1.5);
  EXPECT_THROW(individual_mae(V{}, V{}), Error);
}

TEST(Mae, LargeEvenWhenPopulationBiasIsCorrected) {
  ts::Gen g(33);
  V y(5000), yh(5000);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = g.normal(3, 1);
    yh[i] = y[i] + g.normal(0, 2);
  }
  const double pop_bias = std::abs(ts::plain_mean(yh) - ts::plain_mean(y));
  EXPECT_GT(individual_mae(y, yh), 20 * pop_bias);
}

TEST(Subgroup, UniformBiasFullyCorrected) {
  const V y{9, 11, 8, 12};
  V yh;
  for (double v : y) yh.push_back(1.1 * v);
  const S g{"a", "a", "b", "b"};
  const auto rows = subgroup_bias_report(y, yh, g, ts::plain_mean(y));
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_NEAR(r.bias_before_pct, 10.0, 1e-9);
    EXPECT_NEAR(r.bias_after_pct, 0.0, 1e-9);
    EXPECT_NEAR(r.rel_delta_pct, 100.0, 1e-6);
  }
}

TEST(Subgroup, UnevenBiasHurtsUnbiasedGroup) {
  const V y{10, 10, 10, 10}, yh{12, 12, 10, 10};
  const S g{"A", "A", "B", "B"};
  const auto rows = subgroup_bias_report(y, yh, g, 10.0);
  ASSERT_EQ(rows[1].group_label, "B");
  EXPECT_EQ(rows[1].bias_before_pct, 0.0);
  EXPECT_GT(rows[1].bias_after_pct, rows[1].bias_before_pct);
  EXPECT_LT(rows[1].abs_delta, 0.0);
  EXPECT_TRUE(std::isnan(rows[1].rel_delta_pct));
  EXPECT_LT(rows[0].bias_after_pct, rows[0].bias_before_pct);
}

TEST(Subgroup, SingleGroupAbsorbsEverything) {
  const V y{1, 2, 3, 6}, yh{5, 1, 2, 2};
  const double theta_rec = 3.3;
  const auto rows = subgroup_bias_report(y, yh, S(4, "all"), theta_rec);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].bias_after_pct, bias_pct(theta_rec, 3.0), 1e-12);
}

TEST(Subgroup, RowsSortedAndInvariantsHold) {
  ts::Gen gen(34);
  const S names{"zeta", "alpha", "mid", "beta"};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = gen.index(4, 200);
    V y(n), yh(n);
    S labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = gen.normal(5, 1);
      yh[i] = y[i] * gen.uniform(0.8, 1.3) + gen.normal(0, 0.5);
      labels[i] = names[gen.index(0, 3)];
    }
    const double theta_rec = gen.normal(5, 0.2);
    for (auto mode : {Recentering::Additive, Recentering::Multiplicative}) {
      const auto rows = subgroup_bias_report(y, yh, labels, theta_rec, mode);
      for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_LT(rows[k - 1].group_label, rows[k].group_label);
      for (const auto& r : rows) {
        EXPECT_NEAR(r.abs_delta, r.bias_before_pct - r.bias_after_pct, 1e-12);
        if (r.bias_before_pct > 0) { EXPECT_NEAR(r.rel_delta_pct, 100 * r.abs_delta / r.bias_before_pct, 1e-9); }
      }
      const auto rec = recenter_predictions(yh, theta_rec, mode);
      EXPECT_NEAR(ts::plain_mean(rec), theta_rec, 1e-12);
      // n-weighted mean of recentered group means
      std::map<std::string, std::pair<double, std::size_t>> acc;
      for (std::size_t i = 0; i < n; ++i) {
        acc[labels[i]].first += rec[i];
        acc[labels[i]].second += 1;
      }
      double weighted = 0;
      for (const auto& [k, v] : acc) weighted += v.second * (v.first / v.second);
      EXPECT_NEAR(weighted / n, theta_rec, 1e-12);
    }
  }
}

TEST(Subgroup, FrameOverloadAndErrors) {
  std::vector<LabeledSet::Record> recs{
      {"a", {}, 10, 11, {"F"}}, {"b", {}, 10, 11, {"F"}}, {"c", {}, 20, 22, {"M"}}, {"d", {}, 20, 22, {"M"}}};
  const LabeledSet h({}, {"sex"}, recs);
  const auto rows = subgroup_bias_report(h, 15.0, "sex");
  EXPECT_EQ(rows.size(), 2u);
  EXPECT_THROW(subgroup_bias_report(h, 15.0, "age"), Error);
  try {
    subgroup_bias_report(V{0, 0, 1}, V{1, 1, 1}, S{"x", "x", "y"}, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroGroupTruthMean);
  }
  const auto table = subgroup_table(rows);
  EXPECT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.header[0], "group");
}
