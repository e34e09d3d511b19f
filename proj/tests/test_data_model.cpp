#include <gtest/gtest.h>

#include <cstring>
#include <set>
#include <sstream>

#include <ppsurvey/ppsurvey.hpp>

#include "support.hpp"

using namespace ppsurvey;
using testing_support::TempDir;

namespace {

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

FullFrame make_full(std::size_t n) {
  FullFrame f;
  f.covariate_names = {"x"};
  f.group_names = {"g"};
  for (std::size_t i = 0; i < n; ++i)
    f.records.push_back({"r" + std::to_string(i), {std::to_string(i % 7)}, double(i), double(i) + 0.5,
                         {i % 2 ? "odd" : "even"}});
  return f;
}

}  // namespace

TEST(ScalarMap, OrdinalLookup) {
  const auto m = ScalarMap::letters(4);
  EXPECT_EQ(apply_scalar_map(m, "A"), 1.0);
  EXPECT_EQ(apply_scalar_map(m, "B"), 2.0);
  EXPECT_EQ(apply_scalar_map(m, "D"), 4.0);
}

TEST(ScalarMap, PassthroughParsesNumbers) {
  EXPECT_EQ(apply_scalar_map(ScalarMap::passthrough(), "1766"), 1766.0);
  EXPECT_EQ(apply_scalar_map(ScalarMap::passthrough(), "-2.5e1"), -25.0);
}

TEST(ScalarMap, Errors) {
  expect_code(ErrorCode::UnknownToken, [] { apply_scalar_map(ScalarMap::letters(4), "Z"); });
  expect_code(ErrorCode::ParseFailure, [] { apply_scalar_map(ScalarMap::passthrough(), "abc"); });
  expect_code(ErrorCode::ParseFailure, [] { apply_scalar_map(ScalarMap::passthrough(), "12x"); });
  expect_code(ErrorCode::InvalidConfig, [] { ScalarMap::ordinal({{"A", 1}, {"A", 2}}); });
  expect_code(ErrorCode::InvalidConfig, [] { ScalarMap::ordinal({{"A", std::nan("")}}); });
}

TEST(ScalarMap, PureFunction) {
  testing_support::Gen g(3);
  const auto m = ScalarMap::letters(6);
  for (int i = 0; i < 200; ++i) {
    const std::string tok(1, char('A' + g.index(0, 5)));
    const double a = apply_scalar_map(m, tok), b = apply_scalar_map(m, tok);
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  }
}

TEST(ScalarMap, TextRoundTrip) {
  std::istringstream in("# comment\nStrongly agree = 1\nNot sure = 6  # kept\n\n");
  const auto m = ScalarMap::parse_text(in);
  EXPECT_EQ(m.apply("Not sure"), 6.0);
  std::istringstream again(m.to_text());
  const auto m2 = ScalarMap::parse_text(again);
  EXPECT_EQ(m2.apply("Strongly agree"), 1.0);
  EXPECT_EQ(m2.apply("Not sure"), 6.0);
}

TEST(ScalarMap, ShippedMapsIncludeNotSure) {
  const auto six = ScalarMap::load(std::string(PPSURVEY_DATA_DIR) + "/maps/atp_6option.map");
  EXPECT_EQ(six.apply("Not sure"), 6.0);
  const auto four = ScalarMap::load(std::string(PPSURVEY_DATA_DIR) + "/maps/atp_4option.map");
  EXPECT_EQ(four.apply("Strongly disagree"), 4.0);
}

TEST(LoadFrame, ThreeRowLabeled) {
  TempDir d("frame");
  const auto path = d.write("h.csv", "y,yhat\n1,1.5\n2,2.5\n3,2\n");
  FrameSchema s;
  s.response_column = "y";
  const auto f = load_frame(path, s, ScalarMap::passthrough());
  ASSERT_TRUE(std::holds_alternative<LabeledSet>(f));
  EXPECT_EQ(std::get<LabeledSet>(f).size(), 3u);
}

TEST(LoadFrame, UnlabeledWhenNoResponseColumn) {
  TempDir d("frame");
  const auto path = d.write("u.csv", "id,yhat\na,1\nb,2\n");
  FrameSchema s;
  s.id_column = "id";
  s.response_column = "y";
  const auto f = load_frame(path, s, ScalarMap::passthrough());
  ASSERT_TRUE(std::holds_alternative<UnlabeledFrame>(f));
  EXPECT_EQ(std::get<UnlabeledFrame>(f).id(1), "b");
}

TEST(LoadFrame, Errors) {
  TempDir d("frame");
  FrameSchema s;
  s.response_column = "y";
  const auto pass = ScalarMap::passthrough();
  expect_code(ErrorCode::MissingColumn, [&] { load_frame(d.write("a.csv", "y,pred\n1,2\n"), s, pass); });
  expect_code(ErrorCode::EmptyFrame, [&] { load_frame(d.write("b.csv", "y,yhat\n"), s, pass); });
  expect_code(ErrorCode::EmptyFrame, [&] { load_frame(d.write("c.csv", ""), s, pass); });
  expect_code(ErrorCode::Io, [&] { load_frame(d.file("missing.csv"), s, pass); });
  try {
    load_frame(d.write("d.csv", "y,yhat\n1,2\n3\n4,5\n"), s, pass);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRow);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
  // a blank response is not silently dropped
  expect_code(ErrorCode::MalformedRow, [&] { load_frame(d.write("e.csv", "y,yhat\n1,2\n,5\n4,5\n"), s, pass); });
  expect_code(ErrorCode::MalformedRow, [&] { load_frame(d.write("f.csv", "id,y,yhat\na,1,2\na,2,3\n"), FrameSchema{"id", {}, {}, "y", "yhat"}, pass); });
}

TEST(LoadFrame, SixOptionFixtureCodomain) {
  FrameSchema s;
  s.id_column = "respondent_id";
  s.response_column = "response";
  s.group_columns = {"age_group"};
  const auto h = load_labeled(std::string(PPSURVEY_DATA_DIR) + "/frames/labeled.csv", s,
                              ScalarMap::load(std::string(PPSURVEY_DATA_DIR) + "/maps/atp_6option.map"));
  ASSERT_GE(h.size(), 100u);
  std::set<double> seen;
  for (double v : h.y()) {
    EXPECT_TRUE(v == 1 || v == 2 || v == 3 || v == 4 || v == 5 || v == 6) << v;
    seen.insert(v);
  }
  EXPECT_GE(seen.size(), 4u);
}

TEST(LoadFrame, SynthesizedIdsWhenAbsent) {
  TempDir d("frame");
  FrameSchema s;
  s.response_column = "y";
  const auto h = std::get<LabeledSet>(load_frame(d.write("h.csv", "y,yhat\n1,1\n2,2\n"), s, ScalarMap::passthrough()));
  EXPECT_NE(h.id(0), h.id(1));
}

TEST(LoadFrame, RoundTrip) {
  TempDir d("frame");
  FrameSchema s;
  s.id_column = "respondent_id";
  s.response_column = "y";
  s.covariate_columns = {"age", "income"};
  s.group_columns = {"region"};
  testing_support::Gen g(17);
  std::ostringstream body;
  body << "respondent_id,age,income,region,y,yhat\n";
  for (int i = 0; i < 50; ++i)
    body << "p" << i << "," << g.index(18, 90) << "," << csv::format_number(g.normal(50, 10)) << ","
         << (i % 3 ? "north" : "south") << "," << csv::format_number(g.normal()) << ","
         << csv::format_number(g.normal() / 3.0) << "\n";
  const auto a = load_labeled(d.write("a.csv", body.str()), s, ScalarMap::passthrough());
  save_frame(d.file("b.csv"), a, s);
  const auto b = load_labeled(d.file("b.csv"), s, ScalarMap::passthrough());
  EXPECT_EQ(a, b);

  const auto u = load_unlabeled(d.file("b.csv"), s);
  save_frame(d.file("c.csv"), u, s);
  EXPECT_EQ(u, load_unlabeled(d.file("c.csv"), s));
}

TEST(SplitFrame, SizesAndDeterminism) {
  const auto full = make_full(1000);
  const auto [h, u] = split_frame(full, 100, 7);
  EXPECT_EQ(h.size(), 100u);
  EXPECT_EQ(u.size(), 900u);
  const auto [h2, u2] = split_frame(full, 100, 7);
  EXPECT_EQ(h.ids(), h2.ids());
  EXPECT_EQ(u.ids(), u2.ids());
}

TEST(SplitFrame, BudgetExceedsFrame) {
  const auto full = make_full(1000);
  expect_code(ErrorCode::BudgetExceedsFrame, [&] { split_frame(full, 1000, 7); });
  expect_code(ErrorCode::InvalidArgument, [&] { split_frame(full, 1, 7); });
}

TEST(SplitFrame, PartitionProperty) {
  testing_support::Gen g(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t size = g.index(3, 300);
    const std::size_t n = g.index(2, size - 1);
    const auto full = make_full(size);
    const auto [h, u] = split_frame(full, n, g.rng());
    ASSERT_EQ(h.size() + u.size(), size);
    std::set<std::string> ids(h.ids().begin(), h.ids().end());
    for (const auto& id : u.ids()) EXPECT_EQ(ids.count(id), 0u);
    ids.insert(u.ids().begin(), u.ids().end());
    EXPECT_EQ(ids.size(), size);
    for (std::size_t i = 0; i < h.size(); ++i) {
      const auto r = h.record(i);
      EXPECT_EQ(r.yhat, r.y + 0.5);
    }
  }
}

TEST(Disjointness, OverlapIsRejected) {
  const std::vector<double> y{1, 2, 3}, yh{1, 2, 3};
  const auto h = LabeledSet::from_values(y, yh);
  UnlabeledFrame u({}, {}, {{"h#1", {}, 4.0, {}}, {"x", {}, 5.0, {}}});
  expect_code(ErrorCode::OverlapError, [&] { require_disjoint(h, u, "test"); });
  expect_code(ErrorCode::OverlapError, [&] { rectified_mean(h, u, 0.5); });
}

TEST(Csv, NumberFormattingRoundTrips) {
  testing_support::Gen g(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = g.normal(0, 1e3) * std::pow(10.0, double(g.index(0, 20)) - 10);
    EXPECT_EQ(*csv::parse_number(csv::format_number(v)), v);
  }
}
