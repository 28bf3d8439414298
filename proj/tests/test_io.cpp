#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adaspline/io.hpp"
#include "temp_dir.hpp"

using namespace adaspline;
using nlohmann::json;

TEST(ReadDesign, WellFormedFile) {
  TempDir dir;
  const auto p = dir.write("d.csv", "t,y\n0.1,1.5\n0.5,2\n0.9,-3e-1\n");
  const auto f = read_design(p);
  EXPECT_EQ(f.rows, 3u);
  EXPECT_EQ(f.design.size(), 3u);
  EXPECT_EQ(f.design.y[2], -0.3);
  EXPECT_EQ(f.design.w, (std::vector<double>{1, 1, 1}));
  EXPECT_FALSE(f.rescaled);
}

TEST(ReadDesign, ColumnsByNameCommentsAndWeights) {
  TempDir dir;
  const auto p = dir.write("d.csv", "# produced elsewhere\n\ny, w ,t\n1,2,0.3\n\n# mid comment\n4,0.5,0.1\n");
  const auto f = read_design(p);
  EXPECT_EQ(f.design.t, (std::vector<double>{0.1, 0.3}));
  EXPECT_EQ(f.design.y, (std::vector<double>{4, 1}));
  EXPECT_EQ(f.design.w, (std::vector<double>{0.5, 2}));
}

TEST(ReadDesign, UnsortedRowsAreSortedConsistently) {
  TempDir dir;
  const auto f = read_design(dir.write("d.csv", "t,y\n0.8,8\n0.2,2\n0.5,5\n"));
  EXPECT_EQ(f.design.t, (std::vector<double>{0.2, 0.5, 0.8}));
  EXPECT_EQ(f.design.y, (std::vector<double>{2, 5, 8}));
}

TEST(ReadDesign, DuplicateAbscissaNamesLines) {
  TempDir dir;
  const auto p = dir.write("d.csv", "t,y\n0.2,1\n0.4,2\n0.2,3\n");
  try {
    read_design(p);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("lines 2 and 4"), std::string::npos) << e.what();
  }
}

TEST(ReadDesign, ParseErrorsCarryLineNumbers) {
  TempDir dir;
  try {
    read_design(dir.write("d.csv", "t,y\n0.1,1\n0.2,abc\n"));
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_design(dir.write("e.csv", "")), IoError);
  EXPECT_THROW(read_design(dir.write("f.csv", "t,y\n")), IoError);
  EXPECT_THROW(read_design(dir.write("g.csv", "x,y\n0.1,1\n")), IoError);
  EXPECT_THROW(read_design(dir.write("h.csv", "t,y\n0.1,1,7\n")), IoError);
  EXPECT_THROW(read_design(dir.write("i.csv", "t,y,w\n0.1,1,0\n")), IoError);
  EXPECT_THROW(read_design(dir.write("j.csv", "t,y\n0.1,nan\n")), IoError);
  EXPECT_THROW(read_design(dir / "missing.csv"), IoError);
}

TEST(ReadDesign, OutOfRangeNeedsRescale) {
  TempDir dir;
  const auto p = dir.write("d.csv", "t,y\n10,1\n20,2\n15,3\n");
  EXPECT_THROW(read_design(p), IoError);
  const auto f = read_design(p, true);
  EXPECT_TRUE(f.rescaled);
  EXPECT_EQ(f.t_min, 10.0);
  EXPECT_EQ(f.t_max, 20.0);
  EXPECT_EQ(f.design.t, (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(f.design.y, (std::vector<double>{1, 3, 2}));
}

TEST(WriteDesign, RoundTripIsExact) {
  TempDir dir;
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::vector<double> t, y, w;
  for (int i = 1; i <= 50; ++i) {
    t.push_back(i / 51.0);
    y.push_back(u(gen) * 1e-7);
    w.push_back(std::abs(u(gen)) + 1e-3);
  }
  const Design d = Design::make(t, y, w);
  write_design(dir / "d.csv", d, {{"seed", 1}});
  EXPECT_EQ(read_design(dir / "d.csv").design, d);
}

TEST(PenaltyJson, StrictKeysAndRoundTrip) {
  const PiecewisePenalty p({0.25, 0.5}, {1.5, 0.1, 30.0}, 2.0);
  EXPECT_EQ(penalty_from_json(to_json(p)), p);
  EXPECT_EQ(penalty_from_json(json{{"knots", json::array()}, {"values", {2.0}}}), PiecewisePenalty::uniform(2.0));
  EXPECT_THROW(penalty_from_json(json{{"knots", {0.5}}, {"values", {1, 2}}, {"gama", 2}}), std::invalid_argument);
  EXPECT_THROW(penalty_from_json(json{{"values", {1}}}), std::exception);
  EXPECT_THROW(penalty_from_json(json{{"knots", {0.5}}, {"values", {1, "x"}}}), std::invalid_argument);
  EXPECT_THROW(penalty_from_json(json{{"knots", {0.5}}, {"values", {1}}}), std::invalid_argument);
  TempDir dir;
  std::ofstream(dir / "p.json") << "{\"knots\": [0.3], \"values\": [1, 4]}";
  EXPECT_EQ(read_penalty(dir / "p.json"), PiecewisePenalty({0.3}, {1.0, 4.0}));
  std::ofstream(dir / "bad.json") << "{\"knots\": [0.3], ";
  EXPECT_THROW(read_penalty(dir / "bad.json"), IoError);
}

TEST(FitJson, CoefficientsRoundTripExactly) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  std::vector<double> t, y;
  for (int i = 1; i <= 60; ++i) {
    t.push_back(i / 60.0);
    y.push_back(std::sin(6 * t.back()) + 0.2 * z(gen));
  }
  const SplineFit f = fit(Design::make(t, y), PiecewisePenalty({0.4}, {1.0, 7.0}), 2, 3.3e-5);
  TempDir dir;
  write_json(dir / "fit.json", with_metadata(to_json(f), {{"command", "test"}}));
  const json j = read_json(dir / "fit.json");
  EXPECT_EQ(j.at("version"), kVersion);
  EXPECT_EQ(j.at("config").at("command"), "test");
  EXPECT_TRUE(j.at("optimality").at("passed").get<bool>());
  const SplineFit g = rebuild_fit(stored_fit_from_json(j));
  EXPECT_EQ(g.c, f.c);
  EXPECT_EQ(g.d, f.d);
  EXPECT_EQ(g.lambda, f.lambda);
  EXPECT_EQ(g.penalty, f.penalty);
  for (double x : {0.0, 0.123, 0.5, 0.999}) EXPECT_EQ(predict(g, x), predict(f, x));
}

TEST(GaicJson, SortedBySThenGamma) {
  std::vector<GaicEntry> table{{4, 1.0, 4, 1e-3, 5.0}, {0, 2.0, 0, 1e-3, 3.0}, {0, 1.0, 0, 1e-4, 4.0}};
  const json j = to_json(table);
  ASSERT_EQ(j.size(), 3u);
  EXPECT_EQ(j[0].at("S"), 0);
  EXPECT_EQ(j[0].at("gamma"), 1.0);
  EXPECT_EQ(j[1].at("gamma"), 2.0);
  EXPECT_EQ(j[2].at("S"), 4);
  EXPECT_EQ(j[2].at("score"), 5.0);
}

TEST(Csv, HeaderMetadataAndSeventeenDigits) {
  TempDir dir;
  CsvWriter w(dir / "x.csv", {{"seed", 42}}, {"a", "b"});
  w.row(std::vector<double>{0.1, 1.0 / 3.0});
  w.comment("note");
  EXPECT_THROW(w.row(std::vector<double>{1.0}), std::logic_error);
  w.close();
  const std::string s = slurp(dir / "x.csv");
  EXPECT_EQ(s, std::string("# adaspline ") + kVersion +
                   "\n# config: {\"seed\":42}\na,b\n0.10000000000000001,0.33333333333333331\n# note\n");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(std::stod(format_double(-2.5e-300)), -2.5e-300);
}

TEST(Csv, UnwritablePathIsAnIoError) {
  CsvWriter w("/nonexistent_dir_for_test/x.csv", json::object(), {"a"});
  EXPECT_THROW(w.close(), IoError);
  EXPECT_THROW(write_json("/nonexistent_dir_for_test/x.json", json::object()), IoError);
}
