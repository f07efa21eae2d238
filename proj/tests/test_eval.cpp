#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "excasim/eval.hpp"

using namespace excasim;
using namespace excasim::eval;

namespace {

Trajectory line_track(int n, double dt, const Eigen::Vector3d& v, const Eigen::Vector3d& offset = Eigen::Vector3d::Zero()) {
  Trajectory tr;
  for (int i = 0; i < n; ++i) tr.points.push_back({i * dt, offset + v * (i * dt)});
  return tr;
}

Trajectory random_walk(std::uint64_t seed, int n) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> step(0.0, 0.3);
  Trajectory tr;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    tr.points.push_back({0.1 * i, p});
    p += Eigen::Vector3d(step(gen), step(gen), 0.1 * step(gen));
  }
  return tr;
}

}  // namespace

TEST(Eval, IdenticalTracksHaveZeroRmse) {
  const auto a = random_walk(1, 400);
  const auto r = rmse(a, a);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(r.samples, 400u);
  EXPECT_EQ(r.ref_length, r.test_length);
}

TEST(Eval, ConstantPlanarOffsetGivesOffset) {
  const double d = 1.376;
  const Eigen::Vector3d dir(std::cos(0.7), std::sin(0.7), 0.0);
  const auto ref = line_track(500, 0.1, {0.8, 0.1, 0.0});
  const auto test = line_track(500, 0.1, {0.8, 0.1, 0.0}, d * dir);
  EXPECT_NEAR(rmse(ref, test).rmse, d, 1e-12);
  const auto ax = line_track(500, 0.1, {0.8, 0.1, 0.0}, {d, 0.0, 0.0});
  EXPECT_NEAR(rmse(ref, ax).rmse, d, 1e-12);
}

TEST(Eval, PlanarIgnoresHeight) {
  const auto ref = line_track(50, 0.2, {1, 0, 0});
  const auto test = line_track(50, 0.2, {1, 0, 0}, {0, 0, 3.0});
  EXPECT_NEAR(rmse(ref, test).rmse, 3.0, 1e-12);
  RmseOptions opt;
  opt.planar = true;
  EXPECT_EQ(rmse(ref, test, opt).rmse, 0.0);
}

TEST(Eval, UnitSquarePathLength) {
  Trajectory sq;
  const double xy[5][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}};
  for (int i = 0; i < 5; ++i) sq.points.push_back({double(i), {xy[i][0], xy[i][1], 0.0}});
  EXPECT_EQ(path_length(sq), 4.0);
}

TEST(Eval, RandomWalkMatchesDirectFormula) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto a = random_walk(seed, 300);
    const auto b = random_walk(seed + 100, 300);
    // Same timebase: resampling reproduces the native samples.
    double sum = 0.0, len = 0.0;
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      sum += (a.points[i].p - b.points[i].p).squaredNorm();
      if (i) len += std::sqrt((a.points[i].p - a.points[i - 1].p).squaredNorm());
    }
    const auto r = rmse(a, b);
    EXPECT_NEAR(r.rmse, std::sqrt(sum / a.points.size()), 1e-12);
    EXPECT_NEAR(r.ref_length, len, 1e-9);
  }
}

TEST(Eval, ResamplesOnOverlapWindow) {
  // ref at 10 Hz on [0, 10]; test at 4 Hz on [2, 12], both on x = t.
  const auto ref = line_track(101, 0.1, {1, 0, 0});
  Trajectory test;
  for (int i = 0; i <= 40; ++i) test.points.push_back({2.0 + 0.25 * i, {2.0 + 0.25 * i + 0.5, 0, 0}});
  const auto r = rmse(ref, test);
  EXPECT_EQ(r.samples, 81u);
  EXPECT_NEAR(r.rmse, 0.5, 1e-12);
}

TEST(Eval, ArcLengthIgnoresTiming) {
  // Same path, one driven twice as fast.
  const auto slow = line_track(101, 0.1, {0.5, 0, 0});
  const auto fast = line_track(101, 0.05, {1.0, 0, 0});
  RmseOptions opt;
  opt.alignment = Alignment::kArcLength;
  EXPECT_NEAR(rmse(slow, fast, opt).rmse, 0.0, 1e-12);
  EXPECT_GT(rmse(slow, fast).rmse, 0.1);
}

TEST(Eval, GeodeticCsvConvertsToEnu) {
  const double lat0 = 60.0, lon0 = 24.0;
  const auto origin = geo::GeodeticCoord::from_degrees(lat0, lon0, 10.0);
  std::ostringstream csv;
  csv.precision(17);
  csv << "t,lat,lon,alt\n";
  std::vector<Eigen::Vector3d> enu;
  for (int i = 0; i < 20; ++i) {
    const geo::EnuCoord e{3.0 * i, -1.5 * i, 0.1 * i, origin};
    const auto g = geo::enu_to_geodetic(e);
    csv << i * 0.5 << ',' << g.latitude * 180.0 / std::numbers::pi << ',' << g.longitude * 180.0 / std::numbers::pi
        << ',' << g.altitude << '\n';
    enu.push_back(e.vector());
  }
  std::istringstream in(csv.str());
  const auto tr = parse_csv(in, "gps.csv");
  ASSERT_EQ(tr.points.size(), 20u);
  ASSERT_TRUE(tr.geodetic_origin);
  for (std::size_t i = 0; i < enu.size(); ++i) EXPECT_LT((tr.points[i].p - enu[i]).norm(), 1e-6);
  EXPECT_NEAR(path_length(tr), 19 * std::sqrt(9 + 2.25 + 0.01), 1e-5);
}

TEST(Eval, CsvRejections) {
  std::istringstream bad_header("time,x,y,z\n0,0,0,0\n");
  EXPECT_THROW(parse_csv(bad_header, "a.csv"), ConfigError);
  std::istringstream bad_cell("t,x,y,z\n0,0,zero,0\n");
  EXPECT_THROW(parse_csv(bad_cell, "a.csv"), ConfigError);
  std::istringstream backwards("t,x,y,z\n1,0,0,0\n0.5,1,0,0\n");
  EXPECT_THROW(parse_csv(backwards, "a.csv"), ConfigError);
}

TEST(Eval, StateLogOdometry) {
  std::istringstream log(
      R"({"t":0.02,"id":"a","topic":"/a/odom","type":"odometry","position":[1,2,3]})"
      "\n"
      R"({"t":0.02,"id":"a","topic":"/a/imu","type":"imu"})"
      "\n"
      R"({"t":0.04,"id":"b","topic":"/b/odom","type":"odometry","position":[5,5,5]})"
      "\n"
      R"({"t":0.04,"id":"a","topic":"/a/odom","type":"odometry","position":[1,3,3]})"
      "\n");
  const auto text = log.str();
  std::istringstream a(text);
  const auto tr = parse_state_log(a, "log", "a");
  ASSERT_EQ(tr.points.size(), 2u);
  EXPECT_EQ(tr.points[1].p, Eigen::Vector3d(1, 3, 3));
  std::istringstream both(text);
  EXPECT_THROW(parse_state_log(both, "log"), ConfigError);
  EXPECT_TRUE(is_state_log("run.jsonl"));
  EXPECT_FALSE(is_state_log("gps.csv"));
}

TEST(Eval, ProfileOfUniformAcceleration) {
  Trajectory tr;
  const double a = 0.4;
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.1 * i;
    tr.points.push_back({t, {0.5 * a * t * t, 0, 0}});
  }
  const auto rows = profile(tr);
  ASSERT_EQ(rows.size(), 101u);
  for (std::size_t i = 2; i + 2 < rows.size(); ++i) {
    EXPECT_NEAR(rows[i].speed, a * rows[i].t, 1e-9);
    EXPECT_NEAR(rows[i].acceleration, a, 1e-9);
  }
  const auto csv = format_profile(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,x,y,z,speed,acceleration");
}

TEST(Eval, RmseNeedsTwoPoints) {
  Trajectory one;
  one.points.push_back({0, Eigen::Vector3d::Zero()});
  EXPECT_THROW(rmse(one, one), std::invalid_argument);
}
