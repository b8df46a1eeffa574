#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gcwm/data.hpp"
#include "gcwm/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace gcwm;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = std::string("/tmp/gcwm_test_") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

Schema basic_schema() {
  std::istringstream ss(
      "response ClaimNb\n"
      "exposure Exposure\n"
      "covariate Density lognormal\n"
      "covariate AvgAge gaussian\n"
      "covariate Region discrete north,south,west\n");
  return Schema::parse(ss);
}

}  // namespace

TEST_CASE("schema parser reads roles and levels") {
  Schema s = basic_schema();
  CHECK(s.response == "ClaimNb");
  CHECK(s.exposure == "Exposure");
  CHECK(s.covariates.size() == 3);
  CHECK(s.covariates[0].role == Role::lognormal);
  CHECK(s.covariates[2].role == Role::discrete);
  CHECK(s.covariates[2].levels == std::vector<std::string>{"north", "south",
                                                           "west"});
}

TEST_CASE("schema parser rejects bad input") {
  std::istringstream no_resp("covariate X gaussian\n");
  CHECK_THROWS_AS(Schema::parse(no_resp), input_error);
  std::istringstream one_level("response y\ncovariate D discrete a\n");
  CHECK_THROWS_AS(Schema::parse(one_level), input_error);
  std::istringstream bad_role("response y\ncovariate X uniform\n");
  CHECK_THROWS_AS(Schema::parse(bad_role), input_error);
}

TEST_CASE("load_csv types rows and skips incomplete ones") {
  std::string path = write_temp(
      "basic.csv",
      "ClaimNb,Exposure,Density,AvgAge,Region\n"
      "0,1.0,120.5,44,north\n"
      "2,0.5,80.0,31,south\n"
      ",1.0,50.0,28,west\n"      // missing response -> skipped
      "1,0.75,200.0,,north\n"    // missing covariate -> skipped
      "3,1.0,10.0,52,west\n");
  LoadReport report;
  Dataset d = load_csv(path, basic_schema(), &report);
  CHECK(d.n() == 3);
  CHECK(report.n_used == 3);
  CHECK(report.skipped_rows == std::vector<std::size_t>{4, 5});
  CHECK(d.response()(1) == 2.0);
  CHECK(d.exposure()(1) == 0.5);
  CHECK(d.lognormal()(0, 0) == 120.5);
  CHECK(d.gaussian()(2, 0) == 52.0);
  CHECK(d.discrete()[0](0) == 0);
  CHECK(d.discrete()[0](1) == 1);
  CHECK(d.discrete()[0](2) == 2);
  CHECK(d.log_exposure()(1) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("load_csv error paths") {
  Schema s = basic_schema();
  std::string neg = write_temp("neg.csv",
                               "ClaimNb,Exposure,Density,AvgAge,Region\n"
                               "0,1.0,0.0,44,north\n");
  CHECK_THROWS_WITH_AS(load_csv(neg, s), doctest::Contains("line 2"),
                       input_error);
  std::string badnum = write_temp("badnum.csv",
                                  "ClaimNb,Exposure,Density,AvgAge,Region\n"
                                  "zero,1.0,5.0,44,north\n");
  CHECK_THROWS_AS(load_csv(badnum, s), input_error);
  std::string badlevel = write_temp("badlev.csv",
                                    "ClaimNb,Exposure,Density,AvgAge,Region\n"
                                    "0,1.0,5.0,44,east\n");
  CHECK_THROWS_WITH_AS(load_csv(badlevel, s), doctest::Contains("east"),
                       input_error);
  std::string nocol = write_temp("nocol.csv", "ClaimNb,Exposure,AvgAge\n");
  CHECK_THROWS_AS(load_csv(nocol, s), input_error);
}

TEST_CASE("csv round-trip preserves values") {
  std::string path = write_temp(
      "rt.csv",
      "ClaimNb,Exposure,Density,AvgAge,Region\n"
      "0,1.0,120.52342342,44.25,north\n"
      "2,0.5,80.0001,31,south\n"
      "5,0.25,33.125,17.75,west\n");
  Schema s = basic_schema();
  Dataset d1 = load_csv(path, s);
  std::string path2 = "/tmp/gcwm_test_rt2.csv";
  save_csv(path2, d1, s);
  Dataset d2 = load_csv(path2, s);
  REQUIRE(d2.n() == d1.n());
  CHECK(d1.response() == d2.response());
  CHECK(d1.exposure() == d2.exposure());
  CHECK(d1.gaussian() == d2.gaussian());
  CHECK(d1.lognormal() == d2.lognormal());
  CHECK(d1.discrete()[0] == d2.discrete()[0]);
}

TEST_CASE("build_design prepends intercept") {
  Eigen::VectorXd y(2);
  y << 1.0, 2.0;
  Eigen::MatrixXd g(2, 1);
  g << 2.0, 3.0;
  Dataset d(y, {}, {}, g, {{"x", Role::gaussian, {}}},
            Eigen::MatrixXd(2, 0), {}, {}, {});
  DesignMatrix dm = build_design(d, {"x"});
  REQUIRE(dm.X.rows() == 2);
  REQUIRE(dm.X.cols() == 2);
  CHECK(dm.X(0, 0) == 1.0);
  CHECK(dm.X(1, 0) == 1.0);
  CHECK(dm.X(0, 1) == 2.0);
  CHECK(dm.X(1, 1) == 3.0);
  CHECK(dm.columns[0] == "(intercept)");
}

TEST_CASE("build_design dummy-codes discrete against first level") {
  Eigen::VectorXd y(2);
  y << 0.0, 0.0;
  std::vector<Eigen::VectorXi> disc(1, Eigen::VectorXi(2));
  disc[0] << 0, 2;  // levels 1 and 3 of a 3-level covariate
  Dataset d(y, {}, {}, Eigen::MatrixXd(2, 0), {}, Eigen::MatrixXd(2, 0), {},
            disc, {{"d", Role::discrete, {"a", "b", "c"}}});
  DesignMatrix dm = build_design(d, {"d"});
  REQUIRE(dm.X.cols() == 3);
  CHECK(dm.X.row(0) == Eigen::RowVector3d(1, 0, 0));
  CHECK(dm.X.row(1) == Eigen::RowVector3d(1, 0, 1));
  CHECK(dm.columns[1] == "d=b");
  CHECK(dm.columns[2] == "d=c");
}

TEST_CASE("build_design empty selection is intercept-only") {
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  Dataset d(y, {}, {}, Eigen::MatrixXd(3, 0), {}, Eigen::MatrixXd(3, 0), {},
            {}, {});
  DesignMatrix dm = build_design(d, {});
  CHECK(dm.X.cols() == 1);
  CHECK(dm.X.col(0).sum() == 3.0);
}

TEST_CASE("build_design log transform and column-count property") {
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  Eigen::MatrixXd g(4, 2);
  g << 1, 5, 2, 6, 3, 7, 4, 8;
  Eigen::MatrixXd u(4, 1);
  u << 1.0, 2.718281828459045, 7.389056098930650, 20.085536923187668;
  std::vector<Eigen::VectorXi> disc(1, Eigen::VectorXi(4));
  disc[0] << 0, 1, 2, 3;
  Dataset d(y, {}, {}, g, {{"a", Role::gaussian, {}}, {"b", Role::gaussian, {}}},
            u, {{"u", Role::lognormal, {}}}, disc,
            {{"d", Role::discrete, {"w", "x", "y", "z"}}});
  DesignMatrix dm = build_design(d, {"a", "log(u)", "d", "b"});
  // 1 intercept + a + log(u) + 3 dummies + b
  CHECK(dm.X.cols() == 7);
  CHECK(dm.X(1, 2) == doctest::Approx(1.0));
  CHECK(dm.X(3, 2) == doctest::Approx(3.0));
  CHECK_THROWS_AS(build_design(d, {"log(a)"}), input_error);
  CHECK_THROWS_AS(build_design(d, {"nope"}), input_error);
}

TEST_CASE("with_lognormal_as_gaussian moves the block") {
  Eigen::VectorXd y(2);
  y << 1, 2;
  Eigen::MatrixXd g(2, 1), u(2, 1);
  g << 1, 2;
  u << 3, 4;
  Dataset d(y, {}, {}, g, {{"a", Role::gaussian, {}}}, u,
            {{"u", Role::lognormal, {}}}, {}, {});
  Dataset d2 = d.with_lognormal_as_gaussian();
  CHECK(d2.p_lognormal() == 0);
  CHECK(d2.p_gaussian() == 2);
  CHECK(d2.gaussian()(0, 1) == 3.0);
  CHECK(d2.gaussian_specs()[1].role == Role::gaussian);
  CHECK(d2.gaussian_specs()[1].name == "u");
}

TEST_CASE("dataset validation") {
  Eigen::VectorXd y(2);
  y << 1, 2;
  Eigen::VectorXd bad_expo(2);
  bad_expo << 1.0, 0.0;
  CHECK_THROWS_AS(Dataset(y, bad_expo, {}, Eigen::MatrixXd(2, 0), {},
                          Eigen::MatrixXd(2, 0), {}, {}, {}),
                  input_error);
  Eigen::MatrixXd negu(2, 1);
  negu << 1.0, -2.0;
  CHECK_THROWS_AS(Dataset(y, {}, {}, Eigen::MatrixXd(2, 0), {}, negu,
                          {{"u", Role::lognormal, {}}}, {}, {}),
                  input_error);
}

TEST_CASE("subset keeps row order") {
  Eigen::VectorXd y(4);
  y << 10, 20, 30, 40;
  Eigen::MatrixXd g(4, 1);
  g << 1, 2, 3, 4;
  Dataset d(y, {}, {}, g, {{"x", Role::gaussian, {}}}, Eigen::MatrixXd(4, 0),
            {}, {}, {});
  Dataset s = d.subset({3, 1});
  REQUIRE(s.n() == 2);
  CHECK(s.response()(0) == 40.0);
  CHECK(s.response()(1) == 20.0);
  CHECK(s.gaussian()(0, 0) == 4.0);
}
