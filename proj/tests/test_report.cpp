#include "grshadow/report.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace grshadow;
using nlohmann::json;

TEST_CASE("least squares line with a Student t half-width") {
  const std::vector<double> x{0, 1, 2, 3, 4};
  const std::vector<double> y{1.1, 2.9, 5.2, 7.1, 8.7};
  const LinearFit f = fit_line(x, y);
  // Hand-computed: sxx = 10, sxy = 19.4.
  CHECK(f.slope == doctest::Approx(1.94).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(5.0 - 1.94 * 2).epsilon(1e-12));
  const double t975_df3 = 3.182446305284263;
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) ssr += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
  CHECK(f.half_width == doctest::Approx(t975_df3 * std::sqrt(ssr / 3 / 10)).epsilon(1e-9));
  CHECK(f.count == 5);
  CHECK(std::isinf(fit_line({0, 1}, {0, 1}).half_width));
  CHECK_THROWS_AS(fit_line({1, 1, 1}, {0, 1, 2}), DomainError);
}

TEST_CASE("log-log fit drops non-positive values") {
  const LinearFit f = fit_loglog({1, 10, 100, 0, -1}, {1, 0.01, 1e-4, 5, 5});
  CHECK(f.count == 3);
  CHECK(f.slope == doctest::Approx(-2).epsilon(1e-12));
}

TEST_CASE("records from JSON lines and CSV blocks") {
  std::istringstream in(
      "{\"record\":\"shadow\",\"valid\":true,\"worst_margin\":0.5}\n"
      "k,error,allowance,margin,boundary_distance\n"
      "0,1e-4,1e-3,9e-4,0.1\n"
      "1,1e-6,1e-4,9.9e-5,0.01\n"
      "# {\"record\":\"check\",\"holds\":false,\"worst_margin\":-1}\n"
      "t,defect\n"
      "0,0.5\n");
  const std::vector<json> r = read_records(in);
  REQUIRE(r.size() == 5);
  CHECK(r[1]["record"] == "step");
  CHECK(r[2]["error"].get<double>() == 1e-6);
  CHECK(r[3]["record"] == "check");
  CHECK(r[4]["record"] == "sample");
  std::istringstream bad("a,b\n1,2,3\n");
  CHECK_THROWS_WITH_AS(read_records(bad), doctest::Contains("schema mismatch"), DomainError);
  std::istringstream broken("{\"record\":\n");
  CHECK_THROWS_WITH_AS(read_records(broken), doctest::Contains("schema mismatch"), DomainError);
}

TEST_CASE("one run gives one summary row and its series") {
  std::istringstream in(
      "{\"record\":\"shadow\",\"valid\":true,\"worst_margin\":0.5}\n"
      "k,error,allowance,margin,boundary_distance,norm\n"
      "0,1e-2,1,0.99,1e-1,3\n"
      "1,1e-4,1,0.99,1e-2,30\n"
      "2,1e-6,1,0.99,1e-3,300\n");
  const Report rep = build_report({{"run.csv", read_records(in)}});
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].ok);
  CHECK(rep.rows[0].steps == 3);
  CHECK(rep.rows[0].worst_margin == 0.5);
  REQUIRE(rep.series.size() == 2);
  CHECK(rep.series[0].fit.slope == doctest::Approx(2).epsilon(1e-12));
  CHECK(rep.series[1].fit.slope == doctest::Approx(-2).epsilon(1e-12));
}

TEST_CASE("empty input yields empty tables") {
  const Report rep = build_report({});
  CHECK(rep.rows.empty());
  CHECK(rep.series.empty());
  std::istringstream blank("");
  CHECK(build_report({{"blank", read_records(blank)}}).rows.empty());
}

TEST_CASE("unknown records are a schema mismatch") {
  CHECK_THROWS_WITH_AS(build_report({{"x", {json{{"record", "mystery"}}}}}), doctest::Contains("schema mismatch"),
                       DomainError);
  CHECK_THROWS_WITH_AS(build_report({{"x", {json{{"value", 1}}}}}), doctest::Contains("schema mismatch"),
                       DomainError);
}

TEST_CASE("ball-transfer sweep slopes") {
  const Report rep = build_report({{"sweep", transfer_sweep_records()}});
  REQUIRE(rep.series.size() == 2);
  CHECK(rep.series[0].name == "expansion_ratio_vs_ybar");
  CHECK(std::abs(rep.series[0].fit.slope + 1.5) <= 0.02);
  CHECK(rep.series[1].name == "contraction_ratio_vs_norm");
  CHECK(std::abs(rep.series[1].fit.slope + 3) <= 0.05);
}
