#pragma once

#include "grshadow/pseudo.hpp"
#include "grshadow/shadow.hpp"

#include <json.hpp>

#include <istream>
#include <string>
#include <vector>

namespace grshadow {

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  /// Half-width of the 95% confidence interval of the slope (Student t);
  /// infinite with fewer than three points.
  double half_width = 0;
  std::size_t count = 0;
};

/// Ordinary least squares y = intercept + slope x.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
/// Fit of log y against log x over pairs with x, y > floor and finite.
LinearFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, double floor = 1e-290);

nlohmann::json to_json(const ShadowResult& result);
nlohmann::json to_json(const StepRecord& step, std::size_t k);
nlohmann::json to_json(const CheckReport& report);

/// Records of one input file: JSON lines, or CSV with `# {json}` header lines.
std::vector<nlohmann::json> read_records(std::istream& in);

struct Series {
  std::string name;
  std::string x_label, y_label;
  std::vector<double> x, y;
  LinearFit fit;
};

struct RunSummary {
  std::string source;
  std::string record;
  bool ok = false;
  double worst_margin = 0;
  std::size_t steps = 0;
  nlohmann::json header;
};

struct Report {
  std::vector<RunSummary> rows;
  std::vector<Series> series;
};

/// Ball-transfer records over ybar in [1e-5, 1e-2] (R / Rbar at fixed small
/// Rbar) and |x| in [1e1, 1e3] (Rbar / R at fixed R), log-spaced.
std::vector<nlohmann::json> transfer_sweep_records(int points = 40);

/// Summary rows and log-log series (error vs boundary distance, error vs |x|,
/// R/Rbar vs ybar) from records produced by the command-line tool. Throws
/// "schema mismatch" for unknown records.
Report build_report(const std::vector<std::pair<std::string, std::vector<nlohmann::json>>>& inputs);

/// Writes summary.csv, one CSV per series and slopes.csv into dir.
void write_report(const Report& report, const std::string& dir);

}  // namespace grshadow
