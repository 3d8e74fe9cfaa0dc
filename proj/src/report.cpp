#include "grshadow/report.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace grshadow {

using nlohmann::json;

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DomainError("fit needs equally many x and y values");
  LinearFit fit;
  fit.count = x.size();
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) {
    fit.slope = fit.intercept = std::numeric_limits<double>::quiet_NaN();
    fit.half_width = std::numeric_limits<double>::infinity();
    return fit;
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw DomainError("fit needs at least two distinct x values");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() < 3) {
    fit.half_width = std::numeric_limits<double>::infinity();
    return fit;
  }
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ssr += r * r;
  }
  const boost::math::students_t dist(n - 2);
  fit.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * std::sqrt(ssr / (n - 2) / sxx);
  return fit;
}

LinearFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, double floor) {
  if (x.size() != y.size()) throw DomainError("fit needs equally many x and y values");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(x[i]) && std::isfinite(y[i]) && x[i] > floor && y[i] > floor) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  return fit_line(lx, ly);
}

namespace {

json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

bool number(const json& j, const char* key, double& out) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) return false;
  out = it->get<double>();
  return std::isfinite(out);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

json to_json(const ShadowResult& r) {
  json j;
  j["record"] = "shadow";
  j["valid"] = r.valid;
  j["certified"] = r.certified;
  j["status"] = r.status;
  j["space"] = to_string(r.space);
  j["q"] = vec(r.q);
  j["weighted"] = r.weighted;
  if (r.weighted) {
    j["C"] = r.C;
    j["L"] = r.L;
    j["d"] = r.d;
  } else {
    j["m"] = r.m;
    j["Delta"] = r.Delta;
    j["realized_Delta"] = r.realized_Delta;
  }
  j["worst_margin"] = r.worst_margin;
  j["worst_location"] = r.worst_location;
  j["steps"] = r.steps.size();
  const ShadowDiagnostics& d = r.diagnostics;
  j["diagnostics"] = {{"newton_iterations", d.newton_iterations},
                      {"closure_residual", d.closure_residual},
                      {"s_dim", d.s_dim},
                      {"u_dim", d.u_dim},
                      {"compose", d.compose},
                      {"conley_cubes", d.conley_cubes},
                      {"conley_undecided", d.conley_undecided},
                      {"conley_cube_side", d.conley_cube_side},
                      {"surface_certified", d.surface_certified},
                      {"frame_condition", d.frame_condition},
                      {"flow_factor", d.flow_factor},
                      {"tail_bound", d.tail_bound},
                      {"iterations", d.iterations}};
  if (!r.surface_sample.empty()) {
    json s = json::array();
    for (std::size_t i = 0; i < r.surface_sample.size(); ++i) {
      s.push_back({{"q", vec(r.surface_sample[i])}, {"valid", static_cast<bool>(r.surface_valid[i])}});
    }
    j["surface_sample"] = s;
  }
  return j;
}

json to_json(const StepRecord& s, std::size_t k) {
  return {{"record", "step"},         {"k", k},
          {"t", s.t},                 {"error", s.error},
          {"allowance", s.allowance}, {"margin", s.margin},
          {"boundary_distance", s.boundary_distance}, {"norm", s.norm}};
}

json to_json(const CheckReport& r) {
  json j;
  j["record"] = "check";
  j["holds"] = r.holds;
  j["worst_margin"] = r.worst_margin;
  j["worst_location"] = r.worst_location;
  if (r.integral_value) j["integral_value"] = *r.integral_value;
  j["tail_bound"] = r.tail_bound;
  j["samples"] = r.samples.size();
  return j;
}

std::vector<json> read_records(std::istream& in) {
  std::vector<json> out;
  std::vector<std::string> columns;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      if (line[0] == '{') {
        out.push_back(json::parse(line));
        continue;
      }
      if (line[0] == '#') {
        const auto brace = line.find('{');
        if (brace != std::string::npos) {
          out.push_back(json::parse(line.substr(brace)));
          columns.clear();
        }
        continue;
      }
    } catch (const json::parse_error&) {
      throw DomainError("schema mismatch: malformed JSON record");
    }
    const std::vector<std::string> cells = split_csv(line);
    if (columns.empty()) {
      columns = cells;
      continue;
    }
    if (cells.size() != columns.size()) throw DomainError("schema mismatch: ragged CSV row");
    json row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      char* end = nullptr;
      const double v = std::strtod(cells[i].c_str(), &end);
      if (end == cells[i].c_str() || *end != '\0') {
        row[columns[i]] = cells[i];
      } else {
        row[columns[i]] = v;
      }
    }
    row["record"] = row.contains("error") ? "step" : "sample";
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<json> transfer_sweep_records(int points) {
  if (points < 2) throw DomainError("sweep needs at least two points");
  std::vector<json> out;
  for (int i = 0; i < points; ++i) {
    const double f = static_cast<double>(i) / (points - 1);
    const double ybar = std::pow(10.0, -5 + 3 * f);
    Vector xbar = Vector::Zero(1);
    xbar[0] = 1 - ybar;
    const double rbar = 1e-3 * ybar;
    const BallTransfer b = ball_expand_bound(xbar, rbar);
    out.push_back({{"record", "transfer"}, {"kind", "expand"}, {"ybar", ybar}, {"ratio", b.output_radius / rbar}});
  }
  for (int i = 0; i < points; ++i) {
    const double f = static_cast<double>(i) / (points - 1);
    const double norm = std::pow(10.0, 1 + 2 * f);
    Vector x = Vector::Zero(1);
    x[0] = norm;
    const double r = 1e-3;
    const BallTransfer b = ball_contract_bound(x, r);
    out.push_back({{"record", "transfer"}, {"kind", "contract"}, {"x_norm", norm}, {"ratio", b.output_radius / r}});
  }
  return out;
}

Report build_report(const std::vector<std::pair<std::string, std::vector<json>>>& inputs) {
  Report report;
  Series by_distance{"error_vs_boundary_distance", "boundary_distance", "error", {}, {}, {}};
  Series by_norm{"error_vs_norm", "norm", "error", {}, {}, {}};
  Series expand{"expansion_ratio_vs_ybar", "ybar", "R_over_Rbar", {}, {}, {}};
  Series contract{"contraction_ratio_vs_norm", "norm", "Rbar_over_R", {}, {}, {}};
  for (const auto& [source, records] : inputs) {
    RunSummary* current = nullptr;
    for (const json& r : records) {
      if (!r.is_object() || !r.contains("record") || !r["record"].is_string()) {
        throw DomainError("schema mismatch: record without a type in " + source);
      }
      const std::string type = r["record"].get<std::string>();
      if (type == "shadow" || type == "check") {
        RunSummary row;
        row.source = source;
        row.record = type;
        row.ok = r.value(type == "shadow" ? "valid" : "holds", false);
        double margin = 0;
        row.worst_margin = number(r, "worst_margin", margin) ? margin : std::numeric_limits<double>::quiet_NaN();
        row.header = r;
        report.rows.push_back(std::move(row));
        current = &report.rows.back();
      } else if (type == "step" || type == "sample") {
        if (current) ++current->steps;
        double error = 0, x = 0;
        if (type == "step" && number(r, "error", error)) {
          if (number(r, "boundary_distance", x)) {
            by_distance.x.push_back(x);
            by_distance.y.push_back(error);
          }
          if (number(r, "norm", x)) {
            by_norm.x.push_back(x);
            by_norm.y.push_back(error);
          }
        }
      } else if (type == "transfer") {
        const std::string kind = r.value("kind", "");
        double x = 0, ratio = 0;
        if (kind == "expand" && number(r, "ybar", x) && number(r, "ratio", ratio)) {
          expand.x.push_back(x);
          expand.y.push_back(ratio);
        } else if (kind == "contract" && number(r, "x_norm", x) && number(r, "ratio", ratio)) {
          contract.x.push_back(x);
          contract.y.push_back(ratio);
        } else {
          throw DomainError("schema mismatch: malformed transfer record in " + source);
        }
      } else {
        throw DomainError("schema mismatch: unknown record type '" + type + "' in " + source);
      }
    }
  }
  for (Series* s : {&by_distance, &by_norm, &expand, &contract}) {
    if (s->x.empty()) continue;
    s->fit = fit_loglog(s->x, s->y);
    report.series.push_back(std::move(*s));
  }
  return report;
}

void write_report(const Report& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw DomainError("cannot write " + (fs::path(dir) / name).string());
    out << std::setprecision(17);
    return out;
  };
  {
    std::ofstream out = open("summary.csv");
    out << "source,record,ok,worst_margin,steps\n";
    for (const auto& r : report.rows) {
      out << r.source << ',' << r.record << ',' << (r.ok ? 1 : 0) << ',' << r.worst_margin << ',' << r.steps << '\n';
    }
  }
  std::ofstream slopes = open("slopes.csv");
  slopes << "series,slope,half_width,intercept,count\n";
  for (const auto& s : report.series) {
    std::ofstream out = open(s.name + ".csv");
    out << s.x_label << ',' << s.y_label << '\n';
    for (std::size_t i = 0; i < s.x.size(); ++i) out << s.x[i] << ',' << s.y[i] << '\n';
    slopes << s.name << ',' << s.fit.slope << ',' << s.fit.half_width << ',' << s.fit.intercept << ','
           << s.fit.count << '\n';
  }
}

}  // namespace grshadow
