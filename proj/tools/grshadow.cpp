// grshadow: command-line front end.
#include "grshadow/compactify.hpp"
#include "grshadow/flow.hpp"
#include "grshadow/hyperbolic.hpp"
#include "grshadow/polyfield.hpp"
#include "grshadow/pseudo.hpp"
#include "grshadow/report.hpp"
#include "grshadow/shadow.hpp"
#include "grshadow/weighted.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

using namespace grshadow;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Rejected {
  json record;
};

double default_tol() {
  if (const char* env = std::getenv("GRSHADOW_TOL")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && *end == '\0' && v > 0) return v;
    throw UsageError("GRSHADOW_TOL must be a positive number");
  }
  return 1e-10;
}

Vector parse_point(const std::string& text, int dim, const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0') throw UsageError(what + ": invalid number '" + cell + "'");
    values.push_back(v);
  }
  if (static_cast<int>(values.size()) != dim) {
    throw UsageError(what + ": expected " + std::to_string(dim) + " components");
  }
  return Eigen::Map<Vector>(values.data(), dim);
}

json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Where records go: stdout or --output.
class Sink {
 public:
  Sink(const std::string& path, bool jsonl) : jsonl_(jsonl) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw DomainError("cannot write " + path);
    }
  }
  std::ostream& out() { return file_ ? *file_ : std::cout; }
  bool jsonl() const { return jsonl_; }

  void header(const json& j) {
    if (jsonl_) out() << j.dump() << '\n';
    else out() << "# " << j.dump() << '\n';
  }
  // CSV rows share one column list; jsonl rows become objects.
  void columns(std::vector<std::string> names) {
    columns_ = std::move(names);
    if (!jsonl_) {
      for (std::size_t i = 0; i < columns_.size(); ++i) out() << (i ? "," : "") << columns_[i];
      out() << '\n';
    }
  }
  void row(const std::string& record, const std::vector<double>& values) {
    if (jsonl_) {
      json j;
      j["record"] = record;
      for (std::size_t i = 0; i < values.size(); ++i) j[columns_[i]] = values[i];
      out() << j.dump() << '\n';
    } else {
      for (std::size_t i = 0; i < values.size(); ++i) out() << (i ? "," : "") << num(values[i]);
      out() << '\n';
    }
  }

 private:
  bool jsonl_;
  std::unique_ptr<std::ofstream> file_;
  std::vector<std::string> columns_;
};

// The flow underlying a space, as a map when asked.
Dynamics make_dynamics(const CompactifiedField& cf, Space space, bool is_map, const Vector& chart_point,
                       bool rescaled, double tol) {
  IntegratorOptions opts;
  opts.tol = tol;
  Dynamics d;
  switch (space) {
    case Space::euclidean:
      d = rescaled ? rescaled_dynamics(cf, opts) : original_dynamics(cf.base(), opts);
      break;
    case Space::ball: d = ball_dynamics(cf, opts); break;
    case Space::chart:
      if (chart_point.size() != cf.dimension()) throw DomainError("chart space needs a chart point");
      d = chart_dynamics(cf, chart_point / chart_point.norm(), opts);
      break;
  }
  return is_map ? d.time_one_map() : d;
}

PseudoTrajectory load_pseudo(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read " + path);
  return read_pseudo_csv(in);
}

HyperbolicProfile profile_for(const CompactifiedField& cf, const PseudoTrajectory& pt, const Geometry& g) {
  Vector p;
  if (pt.space == Space::chart) {
    p = pt.chart_point / pt.chart_point.norm();
  } else {
    const Vector end = g.to_ball(pt.states.back());
    if (end.norm() == 0) throw DomainError("pseudotrajectory ends at the origin: no boundary point nearby");
    const Vector dir = end / end.norm();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : boundary_fixed_points(cf)) {
      if ((c - dir).norm() < best) {
        best = (c - dir).norm();
        p = c;
      }
    }
    if (p.size() == 0) throw DomainError("no boundary fixed point found");
  }
  return spectral_profile(cf, p);
}

json profile_json(const HyperbolicProfile& prof, const ExponentWindow& w) {
  json j;
  j["record"] = "exponents";
  j["point"] = vec(prof.point);
  j["mu"] = prof.mu2;
  j["mu1"] = prof.mu1;
  j["mu2"] = prof.mu2;
  j["case"] = to_string(prof.profile_case);
  j["tangent_rates"] = prof.tangent_rates;
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  opt("lambda_s_min", prof.lambda_s_min);
  opt("lambda_s_max", prof.lambda_s_max);
  opt("lambda_u_min", prof.lambda_u_min);
  opt("lambda_u_max", prof.lambda_u_max);
  j["transversal_ok"] = prof.transversal_ok;
  j["bound"] = to_string(w.bound_kind);
  j["m_bound"] = w.m_bound;
  j["window"] = (w.bound_kind == BoundKind::lower ? "m>" : "0<m<") + num(w.m_bound);
  j["paper_literal_bound"] = w.paper_literal_bound;
  j["m"] = w.m;
  j["m_in_window"] = w.m_in_window;
  j["decompactified_exponent"] = w.decompactified_exponent;
  j["n0"] = w.n0;
  j["nbar0"] = w.nbar0;
  return j;
}

std::string key_values(const json& j) {
  std::string out;
  for (const auto& [key, value] : j.items()) {
    if (key == "record") continue;
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) text += (i ? "," : "") + num(value[i].get<double>());
    } else if (value.is_number()) {
      text = num(value.get<double>());
    } else {
      text = value.dump();
    }
    out += (out.empty() ? "" : " ") + key + "=" + text;
  }
  return out;
}

std::vector<Vector> sphere_directions(int n, int samples) {
  std::vector<Vector> out;
  if (n == 1) return {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
  if (n == 2) {
    for (int i = 0; i < samples; ++i) {
      const double a = 2 * std::numbers::pi * i / samples;
      Vector u(2);
      u << std::cos(a), std::sin(a);
      out.push_back(u);
    }
    return out;
  }
  if (n == 3) {
    const double golden = std::numbers::pi * (3 - std::sqrt(5.0));
    for (int i = 0; i < samples; ++i) {
      const double z = 1 - 2 * (i + 0.5) / samples;
      const double rho = std::sqrt(1 - z * z);
      Vector u(3);
      u << rho * std::cos(golden * i), rho * std::sin(golden * i), z;
      out.push_back(u);
    }
    return out;
  }
  std::mt19937_64 rng(0);
  std::normal_distribution<double> normal;
  for (int i = 0; i < samples; ++i) {
    Vector u(n);
    for (int j = 0; j < n; ++j) u[j] = normal(rng);
    out.push_back(u / u.norm());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shadowing toolkit for polynomial ODEs with grow-up"};
  app.require_subcommand(1);
  std::string format = "csv";
  std::string output;
  double tol = 0;
  app.add_option("--format", format, "Record format")->check(CLI::IsMember({"csv", "jsonl"}));
  app.add_option("-o,--output", output, "Output file (default stdout)");
  app.add_option("--tol", tol, "Integration tolerance (default $GRSHADOW_TOL or 1e-10)")
      ->check(CLI::PositiveNumber);

  // compactify
  auto* c_cmd = app.add_subcommand("compactify", "Boundary field of the compactified system");
  std::string field_path;
  int samples = 16;
  c_cmd->add_option("field", field_path, "ODE file")->required();
  c_cmd->add_option("--samples", samples, "Sphere directions (N >= 2)")->check(CLI::Range(1, 100000));

  // integrate
  auto* i_cmd = app.add_subcommand("integrate", "Integrate the original or compactified system");
  std::string x0_text, space_name = "euclidean";
  double t0 = 0, t1 = 1, threshold = 1e6;
  i_cmd->add_option("field", field_path, "ODE file")->required();
  i_cmd->add_option("--x0", x0_text, "Initial point in R^N (comma separated)")->required();
  i_cmd->add_option("--t0", t0, "Start time");
  i_cmd->add_option("--t1", t1, "End time (horizon)");
  i_cmd->add_option("--space", space_name, "euclidean or ball")->check(CLI::IsMember({"euclidean", "ball"}));
  i_cmd->add_option("--threshold", threshold, "Grow-up norm threshold")->check(CLI::PositiveNumber);

  // pseudo gen / check
  auto* p_cmd = app.add_subcommand("pseudo", "Pseudotrajectories");
  p_cmd->require_subcommand(1);
  auto* pg_cmd = p_cmd->add_subcommand("gen", "Generate a pseudotrajectory");
  auto* pc_cmd = p_cmd->add_subcommand("check", "Check a pseudotrajectory against its law");
  std::string kind_name, dynamics_name = "map", chart_text;
  double delta = -1, law_n = -1, law_C = -1, law_T = -1;
  int length = 10;
  std::uint64_t seed = 0;
  bool next_point = false;
  for (auto* cmd : {pg_cmd, pc_cmd}) {
    cmd->add_option("field", field_path, "ODE file")->required();
    cmd->add_option("--kind", kind_name, "Law kind")
        ->check(CLI::IsMember({"standard", "nonuniform", "noncompact_nonuniform", "weighted", "noncompact_weighted"}));
    cmd->add_option("--delta,-d", delta, "Law magnitude (delta or d)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--n", law_n, "Nonuniform exponent");
    cmd->add_option("--C", law_C, "Weight base");
    cmd->add_option("--T", law_T, "Window duration (flows)");
  }
  std::string pseudo_path;
  pg_cmd->add_option("--x0", x0_text, "Initial point in R^N")->required();
  pg_cmd->add_option("--length", length, "Steps (maps) or duration (flows)")->check(CLI::NonNegativeNumber);
  pg_cmd->add_option("--seed", seed, "Random seed");
  pg_cmd->add_option("--space", space_name, "euclidean, ball or chart")
      ->check(CLI::IsMember({"euclidean", "ball", "chart"}));
  pg_cmd->add_option("--dynamics", dynamics_name, "map (time-one) or flow")->check(CLI::IsMember({"map", "flow"}));
  pg_cmd->add_option("--chart", chart_text, "Boundary point of the chart (default: direction of x0)");
  pg_cmd->add_flag("--next-point", next_point, "Nonuniform allowance at x_{k+1}");
  pc_cmd->add_option("file", pseudo_path, "Pseudotrajectory CSV")->required();

  // exponents
  auto* e_cmd = app.add_subcommand("exponents", "Boundary fixed points, profiles and exponent windows");
  std::optional<double> m_opt;
  double nbar0 = 2;
  std::string e_kind = "flow";
  bool json_flag = false;
  e_cmd->add_option("field", field_path, "ODE file")->required();
  e_cmd->add_option("--m", m_opt, "Exponent to test against the window");
  e_cmd->add_option("--nbar0", nbar0, "Decompactified pseudotrajectory exponent");
  e_cmd->add_option("--dynamics", e_kind, "flow or map (time-one)")->check(CLI::IsMember({"flow", "map"}));
  e_cmd->add_flag("--json", json_flag, "One JSON object per boundary point");

  // shadow find
  auto* s_cmd = app.add_subcommand("shadow", "Shadowing");
  s_cmd->require_subcommand(1);
  auto* sf_cmd = s_cmd->add_subcommand("find", "Find a shadowing point");
  std::optional<double> Delta_opt, C_opt;
  ShadowOptions sopts;
  bool weighted = false;
  sf_cmd->add_option("field", field_path, "ODE file")->required();
  sf_cmd->add_option("file", pseudo_path, "Pseudotrajectory CSV")->required();
  sf_cmd->add_option("--m", m_opt, "Envelope exponent (default from the window)");
  sf_cmd->add_option("--Delta", Delta_opt, "Envelope constant")->check(CLI::PositiveNumber);
  sf_cmd->add_option("--level", sopts.level, "Dyadic refinement level")->check(CLI::Range(0, 30));
  sf_cmd->add_option("--depth", sopts.depth, "Refinement depth in steps")->check(CLI::Range(1, 100000));
  sf_cmd->add_option("--compose", sopts.compose, "Steps per membership test (0 = automatic)")
      ->check(CLI::NonNegativeNumber);
  sf_cmd->add_flag("--weighted", weighted, "Weighted shadowing");
  sf_cmd->add_option("--C", C_opt, "Weight base")->check(CLI::PositiveNumber);

  // report
  auto* r_cmd = app.add_subcommand("report", "Summary tables and log-log series");
  std::vector<std::string> inputs;
  std::string out_dir = "report";
  bool sweep = false;
  r_cmd->add_option("inputs", inputs, "Record files from shadow find / pseudo check");
  r_cmd->add_option("--out", out_dir, "Output directory");
  r_cmd->add_flag("--transfer-sweep", sweep, "Include the ball-transfer sweep");

  try {
    app.parse(argc, argv);
    if (tol == 0) tol = default_tol();
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
    return 2;
  }

  try {
    Sink sink(output, format == "jsonl");
    std::cout << std::setprecision(17);
    if (*r_cmd) {
      std::vector<std::pair<std::string, std::vector<json>>> records;
      for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw DomainError("cannot read " + path);
        records.emplace_back(path, read_records(in));
      }
      if (sweep) records.emplace_back("transfer-sweep", transfer_sweep_records());
      const Report report = build_report(records);
      write_report(report, out_dir);
      sink.header({{"record", "report"}, {"runs", report.rows.size()}, {"series", report.series.size()},
                   {"directory", out_dir}});
      for (const auto& s : report.series) {
        sink.header({{"record", "slope"}, {"series", s.name}, {"slope", s.fit.slope},
                     {"half_width", s.fit.half_width}, {"count", s.fit.count}});
      }
      return 0;
    }

    const PolynomialField field = load_field(field_path);
    const CompactifiedField cf(field);
    const int n = field.dimension();

    if (*c_cmd) {
      sink.header({{"record", "compactify"}, {"dimension", n}, {"degree", cf.degree()},
                   {"rescale_exponent", cf.rescale_exponent()}, {"half_order_terms", cf.has_half_order_terms()}});
      std::vector<std::string> cols;
      for (int i = 0; i < n; ++i) cols.push_back("dir_" + std::to_string(i));
      for (int i = 0; i < n; ++i) cols.push_back("Xbar_" + std::to_string(i));
      sink.columns(cols);
      for (const auto& u : sphere_directions(n, samples)) {
        const Vector v = cf.boundary_eval(u);
        std::vector<double> row(u.data(), u.data() + n);
        row.insert(row.end(), v.data(), v.data() + n);
        sink.row("boundary", row);
      }
      return 0;
    }

    if (*i_cmd) {
      const Vector x0 = parse_point(x0_text, n, "--x0");
      IntegratorOptions opts;
      opts.tol = tol;
      const bool ball = space_name == "ball";
      const Trajectory traj = ball ? integrate(cf.as_field(), theta(x0), t0, t1, opts)
                                   : integrate([&field](const Vector& x) { return field.eval(x); }, x0, t0, t1, opts);
      std::vector<std::string> cols{"t"};
      for (int i = 0; i < n; ++i) cols.push_back("x" + std::to_string(i));
      sink.columns(cols);
      for (std::size_t k = 0; k < traj.times.size(); ++k) {
        std::vector<double> row{traj.times[k]};
        row.insert(row.end(), traj.states[k].data(), traj.states[k].data() + n);
        sink.row("state", row);
      }
      const GrowthClass g = classify_growth(traj, t1 - t0, threshold);
      json rec{{"record", "growth"}, {"tag", to_string(g.tag)}, {"max_norm", g.max_norm},
               {"final_time", g.final_time}, {"evidence", g.evidence}, {"space", space_name}};
      if (g.escape_time) rec["escape_time"] = *g.escape_time;
      sink.header(rec);
      return 0;
    }

    if (*e_cmd) {
      const DynamicsKind kind = e_kind == "map" ? DynamicsKind::map : DynamicsKind::flow;
      std::size_t ok = 0;
      std::string last_error = "no boundary fixed points";
      for (const auto& p : boundary_fixed_points(cf)) {
        json rec;
        try {
          const HyperbolicProfile prof = spectral_profile(cf, p);
          const ExponentWindow w = admissible_exponents(prof, kind, m_opt, nbar0);
          rec = profile_json(kind == DynamicsKind::map ? map_profile(prof) : prof, w);
          ++ok;
        } catch (const DomainError& e) {
          rec = {{"record", "exponents"}, {"point", vec(p)}, {"error", e.what()}};
          last_error = e.what();
        }
        if (json_flag || sink.jsonl()) sink.out() << rec.dump() << '\n';
        else sink.out() << key_values(rec) << '\n';
      }
      if (ok == 0) throw DomainError(last_error);
      return 0;
    }

    if (*pg_cmd) {
      if (kind_name.empty()) throw UsageError("--kind is required");
      if (delta < 0) throw UsageError("--delta is required");
      ErrorLaw law;
      law.kind = parse_law_kind(kind_name);
      law.magnitude = delta;
      if (law_n >= 0) law.n = law_n;
      if (law_C >= 0) law.C = law_C;
      if (law_T >= 0) law.T = law_T;
      law.next_point = next_point;
      law.validate();
      const Space space = parse_space(space_name);
      const Vector x0 = parse_point(x0_text, n, "--x0");
      Vector chart_point;
      if (space == Space::chart) {
        chart_point = chart_text.empty() ? x0 : parse_point(chart_text, n, "--chart");
        if (chart_point.norm() == 0) throw UsageError("chart point must be nonzero");
        chart_point /= chart_point.norm();
      }
      const bool is_map = dynamics_name == "map";
      const Dynamics dyn = make_dynamics(cf, space, is_map, chart_point, law.noncompact(), tol);
      Vector start = x0;
      if (space == Space::ball) start = theta(x0);
      if (space == Space::chart) start = dyn.geometry.boundary_chart()->from_euclid(x0);
      GenOptions gopts;
      gopts.seed = seed;
      PseudoTrajectory pt = gen_pseudo(dyn, start, length, law, gopts);
      pt.chart_point = chart_point;
      write_pseudo_csv(pt, sink.out());
      return 0;
    }

    if (*pc_cmd) {
      const PseudoTrajectory pt = load_pseudo(pseudo_path);
      ErrorLaw law = pt.law;
      if (!kind_name.empty()) law.kind = parse_law_kind(kind_name);
      if (delta >= 0) law.magnitude = delta;
      if (law_n >= 0) law.n = law_n;
      if (law_C >= 0) law.C = law_C;
      if (law_T >= 0) law.T = law_T;
      law.validate();
      const Dynamics dyn = make_dynamics(cf, pt.space, pt.is_map, pt.chart_point, law.noncompact(), tol);
      const CheckReport report = check_pseudo(pt, dyn, law);
      json head = to_json(report);
      head["kind"] = to_string(law.kind);
      sink.header(head);
      sink.columns({"t", "defect", "allowance", "noise"});
      for (const auto& s : report.samples) sink.row("sample", {s.t, s.defect, s.allowance, s.noise});
      if (!report.holds) {
        throw Rejected{{{"error", "pseudotrajectory violates its law"},
                        {"worst_margin", report.worst_margin},
                        {"worst_location", report.worst_location}}};
      }
      return 0;
    }

    if (*sf_cmd) {
      const PseudoTrajectory pt = load_pseudo(pseudo_path);
      const bool noncompact = pt.law.noncompact();
      if (weighted != pt.law.weighted()) {
        throw UsageError(weighted ? "--weighted needs a pseudotrajectory with a weighted law"
                                  : "weighted law needs --weighted");
      }
      const Dynamics dyn = make_dynamics(cf, pt.space, pt.is_map, pt.chart_point, noncompact, tol);
      ShadowResult result;
      if (weighted) {
        if (!C_opt) throw UsageError("--weighted needs --C");
        if (Delta_opt || m_opt) throw UsageError("--m and --Delta do not apply to weighted shadowing");
        result = weighted_shadow_solve(dyn, pt, *C_opt);
      } else {
        if (C_opt) throw UsageError("--C needs --weighted");
        if (!Delta_opt) throw UsageError("--Delta is required");
        if (pt.space == Space::euclidean) throw DomainError("nonuniform shadowing needs ball or chart points");
        const HyperbolicProfile prof = profile_for(cf, pt, dyn.geometry);
        const ExponentWindow w =
            admissible_exponents(prof, pt.is_map ? DynamicsKind::map : DynamicsKind::flow, m_opt);
        result = pt.is_map ? shadow_search_map(dyn, pt, w, w.m, *Delta_opt, sopts)
                           : shadow_search_flow(dyn, pt, w, w.m, *Delta_opt, sopts);
      }
      sink.header(to_json(result));
      sink.columns({"k", "t", "error", "allowance", "margin", "boundary_distance", "norm"});
      for (std::size_t k = 0; k < result.steps.size(); ++k) {
        const StepRecord& s = result.steps[k];
        sink.row("step", {static_cast<double>(k), s.t, s.error, s.allowance, s.margin, s.boundary_distance, s.norm});
      }
      if (!result.valid) {
        throw Rejected{{{"error", result.status},
                        {"worst_margin", result.worst_margin},
                        {"worst_location", result.worst_location}}};
      }
      return 0;
    }
  } catch (const Rejected& r) {
    std::cout.flush();
    json rec = r.record;
    rec["kind"] = "rejected";
    std::cerr << rec.dump() << '\n';
    return 1;
  } catch (const UsageError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "parse"}, {"line", e.line()}, {"column", e.column()}}.dump()
              << '\n';
    return 1;
  } catch (const DomainError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "domain"}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "internal"}}.dump() << '\n';
    return 1;
  }
  return 0;
}
