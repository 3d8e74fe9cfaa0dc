#include "grshadow/pseudo.hpp"

#include <charconv>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace grshadow {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& text, int line, int column) {
  const std::string t = trim(text);
  double v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ParseError("invalid number '" + t + "'", line, column);
  }
  return v;
}

std::map<std::string, std::string> key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    out[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return out;
}

}  // namespace

void write_pseudo_csv(const PseudoTrajectory& pt, std::ostream& out) {
  const ErrorLaw& law = pt.law;
  out << "# law kind=" << to_string(law.kind) << " delta=" << fmt(law.magnitude) << " n=" << fmt(law.n)
      << " C=" << fmt(law.C) << " T=" << fmt(law.T);
  if (law.next_point) out << " next=1";
  out << "\n# space=" << to_string(pt.space) << " dynamics=" << (pt.is_map ? "map" : "flow");
  if (pt.chart_point.size() > 0) {
    out << " chart=";
    for (Eigen::Index i = 0; i < pt.chart_point.size(); ++i) out << (i ? "," : "") << fmt(pt.chart_point[i]);
  }
  out << "\nt";
  const Eigen::Index n = pt.states.empty() ? 0 : pt.states.front().size();
  const bool jumps = pt.is_map && !pt.states.empty() && pt.jumps.size() + 1 == pt.states.size();
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
  if (jumps) {
    for (Eigen::Index i = 0; i < n; ++i) out << ",j" << i;
  }
  out << "\n";
  for (std::size_t k = 0; k < pt.states.size(); ++k) {
    out << fmt(pt.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) out << "," << fmt(pt.states[k][i]);
    if (jumps) {
      for (Eigen::Index i = 0; i < n; ++i) out << "," << fmt(k == 0 ? 0.0 : pt.jumps[k - 1][i]);
    }
    out << "\n";
  }
}

PseudoTrajectory read_pseudo_csv(std::istream& in) {
  PseudoTrajectory pt;
  bool have_law = false, have_header = false, with_jumps = false;
  Eigen::Index n = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(t.substr(1));
      if (body.rfind("law", 0) == 0) {
        auto kv = key_values(body.substr(3));
        if (!kv.count("kind")) throw ParseError("law line without kind", line_no, 1);
        pt.law.kind = parse_law_kind(kv["kind"]);
        if (kv.count("delta")) pt.law.magnitude = to_double(kv["delta"], line_no, 1);
        if (kv.count("n")) pt.law.n = to_double(kv["n"], line_no, 1);
        if (kv.count("C")) pt.law.C = to_double(kv["C"], line_no, 1);
        if (kv.count("T")) pt.law.T = to_double(kv["T"], line_no, 1);
        pt.law.next_point = kv.count("next") && kv["next"] == "1";
        have_law = true;
      } else if (body.rfind("space", 0) == 0) {
        auto kv = key_values(body);
        pt.space = parse_space(kv["space"]);
        if (kv.count("dynamics")) {
          if (kv["dynamics"] != "map" && kv["dynamics"] != "flow") {
            throw ParseError("dynamics must be map or flow", line_no, 1);
          }
          pt.is_map = kv["dynamics"] == "map";
        }
        if (kv.count("chart")) {
          auto parts = split(kv["chart"], ',');
          pt.chart_point.resize(static_cast<Eigen::Index>(parts.size()));
          for (std::size_t i = 0; i < parts.size(); ++i) {
            pt.chart_point[static_cast<Eigen::Index>(i)] = to_double(parts[i], line_no, 1);
          }
        }
      }
      continue;
    }
    if (!have_header) {
      auto cols = split(t, ',');
      if (cols.empty() || trim(cols[0]) != "t") throw ParseError("expected column header 't,x0,...'", line_no, 1);
      n = 0;
      while (static_cast<std::size_t>(n + 1) < cols.size() &&
             trim(cols[static_cast<std::size_t>(n + 1)]) == "x" + std::to_string(n)) {
        ++n;
      }
      const auto rest = static_cast<Eigen::Index>(cols.size()) - 1 - n;
      with_jumps = rest == n && n > 0;
      for (Eigen::Index i = 0; i < rest; ++i) {
        if (!with_jumps || trim(cols[static_cast<std::size_t>(n + 1 + i)]) != "j" + std::to_string(i)) {
          throw ParseError("unexpected column name", line_no, 1);
        }
      }
      if (n < 1) throw ParseError("no state columns", line_no, 1);
      have_header = true;
      continue;
    }
    auto cols = split(t, ',');
    const Eigen::Index width = with_jumps ? 2 * n + 1 : n + 1;
    if (static_cast<Eigen::Index>(cols.size()) != width) {
      throw ParseError("expected " + std::to_string(width) + " columns", line_no, 1);
    }
    int column = 1;
    pt.times.push_back(to_double(cols[0], line_no, column));
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      column += static_cast<int>(cols[static_cast<std::size_t>(i)].size()) + 1;
      x[i] = to_double(cols[static_cast<std::size_t>(i + 1)], line_no, column);
    }
    if (pt.times.size() > 1 && !(pt.times.back() > pt.times[pt.times.size() - 2])) {
      throw ParseError("times must be strictly increasing", line_no, 1);
    }
    pt.states.push_back(x);
    if (with_jumps && pt.states.size() > 1) {
      Vector j(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        j[i] = to_double(cols[static_cast<std::size_t>(n + 1 + i)], line_no, 1);
      }
      pt.jumps.push_back(j);
    }
  }
  if (with_jumps && !pt.is_map) throw ParseError("jump columns need map dynamics", line_no, 1);
  if (!have_law) throw ParseError("missing '# law' header line", line_no, 1);
  if (!have_header) throw ParseError("missing column header", line_no, 1);
  return pt;
}

}  // namespace grshadow
