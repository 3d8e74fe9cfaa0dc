#include "grshadow/polyfield.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

namespace grshadow {

int Monomial::total_degree() const {
  return std::accumulate(exponents.begin(), exponents.end(), 0);
}

namespace {

// A polynomial in N variables as multi-index -> coefficient. std::map keeps
// the lexicographic order used for canonical printing.
using Poly = std::map<std::vector<int>, Rational>;

void add_term(Poly& p, const std::vector<int>& e, const Rational& c) {
  if (c.numerator() == 0) return;
  auto [it, inserted] = p.emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second.numerator() == 0) p.erase(it);
  }
}

Poly add(const Poly& a, const Poly& b, int sign) {
  Poly r = a;
  for (const auto& [e, c] : b) add_term(r, e, sign > 0 ? c : -c);
  return r;
}

Poly mul(const Poly& a, const Poly& b) {
  Poly r;
  for (const auto& [ea, ca] : a) {
    for (const auto& [eb, cb] : b) {
      std::vector<int> e(ea.size());
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      add_term(r, e, ca * cb);
    }
  }
  return r;
}

Poly constant(int n, const Rational& c) {
  Poly p;
  add_term(p, std::vector<int>(n, 0), c);
  return p;
}

Poly power(const Poly& base, long long e, int n) {
  Poly r = constant(n, 1);
  for (long long i = 0; i < e; ++i) r = mul(r, base);
  return r;
}

std::vector<Monomial> to_monomials(const Poly& p) {
  std::vector<Monomial> out;
  out.reserve(p.size());
  for (const auto& [e, c] : p) out.push_back({c, e});
  return out;
}

const std::string kNonPolynomial = "not normalizable: non-polynomial field";

// Recursive-descent parser over a single right-hand side.
class RhsParser {
 public:
  RhsParser(std::string_view text, int line, int column_offset, int dim)
      : text_(text), line_(line), col0_(column_offset), dim_(dim) {}

  Poly parse() {
    Poly p = expression();
    skip_ws();
    if (pos_ < text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, line_, col0_ + static_cast<int>(pos_) + 1);
  }
  [[noreturn]] void reject() const {
    throw ParseError(kNonPolynomial, line_, col0_ + static_cast<int>(pos_) + 1);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  Poly expression() {
    skip_ws();
    int sign = 1;
    if (accept('-')) sign = -1;
    else accept('+');
    Poly p = term();
    if (sign < 0) p = add(Poly{}, p, -1);
    for (;;) {
      if (accept('+')) p = add(p, term(), 1);
      else if (accept('-')) p = add(p, term(), -1);
      else break;
    }
    return p;
  }

  Poly term() {
    Poly p = factor();
    for (;;) {
      if (accept('*')) {
        p = mul(p, factor());
      } else if (peek('/')) {
        reject();
      } else {
        break;
      }
    }
    return p;
  }

  long long integer_literal() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected integer");
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
      fail("decimal literals are not supported; use p/q");
    }
    try {
      return std::stoll(std::string(text_.substr(start, pos_ - start)));
    } catch (const std::out_of_range&) {
      fail("integer literal out of range");
    }
  }

  long long exponent() {
    skip_ws();
    if (peek('-') || peek('(')) reject();
    std::size_t save = pos_;
    long long e = integer_literal();
    if (peek('/')) {
      pos_ = save;
      reject();
    }
    return e;
  }

  Poly factor() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    char c = text_[pos_];
    Poly base;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      long long num = integer_literal();
      Rational value(num);
      if (accept('/')) {
        skip_ws();
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) reject();
        long long den = integer_literal();
        if (den == 0) fail("division by zero");
        value = Rational(num, den);
      }
      base = constant(dim_, value);
    } else if (c == '(') {
      ++pos_;
      base = expression();
      if (!accept(')')) fail("expected ')'");
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      std::string name(text_.substr(start, pos_ - start));
      if (peek('(')) {
        pos_ = start;
        reject();
      }
      if (name.size() < 2 || name[0] != 'x' ||
          !std::all_of(name.begin() + 1, name.end(), [](char d) { return std::isdigit(static_cast<unsigned char>(d)); })) {
        pos_ = start;
        fail("unknown identifier '" + name + "'");
      }
      int index = std::stoi(name.substr(1));
      if (index >= dim_) {
        pos_ = start;
        fail("dimension mismatch: variable " + name + " used with dim " + std::to_string(dim_));
      }
      std::vector<int> e(dim_, 0);
      e[index] = 1;
      base[e] = 1;
    } else {
      fail("unexpected character '" + std::string(1, c) + "'");
    }
    if (accept('^')) {
      long long e = exponent();
      if (e > 64) fail("exponent too large");
      base = power(base, e, dim_);
    }
    return base;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_;
  int col0_;
  int dim_;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

PolynomialField::PolynomialField(int dimension, std::vector<std::vector<Monomial>> components)
    : dimension_(dimension) {
  if (dimension <= 0) throw DomainError("field dimension must be positive");
  if (static_cast<int>(components.size()) != dimension) {
    throw DomainError("dimension mismatch: " + std::to_string(components.size()) +
                      " components for dim " + std::to_string(dimension));
  }
  components_.reserve(components.size());
  for (const auto& comp : components) {
    Poly p;
    for (const auto& m : comp) {
      if (static_cast<int>(m.exponents.size()) != dimension) {
        throw DomainError("dimension mismatch: monomial multi-index length");
      }
      if (std::any_of(m.exponents.begin(), m.exponents.end(), [](int e) { return e < 0; })) {
        throw DomainError(kNonPolynomial);
      }
      add_term(p, m.exponents, m.coefficient);
    }
    auto monos = to_monomials(p);
    for (const auto& m : monos) degree_ = std::max(degree_, m.total_degree());
    components_.push_back(std::move(monos));
  }
}

bool PolynomialField::is_zero() const {
  return std::all_of(components_.begin(), components_.end(), [](const auto& c) { return c.empty(); });
}

namespace {

// powers(i, e) = x_i^e for e = 0..degree.
Matrix power_table(const Vector& x, int degree) {
  Matrix t(x.size(), degree + 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    t(i, 0) = 1.0;
    for (int e = 1; e <= degree; ++e) t(i, e) = t(i, e - 1) * x[i];
  }
  return t;
}

double monomial_value(const Monomial& m, const Matrix& powers) {
  double v = boost::rational_cast<double>(m.coefficient);
  for (std::size_t i = 0; i < m.exponents.size(); ++i) {
    if (m.exponents[i] != 0) v *= powers(static_cast<Eigen::Index>(i), m.exponents[i]);
  }
  return v;
}

}  // namespace

Vector PolynomialField::eval(const Vector& x) const {
  require_dimension(x, dimension_, "point");
  const Matrix powers = power_table(x, degree_);
  Vector out = Vector::Zero(dimension_);
  for (int i = 0; i < dimension_; ++i) {
    for (const auto& m : components_[i]) out[i] += monomial_value(m, powers);
  }
  return out;
}

Matrix PolynomialField::eval_by_degree(const Vector& x) const {
  require_dimension(x, dimension_, "point");
  const Matrix powers = power_table(x, degree_);
  Matrix out = Matrix::Zero(dimension_, degree_ + 1);
  for (int i = 0; i < dimension_; ++i) {
    for (const auto& m : components_[i]) out(i, m.total_degree()) += monomial_value(m, powers);
  }
  return out;
}

Matrix PolynomialField::jacobian(const Vector& x) const {
  require_dimension(x, dimension_, "point");
  const Matrix powers = power_table(x, degree_);
  Matrix jac = Matrix::Zero(dimension_, dimension_);
  for (int i = 0; i < dimension_; ++i) {
    for (const auto& m : components_[i]) {
      for (int j = 0; j < dimension_; ++j) {
        const int ej = m.exponents[j];
        if (ej == 0) continue;
        Monomial d = m;
        d.coefficient *= ej;
        d.exponents[j] = ej - 1;
        jac(i, j) += monomial_value(d, powers);
      }
    }
  }
  return jac;
}

PolynomialField PolynomialField::homogeneous_part(int k) const {
  std::vector<std::vector<Monomial>> comps(dimension_);
  for (int i = 0; i < dimension_; ++i) {
    for (const auto& m : components_[i]) {
      if (m.total_degree() == k) comps[i].push_back(m);
    }
  }
  return PolynomialField(dimension_, std::move(comps));
}

PolynomialField PolynomialField::top_degree_part() const {
  if (is_zero()) throw DomainError("top degree part of the zero field is undefined");
  return homogeneous_part(degree_);
}

std::string format_rational(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

std::string PolynomialField::to_string() const {
  std::ostringstream os;
  os << "dim " << dimension_ << "\n";
  for (int i = 0; i < dimension_; ++i) {
    os << "x" << i << "' = ";
    if (components_[i].empty()) {
      os << "0\n";
      continue;
    }
    bool first = true;
    for (const auto& m : components_[i]) {
      Rational c = m.coefficient;
      bool negative = c.numerator() < 0;
      if (negative) c = -c;
      if (first) {
        if (negative) os << "-";
      } else {
        os << (negative ? " - " : " + ");
      }
      first = false;
      std::vector<std::string> factors;
      for (int j = 0; j < dimension_; ++j) {
        if (m.exponents[j] == 0) continue;
        std::string f = "x" + std::to_string(j);
        if (m.exponents[j] > 1) f += "^" + std::to_string(m.exponents[j]);
        factors.push_back(std::move(f));
      }
      if (factors.empty() || c != Rational(1)) factors.insert(factors.begin(), format_rational(c));
      for (std::size_t f = 0; f < factors.size(); ++f) os << (f ? "*" : "") << factors[f];
    }
    os << "\n";
  }
  return os.str();
}

PolynomialField parse_field(std::string_view source) {
  std::optional<int> dim;
  std::vector<std::optional<Poly>> comps;
  int line_no = 0;
  int last_line = 0;
  std::size_t start = 0;
  while (start <= source.size()) {
    std::size_t end = source.find('\n', start);
    if (end == std::string_view::npos) end = source.size();
    std::string_view raw = source.substr(start, end - start);
    ++line_no;
    start = end + 1;
    last_line = line_no;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    std::string_view line = trim(raw);
    if (line.empty()) {
      if (end == source.size()) break;
      continue;
    }
    const int lead = static_cast<int>(raw.find(line.front()));
    if (!dim) {
      if (line.substr(0, 3) != "dim") throw ParseError("expected 'dim <N>'", line_no, lead + 1);
      std::string_view rest = trim(line.substr(3));
      if (rest.empty() || !std::all_of(rest.begin(), rest.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        throw ParseError("expected positive integer after 'dim'", line_no, lead + 4);
      }
      int n = std::stoi(std::string(rest));
      if (n <= 0 || n > 64) throw ParseError("dimension must be in 1..64", line_no, lead + 4);
      dim = n;
      comps.assign(n, std::nullopt);
    } else {
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected '='", line_no, lead + 1);
      std::string lhs(trim(line.substr(0, eq)));
      if (lhs.size() < 3 || lhs[0] != 'x' || lhs.back() != '\'') {
        throw ParseError("expected left-hand side x<i>'", line_no, lead + 1);
      }
      std::string idx = lhs.substr(1, lhs.size() - 2);
      if (idx.empty() || !std::all_of(idx.begin(), idx.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        throw ParseError("expected left-hand side x<i>'", line_no, lead + 1);
      }
      int i = std::stoi(idx);
      if (i >= *dim) throw ParseError("dimension mismatch: x" + idx + "' with dim " + std::to_string(*dim), line_no, lead + 1);
      if (comps[i]) throw ParseError("duplicate equation for x" + idx, line_no, lead + 1);
      std::string_view rhs = line.substr(eq + 1);
      RhsParser parser(rhs, line_no, lead + static_cast<int>(eq) + 1, *dim);
      comps[i] = parser.parse();
    }
    if (end == source.size()) break;
  }
  if (!dim) throw ParseError("missing 'dim <N>' header", last_line, 1);
  std::vector<std::vector<Monomial>> components;
  for (int i = 0; i < *dim; ++i) {
    if (!comps[i]) {
      throw ParseError("dimension mismatch: no equation for x" + std::to_string(i), last_line, 1);
    }
    components.push_back(to_monomials(*comps[i]));
  }
  return PolynomialField(*dim, std::move(components));
}

PolynomialField load_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read field file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_field(ss.str());
}

}  // namespace grshadow
