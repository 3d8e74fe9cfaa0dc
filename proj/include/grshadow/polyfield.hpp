#pragma once

#include "grshadow/types.hpp"

#include <boost/rational.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace grshadow {

using Rational = boost::rational<long long>;

/// coefficient * x0^e0 * ... * x{N-1}^e{N-1}; the coefficient is never zero.
struct Monomial {
  Rational coefficient;
  std::vector<int> exponents;

  int total_degree() const;
  bool operator==(const Monomial&) const = default;
};

/// Polynomial vector field x' = X(x) on R^N in canonical form: each component
/// holds monomials with distinct multi-indices sorted lexicographically.
///
/// Immutable after construction; every member function is safe to call
/// concurrently.
class PolynomialField {
 public:
  /// Collects like terms, drops zero coefficients and sorts. Throws DomainError
  /// when a monomial has the wrong number of exponents or a negative one.
  PolynomialField(int dimension, std::vector<std::vector<Monomial>> components);

  int dimension() const { return dimension_; }
  /// Maximum total degree over all components; 0 for the zero field.
  int degree() const { return degree_; }
  const std::vector<std::vector<Monomial>>& components() const { return components_; }
  bool is_zero() const;

  Vector eval(const Vector& x) const;
  /// Column k holds the degree-k homogeneous part X_k(x), k = 0..degree.
  Matrix eval_by_degree(const Vector& x) const;
  /// Symbolic derivative of every monomial, evaluated at x.
  Matrix jacobian(const Vector& x) const;

  /// Homogeneous part of top degree. Throws DomainError for the zero field.
  PolynomialField top_degree_part() const;
  PolynomialField homogeneous_part(int k) const;

  /// Canonical ODE text (`dim N` followed by one line per component).
  std::string to_string() const;

  bool operator==(const PolynomialField&) const = default;

 private:
  int dimension_;
  int degree_ = 0;
  std::vector<std::vector<Monomial>> components_;
};

/// Reads the ODE text grammar:
///
///   dim <N>
///   x<i>' = <poly>      (one line per i, any order)
///
/// `<poly>` is built from integer or p/q coefficients, variables x<j>, `+ - *`,
/// parentheses and `^` with non-negative integer exponents. `#` starts a
/// comment. Non-polynomial constructs are rejected with
/// "not normalizable: non-polynomial field".
PolynomialField parse_field(std::string_view source);

/// Reads and parses a file.
PolynomialField load_field(const std::string& path);

std::string format_rational(const Rational& r);

}  // namespace grshadow
