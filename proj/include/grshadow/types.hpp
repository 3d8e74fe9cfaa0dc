#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

namespace grshadow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A vector field x' = F(x) on some subset of R^N.
using VectorField = std::function<Vector(const Vector&)>;
/// A map x -> f(x).
using PointMap = std::function<Vector(const Vector&)>;
/// Jacobian of a field or map.
using JacobianFn = std::function<Matrix(const Vector&)>;

/// Raised when an operation's input violates its domain (bad dimension,
/// point outside the ball, non-hyperbolic point, ...). The CLI maps these to
/// exit status 1.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Syntax or semantic error while reading an ODE text or data file.
class ParseError : public DomainError {
 public:
  ParseError(const std::string& what, int line, int column)
      : DomainError(what + " at line " + std::to_string(line) + ", column " +
                    std::to_string(column)),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

inline void require_dimension(const Vector& x, Eigen::Index n, const char* what) {
  if (x.size() != n) {
    throw DomainError(std::string("dimension mismatch: ") + what + " has size " +
                      std::to_string(x.size()) + ", expected " + std::to_string(n));
  }
}

}  // namespace grshadow
