#pragma once

// Dense univariate polynomials with coefficients stored in ascending order:
// p(x) = c[0] + c[1] x + ... + c[n] x^n.

#include <complex>
#include <vector>

#include <Eigen/Core>

namespace sonarpnp::poly {

using Coeffs = Eigen::VectorXd;

template <typename T>
T evaluate(const Coeffs& c, const T& x) {
  T acc = T(0);
  for (Eigen::Index i = c.size() - 1; i >= 0; --i) acc = acc * x + T(c[i]);
  return acc;
}

Coeffs derivative(const Coeffs& c);
Coeffs multiply(const Coeffs& a, const Coeffs& b);
Coeffs add(const Coeffs& a, const Coeffs& b);
Coeffs scale(const Coeffs& a, double s);

/// Drops leading coefficients with |c_k| <= rel_tol * max|c_i|.
Coeffs trim(const Coeffs& c, double rel_tol = 0.0);

/// Degree after trimming exact zeros; -1 for the zero polynomial.
int degree(const Coeffs& c);

/// All roots, as eigenvalues of the (balanced) companion matrix.
std::vector<std::complex<double>> roots(const Coeffs& c);

struct RealRootOptions {
  /// Roots with |Im| <= imag_tol * (1 + |Re|) are accepted as real.
  double imag_tol = 1e-8;
  /// Newton polishing steps applied to each accepted root.
  int polish_steps = 3;
};

/// Real roots in ascending order. Leading coefficients are assumed trimmed
/// by the caller when near-zero handling is wanted.
std::vector<double> real_roots(const Coeffs& c, const RealRootOptions& opts = {});

}  // namespace sonarpnp::poly
