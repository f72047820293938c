#include "sonarpnp/polynomial.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace sonarpnp::poly {

Coeffs derivative(const Coeffs& c) {
  if (c.size() <= 1) return Coeffs::Zero(1);
  Coeffs d(c.size() - 1);
  for (Eigen::Index i = 1; i < c.size(); ++i) d[i - 1] = double(i) * c[i];
  return d;
}

Coeffs multiply(const Coeffs& a, const Coeffs& b) {
  if (a.size() == 0 || b.size() == 0) return Coeffs::Zero(1);
  Coeffs out = Coeffs::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (Eigen::Index j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

Coeffs add(const Coeffs& a, const Coeffs& b) {
  Coeffs out = Coeffs::Zero(std::max(a.size(), b.size()));
  out.head(a.size()) += a;
  out.head(b.size()) += b;
  return out;
}

Coeffs scale(const Coeffs& a, double s) { return a * s; }

Coeffs trim(const Coeffs& c, double rel_tol) {
  if (c.size() == 0) return Coeffs::Zero(1);
  const double cutoff = rel_tol * c.cwiseAbs().maxCoeff();
  Eigen::Index n = c.size();
  while (n > 1 && std::abs(c[n - 1]) <= cutoff) --n;
  return c.head(n);
}

int degree(const Coeffs& c) {
  for (Eigen::Index i = c.size() - 1; i >= 0; --i) {
    if (c[i] != 0.0) return int(i);
  }
  return -1;
}

namespace {

// Parlett-Reinsch style balancing with powers of two.
void balance(Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  bool changed = true;
  for (int sweep = 0; changed && sweep < 100; ++sweep) {
    changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      double row = 0.0;
      double col = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        row += std::abs(m(i, j));
        col += std::abs(m(j, i));
      }
      if (row == 0.0 || col == 0.0) continue;
      int e = 0;
      std::frexp(row / col, &e);
      e /= 2;
      if (e != 0) {
        const double f = std::ldexp(1.0, e);
        m.col(i) *= f;
        m.row(i) /= f;
        changed = true;
      }
    }
  }
}

}  // namespace

std::vector<std::complex<double>> roots(const Coeffs& c_in) {
  // Strip exact leading zeros and factor out zero roots.
  Coeffs c = c_in;
  int deg = degree(c);
  std::vector<std::complex<double>> out;
  if (deg <= 0) return out;
  c = c.head(deg + 1).eval();
  Eigen::Index low = 0;
  while (low < deg && c[low] == 0.0) {
    out.emplace_back(0.0, 0.0);
    ++low;
  }
  c = c.segment(low, deg + 1 - low).eval();
  deg = int(c.size()) - 1;
  if (deg == 0) return out;
  if (deg == 1) {
    out.emplace_back(-c[0] / c[1], 0.0);
    return out;
  }
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  companion.diagonal(-1).setOnes();
  companion.col(deg - 1) = -c.head(deg) / c[deg];
  balance(companion);
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  for (Eigen::Index i = 0; i < deg; ++i) out.push_back(es.eigenvalues()[i]);
  return out;
}

std::vector<double> real_roots(const Coeffs& c, const RealRootOptions& opts) {
  std::vector<double> out;
  const Coeffs dc = derivative(c);
  for (const auto& z : roots(c)) {
    if (std::abs(z.imag()) > opts.imag_tol * (1.0 + std::abs(z.real()))) continue;
    double x = z.real();
    for (int k = 0; k < opts.polish_steps; ++k) {
      const double f = evaluate(c, x);
      const double df = evaluate(dc, x);
      if (df == 0.0) break;
      const double next = x - f / df;
      // Keep the step only if it does not increase |f|.
      if (!(std::abs(evaluate(c, next)) <= std::abs(f))) break;
      x = next;
    }
    out.push_back(x);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace sonarpnp::poly
