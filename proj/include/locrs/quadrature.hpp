#pragma once

// Gauss rules from the Golub-Welsch eigenproblem, composite rules and
// least-squares slope fits.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace locrs {

struct Rule {
  std::vector<double> x, w;
  std::size_t size() const { return x.size(); }
};

namespace detail {

// Nodes and weights from the symmetric Jacobi matrix with diagonal a and
// off-diagonal b, for a weight of total mass mu0.
inline Rule golub_welsch(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double mu0) {
  const Eigen::Index n = a.size();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    J(i, i) = a(i);
    if (i + 1 < n) J(i, i + 1) = J(i + 1, i) = b(i);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success) throw std::runtime_error("golub_welsch: eigen solver failed");
  Rule r;
  for (Eigen::Index i = 0; i < n; ++i) {
    r.x.push_back(es.eigenvalues()(i));
    double v = es.eigenvectors()(0, i);
    r.w.push_back(mu0 * v * v);
  }
  return r;
}

} // namespace detail

/// Gauss-Legendre rule with n nodes on [lo, hi].
inline Rule gauss_legendre(int n, double lo = -1.0, double hi = 1.0) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1 required");
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n), b(std::max(n - 1, 1));
  for (int k = 1; k < n; ++k) b(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  Rule r = detail::golub_welsch(a, b.head(std::max(n - 1, 0)), 2.0);
  const double h = 0.5 * (hi - lo), m = 0.5 * (hi + lo);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r.x[i] = m + h * r.x[i];
    r.w[i] *= h;
  }
  return r;
}

/// Gauss-Jacobi rule for the weight (1-x)^alpha (1+x)^beta on [-1, 1].
inline Rule gauss_jacobi(int n, double alpha, double beta) {
  if (n < 1) throw std::invalid_argument("gauss_jacobi: n >= 1 required");
  if (alpha <= -1.0 || beta <= -1.0) throw std::invalid_argument("gauss_jacobi: exponents must exceed -1");
  Eigen::VectorXd a(n), b(std::max(n - 1, 0));
  const double ab = alpha + beta;
  a(0) = (beta - alpha) / (ab + 2.0);
  for (int k = 1; k < n; ++k) {
    double d = 2.0 * k + ab;
    a(k) = (beta * beta - alpha * alpha) / (d * (d + 2.0));
  }
  for (int k = 1; k < n; ++k) {
    double d = 2.0 * k + ab;
    // (k + ab) / (d - 1) is 1 at k = 1
    double r = k == 1 ? 1.0 : (k + ab) / (d - 1.0);
    b(k - 1) = std::sqrt(4.0 * k * (k + alpha) * (k + beta) * r / (d * d * (d + 1.0)));
  }
  double mu0 = std::pow(2.0, ab + 1.0) * std::exp(std::lgamma(alpha + 1.0) + std::lgamma(beta + 1.0) - std::lgamma(ab + 2.0));
  return detail::golub_welsch(a, b, mu0);
}

/// Gauss-Legendre on each interval [breaks[i], breaks[i+1]].
inline Rule composite_legendre(const std::vector<double>& breaks, int n_per_panel) {
  Rule out;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    Rule p = gauss_legendre(n_per_panel, breaks[i], breaks[i + 1]);
    out.x.insert(out.x.end(), p.x.begin(), p.x.end());
    out.w.insert(out.w.end(), p.w.begin(), p.w.end());
  }
  return out;
}

template <class F>
double integrate(const Rule& r, F&& f) {
  double s = 0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * f(r.x[i]);
  return s;
}

/// n points log-spaced on [lo, hi].
inline std::vector<double> log_space(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, n == 1 ? 0.0 : double(i) / (n - 1)));
  return out;
}

struct SlopeFit {
  double slope = 0, intercept = 0, max_residual = 0;
};

/// Least-squares fit of log y = slope * log x + intercept.
inline SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_loglog: need two or more points");
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] <= 0 || y[i] <= 0) throw std::invalid_argument("fit_loglog: non-positive sample");
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  SlopeFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  for (std::size_t i = 0; i < n; ++i)
    f.max_residual = std::max(f.max_residual, std::abs(std::log(y[i]) - f.slope * std::log(x[i]) - f.intercept));
  return f;
}

} // namespace locrs
