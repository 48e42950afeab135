#pragma once

// Heat calculus for G = d_0^2 - L^2, L = a(x1) d_1^2 + b(x1) d_1, with x0 on
// the line and x1 on the torus R / 2 pi Z.
//
// Every kernel here has the form K(t, x, x') = g(t, x0 - x0') k(t, x1, x1')
// with g the heat kernel of d_0^2, because the x0 part of G has constant
// coefficients and Gaussians convolve to Gaussians. Only the one-dimensional
// factor k is computed. A kernel of class alpha has k of size t^(-5/4+alpha)
// and is stored through its rescaled profile
//   k~(t, v, x1') = t^(5/4-alpha) k(t, x1' + t^(1/4) v, x1').

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "locrs/expr.hpp"
#include "locrs/quadrature.hpp"
#include "locrs/rules.hpp"

namespace locrs {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// d(x, x') = sqrt|x0 - x0'| + |x1 - x1'|.
inline double parabolic_distance(double dx0, double dx1) { return std::sqrt(std::abs(dx0)) + std::abs(dx1); }

// ---------------------------------------------------------------------------
// Interpolation tables

/// Quintic Hermite interpolation from values and first two derivatives on a
/// uniform grid.
class HermiteTable {
public:
  HermiteTable() = default;
  HermiteTable(double lo, double h, std::vector<std::array<double, 3>> data) : lo_(lo), h_(h), d_(std::move(data)) {}

  double lo() const { return lo_; }
  double hi() const { return lo_ + h_ * static_cast<double>(d_.size() - 1); }

  double operator()(double x) const {
    double s = (x - lo_) / h_;
    auto i = static_cast<std::ptrdiff_t>(std::floor(s));
    if (i < 0 || i + 1 >= static_cast<std::ptrdiff_t>(d_.size())) {
      if (i == static_cast<std::ptrdiff_t>(d_.size()) - 1 && s - static_cast<double>(i) < 1e-12) return d_.back()[0];
      throw std::out_of_range("HermiteTable: argument outside the table");
    }
    double t = s - static_cast<double>(i), t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    const auto& p = d_[static_cast<std::size_t>(i)];
    const auto& q = d_[static_cast<std::size_t>(i) + 1];
    double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5, h1 = t - 6 * t3 + 8 * t4 - 3 * t5, h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
    double h5 = 10 * t3 - 15 * t4 + 6 * t5, h4 = -4 * t3 + 7 * t4 - 3 * t5, h3 = 0.5 * (t3 - 2 * t4 + t5);
    return p[0] * h0 + h_ * p[1] * h1 + h_ * h_ * p[2] * h2 + q[0] * h5 + h_ * q[1] * h4 + h_ * h_ * q[2] * h3;
  }

private:
  double lo_ = 0, h_ = 1;
  std::vector<std::array<double, 3>> d_;
};

// ---------------------------------------------------------------------------
// Operator coefficients

/// a, b and the coefficients of L^2 v = c4 v'''' + c3 v''' + c2 v'' + c1 v',
///   c4 = a^2, c3 = 2 a a' + 2 a b, c2 = a a'' + 2 a b' + a' b + b^2, c1 = a b'' + b b'.
class OperatorCoefficients {
public:
  enum Field { A, DA, D2A, B, DB, D2B, C4, C3, C2, C1, kFields };

  OperatorCoefficients(const Expr& a, const Expr& b, int grid = 2048) {
    constant_ = a.variables().empty() && b.variables().empty();
    for (const auto& v : a.variables())
      if (v != "x1") throw SpecError("operator coefficient a may only depend on x1");
    for (const auto& v : b.variables())
      if (v != "x1") throw SpecError("operator coefficient b may only depend on x1");
    const double h = kTwoPi / grid;
    // rows per field: value, derivative, second derivative of that field
    std::vector<std::array<std::array<double, 3>, kFields>> raw(static_cast<std::size_t>(grid) + 1);
    for (int i = 0; i <= grid; ++i) {
      double x = h * i;
      auto ja = a.eval<Jet<4>>({{"x1", Jet<4>::variable(x)}});
      auto jb = b.eval<Jet<4>>({{"x1", Jet<4>::variable(x)}});
      // fields as jets so their own derivatives come for free
      auto shift = [](const Jet<4>& j, int k) {
        Jet<2> r;
        for (int m = 0; m <= 2; ++m) {
          double f = 1;
          for (int q = 1; q <= k; ++q) f *= (m + q);
          r.c[static_cast<std::size_t>(m)] = j.c[static_cast<std::size_t>(m + k)] * f;
        }
        return r;
      };
      Jet<2> ga = shift(ja, 0), gda = shift(ja, 1), gd2a = shift(ja, 2);
      Jet<2> gb = shift(jb, 0), gdb = shift(jb, 1), gd2b = shift(jb, 2);
      std::array<Jet<2>, kFields> f{ga,
                                    gda,
                                    gd2a,
                                    gb,
                                    gdb,
                                    gd2b,
                                    ga * ga,
                                    Jet<2>(2.0) * ga * gda + Jet<2>(2.0) * ga * gb,
                                    ga * gd2a + Jet<2>(2.0) * ga * gdb + gda * gb + gb * gb,
                                    ga * gd2b + gb * gdb};
      for (int k = 0; k < kFields; ++k)
        for (int m = 0; m <= 2; ++m) raw[static_cast<std::size_t>(i)][k][m] = f[k].derivative(m);
    }
    for (int k = 0; k < kFields; ++k) {
      std::vector<std::array<double, 3>> col;
      for (const auto& r : raw) col.push_back(r[k]);
      tables_[k] = HermiteTable(0.0, h, std::move(col));
    }
    for (int i = 0; i <= grid; ++i)
      if (raw[static_cast<std::size_t>(i)][A][0] <= 0) throw SpecError("operator coefficient a must be positive on the torus");
    if (std::abs(raw.front()[A][0] - raw.back()[A][0]) > 1e-9 || std::abs(raw.front()[B][0] - raw.back()[B][0]) > 1e-9)
      throw SpecError("operator coefficients must be 2 pi periodic in x1");
  }

  static OperatorCoefficients from_spec(const EquationSpec& spec, int component = 1) {
    const Component& c = spec.components.at(static_cast<std::size_t>(component - 1));
    return OperatorCoefficients(c.a, c.b);
  }

  bool constant() const { return constant_; }

  double operator()(Field f, double x1) const {
    double y = x1 - kTwoPi * std::floor(x1 / kTwoPi);
    return tables_[f](y);
  }
  double a(double x1) const { return (*this)(A, x1); }
  double b(double x1) const { return (*this)(B, x1); }

  /// (L^2 v)(x1) from the derivatives v', v'', v''', v''''.
  double apply_l2(double x1, double d1, double d2, double d3, double d4) const {
    return (*this)(C4, x1) * d4 + (*this)(C3, x1) * d3 + (*this)(C2, x1) * d2 + (*this)(C1, x1) * d1;
  }
  /// (L v)(x1) from v', v''.
  double apply_l(double x1, double d1, double d2) const { return a(x1) * d2 + b(x1) * d1; }

private:
  bool constant_ = false;
  std::array<HermiteTable, kFields> tables_;
};

// ---------------------------------------------------------------------------
// Quartic heat profile

/// Q_m(u) = (1 / 2 pi) int (i l)^m e^{i l u} e^{-l^4} dl, the m-th derivative of
/// the kernel of e^{-d^4} at time 1, by the trapezoid rule on [0, l_max].
class QuarticProfile {
public:
  explicit QuarticProfile(int modes = 64, int max_order = 8, double u_max = 48.0, double du = 1.0 / 64)
      : modes_(modes), max_order_(max_order) {
    if (modes < 8) throw std::invalid_argument("QuarticProfile: at least 8 modes");
    // l^m e^{-l^4} < 1e-17 beyond l_max for every tabulated order
    l_max_ = 3.4;
    const double h = l_max_ / modes_;
    for (int j = 0; j <= modes_; ++j) {
      double l = h * j;
      nodes_.push_back(l);
      weights_.push_back((j == 0 || j == modes_ ? 0.5 : 1.0) * h * std::exp(-std::pow(l, 4)) / std::numbers::pi);
    }
    const int n = static_cast<int>(std::ceil(u_max / du));
    for (int m = 0; m <= max_order_; ++m) {
      std::vector<std::array<double, 3>> col;
      for (int i = 0; i <= n; ++i) {
        double u = du * i;
        col.push_back({direct(m, u), direct(m + 1, u), direct(m + 2, u)});
      }
      tables_.emplace_back(0.0, du, std::move(col));
    }
    u_max_ = du * n;
  }

  int modes() const { return modes_; }
  int max_order() const { return max_order_; }

  /// Trapezoid sum, no table.
  double direct(int m, double u) const {
    double s = 0;
    const bool even = m % 2 == 0;
    const double sign = even ? ((m / 2) % 2 == 0 ? 1.0 : -1.0) : (((m + 1) / 2) % 2 == 0 ? 1.0 : -1.0);
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
      double l = nodes_[j];
      s += weights_[j] * std::pow(l, m) * (even ? std::cos(l * u) : std::sin(l * u));
    }
    return sign * s;
  }

  double operator()(int m, double u) const {
    if (m < 0 || m > max_order_) throw std::out_of_range("QuarticProfile: derivative order not tabulated");
    double au = std::abs(u);
    if (au >= u_max_) return 0.0;
    double v = tables_[static_cast<std::size_t>(m)](au);
    return (u < 0 && m % 2 == 1) ? -v : v;
  }

private:
  int modes_, max_order_;
  double l_max_ = 0, u_max_ = 0;
  std::vector<double> nodes_, weights_;
  std::vector<HermiteTable> tables_;
};

/// Shared profile at the default resolution.
inline const QuarticProfile& quartic_profile() {
  static const QuarticProfile p;
  return p;
}

/// Gaussian heat kernel of d_0^2 and its derivatives in y, orders 0..2.
inline double gaussian(double t, double y, int d = 0) {
  double g = std::exp(-y * y / (4 * t)) / std::sqrt(4 * std::numbers::pi * t);
  if (d == 0) return g;
  if (d == 1) return -y / (2 * t) * g;
  if (d == 2) return (y * y / (4 * t * t) - 1 / (2 * t)) * g;
  throw std::out_of_range("gaussian: derivative order above 2");
}

// ---------------------------------------------------------------------------
// Kernels

/// Rescaled samples of a one-dimensional kernel factor at fixed (t, x1').
struct KernelTable {
  double t = 0, xp = 0, alpha = 0, v_max = 0, dv = 0;
  std::vector<double> values; ///< k~(t, v) at v = -v_max + i dv

  double v(std::size_t i) const { return -v_max + dv * static_cast<double>(i); }
  double prefactor() const { return std::pow(t, -1.25 + alpha); }

  /// Unscaled k(t, x, xp) by cubic interpolation in v; zero outside the window.
  double at(double x) const {
    double s = ((x - xp) / std::pow(t, 0.25) + v_max) / dv;
    auto i = static_cast<std::ptrdiff_t>(std::floor(s));
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    if (i < 1 || i + 2 >= n) return 0.0;
    double r = s - static_cast<double>(i);
    double f0 = values[static_cast<std::size_t>(i - 1)], f1 = values[static_cast<std::size_t>(i)];
    double f2 = values[static_cast<std::size_t>(i + 1)], f3 = values[static_cast<std::size_t>(i + 2)];
    double c = -r * (r - 1) * (r - 2) / 6 * f0 + (r + 1) * (r - 1) * (r - 2) / 2 * f1 - (r + 1) * r * (r - 2) / 2 * f2 +
               (r + 1) * r * (r - 1) / 6 * f3;
    return prefactor() * c;
  }
  double sup() const {
    double m = 0;
    for (double v : values) m = std::max(m, std::abs(v));
    return prefactor() * m;
  }
};

/// Window and resolution of rescaled tables.
struct TableGrid {
  double v_max = 28.0;
  double dv = 0.25;
  std::size_t size() const { return 2 * static_cast<std::size_t>(std::lround(v_max / dv)) + 1; }
};

/// One-dimensional factor k(t, x1, x1') of a kernel in the class S_alpha.
class Kernel {
public:
  virtual ~Kernel() = default;
  virtual double alpha() const = 0;
  /// True when value() is a closed form that can be called anywhere.
  virtual bool analytic() const = 0;
  /// d^dx/dx1^dx k(t, x, xp).
  virtual double value(double t, double x, double xp, int dx = 0) const = 0;
  /// Rescaled samples on the grid; analytic kernels just sample value().
  virtual const KernelTable& table(double t, double xp, int dx = 0) const {
    auto key = std::make_tuple(t, xp, dx);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    KernelTable tb{t, xp, alpha() - 0.25 * dx, grid_.v_max, grid_.dv, {}};
    const double scale = std::pow(t, 1.25 - tb.alpha), st = std::pow(t, 0.25);
    for (std::size_t i = 0; i < grid_.size(); ++i) tb.values.push_back(scale * value(t, xp + st * tb.v(i), xp, dx));
    return cache_.emplace(key, std::move(tb)).first->second;
  }
  void set_grid(TableGrid g) {
    grid_ = g;
    cache_.clear();
  }
  const TableGrid& grid() const { return grid_; }

protected:
  TableGrid grid_;
  mutable std::map<std::tuple<double, double, int>, KernelTable> cache_;
};

/// Frozen-coefficient kernel K_1: the heat kernel of d_0^2 - a(x1')^2 d_1^4.
class FrozenKernel final : public Kernel {
public:
  FrozenKernel(const OperatorCoefficients& c, const QuarticProfile& q = quartic_profile()) : c_(&c), q_(&q) {}
  double alpha() const override { return 1.0; }
  bool analytic() const override { return true; }
  double value(double t, double x, double xp, int dx = 0) const override {
    if (t <= 0) throw std::domain_error("FrozenKernel: t must be positive");
    double w = std::pow(t, 0.25) * std::sqrt(c_->a(xp));
    return std::pow(w, -1 - dx) * (*q_)(dx, (x - xp) / w);
  }
  /// Leading term K_1(1, z, x') and its z-derivatives, two-dimensional.
  double leading(double z0, double z1, double xp, int d0 = 0, int d1 = 0) const {
    double w = std::sqrt(c_->a(xp));
    return gaussian(1.0, z0, d0) * std::pow(w, -1 - d1) * (*q_)(d1, z1 / w);
  }
  const OperatorCoefficients& coefficients() const { return *c_; }

private:
  const OperatorCoefficients* c_;
  const QuarticProfile* q_;
};

/// E_1 = (d_t - G) K_1 = (L^2 - a(x1')^2 d_1^4) K_1, class 1/4.
class ErrorKernel final : public Kernel {
public:
  ErrorKernel(const OperatorCoefficients& c, const QuarticProfile& q = quartic_profile()) : c_(&c), q_(&q) {}
  double alpha() const override { return 0.25; }
  bool analytic() const override { return true; }
  double value(double t, double x, double xp, int dx = 0) const override {
    if (t <= 0) throw std::domain_error("ErrorKernel: t must be positive");
    if (dx != 0) throw std::invalid_argument("ErrorKernel: derivatives are not provided");
    const double ap = c_->a(xp);
    const double w = std::pow(t, 0.25) * std::sqrt(ap), u = (x - xp) / w;
    const double iw = 1.0 / w, iw2 = iw * iw, iw3 = iw2 * iw, iw4 = iw2 * iw2, iw5 = iw4 * iw;
    using F = OperatorCoefficients;
    const auto& c = *c_;
    return (c(F::C4, x) - ap * ap) * iw5 * (*q_)(4, u) + c(F::C3, x) * iw4 * (*q_)(3, u) + c(F::C2, x) * iw3 * (*q_)(2, u) +
           c(F::C1, x) * iw2 * (*q_)(1, u);
  }
  /// Leading term at class 1/4: 2 a a'(x1') z A^(-5/2) Q_4 + c3(x1') A^(-2) Q_3 with A = a(x1'), u = z / sqrt(A).
  double leading_quarter(double z1, double xp) const {
    using F = OperatorCoefficients;
    const double ap = c_->a(xp), w = std::sqrt(ap), u = z1 / w;
    return 2 * ap * (*c_)(F::DA, xp) * z1 * std::pow(w, -5) * (*q_)(4, u) + (*c_)(F::C3, xp) * std::pow(w, -4) * (*q_)(3, u);
  }

private:
  const OperatorCoefficients* c_;
  const QuarticProfile* q_;
};

/// Quadrature parameters of the spacetime convolution.
struct ConvolutionRule {
  int time_nodes = 12; ///< Gauss-Legendre nodes per half of [0, 1] in a = s/t
};

/// (A * B)(t, x, x') = int_0^t int A(t-s, x, w) B(s, w, x') dw ds, class
/// alpha_A + alpha_B. The left factor must be analytic. On a in [0, 1/2] the
/// substitution s = t r^4, w = x' + s^(1/4) v resolves B; on [1/2, 1] the
/// substitution t - s = t r^4, w = x + (t-s)^(1/4) v resolves A.
class Convolution final : public Kernel {
public:
  Convolution(std::shared_ptr<const Kernel> A, std::shared_ptr<const Kernel> B, ConvolutionRule rule = {})
      : A_(std::move(A)), B_(std::move(B)), rule_(rule) {
    if (!A_->analytic()) throw std::invalid_argument("Convolution: the left factor must be analytic");
    if (A_->alpha() <= 0 || B_->alpha() <= 0) throw std::invalid_argument("Convolution: classes must be positive");
    grid_ = B_->grid();
    r_ = gauss_legendre(rule_.time_nodes, 0.0, std::pow(0.5, 0.25));
  }
  double alpha() const override { return A_->alpha() + B_->alpha(); }
  bool analytic() const override { return false; }

  double value(double t, double x, double xp, int dx = 0) const override { return table(t, xp, dx).at(x); }

  const KernelTable& table(double t, double xp, int dx = 0) const override {
    if (t <= 0) throw std::domain_error("Convolution: t must be positive");
    auto key = std::make_tuple(t, xp, dx);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;

    const std::size_t nv = grid_.size();
    KernelTable out{t, xp, alpha() - 0.25 * dx, grid_.v_max, grid_.dv, std::vector<double>(nv, 0.0)};
    const double st = std::pow(t, 0.25), scale = std::pow(t, 1.25 - out.alpha);
    std::vector<double> acc(nv, 0.0);

    // a in [0, 1/2]: w = xp + s^(1/4) v on the table grid of B
    for (std::size_t q = 0; q < r_.size(); ++q) {
      const double r = r_.x[q], s = t * std::pow(r, 4), ss = std::pow(s, 0.25);
      const double jac = r_.w[q] * 4 * t * r * r * r * ss * grid_.dv;
      std::vector<double> bw(nv);
      if (B_->analytic())
        for (std::size_t j = 0; j < nv; ++j) bw[j] = B_->value(s, xp + ss * (-grid_.v_max + grid_.dv * j), xp);
      else {
        const KernelTable& tb = B_->table(s, xp);
        for (std::size_t j = 0; j < nv; ++j) bw[j] = tb.prefactor() * tb.values[j];
      }
      for (std::size_t i = 0; i < nv; ++i) {
        const double x = xp + st * out.v(i);
        double sum = 0;
        for (std::size_t j = 0; j < nv; ++j) {
          if (bw[j] == 0.0) continue;
          sum += A_->value(t - s, x, xp + ss * (-grid_.v_max + grid_.dv * j), dx) * bw[j];
        }
        acc[i] += jac * sum;
      }
    }
    // a in [1/2, 1]: w = x + (t-s)^(1/4) v
    for (std::size_t q = 0; q < r_.size(); ++q) {
      const double r = r_.x[q], tau = t * std::pow(r, 4), s = t - tau, st2 = std::pow(tau, 0.25);
      const double jac = r_.w[q] * 4 * t * r * r * r * st2 * grid_.dv;
      const KernelTable* tb = B_->analytic() ? nullptr : &B_->table(s, xp);
      for (std::size_t i = 0; i < nv; ++i) {
        const double x = xp + st * out.v(i);
        double sum = 0;
        for (std::size_t j = 0; j < nv; ++j) {
          const double w = x + st2 * (-grid_.v_max + grid_.dv * j);
          const double bv = tb ? tb->at(w) : B_->value(s, w, xp);
          if (bv == 0.0) continue;
          sum += A_->value(tau, x, w, dx) * bv;
        }
        acc[i] += jac * sum;
      }
    }
    for (std::size_t i = 0; i < nv; ++i) out.values[i] = scale * acc[i];
    return cache_.emplace(key, std::move(out)).first->second;
  }

  const Kernel& left() const { return *A_; }
  const Kernel& right() const { return *B_; }

private:
  std::shared_ptr<const Kernel> A_, B_;
  ConvolutionRule rule_;
  Rule r_;
};

/// Partial sums K^(N) = K_1 + sum_{n=1}^N (-1)^n K_1 * E_1^{*n}, with
/// E_1^{*n} = E_1 * E_1^{*(n-1)}. The residual (d_t - G) K^(N) equals
/// (-1)^N E_1^{*(N+1)}.
class VolterraSeries {
public:
  VolterraSeries(const OperatorCoefficients& c, int n_terms, TableGrid grid = {}, ConvolutionRule rule = {},
                 const QuarticProfile& q = quartic_profile())
      : n_(n_terms) {
    if (n_terms < 0) throw std::invalid_argument("VolterraSeries: n_terms >= 0");
    auto k1 = std::make_shared<FrozenKernel>(c, q);
    auto e1 = std::make_shared<ErrorKernel>(c, q);
    k1->set_grid(grid);
    e1->set_grid(grid);
    k1_ = k1;
    e1_ = e1;
    powers_.push_back(e1);
    for (int n = 2; n <= n_terms + 1; ++n) powers_.push_back(std::make_shared<Convolution>(e1_, powers_.back(), rule));
    for (int n = 1; n <= n_terms; ++n) terms_.push_back(std::make_shared<Convolution>(k1_, powers_[n - 1], rule));
  }

  int n_terms() const { return n_; }
  const Kernel& k1() const { return *k1_; }
  const Kernel& e1() const { return *e1_; }
  /// E_1^{*n}, n = 1..N+1.
  const Kernel& error_power(int n) const { return *powers_.at(static_cast<std::size_t>(n - 1)); }
  /// K_1 * E_1^{*n}, n = 1..N.
  const Kernel& term(int n) const { return *terms_.at(static_cast<std::size_t>(n - 1)); }

  /// k^(N)(t, x, xp) on the rescaled grid of K_1.
  std::vector<double> profile(double t, double xp, int dx = 0) const {
    const KernelTable& base = k1_->table(t, xp, dx);
    std::vector<double> out(base.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = base.prefactor() * base.values[i];
    double sign = -1;
    for (const auto& term : terms_) {
      const KernelTable& tb = term->table(t, xp, dx);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * tb.prefactor() * tb.values[i];
      sign = -sign;
    }
    return out;
  }
  double value(double t, double x, double xp, int dx = 0) const {
    double v = k1_->value(t, x, xp, dx), sign = -1;
    for (const auto& term : terms_) {
      v += sign * term->value(t, x, xp, dx);
      sign = -sign;
    }
    return v;
  }
  /// Periodized in x1 by image summation.
  double torus_value(double t, double x, double xp, int images = 3) const {
    double v = 0;
    for (int m = -images; m <= images; ++m) v += value(t, x + kTwoPi * m, xp);
    return v;
  }

private:
  int n_;
  std::shared_ptr<const Kernel> k1_, e1_;
  std::vector<std::shared_ptr<const Kernel>> powers_, terms_;
};

// ---------------------------------------------------------------------------
// Leading terms and scaling checks

/// max over the z-grid of |(-3/4 - z.d_z/4 - G^{x'}_z) K_1(1, z, x')|,
/// z.d_z = 2 z0 d_z0 + z1 d_z1, G^{x'}_z = d_z0^2 - a(x1')^2 d_z1^4.
inline double null_leading_residual(const FrozenKernel& k1, double xp, int nz = 129, double z0_max = 8.0, double z1_max = 12.0) {
  const double ap = k1.coefficients().a(xp);
  double worst = 0;
  for (int i = 0; i < nz; ++i)
    for (int j = 0; j < nz; ++j) {
      double z0 = -z0_max + 2 * z0_max * i / (nz - 1), z1 = -z1_max + 2 * z1_max * j / (nz - 1);
      double K = k1.leading(z0, z1, xp);
      double euler = 2 * z0 * k1.leading(z0, z1, xp, 1, 0) + z1 * k1.leading(z0, z1, xp, 0, 1);
      double G = k1.leading(z0, z1, xp, 2, 0) - ap * ap * k1.leading(z0, z1, xp, 0, 4);
      worst = std::max(worst, std::abs(-0.75 * K - 0.25 * euler - G));
    }
  return worst;
}

/// Leading term of a one-dimensional factor by extrapolating its rescaled
/// profile to t = 0, polynomial of degree 2 in s = t^(1/4).
inline std::vector<double> extrapolate_leading(const Kernel& k, double xp, double s0 = 0.1) {
  std::array<double, 3> s{s0, 2 * s0, 3 * s0};
  std::array<const KernelTable*, 3> tb{};
  for (int i = 0; i < 3; ++i) tb[i] = &k.table(std::pow(s[i], 4), xp);
  std::vector<double> out(tb[0]->values.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    // Lagrange at 0 through (s_i, y_i)
    double v = 0;
    for (int i = 0; i < 3; ++i) {
      double l = 1;
      for (int m = 0; m < 3; ++m)
        if (m != i) l *= (0 - s[m]) / (s[i] - s[m]);
      v += l * tb[i]->values[j];
    }
    out[j] = v;
  }
  return out;
}

/// Leading term of A * B from those of A (class alpha) and B (class beta),
/// one-dimensional factors on the rescaled grid:
///   int_0^1 (1-a)^(-5/4+alpha) a^(-5/4+beta) int A((z - v)(1-a)^(-1/4)) B(v a^(-1/4)) dv da.
inline std::vector<double> leading_convolve(const std::function<double(double)>& A, double alpha,
                                            const std::function<double(double)>& B, double beta, const TableGrid& grid,
                                            int time_nodes = 16) {
  if (alpha <= 0 || beta <= 0) throw std::invalid_argument("leading_convolve: classes must be positive");
  const Rule r = gauss_legendre(time_nodes, 0.0, std::pow(0.5, 0.25));
  const std::size_t nv = grid.size();
  std::vector<double> out(nv, 0.0);
  auto node = [&](std::size_t j) { return -grid.v_max + grid.dv * static_cast<double>(j); };
  for (std::size_t q = 0; q < r.size(); ++q) {
    // a = r^4 near 0, v = a^(1/4) v'
    const double rr = r.x[q], a = std::pow(rr, 4);
    const double wa = r.w[q] * 4 * std::pow(1 - a, -1.25 + alpha) * std::pow(rr, 4 * beta - 1) * grid.dv;
    // 1 - a = r^4 near 1, z - v = (1-a)^(1/4) v'
    const double b = 1 - a;
    const double wb = r.w[q] * 4 * std::pow(b, -1.25 + beta) * std::pow(rr, 4 * alpha - 1) * grid.dv;
    for (std::size_t i = 0; i < nv; ++i) {
      const double z = node(i);
      double s1 = 0, s2 = 0;
      for (std::size_t j = 0; j < nv; ++j) {
        const double vp = node(j);
        s1 += A((z - rr * vp) * std::pow(1 - a, -0.25)) * B(vp);
        s2 += A(vp) * B((z - rr * vp) * std::pow(b, -0.25));
      }
      out[i] += wa * s1 + wb * s2;
    }
  }
  return out;
}

/// int |d_x1^n K(t, x, x')| d(x, x')^c dx over R^2 for K = g k with k given by
/// rescaled samples k(t, x' + t^(1/4) v) on a uniform v-grid of spacing dv.
inline double scaling_integral(double t, const std::vector<double>& k_samples, double v_max, double dv, double c) {
  // Gaussian moments of |y0|^(1/2 j) for the binomial expansion when c is an integer
  const double st = std::pow(t, 0.25);
  auto gaussian_moment = [&](double p) {
    // E|Y|^p for Y ~ N(0, 2t)
    return std::pow(2 * t, p / 2) * std::pow(2.0, p / 2) * std::tgamma((p + 1) / 2) / std::sqrt(std::numbers::pi);
  };
  const bool integer = std::abs(c - std::round(c)) < 1e-12;
  Rule y0;
  if (!integer) y0 = composite_legendre({0.0, 1.0, 3.0, 6.0, 12.0}, 24);
  double s = 0;
  for (std::size_t i = 0; i < k_samples.size(); ++i) {
    const double y1 = std::abs((-v_max + dv * static_cast<double>(i)) * st);
    double weight;
    if (c == 0)
      weight = 1;
    else if (integer) {
      const int ci = static_cast<int>(std::lround(c));
      weight = 0;
      double binom = 1;
      for (int j = 0; j <= ci; ++j) {
        weight += binom * gaussian_moment(0.5 * j) * std::pow(y1, ci - j);
        binom = binom * (ci - j) / (j + 1);
      }
    } else {
      // y0 = sqrt(2t) zeta, symmetric
      const double sig = std::sqrt(2 * t);
      weight = 0;
      for (std::size_t q = 0; q < y0.size(); ++q) {
        const double yy = sig * y0.x[q];
        weight += 2 * y0.w[q] * std::exp(-0.5 * y0.x[q] * y0.x[q]) / std::sqrt(2 * std::numbers::pi) *
                  std::pow(std::sqrt(yy) + y1, c);
      }
    }
    s += std::abs(k_samples[i]) * weight;
  }
  return s * dv * st;
}

struct ScalingReport {
  int n1 = 0;
  double c = 0, expected = 0;
  SlopeFit fit;
  bool pass = false;
};

/// Fits the exponent of int |d_x1^n K| d^c dx against t; expected (c - n)/4.
inline ScalingReport verify_scaling_estimate(const VolterraSeries& K, int n1, double c, double xp,
                                             const std::vector<double>& times, double tol = 0.1) {
  ScalingReport rep;
  rep.n1 = n1;
  rep.c = c;
  rep.expected = (c - n1) / 4.0;
  std::vector<double> vals;
  const TableGrid& g = K.k1().grid();
  for (double t : times) vals.push_back(scaling_integral(t, K.profile(t, xp, n1), g.v_max, g.dv, c));
  rep.fit = fit_loglog(times, vals);
  rep.pass = std::abs(rep.fit.slope - rep.expected) <= tol;
  return rep;
}

/// sup over x of the two-dimensional kernel g k at (t, x'): g(t, 0) sup |k|.
inline double sup_norm(const Kernel& k, double t, double xp) { return gaussian(t, 0.0) * k.table(t, xp).sup(); }

/// Fitted exponent of sup-norms against t.
inline SlopeFit sup_slope(const Kernel& k, double xp, const std::vector<double>& times) {
  std::vector<double> vals;
  for (double t : times) vals.push_back(sup_norm(k, t, xp));
  return fit_loglog(times, vals);
}

/// True iff the fitted sup-norm exponent is within tol of -7/4 + alpha.
inline bool check_class(const Kernel& k, double alpha, double xp, const std::vector<double>& times, double tol = 0.1) {
  return std::abs(sup_slope(k, xp, times).slope - (-1.75 + alpha)) <= tol;
}

// ---------------------------------------------------------------------------
// Spectral reference on the torus

/// Fourier collocation of L on n equispaced points of the torus.
class SpectralOperator {
public:
  SpectralOperator(const OperatorCoefficients& c, int n) : n_(n) {
    if (n < 4 || n % 2) throw std::invalid_argument("SpectralOperator: n must be even and >= 4");
    h_ = kTwoPi / n;
    D1_ = Eigen::MatrixXd::Zero(n, n);
    D2_ = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        if (j == k) {
          D2_(j, k) = -std::numbers::pi * std::numbers::pi / (3 * h_ * h_) - 1.0 / 6;
          continue;
        }
        double sgn = ((j - k) % 2 == 0) ? 1.0 : -1.0, half = 0.5 * (j - k) * h_;
        D1_(j, k) = 0.5 * sgn / std::tan(half);
        D2_(j, k) = -0.5 * sgn / (std::sin(half) * std::sin(half));
      }
    L_ = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
      double x = h_ * j;
      L_.row(j) = c.a(x) * D2_.row(j) + c.b(x) * D1_.row(j);
    }
  }
  int size() const { return n_; }
  double step() const { return h_; }
  double node(int j) const { return h_ * j; }
  const Eigen::MatrixXd& d1() const { return D1_; }
  const Eigen::MatrixXd& d2() const { return D2_; }
  const Eigen::MatrixXd& l() const { return L_; }

  /// e^{-t L^2}; column j divided by h is the heat kernel k(t, ., x_j).
  Eigen::MatrixXd semigroup(double t) const {
    Eigen::MatrixXd M = -t * (L_ * L_);
    return M.exp();
  }

private:
  int n_;
  double h_ = 0;
  Eigen::MatrixXd D1_, D2_, L_;
};

} // namespace locrs
