#pragma once

// Smooth admissible models on a spacetime grid: the renormalized maps Pi^R
// and hat Pi^R, their recentered versions at base points, the characters
// g_x, the reexpansion maps and the reconstruction of modelled
// distributions; plus a Picard solver for the renormalized equation.

#include <complex>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "locrs/algebra.hpp"
#include "locrs/grid.hpp"
#include "locrs/parametrix.hpp"
#include "locrs/quadrature.hpp"
#include "locrs/renorm.hpp"

namespace locrs {

// ---------------------------------------------------------------------------
// Green kernel

/// K = -int_0^{t_max} (d_0 + L) e^{t G} dt with G = d_0^2 - L^2, so that
/// (d_0 - L) K = delta - e^{t_max G}. The x1 factor is the Fourier
/// collocation semigroup, diagonalized once; the x0 factor is integrated
/// exactly over the time cells of the grid.
class GreenKernel {
public:
  using cd = std::complex<double>;

  GreenKernel(const OperatorCoefficients& c, const SpaceTimeGrid& g, double t_max = 1.0) : grid_(g), t_max_(t_max) {
    g.validate();
    SpectralOperator S(c, g.nx);
    L_ = S.l();
    D1_ = S.d1();
    Eigen::EigenSolver<Eigen::MatrixXd> es(L_);
    if (es.info() != Eigen::Success) throw std::runtime_error("GreenKernel: eigen decomposition failed");
    V_ = es.eigenvectors();
    lambda_ = es.eigenvalues();
    Vinv_ = V_.inverse();
    if (!Vinv_.allFinite()) throw std::runtime_error("GreenKernel: ill-conditioned eigenbasis");
    // geometric panels resolve e^{-t lambda^2} down to t ~ 1e-13
    std::vector<double> br{0.0};
    for (double t = 1e-13; t < t_max; t *= 2) br.push_back(t);
    br.push_back(t_max);
    trule_ = composite_legendre(br, 6);
  }

  const SpaceTimeGrid& grid() const { return grid_; }
  double t_max() const { return t_max_; }
  const Eigen::MatrixXd& operator_matrix() const { return L_; }

  /// D^a K * f on the grid; f vanishes outside the grid's time window.
  Eigen::MatrixXd convolve(const Eigen::MatrixXd& f, MultiIndex a) const {
    const auto& c = coefficients(a.k0);
    const int nt = grid_.nt, nx = grid_.nx;
    Eigen::MatrixXcd F = f.cast<cd>() * Vinv_.transpose();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(nt, nx);
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < nt; ++j) out.row(i).array() += c[static_cast<std::size_t>(i - j + nt - 1)].array() * F.row(j).array();
    return (out * left(a.k1).transpose()).real();
  }

  /// (D^a K * f)(x0_i, x1_j).
  double convolve_at(const Eigen::MatrixXd& f, MultiIndex a, int i, int j) const {
    const auto& c = coefficients(a.k0);
    const int nt = grid_.nt;
    Eigen::RowVectorXcd acc = Eigen::RowVectorXcd::Zero(grid_.nx);
    for (int s = 0; s < nt; ++s) {
      Eigen::RowVectorXcd fs = f.row(s).cast<cd>() * Vinv_.transpose();
      acc.array() += c[static_cast<std::size_t>(i - s + nt - 1)].array() * fs.array();
    }
    return (acc * left(a.k1).row(j).transpose()).real()(0);
  }

  /// Pointwise kernel K(x, x') for x1, x1' on the collocation nodes, used to
  /// compare with closed forms.
  double value(double y0, int j, int jp) const {
    Eigen::VectorXcd w = Eigen::VectorXcd::Zero(grid_.nx);
    for (std::size_t q = 0; q < trule_.size(); ++q) {
      const double t = trule_.x[q];
      const double g0 = gaussian(t, y0), g1 = gaussian(t, y0, 1);
      for (int m = 0; m < grid_.nx; ++m)
        w(m) -= trule_.w[q] * (g1 + lambda_(m) * g0) * std::exp(-t * lambda_(m) * lambda_(m));
    }
    cd v = 0;
    for (int m = 0; m < grid_.nx; ++m) v += V_(j, m) * w(m) * Vinv_(m, jp);
    return v.real() / grid_.dx();
  }

  /// e^{t G} f with the x0 heat kernel integrated over cells; f vanishes
  /// outside the time window.
  Eigen::MatrixXd heat(const Eigen::MatrixXd& f, double t) const {
    const int nt = grid_.nt, nx = grid_.nx;
    Eigen::MatrixXcd F = f.cast<cd>() * Vinv_.transpose();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(nt, nx);
    Eigen::RowVectorXcd decay(nx);
    for (int m = 0; m < nx; ++m) decay(m) = std::exp(-t * lambda_(m) * lambda_(m));
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < nt; ++j) out.row(i).array() += cell_integral(t, i - j, 0) * decay.array() * F.row(j).array();
    return (out * V_.transpose()).real();
  }

private:
  /// int over the cell of y0 = (delta -+ 1/2) dt of d^m g(t, y0).
  double cell_integral(double t, int delta, int m) const {
    const double dt = grid_.dt(), yl = (delta - 0.5) * dt, yr = (delta + 0.5) * dt;
    if (m == 0) return 0.5 * (std::erf(yr / (2 * std::sqrt(t))) - std::erf(yl / (2 * std::sqrt(t))));
    return gaussian(t, yr, m - 1) - gaussian(t, yl, m - 1);
  }

  /// Per time offset, the multipliers of the eigenmodes for d_0^k0 K.
  const std::vector<Eigen::RowVectorXcd>& coefficients(int k0) const {
    if (k0 < 0 || k0 > 2) throw std::out_of_range("GreenKernel: time derivative order above 2");
    auto it = coeff_.find(k0);
    if (it != coeff_.end()) return it->second;
    const int nt = grid_.nt, nx = grid_.nx;
    std::vector<Eigen::RowVectorXcd> c(static_cast<std::size_t>(2 * nt - 1), Eigen::RowVectorXcd::Zero(nx));
    std::vector<cd> mu(static_cast<std::size_t>(nx));
    for (int m = 0; m < nx; ++m) mu[static_cast<std::size_t>(m)] = lambda_(m) * lambda_(m);
    for (std::size_t q = 0; q < trule_.size(); ++q) {
      const double t = trule_.x[q], w = trule_.w[q];
      std::vector<cd> e(static_cast<std::size_t>(nx));
      for (int m = 0; m < nx; ++m) e[static_cast<std::size_t>(m)] = w * std::exp(-t * mu[static_cast<std::size_t>(m)]);
      for (int d = -(nt - 1); d <= nt - 1; ++d) {
        const double a = cell_integral(t, d, k0 + 1), b = cell_integral(t, d, k0);
        if (a == 0.0 && b == 0.0) continue;
        auto& row = c[static_cast<std::size_t>(d + nt - 1)];
        for (int m = 0; m < nx; ++m) row(m) -= (a + lambda_(m) * b) * e[static_cast<std::size_t>(m)];
      }
    }
    return coeff_.emplace(k0, std::move(c)).first->second;
  }

  /// D_1^k V, mapping eigen-coordinates to x1-derivatives on the nodes.
  const Eigen::MatrixXcd& left(int k1) const {
    auto it = left_.find(k1);
    if (it != left_.end()) return it->second;
    Eigen::MatrixXcd W = V_;
    for (int k = 0; k < k1; ++k) W = D1_.cast<cd>() * W;
    return left_.emplace(k1, std::move(W)).first->second;
  }

  SpaceTimeGrid grid_;
  double t_max_;
  Eigen::MatrixXd L_, D1_;
  Eigen::MatrixXcd V_, Vinv_;
  Eigen::VectorXcd lambda_;
  Rule trule_;
  mutable std::map<int, std::vector<Eigen::RowVectorXcd>> coeff_;
  mutable std::map<int, Eigen::MatrixXcd> left_;
};

// ---------------------------------------------------------------------------
// Models

/// A grid point used as a base point. Polynomials live in the chart
/// x1 in [0, 2 pi), so base points should stay away from its seam.
struct BasePoint {
  int i = 0, j = 0;
  double x0 = 0, x1 = 0;
  friend auto operator<=>(const BasePoint&, const BasePoint&) = default;
};

/// The renormalized model of a smooth noise for the preparation map
/// R(y) = (l(y) (x) Id) delta_r, or R = Id when no character is given.
class Model {
public:
  Model(const EquationSpec& spec, const SpaceTimeGrid& g, std::vector<GridFunction> noises,
        std::optional<Character> ell = std::nullopt, double t_max = 1.0)
      : spec_(spec), grid_(g), h_(spec.degrees()), noises_(std::move(noises)), ell_(std::move(ell)) {
    g.validate();
    if (static_cast<int>(noises_.size()) != spec.n0()) throw SpecError("model: expected one noise sample per noise");
    for (const auto& n : noises_)
      if (n.values.rows() != g.nt || n.values.cols() != g.nx) throw SpecError("model: noise grid mismatch");
    for (int s = 1; s <= spec.k0(); ++s) {
      coeffs_.push_back(std::make_unique<OperatorCoefficients>(OperatorCoefficients::from_spec(spec, s)));
      green_.push_back(std::make_unique<GreenKernel>(*coeffs_.back(), g, t_max));
    }
    if (ell_) {
      ell_->validate(spec.degrees());
      for (const auto& [t, v] : ell_->values()) ell_grid_[t] = GridFunction::sample(g, [&](double a, double b) { return v.at(a, b); }).values;
    }
  }

  const SpaceTimeGrid& grid() const { return grid_; }
  const EquationSpec& spec() const { return spec_; }
  const HopfStructure& hopf() const { return h_; }
  const GreenKernel& green(int sort) const { return *green_.at(static_cast<std::size_t>(sort - 1)); }
  bool renormalized() const { return ell_.has_value(); }

  BasePoint base(int i, int j) const { return {i, j, grid_.x0(i), grid_.x1(j)}; }

  /// Pi^R tau (base = nullopt) or Pi^R_x tau on the grid.
  const Eigen::MatrixXd& pi(const DecoratedTree& tau, std::optional<BasePoint> x = std::nullopt) const {
    auto key = std::make_pair(tau, x);
    if (auto it = pi_.find(key); it != pi_.end()) return it->second;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(grid_.nt, grid_.nx);
    for (const auto& [k, c] : h_.delta_r(tau).terms()) {
      const auto& [sigma, rest] = k;
      const Eigen::MatrixXd& p = pi_hat(rest, x);
      if (sigma.is_unit())
        out += c.to_double() * p;
      else if (auto e = ell_grid_.find(sigma); e != ell_grid_.end())
        out += c.to_double() * e->second.cwiseProduct(p);
    }
    return pi_.emplace(key, std::move(out)).first->second;
  }

  /// hat Pi^R tau or hat Pi^R_x tau on the grid.
  const Eigen::MatrixXd& pi_hat(const DecoratedTree& tau, std::optional<BasePoint> x = std::nullopt) const {
    auto key = std::make_pair(tau, x);
    if (auto it = pi_hat_.find(key); it != pi_hat_.end()) return it->second;
    Eigen::MatrixXd out = root_factor(tau.root(), x);
    for (const auto& b : tau.children()) out = out.cwiseProduct(planted(b.edge, b.tree, x));
    return pi_hat_.emplace(key, std::move(out)).first->second;
  }

  /// Pi_x applied to a linear combination, evaluated at the grid point y.
  double pi_at(const LinComb<double>& v, const BasePoint& x, int i, int j) const {
    double s = 0;
    for (const auto& [t, c] : v) s += c * pi(t, x)(i, j);
    return s;
  }

  /// g_x^{-1} on T+, multiplicative: X -> -x and, matching the single Taylor
  /// sum of the coaction,
  ///   I+_a tau -> -sum_{|k|_s < deg I_a tau} (-x)^k / k! (D^{a+k} K * Pi_x tau)(x).
  double g_inverse(const DecoratedTree& plus, const BasePoint& x) const {
    if (!h_.is_positive_element(plus)) throw std::invalid_argument("g_inverse: not an element of T+: " + to_string(plus));
    double v = std::pow(-x.x0, plus.root().poly.k0) * std::pow(-x.x1, plus.root().poly.k1);
    for (const auto& b : plus.children()) {
      const Eigen::MatrixXd& f = pi(b.tree, x);
      double s = 0;
      for (MultiIndex k : multi_indices_below(h_.degree(DecoratedTree::planted(b.edge, b.tree))))
        s += std::pow(-x.x0, k.k0) * std::pow(-x.x1, k.k1) / factorial(k).to_double() *
             green(b.edge.sort).convolve_at(f, b.edge.deriv + k, x.i, x.j);
      v *= -s;
    }
    return v;
  }

  /// g_yx = (g_x^{-1} S+ (x) g_y^{-1}) Delta+, so that Pi_y = Pi_x hat g_yx.
  double g_yx(const DecoratedTree& plus, const BasePoint& y, const BasePoint& x) const {
    double s = 0;
    for (const auto& [k, c] : h_.coproduct_plus(plus).terms()) {
      double left = 0;
      for (const auto& [t, d] : h_.antipode_plus(k.first)) left += d.to_double() * g_inverse(t, x);
      s += c.to_double() * left * g_inverse(k.second, y);
    }
    return s;
  }

  /// hat g_yx tau = (Id (x) g_yx) Delta tau.
  LinComb<double> reexpand(const DecoratedTree& tau, const BasePoint& y, const BasePoint& x) const {
    LinComb<double> out;
    for (const auto& [k, c] : h_.coproduct(tau).terms()) out.add(k.first, c.to_double() * g_yx(k.second, y, x));
    return out;
  }

  /// Largest coefficient of
  ///   hat g_yx(I_a tau) - I_a(hat g_yx tau)
  ///     + sum_{|l|_s < deg I_a tau} (X + x - y)^l / l! Pi_x(I_{a+l} hat g_yx tau)(y).
  /// K does not annihilate polynomials, so polynomial parts of hat g_yx tau
  /// enter the sum through D^{a+l} K * Pi_x X^k rather than as zero.
  double recursive_identity_residual(EdgeLabel a, const DecoratedTree& tau, const BasePoint& y, const BasePoint& x) const {
    const DecoratedTree planted_tau = DecoratedTree::planted(a, tau);
    LinComb<double> diff = reexpand(planted_tau, y, x);
    const LinComb<double> gt = reexpand(tau, y, x);
    for (const auto& [t, c] : gt)
      if (!t.is_polynomial()) diff.add(DecoratedTree::planted(a, t), -c);
    const double d0 = x.x0 - y.x0, d1 = x.x1 - y.x1;
    for (MultiIndex l : multi_indices_below(h_.degree(planted_tau))) {
      double p = 0;
      for (const auto& [t, c] : gt) {
        const EdgeLabel b{a.sort, a.deriv + l};
        p += c * (t.is_polynomial() ? taylor_remainder(b, t, x)(y.i, y.j) : pi(DecoratedTree::planted(b, t), x)(y.i, y.j));
      }
      p /= factorial(l).to_double();
      for (MultiIndex q : sub_indices(l)) {
        double w = binomial(l, q).to_double() * std::pow(d0, l.k0 - q.k0) * std::pow(d1, l.k1 - q.k1);
        diff.add(DecoratedTree::poly(q), w * p);
      }
    }
    double worst = 0;
    for (const auto& [t, c] : diff) worst = std::max(worst, std::abs(c));
    return worst;
  }

  /// Value of hat Pi_x sigma at x itself. It is multiplicative: 1 on the
  /// unit, xi_l(x) on a noise, 0 on X^k with k != 0 and on planted trees of
  /// positive degree; planted trees of non-positive degree are convolved.
  double diagonal_value(const DecoratedTree& sigma, const BasePoint& x) const {
    if (!sigma.root().poly.is_zero()) return 0.0;
    double v = sigma.root().noise == 0 ? 1.0 : noises_.at(static_cast<std::size_t>(sigma.root().noise - 1)).values(x.i, x.j);
    for (const auto& b : sigma.children()) {
      if (v == 0.0) break;
      if (h_.degree(DecoratedTree::planted(b.edge, b.tree)) > Rational(0)) return 0.0;
      v *= green(b.edge.sort).convolve_at(pi(b.tree, x), b.edge.deriv, x.i, x.j);
    }
    return v;
  }

  /// (R^M v)(x) = hat Pi_x(R(x) v(x))(x) for v given per grid point.
  Eigen::MatrixXd reconstruct(const std::function<LinComb<double>(int, int)>& v) const {
    Eigen::MatrixXd out(grid_.nt, grid_.nx);
    for (int i = 0; i < grid_.nt; ++i)
      for (int j = 0; j < grid_.nx; ++j) {
        const BasePoint x = base(i, j);
        double s = 0;
        for (const auto& [tau, c] : v(i, j)) s += c * prepared_diagonal(tau, x);
        out(i, j) = s;
      }
    return out;
  }

  /// hat Pi_x(R(x) tau)(x).
  double prepared_diagonal(const DecoratedTree& tau, const BasePoint& x) const {
    double s = 0;
    for (const auto& [k, c] : h_.delta_r(tau).terms()) {
      double w = character_at(k.first, x);
      if (w != 0.0) s += c.to_double() * w * diagonal_value(k.second, x);
    }
    return s;
  }

  /// l(x, sigma), 1 on the unit.
  double character_at(const DecoratedTree& sigma, const BasePoint& x) const {
    if (sigma.is_unit()) return 1.0;
    auto e = ell_grid_.find(sigma);
    return e == ell_grid_.end() ? 0.0 : e->second(x.i, x.j);
  }

  void clear_cache() const {
    pi_.clear();
    pi_hat_.clear();
  }

private:
  Eigen::MatrixXd root_factor(NodeDeco r, const std::optional<BasePoint>& x) const {
    Eigen::MatrixXd out(grid_.nt, grid_.nx);
    for (int i = 0; i < grid_.nt; ++i)
      for (int j = 0; j < grid_.nx; ++j) {
        double d0 = grid_.x0(i), d1 = grid_.x1(j);
        if (x) {
          d0 -= x->x0;
          d1 -= x->x1;
        }
        out(i, j) = std::pow(d0, r.poly.k0) * std::pow(d1, r.poly.k1);
      }
    if (r.noise != 0) out = out.cwiseProduct(noises_.at(static_cast<std::size_t>(r.noise - 1)).values);
    return out;
  }

  /// hat Pi_x(I_a tau) = D^a K * Pi_x tau - sum_{|k|_s < deg} (y-x)^k/k! (D^{a+k} K * Pi_x tau)(x).
  const Eigen::MatrixXd& planted(EdgeLabel a, const DecoratedTree& tau, const std::optional<BasePoint>& x) const {
    const DecoratedTree p = DecoratedTree::planted(a, tau);
    auto key = std::make_pair(p, x);
    if (auto it = pi_hat_.find(key); it != pi_hat_.end()) return it->second;
    Eigen::MatrixXd out = tau.is_polynomial() ? Eigen::MatrixXd::Zero(grid_.nt, grid_.nx) : taylor_remainder(a, tau, x);
    return pi_hat_.emplace(key, std::move(out)).first->second;
  }

  /// D^a K * Pi_x tau minus its Taylor polynomial at x, also for polynomial
  /// tau where the structure sets I_a tau = 0.
  Eigen::MatrixXd taylor_remainder(EdgeLabel a, const DecoratedTree& tau, const std::optional<BasePoint>& x) const {
    const GreenKernel& K = green(a.sort);
    const Eigen::MatrixXd& f = pi(tau, x);
    Eigen::MatrixXd out = K.convolve(f, a.deriv);
    if (x)
      for (MultiIndex k : multi_indices_below(h_.degree(DecoratedTree::planted(a, tau)))) {
        const double c = K.convolve_at(f, a.deriv + k, x->i, x->j) / factorial(k).to_double();
        out -= c * root_factor(NodeDeco{0, k}, x);
      }
    return out;
  }

  EquationSpec spec_;
  SpaceTimeGrid grid_;
  HopfStructure h_;
  std::vector<GridFunction> noises_;
  std::optional<Character> ell_;
  std::map<DecoratedTree, Eigen::MatrixXd> ell_grid_;
  std::vector<std::unique_ptr<OperatorCoefficients>> coeffs_;
  std::vector<std::unique_ptr<GreenKernel>> green_;
  mutable std::map<std::pair<DecoratedTree, std::optional<BasePoint>>, Eigen::MatrixXd> pi_, pi_hat_;
};

// ---------------------------------------------------------------------------
// Model bounds

struct BoundReport {
  DecoratedTree tree;
  double degree = 0;
  double ratio_near = 0; ///< sup of |Pi_x tau(y)| / d^deg over h <= d < 2h
  double ratio_far = 0;  ///< same over r_far <= d < 1.4 r_far
  bool pass = false;
};

/// Parabolic distance in the chart of the model.
inline double grid_distance(const SpaceTimeGrid& g, int i, int j, const BasePoint& x) {
  return parabolic_distance(g.x0(i) - x.x0, g.x1(j) - x.x1);
}

/// Bounded ratio check for one tree over several base points: the ratio at
/// d ~ h must not exceed factor times the ratio at d ~ r_far.
inline BoundReport model_bound(const Model& m, const DecoratedTree& tau, const std::vector<BasePoint>& bases,
                               double r_far = 0.5, double factor = 10.0) {
  const auto& g = m.grid();
  const double h = std::max(std::sqrt(g.dt()), g.dx());
  BoundReport rep{tau, m.hopf().degree(tau).to_double(), 0, 0, false};
  for (const auto& x : bases) {
    const Eigen::MatrixXd& p = m.pi(tau, x);
    for (int i = 0; i < g.nt; ++i)
      for (int j = 0; j < g.nx; ++j) {
        const double d = grid_distance(g, i, j, x);
        const double r = std::abs(p(i, j)) / std::pow(d, rep.degree);
        if (d >= h && d < 2 * h) rep.ratio_near = std::max(rep.ratio_near, r);
        if (d >= r_far && d < 1.4 * r_far) rep.ratio_far = std::max(rep.ratio_far, r);
      }
  }
  rep.pass = rep.ratio_far > 0 && rep.ratio_near <= factor * rep.ratio_far;
  return rep;
}

// ---------------------------------------------------------------------------
// Renormalized equation

/// Node grid t_i = i T / nt, i = 0..nt, with nx points on the torus.
struct PicardConfig {
  double T = 0.1;
  int nt = 128;
  int nx = 128;
  int iterations = 5;
  int substeps = 4;
};

struct PicardResult {
  Eigen::MatrixXd u;        ///< (nt + 1) x nx
  Eigen::MatrixXd residual; ///< finite-difference residual at interior times
  double residual_sup = 0;
  std::vector<double> increments; ///< sup |u_{k+1} - u_k| per iteration
};

/// Right-hand side of a scalar equation (d_0 - L) u = rhs(t_i, u(t_i, .))
/// evaluated on the node grid.
using RightHandSide = std::function<Eigen::VectorXd(int i, const Eigen::VectorXd& u)>;

/// Spectral Crank-Nicolson for (d_0 - L) u = F(t), F linear in time between
/// nodes, with the given initial value.
inline Eigen::MatrixXd solve_linear(const OperatorCoefficients& c, const PicardConfig& cfg, const Eigen::VectorXd& u0,
                                    const Eigen::MatrixXd& F) {
  SpectralOperator S(c, cfg.nx);
  const double tau = cfg.T / cfg.nt / cfg.substeps;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(cfg.nx, cfg.nx);
  Eigen::PartialPivLU<Eigen::MatrixXd> lhs(I - 0.5 * tau * S.l());
  const Eigen::MatrixXd rhs = I + 0.5 * tau * S.l();
  Eigen::MatrixXd u(cfg.nt + 1, cfg.nx);
  u.row(0) = u0.transpose();
  Eigen::VectorXd v = u0;
  for (int i = 0; i < cfg.nt; ++i) {
    for (int s = 0; s < cfg.substeps; ++s) {
      const double a = double(s) / cfg.substeps, b = double(s + 1) / cfg.substeps;
      Eigen::VectorXd fa = ((1 - a) * F.row(i) + a * F.row(i + 1)).transpose();
      Eigen::VectorXd fb = ((1 - b) * F.row(i) + b * F.row(i + 1)).transpose();
      v = lhs.solve(rhs * v + 0.5 * tau * (fa + fb));
    }
    u.row(i + 1) = v.transpose();
  }
  return u;
}

/// Fourth-order centered derivatives on the periodic grid.
inline Eigen::VectorXd fd_derivative(const Eigen::VectorXd& u, double h, int order) {
  const int n = static_cast<int>(u.size());
  Eigen::VectorXd d(n);
  for (int j = 0; j < n; ++j) {
    auto at = [&](int k) { return u(((j + k) % n + n) % n); };
    if (order == 1)
      d(j) = (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h);
    else
      d(j) = (-at(2) + 16 * at(1) - 30 * at(0) + 16 * at(-1) - at(-2)) / (12 * h * h);
  }
  return d;
}

/// Picard iteration u_{k+1} = (d_0 - L)^{-1}[model_rhs(u_k)], then the
/// residual of (d_0 - L) u = equation_rhs(u) by centered differences in
/// time and fourth-order differences in x1 at the interior times.
inline PicardResult picard_solve(const OperatorCoefficients& c, const PicardConfig& cfg, const Eigen::VectorXd& u0,
                                 const RightHandSide& model_rhs, const RightHandSide& equation_rhs) {
  Eigen::MatrixXd u = u0.transpose().replicate(cfg.nt + 1, 1);
  PicardResult res;
  for (int k = 0; k < cfg.iterations; ++k) {
    Eigen::MatrixXd F(cfg.nt + 1, cfg.nx);
    for (int i = 0; i <= cfg.nt; ++i) F.row(i) = model_rhs(i, u.row(i).transpose()).transpose();
    Eigen::MatrixXd next = solve_linear(c, cfg, u0, F);
    res.increments.push_back((next - u).cwiseAbs().maxCoeff());
    u = std::move(next);
  }
  const double dt = cfg.T / cfg.nt, h = kTwoPi / cfg.nx;
  res.residual = Eigen::MatrixXd::Zero(cfg.nt - 1, cfg.nx);
  for (int i = 1; i < cfg.nt; ++i) {
    Eigen::VectorXd ui = u.row(i).transpose();
    Eigen::VectorXd d1 = fd_derivative(ui, h, 1), d2 = fd_derivative(ui, h, 2);
    Eigen::VectorXd f = equation_rhs(i, ui);
    for (int j = 0; j < cfg.nx; ++j) {
      const double x = h * j;
      const double ut = (u(i + 1, j) - u(i - 1, j)) / (2 * dt);
      res.residual(i - 1, j) = ut - c.apply_l(x, d1(j), d2(j)) - f(j);
    }
  }
  res.residual_sup = res.residual.cwiseAbs().maxCoeff();
  res.u = std::move(u);
  return res;
}

namespace detail {

inline std::map<VarIndex, double> scalar_jet(const Eigen::VectorXd& u, const Eigen::VectorXd& d1, const Eigen::VectorXd& d2,
                                             int j) {
  return {{VarIndex{1, {0, 0}}, u(j)}, {VarIndex{1, {0, 1}}, d1(j)}, {VarIndex{1, {0, 2}}, d2(j)}};
}

inline void require_scalar(const EquationSpec& spec) {
  if (spec.k0() != 1) throw SpecError("the Picard solver handles scalar equations only");
}

} // namespace detail

/// Reconstruction of the truncated lifted right-hand side
///   v(x) = sum_tau F(tau)(u(x)) / S(tau) tau
/// over the right-hand-side trees of the model, at the nodes of time row i.
inline RightHandSide model_right_hand_side(const Model& m, const Basis& basis) {
  detail::require_scalar(m.spec());
  ElementaryDifferential F(m.spec());
  std::vector<std::pair<SymbolicFunction, double>> terms;
  std::vector<DecoratedTree> trees;
  if (auto it = basis.rhs.find(1); it != basis.rhs.end())
    for (const auto& e : it->second) {
      const SymbolicFunction& f = F(1, e.tree);
      if (f.is_zero()) continue;
      terms.emplace_back(f, 1.0 / static_cast<double>(symmetry_factor(e.tree)));
      trees.push_back(e.tree);
    }
  const double h = kTwoPi / m.grid().nx;
  return [&m, terms, trees, h](int i, const Eigen::VectorXd& u) {
    Eigen::VectorXd d1 = fd_derivative(u, h, 1), d2 = fd_derivative(u, h, 2);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(u.size());
    for (int j = 0; j < u.size(); ++j) {
      const auto jet = detail::scalar_jet(u, d1, d2, j);
      const BasePoint x = m.base(i, j);
      for (std::size_t k = 0; k < trees.size(); ++k) {
        const double w = m.prepared_diagonal(trees[k], x);
        if (w != 0.0) out(j) += terms[k].second * terms[k].first.evaluate(jet) * w;
      }
    }
    return out;
  };
}

/// sum_l F^l(u) xi_l + sum of counter-terms, with the coefficients evaluated
/// from the character at each node of the grid.
inline RightHandSide equation_right_hand_side(const EquationSpec& spec, const std::vector<CounterTerm>& counter,
                                              const Character& ell, const SpaceTimeGrid& g,
                                              std::vector<GridFunction> noises) {
  detail::require_scalar(spec);
  if (static_cast<int>(noises.size()) != spec.n0()) throw SpecError("expected one noise sample per noise");
  struct Term {
    SymbolicFunction f;
    SymbolPoly coefficient;
    int noise;
  };
  std::vector<Term> terms;
  for (int l = 0; l <= spec.n0(); ++l) {
    SymbolicFunction f = SymbolicFunction::from_nonlinearity(spec.nonlinearity(1, l));
    if (!f.is_zero()) terms.push_back({f, SymbolPoly(1), l});
  }
  for (const auto& t : counter)
    if (t.component == 1) terms.push_back({t.function, t.coefficient, t.noise});
  const double h = kTwoPi / g.nx;
  return [=](int i, const Eigen::VectorXd& u) {
    Eigen::VectorXd d1 = fd_derivative(u, h, 1), d2 = fd_derivative(u, h, 2);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(u.size());
    for (int j = 0; j < u.size(); ++j) {
      const auto jet = detail::scalar_jet(u, d1, d2, j);
      std::map<std::string, double> symbols;
      for (const auto& [tree, v] : ell.values())
        if (v.kind != CharValue::Kind::Constant) symbols[v.name] = v.at(g.x0(i), g.x1(j));
      for (const auto& t : terms) {
        double c = t.coefficient.evaluate(symbols) * t.f.evaluate(jet);
        if (t.noise != 0) c *= noises[static_cast<std::size_t>(t.noise - 1)].values(i, j);
        out(j) += c;
      }
    }
    return out;
  };
}

} // namespace locrs
