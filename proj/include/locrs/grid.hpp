#pragma once

// Periodic spacetime grids [t0, t0 + T] x T and functions sampled on them.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace locrs {

/// nt time cells of width T / nt with nodes at t0 + (i + offset) dt, and nx
/// equispaced nodes j 2 pi / nx on the torus.
struct SpaceTimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  int nt = 64;
  int nx = 64;
  double offset = 0.5;

  double dt() const { return T / nt; }
  double dx() const { return 2 * std::numbers::pi / nx; }
  double x0(int i) const { return t0 + (i + offset) * dt(); }
  double x1(int j) const { return j * dx(); }
  void validate() const {
    if (nt < 2 || nx < 4 || nx % 2 != 0) throw std::invalid_argument("grid: need nt >= 2 and even nx >= 4");
    if (!(T > 0)) throw std::invalid_argument("grid: T must be positive");
  }
};

/// x1 - y1 reduced to [-pi, pi).
inline double torus_difference(double x1, double y1) {
  constexpr double p = 2 * std::numbers::pi;
  double d = std::fmod(x1 - y1 + std::numbers::pi, p);
  if (d < 0) d += p;
  return d - std::numbers::pi;
}

struct GridFunction {
  SpaceTimeGrid grid;
  Eigen::MatrixXd values; ///< nt x nx

  GridFunction() = default;
  explicit GridFunction(SpaceTimeGrid g, double fill = 0.0) : grid(g), values(Eigen::MatrixXd::Constant(g.nt, g.nx, fill)) {}
  GridFunction(SpaceTimeGrid g, Eigen::MatrixXd v) : grid(g), values(std::move(v)) {
    if (values.rows() != g.nt || values.cols() != g.nx) throw std::invalid_argument("GridFunction: shape mismatch");
  }

  template <class F>
  static GridFunction sample(const SpaceTimeGrid& g, F&& f) {
    GridFunction out(g);
    for (int i = 0; i < g.nt; ++i)
      for (int j = 0; j < g.nx; ++j) out.values(i, j) = f(g.x0(i), g.x1(j));
    return out;
  }

  double sup() const { return values.cwiseAbs().maxCoeff(); }
  bool finite() const { return values.allFinite(); }
};

// Binary layout: "LOCRSGF1", int32 nt, int32 nx, float64 t0, T, offset,
// then nt * nx float64 values row by row, little endian.
inline void write_binary(const GridFunction& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.write("LOCRSGF1", 8);
  std::int32_t nt = f.grid.nt, nx = f.grid.nx;
  os.write(reinterpret_cast<const char*>(&nt), 4);
  os.write(reinterpret_cast<const char*>(&nx), 4);
  for (double d : {f.grid.t0, f.grid.T, f.grid.offset}) os.write(reinterpret_cast<const char*>(&d), 8);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nx; ++j) {
      double v = f.values(i, j);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline GridFunction read_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != "LOCRSGF1") throw std::runtime_error(path + ": not a grid function file");
  std::int32_t nt = 0, nx = 0;
  is.read(reinterpret_cast<char*>(&nt), 4);
  is.read(reinterpret_cast<char*>(&nx), 4);
  SpaceTimeGrid g;
  g.nt = nt;
  g.nx = nx;
  is.read(reinterpret_cast<char*>(&g.t0), 8);
  is.read(reinterpret_cast<char*>(&g.T), 8);
  is.read(reinterpret_cast<char*>(&g.offset), 8);
  if (!is || nt <= 0 || nx <= 0) throw std::runtime_error(path + ": truncated header");
  GridFunction f(g);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nx; ++j) is.read(reinterpret_cast<char*>(&f.values(i, j)), 8);
  if (!is) throw std::runtime_error(path + ": truncated data");
  return f;
}

inline void write_csv(const GridFunction& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.precision(17);
  os << "x0,x1,value\n";
  for (int i = 0; i < f.grid.nt; ++i)
    for (int j = 0; j < f.grid.nx; ++j) os << f.grid.x0(i) << ',' << f.grid.x1(j) << ',' << f.values(i, j) << '\n';
}

/// Smooth random field: sum over |m| <= modes_t, |k| <= modes_x of
/// Gaussian coefficients times cos / sin of (2 pi m x0 / period + k x1),
/// amplitudes decaying like (1 + m^2 + k^2)^(-1).
inline GridFunction smooth_noise(const SpaceTimeGrid& g, std::uint64_t seed, int modes_t = 2, int modes_x = 3,
                                 double period = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  struct Mode {
    int m, k;
    double c, s;
  };
  std::vector<Mode> modes;
  for (int m = 0; m <= modes_t; ++m)
    for (int k = -modes_x; k <= modes_x; ++k) {
      double amp = 1.0 / (1.0 + m * m + k * k);
      modes.push_back({m, k, amp * n01(rng), amp * n01(rng)});
    }
  return GridFunction::sample(g, [&](double x0, double x1) {
    double v = 0;
    for (const auto& md : modes) {
      double ph = 2 * std::numbers::pi * md.m * x0 / period + md.k * x1;
      v += md.c * std::cos(ph) + md.s * std::sin(ph);
    }
    return v;
  });
}

} // namespace locrs
