// Command-line front end: basis listings, renormalized equations, kernel
// verification and model evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "locrs/models.hpp"

using namespace locrs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kSpec = 2, kHypothesis = 3, kNumerical = 4 };

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string spec;
  std::string out;
  std::string format = "json";
  std::string character;
  std::vector<std::string> noise;
  int nt = 64, nx = 64, terms = 2;
  double tol = 0.1;
  std::uint64_t seed = 1;
};

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void check_resolution(const Options& o) {
  if (!power_of_two(o.nt) || !power_of_two(o.nx)) throw SpecError("--nt and --nx must be powers of two");
}

/// Writes text to <out>/<name>, or to stdout without --out.
void emit(const Options& o, const std::string& name, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  fs::create_directories(o.out);
  std::ofstream os(fs::path(o.out) / name);
  if (!os) throw std::runtime_error("cannot write " + (fs::path(o.out) / name).string());
  os << text;
}

Character load_character(const std::string& path, const EquationSpec& spec) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open character file " + path);
  try {
    Character c = Character::from_json(json::parse(in));
    c.validate(spec.degrees());
    return c;
  } catch (const json::exception& e) {
    throw SpecError("invalid character file " + path + ": " + e.what());
  } catch (const std::exception& e) {
    throw SpecError("invalid character file " + path + ": " + e.what());
  }
}

/// Noise l from --noise: "seed" (default) draws a smooth field with seed
/// + l - 1, "file:<path>" reads a grid function, anything else is an
/// expression in x0, x1. A single entry is reused for every noise.
std::vector<GridFunction> load_noises(const Options& o, const EquationSpec& spec, const SpaceTimeGrid& g, double period) {
  std::vector<GridFunction> out;
  for (int l = 1; l <= spec.n0(); ++l) {
    std::string src = o.noise.empty() ? "seed" : o.noise[std::min<std::size_t>(l - 1, o.noise.size() - 1)];
    if (src == "seed") {
      out.push_back(smooth_noise(g, o.seed + static_cast<std::uint64_t>(l - 1), 2, 3, period));
    } else if (src.rfind("file:", 0) == 0) {
      GridFunction f = read_binary(src.substr(5));
      if (f.grid.nt != g.nt || f.grid.nx != g.nx) throw SpecError("noise file " + src.substr(5) + " does not match the grid");
      out.push_back(GridFunction(g, f.values));
    } else {
      Expr e = Expr::parse(src);
      out.push_back(GridFunction::sample(g, [&](double a, double b) { return e.eval<double>({{"x0", a}, {"x1", b}}); }));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_basis(const Options& o) {
  const EquationSpec spec = load_spec_file(o.spec);
  const Basis b = generate_basis(spec);
  std::set<DecoratedTree> minus;
  for (const auto& e : b.minus) minus.insert(e.tree);
  std::ostringstream ss;
  if (o.format == "csv") {
    ss << "tree,degree,nodes,noises,symmetry,negative\n";
    for (const auto& e : b.trees)
      ss << '"' << to_string(e.tree) << "\"," << e.degree.str() << ',' << e.tree.node_count() << ','
         << e.tree.noise_count() << ',' << symmetry_factor(e.tree) << ',' << (minus.count(e.tree) ? 1 : 0) << '\n';
  } else if (o.format == "latex") {
    ss << "\\begin{tabular}{lr}\n\\hline\ntree & degree \\\\\n\\hline\n";
    for (const auto& e : b.minus) ss << "\\texttt{" << to_string(e.tree) << "} & $" << e.degree.str() << "$ \\\\\n";
    ss << "\\hline\n\\end{tabular}\n";
  } else {
    json j;
    j["name"] = spec.name;
    j["truncated_by_nodes"] = b.truncated_by_nodes;
    for (const auto& e : b.trees)
      j["trees"].push_back({{"tree", to_string(e.tree)},
                            {"degree", e.degree.str()},
                            {"nodes", e.tree.node_count()},
                            {"symmetry", symmetry_factor(e.tree)},
                            {"negative", minus.count(e.tree) > 0}});
    j["negative"] = json::array();
    for (const auto& e : b.minus) j["negative"].push_back({{"tree", to_string(e.tree)}, {"degree", e.degree.str()}});
    ss << j.dump(2) << '\n';
  }
  emit(o, "basis." + o.format, ss.str());
  return kOk;
}

int cmd_renormalize(const Options& o) {
  const EquationSpec spec = load_spec_file(o.spec);
  const Basis b = generate_basis(spec);
  const Character ell = load_character(o.character, spec);
  const HopfStructure h(spec.degrees());
  auto R = PreparationMap<SymbolPoly>::from_character(h, ell.symbolic());
  std::vector<Diagnostic> diags;
  const auto terms = counter_terms(spec, b, R, &diags);
  for (const auto& d : diags) std::cerr << "warning: " << d.code << ": " << d.message << '\n';
  if (o.format == "latex") {
    std::string text;
    for (const auto& line : renormalized_equation_latex(spec, terms)) text += line + "\n";
    emit(o, "equation.tex", text);
  } else {
    emit(o, "counter_terms.json", counter_terms_json(spec, terms).dump(2) + "\n");
  }
  return kOk;
}

int cmd_kernel(const Options& o, int component, double xp) {
  const EquationSpec spec = load_spec_file(o.spec);
  const OperatorCoefficients c = OperatorCoefficients::from_spec(spec, component);
  const VolterraSeries V(c, std::max(o.terms, 1));
  const auto times = log_space(1e-3, 1e-1, 5);
  json rep;
  bool ok = true;

  const double null_res = null_leading_residual(dynamic_cast<const FrozenKernel&>(V.k1()), xp);
  rep["null_leading_residual"] = {{"value", null_res}, {"pass", null_res <= 1e-6}};
  ok &= null_res <= 1e-6;

  for (auto [n, cc] : std::vector<std::pair<int, double>>{{0, 0}, {1, 0}, {0, 2}, {2, 0}}) {
    const auto r = verify_scaling_estimate(V, n, cc, xp, times, o.tol);
    rep["scaling"].push_back({{"n1", n}, {"c", cc}, {"slope", r.fit.slope}, {"expected", r.expected}, {"pass", r.pass}});
    ok &= r.pass;
  }
  auto gain = [&](const char* name, const Kernel& k, double expected) {
    const double s = sup_slope(k, xp, times).slope;
    const bool pass = std::abs(s - expected) <= o.tol;
    rep["class"].push_back({{"kernel", name}, {"slope", s}, {"expected", expected}, {"pass", pass}});
    ok &= pass;
  };
  gain("E1", V.e1(), -1.5);
  gain("K1*E1", V.term(1), -0.5);

  for (int n = 1; n <= V.n_terms(); ++n)
    rep["residual"].push_back({{"terms", n}, {"t", 0.05}, {"sup", sup_norm(V.error_power(n + 1), 0.05, xp)}});
  rep["pass"] = ok;

  if (!o.out.empty()) {
    std::ostringstream csv;
    csv << "t,x,value\n";
    for (double t : {0.01, 0.05, 0.1}) {
      const auto& tab = V.k1().table(t, xp);
      const auto prof = V.profile(t, xp);
      for (std::size_t i = 0; i < prof.size(); ++i)
        csv << t << ',' << xp + std::pow(t, 0.25) * tab.v(i) << ',' << prof[i] * tab.prefactor() << '\n';
    }
    emit(o, "kernel_profile.csv", csv.str());
  }
  emit(o, "kernel_report.json", rep.dump(2) + "\n");
  if (!ok) throw NumericalFailure("kernel verification failed");
  return kOk;
}

int cmd_model(const Options& o, double r_far) {
  check_resolution(o);
  const EquationSpec spec = load_spec_file(o.spec);
  const Basis b = generate_basis(spec);
  const SpaceTimeGrid g{0.0, 0.5, o.nt, o.nx, 0.5};
  std::optional<Character> ell;
  if (!o.character.empty()) ell = load_character(o.character, spec);
  const Model m(spec, g, load_noises(o, spec, g, 1.0), ell);
  std::vector<BasePoint> bases;
  for (auto [fi, fj] : {std::pair{0.5, 0.2}, std::pair{0.5, 0.6}, std::pair{0.6, 0.4}})
    bases.push_back(m.base(static_cast<int>(fi * g.nt), static_cast<int>(fj * g.nx)));

  json manifest;
  manifest["grid"] = {{"nt", g.nt}, {"nx", g.nx}, {"T", g.T}};
  manifest["renormalized"] = m.renormalized();
  bool ok = true;
  int k = 0;
  for (const auto& e : b.trees) {
    if (e.tree.is_polynomial()) continue;
    const Eigen::MatrixXd& p = m.pi(e.tree);
    json entry{{"tree", to_string(e.tree)}, {"degree", e.degree.str()}, {"sup", p.cwiseAbs().maxCoeff()},
               {"finite", p.allFinite()}};
    ok &= p.allFinite();
    if (e.degree > Rational(0)) {
      const auto r = model_bound(m, e.tree, bases, r_far);
      entry["bound"] = {{"ratio_near", r.ratio_near}, {"ratio_far", r.ratio_far}, {"pass", r.pass}};
      ok &= r.pass;
    }
    if (!o.out.empty()) {
      const std::string file = "tree_" + std::to_string(k) + (o.format == "csv" ? ".csv" : ".bin");
      fs::create_directories(o.out);
      GridFunction f(g, p);
      if (o.format == "csv")
        write_csv(f, (fs::path(o.out) / file).string());
      else
        write_binary(f, (fs::path(o.out) / file).string());
      entry["file"] = file;
    }
    manifest["trees"].push_back(entry);
    ++k;
  }
  manifest["pass"] = ok;
  emit(o, "manifest.json", manifest.dump(2) + "\n");
  if (!ok) throw NumericalFailure("model bounds violated");
  return kOk;
}

int cmd_solve(const Options& o, double T, int iterations) {
  check_resolution(o);
  const EquationSpec spec = load_spec_file(o.spec);
  const Basis b = generate_basis(spec);
  const Character ell = load_character(o.character, spec);
  PicardConfig cfg{T, o.nt, o.nx, iterations, 4};
  const SpaceTimeGrid g{0.0, T * (cfg.nt + 1) / cfg.nt, cfg.nt + 1, cfg.nx, 0.0};
  const auto noises = load_noises(o, spec, g, T);
  const Model m(spec, g, noises, ell);
  const HopfStructure h(spec.degrees());
  auto R = PreparationMap<SymbolPoly>::from_character(h, ell.symbolic());
  const auto terms = counter_terms(spec, b, R);
  Eigen::VectorXd u0(cfg.nx);
  for (int j = 0; j < cfg.nx; ++j) u0(j) = 0.5 + 0.3 * std::cos(g.x1(j));
  const auto res = picard_solve(OperatorCoefficients::from_spec(spec), cfg, u0, model_right_hand_side(m, b),
                                equation_right_hand_side(spec, terms, ell, g, noises));
  json rep{{"equation", renormalized_equation_latex(spec, terms)},
           {"increments", res.increments},
           {"residual_sup", res.residual_sup},
           {"tolerance", o.tol},
           {"pass", res.residual_sup <= o.tol}};
  if (!o.out.empty()) {
    SpaceTimeGrid ug{0.0, T * (cfg.nt + 1) / cfg.nt, cfg.nt + 1, cfg.nx, 0.0};
    GridFunction u(ug, res.u);
    fs::create_directories(o.out);
    if (o.format == "csv")
      write_csv(u, (fs::path(o.out) / "solution.csv").string());
    else
      write_binary(u, (fs::path(o.out) / "solution.bin").string());
  }
  emit(o, "solve_report.json", rep.dump(2) + "\n");
  if (res.residual_sup > o.tol || !res.u.allFinite()) throw NumericalFailure("renormalized equation residual above tolerance");
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Renormalized models and counter-terms for singular parabolic equations"};
  app.require_subcommand(1);
  Options ob, orn, ok, om, os;
  int component = 1, iterations = 5;
  double xp = 1.0, r_far = 0.5, horizon = 0.1;

  auto common = [](CLI::App* s, Options& o) {
    s->add_option("--spec", o.spec, "Equation file (JSON)")->required()->check(CLI::ExistingFile);
    s->add_option("--out", o.out, "Output directory (default: stdout)");
  };
  auto format = [](CLI::App* s, Options& o, std::vector<std::string> allowed) {
    s->add_option("--format", o.format, "Output format")->check(CLI::IsMember(allowed))->default_val(allowed.front());
  };
  auto grid = [](CLI::App* s, Options& o, int n) {
    s->add_option("--nt", o.nt, "Time resolution (power of two)")->default_val(n);
    s->add_option("--nx", o.nx, "Space resolution (power of two)")->default_val(n);
    s->add_option("--seed", o.seed, "Seed of the smooth random noise")->default_val(1);
    s->add_option("--noise", o.noise, "Noise source per noise: seed, file:<path> or an expression in x0, x1");
  };

  auto* basis = app.add_subcommand("basis", "List the trees of the regularity structure");
  common(basis, ob);
  format(basis, ob, {"json", "csv", "latex"});

  auto* ren = app.add_subcommand("renormalize", "Counter-terms of the renormalized equation");
  common(ren, orn);
  format(ren, orn, {"json", "latex"});
  ren->add_option("--character", orn.character, "Character file (JSON); empty means identity")->check(CLI::ExistingFile);

  auto* ker = app.add_subcommand("kernel", "Build the parametrix kernel and verify its scaling estimates");
  common(ker, ok);
  ker->add_option("--terms", ok.terms, "Volterra terms")->default_val(2)->check(CLI::Range(1, 6));
  ker->add_option("--tol", ok.tol, "Slope tolerance")->default_val(0.1);
  ker->add_option("--component", component, "Component of the system")->default_val(1);
  ker->add_option("--xp", xp, "Source point x'")->default_val(1.0);

  auto* mod = app.add_subcommand("model", "Evaluate the model on a grid and check its bounds");
  common(mod, om);
  format(mod, om, {"json", "csv"});
  grid(mod, om, 64);
  mod->add_option("--character", om.character, "Character file (JSON); omitted means R = Id")->check(CLI::ExistingFile);
  mod->add_option("--far", r_far, "Distance of the reference annulus")->default_val(0.5);

  auto* sol = app.add_subcommand("solve", "Picard solution of the renormalized equation and its residual");
  common(sol, os);
  format(sol, os, {"json", "csv"});
  grid(sol, os, 128);
  sol->add_option("--character", os.character, "Character file (JSON)")->check(CLI::ExistingFile);
  sol->add_option("--tol", os.tol, "Residual tolerance")->default_val(1e-2);
  sol->add_option("--horizon", horizon, "Final time")->default_val(0.1);
  sol->add_option("--iterations", iterations, "Picard iterations")->default_val(5);

  CLI11_PARSE(app, argc, argv);
  try {
    if (basis->parsed()) return cmd_basis(ob);
    if (ren->parsed()) return cmd_renormalize(orn);
    if (ker->parsed()) return cmd_kernel(ok, component, xp);
    if (mod->parsed()) return cmd_model(om, r_far);
    if (sol->parsed()) return cmd_solve(os, horizon, iterations);
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSpec;
  } catch (const ExprError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSpec;
  } catch (const HypothesisError& e) {
    std::cerr << "hypothesis violated: " << e.what() << '\n';
    return kHypothesis;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
