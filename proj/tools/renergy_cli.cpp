// renergy command-line front end.
// Exit codes: 0 success, 2 usage or precondition error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "renergy/renergy.hpp"

using namespace renergy;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_numeric = 3;

struct Output {
  std::string json;
  std::string csv;
};

struct Globals {
  std::string output;
  std::string format = "json";
  std::uint64_t seed = 0;
  int truncation_order = SeriesControl{}.truncation_order;
  double abs_tol = SeriesControl{}.abs_tol;
  int max_terms = SeriesControl{}.max_terms;

  RunConfig run_config(const std::string& sub, Json params) const {
    RunConfig rc;
    rc.subcommand = sub;
    rc.parameters = std::move(params);
    rc.output_path = output;
    rc.format = format;
    rc.seed = seed;
    rc.series = series();
    return rc;
  }
  SeriesControl series() const {
    SeriesControl s;
    s.truncation_order = truncation_order;
    s.abs_tol = abs_tol;
    s.max_terms = max_terms;
    s.validate();
    return s;
  }
};

// ---------------------------------------------------------------------------

struct LatticeArgs {
  std::vector<double> tau;
  std::vector<double> basis;
  std::vector<double> vs;
  double m = 1.0;
  std::string route = "eta";
};

Output run_lattice(const Globals& g, const LatticeArgs& a) {
  const SeriesControl series = g.series();
  Complex tau;
  double m = a.m;
  Json params = Json::object();
  if (!a.basis.empty()) {
    const LatticeBasis basis({a.basis[0], a.basis[1]}, {a.basis[2], a.basis[3]});
    const TauNormalization n = lattice_to_tau(basis);
    tau = n.tau;
    m = n.density;
    params["basis"] = a.basis;
  } else {
    tau = Complex(a.tau[0], a.tau[1]);
    params["tau"] = a.tau;
    params["m"] = a.m;
  }
  params["route"] = a.route;
  EnergyReport report;
  Json result = {{"tau", to_json(tau)}, {"m", m}};
  if (a.route == "eta") {
    report = w_eta(tau, m, series);
  } else if (a.route == "fourier") {
    report = w_fourier(tau, m, default_probe_radii, series);
  } else {
    const Complex other = a.vs.empty() ? Complex(0.5, 0.5 * std::sqrt(3.0)) : Complex(a.vs[0], a.vs[1]);
    params["vs"] = to_json(other);
    report = w_zeta_diff_report(tau, other, m, series);
    result["minus_tau"] = to_json(other);
  }
  result["report"] = to_json(report);
  return {dump_json(envelope(g.run_config("lattice", params), result)), energy_csv(report)};
}

// ---------------------------------------------------------------------------

struct ScanArgs {
  ModuliGrid grid;
  double m = 1.0;
};

Output run_scan(const Globals& g, const ScanArgs& a) {
  const ScanReport r = moduli_scan(a.grid, a.m, g.series());
  const Json params = {{"a_min", a.grid.a_min}, {"a_max", a.grid.a_max}, {"b_min", a.grid.b_min},
                       {"b_max", a.grid.b_max}, {"resolution", a.grid.resolution}, {"m", a.m}};
  return {dump_json(envelope(g.run_config("moduli-scan", params), to_json(r))), scan_csv(r)};
}

// ---------------------------------------------------------------------------

struct ThetaArgs {
  int samples = 50;
  std::vector<double> alphas{0.5, 1.0, 2.0, 5.0};
  double covolume = 1.0;
};

Output run_theta(const Globals& g, const ThetaArgs& a) {
  const ThetaProbeReport r = theta_minimality_probe(a.alphas, a.samples, g.seed, a.covolume, g.series());
  const Json params = {{"samples", a.samples}, {"alphas", a.alphas}, {"covolume", a.covolume}};
  CsvTable t({"alpha", "tau_a", "tau_b", "difference", "noise", "verdict"});
  for (const auto& row : r.rows) {
    t.row(row.alpha, row.tau.real(), row.tau.imag(), row.difference, row.noise, to_string(row.verdict));
  }
  return {dump_json(envelope(g.run_config("theta-probe", params), to_json(r))), t.str()};
}

// ---------------------------------------------------------------------------

struct FeketeArgs {
  int n = 0;
  std::string torus = "square";
  MinimizeControl ctl{};
  bool elkies = false;
  bool conjecture1 = false;
  int n_min = 2;
  int n_max = 8;
  double band_limit = 5.0;
  double tolerance = 1e-6;
  std::string trace;
};

TorusSpec torus_from(const std::string& kind) {
  return kind == "triangular" ? TorusSpec::triangular() : TorusSpec::square();
}

Output run_fekete(const Globals& g, FeketeArgs a) {
  const SeriesControl series = g.series();
  a.ctl.rng_seed = g.seed;
  Json params = {{"torus", a.torus},
                 {"restarts", a.ctl.restarts},
                 {"max_iters", a.ctl.max_iters},
                 {"grad_tol", a.ctl.grad_tol},
                 {"step_init", a.ctl.step_init}};
  if (a.elkies || a.conjecture1) {
    if (a.n_min < 1 || a.n_max < a.n_min) throw Error(ErrorKind::InvalidArgument, "need 1 <= n-min <= n-max");
    std::vector<int> ns(static_cast<std::size_t>(a.n_max - a.n_min + 1));
    std::iota(ns.begin(), ns.end(), a.n_min);
    params["n_min"] = a.n_min;
    params["n_max"] = a.n_max;
    if (a.elkies) {
      params["mode"] = "elkies";
      params["band_limit"] = a.band_limit;
      const ElkiesReport r = elkies_experiment(ns, torus_from(a.torus), a.ctl, a.band_limit, series);
      return {dump_json(envelope(g.run_config("fekete", params), to_json(r))), elkies_csv(r)};
    }
    params["mode"] = "conjecture1";
    params["tolerance"] = a.tolerance;
    const Conjecture1Report r = conjecture1_probe(ns, a.ctl, a.tolerance, series);
    return {dump_json(envelope(g.run_config("fekete", params), to_json(r))), conjecture1_csv(r)};
  }
  if (a.n < 1) throw Error(ErrorKind::InvalidArgument, "--n must be >= 1");
  params["n"] = a.n;
  const TorusConfig start = random_config(torus_from(a.torus), static_cast<std::size_t>(a.n), g.seed);
  const MinimizeResult r = minimize_config(start, a.ctl, series);
  const std::string trace = trace_csv(r);
  if (!a.trace.empty()) {
    std::ofstream out(a.trace, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot open trace file " + a.trace);
    out << trace;
  }
  return {dump_json(envelope(g.run_config("fekete", params), to_json(r))), trace};
}

// ---------------------------------------------------------------------------

struct ObstacleArgs {
  bool disk = false;
  std::vector<double> ellipse;
  std::vector<double> polygon;
  double h = 1.0 / 128;
  std::vector<double> m;
  std::string suite;
  std::vector<double> levels;
  std::vector<double> offsets;
  double offset = 0.03;
  double delta = 0.25;
  SolverControl ctl{};
};

Domain domain_from(const ObstacleArgs& a) {
  if (!a.ellipse.empty()) return Domain::ellipse(a.ellipse[0], a.ellipse[1]);
  if (!a.polygon.empty()) {
    if (a.polygon.size() % 2 != 0) throw Error(ErrorKind::InvalidGrid, "--polygon needs x y pairs");
    std::vector<Vec2> v;
    for (std::size_t i = 0; i < a.polygon.size(); i += 2) v.push_back({a.polygon[i], a.polygon[i + 1]});
    return Domain::polygon(v);
  }
  return Domain::unit_disk();
}

Output run_obstacle(const Globals& g, const ObstacleArgs& a) {
  const Domain domain = domain_from(a);
  Json params = {{"domain", to_json(domain)}, {"h", a.h}, {"tol", a.ctl.tol}, {"max_sweeps", a.ctl.max_sweeps}};
  const H0Solution h0 = solve_h0(make_grid(domain, a.h), a.ctl);
  Json result = {{"domain", to_json(domain)}, {"h", a.h}, {"unknowns", h0.grid->unknowns()}, {"h0", to_json(h0)}};
  std::string csv;

  if (!a.m.empty()) {
    params["m"] = a.m;
    const std::vector<ObstacleField> fields = solve_levels(h0, a.m, a.ctl);
    Json arr = Json::array();
    for (const auto& f : fields) arr.push_back(to_json(f));
    result["fields"] = arr;
    csv = fields_csv(fields);
  } else {
    csv = h0_csv(h0);
  }

  if (!a.suite.empty()) {
    params["suite"] = a.suite;
    if (a.suite == "propA1") {
      const std::vector<double> levels = a.levels.empty() ? std::vector<double>{0.80, 0.85, 0.90, 0.95} : a.levels;
      params["levels"] = levels;
      const LevelSuiteReport r = level_suite(h0, levels, a.ctl);
      result["suite"] = to_json(r);
      csv = level_suite_csv(r);
    } else if (a.suite == "gradient-bound") {
      const std::vector<double> levels = a.levels.empty() ? std::vector<double>{0.90, 0.95, 0.99} : a.levels;
      params["levels"] = levels;
      const GradientBoundReport r = verify_gradient_bound(solve_levels(h0, levels, a.ctl));
      result["suite"] = to_json(r);
      csv = gradient_bound_csv(r);
    } else if (a.suite == "scale-law") {
      const std::vector<double> offsets =
          a.offsets.empty() ? std::vector<double>{0.005, 0.01, 0.02, 0.04} : a.offsets;
      params["offsets"] = offsets;
      std::vector<double> levels;
      for (double d : offsets) levels.push_back(h0.hbar0 + d);
      const AsymptoticsReport r = verify_scale_law(solve_levels(h0, levels, a.ctl), h0.hbar0);
      result["suite"] = to_json(r);
      csv = scale_law_csv(r);
    } else {
      params["offset"] = a.offset;
      params["delta"] = a.delta;
      const ObstacleField f = solve_obstacle(h0.grid, h0.hbar0 + a.offset, a.ctl, &h0.values);
      const EllipseReport r = verify_ellipse_limit(f, h0.x0, a.delta);
      result["suite"] = to_json(r);
      csv = ellipse_csv(r);
    }
  }
  return {dump_json(envelope(g.run_config("obstacle", params), result)), csv};
}

// ---------------------------------------------------------------------------

void emit(const Globals& g, const Output& out) {
  const std::string& text = g.format == "csv" ? out.csv : out.json;
  if (g.output.empty() || g.output == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
    return;
  }
  std::ofstream f(g.output, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidArgument, "cannot open output file " + g.output);
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Renormalized Coulomb energy of lattices, torus configurations and the obstacle problem"};
  app.set_version_flag("--version", std::string(version));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("-o,--output", g.output, "Output file (default: stdout)");
  app.add_option("-f,--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--truncation-order", g.truncation_order, "Minimum number of series terms");
  app.add_option("--abs-tol", g.abs_tol, "Series truncation tolerance");
  app.add_option("--max-terms", g.max_terms, "Series term cap");

  LatticeArgs la;
  auto* lat = app.add_subcommand("lattice", "Energy of one lattice");
  auto* tau_opt = lat->add_option("--tau", la.tau, "Shape tau = a + ib")->expected(2)->allow_extra_args(false);
  auto* basis_opt = lat->add_option("--basis", la.basis, "Basis vectors u1 u2 v1 v2")->expected(4);
  auto* m_opt = lat->add_option("--m", la.m, "Density");
  lat->add_option("--route", la.route, "Evaluation route")->check(CLI::IsMember({"eta", "fourier", "zetadiff-vs"}));
  lat->add_option("--vs", la.vs, "Reference shape for zetadiff-vs (default triangular)")->expected(2);
  tau_opt->excludes(basis_opt);
  basis_opt->excludes(m_opt);
  lat->require_option(1, 0);

  ScanArgs sa;
  auto* scan = app.add_subcommand("moduli-scan", "Minimize W over the fundamental domain on a grid");
  scan->add_option("--a-min", sa.grid.a_min);
  scan->add_option("--a-max", sa.grid.a_max);
  scan->add_option("--b-min", sa.grid.b_min);
  scan->add_option("--b-max", sa.grid.b_max);
  scan->add_option("--resolution", sa.grid.resolution, "Points per axis");
  scan->add_option("--m", sa.m, "Density");

  ThetaArgs ta;
  auto* theta = app.add_subcommand("theta-probe", "Theta function of random lattices against the triangular one");
  theta->add_option("--samples", ta.samples);
  theta->add_option("--alpha", ta.alphas)->delimiter(',');
  theta->add_option("--covolume", ta.covolume);

  FeketeArgs fa;
  fa.ctl.restarts = 16;
  auto* fek = app.add_subcommand("fekete", "Minimize W over n-point torus configurations");
  fek->add_option("--n", fa.n, "Number of points");
  fek->add_option("--torus", fa.torus)->check(CLI::IsMember({"square", "triangular"}));
  fek->add_option("--restarts", fa.ctl.restarts, "Random restarts (0: descend from the seeded start only)");
  fek->add_option("--max-iters", fa.ctl.max_iters);
  fek->add_option("--grad-tol", fa.ctl.grad_tol);
  fek->add_option("--step-init", fa.ctl.step_init);
  fek->add_option("--trace", fa.trace, "Write the descent trace CSV here");
  auto* elk = fek->add_flag("--elkies", fa.elkies, "Excess table over n-min..n-max");
  auto* conj = fek->add_flag("--conjecture1", fa.conjecture1, "Compare minima with the triangular lattice");
  fek->add_option("--n-min", fa.n_min);
  fek->add_option("--n-max", fa.n_max);
  fek->add_option("--band-limit", fa.band_limit);
  fek->add_option("--tolerance", fa.tolerance);
  elk->excludes(conj);

  ObstacleArgs oa;
  auto* obs = app.add_subcommand("obstacle", "Constant-obstacle problem on a convex domain");
  obs->set_help_flag("--help", "Print this help message and exit");
  auto* disk = obs->add_flag("--disk", oa.disk, "Unit disk (default)");
  auto* ell = obs->add_option("--ellipse", oa.ellipse, "Semi-axes ax ay")->expected(2);
  auto* poly = obs->add_option("--polygon", oa.polygon, "Vertices x1 y1 x2 y2 ...")->expected(6, 2000);
  disk->excludes(ell, poly);
  ell->excludes(poly);
  obs->add_option("--h", oa.h, "Grid spacing");
  obs->add_option("--m", oa.m, "Obstacle levels")->delimiter(',');
  obs->add_option("--suite", oa.suite)->check(CLI::IsMember({"propA1", "gradient-bound", "scale-law", "ellipse"}));
  obs->add_option("--levels", oa.levels, "Levels for propA1 / gradient-bound")->delimiter(',');
  obs->add_option("--offsets", oa.offsets, "Offsets m - hbar0 for scale-law")->delimiter(',');
  obs->add_option("--offset", oa.offset, "Offset m - hbar0 for the ellipse suite");
  obs->add_option("--delta", oa.delta, "Inclusion margin for the ellipse suite");
  obs->add_option("--tol", oa.ctl.tol, "Solver tolerance");
  obs->add_option("--max-sweeps", oa.ctl.max_sweeps, "Solver sweep cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    Output out;
    if (lat->parsed()) {
      out = run_lattice(g, la);
    } else if (scan->parsed()) {
      out = run_scan(g, sa);
    } else if (theta->parsed()) {
      out = run_theta(g, ta);
    } else if (fek->parsed()) {
      if (!fa.elkies && !fa.conjecture1 && fek->count("--n") == 0) {
        std::cerr << "fekete: --n is required unless --elkies or --conjecture1 is given\n";
        return exit_usage;
      }
      out = run_fekete(g, fa);
    } else {
      out = run_obstacle(g, oa);
    }
    emit(g, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_usage_error() ? exit_usage : exit_numeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_numeric;
  }
  return exit_ok;
}
