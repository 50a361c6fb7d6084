// glsurf: command-line front end.
//
//   glsurf solve-1d --b 1.5
//   glsurf theta0 --n 3001
//   glsurf solve-2d --domain square --b 1.5 --eps 0.08 --n 256
//   glsurf sweep --domain lshape --b 1.5 --eps 0.12,0.08,0.055 --jobs 2
//   glsurf check
//
// Options may also come from an INI file (--config run.ini); keys of [sweep]
// apply to the sweep subcommand, and so on. Unknown keys are errors. Outputs
// go below $GLSURF_OUTPUT_ROOT (default: the working directory).
//
// Exit codes: 0 success, 2 regime or precondition error, 3 convergence
// failure, 4 acceptance failure.

#include "check.hpp"
#include "glsurf/analysis.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace glsurf;

namespace {

enum Exit { kOk = 0, kPrecondition = 2, kConvergence = 3, kAcceptance = 4 };

fs::path output_dir(const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) {
    const char* root = std::getenv("GLSURF_OUTPUT_ROOT");
    p = fs::path(root && *root ? root : ".") / p;
  }
  fs::create_directories(p);
  return p;
}

// Write to a sibling temporary and rename, so readers never see a partial file.
void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw InvalidInputError("cannot write " + tmp.string());
    f << content;
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Domain

struct DomainOptions {
  std::string name = "square";
  double radius = 0.25;
  double scale = 1.0;
  std::string vertices;
  std::string curvatures;

  void add(CLI::App* app) {
    app->add_option("--domain", name, "square, lshape, rounded or custom")
        ->check(CLI::IsMember({"square", "lshape", "rounded", "custom"}))
        ->capture_default_str();
    app->add_option("--radius", radius, "corner arc radius of the rounded square")->capture_default_str();
    app->add_option("--scale", scale, "scale of the L-shaped domain")->capture_default_str();
    app->add_option("--vertices", vertices, "custom domain: x,y;x,y;... counterclockwise");
    app->add_option("--curvatures", curvatures, "custom domain: k0,k1,... per edge (default straight)");
  }

  CurvilinearPolygon build() const {
    if (name == "square") return CurvilinearPolygon::unit_square();
    if (name == "lshape") return CurvilinearPolygon::l_shape(scale);
    if (name == "rounded") return CurvilinearPolygon::rounded_square(radius);
    std::vector<Vec2d> v;
    std::stringstream ss(vertices);
    for (std::string pt; std::getline(ss, pt, ';');) {
      double x = 0, y = 0;
      if (std::sscanf(pt.c_str(), "%lf,%lf", &x, &y) != 2) throw InvalidInputError("bad vertex '" + pt + "'");
      v.emplace_back(x, y);
    }
    std::vector<double> k;
    std::stringstream ks(curvatures);
    for (std::string c; std::getline(ks, c, ',');) k.push_back(std::stod(c));
    return CurvilinearPolygon(std::move(v), std::move(k));
  }

  json to_json() const {
    json j{{"domain", name}};
    if (name == "rounded") j["radius"] = radius;
    if (name == "lshape") j["scale"] = scale;
    if (name == "custom") j["vertices"] = vertices, j["curvatures"] = curvatures;
    return j;
  }
};

// ---------------------------------------------------------------------------
// solve-1d

struct Solve1D {
  double b = 1.5;
  double t_max = 15.0;
  int n = 3001;
  std::string out = "solve-1d";

  void add(CLI::App* app) {
    app->add_option("--b", b, "field ratio")->capture_default_str();
    app->add_option("--t-max", t_max, "half-line cut-off")->capture_default_str();
    app->add_option("--n", n, "grid points")->capture_default_str();
    app->add_option("--out", out, "output directory")->capture_default_str();
  }

  int run() const {
    const fs::path dir = output_dir(out);
    const EffectiveSolution sol = minimize_joint(b, Grid1D(t_max, n));
    const CostTable ct = compute_cost_table(sol);
    std::string csv = "t,f,F,K\n";
    for (int i = 0; i < sol.f_star.grid.n; ++i)
      csv += num(sol.f_star.grid.t(i)) + "," + num(sol.f_star.values[i]) + "," + num(ct.F_values[i]) + "," +
             num(ct.K_values[i]) + "\n";
    write_atomic(dir / "profile.csv", csv);

    json s;
    s["command"] = "solve-1d";
    s["parameters"] = {{"b", b}, {"t_max", t_max}, {"n", n}};
    s["alpha_star"] = sol.alpha_star;
    s["energy"] = sol.energy;
    s["theta0"] = sol.theta0;
    s["el_residual"] = el_residual(sol);
    s["dE_dalpha"] = sol.dE_dalpha;
    s["sup_f"] = sol.f_star.sup_norm();
    s["F_end"] = ct.F_end();
    s["F_min"] = ct.F_min();
    s["K_min"] = ct.K_min();
    s["regime_flag"] = sol.regime_flag;
    s["flat_flag"] = sol.flat_flag;
    write_atomic(dir / "summary.json", s.dump(2) + "\n");
    std::cout << s.dump(2) << '\n';
    if (sol.regime_flag) {
      std::cerr << "warning: b = " << b << " is outside (1, 1/Theta0) = (1, " << 1.0 / sol.theta0
                << "); the profile is " << (sol.trivial() ? "trivial" : "not in the surface regime") << '\n';
      return kPrecondition;
    }
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// theta0

struct Theta0Cmd {
  double t_max = 15.0;
  int n = 3001;
  std::string out = "theta0";

  void add(CLI::App* app) {
    app->add_option("--t-max", t_max, "half-line cut-off")->capture_default_str();
    app->add_option("--n", n, "grid points")->capture_default_str();
    app->add_option("--out", out, "output directory")->capture_default_str();
  }

  int run() const {
    const fs::path dir = output_dir(out);
    const Theta0Result r = solve_theta0(Grid1D(t_max, n));
    json s;
    s["command"] = "theta0";
    s["parameters"] = {{"t_max", t_max}, {"n", n}};
    s["theta0"] = r.theta0;
    s["alpha0"] = r.alpha0;
    s["theta0_refined"] = r.theta0_refined;
    s["alpha0_refined"] = r.alpha0_refined;
    s["agreement_gap"] = r.agreement_gap;
    s["agreement_ok"] = r.agreement_gap <= 1e-4;
    write_atomic(dir / "theta0.json", s.dump(2) + "\n");
    std::cout << s.dump(2) << '\n';
    if (r.agreement_gap > 1e-4)
      std::cerr << "warning: two-resolution gap " << r.agreement_gap << " exceeds 1e-4; refine the grid\n";
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// solve-2d and sweep share the solver options

struct SolverOptions {
  double b = 1.5;
  int n = 512;
  int levels = 3;
  double c0 = 1.5;
  double c1 = 1.5;
  double tol = 1e-6;
  int max_iterations = 50000;
  std::string mode = "frozen";

  void add(CLI::App* app) {
    app->add_option("--b", b, "field ratio")->capture_default_str();
    app->add_option("--n", n, "finest grid is n x n on the bounding box")->capture_default_str();
    app->add_option("--levels", levels, "coarse-to-fine levels")->capture_default_str();
    app->add_option("--c0", c0, "layer depth c0 eps |log eps|")->capture_default_str();
    app->add_option("--c1", c1, "corner cell half-width c1 eps |log eps|")->capture_default_str();
    app->add_option("--tol", tol, "residual tolerance")->capture_default_str();
    app->add_option("--max-iter", max_iterations, "iteration cap per solve")->capture_default_str();
    app->add_option("--field-mode", mode, "frozen or alternating")
        ->check(CLI::IsMember({"frozen", "alternating"}))
        ->capture_default_str();
  }

  SweepOptions sweep() const {
    SweepOptions o;
    o.n = n;
    o.levels = levels;
    o.c0 = c0;
    o.c1 = c1;
    o.tol = tol;
    o.max_iterations = max_iterations;
    o.mode = mode == "alternating" ? FieldMode::Alternating : FieldMode::Frozen;
    return o;
  }

  json to_json() const {
    return {{"b", b},     {"n", n},     {"levels", levels}, {"c0", c0}, {"c1", c1},
            {"tol", tol}, {"max_iterations", max_iterations}, {"field_mode", mode}};
  }
};

json record_json(const SweepRecord& r) {
  return {{"b", r.b},
          {"epsilon", r.epsilon},
          {"E_gl", r.E_gl},
          {"E_trial", r.E_trial},
          {"ratio", r.ratio},
          {"density_l2_diff", r.density_l2_diff},
          {"density_l2_norm", r.density_l2_norm},
          {"bulk_mass_fraction", r.bulk_mass_fraction},
          {"agmon_rate", r.agmon_rate},
          {"Eu", r.Eu_value},
          {"Eu_lower", r.Eu_lower_term},
          {"E1D_star", r.E1D_star},
          {"perimeter", r.perimeter},
          {"restriction_defect", r.restriction_defect},
          {"a_norm", r.a_norm},
          {"a_constant", r.a_constant},
          {"a_eps_delta", r.a_eps_delta},
          {"a_remainder", r.a_remainder},
          {"density_cut_diff", r.density_cut_diff},
          {"density_cut_norm", r.density_cut_norm},
          {"splitting_defect", r.splitting_defect},
          {"tol_quad", r.tol_quad},
          {"residual", r.residual},
          {"iterations", r.iterations},
          {"grid_n", r.grid_n}};
}

void require_regime(const EffectiveSolution& sol) {
  if (sol.regime_flag || sol.trivial()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", sol.b);
    throw RegimeError("b = " + std::string(buf) + " is outside the surface regime (1, 1/Theta0)");
  }
}

struct Solve2D {
  DomainOptions domain;
  SolverOptions solver;
  double eps = 0.08;
  std::string init = "trial";
  unsigned seed = 1;
  std::string out = "solve-2d";

  void add(CLI::App* app) {
    domain.add(app);
    solver.add(app);
    app->add_option("--eps", eps, "epsilon")->capture_default_str();
    app->add_option("--init", init, "trial (coarse-to-fine from the trial state) or random")
        ->check(CLI::IsMember({"trial", "random"}))
        ->capture_default_str();
    app->add_option("--seed", seed, "seed of the random initial state")->capture_default_str();
    app->add_option("--out", out, "output directory")->capture_default_str();
  }

  int run() const {
    const fs::path dir = output_dir(out);
    const CurvilinearPolygon dom = domain.build();
    const EffectiveSolution sol = minimize_joint(solver.b);
    require_regime(sol);
    json s;
    s["command"] = "solve-2d";
    s["parameters"] = domain.to_json();
    s["parameters"].update(solver.to_json());
    s["parameters"]["eps"] = eps;
    s["parameters"]["init"] = init;
    s["parameters"]["seed"] = seed;

    GLResult result;
    try {
      if (init == "trial") {
        s["record"] = record_json(sweep_point(dom, sol, eps, solver.sweep(), &result));
      } else {
        GLConfig cfg;
        cfg.b = solver.b;
        cfg.epsilon = eps;
        cfg.tol = solver.tol;
        cfg.max_iterations = solver.max_iterations;
        cfg.mode = solver.sweep().mode;
        cfg.c0 = solver.c0;
        const Grid2D g = make_grid(dom, solver.n, solver.n);
        result = minimize_gl(dom, cfg, random_field(g, seed), make_reference_potential(g, dom));
        const BoundaryParam param = build_boundary_param(dom);
        s["record"] = {{"epsilon", eps},
                       {"E_gl", result.energy},
                       {"ratio", energy_ratio(result, cfg, sol, param)},
                       {"bulk_mass_fraction", result.bulk_mass_fraction},
                       {"residual", result.residual},
                       {"iterations", result.iterations}};
      }
    } catch (const GLConvergenceError& e) {
      write_field_raster(e.state().psi, (dir / "psi_unconverged.raster").string());
      throw;
    }
    write_field_raster(result.psi, (dir / "psi.raster").string());
    write_field_csv(result.psi, (dir / "psi.csv").string());
    write_atomic(dir / "summary.json", s.dump(2) + "\n");
    std::cout << s.dump(2) << '\n';
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// sweep

struct SweepCmd {
  DomainOptions domain;
  SolverOptions solver;
  std::vector<double> eps = {0.12, 0.08, 0.055};
  int jobs = 1;
  std::string out = "sweep";

  void add(CLI::App* app) {
    domain.add(app);
    solver.add(app);
    app->add_option("--eps", eps, "strictly decreasing epsilon list")->delimiter(',')->capture_default_str();
    app->add_option("--jobs", jobs, "worker cap (epsilon values run concurrently)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--out", out, "output directory")->capture_default_str();
  }

  int run() const {
    const fs::path dir = output_dir(out);
    const CurvilinearPolygon dom = domain.build();
    const EffectiveSolution sol = minimize_joint(solver.b);
    require_regime(sol);
    SweepOptions o = solver.sweep();
    o.jobs = jobs;
    const auto t0 = std::chrono::steady_clock::now();
    const SweepResult sweep = make_sweep(dom, sol, eps, o);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(dir / "records");
    for (const SweepRecord& r : sweep.records) {
      char name[64];
      std::snprintf(name, sizeof name, "eps_%.6g.json", r.epsilon);
      write_atomic(dir / "records" / name, record_json(r).dump(2) + "\n");
    }
    const fs::path csv = dir / "sweep.csv";
    write_sweep_csv(sweep.records, csv.string() + ".part");
    write_atomic(csv, read_file(csv.string() + ".part"));
    fs::remove(csv.string() + ".part");

    const std::vector<check::Line> lines = check::sweep_criteria(sweep, elapsed);
    json rep;
    rep["command"] = "sweep";
    rep["parameters"] = domain.to_json();
    rep["parameters"].update(solver.to_json());
    rep["parameters"]["eps"] = eps;
    rep["parameters"]["jobs"] = jobs;
    rep["E1D_star"] = sol.energy;
    rep["alpha_star"] = sol.alpha_star;
    rep["errors"] = sweep.errors;
    rep["flags"] = sweep.flags;
    rep["criteria"] = json::array();
    for (const check::Line& l : lines)
      rep["criteria"].push_back({{"criterion", l.criterion}, {"pass", l.pass}, {"detail", l.detail}});
    // Wall time is the only non-deterministic quantity; it stays out of the files.
    write_atomic(dir / "report.json", rep.dump(2) + "\n");

    std::printf("%-8s %-13s %-13s %-9s %-9s %-9s %-9s %-9s\n", "eps", "E_gl", "E_trial", "ratio", "diff/nrm",
                "bulk", "agmon", "E[u]");
    for (const SweepRecord& r : sweep.records)
      std::printf("%-8.4g %-13.6f %-13.6f %-9.4f %-9.4f %-9.2e %-9.3f %-9.4f\n", r.epsilon, r.E_gl, r.E_trial,
                  r.ratio, r.density_l2_diff / r.density_l2_norm, r.bulk_mass_fraction, r.agmon_rate, r.Eu_value);
    for (const std::string& e : sweep.errors) std::printf("error: %s\n", e.c_str());
    for (const std::string& f : sweep.flags) std::printf("note: %s\n", f.c_str());
    for (const check::Line& l : lines) std::printf("%s\n", check::format(l).c_str());
    std::printf("wall time %.1f s\n", elapsed);
    return check::all_pass(lines) ? kOk : kAcceptance;
  }
};

// ---------------------------------------------------------------------------
// check

struct CheckCmd {
  int n = 512;
  int levels = 3;
  int jobs = 1;
  std::string out = "check";

  void add(CLI::App* app) {
    app->add_option("--n", n, "finest sweep grid")->capture_default_str();
    app->add_option("--levels", levels, "coarse-to-fine levels")->capture_default_str();
    app->add_option("--jobs", jobs, "worker cap")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--out", out, "output directory")->capture_default_str();
  }

  int run() const {
    const fs::path dir = output_dir(out);
    check::Options o;
    o.sweep.n = n;
    o.sweep.levels = levels;
    o.sweep.jobs = jobs;
    o.out_dir = dir.string();
    std::ostringstream log;
    struct Tee : std::streambuf {
      std::streambuf *a, *b;
      int overflow(int c) override {
        if (c == EOF) return !EOF;
        a->sputc(char(c));
        b->sputc(char(c));
        return c;
      }
      int sync() override { return a->pubsync() | b->pubsync(); }
    } tee;
    tee.a = std::cout.rdbuf();
    tee.b = log.rdbuf();
    std::ostream both(&tee);
    const std::vector<check::Line> lines = check::run_all(o, both);
    write_atomic(dir / "check.txt", log.str());
    return check::all_pass(lines) ? kOk : kAcceptance;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surface superconductivity: 1D profile, 2D Ginzburg-Landau minimizers, asymptotic checks"};
  app.set_config("--config", "", "INI file; [solve-1d], [sweep], ... sections hold subcommand options");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  Solve1D solve1d;
  Theta0Cmd theta0;
  Solve2D solve2d;
  SweepCmd sweep;
  CheckCmd check_cmd;
  int code = kOk;
  auto wire = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.add(sub);
    sub->callback([&cmd, &code] { code = cmd.run(); });
  };
  wire("solve-1d", "optimal 1D profile f*, alpha*, potential and cost functions", solve1d);
  wire("theta0", "linear threshold Theta0 at two resolutions", theta0);
  wire("solve-2d", "one GL minimization with diagnostics", solve2d);
  wire("sweep", "epsilon sweep with sweep CSV and criteria 6-9", sweep);
  wire("check", "full acceptance suite (criteria 1-10)", check_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kPrecondition;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return kConvergence;
  } catch (const SearchError& e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return kConvergence;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kConvergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPrecondition;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPrecondition;
  }
  return code;
}
