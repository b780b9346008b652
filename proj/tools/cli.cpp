#include "cli.hpp"

#include "csv.hpp"

#include <shapetest/serialize.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace shapetest::cli {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
  std::string input;
  std::string shape = "monotone:inc";
  int l_prime = 6;
  int degree = 3;
  std::string mode = "bspline";
  int boot = 199;
  std::vector<double> levels{0.10, 0.05, 0.01};
  std::uint64_t seed = 1;
  bool hetero = false;
  std::string direction = "right";
  std::optional<double> varsigma;
  std::vector<double> domain;
  std::string out;

  // simulate
  int scenario = 1;
  int n = 1000;
  double sigma = 0.25;
  int reps = 100;
  bool warp = false;
  double a = 50.0;
  std::string join = "continuous";
  bool variant = false;
};

constexpr int grid_points = 512;

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write " + p.string());
  f << content;
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

Interval data_domain(const RunConfig& cfg, const XYData& d) {
  if (!cfg.domain.empty()) {
    if (cfg.domain.size() != 2 || !(cfg.domain[0] < cfg.domain[1])) throw InvalidArgument("--domain needs lo,hi with lo < hi");
    return {cfg.domain[0], cfg.domain[1]};
  }
  const auto [lo, hi] = std::minmax_element(d.x.begin(), d.x.end());
  if (!(*lo < *hi)) throw DataError("x has no spread; pass --domain");
  return {*lo, *hi};
}

Direction direction_of(const std::string& s) {
  if (s == "right") return Direction::right;
  if (s == "left") return Direction::left;
  throw InvalidArgument("--direction must be right or left");
}

struct Prepared {
  XYData data;
  Hypothesis hyp;
  Matrix X;
  Vector y;
  FitOptions fit;
  const ConstraintSet* member = nullptr;
};

Prepared prepare(const RunConfig& cfg) {
  Prepared p{read_xy_csv(cfg.input), Hypothesis{SplineBasis(make_knot_system(0, 1, {})), {}, ""}, {}, {}, {}, nullptr};
  const Interval dom = data_domain(cfg, p.data);
  p.hyp = make_hypothesis(cfg.shape, cfg.degree, cfg.l_prime, dom);
  p.X = p.hyp.basis.design(p.data.x);
  p.y = Eigen::Map<const Vector>(p.data.y.data(), static_cast<Eigen::Index>(p.data.y.size()));
  if (cfg.mode == "pspline") {
    const Matrix D = pspline_penalty(p.hyp.basis, 2);
    const auto grid = default_lambda_grid();
    p.fit.penalty = Penalty{D, cross_validate_lambda(p.X, p.y, D, grid)};
  } else if (cfg.mode != "bspline") {
    throw InvalidArgument("--mode must be bspline or pspline");
  }
  p.member = &select_member(p.hyp, p.X, p.y, p.fit);
  return p;
}

std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

int cmd_fit(const RunConfig& cfg, std::ostream& out) {
  const Prepared p = prepare(cfg);
  const FitResult fit = constrained_fit(p.X, p.y, *p.member, p.fit);
  out << "shape " << p.hyp.label << "  n=" << p.data.x.size() << "  L=" << p.hyp.basis.size() << "  sse=" << fit.sse
      << "  binding=" << fit.binding.size() << '\n';
  if (cfg.out.empty()) return ok;
  const fs::path dir = prepare_out(cfg.out);

  std::ostringstream coef;
  coef << "index,coefficient\n";
  for (Eigen::Index l = 0; l < fit.coefficients.size(); ++l) coef << l << ',' << csv_number(fit.coefficients[l]) << '\n';
  write_file(dir / "coefficients.csv", coef.str());

  std::ostringstream grid;
  grid << "x,fitted\n";
  const Interval dom = p.hyp.basis.domain();
  for (int k = 0; k < grid_points; ++k) {
    const double x = k == grid_points - 1 ? dom.hi : dom.lo + dom.length() * k / (grid_points - 1);
    grid << csv_number(x) << ',' << csv_number(p.hyp.basis.value(fit.coefficients, x)) << '\n';
  }
  write_file(dir / "grid.csv", grid.str());

  std::ostringstream res;
  res << "x,y,fitted,residual\n";
  for (std::size_t i = 0; i < p.data.x.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    res << csv_number(p.data.x[i]) << ',' << csv_number(p.data.y[i]) << ',' << csv_number(fit.fitted[k]) << ','
        << csv_number(fit.residuals[k]) << '\n';
  }
  write_file(dir / "residuals.csv", res.str());

  json j = fit;
  j["shape"] = cfg.shape;
  j["constraints"] = *p.member;
  write_file(dir / "fit.json", j.dump(2) + "\n");
  return ok;
}

int cmd_test(const RunConfig& cfg, std::ostream& out) {
  const Prepared p = prepare(cfg);
  BootstrapOptions bo;
  bo.heteroscedastic = cfg.hetero;
  bo.transform.fit = p.fit;
  bo.transform.direction = direction_of(cfg.direction);
  bo.transform.varsigma = cfg.varsigma;
  const BootstrapReport rep =
      bootstrap_critical_values(p.data.x, p.data.y, p.hyp.basis, *p.member, cfg.boot, cfg.levels, cfg.seed, bo);
  // Recomputed only for the summary fields; deterministic, so identical to the run inside the bootstrap.
  const BootstrapEngine engine(p.data.x, p.data.y, p.hyp.basis, *p.member, bo);
  const TransformOutput& t = engine.original();

  json decisions = json::array();
  for (const auto& cv : rep.critical_values)
    decisions.push_back({{"level", cv.level},
                         {"ks", rep.observed.ks > cv.ks},
                         {"cvm", rep.observed.cvm > cv.cvm},
                         {"ad", rep.observed.ad > cv.ad}});
  json j{{"command", "test"},
         {"shape", cfg.shape},
         {"n", p.data.x.size()},
         {"domain", {p.hyp.basis.domain().lo, p.hyp.basis.domain().hi}},
         {"degree", cfg.degree},
         {"l_prime", cfg.l_prime},
         {"mode", cfg.mode},
         {"B", cfg.boot},
         {"seed", cfg.seed},
         {"heteroscedastic", cfg.hetero},
         {"direction", cfg.direction},
         {"statistics", rep.observed},
         {"sigma_hat", t.sigma_hat},
         {"critical_values", rep.critical_values},
         {"decisions", decisions},
         {"binding", t.fit.binding},
         {"effective_dim", t.effective.dim()},
         {"trimmed", t.ordered.trimmed_count()},
         {"warnings", rep.warnings}};
  j["lambda"] = p.fit.penalty ? json(p.fit.penalty->lambda) : json(nullptr);
  j["varsigma"] = cfg.varsigma ? json(*cfg.varsigma) : json(nullptr);

  out << "shape " << p.hyp.label << "  n=" << p.data.x.size() << "  sigma_hat=" << t.sigma_hat
      << "  binding=" << t.fit.binding.size() << "  direction=" << cfg.direction << "  B=" << cfg.boot << '\n';
  out << std::left << std::setw(10) << "statistic" << std::right << std::setw(12) << "value";
  for (const auto& cv : rep.critical_values) {
    std::ostringstream h;
    h << "cv" << cv.level * 100 << '%';
    out << std::setw(12) << h.str();
  }
  out << "  reject\n";
  const double obs[3] = {rep.observed.ks, rep.observed.cvm, rep.observed.ad};
  const char* names[3] = {"KS", "CvM", "AD"};
  for (int c = 0; c < 3; ++c) {
    out << std::left << std::setw(10) << names[c] << std::right << std::fixed << std::setprecision(4) << std::setw(12)
        << obs[c];
    std::string flags;
    for (const auto& cv : rep.critical_values) {
      const double v = c == 0 ? cv.ks : c == 1 ? cv.cvm : cv.ad;
      out << std::setw(12) << v;
      flags += obs[c] > v ? " Y" : " n";
    }
    out << "  " << flags << '\n';
    out.unsetf(std::ios::fixed);
  }
  for (const auto& w : rep.warnings) out << "warning: " << w << '\n';
  if (!cfg.out.empty()) {
    const fs::path dir = prepare_out(cfg.out);
    write_file(dir / "report.json", j.dump(2) + "\n");
  }
  return ok;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  ScenarioConfig sc;
  sc.scenario = cfg.scenario;
  sc.n = cfg.n;
  sc.sigma = cfg.sigma;
  sc.l_prime = cfg.l_prime;
  sc.degree = cfg.degree;
  if (cfg.mode == "pspline")
    sc.mode = SplineMode::pspline;
  else if (cfg.mode != "bspline")
    throw InvalidArgument("--mode must be bspline or pspline");
  sc.levels = cfg.levels;
  sc.mc_reps = cfg.reps;
  sc.bootstrap_reps = cfg.boot;
  sc.warp = cfg.warp;
  sc.seed = cfg.seed;
  sc.a = cfg.a;
  sc.join = cfg.join == "smooth" ? Join::smooth : cfg.join == "none" ? Join::none : Join::continuous;
  if (cfg.join != "smooth" && cfg.join != "none" && cfg.join != "continuous")
    throw InvalidArgument("--join must be none, continuous or smooth");
  sc.scenario3_variant = cfg.variant;
  sc.heteroscedastic = cfg.hetero;
  sc.varsigma = cfg.varsigma;
  sc.direction = direction_of(cfg.direction);
  const RejectionTable table = run_mc(sc);
  out << "scenario " << sc.scenario << "  n=" << sc.n << "  sigma=" << sc.sigma << "  L'=" << sc.l_prime << "  "
      << to_string(sc.mode) << (sc.warp ? "  WARP" : "") << '\n';
  out << format_table(table);
  for (const auto& f : table.failures) out << "failed: " << f << '\n';
  for (const auto& w : table.warnings) out << "warning: " << w << '\n';
  if (!cfg.out.empty()) {
    const fs::path dir = prepare_out(cfg.out);
    write_file(dir / "table.csv", to_csv(table));
    write_file(dir / "manifest.json", run_manifest(sc, table).dump(2) + "\n");
  }
  return ok;
}

void add_common(CLI::App* app, RunConfig& cfg) {
  app->add_option("--lprime", cfg.l_prime, "Interior knot intervals L'")->check(CLI::PositiveNumber);
  app->add_option("--degree", cfg.degree, "Spline degree q")->check(CLI::NonNegativeNumber);
  app->add_option("--mode", cfg.mode, "bspline or pspline")->check(CLI::IsMember({"bspline", "pspline"}));
  app->add_option("--seed", cfg.seed, "RNG seed");
  app->add_option("--levels", cfg.levels, "Significance levels")->delimiter(',');
  app->add_flag("--hetero", cfg.hetero, "Heteroscedastic bootstrap");
  app->add_option("--direction", cfg.direction, "right or left")->check(CLI::IsMember({"right", "left"}));
  app->add_option("--varsigma", cfg.varsigma, "Trimming exponent");
  app->add_option("--out", cfg.out, "Output directory");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Shape-restriction tests for nonparametric regression", "shapetest"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "Constrained spline fit");
  auto* test = app.add_subcommand("test", "Bootstrap test of the shape restriction");
  auto* sim = app.add_subcommand("simulate", "Monte Carlo rejection rates for a scenario");
  for (auto* c : {fit, test}) {
    c->add_option("--input", cfg.input, "CSV with columns x,y")->required();
    c->add_option("--shape", cfg.shape, "Shape specification, e.g. monotone:inc");
    c->add_option("--domain", cfg.domain, "lo,hi (default: range of x)")->delimiter(',');
    add_common(c, cfg);
  }
  add_common(sim, cfg);
  for (auto* c : {test, sim}) c->add_option("--boot", cfg.boot, "Bootstrap replications B")->check(CLI::PositiveNumber);
  sim->add_option("--scenario", cfg.scenario, "Scenario 1-5")->check(CLI::Range(1, 5));
  sim->add_option("--n", cfg.n, "Sample size")->check(CLI::PositiveNumber);
  sim->add_option("--sigma", cfg.sigma, "Error standard deviation")->check(CLI::PositiveNumber);
  sim->add_option("--reps", cfg.reps, "Monte Carlo replications")->check(CLI::PositiveNumber);
  sim->add_flag("--warp", cfg.warp, "One bootstrap draw per replication, pooled critical values");
  sim->add_option("--a", cfg.a, "Scenario 4 dip parameter");
  sim->add_option("--join", cfg.join, "Scenario 2 join: none, continuous, smooth");
  sim->add_flag("--variant", cfg.variant, "Scenario 3 with the (10x-5)^3 leading term");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  }

  try {
    if (*fit) return cmd_fit(cfg, out);
    if (*test) return cmd_test(cfg, out);
    return cmd_simulate(cfg, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return data;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return numerical;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return numerical;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return data;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return numerical;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace shapetest::cli
