#include <shapetest/parallel.hpp>
#include <shapetest/random.hpp>
#include <shapetest/simharness.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

namespace shapetest {

std::string to_string(SplineMode m) { return m == SplineMode::bspline ? "bspline" : "pspline"; }

std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::ks: return "KS";
    case Statistic::cvm: return "CvM";
    case Statistic::ad: return "AD";
  }
  return "?";
}

void ScenarioConfig::validate() const {
  if (scenario < 1 || scenario > 5) throw InvalidArgument("unknown scenario " + std::to_string(scenario));
  if (n < 1 || mc_reps < 1 || bootstrap_reps < 1 || l_prime < 1 || degree < 0)
    throw InvalidArgument("counts must be positive");
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  if (levels.empty()) throw InvalidArgument("no levels requested");
  for (double l : levels)
    if (!(l > 0.0 && l < 1.0)) throw InvalidArgument("levels must lie in (0, 1)");
  if (scenario == 4 && !(a > 0.0)) throw InvalidArgument("scenario 4 needs a > 0");
}

double switch_point_scenario2() { return std::exp(0.33) - 1.0; }

double scenario_function(const ScenarioConfig& cfg, double x) {
  switch (cfg.scenario) {
    case 1: return std::pow(x, 3.25);
    case 2: {
      const double d = std::log1p(x) - 0.33;
      return 10.0 * d * d;
    }
    case 3: {
      const double dip = std::exp(-100.0 * (x - 0.25) * (x - 0.25));
      if (x < 0.5) {
        const double c = cfg.scenario3_variant ? 10.0 * x - 5.0 : 10.0 * x - 0.5;
        return c * c * c - dip;
      }
      return 0.1 * (x - 0.5) - dip;
    }
    case 4: return x + 0.415 * std::exp(-cfg.a * x * x);
    case 5: return std::exp(x * x);
    default: throw InvalidArgument("unknown scenario " + std::to_string(cfg.scenario));
  }
}

std::pair<std::vector<double>, std::vector<double>> generate(const ScenarioConfig& cfg, std::uint64_t draw) {
  if (cfg.scenario < 1 || cfg.scenario > 5) throw InvalidArgument("unknown scenario " + std::to_string(cfg.scenario));
  auto rng = make_stream(cfg.seed, draw, 0xDA7A);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> xs(static_cast<std::size_t>(cfg.n)), ys(xs.size());
  for (auto& x : xs) x = uniform01(rng);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double scale = cfg.heteroscedastic ? cfg.sigma * (0.5 + xs[i]) : cfg.sigma;
    ys[i] = scenario_function(cfg, xs[i]) + scale * normal(rng);
  }
  return {std::move(xs), std::move(ys)};
}

Hypothesis scenario_hypothesis(const ScenarioConfig& cfg) {
  const Interval unit{0.0, 1.0};
  switch (cfg.scenario) {
    case 1:
    case 3:
    case 4: return make_hypothesis("monotone:inc", cfg.degree, cfg.l_prime, unit);
    case 2: {
      std::ostringstream s;
      s << std::setprecision(17) << "ushape:s0=" << switch_point_scenario2()
        << ",join=" << (cfg.join == Join::smooth ? "smooth" : cfg.join == Join::none ? "none" : "continuous");
      return make_hypothesis(s.str(), cfg.degree, cfg.l_prime, unit);
    }
    // log-convexity
    case 5: return make_hypothesis("rhoconvex:rho=0", cfg.degree, cfg.l_prime, unit);
    default: throw InvalidArgument("unknown scenario " + std::to_string(cfg.scenario));
  }
}

double RejectionTable::rate(Statistic s, std::size_t level_index) const {
  if (completed == 0) return 0.0;
  return static_cast<double>(rejections.at(level_index)[static_cast<std::size_t>(s)]) / completed;
}

const ConstraintSet& select_member(const Hypothesis& h, const Matrix& X, const Vector& y, const FitOptions& options) {
  if (!h.is_family()) return h.primary();
  return h.family[static_cast<std::size_t>(constrained_fit_family(X, y, h.family, options).first)];
}

double modal_lambda(const ScenarioConfig& cfg, const Hypothesis& h) {
  const Matrix D = pspline_penalty(h.basis, 2);
  const int pilots = std::max(1, std::min(cfg.lambda_pilot, cfg.mc_reps));
  std::vector<double> chosen(static_cast<std::size_t>(pilots));
  parallel_for(chosen.size(), [&](std::size_t r) {
    const auto [xs, ys] = generate(cfg, r);
    const Matrix X = h.basis.design(xs);
    const Vector y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    chosen[r] = cross_validate_lambda(X, y, D, cfg.lambda_grid);
  });
  std::map<double, int> counts;
  for (double l : chosen) ++counts[l];
  double best = counts.begin()->first;
  int best_count = 0;
  for (const auto& [l, c] : counts)
    if (c > best_count) best = l, best_count = c;
  return best;
}

namespace {

struct DrawResult {
  bool ok = false;
  std::string error;
  TestStatistics observed;
  TestStatistics warp_replicate;
  std::vector<CriticalValues> cvs;
};

}  // namespace

RejectionTable run_mc(const ScenarioConfig& cfg) {
  cfg.validate();
  const Hypothesis h = scenario_hypothesis(cfg);
  RejectionTable table;
  table.levels = cfg.levels;
  table.rejections.assign(cfg.levels.size(), {0, 0, 0});
  table.attempted = cfg.mc_reps;

  BootstrapOptions bopts;
  bopts.heteroscedastic = cfg.heteroscedastic;
  bopts.transform.varsigma = cfg.varsigma;
  bopts.transform.direction = cfg.direction;
  if (cfg.mode == SplineMode::pspline) {
    table.lambda = modal_lambda(cfg, h);
    bopts.transform.fit.penalty = Penalty{pspline_penalty(h.basis, 2), *table.lambda};
  }

  std::vector<DrawResult> draws(static_cast<std::size_t>(cfg.mc_reps));
  std::mutex warn_mutex;
  parallel_for(draws.size(), [&](std::size_t r) {
    DrawResult& d = draws[r];
    try {
      const auto [xs, ys] = generate(cfg, r);
      const Matrix X = h.basis.design(xs);
      const Vector y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
      const ConstraintSet& S = select_member(h, X, y, bopts.transform.fit);
      const std::uint64_t bseed = splitmix64(cfg.seed ^ splitmix64(r + 1));
      if (cfg.warp) {
        const BootstrapEngine engine(xs, ys, h.basis, S, bopts);
        d.observed = engine.observed();
        d.warp_replicate = engine.replicate(bseed, 0);
      } else {
        BootstrapReport rep = bootstrap_critical_values(xs, ys, h.basis, S, cfg.bootstrap_reps, cfg.levels, bseed, bopts);
        d.observed = rep.observed;
        d.cvs = std::move(rep.critical_values);
        if (!rep.warnings.empty() && r == 0) {
          std::lock_guard<std::mutex> lock(warn_mutex);
          table.warnings.insert(table.warnings.end(), rep.warnings.begin(), rep.warnings.end());
        }
      }
      d.ok = true;
    } catch (const std::exception& e) {
      d.error = e.what();
    }
  });

  std::vector<std::size_t> good;
  for (std::size_t r = 0; r < draws.size(); ++r) {
    if (draws[r].ok)
      good.push_back(r);
    else
      table.failures.push_back("draw " + std::to_string(r) + ": " + draws[r].error);
  }
  table.completed = static_cast<int>(good.size());
  if (good.empty()) return table;

  auto stat = [](const TestStatistics& t, int c) { return c == 0 ? t.ks : c == 1 ? t.cvm : t.ad; };
  auto crit = [](const CriticalValues& cv, int c) { return c == 0 ? cv.ks : c == 1 ? cv.cvm : cv.ad; };

  if (cfg.warp) {
    Matrix pooled(static_cast<Eigen::Index>(good.size()), 3);
    for (std::size_t k = 0; k < good.size(); ++k)
      for (int c = 0; c < 3; ++c) pooled(static_cast<Eigen::Index>(k), c) = stat(draws[good[k]].warp_replicate, c);
    for (std::size_t l = 0; l < cfg.levels.size(); ++l) {
      const CriticalValues cv = empirical_critical_values(pooled, cfg.levels[l], &table.warnings);
      for (std::size_t r : good)
        for (int c = 0; c < 3; ++c)
          if (stat(draws[r].observed, c) > crit(cv, c)) ++table.rejections[l][static_cast<std::size_t>(c)];
    }
  } else {
    for (std::size_t l = 0; l < cfg.levels.size(); ++l)
      for (std::size_t r : good) {
        const auto& cvs = draws[r].cvs;
        const auto it = std::find_if(cvs.begin(), cvs.end(),
                                     [&](const CriticalValues& cv) { return std::abs(cv.level - cfg.levels[l]) < 1e-12; });
        for (int c = 0; c < 3; ++c)
          if (stat(draws[r].observed, c) > crit(*it, c)) ++table.rejections[l][static_cast<std::size_t>(c)];
      }
  }
  return table;
}

std::string to_csv(const RejectionTable& table) {
  std::ostringstream out;
  out << "statistic,level,rejections,completed,rate\n";
  out << std::setprecision(10);
  for (Statistic s : {Statistic::ks, Statistic::cvm, Statistic::ad})
    for (std::size_t l = 0; l < table.levels.size(); ++l)
      out << to_string(s) << ',' << table.levels[l] << ',' << table.rejections[l][static_cast<std::size_t>(s)] << ','
          << table.completed << ',' << table.rate(s, l) << '\n';
  return out.str();
}

std::string format_table(const RejectionTable& table) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "Method";
  for (double l : table.levels) {
    std::ostringstream head;
    head << l * 100 << '%';
    out << std::right << std::setw(10) << head.str();
  }
  out << '\n';
  for (Statistic s : {Statistic::ks, Statistic::cvm, Statistic::ad}) {
    out << std::left << std::setw(10) << to_string(s);
    for (std::size_t l = 0; l < table.levels.size(); ++l)
      out << std::right << std::setw(10) << std::fixed << std::setprecision(4) << table.rate(s, l);
    out << '\n';
  }
  out << "completed " << table.completed << " of " << table.attempted << '\n';
  return out.str();
}

}  // namespace shapetest
