#include <shapetest/serialize.hpp>

namespace shapetest {

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

Vector vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix matrix_from_json(const json& j, Eigen::Index cols) {
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector r = vector_from_json(j[i]);
    if (r.size() != cols) throw InvalidArgument("ragged matrix in JSON");
    m.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  return m;
}

Matrix matrix_from_json(const json& j) {
  if (j.empty()) return Matrix(0, 0);
  return matrix_from_json(j, static_cast<Eigen::Index>(j.at(0).size()));
}

namespace {

json sparse_json(const Matrix& m) {
  json t = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k)
      if (m(i, k) != 0.0) t.push_back({i, k, m(i, k)});
  return t;
}

const char* kind_name(BindingConstraint::Kind k) {
  switch (k) {
    case BindingConstraint::Kind::inequality: return "inequality";
    case BindingConstraint::Kind::equality: return "equality";
    case BindingConstraint::Kind::quadratic: return "quadratic";
    case BindingConstraint::Kind::positivity: return "positivity";
  }
  return "?";
}

const char* mode_name(EffectiveMode m) {
  switch (m) {
    case EffectiveMode::plain: return "plain";
    case EffectiveMode::linear_merged: return "linear_merged";
    case EffectiveMode::nonlinear_reparameterized: return "nonlinear_reparameterized";
  }
  return "?";
}

}  // namespace

void to_json(json& j, const ConstraintSet& S) {
  j = json{{"dim", S.dim},
           {"label", S.label},
           {"ineq", matrix_json(S.ineq)},
           {"ineq_rhs", vector_json(S.ineq_rhs)},
           {"eq", matrix_json(S.eq)},
           {"eq_rhs", vector_json(S.eq_rhs)},
           {"positivity", S.positivity},
           {"positivity_margin", S.positivity_margin}};
  json q = json::array();
  for (const auto& c : S.quadratic)
    q.push_back({{"Q", sparse_json(c.Q)}, {"linear", vector_json(c.linear)}, {"constant", c.constant}});
  j["quadratic"] = std::move(q);
}

void from_json(const json& j, ConstraintSet& S) {
  S = ConstraintSet(j.at("dim").get<int>());
  S.label = j.value("label", "");
  const Matrix A = j.at("ineq").empty() ? Matrix(0, S.dim) : matrix_from_json(j.at("ineq"), S.dim);
  const Vector a = vector_from_json(j.at("ineq_rhs"));
  for (Eigen::Index i = 0; i < A.rows(); ++i) S.add_inequality(A.row(i).transpose(), a[i]);
  const Matrix E = j.at("eq").empty() ? Matrix(0, S.dim) : matrix_from_json(j.at("eq"), S.dim);
  const Vector e = vector_from_json(j.at("eq_rhs"));
  for (Eigen::Index i = 0; i < E.rows(); ++i) S.add_equality(E.row(i).transpose(), e[i]);
  S.positivity = j.value("positivity", false);
  S.positivity_margin = j.value("positivity_margin", 0.0);
  for (const auto& q : j.value("quadratic", json::array())) {
    QuadraticConstraint c;
    c.Q = Matrix::Zero(S.dim, S.dim);
    for (const auto& t : q.at("Q")) c.Q(t.at(0).get<int>(), t.at(1).get<int>()) = t.at(2).get<double>();
    c.linear = vector_from_json(q.at("linear"));
    c.constant = q.value("constant", 0.0);
    S.add_quadratic(std::move(c));
  }
}

void to_json(json& j, const BindingConstraint& b) {
  j = json{{"kind", kind_name(b.kind)}, {"index", b.index}, {"multiplier", b.multiplier}, {"slack", b.slack}};
}

void to_json(json& j, const FitResult& f) {
  j = json{{"coefficients", vector_json(f.coefficients)},
           {"sse", f.sse},
           {"binding", f.binding},
           {"iterations", f.iterations},
           {"constrained", f.constrained}};
  j["penalty_lambda"] = f.penalty_lambda ? json(*f.penalty_lambda) : json(nullptr);
}

void to_json(json& j, const TestStatistics& t) {
  j = json{{"ks", t.ks}, {"cvm", t.cvm}, {"ad", t.ad}, {"n_tilde", t.n_tilde}, {"degenerate", t.degenerate}};
}

void to_json(json& j, const CriticalValues& cv) {
  j = json{{"level", cv.level}, {"ks", cv.ks}, {"cvm", cv.cvm}, {"ad", cv.ad}};
}

void to_json(json& j, const BootstrapReport& r) {
  j = json{{"B", r.replications},          {"seed", r.seed},
           {"observed", r.observed},       {"critical_values", r.critical_values},
           {"warnings", r.warnings},       {"stats", matrix_json(r.stats)}};
}

void to_json(json& j, const ScenarioConfig& c) {
  j = json{{"scenario", c.scenario},
           {"n", c.n},
           {"sigma", c.sigma},
           {"l_prime", c.l_prime},
           {"degree", c.degree},
           {"mode", to_string(c.mode)},
           {"levels", c.levels},
           {"mc_reps", c.mc_reps},
           {"bootstrap_reps", c.bootstrap_reps},
           {"warp", c.warp},
           {"seed", c.seed},
           {"a", c.a},
           {"join", c.join == Join::smooth ? "smooth" : c.join == Join::none ? "none" : "continuous"},
           {"scenario3_variant", c.scenario3_variant},
           {"heteroscedastic", c.heteroscedastic},
           {"direction", c.direction == Direction::right ? "right" : "left"}};
  j["varsigma"] = c.varsigma ? json(*c.varsigma) : json(nullptr);
}

void to_json(json& j, const RejectionTable& t) {
  json cells = json::array();
  for (Statistic s : {Statistic::ks, Statistic::cvm, Statistic::ad})
    for (std::size_t l = 0; l < t.levels.size(); ++l)
      cells.push_back({{"statistic", to_string(s)},
                       {"level", t.levels[l]},
                       {"rejections", t.rejections[l][static_cast<std::size_t>(s)]},
                       {"rate", t.rate(s, l)}});
  j = json{{"attempted", t.attempted}, {"completed", t.completed}, {"failures", t.failures},
           {"warnings", t.warnings},   {"cells", std::move(cells)}};
  j["lambda"] = t.lambda ? json(*t.lambda) : json(nullptr);
}

json transform_json(const TransformOutput& t) {
  json j{{"sigma_hat", t.sigma_hat},
         {"n_tilde", t.n_tilde},
         {"path", vector_json(t.path)},
         {"v", vector_json(t.v)},
         {"effective_mode", mode_name(t.effective.mode)},
         {"effective_dim", t.effective.dim()},
         {"direction", t.ordered.direction == Direction::right ? "right" : "left"},
         {"trimmed", t.ordered.trimmed_count()},
         {"order", t.ordered.perm}};
  return j;
}

json run_manifest(const ScenarioConfig& cfg, const RejectionTable& table) {
  return json{{"config", cfg}, {"seed", cfg.seed}, {"table", table}};
}

}  // namespace shapetest
