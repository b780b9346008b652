#pragma once

#include <shapetest/bootstrap.hpp>
#include <shapetest/simharness.hpp>

#include <nlohmann/json.hpp>

namespace shapetest {

using json = nlohmann::json;

json vector_json(const Vector& v);
json matrix_json(const Matrix& m);  // array of rows
Vector vector_from_json(const json& j);
Matrix matrix_from_json(const json& j);

void to_json(json& j, const ConstraintSet& S);
void from_json(const json& j, ConstraintSet& S);
void to_json(json& j, const BindingConstraint& b);
void to_json(json& j, const FitResult& f);
void to_json(json& j, const TestStatistics& t);
void to_json(json& j, const CriticalValues& cv);
void to_json(json& j, const BootstrapReport& r);
void to_json(json& j, const ScenarioConfig& c);
void to_json(json& j, const RejectionTable& t);

// Transform summary: path, v, sigma_hat, n_tilde, effective basis and ordering.
json transform_json(const TransformOutput& t);

// Config, seed and per-cell counts of a Monte Carlo run.
json run_manifest(const ScenarioConfig& cfg, const RejectionTable& table);

}  // namespace shapetest
