#include "conjure/reports.hpp"

namespace conjure {

ordered_json to_json(const DistanceEstimate& e) {
  ordered_json j;
  j["method"] = to_string(e.method);
  j["pair"] = {e.pair.first, e.pair.second};
  j["value"] = e.value;
  j["std_error"] = e.std_error ? ordered_json(*e.std_error) : ordered_json(nullptr);
  j["k"] = e.k;
  j["prior"] = e.prior.to_string();
  j["per_iteration"] = e.per_iteration;
  return j;
}

ordered_json to_json(const oracle::OracleReport& r) {
  ordered_json j;
  j["name"] = r.name;
  j["analytic"] = r.analytic;
  j["estimator"] = r.estimator;
  j["k"] = r.k;
  j["std_error"] = r.std_error ? ordered_json(*r.std_error) : ordered_json(nullptr);
  j["z_score"] = r.z_score ? ordered_json(*r.z_score) : ordered_json(nullptr);
  j["relative_error"] = r.relative_error;
  j["rule"] = r.rule;
  j["pass"] = r.pass;
  return j;
}

ordered_json to_json(const AblationReport& r, bool include_runtimes) {
  ordered_json j;
  j["parameter"] = r.parameter;
  j["values"] = r.values;
  j["scores"] = r.scores;
  j["spread"] = r.spread();
  j["best"] = r.values.at(r.best());
  if (r.matrices.size() >= 2) j["rank_stability"] = rank_stability(r.matrices);
  if (include_runtimes) j["runtime_seconds"] = r.runtimes;
  return j;
}

ordered_json to_json(const TrainingLog& log) {
  ordered_json j;
  j["epochs"] = log.epochs;
  j["seed"] = log.seed;
  j["validation_loss"] = log.validation_loss;
  j["final_loss"] = log.loss_curve.empty() ? 0.0 : log.loss_curve.back();
  j["loss_curve"] = log.loss_curve;
  return j;
}

}  // namespace conjure
