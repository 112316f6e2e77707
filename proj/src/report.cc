#include "slq/report.h"

#include <cmath>
#include <sstream>

namespace slq {

using nlohmann::json;

json FiniteOrNull(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json RiccatiReport(const RiccatiSolution& sol, const LQProblem& p) {
  json steps = json::array();
  for (int t = 0; t < sol.horizon(); ++t) {
    const auto i = static_cast<std::size_t>(t);
    const RegularityFlags& f = sol.flags[i];
    steps.push_back({{"t", t},
                     {"P", MatrixToJson(sol.P[i])},
                     {"Rhat", MatrixToJson(sol.Rhat[i])},
                     {"Khat", MatrixToJson(sol.Khat[i])},
                     {"flags",
                      {{"rhat_psd", f.rhat_psd},
                       {"gain_finite", f.gain_finite},
                       {"gain_range", f.gain_range},
                       {"offset_range", f.offset_range}}}});
  }
  json out{{"regular", sol.regular},
           {"horizon", sol.horizon()},
           {"steps", steps},
           {"P_terminal", MatrixToJson(sol.P.back())},
           {"vhat", ProcessToJson(sol.vhat)}};
  if (sol.regular) {
    out["value"] = FiniteOrNull(ValueFunction(sol, p));
    out["closed_loop"] = StrategyToJson(ClosedLoop(sol));
  }
  return out;
}

json OracleReport(const OracleSolution& sol) {
  json out{{"verdict", std::string(ToString(sol.verdict))},
           {"value", FiniteOrNull(sol.value)},
           {"hessian_psd", sol.hessian_psd},
           {"flat_directions", sol.flat_directions},
           {"min_eigenvalue", sol.min_eigenvalue}};
  if (sol.verdict == OracleVerdict::kMinimizer) {
    out["control"] = ProcessToJson(sol.optimal_control);
  }
  return out;
}

json StationarityReportJson(const StationarityReport& rep) {
  json steps = json::array();
  for (std::size_t t = 0; t < rep.per_step.size(); ++t) {
    steps.push_back({{"t", t},
                     {"residual", rep.per_step[t]},
                     {"node", SignString(rep.argmax_node[t], static_cast<int>(t))}});
  }
  return {{"max_residual", rep.max_residual}, {"steps", steps}};
}

json SweepReport(const PerturbationRun& run, const BoundednessReport& verdict) {
  json entries = json::array();
  for (const auto& e : run.entries) {
    json j{{"eps", e.eps}};
    if (!e.ok()) {
      j["error"] = *e.error;
      if (e.error_step) j["error_step"] = *e.error_step;
    } else {
      json gains = json::array();
      for (const auto& k : e.solution.K) gains.push_back(MatrixToJson(k));
      j["control_norm"] = e.control_norm;
      j["value"] = FiniteOrNull(e.value);
      j["gains"] = gains;
      j["convex"] = e.solution.all_convex();
      j["continued"] = e.solution.continued;
    }
    entries.push_back(std::move(j));
  }
  json v{{"verdict", std::string(ToString(verdict.verdict))},
         {"norm_exponent", verdict.norm_exponent},
         {"last_relative_change", verdict.last_relative_change},
         {"value_monotone", verdict.value_monotone}};
  if (verdict.value_bracket) v["value_bracket"] = *verdict.value_bracket;
  return {{"entries", entries}, {"boundedness", v}};
}

json WeakClosedLoopReport(const WeakClosedLoop& wcl) {
  return {{"window_end", wcl.window_end},
          {"strategy", StrategyToJson(wcl.strategy)},
          {"divergent_steps", wcl.divergent_steps},
          {"gain_exponents", wcl.gain_exponents},
          {"open_loop", ProcessToJson(wcl.open_loop)},
          {"reproduction_error", wcl.reproduction_error}};
}

json SimulationReportJson(const SimulationReport& rep) {
  return {{"samples", rep.samples},
          {"cost_mean", rep.cost_mean},
          {"cost_stderr", rep.cost_stderr},
          {"max_state_sup", rep.max_state_sup},
          {"seed", rep.seed},
          {"noise", std::string(ToString(rep.noise))},
          {"kernel", rep.kernel}};
}

std::string SweepCsv(const PerturbationRun& run) {
  std::ostringstream os;
  os.precision(17);
  os << "eps,norm,value\n";
  for (const auto* e : run.successful()) {
    os << e->eps << ',' << e->control_norm << ',' << e->value << '\n';
  }
  return os.str();
}

json Envelope(const std::string& command, json body) {
  json out{{"schema_version", kSchemaVersion}, {"command", command}};
  for (auto it = body.begin(); it != body.end(); ++it) out[it.key()] = it.value();
  return out;
}

}  // namespace slq
