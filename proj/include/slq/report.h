#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "slq/oracle.h"
#include "slq/perturb.h"
#include "slq/riccati.h"
#include "slq/sim.h"
#include "slq/stationarity.h"

namespace slq {

/// Version stamped into every JSON report.
inline constexpr int kSchemaVersion = 1;

/// Non-finite numbers are written as null.
nlohmann::json FiniteOrNull(double x);

/// Per-t P, Rhat, Khat, vhat and regularity flags; the value when regular.
nlohmann::json RiccatiReport(const RiccatiSolution& sol, const LQProblem& p);

/// Verdict, value and minimizer keyed by sign strings.
nlohmann::json OracleReport(const OracleSolution& sol);

/// Per-t maximum residual with the sign string of the node attaining it.
nlohmann::json StationarityReportJson(const StationarityReport& rep);

/// Per-eps norms, values and gains together with the boundedness verdict.
nlohmann::json SweepReport(const PerturbationRun& run, const BoundednessReport& verdict);

nlohmann::json WeakClosedLoopReport(const WeakClosedLoop& wcl);

nlohmann::json SimulationReportJson(const SimulationReport& rep);

/// eps,norm,value rows of the successful sweep entries.
std::string SweepCsv(const PerturbationRun& run);

/// Wraps a report body with schema_version and command.
nlohmann::json Envelope(const std::string& command, nlohmann::json body);

}  // namespace slq
