#include "slq/cli.h"

#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "slq/errors.h"
#include "slq/oracle.h"
#include "slq/perturb.h"
#include "slq/report.h"
#include "slq/riccati.h"
#include "slq/sim.h"
#include "slq/stationarity.h"

namespace slq {

namespace {

using nlohmann::json;

struct Options {
  std::string input;
  std::string out_path;
  std::optional<double> tol;
  std::string schedule = "geometric:1:0.5:21";
  double growth_tol = kDefaultGrowthTol;
  int window_end = 0;
  std::size_t samples = 100000;
  std::optional<std::uint64_t> seed;
  std::string csv_path;
  std::string paths_csv;
  std::string control_path;
  std::string strategy_path;
  std::optional<double> eps;
  std::size_t cap = kDefaultOracleCap;
  bool require_regular = false;
};

std::vector<double> ParseSchedule(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.size() != 4 || parts[0] != "geometric") {
    throw InvalidInput("--schedule: expected geometric:<e0>:<ratio>:<count>, got '" + spec + "'");
  }
  try {
    return GeometricSchedule(std::stod(parts[1]), std::stod(parts[2]), std::stoi(parts[3]));
  } catch (const std::logic_error&) {
    throw InvalidInput("--schedule: malformed number in '" + spec + "'");
  }
}

json ReadJsonFile(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + what + " file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(what + " file '" + path + "': " + e.what());
  }
}

AdaptedProcess LoadControl(const std::string& path, const LQProblem& p) {
  const json j = ReadJsonFile(path, "control");
  const json& body = j.is_object() && j.contains("control") ? j.at("control") : j;
  return ProcessFromJson(body, p.horizon, p.control_dim, "control");
}

Strategy LoadStrategy(const std::string& path, const LQProblem& p) {
  const json j = ReadJsonFile(path, "strategy");
  const json& body = j.is_object() && j.contains("strategy") ? j.at("strategy") : j;
  return StrategyFromJson(body, p.state_dim, p.control_dim);
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write '" + path + "'");
  os << text;
}

Tolerances NumericTolerances(const Options& o) {
  Tolerances tol;
  if (o.tol) tol.residual_tol = *o.tol;
  tol.Validate();
  return tol;
}

struct Outcome {
  json report;
  int status = kExitOk;
};

Outcome RunRiccati(const Options& o, const LQProblem& p) {
  const RiccatiSolution sol = SolveRiccati(p, NumericTolerances(o));
  Outcome r{RiccatiReport(sol, p)};
  if (o.require_regular && !sol.regular) r.status = kExitNegativeVerdict;
  return r;
}

Outcome RunOracle(const Options& o, const LQProblem& p) {
  return {OracleReport(ExactValue(p, o.cap))};
}

Outcome RunPerturb(const Options& o, const LQProblem& p) {
  const PerturbationRun run = EpsilonSweep(p, ParseSchedule(o.schedule));
  Outcome r;
  if (run.successful().size() >= 4) {
    r.report = SweepReport(run, BoundednessVerdict(run, o.growth_tol));
  } else {
    BoundednessReport none;
    r.report = SweepReport(run, none);
  }
  if (!o.csv_path.empty()) WriteText(o.csv_path, SweepCsv(run));
  return r;
}

Outcome RunWeakClosedLoop(const Options& o, const LQProblem& p) {
  const double tol = o.tol.value_or(1e-6);
  const PerturbationRun run = EpsilonSweep(p, ParseSchedule(o.schedule));
  Outcome r;
  const BoundednessReport bounded = BoundednessVerdict(run, o.growth_tol);
  r.report = SweepReport(run, bounded);
  if (!o.csv_path.empty()) WriteText(o.csv_path, SweepCsv(run));
  if (bounded.verdict != Boundedness::kOpenLoopSolvable) {
    r.report["weak_closed_loop"] = nullptr;
    r.status = kExitNegativeVerdict;
    return r;
  }
  try {
    r.report["weak_closed_loop"] = WeakClosedLoopReport(ExtractWeakClosedLoop(run, o.window_end, tol));
  } catch (const WindowTooLong& e) {
    r.report["weak_closed_loop"] = {{"error", e.what()}, {"step", e.step()}};
    r.status = kExitNegativeVerdict;
  } catch (const ConvergenceFailure& e) {
    r.report["weak_closed_loop"] = {{"error", e.what()}};
    r.status = kExitNegativeVerdict;
  }
  return r;
}

Outcome RunCheck(const Options& o, const LQProblem& p) {
  const double tol = o.tol.value_or(1e-8);
  Trajectory traj;
  if (!o.strategy_path.empty()) {
    traj = RolloutStrategy(p, LoadStrategy(o.strategy_path, p));
  } else if (!o.control_path.empty()) {
    traj = Rollout(p, LoadControl(o.control_path, p));
  } else {
    throw InvalidInput("check needs --control or --strategy");
  }
  const StationarityReport rep = StationarityResiduals(p, traj, CostateBackward(p, traj));
  Outcome r{StationarityReportJson(rep)};
  r.report["cost"] = FiniteOrNull(TrajectoryCost(p, traj));
  r.report["tol"] = tol;
  r.report["stationary"] = rep.max_residual <= tol;
  if (rep.max_residual > tol) r.status = kExitNegativeVerdict;
  return r;
}

Outcome RunSimulate(const Options& o, const LQProblem& p) {
  Policy policy;
  if (!o.strategy_path.empty()) {
    policy = LoadStrategy(o.strategy_path, p);
  } else if (!o.control_path.empty()) {
    policy = LoadControl(o.control_path, p);
  } else if (o.eps) {
    const PerturbedSolution sol = PerturbedRiccati(p, *o.eps);
    policy = Strategy{sol.K, sol.v};
  } else {
    policy = Strategy{std::vector<Matrix>(static_cast<std::size_t>(p.horizon),
                                          Matrix::Zero(p.control_dim, p.state_dim)),
                      AdaptedProcess::Zero(p.horizon, p.control_dim)};
  }
  SimulationOptions opts;
  std::ofstream paths;
  if (!o.paths_csv.empty()) {
    paths.open(o.paths_csv);
    if (!paths) throw InvalidInput("cannot write '" + o.paths_csv + "'");
    opts.paths_csv = &paths;
  }
  const std::uint64_t seed = o.seed.value_or(p.noise.seed);
  return {SimulationReportJson(SimulateCost(p, policy, o.samples, seed, opts))};
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic LQ toolkit: generalized Riccati, perturbation and oracle solvers", "slq"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("input", o.input, "Problem file (JSON)")->required();
    sub->add_option("--out", o.out_path, "Write the JSON report here instead of stdout");
  };
  auto add_sweep = [&](CLI::App* sub) {
    sub->add_option("--schedule", o.schedule,
                    "eps schedule geometric:<e0>:<ratio>:<count>")
        ->capture_default_str();
    sub->add_option("--growth-tol", o.growth_tol,
                    "Relative change of the last two norms accepted as settled")
        ->capture_default_str();
    sub->add_option("--csv", o.csv_path, "Write eps,norm,value rows here");
  };

  CLI::App* riccati = app.add_subcommand("riccati", "Generalized Riccati recursion and regularity");
  add_common(riccati);
  riccati->add_option("--tol", o.tol, "Range-test residual tolerance (default 1e-9)");
  riccati->add_flag("--require-regular", o.require_regular,
                    "Exit 1 when the solution is not regular");

  CLI::App* perturb = app.add_subcommand("perturb", "eps-perturbation sweep and boundedness");
  add_common(perturb);
  add_sweep(perturb);

  CLI::App* weakcl = app.add_subcommand("weakcl", "Sweep plus weak closed-loop extraction");
  add_common(weakcl);
  add_sweep(weakcl);
  weakcl->add_option("--tol", o.tol, "Extrapolation tolerance (default 1e-6)");
  weakcl->add_option("--window-end", o.window_end, "Last step of the feedback window (<= N-2)")
      ->capture_default_str();

  CLI::App* oracle = app.add_subcommand("oracle", "Exact minimization over the +/-1 tree");
  add_common(oracle);
  oracle->add_option("--cap", o.cap, "Maximum number of scalar control variables")
      ->capture_default_str();

  CLI::App* check = app.add_subcommand("check", "Stationarity residual of a control or strategy");
  add_common(check);
  check->add_option("--tol", o.tol, "Residual accepted as stationary (default 1e-8)");
  auto* control_opt = check->add_option("--control", o.control_path, "Control process file");
  check->add_option("--strategy", o.strategy_path, "Feedback strategy file")
      ->excludes(control_opt);

  CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo cost estimate");
  add_common(simulate);
  simulate->add_option("--samples", o.samples, "Number of paths")->capture_default_str();
  simulate->add_option("--seed", o.seed, "Seed (default: the problem's noise seed)");
  auto* sim_control = simulate->add_option("--control", o.control_path, "Control process file");
  auto* sim_strategy = simulate->add_option("--strategy", o.strategy_path, "Strategy file")
                           ->excludes(sim_control);
  simulate->add_option("--eps", o.eps, "Simulate the eps-regularized closed loop")
      ->excludes(sim_control)
      ->excludes(sim_strategy);
  simulate->add_option("--paths-csv", o.paths_csv, "Dump the first 100 paths as CSV");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitInputError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  try {
    const LQProblem p = LoadProblemFile(o.input);
    Outcome r;
    if (command == "riccati") {
      r = RunRiccati(o, p);
    } else if (command == "perturb") {
      r = RunPerturb(o, p);
    } else if (command == "weakcl") {
      r = RunWeakClosedLoop(o, p);
    } else if (command == "oracle") {
      r = RunOracle(o, p);
    } else if (command == "check") {
      r = RunCheck(o, p);
    } else {
      r = RunSimulate(o, p);
    }
    const std::string text = Envelope(command, std::move(r.report)).dump(2) + "\n";
    if (o.out_path.empty()) {
      out << text;
    } else {
      WriteText(o.out_path, text);
    }
    return r.status;
  } catch (const NotClosedLoopSolvable& e) {
    err << "error: " << e.what() << '\n';
    return kExitNegativeVerdict;
  } catch (const ConvergenceFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitNegativeVerdict;
  } catch (const WindowTooLong& e) {
    err << "error: " << e.what() << '\n';
    return kExitNegativeVerdict;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
}

}  // namespace slq
