#include "slq/model.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "slq/errors.h"

namespace slq {

using nlohmann::json;

NodeField NodeField::Deterministic(int depth, Vector value) {
  NodeField f;
  f.depth_ = depth;
  f.deterministic_ = true;
  f.values_.push_back(std::move(value));
  return f;
}

NodeField NodeField::Adapted(int depth, std::vector<Vector> values) {
  if (values.size() != NodesAtDepth(depth)) {
    throw InvalidInput("adapted field at depth " + std::to_string(depth) +
                       " needs " + std::to_string(NodesAtDepth(depth)) + " values");
  }
  NodeField f;
  f.depth_ = depth;
  f.deterministic_ = false;
  f.values_ = std::move(values);
  return f;
}

NodeField NodeField::Zero(int depth, int dim) {
  return Deterministic(depth, Vector::Zero(dim));
}

NodeField NodeField::Expanded() const {
  if (!deterministic_) return *this;
  return Adapted(depth_, std::vector<Vector>(NodesAtDepth(depth_), values_[0]));
}

bool NodeField::IsZero() const {
  for (const auto& v : values_) {
    if (!v.isZero(0.0)) return false;
  }
  return true;
}

AdaptedProcess::AdaptedProcess(std::vector<NodeField> fields)
    : fields_(std::move(fields)) {
  for (std::size_t t = 0; t < fields_.size(); ++t) {
    if (fields_[t].depth() != static_cast<int>(t)) {
      throw InvalidInput("adapted process entry " + std::to_string(t) +
                         " must live at depth " + std::to_string(t));
    }
  }
}

AdaptedProcess AdaptedProcess::Zero(int horizon, int dim) {
  std::vector<NodeField> f;
  for (int t = 0; t < horizon; ++t) f.push_back(NodeField::Zero(t, dim));
  return AdaptedProcess(std::move(f));
}

AdaptedProcess AdaptedProcess::Deterministic(const std::vector<Vector>& values) {
  std::vector<NodeField> f;
  for (std::size_t t = 0; t < values.size(); ++t) {
    f.push_back(NodeField::Deterministic(static_cast<int>(t), values[t]));
  }
  return AdaptedProcess(std::move(f));
}

bool AdaptedProcess::deterministic() const {
  for (const auto& f : fields_) {
    if (!f.deterministic()) return false;
  }
  return true;
}

bool AdaptedProcess::IsZero() const {
  for (const auto& f : fields_) {
    if (!f.IsZero()) return false;
  }
  return true;
}

std::string_view ToString(NoiseKind kind) {
  return kind == NoiseKind::kGaussian ? "gaussian" : "rademacher";
}

namespace {

std::string At(const std::string& field, int t) {
  return field + "[" + std::to_string(t) + "]";
}

void CheckShape(const Matrix& m, int rows, int cols, const std::string& where) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InvalidInput(where + ": expected " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", got " + std::to_string(m.rows()) +
                       "x" + std::to_string(m.cols()));
  }
  if (!m.allFinite()) throw InvalidInput(where + ": non-finite entry");
}

void CheckSequence(const std::vector<Matrix>& seq, int n, int rows, int cols,
                   const std::string& name) {
  if (static_cast<int>(seq.size()) != n) {
    throw InvalidInput(name + ": expected " + std::to_string(n) + " entries");
  }
  for (int t = 0; t < n; ++t) CheckShape(seq[static_cast<std::size_t>(t)], rows, cols, At(name, t));
}

void CheckProcess(const AdaptedProcess& p, int horizon, int dim, const std::string& name) {
  if (p.horizon() != horizon) {
    throw InvalidInput(name + ": expected " + std::to_string(horizon) + " entries");
  }
  for (int t = 0; t < horizon; ++t) {
    for (const auto& v : p[t].values()) {
      if (v.size() != dim) throw InvalidInput(At(name, t) + ": wrong dimension");
      if (!v.allFinite()) throw InvalidInput(At(name, t) + ": non-finite entry");
    }
  }
}

}  // namespace

void LQProblem::Validate() const {
  if (horizon < 1) throw InvalidInput("horizon must be >= 1");
  if (state_dim < 1 || control_dim < 1) {
    throw InvalidInput("state_dim and control_dim must be >= 1");
  }
  const int n = state_dim, m = control_dim, N = horizon;
  CheckSequence(A, N, n, n, "A");
  CheckSequence(B, N, n, m, "B");
  CheckSequence(C, N, n, n, "C");
  CheckSequence(D, N, n, m, "D");
  CheckSequence(Q, N, n, n, "Q");
  CheckSequence(S, N, m, n, "S");
  CheckSequence(R, N, m, m, "R");
  CheckShape(H, n, n, "H");
  CheckProcess(b, N, n, "b");
  CheckProcess(sigma, N, n, "sigma");
  CheckProcess(q, N, n, "q");
  CheckProcess(rho, N, m, "rho");
  if (g.depth() != N) throw InvalidInput("g must live at depth N");
  for (const auto& v : g.values()) {
    if (v.size() != n || !v.allFinite()) throw InvalidInput("g: wrong dimension or non-finite");
  }
  if (x0.size() != n || !x0.allFinite()) throw InvalidInput("x0: wrong dimension or non-finite");
}

bool LQProblem::DeterministicDrivers() const {
  return b.deterministic() && sigma.deterministic() && q.deterministic() &&
         rho.deterministic() && g.deterministic();
}

bool LQProblem::Homogeneous() const {
  return b.IsZero() && sigma.IsZero() && q.IsZero() && rho.IsZero() && g.IsZero();
}

// ---------------------------------------------------------------------------
// JSON codecs

json MatrixToJson(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json VectorToJson(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

namespace {

// Nesting depth of arrays: number -> 0, [1,2] -> 1, [[1]] -> 2.
int ArrayDepth(const json& j) {
  int d = 0;
  const json* cur = &j;
  while (cur->is_array()) {
    ++d;
    if (cur->empty()) break;
    cur = &(*cur)[0];
  }
  return d;
}

double Number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(where + ": non-finite entry");
  return v;
}

Vector ParseVector(const json& j, int dim, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array");
  if (static_cast<int>(j.size()) != dim) {
    throw ParseError(where + ": expected length " + std::to_string(dim) + ", got " +
                     std::to_string(j.size()));
  }
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = Number(j[static_cast<std::size_t>(i)], where);
  return v;
}

Matrix ParseMatrix(const json& j, int rows, int cols, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw ParseError(where + ": expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " matrix");
  }
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ParseError(where + ": expected " + std::to_string(rows) + "x" +
                       std::to_string(cols) + " matrix");
    }
    for (int k = 0; k < cols; ++k) m(i, k) = Number(row[static_cast<std::size_t>(k)], where);
  }
  return m;
}

// A time-varying matrix is a list of N matrices; a single matrix is broadcast.
std::vector<Matrix> ParseMatrixSequence(const json& parent, const char* key, int N,
                                        int rows, int cols, const std::string& section) {
  const std::string name = section + "." + key;
  if (!parent.contains(key)) throw ParseError(name + ": missing field");
  const json& j = parent.at(key);
  if (ArrayDepth(j) == 2) {
    return std::vector<Matrix>(static_cast<std::size_t>(N), ParseMatrix(j, rows, cols, name));
  }
  if (!j.is_array() || static_cast<int>(j.size()) != N) {
    throw ParseError(name + ": expected " + std::to_string(N) + " matrices");
  }
  std::vector<Matrix> out;
  for (int t = 0; t < N; ++t) {
    out.push_back(ParseMatrix(j[static_cast<std::size_t>(t)], rows, cols, At(name, t)));
  }
  return out;
}

NodeField ParseTreeLevel(const json& tree, int depth, int dim, const std::string& where) {
  std::vector<Vector> values(NodesAtDepth(depth));
  std::vector<bool> seen(values.size(), false);
  for (auto it = tree.begin(); it != tree.end(); ++it) {
    if (static_cast<int>(it.key().size()) != depth) continue;
    const std::size_t node = ParseSignString(it.key());
    values[node] = ParseVector(it.value(), dim, where + "['" + it.key() + "']");
    seen[node] = true;
  }
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (!seen[k]) {
      throw ParseError(where + ": missing node '" + SignString(k, depth) + "'");
    }
  }
  return NodeField::Adapted(depth, std::move(values));
}

}  // namespace

AdaptedProcess ProcessFromJson(const json& j, int horizon, int dim, const std::string& field) {
  if (j.is_object()) {
    if (!j.contains("tree") || !j.at("tree").is_object()) {
      throw ParseError(field + ": adapted processes need a 'tree' object");
    }
    const json& tree = j.at("tree");
    for (auto it = tree.begin(); it != tree.end(); ++it) {
      if (static_cast<int>(it.key().size()) >= horizon) {
        throw ParseError(field + ": node '" + it.key() + "' is deeper than the horizon");
      }
      ParseSignString(it.key());
    }
    std::vector<NodeField> fields;
    for (int t = 0; t < horizon; ++t) {
      fields.push_back(ParseTreeLevel(tree, t, dim, At(field, t)));
    }
    return AdaptedProcess(std::move(fields));
  }
  if (ArrayDepth(j) == 1) {
    // A single vector is broadcast over the horizon.
    const Vector v = ParseVector(j, dim, field);
    return AdaptedProcess::Deterministic(std::vector<Vector>(static_cast<std::size_t>(horizon), v));
  }
  if (!j.is_array() || static_cast<int>(j.size()) != horizon) {
    throw ParseError(field + ": expected " + std::to_string(horizon) + " vectors");
  }
  std::vector<Vector> values;
  for (int t = 0; t < horizon; ++t) {
    values.push_back(ParseVector(j[static_cast<std::size_t>(t)], dim, At(field, t)));
  }
  return AdaptedProcess::Deterministic(values);
}

json ProcessToJson(const AdaptedProcess& process) {
  if (process.deterministic()) {
    json out = json::array();
    for (int t = 0; t < process.horizon(); ++t) out.push_back(VectorToJson(process.at(t, 0)));
    return out;
  }
  json tree = json::object();
  for (int t = 0; t < process.horizon(); ++t) {
    for (std::size_t k = 0; k < NodesAtDepth(t); ++k) {
      tree[SignString(k, t)] = VectorToJson(process.at(t, k));
    }
  }
  return json{{"tree", tree}};
}

namespace {

AdaptedProcess OptionalProcess(const json& section, const char* key, int horizon, int dim,
                               const std::string& name) {
  if (!section.contains(key) || section.at(key).is_null()) {
    return AdaptedProcess::Zero(horizon, dim);
  }
  return ProcessFromJson(section.at(key), horizon, dim, name);
}

NodeField TerminalFromJson(const json& section, int N, int n) {
  if (!section.contains("g") || section.at("g").is_null()) return NodeField::Zero(N, n);
  const json& j = section.at("g");
  if (j.is_object()) {
    if (!j.contains("tree") || !j.at("tree").is_object()) {
      throw ParseError("cost.g: adapted terminal weight needs a 'tree' object");
    }
    return ParseTreeLevel(j.at("tree"), N, n, "cost.g");
  }
  return NodeField::Deterministic(N, ParseVector(j, n, "cost.g"));
}

json TerminalToJson(const NodeField& g) {
  if (g.deterministic()) return VectorToJson(g.at(0));
  json tree = json::object();
  for (std::size_t k = 0; k < g.stored(); ++k) {
    tree[SignString(k, g.depth())] = VectorToJson(g.at(k));
  }
  return json{{"tree", tree}};
}

json SequenceToJson(const std::vector<Matrix>& seq) {
  json out = json::array();
  for (const auto& m : seq) out.push_back(MatrixToJson(m));
  return out;
}

int PositiveInt(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ParseError(std::string(key) + ": missing field");
  const json& j = doc.at(key);
  if (!j.is_number_integer() || j.get<long long>() < 1) {
    throw ParseError(std::string(key) + ": expected a positive integer");
  }
  return static_cast<int>(j.get<long long>());
}

const json& Section(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_object()) {
    throw ParseError(std::string(key) + ": missing section");
  }
  return doc.at(key);
}

}  // namespace

LQProblem LoadProblem(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("problem document must be an object");

  LQProblem p;
  p.horizon = PositiveInt(doc, "horizon");
  p.state_dim = PositiveInt(doc, "state_dim");
  p.control_dim = PositiveInt(doc, "control_dim");
  const int N = p.horizon, n = p.state_dim, m = p.control_dim;

  const json& dyn = Section(doc, "dynamics");
  p.A = ParseMatrixSequence(dyn, "A", N, n, n, "dynamics");
  p.B = ParseMatrixSequence(dyn, "B", N, n, m, "dynamics");
  p.C = ParseMatrixSequence(dyn, "C", N, n, n, "dynamics");
  p.D = ParseMatrixSequence(dyn, "D", N, n, m, "dynamics");
  p.b = OptionalProcess(dyn, "b", N, n, "dynamics.b");
  p.sigma = OptionalProcess(dyn, "sigma", N, n, "dynamics.sigma");

  const json& cost = Section(doc, "cost");
  p.Q = ParseMatrixSequence(cost, "Q", N, n, n, "cost");
  p.S = ParseMatrixSequence(cost, "S", N, m, n, "cost");
  p.R = ParseMatrixSequence(cost, "R", N, m, m, "cost");
  for (auto& q : p.Q) q = Symmetrized(q);
  for (auto& r : p.R) r = Symmetrized(r);
  if (!cost.contains("H")) throw ParseError("cost.H: missing field");
  p.H = Symmetrized(ParseMatrix(cost.at("H"), n, n, "cost.H"));
  p.q = OptionalProcess(cost, "q", N, n, "cost.q");
  p.rho = OptionalProcess(cost, "rho", N, m, "cost.rho");
  p.g = TerminalFromJson(cost, N, n);

  if (!doc.contains("x0")) throw ParseError("x0: missing field");
  p.x0 = ParseVector(doc.at("x0"), n, "x0");

  if (doc.contains("noise")) {
    const json& noise = doc.at("noise");
    if (!noise.is_object()) throw ParseError("noise: expected an object");
    const std::string kind = noise.value("kind", std::string("rademacher"));
    if (kind == "gaussian") {
      p.noise.kind = NoiseKind::kGaussian;
    } else if (kind == "rademacher") {
      p.noise.kind = NoiseKind::kRademacher;
    } else {
      throw ParseError("noise.kind: expected 'gaussian' or 'rademacher'");
    }
    if (noise.contains("seed")) {
      if (!noise.at("seed").is_number_unsigned() && !noise.at("seed").is_number_integer()) {
        throw ParseError("noise.seed: expected an unsigned integer");
      }
      p.noise.seed = noise.at("seed").get<std::uint64_t>();
    }
  }

  try {
    p.Validate();
  } catch (const InvalidInput& e) {
    throw ParseError(e.what());
  }
  return p;
}

LQProblem LoadProblemFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open problem file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return LoadProblem(buf.str());
}

json ProblemToJson(const LQProblem& p) {
  json doc;
  doc["horizon"] = p.horizon;
  doc["state_dim"] = p.state_dim;
  doc["control_dim"] = p.control_dim;
  doc["dynamics"] = {{"A", SequenceToJson(p.A)},
                     {"B", SequenceToJson(p.B)},
                     {"C", SequenceToJson(p.C)},
                     {"D", SequenceToJson(p.D)},
                     {"b", ProcessToJson(p.b)},
                     {"sigma", ProcessToJson(p.sigma)}};
  doc["cost"] = {{"Q", SequenceToJson(p.Q)},
                 {"S", SequenceToJson(p.S)},
                 {"R", SequenceToJson(p.R)},
                 {"H", MatrixToJson(p.H)},
                 {"q", ProcessToJson(p.q)},
                 {"rho", ProcessToJson(p.rho)},
                 {"g", TerminalToJson(p.g)}};
  doc["x0"] = VectorToJson(p.x0);
  doc["noise"] = {{"kind", std::string(ToString(p.noise.kind))}, {"seed", p.noise.seed}};
  return doc;
}

std::string SerializeProblem(const LQProblem& p) { return ProblemToJson(p).dump(2); }

LQProblem HomogeneousOf(const LQProblem& p) {
  LQProblem h = p;
  h.b = AdaptedProcess::Zero(p.horizon, p.state_dim);
  h.sigma = AdaptedProcess::Zero(p.horizon, p.state_dim);
  h.q = AdaptedProcess::Zero(p.horizon, p.state_dim);
  h.rho = AdaptedProcess::Zero(p.horizon, p.control_dim);
  h.g = NodeField::Zero(p.horizon, p.state_dim);
  return h;
}

json StrategyToJson(const Strategy& s) {
  json k = json::array();
  for (const auto& m : s.K) k.push_back(MatrixToJson(m));
  return json{{"K", k}, {"v", ProcessToJson(s.v)}};
}

Strategy StrategyFromJson(const json& j, int state_dim, int control_dim) {
  if (!j.is_object() || !j.contains("K")) throw ParseError("strategy: missing field K");
  const json& k = j.at("K");
  if (!k.is_array() || k.empty()) throw ParseError("strategy.K: expected a list of gains");
  Strategy s;
  const int window = static_cast<int>(k.size());
  for (int t = 0; t < window; ++t) {
    s.K.push_back(ParseMatrix(k[static_cast<std::size_t>(t)], control_dim, state_dim,
                              At("strategy.K", t)));
  }
  if (j.contains("v") && !j.at("v").is_null()) {
    s.v = ProcessFromJson(j.at("v"), window, control_dim, "strategy.v");
  } else {
    s.v = AdaptedProcess::Zero(window, control_dim);
  }
  return s;
}

}  // namespace slq
