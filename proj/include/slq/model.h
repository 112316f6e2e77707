#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "slq/matnum.h"
#include "slq/tree.h"

namespace slq {

/// Values of one vector-valued quantity at a single depth of the noise tree.
///
/// A deterministic field stores one value shared by every node; an adapted
/// field stores 2^depth values, one per noise history.
class NodeField {
 public:
  NodeField() = default;

  static NodeField Deterministic(int depth, Vector value);
  static NodeField Adapted(int depth, std::vector<Vector> values);
  static NodeField Zero(int depth, int dim);

  int depth() const { return depth_; }
  int dim() const { return values_.empty() ? 0 : static_cast<int>(values_[0].size()); }
  bool deterministic() const { return deterministic_; }

  /// Value at `node`; any node index is accepted for deterministic fields.
  const Vector& at(std::size_t node) const {
    return values_[deterministic_ ? 0 : node];
  }
  Vector& at(std::size_t node) { return values_[deterministic_ ? 0 : node]; }

  /// Number of stored values (1 or 2^depth).
  std::size_t stored() const { return values_.size(); }
  const std::vector<Vector>& values() const { return values_; }

  /// Same field stored node by node.
  NodeField Expanded() const;
  bool IsZero() const;

 private:
  int depth_ = 0;
  bool deterministic_ = true;
  std::vector<Vector> values_;
};

/// An F_{t-1}-adapted process on t = 0..horizon-1: entry t lives at depth t.
class AdaptedProcess {
 public:
  AdaptedProcess() = default;
  explicit AdaptedProcess(std::vector<NodeField> fields);

  static AdaptedProcess Zero(int horizon, int dim);
  static AdaptedProcess Deterministic(const std::vector<Vector>& values);

  int horizon() const { return static_cast<int>(fields_.size()); }
  int dim() const { return fields_.empty() ? 0 : fields_[0].dim(); }
  bool deterministic() const;
  bool IsZero() const;

  const NodeField& operator[](int t) const { return fields_[static_cast<std::size_t>(t)]; }
  NodeField& operator[](int t) { return fields_[static_cast<std::size_t>(t)]; }
  const Vector& at(int t, std::size_t node) const { return (*this)[t].at(node); }

  const std::vector<NodeField>& fields() const { return fields_; }

 private:
  std::vector<NodeField> fields_;
};

enum class NoiseKind { kGaussian, kRademacher };

/// Law of the scalar noise w_t (i.i.d., mean 0, variance 1) and the seed used
/// by Monte-Carlo routines.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::kRademacher;
  std::uint64_t seed = 0;
};

std::string_view ToString(NoiseKind kind);

/// Finite-horizon stochastic LQ problem
///   x_{t+1} = A_t x_t + B_t u_t + b_t + (C_t x_t + D_t u_t + sigma_t) w_t,
///   J = E[ sum_t x'Qx + 2u'Sx + u'Ru + 2x'q + 2u'rho  +  x_N'H x_N + 2x_N'g ].
/// No definiteness is required of Q, R or H.
struct LQProblem {
  int horizon = 0;
  int state_dim = 0;
  int control_dim = 0;

  std::vector<Matrix> A, B, C, D;
  std::vector<Matrix> Q, S, R;
  Matrix H;

  AdaptedProcess b, sigma, q, rho;
  /// Terminal linear weight, F_{N-1}-measurable: lives at depth `horizon`.
  NodeField g;

  Vector x0;
  NoiseSpec noise;

  /// Throws InvalidInput on inconsistent dimensions or non-finite entries.
  void Validate() const;
  /// True when every driver (b, sigma, q, rho, g) is deterministic.
  bool DeterministicDrivers() const;
  /// True when every driver is identically zero.
  bool Homogeneous() const;
};

/// Feedback pair u_t = K_t x_t + v_t on the window {0..window_end}.
struct Strategy {
  std::vector<Matrix> K;
  AdaptedProcess v;

  int window_end() const { return static_cast<int>(K.size()) - 1; }
};

/// Parses a problem document; symmetric weights are symmetrized, dimensions are
/// cross-checked, and missing optional drivers default to zero.
LQProblem LoadProblem(std::string_view json_text);
LQProblem LoadProblemFile(const std::filesystem::path& path);

nlohmann::json ProblemToJson(const LQProblem& p);
std::string SerializeProblem(const LQProblem& p);

/// The problem with b = sigma = q = rho = g = 0 and all other data kept.
LQProblem HomogeneousOf(const LQProblem& p);

/// JSON codecs for processes and strategies, shared with report writers.
/// A deterministic process is written as a list of vectors; an adapted one as
/// {"tree": {"<sign-string>": [...]}}.
nlohmann::json ProcessToJson(const AdaptedProcess& process);
AdaptedProcess ProcessFromJson(const nlohmann::json& j, int horizon, int dim,
                               const std::string& field);
nlohmann::json StrategyToJson(const Strategy& s);
Strategy StrategyFromJson(const nlohmann::json& j, int state_dim, int control_dim);
nlohmann::json MatrixToJson(const Matrix& m);
nlohmann::json VectorToJson(const Vector& v);

}  // namespace slq
