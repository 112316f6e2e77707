#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace slq {

// Nodes of the binary +/-1 noise tree. A node at depth t is the history
// w_0..w_{t-1}; it is stored as an index whose bit i is set iff w_i = -1.
// Children of node k at depth t are k (w_t = +1) and k | 2^t (w_t = -1), so a
// node's parent is obtained by masking off its top bit.

/// Deepest tree any exact-expectation routine will materialize.
inline constexpr int kMaxTreeDepth = 24;

inline std::size_t NodesAtDepth(int depth) { return std::size_t{1} << depth; }

inline std::size_t Child(std::size_t node, int depth, bool minus) {
  return minus ? (node | (std::size_t{1} << depth)) : node;
}

inline std::size_t Ancestor(std::size_t node, int depth) {
  return node & ((std::size_t{1} << depth) - 1);
}

/// Noise value w_i along the history encoded by `node`.
inline double NoiseAt(std::size_t node, int i) {
  return ((node >> i) & 1u) ? -1.0 : 1.0;
}

/// Probability weight of a single node at `depth`.
inline double NodeWeight(int depth) {
  return 1.0 / static_cast<double>(NodesAtDepth(depth));
}

std::string SignString(std::size_t node, int depth);

/// Parses a string over {'+','-'}; throws ParseError on other characters.
std::size_t ParseSignString(std::string_view signs);

/// Shape of the full scenario tree of depth N.
struct ScenarioTree {
  int depth = 0;
  std::size_t total_nodes() const { return 2 * NodesAtDepth(depth) - 1; }
  double weight(int t) const { return NodeWeight(t); }
};

/// Throws InstanceTooLarge when a depth-`depth` tree would be materialized.
void RequireTreeDepth(int depth);

}  // namespace slq
