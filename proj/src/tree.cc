#include "slq/tree.h"

#include "slq/errors.h"

namespace slq {

std::string SignString(std::size_t node, int depth) {
  std::string s(static_cast<std::size_t>(depth), '+');
  for (int i = 0; i < depth; ++i) {
    if ((node >> i) & 1u) s[static_cast<std::size_t>(i)] = '-';
  }
  return s;
}

std::size_t ParseSignString(std::string_view signs) {
  std::size_t node = 0;
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] == '-') {
      node |= std::size_t{1} << i;
    } else if (signs[i] != '+') {
      throw ParseError("sign string '" + std::string(signs) +
                       "' may only contain '+' and '-'");
    }
  }
  return node;
}

void RequireTreeDepth(int depth) {
  if (depth < 0 || depth > kMaxTreeDepth) {
    throw InstanceTooLarge("scenario tree of depth " + std::to_string(depth) +
                           " exceeds the supported depth " +
                           std::to_string(kMaxTreeDepth));
  }
}

}  // namespace slq
