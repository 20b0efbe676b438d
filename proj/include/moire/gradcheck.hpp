#pragma once

// Named finite-difference checks over every differentiable primitive, every
// block and the end-to-end network, shared by the CLI and the acceptance run.

#include <string>
#include <vector>

#include "moire/autograd.hpp"

namespace moire::gradcheck {

enum class Kind { Primitive, Block, Network };

struct Result {
  std::string name;
  Kind kind = Kind::Primitive;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  std::size_t coords = 0;

  bool passed() const noexcept { return max_rel_error < threshold; }
};

// Check names in run order.
const std::vector<std::string>& names();

// 64-bit mode compares backward() with finite differences; thresholds are
// 1e-3 for primitives and blocks and 1e-2 for the network on a 16x16 input.
// 32-bit mode compares the float backward pass with the double one on the
// same inputs: max |g32 - g64| / max |g64| over every checked tensor,
// threshold 1e-3.
Result run(const std::string& name, bool f64);
// Every check, or only `name` when non-empty. Throws BadConfig on unknown names.
std::vector<Result> run_all(const std::string& name, bool f64);

}  // namespace moire::gradcheck
