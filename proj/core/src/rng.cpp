#include "lssm/rng.hpp"

// Header-only; this translation unit only anchors the target's source list.

namespace lssm {
static_assert(splitmix64(0) != 0, "splitmix64 sanity");
} // namespace lssm
