#pragma once

#include <cstddef>
#include <functional>

// Thread helpers.  The worker count defaults to the hardware concurrency and
// can be overridden with the LSS_THREADS environment variable (>=1).

namespace lssm {

int max_threads();

// Runs body(i) for i in [0, n), statically chunked over max_threads() workers
// (or `threads` if positive).  Exceptions thrown by the body are rethrown on
// the caller's thread after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int threads = 0);

} // namespace lssm
