#pragma once

#include <cstddef>
#include <functional>

namespace snvt {

// Thread cap from SNVT_THREADS. 0 or unset means auto (hardware threads);
// anything else is taken literally.
std::size_t thread_budget();

// Runs fn(0..n-1), splitting across threads when the budget allows and the
// work is large enough. Results must be written to per-index slots; the
// caller does any cross-index reduction afterwards, in index order, so the
// outcome does not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace snvt
