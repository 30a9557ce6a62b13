#pragma once

#include <cstddef>
#include <functional>

namespace pmem {

/// Worker count: hardware concurrency, capped by the PMEM_THREADS env var.
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index is handled exactly once and the
/// body must only write state owned by that index, so results do not depend
/// on scheduling. Nested calls run serially on the calling worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace pmem
