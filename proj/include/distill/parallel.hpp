// Minimal fork-join helper. Work items must be independent; callers reduce
// results in index order so output never depends on the thread count.
#pragma once

#include <cstddef>
#include <functional>

namespace distill {

// Hardware concurrency capped by DISTILL_TSAD_THREADS when set.
std::size_t thread_count();

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace distill
