#ifndef MAPDEN_PARALLEL_HPP
#define MAPDEN_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace mapden {

/// Worker cap: min(hardware_concurrency, MAPDENOISE_THREADS). Values < 1 in
/// the env var are treated as 1.
std::size_t max_threads();

/// Runs fn over contiguous chunks of [0, n). Each index is processed by
/// exactly one worker and chunk contents are iterated in order, so results
/// must be written to disjoint slots; under that contract the output is
/// identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace mapden

#endif
