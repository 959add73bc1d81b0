#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace epigen
{

/// Worker count: hardware concurrency capped by the EPI_THREADS environment variable.
std::size_t worker_count();

/// Runs task(i) for i in [0, n) on up to worker_count() threads. Tasks must not share
/// mutable state; results are written by index so the outcome is independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Fn&& fn)
{
    std::vector<T> out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = fn(i); });
    return out;
}

} // namespace epigen
