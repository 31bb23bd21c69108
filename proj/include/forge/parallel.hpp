#pragma once

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace forge {

// Every batch loop in the pipeline funnels through these two entry points.
// Work is pure per index and results land in an index-addressed vector, so
// the parallel kernel is observationally identical to the serial reference;
// tests and the bench tool compare them directly.

// Serial reference implementation.
template <typename Fn>
auto serial_map(std::size_t n, Fn&& fn)
    -> std::vector<decltype(fn(std::size_t{0}))> {
    std::vector<decltype(fn(std::size_t{0}))> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
}

// OpenMP kernel. workers <= 0 uses the runtime default; workers == 1 and
// builds without OpenMP fall back to the serial reference.
template <typename Fn>
auto parallel_map(std::size_t n, int workers, Fn&& fn)
    -> std::vector<decltype(fn(std::size_t{0}))> {
#ifdef _OPENMP
    if (workers == 1) return serial_map(n, fn);
    std::vector<decltype(fn(std::size_t{0}))> out(n);
    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    }
    return out;
#else
    (void)workers;
    return serial_map(n, fn);
#endif
}

inline int hardware_workers() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace forge
