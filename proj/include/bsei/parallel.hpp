#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bsei {

/// Number of fixed reduction blocks. Independent of the thread count so that
/// reductions are summed in the same order on every machine.
inline constexpr std::size_t kReductionBlocks = 64;

/// Applies `fn(i)` for every i in [0, n). Iterations must be independent.
/// The first exception thrown by any iteration is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
#ifdef _OPENMP
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(bsei_parallel_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
#else
    for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

/// Splits [0, n) into kReductionBlocks contiguous blocks and calls
/// `fn(block, begin, end)` for each, possibly concurrently.
template <typename Fn>
void parallel_blocks(std::size_t n, Fn&& fn) {
    parallel_for(kReductionBlocks, [&](std::size_t b) {
        const std::size_t begin = n * b / kReductionBlocks;
        const std::size_t end = n * (b + 1) / kReductionBlocks;
        fn(b, begin, end);
    });
}

/// Applies the BSEI_THREADS environment variable, if set, to the OpenMP runtime.
inline void configure_threads_from_env() {
#ifdef _OPENMP
    if (const char* v = std::getenv("BSEI_THREADS")) {
        const int n = std::atoi(v);
        if (n > 0) omp_set_num_threads(n);
    }
#endif
}

}  // namespace bsei
