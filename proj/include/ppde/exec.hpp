#pragma once

#include <cstdint>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ppde {

// Every hot kernel comes in two flavors: a serial reference implementation and
// an OpenMP version parallelized across Monte Carlo paths. Parallel loops may
// only write to per-iteration slots; cross-path reductions always run in fixed
// path order. Under that discipline both policies produce bit-identical
// results for a given seed, which the test suite asserts.
enum class ExecPolicy { serial, parallel };

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// for i in [0, n): body(i). Slot-writes only inside body. Exceptions thrown by
// the body are captured and rethrown after the loop (the first one wins), so
// throwing preconditions behave the same under both policies.
template <class F>
void for_each_index(ExecPolicy exec, std::int64_t n, F&& body) {
#ifdef _OPENMP
    if (exec == ExecPolicy::parallel) {
        std::exception_ptr first;
#pragma omp parallel for schedule(static) shared(first)
        for (std::int64_t i = 0; i < n; ++i) {
            try {
                body(i);
            } catch (...) {
#pragma omp critical(ppde_for_each_index_error)
                if (!first) first = std::current_exception();
            }
        }
        if (first) std::rethrow_exception(first);
        return;
    }
#else
    (void)exec;
#endif
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace ppde
