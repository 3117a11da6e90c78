// parallel.hpp - deterministic data-parallel helpers.
//
// Work is always split into chunks whose boundaries depend only on the problem
// size and grain, never on the worker count. Reductions combine per-chunk
// partials pairwise in index order, so results are bit-identical for any
// thread count.
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace flowstrain::parallel {

// Worker cap. Initialised from FLOWSTRAIN_THREADS when set, else the hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Calls fn(begin, end) for each chunk of [0, n) of size `grain` (the last may be short).
void for_chunks(std::size_t n, std::size_t grain,
                const std::function<void(std::size_t, std::size_t)> &fn);

// Pairwise sum of `values` in index order.
double pairwise_sum(const std::vector<double> &values);

inline constexpr std::size_t kReduceGrain = 4096;

// Sum of term(i) for i in [0, n), reduced in a fixed order.
template <class Term>
double deterministic_sum(std::size_t n, Term &&term) {
    const std::size_t chunks = (n + kReduceGrain - 1) / kReduceGrain;
    std::vector<double> partial(chunks, 0.0);
    for_chunks(n, kReduceGrain, [&](std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t i = b; i < e; ++i) acc += term(i);
        partial[b / kReduceGrain] = acc;
    });
    return pairwise_sum(partial);
}

// RAII override of the worker cap, restored on scope exit.
class ScopedThreadCount {
  public:
    explicit ScopedThreadCount(std::size_t n) : saved_(thread_count()) { set_thread_count(n); }
    ~ScopedThreadCount() { set_thread_count(saved_); }
    ScopedThreadCount(const ScopedThreadCount &) = delete;
    ScopedThreadCount &operator=(const ScopedThreadCount &) = delete;

  private:
    std::size_t saved_;
};

}  // namespace flowstrain::parallel
