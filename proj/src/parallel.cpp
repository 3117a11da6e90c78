#include "flowstrain/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace flowstrain::parallel {

namespace {

std::size_t initial_thread_count() {
    if (const char *env = std::getenv("FLOWSTRAIN_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception &) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<std::size_t> &cap() {
    static std::atomic<std::size_t> value{initial_thread_count()};
    return value;
}

double pairwise(const double *v, std::size_t n) {
    if (n == 0) return 0.0;
    if (n == 1) return v[0];
    const std::size_t half = n / 2;
    return pairwise(v, half) + pairwise(v + half, n - half);
}

}  // namespace

std::size_t thread_count() { return cap().load(); }

void set_thread_count(std::size_t n) { cap().store(std::max<std::size_t>(1, n)); }

void for_chunks(std::size_t n, std::size_t grain,
                const std::function<void(std::size_t, std::size_t)> &fn) {
    if (n == 0) return;
    grain = std::max<std::size_t>(1, grain);
    const std::size_t chunks = (n + grain - 1) / grain;
    const std::size_t workers = std::min(thread_count(), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) fn(c * grain, std::min(n, (c + 1) * grain));
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            try {
                fn(c * grain, std::min(n, (c + 1) * grain));
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto &t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

double pairwise_sum(const std::vector<double> &values) { return pairwise(values.data(), values.size()); }

}  // namespace flowstrain::parallel
