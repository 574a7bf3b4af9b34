#include "quantsens/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace qs {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(const SeedSpec& s, std::uint64_t chunk) {
    return splitmix64(splitmix64(splitmix64(s.seed) ^ s.stream) + chunk);
}

SeedSpec substream(const SeedSpec& s, std::uint64_t tag) {
    return {s.seed, splitmix64(s.stream * 0x100000001b3ULL + tag + 1)};
}

double UniformStream::next() {
    // 53 random bits, shifted off zero: values lie in (0, 1).
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t UniformStream::next_index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

namespace {

std::atomic<std::size_t> g_thread_cap{0};

std::size_t default_threads() {
    if (const char* env = std::getenv("QUANTSENS_THREADS")) {
        try {
            long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

void set_max_threads(std::size_t n) { g_thread_cap = n; }

std::size_t max_threads() {
    std::size_t cap = g_thread_cap.load();
    return cap > 0 ? cap : default_threads();
}

void parallel_tasks(std::size_t n_tasks, const std::function<void(std::size_t)>& fn) {
    std::size_t n_threads = std::min(max_threads(), n_tasks);
    if (n_threads <= 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) fn(t);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t t = next.fetch_add(1);
            if (t >= n_tasks) return;
            try {
                fn(t);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next = n_tasks;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_threads - 1);
    for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    std::size_t n_chunks = (n + kChunkRows - 1) / kChunkRows;
    parallel_tasks(n_chunks, [&](std::size_t c) {
        std::size_t b = c * kChunkRows;
        fn(c, b, std::min(n, b + kChunkRows));
    });
}

}  // namespace qs
