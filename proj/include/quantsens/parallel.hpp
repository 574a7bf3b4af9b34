#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace qs {

struct SeedSpec {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

// Rows per chunk. Sub-seeds are derived per chunk, so results do not depend
// on how many threads process the chunks.
inline constexpr std::size_t kChunkRows = 8192;

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(const SeedSpec& s, std::uint64_t chunk);
SeedSpec substream(const SeedSpec& s, std::uint64_t tag);

// Open-interval uniforms on top of mt19937_64.
class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed) : engine_(seed) {}
    double next();
    std::uint64_t next_index(std::uint64_t n);  // uniform in [0, n)

private:
    std::mt19937_64 engine_;
};

// Thread cap. 0 restores the default (QUANTSENS_THREADS or hardware).
void set_max_threads(std::size_t n);
std::size_t max_threads();

// Calls fn(task) for task in [0, n_tasks) on up to max_threads() threads.
// The first exception thrown by any task is rethrown after all threads join.
void parallel_tasks(std::size_t n_tasks, const std::function<void(std::size_t)>& fn);

// Splits [0, n) into kChunkRows chunks: fn(chunk_index, begin, end).
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace qs
