#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace ohtlab {

using Engine = std::mt19937_64;

/// Pulses are grouped in fixed-size blocks; each block owns one PRNG stream.
inline constexpr std::size_t kStreamBlock = 256;

/// Mixes (master, counter) into an independent stream seed.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t counter);

inline Engine make_stream(std::uint64_t master, std::uint64_t counter)
{
    return Engine(stream_seed(master, counter));
}

/// Upper bound on worker threads (0 = hardware concurrency). Never changes results.
void set_max_threads(int n);
int max_threads();

/// Calls body(begin, end, chunk_index) over [0, n) split into chunks of `chunk`
/// items. Chunks run concurrently; the chunking itself does not depend on the
/// thread count.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunk, Body&& body);

namespace detail {
void run_chunks(std::size_t n_chunks, void* ctx, void (*fn)(void*, std::size_t));
}

template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunk, Body&& body)
{
    if (n == 0)
        return;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    struct Ctx {
        Body* body;
        std::size_t n, chunk;
    } ctx{&body, n, chunk};
    detail::run_chunks(n_chunks, &ctx, [](void* p, std::size_t c) {
        auto* x = static_cast<Ctx*>(p);
        const std::size_t b = c * x->chunk;
        const std::size_t e = b + x->chunk < x->n ? b + x->chunk : x->n;
        (*x->body)(b, e, c);
    });
}

} // namespace ohtlab
