#include "ohtlab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace ohtlab {

namespace {
std::atomic<int> g_max_threads{0};

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
} // namespace

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t counter)
{
    return splitmix64(splitmix64(master) ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

void set_max_threads(int n) { g_max_threads = n < 0 ? 0 : n; }

int max_threads()
{
    int n = g_max_threads.load();
    if (n == 0)
        n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return n;
}

namespace detail {

void run_chunks(std::size_t n_chunks, void* ctx, void (*fn)(void*, std::size_t))
{
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n_chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c)
            fn(ctx, c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t c = next++; c < n_chunks; c = next++)
                    fn(ctx, c);
            } catch (...) {
                errors[w] = std::current_exception();
                next = n_chunks;
            }
        });
    }
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace detail
} // namespace ohtlab
