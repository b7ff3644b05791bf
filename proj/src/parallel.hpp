#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace rnv::detail {

// Runs body(begin, end) over fixed-size chunks of [0, n) on a small thread
// pool. Chunk boundaries depend only on n and chunk, never on the machine, so
// per-chunk reductions combined in chunk order stay deterministic.
template <typename Body>
void parallel_chunks(std::size_t n, std::size_t chunk, Body&& body) {
    if (n == 0) return;
    chunk = std::max<std::size_t>(chunk, 1);
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    const std::size_t hw = std::max(1U, std::thread::hardware_concurrency());
    const std::size_t n_threads = std::min(hw, n_chunks);
    auto run_chunk = [&](std::size_t c) { body(c * chunk, std::min(n, (c + 1) * chunk)); };
    if (n_threads <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
        return;
    }
    std::vector<std::exception_ptr> errors(n_threads);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t c = t; c < n_chunks; c += n_threads) run_chunk(c);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace rnv::detail
