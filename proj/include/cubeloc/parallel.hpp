#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

namespace cubeloc {

inline constexpr std::uint64_t kPathChunk = 256;

// Runs per_range(state, lo, hi) over num_paths indices split into fixed-size
// chunks; each chunk accumulates into its own state and chunks are merged in
// index order, so the result is bitwise independent of the thread count
// (including threads == 1, which runs the same chunked schedule serially).
template <class State, class RangeFn, class MergeFn>
State parallel_path_ranges(std::uint64_t num_paths, int threads, const State& init,
                           RangeFn per_range, MergeFn merge) {
    const std::uint64_t nchunks = (num_paths + kPathChunk - 1) / kPathChunk;
    State out = init;
    if (nchunks == 0) return out;

    auto run_chunk = [&](std::uint64_t c) {
        State local = init;
        const std::uint64_t lo = c * kPathChunk;
        const std::uint64_t hi = std::min(num_paths, lo + kPathChunk);
        per_range(local, lo, hi);
        return local;
    };

    if (threads <= 1 || nchunks == 1) {
        for (std::uint64_t c = 0; c < nchunks; c++) {
            State local = run_chunk(c);
            merge(out, local);
        }
        return out;
    }

    std::vector<std::optional<State>> slots(nchunks);
    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::uint64_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            slots[c] = run_chunk(c);
        }
    };
    std::vector<std::thread> pool;
    const int nw = static_cast<int>(std::min<std::uint64_t>(threads, nchunks));
    pool.reserve(nw);
    for (int i = 0; i < nw; i++) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    for (std::uint64_t c = 0; c < nchunks; c++) merge(out, *slots[c]);
    return out;
}

// Per-path convenience wrapper over the same chunked schedule.
template <class State, class PathFn, class MergeFn>
State parallel_paths(std::uint64_t num_paths, int threads, const State& init, PathFn per_path,
                     MergeFn merge) {
    return parallel_path_ranges(
        num_paths, threads, init,
        [&](State& st, std::uint64_t lo, std::uint64_t hi) {
            for (std::uint64_t p = lo; p < hi; p++) per_path(st, p);
        },
        merge);
}

}  // namespace cubeloc
