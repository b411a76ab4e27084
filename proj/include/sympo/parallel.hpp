#pragma once

#include <cstddef>
#include <functional>

// Deterministic chunked parallelism. Work on [0, n) is split into
// fixed-size chunks; workers grab chunk indices from an atomic counter and
// the caller combines per-chunk results in ascending chunk order. Because
// the chunk boundaries and the reduction order are independent of the
// worker count, results are bit-identical for any SYMPO_THREADS value.

namespace sympo::parallel {

// Thread cap: SYMPO_THREADS when set (>=1), else hardware concurrency.
int thread_cap();

// Test hook; 0 restores the environment-driven default.
void set_thread_cap(int cap);

std::size_t chunk_count(std::size_t n, std::size_t chunk_size);

// Runs fn(chunk_index, begin, end) for every chunk, possibly concurrently.
// fn must only touch state owned by its chunk index.
void for_chunks(std::size_t n, std::size_t chunk_size,
                const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace sympo::parallel
