#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace corelw {

// Process-wide worker cap, set once by the CLI --threads flag.
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Runs fn(i) for i in [0, n). Each index writes only its own slot, so the
// result is independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Runs fn(block, lo, hi) over a fixed number of index blocks. The block
// structure does not depend on the worker count, so per-block partial
// results can be reduced in block order to give a thread-count-invariant
// floating point sum.
inline constexpr std::size_t kReductionBlocks = 64;
void parallel_blocks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace corelw
