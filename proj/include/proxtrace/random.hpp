// Copyright 2026 The Proxtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reproducible random streams and a deterministic parallel loop.
//
// Stream-splitting rule: stream i of base seed s is a std::mt19937_64 seeded
// with SplitMix64(s ^ SplitMix64(i)). Monte Carlo loops draw trial t from
// stream t / kTrialsPerStream, so results do not depend on the thread count.

#ifndef PROXTRACE_RANDOM_HPP_
#define PROXTRACE_RANDOM_HPP_

#include <algorithm>
#include <cstdint>
#include <exception>
#include <random>
#include <thread>
#include <vector>

namespace proxtrace {

inline constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 RandomStream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(SplitMix64(seed ^ SplitMix64(index)));
}

inline constexpr std::int64_t kTrialsPerStream = 1 << 14;

inline int WorkerCount() {
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Runs body(block) for block in [0, blocks) on up to WorkerCount() threads.
// Blocks are claimed in a fixed stride per worker; body must only write to
// per-block state.
template <typename Body>
void ParallelBlocks(std::int64_t blocks, Body&& body) {
  const int workers = static_cast<int>(std::min<std::int64_t>(WorkerCount(), blocks));
  if (workers <= 1) {
    for (std::int64_t b = 0; b < blocks; ++b) body(b);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::int64_t b = w; b < blocks; b += workers) body(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace proxtrace

#endif  // PROXTRACE_RANDOM_HPP_
