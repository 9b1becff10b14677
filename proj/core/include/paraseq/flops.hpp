#pragma once

#include <cstdint>

namespace paraseq::attnflops {

// Thread-local multiply-accumulate counter for the attention score/mix
// matmuls. Off by default; enable with a Scope to measure a forward pass.
inline thread_local std::uint64_t counter = 0;
inline thread_local bool enabled = false;

inline void add(std::uint64_t n) {
  if (enabled) counter += n;
}

struct Scope {
  Scope() {
    enabled = true;
    counter = 0;
  }
  ~Scope() { enabled = false; }
  std::uint64_t value() const { return counter; }
};

}  // namespace paraseq::attnflops
