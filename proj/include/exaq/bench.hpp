#pragma once

#include <cstdint>
#include <string>

#include "exaq/softmax.hpp"

namespace exaq {

struct BenchReport {
  std::string kernel;
  std::size_t rows = 0;
  std::size_t cols = 0;
  double ns_per_row = 0.0;
  double speedup_vs_reference = 1.0;
  std::uint64_t exp_calls = 0;    // per full pass over the tensor
  std::uint64_t accum_iters = 0;
  std::uint64_t lut_lookups = 0;
  std::size_t repetitions = 0;
  std::size_t warmup = 0;
};

struct BenchConfig {
  std::size_t rows = 1024;
  std::size_t cols = 4096;
  int bits = 2;
  int pack_width = 0;  // 0 = default for bits
  std::size_t reps = 10;
  std::size_t warmup = 2;
  double sigma = 2.0;
  std::uint64_t seed = 1;
};

struct BenchComparison {
  BenchReport reference;
  BenchReport exaq;
  QuantSpec spec;
};

/// Times both kernels single-threaded on a Gaussian tensor: `warmup` untimed
/// passes, then `reps` timed passes, reporting the median pass. Each row is
/// written to a row-sized scratch buffer. Throws Error{invalid_argument} for
/// zero sizes or reps < 3.
BenchComparison run_bench(const BenchConfig& config);

}  // namespace exaq
