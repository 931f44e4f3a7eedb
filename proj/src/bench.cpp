#include "exaq/bench.hpp"

#include <algorithm>
#include <chrono>
#include <vector>

#include "exaq/clip_optimizer.hpp"
#include "exaq/error.hpp"

namespace exaq {

namespace {

template <typename Pass>
double median_pass_ns(std::size_t warmup, std::size_t reps, Pass pass) {
  using clock = std::chrono::steady_clock;
  for (std::size_t i = 0; i < warmup; ++i) pass();
  std::vector<double> times;
  times.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    const auto t0 = clock::now();
    pass();
    const auto t1 = clock::now();
    times.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  return times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

QuantSpec bench_spec(const TensorF32& input, int bits) {
  // Calibrate on a slice of the benchmark tensor itself.
  const std::size_t calib_rows = std::min<std::size_t>(input.rows(), 16);
  std::vector<TensorF32> calib;
  for (std::size_t r = 0; r < calib_rows; ++r) {
    const auto row = input.row(r);
    calib.emplace_back(std::vector<std::uint64_t>{row.size()}, std::vector<float>(row.begin(), row.end()));
  }
  const auto stats = calibrate(calib);
  const auto model = builtin_clip_model(bits);
  return make_spec_exaq(stats, bits, model ? *model : fit_linear_model(bits, 0.9, 3.4, 26));
}

}  // namespace

BenchComparison run_bench(const BenchConfig& config) {
  if (config.rows == 0 || config.cols == 0) {
    throw Error(ErrorCode::invalid_argument, "benchmark needs rows > 0 and cols > 0");
  }
  if (config.reps < 3) throw Error(ErrorCode::invalid_argument, "benchmark needs reps >= 3");

  const auto input = gen_gaussian_tensor(config.rows, config.cols, 0.0, config.sigma, config.seed);
  const int pack = config.pack_width > 0 ? config.pack_width : default_pack_width(config.bits);
  const auto bundle = build_lut_bundle(bench_spec(input, config.bits), pack);

  std::vector<double> scratch(config.cols);
  SoftmaxWorkspace ws;
  ws.codes.reserve(config.cols);
  volatile double sink = 0.0;
  KernelCounters ref_counts;
  KernelCounters exaq_counts;

  const double ref_ns = median_pass_ns(config.warmup, config.reps, [&] {
    KernelCounters c;
    double check = 0.0;
    for (std::size_t r = 0; r < config.rows; ++r) {
      const auto o = softmax_reference_into(input.row(r), scratch);
      c += o.counters;
      check += o.denom + scratch[0];
    }
    ref_counts = c;
    sink = sink + check;
  });
  const double exaq_ns = median_pass_ns(config.warmup, config.reps, [&] {
    KernelCounters c;
    double check = 0.0;
    for (std::size_t r = 0; r < config.rows; ++r) {
      const auto o = softmax_exaq_into(input.row(r), bundle.spec, bundle.exp_lut, bundle.sum_lut,
                                       scratch, ws);
      c += o.counters;
      check += o.denom + scratch[0];
    }
    exaq_counts = c;
    sink = sink + check;
  });

  auto make = [&](const char* name, double ns, const KernelCounters& c) {
    BenchReport rep;
    rep.kernel = name;
    rep.rows = config.rows;
    rep.cols = config.cols;
    rep.ns_per_row = std::max(ns / static_cast<double>(config.rows), 1e-9);
    rep.exp_calls = c.exp_calls;
    rep.accum_iters = c.accum_iters;
    rep.lut_lookups = c.lut_lookups;
    rep.repetitions = config.reps;
    rep.warmup = config.warmup;
    return rep;
  };
  BenchComparison out{make("reference", ref_ns, ref_counts), make("exaq", exaq_ns, exaq_counts),
                      bundle.spec};
  out.exaq.speedup_vs_reference = out.reference.ns_per_row / out.exaq.ns_per_row;
  return out;
}

}  // namespace exaq
