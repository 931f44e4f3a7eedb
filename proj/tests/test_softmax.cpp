#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "exaq/clip_optimizer.hpp"
#include "exaq/softmax.hpp"
#include "test_util.hpp"

using namespace exaq;

namespace {

double sum_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

}  // namespace

TEST_CASE("reference softmax") {
  const std::vector<float> flat{0.7f, 0.7f, 0.7f};
  const auto r = softmax_reference(flat);
  for (double p : r.probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(r.exp_calls == 3);
  CHECK(r.accum_iters == 3);
  CHECK(r.lut_lookups == 0);

  const std::vector<float> two{0.0f, static_cast<float>(std::log(3.0))};
  const auto t = softmax_reference(two);
  CHECK(t.probs[0] == doctest::Approx(0.25).epsilon(1e-7));
  CHECK(t.probs[1] == doctest::Approx(0.75).epsilon(1e-7));

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto row = gen_gaussian_tensor(1, 333, 0.0, 3.0, seed);
    CHECK(std::abs(sum_of(softmax_reference(row.data()).probs) - 1.0) < 1e-12);
  }
  CHECK_ERROR_CODE(softmax_reference(std::span<const float>()), ErrorCode::empty_input);
}

TEST_CASE("exaq kernel basics") {
  const QuantSpec s(2, -3.51, QuantMode::exaq);
  const auto b = build_lut_bundle(s, 4);

  const std::vector<float> flat(10, -1.25f);
  const auto r = softmax_exaq(flat, s, b.exp_lut, b.sum_lut);
  for (double p : r.probs) CHECK(p == doctest::Approx(0.1).epsilon(1e-15));

  const std::vector<float> eight(8, 0.0f);
  const auto e = softmax_exaq(eight, s, b.exp_lut, b.sum_lut);
  CHECK(e.accum_iters == 2);
  CHECK(e.exp_calls == 0);
  CHECK(e.lut_lookups == 8 + 2);
}

TEST_CASE("counter laws") {
  for (int bits : {2, 3, 4}) {
    const QuantSpec s(bits, -4.0, QuantMode::exaq);
    const int pack = default_pack_width(bits);
    const auto b = build_lut_bundle(s, pack);
    for (std::size_t n : {1, 2, 3, 4, 5, 6, 7, 8, 9, 64, 1023, 4096}) {
      const auto row = gen_gaussian_tensor(1, n, 0.0, 1.0, n);
      const auto e = softmax_exaq(row.data(), s, b.exp_lut, b.sum_lut);
      CHECK(e.accum_iters == ceil_div(n, pack));
      CHECK(e.lut_lookups == n + ceil_div(n, pack));
      CHECK(e.exp_calls == 0);
      const auto r = softmax_reference(row.data());
      CHECK(r.accum_iters == n);
      CHECK(r.exp_calls == n);
    }
  }
}

TEST_CASE("exaq matches the scalar oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> sig(0.5, 3.5);
  for (int bits : {2, 3, 4}) {
    const auto model = fit_linear_model(bits, 0.9, 3.4, 8);
    for (std::size_t n : {1, 5, 9, 64, 1023, 1024}) {
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const double sigma = sig(rng);
        const QuantSpec s(bits, predict_clip(model, sigma).clip, QuantMode::exaq);
        const auto b = build_lut_bundle(s, default_pack_width(bits));
        const auto row = gen_gaussian_tensor(1, n, 0.0, sigma, seed * 77 + n);
        const auto fast = softmax_exaq(row.data(), s, b.exp_lut, b.sum_lut);
        const auto slow = softmax_quantized_scalar(row.data(), s);
        REQUIRE(fast.probs.size() == n);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, test::rel_err(fast.probs[i], slow.probs[i]));
        CHECK(worst <= 1e-6);
        CHECK(std::abs(sum_of(fast.probs) - 1.0) <= 1e-6);
        CHECK(std::abs(sum_of(slow.probs) - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_CASE("lut mismatch is rejected") {
  const QuantSpec s(2, -3.0, QuantMode::exaq);
  const QuantSpec other(2, -3.5, QuantMode::exaq);
  const auto b = build_lut_bundle(other, 4);
  const std::vector<float> row{0, 1, 2};
  CHECK_ERROR_CODE(softmax_exaq(row, s, b.exp_lut, b.sum_lut), ErrorCode::lut_mismatch);
  const auto b3 = build_lut_bundle(QuantSpec(3, -3.0, QuantMode::exaq), 4);
  CHECK_ERROR_CODE(softmax_exaq(row, s, b3.exp_lut, b3.sum_lut), ErrorCode::lut_mismatch);
}

TEST_CASE("more bits bring the output closer to the reference") {
  // Same clip for both widths, so 4-bit bins nest inside 2-bit bins.
  const auto m2 = *builtin_clip_model(2);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const double sigma = 0.9 + 0.125 * static_cast<double>(seed);
    const double clip = predict_clip(m2, sigma).clip;
    const auto row = gen_gaussian_tensor(1, 512, 0.0, sigma, seed + 40);
    const auto ref = softmax_reference(row.data()).probs;
    const auto lo = softmax_quantized_scalar(row.data(), QuantSpec(2, clip, QuantMode::exaq));
    const auto hi = softmax_quantized_scalar(row.data(), QuantSpec(4, clip, QuantMode::exaq));
    CHECK(output_mse(ref, hi.probs) < output_mse(ref, lo.probs));
  }
}

TEST_CASE("permutation equivariance") {
  const QuantSpec s(3, -4.2, QuantMode::exaq);
  const auto b = build_lut_bundle(s, 4);
  std::mt19937_64 rng(12);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto row = gen_gaussian_tensor(1, 257, 0.0, 2.0, seed);
    std::vector<std::size_t> perm(row.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<float> shuffled(row.size());
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = row.data()[perm[i]];

    const auto r0 = softmax_reference(row.data());
    const auto r1 = softmax_reference(shuffled);
    const auto e0 = softmax_exaq(row.data(), s, b.exp_lut, b.sum_lut);
    const auto e1 = softmax_exaq(shuffled, s, b.exp_lut, b.sum_lut);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      CHECK(r1.probs[i] == r0.probs[perm[i]]);
      CHECK(test::rel_err(e1.probs[i], e0.probs[perm[i]]) <= 1e-6);
    }
  }
}

TEST_CASE("output mse") {
  const std::vector<double> a{0.2, 0.8};
  CHECK(output_mse(a, a) == 0.0);
  CHECK(output_mse(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 1.0);
  CHECK_ERROR_CODE(output_mse(a, std::vector<double>{1.0}), ErrorCode::size_mismatch);
  CHECK_ERROR_CODE(output_mse(std::vector<double>{}, std::vector<double>{}), ErrorCode::empty_input);
}

TEST_CASE("batched entry point") {
  const auto input = gen_gaussian_tensor(37, 130, 0.0, 1.7, 8);
  const QuantSpec s(2, -4.67, QuantMode::exaq);
  const auto b = build_lut_bundle(s, 4);

  const auto one = softmax_batch(input, KernelKind::exaq, &b, 1);
  const auto many = softmax_batch(input, KernelKind::exaq, &b, 4);
  CHECK(one.probs == many.probs);
  CHECK(one.denoms == many.denoms);
  CHECK(one.counters == many.counters);
  CHECK(one.counters.accum_iters == 37u * ceil_div(130, 4));
  CHECK(one.probs.dims() == input.dims());

  const auto row5 = softmax_exaq(input.row(5), s, b.exp_lut, b.sum_lut);
  for (std::size_t i = 0; i < 130; ++i) CHECK(one.probs.row(5)[i] == static_cast<float>(row5.probs[i]));

  const auto ref = softmax_batch(input, KernelKind::reference, nullptr, 3);
  CHECK(ref.counters.exp_calls == 37u * 130u);
  const auto oracle = softmax_batch(input, KernelKind::scalar_oracle, &b, 2);
  for (std::size_t i = 0; i < input.size(); ++i) {
    CHECK(test::rel_err(oracle.probs.data()[i], one.probs.data()[i]) <= 1e-6);
  }

  CHECK_ERROR_CODE(softmax_batch(input, KernelKind::exaq, nullptr, 1), ErrorCode::invalid_argument);
  CHECK_ERROR_CODE(softmax_batch(input, KernelKind::naive, &b, 1), ErrorCode::lut_mismatch);
  CHECK(parse_kernel("scalar-oracle") == KernelKind::scalar_oracle);
  CHECK_ERROR_CODE(parse_kernel("fast"), ErrorCode::invalid_argument);
}
