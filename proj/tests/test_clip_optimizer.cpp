#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "exaq/clip_optimizer.hpp"
#include "test_util.hpp"

using namespace exaq;

// Minimizers below were computed independently with scipy (bounded Brent on
// the quad-integrated total, xatol 1e-7).

TEST_CASE("solver finds the minimum of the total error") {
  struct Case {
    GaussianParams g;
    int bits;
    double c_star;
  };
  for (const auto& c : {Case{{0.0, 1.0}, 2, -1.4479816160419323}, Case{{0.0, 2.0}, 3, -2.5469667529951834},
                        Case{{0.0, 1.0}, 3, -1.7332011328483283}, Case{{0.0, 1.0}, 4, -2.0096591031816633},
                        Case{{-1.0, 1.5}, 2, -2.1707244397733576}}) {
    const auto sol = solve_optimal_clip(c.g, c.bits);
    CAPTURE(c.bits);
    CHECK(std::abs(sol.c_star - c.c_star) < 2e-4);
    CHECK(sol.method == SolveMethod::grid_golden);
    CHECK(sol.grid_lo <= sol.c_star);
    CHECK(sol.c_star <= sol.grid_hi);
    CHECK(sol.grid_points >= 400);
    CHECK(sol.mse_at_min <= sol.left_neighbor_mse);
    CHECK(sol.mse_at_min <= sol.right_neighbor_mse);
    CHECK(sol.slope_sign_changes == 1);
  }
}

TEST_CASE("more bits tolerate a wider range") {
  const GaussianParams g{0.0, 1.0};
  const double c3 = solve_optimal_clip(g, 3).c_star;
  const double c4 = solve_optimal_clip(g, 4).c_star;
  CHECK(c4 < c3);
  // Grid check of the same fact without the solver.
  auto argmin = [&](int bits) {
    double best_c = 0.0, best = kPosInf;
    for (double c = -6.0; c < -0.01; c += 0.001) {
      const double v = mse_total(g, c, bits).total;
      if (v < best) best = v, best_c = c;
    }
    return best_c;
  };
  CHECK(argmin(4) < argmin(3));
}

TEST_CASE("boundary minimum is an error") {
  SolveOptions opts;
  opts.grid_hi = -3.0;  // true minimum lies to the right of the search range
  CHECK_ERROR_CODE(solve_optimal_clip({0.0, 1.0}, 2, opts), ErrorCode::boundary_solution);
  CHECK_ERROR_CODE(solve_optimal_clip({0.0, 1.0}, 5), ErrorCode::invalid_argument);
  CHECK_ERROR_CODE(solve_optimal_clip({0.0, -1.0}, 2), ErrorCode::invalid_argument);
}

TEST_CASE("optimal clip decreases with sigma") {
  double prev = 0.0;
  for (double s = 0.5; s <= 4.0 + 1e-12; s += 0.1) {
    const double c = solve_optimal_clip({0.0, s}, 2).c_star;
    CHECK(c < prev);
    prev = c;
  }
}

TEST_CASE("linear fit") {
  const auto m2 = fit_linear_model(2, 0.9, 3.4, 26);
  CHECK(m2.bits == 2);
  CHECK(m2.sigma_lo == 0.9);
  CHECK(m2.sigma_hi == 3.4);
  // scipy least squares over the same 26 optima.
  CHECK(m2.slope == doctest::Approx(-0.49060237).epsilon(1e-3));
  CHECK(m2.intercept == doctest::Approx(-1.07490762).epsilon(1e-3));
  CHECK(m2.residual_max == doctest::Approx(0.166706).epsilon(2e-3));

  const auto m3 = fit_linear_model(3, 0.9, 3.4, 26);
  CHECK(m3.slope == doctest::Approx(-0.5776546).epsilon(1e-3));
  CHECK(m3.intercept == doctest::Approx(-1.29831405).epsilon(1e-3));

  // Prediction stays negative across the fitted range.
  for (const auto& m : {m2, m3}) {
    CHECK(predict_clip(m, m.sigma_lo).clip < 0.0);
    CHECK(predict_clip(m, m.sigma_hi).clip < 0.0);
  }

  SUBCASE("stable under denser sampling") {
    const auto dense = fit_linear_model(2, 0.9, 3.4, 52, 2);
    CHECK(test::rel_err(dense.slope, m2.slope) < 0.01);
    CHECK(test::rel_err(dense.intercept, m2.intercept) < 0.01);
  }
  SUBCASE("threading does not change the result") {
    const auto par = fit_linear_model(2, 0.9, 3.4, 26, 4);
    CHECK(par.slope == m2.slope);
    CHECK(par.intercept == m2.intercept);
  }
  SUBCASE("prediction at the range end is within the residual") {
    const double solved = solve_optimal_clip({0.0, 3.4}, 2).c_star;
    CHECK(std::abs(predict_clip(m2, 3.4).clip - solved) <= m2.residual_max + 1e-12);
  }
  CHECK_ERROR_CODE(fit_linear_model(2, 0.9, 3.4, 7), ErrorCode::invalid_argument);
  CHECK_ERROR_CODE(fit_linear_model(2, 3.4, 0.9, 26), ErrorCode::invalid_argument);
}

TEST_CASE("optimal clip curve is ordered by sigma") {
  const auto curve = optimal_clip_curve(3, 1.0, 2.0, 11);
  REQUIRE(curve.size() == 11);
  CHECK(curve.front().first == 1.0);
  CHECK(curve.back().first == doctest::Approx(2.0));
  CHECK(curve[5].second == doctest::Approx(solve_optimal_clip({0.0, curve[5].first}, 3).c_star));
}

TEST_CASE("builtin model and prediction") {
  const auto m2 = builtin_clip_model(2);
  REQUIRE(m2.has_value());
  CHECK(m2->slope == -1.66);
  CHECK(m2->intercept == -1.85);
  CHECK(std::isnan(m2->residual_max));
  const auto p = predict_clip(*m2, 1.0);
  CHECK(p.clip == doctest::Approx(-3.51).epsilon(1e-12));
  CHECK(p.in_range);
  const auto m3 = builtin_clip_model(3);
  REQUIRE(m3.has_value());
  CHECK(predict_clip(*m3, 2.0).clip == doctest::Approx(-5.56).epsilon(1e-12));
  CHECK_FALSE(builtin_clip_model(4).has_value());

  const auto zero = predict_clip(*m2, 0.0);
  CHECK(zero.clip == m2->intercept);
  CHECK_FALSE(zero.in_range);
  CHECK_FALSE(predict_clip(*m2, 5.0).in_range);
}

TEST_CASE("empirical clip from simulation") {
  const GaussianParams g{0.0, 1.0};
  const double analytic = solve_optimal_clip(g, 2).c_star;
  const auto grid = uniform_clip_grid(-8.0, -0.01, 0.01);

  SUBCASE("large sample lands near the analytic optimum") {
    const auto sim = simulate_empirical_clip(g, 2, 100'000, 1, grid);
    CHECK(sim.curve.size() == grid.size());
    CHECK(std::abs(sim.c_empirical - analytic) <= 0.2);
    const auto best = std::min_element(sim.curve.begin(), sim.curve.end(),
                                       [](auto& a, auto& b) { return a.second < b.second; });
    CHECK(best->first == sim.c_empirical);
  }
  SUBCASE("1000 samples over 10 seeds") {
    std::vector<double> gaps;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      gaps.push_back(std::abs(simulate_empirical_clip(g, 2, 1000, seed, grid).c_empirical - analytic));
    }
    std::nth_element(gaps.begin(), gaps.begin() + 5, gaps.end());
    CHECK(gaps[5] <= 0.3);
  }
  SUBCASE("single grid point") {
    const auto sim = simulate_empirical_clip(g, 2, 500, 3, std::vector<double>{-2.5});
    CHECK(sim.c_empirical == -2.5);
    CHECK(sim.curve.size() == 1);
  }
  SUBCASE("errors") {
    CHECK_ERROR_CODE(simulate_empirical_clip(g, 2, 1000, 1, std::vector<double>{}), ErrorCode::empty_input);
    CHECK_ERROR_CODE(simulate_empirical_clip(g, 2, 99, 1, grid), ErrorCode::invalid_argument);
    CHECK_ERROR_CODE(simulate_empirical_clip(g, 2, 1000, 1, std::vector<double>{-1.0, 0.5}), ErrorCode::invalid_argument);
  }
}

TEST_CASE("empirical codec mse by hand") {
  // clip -4, 2 bits: levels -3.5 -2.5 -1.5 -0.5; -3.0 opens bin 1.
  const std::vector<double> xs{-0.5, -3.0, -10.0, 1.0};
  const double want = (0.0 + std::pow(std::exp(-2.5) - std::exp(-3.0), 2) +
                       std::pow(std::exp(-3.5) - std::exp(-10.0), 2)) /
                      4.0;
  CHECK(empirical_codec_mse(xs, -4.0, 2) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("uniform grid") {
  const auto g = uniform_clip_grid(-1.0, -0.5, 0.1);
  REQUIRE(g.size() == 6);
  CHECK(g.front() == -1.0);
  CHECK(g.back() == doctest::Approx(-0.5));
  CHECK_ERROR_CODE(uniform_clip_grid(-1.0, 0.5, 0.1), ErrorCode::invalid_argument);
}
