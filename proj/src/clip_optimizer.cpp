#include "exaq/clip_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "exaq/error.hpp"
#include "exaq/quantizer.hpp"
#include "exaq/tensor_io.hpp"
#include "parallel.hpp"

namespace exaq {

std::string_view to_string(SolveMethod method) noexcept {
  return method == SolveMethod::grid ? "grid" : "grid+golden";
}

namespace {

int count_slope_sign_changes(std::span<const double> values) {
  int changes = 0;
  int last_sign = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double d = values[i] - values[i - 1];
    const int sign = (d > 0.0) - (d < 0.0);
    if (sign == 0) continue;
    if (last_sign != 0 && sign != last_sign) ++changes;
    last_sign = sign;
  }
  return changes;
}

template <typename F>
std::pair<double, double> golden_section(F f, double a, double b, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

}  // namespace

ClipSolution solve_optimal_clip(const GaussianParams& g, int bits, const SolveOptions& opts) {
  g.validate();
  if (bits < 2 || bits > 4) throw Error(ErrorCode::invalid_argument, "bits must be in {2,3,4}");
  if (opts.grid_points < 3) throw Error(ErrorCode::invalid_argument, "grid needs >= 3 points");
  const double lo = g.mu - opts.lo_sigmas * g.sigma;
  const double hi = opts.grid_hi;
  if (!(lo < hi) || !(hi < 0.0)) {
    throw Error(ErrorCode::invalid_argument, "empty clip search range; mu too large for sigma");
  }

  // Quadratic warp packs points toward C = 0, where the curve bends fastest.
  const std::size_t n = opts.grid_points;
  std::vector<double> grid(n);
  std::vector<double> mse(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 1.0 - static_cast<double>(i) / static_cast<double>(n - 1);
    grid[i] = i + 1 == n ? hi : hi - (hi - lo) * t * t;
    mse[i] = mse_total(g, grid[i], bits).total;
  }
  const auto best = static_cast<std::size_t>(std::min_element(mse.begin(), mse.end()) - mse.begin());

  ClipSolution sol;
  sol.grid_lo = lo;
  sol.grid_hi = hi;
  sol.grid_points = n;
  sol.slope_sign_changes = count_slope_sign_changes(mse);
  if (best == 0 || best + 1 == n) {
    throw Error(ErrorCode::boundary_solution,
                "grid minimum at C = " + std::to_string(grid[best]) + " (search bounds [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "])");
  }

  sol.left_neighbor_mse = mse[best - 1];
  sol.right_neighbor_mse = mse[best + 1];
  auto objective = [&](double c) { return mse_total(g, c, bits).total; };
  const auto [c_refined, f_refined] =
      golden_section(objective, grid[best - 1], grid[best + 1], opts.golden_tol);
  if (f_refined <= mse[best]) {
    sol.c_star = c_refined;
    sol.mse_at_min = f_refined;
    sol.method = SolveMethod::grid_golden;
  } else {
    sol.c_star = grid[best];
    sol.mse_at_min = mse[best];
    sol.method = SolveMethod::grid;
  }
  return sol;
}

std::optional<LinearClipModel> builtin_clip_model(int bits) {
  const double unknown = std::numeric_limits<double>::quiet_NaN();  // residual not published
  switch (bits) {
    case 2: return LinearClipModel{2, -1.66, -1.85, 0.9, 3.4, unknown};
    case 3: return LinearClipModel{3, -1.75, -2.06, 0.9, 3.4, unknown};
    default: return std::nullopt;
  }
}

std::vector<std::pair<double, double>> optimal_clip_curve(int bits, double sigma_lo,
                                                          double sigma_hi, std::size_t n_points,
                                                          unsigned threads) {
  if (n_points < 2) throw Error(ErrorCode::invalid_argument, "need at least 2 sigma points");
  if (!(sigma_lo > 0.0) || !(sigma_lo < sigma_hi) || !std::isfinite(sigma_hi)) {
    throw Error(ErrorCode::invalid_argument, "sigma range must satisfy 0 < lo < hi");
  }
  std::vector<std::pair<double, double>> curve(n_points);
  detail::parallel_for(n_points, threads, [&](std::size_t i) {
    const double sigma = sigma_lo + (sigma_hi - sigma_lo) * static_cast<double>(i) /
                                        static_cast<double>(n_points - 1);
    curve[i] = {sigma, solve_optimal_clip(GaussianParams{0.0, sigma}, bits).c_star};
  });
  return curve;
}

LinearClipModel fit_linear_model(int bits, double sigma_lo, double sigma_hi, std::size_t n_points,
                                 unsigned threads) {
  if (n_points < 8) throw Error(ErrorCode::invalid_argument, "fit needs at least 8 sigma points");
  const auto curve = optimal_clip_curve(bits, sigma_lo, sigma_hi, n_points, threads);

  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : curve) {
    sx += x;
    sy += y;
  }
  const double n = static_cast<double>(curve.size());
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : curve) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }

  LinearClipModel model;
  model.bits = bits;
  model.slope = sxy / sxx;
  model.intercept = my - model.slope * mx;
  model.sigma_lo = sigma_lo;
  model.sigma_hi = sigma_hi;
  for (const auto& [x, y] : curve) {
    model.residual_max = std::max(model.residual_max, std::abs(model.slope * x + model.intercept - y));
  }
  return model;
}

ClipPrediction predict_clip(const LinearClipModel& model, double sigma) {
  return {model.slope * sigma + model.intercept,
          sigma >= model.sigma_lo && sigma <= model.sigma_hi};
}

double empirical_codec_mse(std::span<const double> samples, double clip, int bits) {
  if (samples.empty()) throw Error(ErrorCode::empty_input, "no samples");
  const QuantSpec spec(bits, clip, QuantMode::exaq);
  std::vector<double> level_exp;
  for (double q : spec.levels()) level_exp.push_back(std::exp(q));
  double acc = 0.0;
  for (double x : samples) {
    if (x > 0.0) continue;
    const double d = level_exp[spec.code_of(x)] - std::exp(x);
    acc += d * d;
  }
  return acc / static_cast<double>(samples.size());
}

EmpiricalClipCurve simulate_empirical_clip(const GaussianParams& g, int bits,
                                           std::size_t n_samples, std::uint64_t seed,
                                           std::span<const double> c_grid) {
  g.validate();
  if (c_grid.empty()) throw Error(ErrorCode::empty_input, "empty clip grid");
  if (n_samples < 100) throw Error(ErrorCode::invalid_argument, "need at least 100 samples");
  for (std::size_t i = 0; i < c_grid.size(); ++i) {
    if (!(c_grid[i] < 0.0)) throw Error(ErrorCode::invalid_argument, "clip grid values must be < 0");
    if (i > 0 && !(c_grid[i - 1] < c_grid[i])) {
      throw Error(ErrorCode::invalid_argument, "clip grid must be strictly ascending");
    }
  }

  // Only x <= 0 enters the error; keep those with their exponentials cached.
  const auto samples = gaussian_samples(n_samples, g.mu, g.sigma, seed);
  std::vector<double> xs;
  std::vector<double> exs;
  for (double x : samples) {
    if (x > 0.0) continue;
    xs.push_back(x);
    exs.push_back(std::exp(x));
  }

  EmpiricalClipCurve out;
  out.curve.reserve(c_grid.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> level_exp;
  for (double c : c_grid) {
    const QuantSpec spec(bits, c, QuantMode::exaq);
    level_exp.clear();
    for (double q : spec.levels()) level_exp.push_back(std::exp(q));
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double d = level_exp[spec.code_of(xs[i])] - exs[i];
      acc += d * d;
    }
    const double mse = acc / static_cast<double>(n_samples);
    out.curve.emplace_back(c, mse);
    if (mse < best) {
      best = mse;
      out.c_empirical = c;
    }
  }
  return out;
}

std::vector<double> uniform_clip_grid(double lo, double hi, double step) {
  if (!(lo <= hi) || !(step > 0.0) || !(hi < 0.0)) {
    throw Error(ErrorCode::invalid_argument, "clip grid needs lo <= hi < 0 and step > 0");
  }
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = lo + step * static_cast<double>(i);
  return grid;
}

}  // namespace exaq
