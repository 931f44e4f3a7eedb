#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "exaq/gaussian_mse.hpp"

namespace exaq {

enum class SolveMethod { grid, grid_golden };

std::string_view to_string(SolveMethod method) noexcept;

struct ClipSolution {
  double c_star = 0.0;
  double mse_at_min = 0.0;
  SolveMethod method = SolveMethod::grid_golden;
  double grid_lo = 0.0;
  double grid_hi = 0.0;
  /// MSE at the coarse-grid points that bracket c_star.
  double left_neighbor_mse = 0.0;
  double right_neighbor_mse = 0.0;
  /// Sign changes of the first differences along the coarse grid; 1 means
  /// the sampled curve is unimodal.
  int slope_sign_changes = 0;
  std::size_t grid_points = 0;
};

struct SolveOptions {
  std::size_t grid_points = 512;
  double grid_hi = -1e-3;
  /// Coarse grid starts at mu - lo_sigmas * sigma.
  double lo_sigmas = 10.0;
  double golden_tol = 1e-4;
};

/// Coarse grid over [mu - 10 sigma, -1e-3], denser toward 0, then
/// golden-section refinement inside the winning bracket. Throws
/// Error{boundary_solution} if the grid minimum sits on either end.
ClipSolution solve_optimal_clip(const GaussianParams& g, int bits, const SolveOptions& opts = {});

struct LinearClipModel {
  int bits = 2;
  double slope = 0.0;
  double intercept = 0.0;
  double sigma_lo = 0.0;
  double sigma_hi = 0.0;
  double residual_max = 0.0;
};

/// Reference coefficients for M = 2, 3 (fitted over sigma in [0.9, 3.4]).
/// Returns nullopt for other bit widths.
std::optional<LinearClipModel> builtin_clip_model(int bits);

/// Solves C* at n_points equally spaced sigma values (mu = 0) and fits a
/// least-squares line. Solves run on up to `threads` worker threads.
LinearClipModel fit_linear_model(int bits, double sigma_lo, double sigma_hi, std::size_t n_points,
                                 unsigned threads = 1);

/// The per-sigma optima behind a fit, in sigma order.
std::vector<std::pair<double, double>> optimal_clip_curve(int bits, double sigma_lo,
                                                          double sigma_hi, std::size_t n_points,
                                                          unsigned threads = 1);

struct ClipPrediction {
  double clip = 0.0;
  bool in_range = true;
};

ClipPrediction predict_clip(const LinearClipModel& model, double sigma);

struct EmpiricalClipCurve {
  double c_empirical = 0.0;
  std::vector<std::pair<double, double>> curve;  // (C, empirical MSE)
};

/// Draws n_samples from N(mu, sigma^2) once and, for each grid clip, runs the
/// M-bit codec and averages (e^{Q(x)} - e^x)^2. Samples above 0 contribute
/// nothing (the analytic integrals stop at 0) but still count in the mean.
EmpiricalClipCurve simulate_empirical_clip(const GaussianParams& g, int bits,
                                           std::size_t n_samples, std::uint64_t seed,
                                           std::span<const double> c_grid);

/// Empirical codec MSE over given samples for one clip value.
double empirical_codec_mse(std::span<const double> samples, double clip, int bits);

/// Evenly spaced clip grid [lo, hi] with the given step, ascending.
std::vector<double> uniform_clip_grid(double lo, double hi, double step);

}  // namespace exaq
