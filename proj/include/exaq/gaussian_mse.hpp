#pragma once

// Expected post-exponent MSE of clipped uniform quantization of a Gaussian
// input x ~ N(mu, sigma^2), restricted to x <= 0.
//
//   mse_clip  = int_{-inf}^{C} (e^C - e^x)^2 f(x) dx
//   mse_quant = int_{C}^{0} (e^{Q(x)} - e^x)^2 f(x) dx
//             ~ (delta^2 / 12) int_{C}^{0} e^{2x} f(x) dx      (first-order in eps)
//
// with delta = -C / 2^M and Q(x) = x + eps, eps ~ U[-delta/2, delta/2].
// All arithmetic is double precision.

#include <limits>

namespace exaq {

struct GaussianParams {
  double mu = 0.0;
  double sigma = 1.0;

  /// Throws Error{invalid_argument} unless sigma > 0 and both are finite.
  void validate() const;
};

struct MseBreakdown {
  double mse_quant = 0.0;
  double mse_clip = 0.0;
  double total = 0.0;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

/// Standard normal CDF via erfc, accurate in both tails.
double normal_cdf(double z);

/// Probability mass of N(0,1) on [z_lo, z_hi], computed from the tail that
/// avoids cancellation.
double normal_mass(double z_lo, double z_hi);

/// int_lo^hi e^{a x} f(x) dx for f = N(mu, sigma^2); lo may be -inf, hi may be +inf.
double partial_exp_moment(double a, const GaussianParams& g, double lo, double hi);

/// Step size for clip C < 0 and M bits.
double quant_step(double clip, int bits);

double mse_quant(const GaussianParams& g, double clip, int bits);
double mse_clip(const GaussianParams& g, double clip);
MseBreakdown mse_total(const GaussianParams& g, double clip, int bits);

struct QuadratureOptions {
  double rel_tol = 1e-11;
  double abs_tol = 1e-16;
  unsigned max_depth = 20;
  /// Lower integration limit realized as min(mu, clip) - tail_sigmas * sigma.
  double tail_sigmas = 12.0;
};

/// Independent check of the closed forms: adaptive Gauss-Kronrod on the exact
/// integrands. The quantization term integrates (e^{x+eps} - e^x)^2 over both
/// x in [C, 0] and eps uniform on [-delta/2, delta/2] without the Taylor step.
/// Throws Error{non_convergence} when an estimate misses its tolerance.
MseBreakdown mse_quadrature_oracle(const GaussianParams& g, double clip, int bits,
                                   const QuadratureOptions& opts = {});

/// Ratio (exact eps-average) / (Taylor delta^2/12) for a given step. It does
/// not depend on the input density, so it measures the Taylor error alone.
double taylor_exactness_ratio(double delta);

}  // namespace exaq
