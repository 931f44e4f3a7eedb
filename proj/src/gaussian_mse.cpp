#include "exaq/gaussian_mse.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "exaq/error.hpp"

namespace exaq {

namespace {

void check_clip(double clip) {
  if (!(clip < 0.0) || !std::isfinite(clip)) {
    throw Error(ErrorCode::invalid_argument, "clip must be finite and < 0, got " + std::to_string(clip));
  }
}

void check_bits(int bits) {
  if (bits < 2 || bits > 4) {
    throw Error(ErrorCode::invalid_argument, "bits must be in {2,3,4}, got " + std::to_string(bits));
  }
}

double normal_pdf(double x, const GaussianParams& g) {
  const double z = (x - g.mu) / g.sigma;
  return std::exp(-0.5 * z * z) / (g.sigma * std::sqrt(2.0 * std::numbers::pi));
}

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 31>;

// Adaptive Gauss-Kronrod over [a, b], split at `breaks` so that narrow
// peaks are not missed by the first panel.
template <typename F>
double integrate_checked(F f, double a, double b, std::vector<double> breaks,
                         const QuadratureOptions& opts, const char* what) {
  if (!(a < b)) return 0.0;
  breaks.push_back(a);
  breaks.push_back(b);
  std::erase_if(breaks, [&](double x) { return !(x >= a && x <= b); });
  std::sort(breaks.begin(), breaks.end());
  // Sliver panels near coincident breakpoints only cost depth; merge them.
  const double min_gap = 1e-6 * (b - a);
  std::vector<double> kept{a};
  for (double x : breaks) {
    if (x - kept.back() > min_gap && b - x > min_gap) kept.push_back(x);
  }
  kept.push_back(b);
  breaks.swap(kept);

  double value = 0.0;
  double err = 0.0;
  double l1 = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    // Boost 1.74 compares an unscaled panel error against a scaled estimate,
    // which never converges on narrow panels. Integrating over [0, 1] keeps
    // the two in the same units (the reported error is then 2x conservative).
    const double left = breaks[i];
    const double width = breaks[i + 1] - left;
    double piece_err = 0.0;
    double piece_l1 = 0.0;
    value += Kronrod::integrate([&](double t) { return width * f(left + width * t); }, 0.0, 1.0,
                                opts.max_depth, opts.rel_tol, &piece_err, &piece_l1);
    err += piece_err;
    l1 += piece_l1;
  }
  if (!(err <= std::max(opts.abs_tol, opts.rel_tol * l1))) {
    std::ostringstream msg;
    msg << what << ": error estimate " << err << " on value " << value;
    throw Error(ErrorCode::non_convergence, msg.str());
  }
  return value;
}

// Breakpoints one sigma apart around the mean and below the clip.
std::vector<double> sigma_breaks(const GaussianParams& g, double clip, double tail_sigmas) {
  std::vector<double> out;
  for (int k = -static_cast<int>(tail_sigmas); k <= static_cast<int>(tail_sigmas); ++k) {
    out.push_back(g.mu + k * g.sigma);
  }
  for (int k = 0; k <= static_cast<int>(tail_sigmas); ++k) out.push_back(clip - k * g.sigma);
  return out;
}

}  // namespace

void GaussianParams::validate() const {
  if (!std::isfinite(mu) || !std::isfinite(sigma) || !(sigma > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "GaussianParams needs finite mu and sigma > 0");
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_mass(double z_lo, double z_hi) {
  if (!(z_lo < z_hi)) return 0.0;
  // Both bounds in the upper half: difference of upper-tail probabilities.
  if (z_lo > 0.0) {
    return 0.5 * (std::erfc(z_lo / std::numbers::sqrt2) - std::erfc(z_hi / std::numbers::sqrt2));
  }
  return normal_cdf(z_hi) - normal_cdf(z_lo);
}

double partial_exp_moment(double a, const GaussianParams& g, double lo, double hi) {
  g.validate();
  if (std::isnan(lo) || std::isnan(hi) || !(lo < hi)) {
    throw Error(ErrorCode::invalid_argument, "partial_exp_moment needs lo < hi");
  }
  // Completing the square: e^{ax} f(x) = e^{a mu + a^2 sigma^2 / 2} * N(mu + a sigma^2, sigma^2).
  const double shift = g.mu + a * g.sigma * g.sigma;
  const double scale = std::exp(a * g.mu + 0.5 * a * a * g.sigma * g.sigma);
  return scale * normal_mass((lo - shift) / g.sigma, (hi - shift) / g.sigma);
}

double quant_step(double clip, int bits) {
  check_clip(clip);
  check_bits(bits);
  return -clip / static_cast<double>(1u << bits);
}

double mse_quant(const GaussianParams& g, double clip, int bits) {
  const double delta = quant_step(clip, bits);
  return delta * delta / 12.0 * partial_exp_moment(2.0, g, clip, 0.0);
}

double mse_clip(const GaussianParams& g, double clip) {
  check_clip(clip);
  g.validate();
  const double ec = std::exp(clip);
  const double value = ec * ec * normal_cdf((clip - g.mu) / g.sigma) -
                       2.0 * ec * partial_exp_moment(1.0, g, kNegInf, clip) +
                       partial_exp_moment(2.0, g, kNegInf, clip);
  // The three terms cancel in the far tail; the true integral is >= 0.
  return std::max(0.0, value);
}

MseBreakdown mse_total(const GaussianParams& g, double clip, int bits) {
  MseBreakdown out;
  out.mse_quant = mse_quant(g, clip, bits);
  out.mse_clip = mse_clip(g, clip);
  out.total = out.mse_quant + out.mse_clip;
  return out;
}

MseBreakdown mse_quadrature_oracle(const GaussianParams& g, double clip, int bits,
                                   const QuadratureOptions& opts) {
  g.validate();
  const double delta = quant_step(clip, bits);
  // The lower limit follows the clip when it sits below mu - tail_sigmas * sigma,
  // so the clip integral still covers where its integrand lives.
  const double lo = std::min(g.mu, clip) - opts.tail_sigmas * g.sigma;
  const double hi = g.mu + opts.tail_sigmas * g.sigma;
  const auto breaks = sigma_breaks(g, clip, opts.tail_sigmas);

  MseBreakdown out;
  const double ec = std::exp(clip);
  out.mse_clip = integrate_checked(
      [&](double x) {
        const double d = ec * std::expm1(x - clip);
        return d * d * normal_pdf(x, g);
      },
      lo, std::min(clip, hi), breaks, opts, "clip integral");

  // (e^{x+eps} - e^x)^2 = e^{2x} (e^eps - 1)^2: the rounding-offset average
  // factors out of the x integral.
  const double half = 0.5 * delta;
  const double noise_avg = integrate_checked(
                               [](double eps) {
                                 const double d = std::expm1(eps);
                                 return d * d;
                               },
                               -half, half, {}, opts, "rounding-offset integral") /
                           delta;
  out.mse_quant = noise_avg * integrate_checked(
                                  [&](double x) { return std::exp(2.0 * x) * normal_pdf(x, g); },
                                  std::max(clip, lo), std::min(0.0, hi), breaks, opts,
                                  "quantization integral");

  out.total = out.mse_quant + out.mse_clip;
  return out;
}

double taylor_exactness_ratio(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw Error(ErrorCode::invalid_argument, "delta must be finite and > 0");
  }
  const double h = 0.5 * delta;
  if (h > 0.5) {
    const double exact = (std::sinh(2.0 * h) - 4.0 * std::sinh(h) + 2.0 * h) / delta;
    return exact / (delta * delta / 12.0);
  }
  // (e^eps - 1)^2 = sum_{n>=2} (2^n - 2)/n! eps^n; odd powers average to zero.
  double sum = 0.0;
  double factorial = 1.0;
  double pow_h = 1.0;
  double pow_two = 1.0;
  for (int n = 1; n <= 40; ++n) {
    factorial *= n;
    pow_h *= h;
    pow_two *= 2.0;
    if (n % 2 == 0) sum += (pow_two - 2.0) / factorial * pow_h / (n + 1);
  }
  return sum / (h * h / 3.0);
}

}  // namespace exaq
