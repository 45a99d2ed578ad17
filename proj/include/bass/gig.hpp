// Generalized inverse Gaussian variates.
//
// GIG(p, a, b) has density proportional to x^(p-1) exp(-(a x + b / x) / 2).
// Sampling follows the rejection family of Hormann & Leydold (2014): the
// standardized variate with density x^(lambda-1) exp(-omega (x + 1/x) / 2)
// is drawn by ratio-of-uniforms (with or without mode shift) or, for small
// lambda and omega, by a three-piece dominating hat; the result is rescaled
// by sqrt(b / a) and inverted when p < 0.
#ifndef BASS_GIG_HPP_
#define BASS_GIG_HPP_

#include "bass/core.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace bass {

namespace detail {

/// Mode of x^(lambda-1) exp(-omega (x + 1/x) / 2), lambda >= 0.
inline double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

template <class Rng>
double uniform01(Rng& rng) {
  // (0, 1): the acceptance tests take logs of these
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double v;
  do {
    v = u(rng);
  } while (v <= 0.0);
  return v;
}

template <class Rng>
double gig_rou_noshift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * uniform01(rng);
    const double v = uniform01(rng);
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

template <class Rng>
double gig_rou_shift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // extrema of (x - xm) sqrt(f(x)) are roots of a depressed cubic
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = (2.0 * (lambda - 1.0) * xm / omega - 1.0);
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = uminus + uniform01(rng) * (uplus - uminus);
    const double v = uniform01(rng);
    const double x = u / v + xm;
    if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

/// Three-piece hat for 0 <= lambda < 1 and small omega, where the density is
/// not T_{-1/2}-concave enough for ratio-of-uniforms to be efficient.
template <class Rng>
double gig_concave_hat(double lambda, double omega, Rng& rng) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);

  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  double area[3];
  area[0] = k0 * x0;
  double k1, k2;
  if (x0 >= 2.0 / omega) {
    k1 = 0.0;
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = lambda == 0.0 ? k1 * std::log(2.0 / (omega * omega))
                            : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];

  for (;;) {
    double v = total * uniform01(rng);
    double x, hx;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hx = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      const double lo = std::max(x0, 2.0 / omega);
      x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    const double u = uniform01(rng) * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

}  // namespace detail

/// Draws one GIG(p, a, b) variate.
///
/// Requires a > 0 and b >= 0; b = 0 is accepted only for p > 0, where the
/// law reduces to Ga(p, a / 2). Tiny positive b is sampled as is.
template <class Rng>
double sample_gig(double p, double a, double b, Rng& rng) {
  if (!std::isfinite(p) || !std::isfinite(a) || !std::isfinite(b) || a < 0.0 || b < 0.0) {
    throw InvalidInput("sample_gig: parameters must be finite with a, b >= 0");
  }
  if (b <= 0.0) {
    if (p > 0.0 && a > 0.0) return std::gamma_distribution<double>(p, 2.0 / a)(rng);
    throw InvalidInput("sample_gig: b = 0 requires p > 0");
  }
  if (a <= 0.0) {
    if (p < 0.0) return 1.0 / std::gamma_distribution<double>(-p, 2.0 / b)(rng);
    throw InvalidInput("sample_gig: a = 0 requires p < 0");
  }

  const double lambda = std::abs(p);
  const double alpha = std::sqrt(b / a);
  const double omega = std::sqrt(a * b);

  double x;
  if (lambda > 2.0 || omega > 3.0) {
    x = detail::gig_rou_shift(lambda, omega, rng);
  } else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
    x = detail::gig_rou_noshift(lambda, omega, rng);
  } else {
    x = detail::gig_concave_hat(lambda, omega, rng);
  }
  return p < 0.0 ? alpha / x : alpha * x;
}

}  // namespace bass

#endif  // BASS_GIG_HPP_
