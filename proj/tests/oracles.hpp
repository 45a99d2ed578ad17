// Reference computations used by the tests. Everything here is written
// from the model definition directly and shares no code paths with the
// library beyond the data types.
#ifndef BASS_TESTS_ORACLES_HPP_
#define BASS_TESTS_ORACLES_HPP_

#include "bass/core.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace oracle {

using bass::Matrix;
using bass::Vector;

// 3 features in blocks of 2 and 1, 2 factors, 4 samples. Column 0 is sparse
// in block 0 and dense in block 1, column 1 the other way round.
inline bass::ModelState tiny_state() {
  bass::ModelState s;
  s.offsets = {0, 2, 3};
  s.lambda.resize(3, 2);
  s.lambda << 0.8, -0.3, -1.1, 0.5, 0.4, 1.3;
  s.theta.resize(3, 2);
  s.theta << 0.7, 1.4, 2.1, 0.3, 0.9, 0.6;
  s.delta.resize(3, 2);
  s.delta << 1.2, 0.4, 0.8, 2.2, 0.5, 1.7;
  s.phi.resize(2, 2);
  s.phi << 1.5, 0.6, 0.9, 2.4;
  s.tau.resize(2, 2);
  s.tau << 0.7, 1.9, 1.1, 0.4;
  s.eta = Vector(2);
  s.eta << 0.8, 1.6;
  s.gamma = Vector(2);
  s.gamma << 1.3, 0.5;
  s.z.resize(2, 2);
  s.z << 1, 0, 0, 1;
  s.rho.resize(2, 2);
  s.rho << 0.8, 0.3, 0.1, 0.6;
  s.pi = Vector(2);
  s.pi << 0.4, 0.7;
  s.sigma2 = Vector(3);
  s.sigma2 << 0.6, 1.2, 0.9;
  return s;
}

inline bass::GroupedDataset tiny_data() {
  bass::GroupedDataset d;
  d.offsets = {0, 2, 3};
  d.y.resize(3, 4);
  d.y << 0.5, -1.2, 2.0, 0.3,
         -0.7, 0.9, -1.5, 1.1,
         1.4, 0.2, -0.6, -2.1;
  return d;
}

inline Matrix tiny_factors() {
  Matrix x(2, 4);
  x << 0.3, -0.8, 1.2, 0.1,
       -1.0, 0.4, 0.6, -0.2;
  return x;
}

// Unnormalized log densities of the standard families.
inline double log_gamma_kernel(double x, double shape, double rate) { return (shape - 1.0) * std::log(x) - rate * x; }
inline double log_gig_kernel(double x, double p, double a, double b) {
  return (p - 1.0) * std::log(x) - 0.5 * (a * x + b / x);
}
inline double log_beta_kernel(double x, double al, double be) {
  return (al - 1.0) * std::log(x) + (be - 1.0) * std::log(1.0 - x);
}
inline double log_mvn_kernel(const Vector& x, const Vector& mean, const Matrix& cov) {
  const Vector d = x - mean;
  return -0.5 * d.dot(cov.ldlt().solve(d));
}

// GIG(p, a, b) moments from modified Bessel functions of the second kind.
inline double gig_mean(double p, double a, double b) {
  const double w = std::sqrt(a * b);
  return std::sqrt(b / a) * std::cyl_bessel_k(std::abs(p + 1.0), w) / std::cyl_bessel_k(std::abs(p), w);
}

inline double gig_second_moment(double p, double a, double b) {
  const double w = std::sqrt(a * b);
  return (b / a) * std::cyl_bessel_k(std::abs(p + 2.0), w) / std::cyl_bessel_k(std::abs(p), w);
}

inline double gig_variance(double p, double a, double b) {
  const double m = gig_mean(p, a, b);
  return gig_second_moment(p, a, b) - m * m;
}

// Central difference of f at x with a relative step.
inline double central_diff(const std::function<double(double)>& f, double x, double rel = 1e-6) {
  const double h = rel * std::max(1.0, std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// E(y_target | y_rest) under N(0, Lambda Lambda^T + Sigma), via the dense
// p x p covariance.
inline Matrix dense_conditional_mean(const Matrix& lambda, const Vector& sigma2, const Matrix& y,
                                     Eigen::Index begin, Eigen::Index len) {
  const auto p = lambda.rows();
  Matrix cov = lambda * lambda.transpose();
  cov.diagonal() += sigma2;
  std::vector<Eigen::Index> rest;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (j < begin || j >= begin + len) rest.push_back(j);
  }
  const auto r = static_cast<Eigen::Index>(rest.size());
  Matrix c_rr(r, r), c_tr(len, r), y_r(r, y.cols());
  for (Eigen::Index a = 0; a < r; ++a) {
    y_r.row(a) = y.row(rest[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < r; ++b) c_rr(a, b) = cov(rest[static_cast<std::size_t>(a)], rest[static_cast<std::size_t>(b)]);
    for (Eigen::Index t = 0; t < len; ++t) c_tr(t, a) = cov(begin + t, rest[static_cast<std::size_t>(a)]);
  }
  return c_tr * c_rr.inverse() * y_r;
}

// Marginal log-likelihood through the full p x p covariance.
inline double dense_log_likelihood(const Matrix& lambda, const Vector& sigma2, const Matrix& y) {
  Matrix cov = lambda * lambda.transpose();
  cov.diagonal() += sigma2;
  Eigen::LDLT<Matrix> ldlt(cov);
  const double logdet = ldlt.vectorD().array().log().sum();
  const double quad = (y.array() * ldlt.solve(y).array()).sum();
  const double n = static_cast<double>(y.cols()), p = static_cast<double>(y.rows());
  return -0.5 * (n * p * std::log(2.0 * M_PI) + n * logdet + quad);
}

}  // namespace oracle

#endif  // BASS_TESTS_ORACLES_HPP_
