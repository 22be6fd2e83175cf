#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "core/graph.hpp"

namespace lgocv {

// Synthetic series for the forecasting experiments: a stationary AR(1) path
// with unit marginal variance observed through additive Gaussian noise, and a
// signed-square distortion of the path serving as the covariate handed to the
// regression model.
struct TemporalData {
  Eigen::VectorXd x_true;   // latent AR(1) path
  Eigen::VectorXd x_tilde;  // x * |x|
  Eigen::VectorXd y;        // intercept + x_true + noise
};

struct TemporalSimOptions {
  double rho = 0.9;
  double noise_sd = 0.1;
  double intercept = 0.0;
};

TemporalData simulate_temporal(std::uint64_t seed, int n, const TemporalSimOptions& opts = {});

// Synthetic disease-mapping lattice: rook adjacency, a smooth standardized
// covariate surface, log relative risk = intercept + coef * covariate + a
// scaled intrinsic CAR draw (sum-to-zero within each graph component), and
// Poisson counts against uniformly drawn expected counts.
struct LatticeData {
  Graph graph;
  Eigen::VectorXd covariate;
  Eigen::VectorXd expected;  // uniform on [expected_lo, expected_hi]
  Eigen::VectorXd log_risk;
  Eigen::VectorXd y;
};

struct LatticeSimOptions {
  double intercept = 0.0;
  double covariate_coef = 0.4;
  double spatial_sd = 0.3;  // 0 drops the spatial field entirely
  double expected_lo = 50.0;
  double expected_hi = 500.0;
};

LatticeData simulate_lattice(std::uint64_t seed, int rows, int cols,
                             const LatticeSimOptions& opts = {});

}  // namespace lgocv
