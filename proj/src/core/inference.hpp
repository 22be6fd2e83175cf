#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "core/model.hpp"
#include "core/rng.hpp"

namespace lgocv {

// Normal approximation to the latent field given hyperparameters, restricted
// to the model constraints. For the gaussian likelihood this is exact.
struct GaussianApprox {
  Eigen::VectorXd mode;  // constrained posterior mean of the latent field
  Eigen::VectorXd eta;   // design * mode over all observations
  std::shared_ptr<Factor> factor;                // factor of P + A' W A
  std::shared_ptr<ConstraintKriging> kriging;    // null when unconstrained
  double quad_form = 0.0;                        // mode' P mode
  double log_lik = 0.0;                          // active-row likelihood at the mode
  int newton_iterations = 0;
};

// rows selects the active observation subset; empty means every row.
// warm, when given, seeds the Newton iteration.
GaussianApprox gaussian_approx(const LatentModel& m, const std::vector<double>& natural,
                               std::span<const int> rows = {},
                               const Eigen::VectorXd* warm = nullptr);

// Log joint density of data and hyperparameters with the latent field
// integrated out by the normal approximation (internal scale, prior
// Jacobians included); -inf outside the guard bounds.
double log_marginal_posterior(const LatentModel& m, const Eigen::VectorXd& internal,
                              GaussianApprox* approx_out = nullptr,
                              std::span<const int> rows = {});

struct OptimOptions {
  int max_evals = 2000;
  double tol = 1e-6;
  double init_step = 1.0;
};

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> trace;  // best objective value after each improvement
};

// Derivative-free simplex minimizer with one shrunken restart around the
// incumbent. Throws no_convergence when the evaluation budget runs out.
SimplexResult minimize_simplex(const std::function<double(const Eigen::VectorXd&)>& fn,
                               const Eigen::VectorXd& x0, const OptimOptions& opts);

struct CcdPoint {
  Eigen::VectorXd internal;
  double log_posterior = 0.0;
};

struct FitOptions {
  OptimOptions optim;
  bool hyper_stdev = true;   // finite-difference spread of the hyper mode
  bool latent_stdev = true;  // marginal standard deviations of the latent field
  bool ccd = false;          // evaluate a small design grid around the mode
  Eigen::VectorXd start;     // internal-scale start; empty uses the defaults
  std::vector<int> rows;     // observation subset to fit on; empty uses all
};

struct HyperSummary {
  std::string name;
  double natural = 0.0;
  double internal = 0.0;
  bool free = true;
  double internal_stdev = std::numeric_limits<double>::quiet_NaN();
};

struct FitResult {
  std::vector<HyperSummary> hypers;
  Eigen::VectorXd theta_internal;  // free coordinates at the mode
  double log_evidence = 0.0;       // objective value at the mode
  GaussianApprox approx;           // at the hyper mode, all rows active
  Eigen::VectorXd latent_sd;       // empty unless requested
  int evaluations = 0;
  bool converged = true;
  std::vector<double> trace;
  std::vector<CcdPoint> ccd;
};

FitResult fit_model(const LatentModel& m, const FitOptions& opts = {});

struct InformationCriteria {
  double dic = 0.0;
  double p_dic = 0.0;
  double waic = 0.0;
  double p_waic = 0.0;
  double mean_deviance = 0.0;
  double lppd = 0.0;
  double mc_se_mean_deviance = 0.0;
  int samples = 0;
};

InformationCriteria information_criteria(const LatentModel& m, const GaussianApprox& ga,
                                         const std::vector<double>& natural, int n_samples,
                                         std::uint64_t seed);

// One constrained draw of the latent field around the approximation mode.
Eigen::VectorXd sample_latent(const GaussianApprox& ga, Philox& rng);

double quad_form(const SymSparse& m, const Eigen::VectorXd& v);

// Row subset of a sparse matrix, preserving column count.
SpMat take_rows(const SpMat& a, std::span<const int> rows);

}  // namespace lgocv
