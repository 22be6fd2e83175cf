#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "core/effects.hpp"
#include "core/linalg.hpp"

namespace lgocv {

enum class Likelihood { gaussian, poisson };

Likelihood likelihood_from_string(const std::string& s);
std::string to_string(Likelihood lik);

struct PriorSpec {
  enum class Kind { uniform_stdev, pc_precision, pc_mixing, flat, fixed_value };
  Kind kind = Kind::uniform_stdev;
  double u = 1.0;       // scale parameter of the pc families
  double alpha = 0.01;  // tail probability of the pc families
  double value = 0.0;   // pinned natural value for fixed_value
};

// One hyperparameter of the assembled model. Internal scale is the
// unconstrained optimizer scale defined by the transform.
struct HyperInfo {
  std::string name;  // "<effect>.<slot>" or "gaussian.tau_y"
  HyperTransform transform;
  PriorSpec prior;
  double default_natural = 1.0;
  int block = -1;  // -1 for the likelihood hyper
  int slot = -1;
  bool free = true;
  // precomputed rate of the truncated exponential for pc_mixing priors
  double mixing_rate = 0.0;
  double mixing_dmax = 0.0;
  const std::vector<double>* mixing_eigen = nullptr;
};

double transform_to_natural(HyperTransform t, double internal);
double transform_to_internal(HyperTransform t, double natural);
bool internal_in_bounds(HyperTransform t, double internal);

// Kullback-Leibler based distance of the mixing parameter from the
// unstructured base model; gamma holds the generalized-inverse eigenvalues
// of the structured component including zeros.
double mixing_distance(double phi, const std::vector<double>& gamma);
// derivative of the distance in phi (analytic; the distance has steep
// curvature near phi = 1 where finite differences lose accuracy)
double mixing_distance_slope(double phi, const std::vector<double>& gamma);

class LatentModel {
 public:
  LatentModel(Likelihood lik, Eigen::VectorXd y, Eigen::VectorXd exposure,
              std::vector<BlockPtr> blocks, const std::map<std::string, PriorSpec>& priors);

  Likelihood likelihood() const { return lik_; }
  int n_obs() const { return static_cast<int>(y_.size()); }
  int latent_dim() const { return latent_dim_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& exposure() const { return exposure_; }
  const SpMat& design() const { return design_; }
  const SpMat& constraints() const { return constraints_; }
  int constraint_count() const { return static_cast<int>(constraints_.rows()); }

  int block_count() const { return static_cast<int>(blocks_.size()); }
  const EffectBlock& block(int i) const { return *blocks_[i]; }
  int block_offset(int i) const { return offsets_[i]; }

  const std::vector<HyperInfo>& hypers() const { return hypers_; }
  int free_dim() const { return free_dim_; }
  std::vector<std::string> free_names() const;
  Eigen::VectorXd default_internal() const;
  // expands the free internal vector to natural values for every hyper,
  // fixed ones included
  std::vector<double> natural_values(const Eigen::VectorXd& internal) const;
  // log prior density of the free hypers on the internal scale, with the
  // transform Jacobians included; -inf outside the guard bounds
  double log_prior_internal(const Eigen::VectorXd& internal) const;

  SymSparse prior_precision(const std::vector<double>& natural) const;
  double prior_log_gdet(const std::vector<double>& natural) const;
  int prior_rank_deficiency() const { return constraint_count(); }
  double gaussian_tau(const std::vector<double>& natural) const;

  double log_lik(const Eigen::VectorXd& eta, const std::vector<double>& natural) const;
  double log_lik_rows(const Eigen::VectorXd& eta, const std::vector<double>& natural,
                     std::span<const int> rows) const;
  // pointwise gradient and negative second derivative of the log likelihood
  // in eta; weight is the curvature entering the normal approximation
  void lik_derivs(const Eigen::VectorXd& eta, const std::vector<double>& natural,
                  Eigen::VectorXd& grad, Eigen::VectorXd& weight) const;

  std::vector<std::string> validate() const;

 private:
  Likelihood lik_;
  Eigen::VectorXd y_;
  Eigen::VectorXd exposure_;
  std::vector<BlockPtr> blocks_;
  std::vector<int> offsets_;
  int latent_dim_ = 0;
  SpMat design_;
  SpMat constraints_;
  std::vector<HyperInfo> hypers_;
  int free_dim_ = 0;
};

}  // namespace lgocv
