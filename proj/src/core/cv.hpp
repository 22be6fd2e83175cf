#pragma once

#include <string>
#include <vector>

#include "core/groups.hpp"
#include "core/inference.hpp"

namespace lgocv {

enum class CvMethod { fast, exact };

CvMethod cv_method_from_string(const std::string& s);
std::string to_string(CvMethod m);

struct CvOptions {
  CvMethod method = CvMethod::fast;
  int gh_nodes = 25;        // Poisson predictive quadrature
  int max_fast_group = 32;  // larger groups always refit exactly
};

struct PredictiveRecord {
  int index = 0;
  std::vector<int> group;
  double pred_mean = 0.0;         // E[Y_i | data outside the group]
  double pred_log_density = 0.0;  // log density of the observed value
  bool exact = false;             // refit instead of the downdate path
};

struct CvReport {
  CvMethod method = CvMethod::fast;
  GroupSpec spec;
  std::string group_source = "self";
  double ls = 0.0;    // -mean(pred_log_density)
  double mspe = 0.0;  // mean((pred_mean - y)^2)
  int fallback_count = 0;
  double dic = std::numeric_limits<double>::quiet_NaN();
  double waic = std::numeric_limits<double>::quiet_NaN();
  std::vector<PredictiveRecord> records;
};

// One group per observation, each holding only the observation itself.
// Leave-one-out scoring is exactly grouped scoring over these.
GroupSet singleton_groups(int n);

// Held-out moments of the linear predictor for observation i, removing the
// likelihood information of the whole group from the fitted approximation
// without moving the linearization point.
struct HeldOutMoments {
  double mean = 0.0;
  double var = 0.0;
};

// Posterior mean and variance of the linear predictor of observation `row`
// under an approximation that may have been fitted on any row subset.
HeldOutMoments predictor_moments_at(const LatentModel& model, const GaussianApprox& ga, int row);

// Cross-validated predictive scores at fixed hyperparameters. The fast path
// downdates the full-data Gaussian approximation by the group's likelihood
// curvature; the exact path rebuilds the approximation on the remaining rows.
// A downdate that loses positive-definiteness falls back to the exact path
// and is counted.
CvReport score(const LatentModel& model, const std::vector<double>& natural,
               const GaussianApprox& ga, const GroupSet& gs, const CvOptions& opts = {});

// Scoring over linked coordinates: requires groups already expanded so every
// group is a union of whole link classes.
CvReport score_grouped_coordinates(const LatentModel& model, const std::vector<double>& natural,
                                   const GaussianApprox& ga, const GroupSet& gs,
                                   std::span<const int> linkage, const CvOptions& opts = {});

}  // namespace lgocv
