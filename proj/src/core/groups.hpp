#pragma once

#include <string>
#include <vector>

#include "core/inference.hpp"

namespace lgocv {

enum class CorrelationMode { prior, posterior };

CorrelationMode correlation_mode_from_string(const std::string& s);
std::string to_string(CorrelationMode mode);

struct GroupSpec {
  int m = 3;           // number of correlation levels kept, the top one included
  CorrelationMode mode = CorrelationMode::prior;
  int max_size = 50;   // whole-level cap on group size; 0 means unlimited
  double tie_tol = 1e-4;  // grid on |correlation| that defines a level
};

struct GroupSet {
  GroupSpec spec;
  std::vector<std::vector<int>> groups;  // per observation, sorted, self included
};

// Unique rounded |correlation| values, descending, with the indices at each
// value. The zero level is kept here; every index lands in exactly one level.
struct LevelSets {
  std::vector<double> levels;
  std::vector<std::vector<int>> members;
};

LevelSets level_sets(const Eigen::VectorXd& corr_row, double tie_tol);

// Observations whose linear predictor is most correlated with observation
// `self`, grouped by rounded |correlation| level. Levels enter whole, largest
// first; the level containing `self` always enters, a level that would push
// the group past max_size stops the scan, and the zero level never enters.
std::vector<int> construct_group(const Eigen::VectorXd& corr_row, int self,
                                 const GroupSpec& spec);

// Groups for every observation from prior or posterior correlations of the
// linear predictor at the given hyperparameters.
GroupSet construct_all_groups(const LatentModel& model, const std::vector<double>& natural,
                              const GaussianApprox& ga, const GroupSpec& spec);

// Coordinate linkage: observations sharing a linkage id form one class (the
// coordinates of a single multivariate sample). Expansion replaces each group
// by the union of the full classes of its members, so holding out a member
// holds out every linked coordinate with it. Idempotent; the size cap is not
// re-applied.
GroupSet expand_friendship(const GroupSet& in, std::span<const int> linkage);
bool is_friendship_closed(const GroupSet& gs, std::span<const int> linkage);

// Structural reading of each group given optional time and space indices of
// the observations (empty span = the dimension is constant). Labels:
// "self", "time", "space", "space-time", "tied".
std::vector<std::string> classify_groups(const std::vector<std::vector<int>>& groups,
                                         std::span<const int> time_index,
                                         std::span<const int> space_index);

}  // namespace lgocv
