#include "core/groups.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "core/errors.hpp"

namespace lgocv {

CorrelationMode correlation_mode_from_string(const std::string& s) {
  if (s == "prior") return CorrelationMode::prior;
  if (s == "posterior") return CorrelationMode::posterior;
  throw_validation(errc::bad_param, "unknown correlation mode: " + s);
}

std::string to_string(CorrelationMode mode) {
  return mode == CorrelationMode::prior ? "prior" : "posterior";
}

namespace {

// Buckets on the rounded grid, keyed descending. The integer key keeps exact
// ties exact.
std::map<long long, std::vector<int>, std::greater<>> level_buckets(
    const Eigen::VectorXd& corr_row, double tie_tol) {
  if (tie_tol <= 0.0) throw_validation(errc::bad_param, "tie tolerance must be positive");
  std::map<long long, std::vector<int>, std::greater<>> buckets;
  for (int j = 0; j < corr_row.size(); ++j) {
    const double c = std::abs(corr_row[j]);
    if (!std::isfinite(c) || c > 1.0 + 1e-9)
      throw_numeric(errc::internal, "correlation outside [-1, 1]");
    buckets[std::llround(c / tie_tol)].push_back(j);
  }
  return buckets;
}

}  // namespace

LevelSets level_sets(const Eigen::VectorXd& corr_row, double tie_tol) {
  LevelSets out;
  for (auto& [key, members] : level_buckets(corr_row, tie_tol)) {
    out.levels.push_back(static_cast<double>(key) * tie_tol);
    out.members.push_back(std::move(members));
  }
  return out;
}

std::vector<int> construct_group(const Eigen::VectorXd& corr_row, int self,
                                 const GroupSpec& spec) {
  if (self < 0 || self >= corr_row.size())
    throw_validation(errc::index_out_of_range, "group anchor out of range");
  if (spec.m < 1) throw_validation(errc::bad_param, "group level count must be positive");

  const auto buckets = level_buckets(corr_row, spec.tie_tol);

  std::vector<int> group;
  int taken = 0;
  for (const auto& [key, members] : buckets) {
    if (taken >= spec.m) break;
    if (key == 0) break;  // zero correlation carries no information
    const bool is_top = taken == 0;
    if (!is_top && spec.max_size > 0 &&
        static_cast<int>(group.size() + members.size()) > spec.max_size)
      break;
    group.insert(group.end(), members.begin(), members.end());
    ++taken;
  }
  if (group.empty()) group.push_back(self);  // self correlation rounded to zero
  std::sort(group.begin(), group.end());
  return group;
}

namespace {

// Prior precision of the latent field made factorizable without moving the
// constrained distribution: adding s*C'C only acts along constraint
// directions, and conditioning on Cf = 0 removes those directions exactly.
SymSparse regularized_prior(const LatentModel& model, const std::vector<double>& natural) {
  SymSparse p = model.prior_precision(natural);
  const SpMat& c = model.constraints();
  if (c.rows() == 0) return p;
  const double scale = std::max(1.0, p.max_abs_diag());
  const SpMat cc = SpMat(c.transpose()) * c;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(cc.nonZeros()));
  for (int k = 0; k < cc.outerSize(); ++k)
    for (SpMat::InnerIterator it(cc, k); it; ++it)
      if (it.row() >= it.col()) trips.emplace_back(it.row(), it.col(), scale * it.value());
  return p + SymSparse::from_triplets(p.n(), trips);
}

}  // namespace

GroupSet construct_all_groups(const LatentModel& model, const std::vector<double>& natural,
                              const GaussianApprox& ga, const GroupSpec& spec) {
  GroupSet out;
  out.spec = spec;
  out.groups.resize(static_cast<size_t>(model.n_obs()));

  const SpMat& a = model.design();

  if (spec.mode == CorrelationMode::posterior) {
    if (!ga.factor) throw_validation(errc::bad_param, "posterior groups need a fitted model");
    PredictorMoments pm(*ga.factor, a, ga.kriging.get());
    for (int i = 0; i < model.n_obs(); ++i)
      out.groups[static_cast<size_t>(i)] = construct_group(pm.correlation_row(i), i, spec);
    return out;
  }

  const SymSparse p = regularized_prior(model, natural);
  const Factor fp = Factor::compute(p, FactorOptions{});
  if (fp.deficiency() > 0)
    throw_numeric(errc::rank_deficient, "prior precision of the predictor is singular");
  std::unique_ptr<ConstraintKriging> krig;
  if (model.constraint_count() > 0)
    krig = std::make_unique<ConstraintKriging>(fp, model.constraints());
  PredictorMoments pm(fp, a, krig.get());
  for (int i = 0; i < model.n_obs(); ++i)
    out.groups[static_cast<size_t>(i)] = construct_group(pm.correlation_row(i), i, spec);
  return out;
}

namespace {

std::map<int, std::vector<int>> class_members(std::span<const int> linkage) {
  std::map<int, std::vector<int>> classes;
  for (size_t i = 0; i < linkage.size(); ++i)
    classes[linkage[i]].push_back(static_cast<int>(i));
  return classes;
}

}  // namespace

GroupSet expand_friendship(const GroupSet& in, std::span<const int> linkage) {
  const size_t n = in.groups.size();
  if (linkage.size() != n)
    throw_validation(errc::bad_linkage, "linkage length does not match group count");
  const auto classes = class_members(linkage);

  GroupSet out;
  out.spec = in.spec;
  out.groups.resize(n);
  for (size_t i = 0; i < n; ++i) {
    std::set<int> acc;
    for (int j : in.groups[i]) {
      if (j < 0 || static_cast<size_t>(j) >= n)
        throw_validation(errc::bad_linkage, "group member out of linkage range");
      const auto& cls = classes.at(linkage[static_cast<size_t>(j)]);
      acc.insert(cls.begin(), cls.end());
    }
    out.groups[i].assign(acc.begin(), acc.end());
  }
  return out;
}

bool is_friendship_closed(const GroupSet& gs, std::span<const int> linkage) {
  const size_t n = gs.groups.size();
  if (linkage.size() != n) return false;
  const auto classes = class_members(linkage);
  for (size_t i = 0; i < n; ++i) {
    std::set<int> have(gs.groups[i].begin(), gs.groups[i].end());
    for (int j : gs.groups[i]) {
      if (j < 0 || static_cast<size_t>(j) >= n) return false;
      for (int k : classes.at(linkage[static_cast<size_t>(j)]))
        if (!have.count(k)) return false;
    }
  }
  return true;
}

std::vector<std::string> classify_groups(const std::vector<std::vector<int>>& groups,
                                         std::span<const int> time_index,
                                         std::span<const int> space_index) {
  const size_t n = groups.size();
  if (!time_index.empty() && time_index.size() != n)
    throw_validation(errc::dimension_mismatch, "time index length does not match group count");
  if (!space_index.empty() && space_index.size() != n)
    throw_validation(errc::dimension_mismatch, "space index length does not match group count");

  auto at = [](std::span<const int> idx, size_t i) { return idx.empty() ? 0 : idx[i]; };

  std::vector<std::string> labels(n);
  for (size_t i = 0; i < n; ++i) {
    bool time_varies = false;
    bool space_varies = false;
    bool has_other = false;
    for (int j : groups[i]) {
      if (j == static_cast<int>(i)) continue;
      has_other = true;
      if (at(time_index, static_cast<size_t>(j)) != at(time_index, i)) time_varies = true;
      if (at(space_index, static_cast<size_t>(j)) != at(space_index, i)) space_varies = true;
    }
    if (!has_other)
      labels[i] = "self";
    else if (time_varies && space_varies)
      labels[i] = "space-time";
    else if (time_varies)
      labels[i] = "time";
    else if (space_varies)
      labels[i] = "space";
    else
      labels[i] = "tied";
  }
  return labels;
}

}  // namespace lgocv
