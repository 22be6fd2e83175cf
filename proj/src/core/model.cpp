#include "core/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "core/errors.hpp"

namespace lgocv {

namespace {

// guard bounds on the internal scale; outside them the posterior is treated
// as zero so the optimizer cannot wander into overflow territory
constexpr double kLogPrecBound = 18.42;  // precision within [1e-8, 1e8]
constexpr double kFisherZBound = 7.0;
constexpr double kLogitBound = 30.0;

double pc_precision_rate(double u, double alpha) {
  if (!(u > 0.0) || !(alpha > 0.0 && alpha < 1.0)) {
    throw_validation(errc::bad_param, "pc precision prior needs u > 0 and alpha in (0, 1)");
  }
  return -std::log(alpha) / u;
}

}  // namespace

Likelihood likelihood_from_string(const std::string& s) {
  if (s == "gaussian") return Likelihood::gaussian;
  if (s == "poisson") return Likelihood::poisson;
  throw_validation(errc::schema_error, "unknown likelihood: " + s);
}

std::string to_string(Likelihood lik) {
  return lik == Likelihood::gaussian ? "gaussian" : "poisson";
}

double transform_to_natural(HyperTransform t, double internal) {
  switch (t) {
    case HyperTransform::log_precision: return std::exp(internal);
    case HyperTransform::logit_unit: return 1.0 / (1.0 + std::exp(-internal));
    case HyperTransform::fisher_z: return std::tanh(internal);
  }
  throw_numeric(errc::internal, "unknown transform");
}

double transform_to_internal(HyperTransform t, double natural) {
  switch (t) {
    case HyperTransform::log_precision:
      if (!(natural > 0.0)) throw_validation(errc::bad_param, "precision must be positive");
      return std::log(natural);
    case HyperTransform::logit_unit:
      if (!(natural > 0.0 && natural < 1.0)) {
        throw_validation(errc::bad_param, "mixing value must lie in (0, 1)");
      }
      return std::log(natural / (1.0 - natural));
    case HyperTransform::fisher_z:
      if (!(std::abs(natural) < 1.0)) {
        throw_validation(errc::bad_param, "correlation must lie in (-1, 1)");
      }
      return std::atanh(natural);
  }
  throw_numeric(errc::internal, "unknown transform");
}

bool internal_in_bounds(HyperTransform t, double internal) {
  if (!std::isfinite(internal)) return false;
  switch (t) {
    case HyperTransform::log_precision: return std::abs(internal) <= kLogPrecBound;
    case HyperTransform::logit_unit: return std::abs(internal) <= kLogitBound;
    case HyperTransform::fisher_z: return std::abs(internal) <= kFisherZBound;
  }
  return false;
}

double mixing_distance(double phi, const std::vector<double>& gamma) {
  const int n = static_cast<int>(gamma.size());
  double trace = 0.0;
  double logdet = 0.0;
  for (double g : gamma) {
    trace += g;
    logdet += std::log1p(phi * (g - 1.0));
  }
  const double kld = 0.5 * (phi * (trace - n) - logdet);
  return std::sqrt(std::max(2.0 * kld, 0.0));
}

double mixing_distance_slope(double phi, const std::vector<double>& gamma) {
  const double d = mixing_distance(phi, gamma);
  if (!(d > 0.0)) return 0.0;
  double kprime = 0.0;
  for (double g : gamma) {
    const double gm1 = g - 1.0;
    kprime += 0.5 * phi * gm1 * gm1 / (1.0 + phi * gm1);
  }
  return kprime / d;
}

LatentModel::LatentModel(Likelihood lik, Eigen::VectorXd y, Eigen::VectorXd exposure,
                         std::vector<BlockPtr> blocks,
                         const std::map<std::string, PriorSpec>& priors)
    : lik_(lik), y_(std::move(y)), exposure_(std::move(exposure)), blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw_validation(errc::bad_param, "model needs at least one effect");
  const int n = static_cast<int>(y_.size());
  if (n == 0) throw_validation(errc::bad_param, "model needs observations");
  if (exposure_.size() == 0) exposure_ = Eigen::VectorXd::Ones(n);
  if (exposure_.size() != n) {
    throw_validation(errc::dimension_mismatch, "exposure length does not match y");
  }

  std::set<std::string> block_names;
  offsets_.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (!block_names.insert(blocks_[b]->name()).second) {
      throw_validation(errc::bad_param, "duplicate effect name: " + blocks_[b]->name());
    }
    if (blocks_[b]->observation_count() != n) {
      throw_validation(errc::dimension_mismatch,
                       "effect '" + blocks_[b]->name() + "' covers " +
                           std::to_string(blocks_[b]->observation_count()) +
                           " observations, data has " + std::to_string(n));
    }
    offsets_[b] = latent_dim_;
    latent_dim_ += blocks_[b]->dim();
  }

  // design matrix
  {
    std::vector<Triplet> t;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      for (int i = 0; i < n; ++i) {
        for (auto& [j, v] : blocks_[b]->design_entries(i)) t.emplace_back(i, offsets_[b] + j, v);
      }
    }
    design_.resize(n, latent_dim_);
    design_.setFromTriplets(t.begin(), t.end());
    design_.makeCompressed();
  }

  // constraint rows, one batch per deficient block
  {
    std::vector<Triplet> t;
    int row = 0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const Eigen::MatrixXd& nb = blocks_[b]->null_basis();
      for (int r = 0; r < nb.rows(); ++r, ++row) {
        for (int j = 0; j < nb.cols(); ++j) {
          if (nb(r, j) != 0.0) t.emplace_back(row, offsets_[b] + j, nb(r, j));
        }
      }
    }
    constraints_.resize(row, latent_dim_);
    constraints_.setFromTriplets(t.begin(), t.end());
    constraints_.makeCompressed();
  }

  // hyperparameter table: likelihood hyper first, then per block in order
  std::set<std::string> known_keys;
  if (lik_ == Likelihood::gaussian) {
    HyperInfo h;
    h.name = "gaussian.tau_y";
    h.transform = HyperTransform::log_precision;
    h.default_natural = 1.0;
    hypers_.push_back(std::move(h));
    known_keys.insert("gaussian.tau_y");
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto slots = blocks_[b]->hypers();
    for (std::size_t s = 0; s < slots.size(); ++s) {
      HyperInfo h;
      h.name = blocks_[b]->name() + "." + slots[s].name;
      h.transform = slots[s].transform;
      h.default_natural = slots[s].default_value;
      h.block = static_cast<int>(b);
      h.slot = static_cast<int>(s);
      known_keys.insert(h.name);
      hypers_.push_back(std::move(h));
    }
  }
  for (const auto& [key, spec] : priors) {
    if (!known_keys.count(key)) {
      throw_validation(errc::schema_error, "prior refers to unknown hyperparameter: " + key);
    }
    (void)spec;
  }

  for (auto& h : hypers_) {
    // defaults: dispersion-type hypers get the uniform standard deviation
    // prior, correlations stay flat, mixing weights get the distance prior
    auto it = priors.find(h.name);
    if (it != priors.end()) {
      h.prior = it->second;
    } else if (h.transform == HyperTransform::log_precision) {
      h.prior.kind = PriorSpec::Kind::uniform_stdev;
    } else if (h.transform == HyperTransform::logit_unit) {
      h.prior.kind = PriorSpec::Kind::pc_mixing;
      h.prior.u = 0.5;
      h.prior.alpha = 0.5;
    } else {
      h.prior.kind = PriorSpec::Kind::flat;
    }

    if (h.prior.kind == PriorSpec::Kind::fixed_value) {
      h.free = false;
      // sanity-check the pinned value through the transform
      (void)transform_to_internal(h.transform, h.prior.value);
    } else {
      ++free_dim_;
    }
    if (h.prior.kind == PriorSpec::Kind::uniform_stdev ||
        h.prior.kind == PriorSpec::Kind::pc_precision) {
      if (h.transform != HyperTransform::log_precision) {
        throw_validation(errc::bad_param,
                         "prior on " + h.name + " requires a precision-type hyperparameter");
      }
    }
    if (h.prior.kind == PriorSpec::Kind::pc_mixing) {
      if (h.transform != HyperTransform::logit_unit || h.block < 0 ||
          blocks_[h.block]->mixing_eigenvalues().empty()) {
        throw_validation(errc::bad_param,
                         "mixing prior on " + h.name + " needs a mixing-structure effect");
      }
      h.mixing_eigen = &blocks_[h.block]->mixing_eigenvalues();
      if (!(h.prior.u > 0.0 && h.prior.u < 1.0) || !(h.prior.alpha > 0.0 && h.prior.alpha < 1.0)) {
        throw_validation(errc::bad_param, "mixing prior needs u and alpha in (0, 1)");
      }
      // rate of a truncated exponential on the distance scale, matched so
      // that P(phi < u) = alpha
      h.mixing_dmax = mixing_distance(1.0 - 1e-6, *h.mixing_eigen);
      const double du = mixing_distance(h.prior.u, *h.mixing_eigen);
      if (!(du > 0.0) || !(h.mixing_dmax > du)) {
        throw_validation(errc::bad_param, "mixing prior distance scale is degenerate");
      }
      auto prob = [&](double lambda) {
        return (1.0 - std::exp(-lambda * du)) / (1.0 - std::exp(-lambda * h.mixing_dmax));
      };
      double lo = 1e-8, hi = 1e3;
      if (h.prior.alpha <= prob(lo) || h.prior.alpha >= prob(hi)) {
        throw_validation(errc::bad_param, "mixing prior tail probability is unreachable");
      }
      for (int it2 = 0; it2 < 200; ++it2) {
        const double mid = 0.5 * (lo + hi);
        (prob(mid) < h.prior.alpha ? lo : hi) = mid;
      }
      h.mixing_rate = 0.5 * (lo + hi);
    }
  }
}

std::vector<std::string> LatentModel::free_names() const {
  std::vector<std::string> out;
  for (const auto& h : hypers_) {
    if (h.free) out.push_back(h.name);
  }
  return out;
}

Eigen::VectorXd LatentModel::default_internal() const {
  Eigen::VectorXd out(free_dim_);
  int k = 0;
  for (const auto& h : hypers_) {
    if (h.free) out[k++] = transform_to_internal(h.transform, h.default_natural);
  }
  return out;
}

std::vector<double> LatentModel::natural_values(const Eigen::VectorXd& internal) const {
  if (internal.size() != free_dim_) {
    throw_validation(errc::dimension_mismatch, "hyperparameter vector has wrong length");
  }
  std::vector<double> out(hypers_.size());
  int k = 0;
  for (std::size_t i = 0; i < hypers_.size(); ++i) {
    out[i] = hypers_[i].free ? transform_to_natural(hypers_[i].transform, internal[k++])
                             : hypers_[i].prior.value;
  }
  return out;
}

double LatentModel::log_prior_internal(const Eigen::VectorXd& internal) const {
  if (internal.size() != free_dim_) {
    throw_validation(errc::dimension_mismatch, "hyperparameter vector has wrong length");
  }
  double lp = 0.0;
  int k = 0;
  for (const auto& h : hypers_) {
    if (!h.free) continue;
    const double psi = internal[k++];
    if (!internal_in_bounds(h.transform, psi)) return -std::numeric_limits<double>::infinity();
    switch (h.prior.kind) {
      case PriorSpec::Kind::uniform_stdev:
        // flat on the standard deviation, mapped to the log precision scale
        lp += -0.5 * psi - std::numbers::ln2;
        break;
      case PriorSpec::Kind::pc_precision: {
        const double rate = pc_precision_rate(h.prior.u, h.prior.alpha);
        lp += std::log(rate) - rate * std::exp(-0.5 * psi) - 0.5 * psi - std::numbers::ln2;
        break;
      }
      case PriorSpec::Kind::pc_mixing: {
        const double phi = transform_to_natural(HyperTransform::logit_unit, psi);
        const double d = mixing_distance(phi, *h.mixing_eigen);
        if (d >= h.mixing_dmax) return -std::numeric_limits<double>::infinity();
        const double slope = mixing_distance_slope(phi, *h.mixing_eigen);
        if (!(slope > 0.0)) return -std::numeric_limits<double>::infinity();
        const double log_trunc = std::log1p(-std::exp(-h.mixing_rate * h.mixing_dmax));
        lp += std::log(h.mixing_rate) - h.mixing_rate * d - log_trunc + std::log(slope) +
              std::log(phi) + std::log1p(-phi);
        break;
      }
      case PriorSpec::Kind::flat:
        break;
      case PriorSpec::Kind::fixed_value:
        break;
    }
  }
  return lp;
}

SymSparse LatentModel::prior_precision(const std::vector<double>& natural) const {
  std::vector<Triplet> t;
  std::size_t hyper_pos = lik_ == Likelihood::gaussian ? 1 : 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::size_t nslots = blocks_[b]->hypers().size();
    const std::span<const double> h(natural.data() + hyper_pos, nslots);
    hyper_pos += nslots;
    const SymSparse bp = blocks_[b]->precision(h);
    const SpMat& low = bp.lower();
    const int off = offsets_[b];
    for (int j = 0; j < low.outerSize(); ++j) {
      for (SpMat::InnerIterator it(low, j); it; ++it) {
        t.emplace_back(off + static_cast<int>(it.row()), off + j, it.value());
      }
    }
  }
  return SymSparse::from_triplets(latent_dim_, t);
}

double LatentModel::prior_log_gdet(const std::vector<double>& natural) const {
  double s = 0.0;
  std::size_t hyper_pos = lik_ == Likelihood::gaussian ? 1 : 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::size_t nslots = blocks_[b]->hypers().size();
    s += blocks_[b]->log_gdet({natural.data() + hyper_pos, nslots});
    hyper_pos += nslots;
  }
  return s;
}

double LatentModel::gaussian_tau(const std::vector<double>& natural) const {
  if (lik_ != Likelihood::gaussian) {
    throw_numeric(errc::internal, "likelihood precision requested for a non-gaussian model");
  }
  return natural[0];
}

double LatentModel::log_lik(const Eigen::VectorXd& eta,
                            const std::vector<double>& natural) const {
  if (eta.size() != y_.size()) {
    throw_validation(errc::dimension_mismatch, "linear predictor has wrong length");
  }
  double s = 0.0;
  if (lik_ == Likelihood::gaussian) {
    const double tau = gaussian_tau(natural);
    const double c = 0.5 * std::log(tau / (2.0 * std::numbers::pi));
    for (int i = 0; i < y_.size(); ++i) {
      const double r = y_[i] - eta[i];
      s += c - 0.5 * tau * r * r;
    }
  } else {
    for (int i = 0; i < y_.size(); ++i) {
      const double log_mu = std::log(exposure_[i]) + eta[i];
      s += y_[i] * log_mu - std::exp(log_mu) - std::lgamma(y_[i] + 1.0);
    }
  }
  return s;
}

double LatentModel::log_lik_rows(const Eigen::VectorXd& eta,
                                 const std::vector<double>& natural,
                                 std::span<const int> rows) const {
  double s = 0.0;
  if (lik_ == Likelihood::gaussian) {
    const double tau = gaussian_tau(natural);
    const double c = 0.5 * std::log(tau / (2.0 * std::numbers::pi));
    for (int i : rows) {
      const double r = y_[i] - eta[i];
      s += c - 0.5 * tau * r * r;
    }
  } else {
    for (int i : rows) {
      const double log_mu = std::log(exposure_[i]) + eta[i];
      s += y_[i] * log_mu - std::exp(log_mu) - std::lgamma(y_[i] + 1.0);
    }
  }
  return s;
}

void LatentModel::lik_derivs(const Eigen::VectorXd& eta, const std::vector<double>& natural,
                             Eigen::VectorXd& grad, Eigen::VectorXd& weight) const {
  grad.resize(y_.size());
  weight.resize(y_.size());
  if (lik_ == Likelihood::gaussian) {
    const double tau = gaussian_tau(natural);
    for (int i = 0; i < y_.size(); ++i) {
      grad[i] = tau * (y_[i] - eta[i]);
      weight[i] = tau;
    }
  } else {
    for (int i = 0; i < y_.size(); ++i) {
      const double mu = exposure_[i] * std::exp(eta[i]);
      grad[i] = y_[i] - mu;
      weight[i] = mu;
    }
  }
}

std::vector<std::string> LatentModel::validate() const {
  std::vector<std::string> problems;
  const int n = n_obs();
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(y_[i])) {
      problems.push_back("observation " + std::to_string(i + 1) + " is not finite");
      break;
    }
  }
  if (lik_ == Likelihood::poisson) {
    for (int i = 0; i < n; ++i) {
      if (y_[i] < 0 || y_[i] != std::floor(y_[i])) {
        problems.push_back("count observation " + std::to_string(i + 1) +
                           " is not a nonnegative integer");
        break;
      }
    }
    for (int i = 0; i < n; ++i) {
      if (!(exposure_[i] > 0.0)) {
        problems.push_back("exposure " + std::to_string(i + 1) + " is not positive");
        break;
      }
    }
  }

  // every latent coordinate must be informed by data or pinned by a constraint
  std::vector<char> covered(latent_dim_, 0);
  for (int j = 0; j < design_.outerSize(); ++j) {
    for (SpMat::InnerIterator it(design_, j); it; ++it) {
      if (it.value() != 0.0) covered[j] = 1;
    }
  }
  for (int j = 0; j < constraints_.outerSize(); ++j) {
    for (SpMat::InnerIterator it(constraints_, j); it; ++it) {
      if (it.value() != 0.0) covered[j] = 1;
    }
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    int missing = 0;
    int first = -1;
    for (int j = 0; j < blocks_[b]->dim(); ++j) {
      if (!covered[offsets_[b] + j]) {
        ++missing;
        if (first < 0) first = j;
      }
    }
    if (missing > 0) {
      problems.push_back("effect '" + blocks_[b]->name() + "' has " + std::to_string(missing) +
                         " component(s) with no observation, first at index " +
                         std::to_string(first + 1));
    }
  }
  return problems;
}

}  // namespace lgocv
