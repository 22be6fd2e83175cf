#include "core/cv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/errors.hpp"
#include "core/quadrature.hpp"
#include "core/util.hpp"

namespace lgocv {

CvMethod cv_method_from_string(const std::string& s) {
  if (s == "fast") return CvMethod::fast;
  if (s == "exact") return CvMethod::exact;
  throw_validation(errc::bad_param, "unknown cv method: " + s);
}

std::string to_string(CvMethod m) { return m == CvMethod::fast ? "fast" : "exact"; }

GroupSet singleton_groups(int n) {
  GroupSet gs;
  gs.spec.m = 1;
  gs.groups.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) gs.groups[static_cast<size_t>(i)] = {i};
  return gs;
}

namespace {

// Woodbury view of (Q - U C U')^{-1} built on the factor of Q. The
// capacitance M = C^{-1} - U' Q^{-1} U must stay positive definite for the
// downdated precision to remain one.
struct Downdate {
  Eigen::MatrixXd u;        // latent_dim x g, columns are design rows of the group
  Eigen::MatrixXd q_inv_u;  // Q^{-1} U
  Eigen::LDLT<Eigen::MatrixXd> cap;

  // maps Q^{-1} x to (Q - U C U')^{-1} x
  Eigen::MatrixXd apply(const Eigen::MatrixXd& q_inv_x) const {
    return q_inv_x + q_inv_u * cap.solve(u.transpose() * q_inv_x);
  }
};

Downdate make_downdate(const Factor& f, const Eigen::MatrixXd& u,
                       const Eigen::VectorXd& curvature) {
  Downdate d;
  d.u = u;
  d.q_inv_u = f.solve(u);
  Eigen::MatrixXd m = -u.transpose() * d.q_inv_u;
  for (int k = 0; k < curvature.size(); ++k) {
    if (curvature[k] <= 0.0)
      throw_numeric(errc::downdate_indefinite, "group row carries no likelihood curvature");
    m(k, k) += 1.0 / curvature[k];
  }
  d.cap.compute(m);
  const double max_pivot = d.cap.vectorD().cwiseAbs().maxCoeff();
  if (d.cap.info() != Eigen::Success || d.cap.vectorD().minCoeff() <= 1e-12 * max_pivot)
    throw_numeric(errc::downdate_indefinite, "downdated precision lost positive-definiteness");
  return d;
}

struct Predictive {
  double mean = 0.0;
  double log_density = 0.0;
};

// log of integral exp(l(eta)) d eta by Gauss-Hermite centered at the mode of
// l with curvature matching. The plain rule centered on the Gaussian factor
// cannot resolve a likelihood kernel much narrower than the held-out spread;
// recentering makes node doubling inert. l must be strictly concave with
// second derivative l2(eta) <= -1/var_floor.
template <typename L, typename L1, typename L2>
double log_adaptive_gh(const QuadratureRule& rule, double start, L&& l, L1&& l1, L2&& l2) {
  double eta = start;
  double val = l(eta);
  for (int it = 0; it < 100; ++it) {
    const double step = -l1(eta) / l2(eta);
    double scale = 1.0;
    bool moved = false;
    for (int h = 0; h < 50; ++h) {
      const double cand = eta + scale * step;
      const double v = l(cand);
      if (std::isfinite(v) && v >= val) {
        eta = cand;
        val = v;
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!moved || std::abs(scale * step) < 1e-13 * (1.0 + std::abs(eta))) break;
  }
  const double sd = std::sqrt(-1.0 / l2(eta));
  double max_term = -std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(rule.nodes.size());
  Eigen::VectorXd terms(n);
  for (int k = 0; k < n; ++k) {
    const double x = rule.nodes[k];
    terms[k] = std::log(rule.weights[k]) + x * x + l(eta + std::numbers::sqrt2 * sd * x);
    max_term = std::max(max_term, terms[k]);
  }
  if (!std::isfinite(max_term)) return max_term;
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += std::exp(terms[k] - max_term);
  return max_term + std::log(s) + std::log(std::numbers::sqrt2 * sd);
}

Predictive predictive_from_eta(const LatentModel& model, const std::vector<double>& natural,
                               int i, const HeldOutMoments& mom, const QuadratureRule& rule) {
  Predictive out;
  const double y = model.y()[i];
  if (model.likelihood() == Likelihood::gaussian) {
    const double tau = model.gaussian_tau(natural);
    const double s2 = mom.var + 1.0 / tau;
    out.mean = mom.mean;
    out.log_density = -0.5 * std::log(2.0 * std::numbers::pi * s2) - (y - mom.mean) * (y - mom.mean) / (2.0 * s2);
    return out;
  }
  const double e = model.exposure().size() > 0 ? model.exposure()[i] : 1.0;
  const double log_e = std::log(e);
  const double lg = std::lgamma(y + 1.0);
  if (mom.var <= 0.0) {
    const double log_mu = log_e + mom.mean;
    out.log_density = y * log_mu - std::exp(log_mu) - lg;
    out.mean = std::exp(log_mu);
    return out;
  }
  const double mu = mom.mean;
  const double v = mom.var;
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * v);
  auto gauss = [&](double eta) { return log_norm - (eta - mu) * (eta - mu) / (2.0 * v); };
  out.log_density = log_adaptive_gh(
      rule, y > 0 ? std::log(y / e) : mu,
      [&](double eta) { return gauss(eta) + y * (log_e + eta) - std::exp(log_e + eta) - lg; },
      [&](double eta) { return -(eta - mu) / v + y - std::exp(log_e + eta); },
      [&](double eta) { return -1.0 / v - std::exp(log_e + eta); });
  // the mean integrand is exactly Gaussian in log scale, so the recentred
  // rule reproduces the lognormal moment to round-off
  out.mean = std::exp(log_adaptive_gh(
      rule, mu + v,
      [&](double eta) { return gauss(eta) + log_e + eta; },
      [&](double eta) { return -(eta - mu) / v + 1.0; },
      [&](double eta) { return -1.0 / v; }));
  return out;
}

// Moments of eta_i from a fitted approximation on a row subset: mean from the
// constrained mode, variance by one solve plus the constraint correction.
HeldOutMoments subset_moments(const GaussianApprox& ga, const Eigen::VectorXd& a_i) {
  HeldOutMoments mom;
  mom.mean = a_i.dot(ga.mode);
  const Eigen::VectorXd q_inv_a = ga.factor->solve(a_i);
  mom.var = a_i.dot(q_inv_a);
  if (ga.kriging) {
    const Eigen::VectorXd va = ga.kriging->premultiply_v(a_i);
    mom.var -= ga.kriging->cov_correction(va, va);
  }
  // a zero design row has a deterministic predictor; only negative values
  // beyond round-off signal a broken covariance
  if (!std::isfinite(mom.var) || mom.var < -1e-10)
    throw_numeric(errc::internal, "held-out predictor variance negative");
  mom.var = std::max(mom.var, 0.0);
  return mom;
}

}  // namespace

HeldOutMoments predictor_moments_at(const LatentModel& model, const GaussianApprox& ga, int row) {
  if (row < 0 || row >= model.n_obs()) {
    throw_validation(errc::index_out_of_range, "predictor row out of range");
  }
  if (!ga.factor) throw_validation(errc::bad_param, "approximation carries no factor");
  const Eigen::VectorXd a = model.design().row(row).transpose();
  return subset_moments(ga, a);
}

namespace {

std::vector<int> complement_rows(int n, const std::vector<int>& group) {
  std::vector<char> in(static_cast<size_t>(n), 0);
  for (int k : group) in[static_cast<size_t>(k)] = 1;
  std::vector<int> rows;
  rows.reserve(static_cast<size_t>(n) - group.size());
  for (int r = 0; r < n; ++r)
    if (!in[static_cast<size_t>(r)]) rows.push_back(r);
  return rows;
}

}  // namespace

CvReport score(const LatentModel& model, const std::vector<double>& natural,
               const GaussianApprox& ga, const GroupSet& gs, const CvOptions& opts) {
  const int n = model.n_obs();
  if (static_cast<int>(gs.groups.size()) != n)
    throw_validation(errc::dimension_mismatch, "group set does not cover the observations");
  if (!ga.factor) throw_validation(errc::bad_param, "scoring needs a fitted approximation");
  if (opts.gh_nodes < 2) throw_validation(errc::bad_param, "quadrature needs at least two nodes");

  const SpMat& a = model.design();
  const Eigen::MatrixXd a_dense_t = Eigen::MatrixXd(a).transpose();  // columns are design rows

  // Likelihood linearization at the full-data mode; the same weights that
  // entered the fitted precision, so subtracting them removes the group
  // information exactly in the Gaussian case.
  Eigen::VectorXd grad, curvature;
  model.lik_derivs(ga.eta, natural, grad, curvature);
  const Eigen::VectorXd working = curvature.cwiseProduct(ga.eta) + grad;
  const Eigen::VectorXd b = a.transpose() * working;
  const Eigen::VectorXd q_inv_b = ga.factor->solve(b);

  const QuadratureRule rule = gauss_hermite(opts.gh_nodes);

  CvReport report;
  report.method = opts.method;
  report.spec = gs.spec;
  report.records.resize(static_cast<size_t>(n));

  const Eigen::MatrixXd* v_full = ga.kriging ? &ga.kriging->v() : nullptr;
  const SpMat c = ga.kriging ? ga.kriging->constraint_matrix() : SpMat();

  for (int i = 0; i < n; ++i) {
    const std::vector<int>& group = gs.groups[static_cast<size_t>(i)];
    if (group.empty() || !std::binary_search(group.begin(), group.end(), i))
      throw_validation(errc::bad_param, "group must contain its own observation");

    PredictiveRecord& rec = report.records[static_cast<size_t>(i)];
    rec.index = i;
    rec.group = group;

    const bool want_fast =
        opts.method == CvMethod::fast && static_cast<int>(group.size()) <= opts.max_fast_group;

    HeldOutMoments mom;
    bool done = false;
    if (want_fast) {
      try {
        const int g = static_cast<int>(group.size());
        Eigen::MatrixXd u(model.latent_dim(), g);
        Eigen::VectorXd cvec(g), wvec(g);
        for (int k = 0; k < g; ++k) {
          u.col(k) = a_dense_t.col(group[static_cast<size_t>(k)]);
          cvec[k] = curvature[group[static_cast<size_t>(k)]];
          wvec[k] = working[group[static_cast<size_t>(k)]];
        }
        const Downdate dd = make_downdate(*ga.factor, u, cvec);

        // unconstrained mean of the downdated approximation
        const Eigen::VectorXd mean_u = dd.apply(q_inv_b) - dd.apply(dd.q_inv_u * wvec);

        const int pos = static_cast<int>(std::lower_bound(group.begin(), group.end(), i) -
                                         group.begin());
        const Eigen::VectorXd q_minus_ai = dd.apply(dd.q_inv_u.col(pos));
        double var = u.col(pos).dot(q_minus_ai);
        double mean = u.col(pos).dot(mean_u);

        if (v_full) {
          const Eigen::MatrixXd v_minus = dd.apply(*v_full);
          const Eigen::MatrixXd s_minus = c * v_minus;
          Eigen::LDLT<Eigen::MatrixXd> s_ldlt(s_minus);
          if (s_ldlt.info() != Eigen::Success || s_ldlt.vectorD().minCoeff() <= 0.0)
            throw_numeric(errc::downdate_indefinite, "constraint system lost definiteness");
          const Eigen::VectorXd c_mean = c * mean_u;
          mean -= u.col(pos).dot(v_minus * s_ldlt.solve(c_mean));
          const Eigen::VectorXd va = v_minus.transpose() * u.col(pos);
          var -= va.dot(s_ldlt.solve(va));
        }
        if (!std::isfinite(var) || var < -1e-10 || !std::isfinite(mean))
          throw_numeric(errc::downdate_indefinite, "downdated moments not usable");
        mom.mean = mean;
        mom.var = std::max(var, 0.0);
        done = true;
      } catch (const numeric_error& e) {
        if (e.code() != errc::downdate_indefinite) throw;
        ++report.fallback_count;
      }
    }

    if (!done) {
      const std::vector<int> rows = complement_rows(n, group);
      if (rows.empty())
        throw_validation(errc::empty_training, "group leaves no training data for a refit");
      const GaussianApprox sub = gaussian_approx(model, natural, rows, &ga.mode);
      mom = subset_moments(sub, a_dense_t.col(i));
      rec.exact = true;
    }

    const Predictive p = predictive_from_eta(model, natural, i, mom, rule);
    rec.pred_mean = p.mean;
    rec.pred_log_density = p.log_density;
    if (!std::isfinite(rec.pred_log_density))
      throw_numeric(errc::internal, "predictive density vanished at the observed value");
  }

  std::vector<double> log_dens(static_cast<size_t>(n)), sq_err(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    log_dens[static_cast<size_t>(i)] = report.records[static_cast<size_t>(i)].pred_log_density;
    const double d = report.records[static_cast<size_t>(i)].pred_mean - model.y()[i];
    sq_err[static_cast<size_t>(i)] = d * d;
  }
  report.ls = -pairwise_mean(log_dens);
  report.mspe = pairwise_mean(sq_err);
  return report;
}

CvReport score_grouped_coordinates(const LatentModel& model, const std::vector<double>& natural,
                                   const GaussianApprox& ga, const GroupSet& gs,
                                   std::span<const int> linkage, const CvOptions& opts) {
  if (!is_friendship_closed(gs, linkage))
    throw_validation(errc::bad_linkage, "groups are not closed under the coordinate linkage");
  return score(model, natural, ga, gs, opts);
}

}  // namespace lgocv
