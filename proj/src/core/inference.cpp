#include "core/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "core/errors.hpp"
#include "core/util.hpp"

namespace lgocv {

double quad_form(const SymSparse& m, const Eigen::VectorXd& v) {
  if (v.size() != m.n()) {
    throw_validation(errc::dimension_mismatch, "quadratic form dimension mismatch");
  }
  const SpMat& low = m.lower();
  double diag = 0.0, off = 0.0;
  for (int j = 0; j < low.outerSize(); ++j) {
    for (SpMat::InnerIterator it(low, j); it; ++it) {
      const int i = static_cast<int>(it.row());
      if (i == j) diag += it.value() * v[i] * v[j];
      else off += it.value() * v[i] * v[j];
    }
  }
  return diag + 2.0 * off;
}

SpMat take_rows(const SpMat& a, std::span<const int> rows) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> rm(a);
  SpMat out(static_cast<int>(rows.size()), a.cols());
  std::vector<Triplet> t;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int i = rows[r];
    if (i < 0 || i >= a.rows()) {
      throw_validation(errc::index_out_of_range, "row subset index out of range");
    }
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rm, i); it; ++it) {
      t.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
    }
  }
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

namespace {

// P + A' diag(w) A assembled in lower-triangle form
SymSparse posterior_precision(const SymSparse& prior, const SpMat& a,
                              const Eigen::VectorXd& w) {
  SpMat awa = a.transpose() * w.asDiagonal() * a;
  std::vector<Triplet> t;
  t.reserve(prior.lower().nonZeros() + awa.nonZeros());
  const SpMat& low = prior.lower();
  for (int j = 0; j < low.outerSize(); ++j) {
    for (SpMat::InnerIterator it(low, j); it; ++it) {
      t.emplace_back(static_cast<int>(it.row()), j, it.value());
    }
  }
  for (int j = 0; j < awa.outerSize(); ++j) {
    for (SpMat::InnerIterator it(awa, j); it; ++it) {
      if (it.row() >= j) t.emplace_back(static_cast<int>(it.row()), j, it.value());
    }
  }
  return SymSparse::from_triplets(prior.n(), t);
}

std::vector<int> all_rows(int n) {
  std::vector<int> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

}  // namespace

GaussianApprox gaussian_approx(const LatentModel& m, const std::vector<double>& natural,
                               std::span<const int> rows, const Eigen::VectorXd* warm) {
  const SymSparse prior = m.prior_precision(natural);
  std::vector<int> all;
  if (rows.empty()) {
    all = all_rows(m.n_obs());
    rows = all;
  }
  const SpMat a = take_rows(m.design(), rows);
  const bool constrained = m.constraint_count() > 0;

  GaussianApprox out;
  auto finish = [&](Eigen::VectorXd f, Factor&& fac,
                    std::shared_ptr<ConstraintKriging> kriging, int iters) {
    out.mode = std::move(f);
    out.eta = m.design() * out.mode;
    out.factor = std::make_shared<Factor>(std::move(fac));
    out.kriging = std::move(kriging);
    out.quad_form = quad_form(prior, out.mode);
    std::vector<int> idx(rows.begin(), rows.end());
    out.log_lik = m.log_lik_rows(out.eta, natural, idx);
    out.newton_iterations = iters;
  };

  if (m.likelihood() == Likelihood::gaussian) {
    const double tau = m.gaussian_tau(natural);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(a.rows(), tau);
    SymSparse qpost = posterior_precision(prior, a, w);
    Factor fac = Factor::compute(qpost);
    Eigen::VectorXd yb(a.rows());
    for (std::size_t r = 0; r < rows.size(); ++r) yb[r] = tau * m.y()[rows[r]];
    Eigen::VectorXd b = a.transpose() * yb;
    Eigen::VectorXd mu = fac.solve(b);
    std::shared_ptr<ConstraintKriging> kriging;
    if (constrained) {
      kriging = std::make_shared<ConstraintKriging>(fac, m.constraints());
      mu = kriging->apply_mean(mu);
    }
    finish(std::move(mu), std::move(fac), std::move(kriging), 1);
    return out;
  }

  // iterated weighted least squares for the count likelihood
  const int dim = m.latent_dim();
  Eigen::VectorXd f = warm && warm->size() == dim ? *warm : Eigen::VectorXd::Zero(dim);
  std::vector<int> idx(rows.begin(), rows.end());
  Eigen::VectorXd y_act(a.rows()), e_act(a.rows());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    y_act[r] = m.y()[rows[r]];
    e_act[r] = m.exposure()[rows[r]];
  }
  auto objective = [&](const Eigen::VectorXd& fv, const Eigen::VectorXd& eta_act) {
    double ll = 0.0;
    for (int i = 0; i < eta_act.size(); ++i) {
      const double log_mu = std::log(e_act[i]) + eta_act[i];
      ll += y_act[i] * log_mu - std::exp(log_mu) - std::lgamma(y_act[i] + 1.0);
    }
    return -0.5 * quad_form(prior, fv) + ll;
  };

  Eigen::VectorXd eta_act = a * f;
  double obj = objective(f, eta_act);
  constexpr int kMaxNewton = 100;
  int iter = 0;
  for (; iter < kMaxNewton; ++iter) {
    Eigen::VectorXd w(a.rows()), g(a.rows());
    for (int i = 0; i < a.rows(); ++i) {
      const double mu = e_act[i] * std::exp(eta_act[i]);
      w[i] = mu;
      g[i] = y_act[i] - mu;
    }
    SymSparse qpost = posterior_precision(prior, a, w);
    Factor fac = Factor::compute(qpost);
    Eigen::VectorXd b = a.transpose() * (w.cwiseProduct(eta_act) + g);
    Eigen::VectorXd target = fac.solve(b);
    std::shared_ptr<ConstraintKriging> kriging;
    if (constrained) {
      kriging = std::make_shared<ConstraintKriging>(fac, m.constraints());
      target = kriging->apply_mean(target);
    }

    // backtrack toward the previous iterate if the step overshoots
    Eigen::VectorXd f_new = target;
    Eigen::VectorXd eta_new = a * f_new;
    double obj_new = objective(f_new, eta_new);
    double step = 1.0;
    int halvings = 0;
    while (!(obj_new >= obj - 1e-12 * (1.0 + std::abs(obj))) && halvings < 40) {
      step *= 0.5;
      f_new = f + step * (target - f);
      eta_new = a * f_new;
      obj_new = objective(f_new, eta_new);
      ++halvings;
    }
    const double move = (f_new - f).cwiseAbs().maxCoeff();
    const bool settled = move <= 1e-9 * (1.0 + f.cwiseAbs().maxCoeff()) ||
                         std::abs(obj_new - obj) <= 1e-11 * (1.0 + std::abs(obj));
    f = std::move(f_new);
    eta_act = std::move(eta_new);
    obj = obj_new;
    if (settled) {
      // refresh the curvature at the accepted mode so the factor matches it
      Eigen::VectorXd w_final(a.rows());
      for (int i = 0; i < a.rows(); ++i) w_final[i] = e_act[i] * std::exp(eta_act[i]);
      SymSparse q_final = posterior_precision(prior, a, w_final);
      Factor fac_final = Factor::compute(q_final);
      std::shared_ptr<ConstraintKriging> kriging_final;
      if (constrained) {
        kriging_final = std::make_shared<ConstraintKriging>(fac_final, m.constraints());
      }
      finish(std::move(f), std::move(fac_final), std::move(kriging_final), iter + 1);
      return out;
    }
  }
  throw no_convergence_error("latent mode search did not settle", iter, obj);
}

double log_marginal_posterior(const LatentModel& m, const Eigen::VectorXd& internal,
                              GaussianApprox* approx_out, std::span<const int> rows) {
  const double lp = m.log_prior_internal(internal);
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  const std::vector<double> natural = m.natural_values(internal);
  GaussianApprox ga = gaussian_approx(m, natural, rows);
  double value = lp + 0.5 * m.prior_log_gdet(natural) - 0.5 * ga.quad_form + ga.log_lik -
                 0.5 * ga.factor->log_det();
  if (ga.kriging) value -= 0.5 * ga.kriging->log_det_s();
  if (approx_out) *approx_out = std::move(ga);
  return value;
}

SimplexResult minimize_simplex(const std::function<double(const Eigen::VectorXd&)>& fn,
                               const Eigen::VectorXd& x0, const OptimOptions& opts) {
  const int d = static_cast<int>(x0.size());
  SimplexResult result;
  if (d == 0) {
    result.x = x0;
    result.value = fn(x0);
    result.evaluations = 1;
    result.converged = true;
    return result;
  }

  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    if (evals >= opts.max_evals) {
      throw no_convergence_error("objective evaluation budget exhausted", evals,
                                 result.trace.empty() ? 0.0 : result.trace.back());
    }
    ++evals;
    const double v = fn(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<Eigen::VectorXd> xs;
  std::vector<double> vs;
  auto build = [&](const Eigen::VectorXd& center, double step) {
    xs.assign(1, center);
    vs.assign(1, eval(center));
    for (int j = 0; j < d; ++j) {
      Eigen::VectorXd p = center;
      p[j] += step;
      xs.push_back(p);
      vs.push_back(eval(p));
    }
  };
  auto order = [&] {
    std::vector<int> idx(xs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return vs[a] < vs[b]; });
    std::vector<Eigen::VectorXd> x2;
    std::vector<double> v2;
    for (int i : idx) {
      x2.push_back(xs[i]);
      v2.push_back(vs[i]);
    }
    xs = std::move(x2);
    vs = std::move(v2);
  };

  auto run = [&](bool& converged) {
    order();
    if (result.trace.empty() || vs[0] < result.trace.back()) result.trace.push_back(vs[0]);
    converged = false;
    while (true) {
      order();
      if (vs[0] < result.trace.back()) result.trace.push_back(vs[0]);
      const double spread = vs[d] - vs[0];
      if (spread <= opts.tol * (1.0 + std::abs(vs[0]))) {
        converged = true;
        return;
      }
      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
      for (int i = 0; i < d; ++i) centroid += xs[i];
      centroid /= d;

      Eigen::VectorXd xr = centroid + (centroid - xs[d]);
      const double vr = eval(xr);
      if (vr < vs[0]) {
        Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[d]);
        const double ve = eval(xe);
        if (ve < vr) {
          xs[d] = xe;
          vs[d] = ve;
        } else {
          xs[d] = xr;
          vs[d] = vr;
        }
      } else if (vr < vs[d - 1]) {
        xs[d] = xr;
        vs[d] = vr;
      } else {
        if (vr < vs[d]) {
          Eigen::VectorXd xc = centroid + 0.5 * (xr - centroid);
          const double vc = eval(xc);
          if (vc <= vr) {
            xs[d] = xc;
            vs[d] = vc;
            continue;
          }
        } else {
          Eigen::VectorXd xc = centroid + 0.5 * (xs[d] - centroid);
          const double vc = eval(xc);
          if (vc < vs[d]) {
            xs[d] = xc;
            vs[d] = vc;
            continue;
          }
        }
        for (int i = 1; i <= d; ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          vs[i] = eval(xs[i]);
        }
      }
    }
  };

  bool converged = false;
  build(x0, opts.init_step);
  run(converged);
  order();
  // one restart from the incumbent with a tighter simplex
  const Eigen::VectorXd best = xs[0];
  build(best, 0.1 * opts.init_step);
  run(converged);
  order();

  result.x = xs[0];
  result.value = vs[0];
  result.evaluations = evals;
  result.converged = converged;
  return result;
}

FitResult fit_model(const LatentModel& m, const FitOptions& opts) {
  FitResult fit;
  auto negative = [&](const Eigen::VectorXd& psi) {
    return -log_marginal_posterior(m, psi, nullptr, opts.rows);
  };

  Eigen::VectorXd start = opts.start;
  if (start.size() == 0) {
    start = m.default_internal();
  } else if (start.size() != m.free_dim()) {
    throw_validation(errc::dimension_mismatch, "fit start point has wrong dimension");
  }
  SimplexResult sr;
  if (m.free_dim() == 0) {
    sr.x = start;
    sr.value = negative(start);
    sr.evaluations = 1;
    sr.converged = true;
  } else {
    sr = minimize_simplex(negative, start, opts.optim);
  }

  fit.theta_internal = sr.x;
  fit.evaluations = sr.evaluations;
  fit.converged = sr.converged;
  fit.trace = std::move(sr.trace);
  fit.log_evidence = log_marginal_posterior(m, sr.x, &fit.approx, opts.rows);
  if (!std::isfinite(fit.log_evidence)) {
    throw_numeric(errc::no_convergence, "hyperparameter mode has non-finite posterior");
  }

  const std::vector<double> natural = m.natural_values(sr.x);
  int k = 0;
  for (const auto& h : m.hypers()) {
    HyperSummary s;
    s.name = h.name;
    s.free = h.free;
    s.natural = natural[&h - m.hypers().data()];
    s.internal = h.free ? sr.x[k] : transform_to_internal(h.transform, h.prior.value);
    if (h.free) ++k;
    fit.hypers.push_back(std::move(s));
  }

  if (opts.hyper_stdev && m.free_dim() > 0) {
    const int d = m.free_dim();
    Eigen::MatrixXd hess(d, d);
    Eigen::VectorXd h(d);
    for (int j = 0; j < d; ++j) h[j] = 1e-3 * (1.0 + std::abs(sr.x[j]));
    const double f0 = sr.value;
    bool usable = true;
    for (int i = 0; i < d && usable; ++i) {
      Eigen::VectorXd xp = sr.x, xm = sr.x;
      xp[i] += h[i];
      xm[i] -= h[i];
      const double fp = negative(xp), fm = negative(xm);
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        usable = false;
        break;
      }
      hess(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
      for (int j = i + 1; j < d; ++j) {
        Eigen::VectorXd xpp = sr.x, xpm = sr.x, xmp = sr.x, xmm = sr.x;
        xpp[i] += h[i]; xpp[j] += h[j];
        xpm[i] += h[i]; xpm[j] -= h[j];
        xmp[i] -= h[i]; xmp[j] += h[j];
        xmm[i] -= h[i]; xmm[j] -= h[j];
        const double v =
            (negative(xpp) - negative(xpm) - negative(xmp) + negative(xmm)) /
            (4.0 * h[i] * h[j]);
        if (!std::isfinite(v)) {
          usable = false;
          break;
        }
        hess(i, j) = hess(j, i) = v;
      }
    }
    if (usable) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
        Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(d, d));
        int kk = 0;
        for (auto& s : fit.hypers) {
          if (s.free) {
            s.internal_stdev = std::sqrt(std::max(cov(kk, kk), 0.0));
            ++kk;
          }
        }
      }
    }
  }

  if (opts.latent_stdev) {
    const PartialInverse& pinv = fit.approx.factor->partial_inverse();
    fit.latent_sd.resize(m.latent_dim());
    for (int i = 0; i < m.latent_dim(); ++i) {
      double v = pinv.variance(i);
      if (fit.approx.kriging) {
        const Eigen::VectorXd vi = fit.approx.kriging->v().row(i).transpose();
        v -= vi.dot(fit.approx.kriging->s_solve(vi));
      }
      fit.latent_sd[i] = std::sqrt(std::max(v, 0.0));
    }
  }

  if (opts.ccd && m.free_dim() > 0) {
    const int d = m.free_dim();
    Eigen::VectorXd scale(d);
    int kk = 0;
    for (const auto& s : fit.hypers) {
      if (!s.free) continue;
      scale[kk] = std::isfinite(s.internal_stdev) && s.internal_stdev > 0.0 ? s.internal_stdev
                                                                            : 0.5;
      ++kk;
    }
    auto push = [&](const Eigen::VectorXd& x) {
      CcdPoint p;
      p.internal = x;
      p.log_posterior = log_marginal_posterior(m, x, nullptr, opts.rows);
      fit.ccd.push_back(std::move(p));
    };
    push(sr.x);
    const double axial = std::sqrt(static_cast<double>(d));
    for (int j = 0; j < d; ++j) {
      Eigen::VectorXd xp = sr.x, xm = sr.x;
      xp[j] += axial * scale[j];
      xm[j] -= axial * scale[j];
      push(xp);
      push(xm);
    }
    if (d <= 4) {
      for (int mask = 0; mask < (1 << d); ++mask) {
        Eigen::VectorXd x = sr.x;
        for (int j = 0; j < d; ++j) x[j] += ((mask >> j) & 1 ? 1.0 : -1.0) * scale[j];
        push(x);
      }
    }
  }

  return fit;
}

Eigen::VectorXd sample_latent(const GaussianApprox& ga, Philox& rng) {
  const int n = static_cast<int>(ga.mode.size());
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal();
  Eigen::VectorXd u = ga.factor->sample_with_covariance(z);
  if (ga.kriging) u = ga.kriging->apply_sample(u);
  return ga.mode + u;
}

InformationCriteria information_criteria(const LatentModel& m, const GaussianApprox& ga,
                                         const std::vector<double>& natural, int n_samples,
                                         std::uint64_t seed) {
  if (n_samples < 2) throw_validation(errc::bad_param, "criteria need at least two samples");
  Philox rng(seed, 0x1c);
  const int n = m.n_obs();
  std::vector<double> deviances(n_samples);
  Eigen::MatrixXd logp(n, n_samples);
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd f = sample_latent(ga, rng);
    const Eigen::VectorXd eta = m.design() * f;
    deviances[s] = -2.0 * m.log_lik(eta, natural);
    if (m.likelihood() == Likelihood::gaussian) {
      const double tau = m.gaussian_tau(natural);
      const double c = 0.5 * std::log(tau / (2.0 * std::numbers::pi));
      for (int i = 0; i < n; ++i) {
        const double r = m.y()[i] - eta[i];
        logp(i, s) = c - 0.5 * tau * r * r;
      }
    } else {
      for (int i = 0; i < n; ++i) {
        const double log_mu = std::log(m.exposure()[i]) + eta[i];
        logp(i, s) = m.y()[i] * log_mu - std::exp(log_mu) - std::lgamma(m.y()[i] + 1.0);
      }
    }
  }

  InformationCriteria ic;
  ic.samples = n_samples;
  ic.mean_deviance = pairwise_mean(deviances);
  double var = 0.0;
  for (double d : deviances) var += (d - ic.mean_deviance) * (d - ic.mean_deviance);
  var /= (n_samples - 1);
  ic.mc_se_mean_deviance = std::sqrt(var / n_samples);

  const double d_at_mode = -2.0 * m.log_lik(ga.eta, natural);
  ic.p_dic = ic.mean_deviance - d_at_mode;
  ic.dic = ic.mean_deviance + ic.p_dic;

  double lppd = 0.0, p_waic = 0.0;
  for (int i = 0; i < n; ++i) {
    const double mx = logp.row(i).maxCoeff();
    double acc = 0.0;
    for (int s = 0; s < n_samples; ++s) acc += std::exp(logp(i, s) - mx);
    lppd += mx + std::log(acc / n_samples);
    const double mean_l = logp.row(i).mean();
    double v = 0.0;
    for (int s = 0; s < n_samples; ++s) v += (logp(i, s) - mean_l) * (logp(i, s) - mean_l);
    p_waic += v / (n_samples - 1);
  }
  ic.lppd = lppd;
  ic.p_waic = p_waic;
  ic.waic = -2.0 * (lppd - p_waic);
  return ic;
}

}  // namespace lgocv
