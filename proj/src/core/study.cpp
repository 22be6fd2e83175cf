#include "core/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "core/cv.hpp"
#include "core/effects.hpp"
#include "core/errors.hpp"
#include "core/util.hpp"

namespace lgocv {

namespace {

// Work-stealing loop over [0, count). Tasks handle their own expected
// failures; anything escaping here is a defect and is rethrown after join.
void run_indexed(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, std::max(1, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errs(static_cast<size_t>(threads));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errs[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs) {
    if (e) std::rethrow_exception(e);
  }
}

void validate_table(const MetricTable& t) {
  for (const auto& row : t.rows) {
    for (const auto& [name, mv] : row.metrics) {
      if (!std::isfinite(mv.value) || mv.value < 0.0 || !std::isfinite(mv.se) || mv.se < 0.0) {
        throw_numeric(errc::study_failed, t.study + ": metric " + name + " for model " +
                                              row.model + " is not a nonnegative finite value");
      }
    }
  }
}

double mean_abs_error(const Eigen::VectorXd& pred, const Eigen::VectorXd& obs) {
  std::vector<double> e(static_cast<size_t>(pred.size()));
  for (int i = 0; i < pred.size(); ++i) e[static_cast<size_t>(i)] = std::abs(pred[i] - obs[i]);
  return pairwise_mean(e);
}

double root_mean_sq_error(const Eigen::VectorXd& pred, const Eigen::VectorXd& obs) {
  std::vector<double> e(static_cast<size_t>(pred.size()));
  for (int i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - obs[i];
    e[static_cast<size_t>(i)] = d * d;
  }
  return std::sqrt(pairwise_mean(e));
}

std::vector<int> iota_rows(int n) {
  std::vector<int> r(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) r[static_cast<size_t>(i)] = i;
  return r;
}

PriorSpec pc_precision_prior() { return {PriorSpec::Kind::pc_precision, 1.0, 0.01, 0.0}; }

}  // namespace

MetricValue summarize_metric(const std::vector<double>& vals) {
  MetricValue mv;
  mv.value = pairwise_mean(vals);
  if (vals.size() > 1) {
    double ss = 0.0;
    for (double v : vals) ss += (v - mv.value) * (v - mv.value);
    const double n = static_cast<double>(vals.size());
    mv.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return mv;
}

LatentModel make_temporal_model(const std::string& kind, const TemporalData& d) {
  const int n = static_cast<int>(d.y.size());
  std::map<std::string, PriorSpec> priors;
  priors["gaussian.tau_y"] = pc_precision_prior();
  std::vector<BlockPtr> blocks;
  if (kind == "linear") {
    blocks.push_back(make_coef_block("beta", {Eigen::VectorXd::Ones(n), d.x_tilde},
                                     {"intercept", "x_tilde"}));
  } else if (kind == "ar1") {
    blocks.push_back(make_coef_block("beta", {Eigen::VectorXd::Ones(n)}, {"intercept"}));
    blocks.push_back(make_ar1_block("trend", iota_rows(n), n));
    priors["trend.tau"] = pc_precision_prior();
    priors["trend.rho"] = {PriorSpec::Kind::flat, 0.0, 0.0, 0.0};
  } else {
    throw_validation(errc::bad_param, "unknown temporal model: " + kind);
  }
  return {Likelihood::gaussian, d.y, Eigen::VectorXd(), std::move(blocks), priors};
}

LatentModel make_lattice_model(const std::string& kind, const LatticeData& d) {
  const int n = static_cast<int>(d.y.size());
  std::map<std::string, PriorSpec> priors;
  std::vector<BlockPtr> blocks;
  if (kind == "car") {
    blocks.push_back(make_coef_block("beta", {Eigen::VectorXd::Ones(n)}, {"intercept"}));
  } else if (kind == "car-cov") {
    blocks.push_back(make_coef_block("beta", {Eigen::VectorXd::Ones(n), d.covariate},
                                     {"intercept", "covariate"}));
  } else {
    throw_validation(errc::bad_param, "unknown lattice model: " + kind);
  }
  blocks.push_back(make_icar_block("spatial", iota_rows(n), d.graph));
  priors["spatial.tau"] = pc_precision_prior();
  return {Likelihood::poisson, d.y, d.expected, std::move(blocks), priors};
}

ForecastStudyResult forecast_study(const ForecastStudyConfig& cfg) {
  if (cfg.horizon < 1) throw_validation(errc::bad_param, "forecast horizon must be >= 1");
  if (cfg.windows < 1) throw_validation(errc::bad_param, "forecast windows must be >= 1");
  if (cfg.models.empty()) throw_validation(errc::bad_param, "forecast model roster is empty");
  const int min_train = cfg.series_length - cfg.horizon - cfg.windows + 1;
  if (min_train < 10) {
    throw_validation(errc::bad_param,
                     "series too short: smallest training prefix has fewer than 10 points");
  }

  const TemporalData data = simulate_temporal(cfg.seed, cfg.series_length, cfg.sim);

  ForecastStudyResult out;
  out.table.study = "temporal-forecast";
  out.table.metric_names = {"MAPE", "RMSPE"};
  out.replicates.resize(cfg.models.size() * static_cast<size_t>(cfg.windows));

  for (size_t mi = 0; mi < cfg.models.size(); ++mi) {
    const std::string& kind = cfg.models[mi];
    auto slot = [&](int w) -> ForecastReplicate& {
      return out.replicates[mi * static_cast<size_t>(cfg.windows) + static_cast<size_t>(w)];
    };
    auto window_bounds = [&](int w) { return cfg.series_length - cfg.horizon - w; };

    if (kind == "oracle") {
      // Known-truth baseline: no fitting, predicts intercept + latent path.
      for (int w = 0; w < cfg.windows; ++w) {
        ForecastReplicate& rep = slot(w);
        rep.model = kind;
        rep.train_end = window_bounds(w);
        rep.predicted.resize(cfg.horizon);
        rep.observed.resize(cfg.horizon);
        for (int h = 0; h < cfg.horizon; ++h) {
          const int t = rep.train_end + h;
          rep.predicted[h] = cfg.sim.intercept + data.x_true[t];
          rep.observed[h] = data.y[t];
        }
      }
      continue;
    }

    const LatentModel model = make_temporal_model(kind, data);

    // One full-budget fit on the widest window seeds every refit; windows
    // differ by a single training point, so the mode barely moves.
    Eigen::VectorXd warm;
    try {
      FitOptions base;
      base.optim = cfg.optim;
      base.optim.max_evals = std::max(cfg.optim.max_evals, 2000);
      base.hyper_stdev = false;
      base.latent_stdev = false;
      base.rows = iota_rows(window_bounds(0));
      warm = fit_model(model, base).theta_internal;
    } catch (const error&) {
      // every window then starts from the model defaults
    }

    run_indexed(cfg.windows, cfg.threads, [&](int w) {
      ForecastReplicate& rep = slot(w);
      rep.model = kind;
      rep.train_end = window_bounds(w);
      try {
        FitOptions fo;
        fo.optim = cfg.optim;
        fo.hyper_stdev = false;
        fo.latent_stdev = false;
        fo.start = warm;
        fo.rows = iota_rows(rep.train_end);
        const FitResult fit = fit_model(model, fo);
        rep.predicted.resize(cfg.horizon);
        rep.observed.resize(cfg.horizon);
        for (int h = 0; h < cfg.horizon; ++h) {
          const int t = rep.train_end + h;
          rep.predicted[h] = fit.approx.eta[t];
          rep.observed[h] = data.y[t];
        }
      } catch (const error& e) {
        rep.skipped = true;
        rep.error = e.what();
        rep.predicted.resize(0);
        rep.observed.resize(0);
      }
    });
  }

  for (size_t mi = 0; mi < cfg.models.size(); ++mi) {
    MetricRow row;
    row.model = cfg.models[mi];
    std::vector<double> mape, rmspe;
    std::string first_error;
    for (int w = 0; w < cfg.windows; ++w) {
      const ForecastReplicate& rep =
          out.replicates[mi * static_cast<size_t>(cfg.windows) + static_cast<size_t>(w)];
      if (rep.skipped) {
        ++row.skipped;
        if (first_error.empty()) first_error = rep.error;
        continue;
      }
      ++row.completed;
      mape.push_back(mean_abs_error(rep.predicted, rep.observed));
      rmspe.push_back(root_mean_sq_error(rep.predicted, rep.observed));
    }
    if (row.completed == 0) {
      throw_numeric(errc::study_failed, "temporal-forecast: every window failed for model " +
                                            row.model + " (first error: " + first_error + ")");
    }
    row.metrics["MAPE"] = summarize_metric(mape);
    row.metrics["RMSPE"] = summarize_metric(rmspe);
    out.table.rows.push_back(std::move(row));
  }
  validate_table(out.table);
  return out;
}

SpatialStudyResult spatial_holdout_study(const SpatialStudyConfig& cfg) {
  if (cfg.rows * cfg.cols < 9) {
    throw_validation(errc::bad_param, "spatial holdout needs a lattice of at least 9 areas");
  }
  if (cfg.models.empty()) throw_validation(errc::bad_param, "spatial model roster is empty");
  if (cfg.ks.empty()) throw_validation(errc::bad_param, "spatial holdout needs at least one k");
  for (int k : cfg.ks) {
    if (k < 1) throw_validation(errc::bad_param, "holdout order k must be >= 1");
  }

  const LatticeData data = simulate_lattice(cfg.seed, cfg.rows, cfg.cols, cfg.sim);
  const int n = static_cast<int>(data.y.size());

  SpatialStudyResult out;
  out.table.study = "spatial-holdout";
  out.table.metric_names = {"MRPE", "RRMSPE"};
  out.replicates.resize(cfg.models.size() * cfg.ks.size() * static_cast<size_t>(n));

  for (size_t mi = 0; mi < cfg.models.size(); ++mi) {
    const LatentModel model = make_lattice_model(cfg.models[mi], data);

    Eigen::VectorXd warm;
    try {
      FitOptions base;
      base.optim = cfg.optim;
      base.optim.max_evals = std::max(cfg.optim.max_evals, 2000);
      base.hyper_stdev = false;
      base.latent_stdev = false;
      warm = fit_model(model, base).theta_internal;
    } catch (const error&) {
    }

    run_indexed(static_cast<int>(cfg.ks.size()) * n, cfg.threads, [&](int task) {
      const size_t ki = static_cast<size_t>(task) / static_cast<size_t>(n);
      const int area = task % n;
      SpatialReplicate& rep =
          out.replicates[(mi * cfg.ks.size() + ki) * static_cast<size_t>(n) +
                         static_cast<size_t>(area)];
      rep.model = cfg.models[mi];
      rep.k = cfg.ks[ki];
      rep.center = area;
      rep.held_out = data.graph.k_order_neighbors({area}, rep.k);
      std::sort(rep.held_out.begin(), rep.held_out.end());
      try {
        std::vector<char> held(static_cast<size_t>(n), 0);
        for (int j : rep.held_out) held[static_cast<size_t>(j)] = 1;
        std::vector<int> train;
        train.reserve(static_cast<size_t>(n) - rep.held_out.size());
        for (int r = 0; r < n; ++r) {
          if (!held[static_cast<size_t>(r)]) train.push_back(r);
        }
        if (train.empty()) {
          throw_numeric(errc::empty_training,
                        "k-order neighborhood of area " + std::to_string(area) +
                            " covers the whole lattice; no training data remains");
        }
        FitOptions fo;
        fo.optim = cfg.optim;
        fo.hyper_stdev = false;
        fo.latent_stdev = false;
        fo.start = warm;
        fo.rows = std::move(train);
        const FitResult fit = fit_model(model, fo);
        const int held_n = static_cast<int>(rep.held_out.size());
        rep.predicted.resize(held_n);
        rep.observed.resize(held_n);
        for (int j = 0; j < held_n; ++j) {
          const int obs = rep.held_out[static_cast<size_t>(j)];
          const HeldOutMoments mom = predictor_moments_at(model, fit.approx, obs);
          // predictive mean count under the lognormal rate
          rep.predicted[j] = data.expected[obs] * std::exp(mom.mean + 0.5 * mom.var);
          rep.observed[j] = data.y[obs];
        }
      } catch (const error& e) {
        rep.skipped = true;
        rep.error = e.what();
        rep.predicted.resize(0);
        rep.observed.resize(0);
      }
    });
  }

  for (size_t mi = 0; mi < cfg.models.size(); ++mi) {
    for (size_t ki = 0; ki < cfg.ks.size(); ++ki) {
      MetricRow row;
      row.model = cfg.models[mi];
      row.k = cfg.ks[ki];
      std::vector<double> mrpe, rrmspe;
      std::string first_error;
      for (int area = 0; area < n; ++area) {
        const SpatialReplicate& rep =
            out.replicates[(mi * cfg.ks.size() + ki) * static_cast<size_t>(n) +
                           static_cast<size_t>(area)];
        if (rep.skipped) {
          ++row.skipped;
          if (first_error.empty()) first_error = rep.error;
          continue;
        }
        ++row.completed;
        std::vector<double> abs_rel, sq_rel;
        for (int j = 0; j < rep.predicted.size(); ++j) {
          const double rel =
              (rep.predicted[j] - rep.observed[j]) / std::max(rep.observed[j], 1.0);
          abs_rel.push_back(std::abs(rel));
          sq_rel.push_back(rel * rel);
        }
        mrpe.push_back(pairwise_mean(abs_rel));
        rrmspe.push_back(std::sqrt(pairwise_mean(sq_rel)));
      }
      if (row.completed == 0) {
        throw_numeric(errc::study_failed,
                      "spatial-holdout: every area failed for model " + row.model + " at k=" +
                          std::to_string(row.k) + " (first error: " + first_error + ")");
      }
      row.metrics["MRPE"] = summarize_metric(mrpe);
      row.metrics["RRMSPE"] = summarize_metric(rrmspe);
      out.table.rows.push_back(std::move(row));
    }
  }
  validate_table(out.table);
  return out;
}

}  // namespace lgocv
