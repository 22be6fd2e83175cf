#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/inference.hpp"
#include "core/model.hpp"
#include "core/sim.hpp"

namespace lgocv {

// Metric value averaged over completed replicates with its Monte-Carlo
// standard error (spread of the per-replicate values / sqrt(count)).
struct MetricValue {
  double value = 0.0;
  double se = 0.0;
};

struct MetricRow {
  std::string model;
  int k = -1;  // spatial holdout order; -1 for temporal rows
  std::map<std::string, MetricValue> metrics;
  int completed = 0;
  int skipped = 0;
};

struct MetricTable {
  std::string study;
  std::vector<std::string> metric_names;  // column order for reports
  std::vector<MetricRow> rows;
};

// Mean of per-replicate metric values; se is the sample sd over sqrt(count).
// Recomputing a table from a replicate dump goes through the same arithmetic,
// so the result matches the original table bit for bit.
MetricValue summarize_metric(const std::vector<double>& vals);

// Named model builders shared by the studies, the CLI, and the tests.
//   temporal: "linear" (intercept + distorted covariate),
//             "ar1"    (intercept + stationary AR(1) trend)
//   lattice:  "car"     (intercept + scaled intrinsic CAR field),
//             "car-cov" (adds the simulated covariate as a fixed effect)
LatentModel make_temporal_model(const std::string& kind, const TemporalData& d);
LatentModel make_lattice_model(const std::string& kind, const LatticeData& d);

// --- sliding-window forecast study ------------------------------------------

struct ForecastStudyConfig {
  std::uint64_t seed = 1;
  int series_length = 2000;
  int horizon = 100;
  int windows = 50;  // training ends step back one point per window
  int threads = 1;   // 0 picks the hardware concurrency
  TemporalSimOptions sim;
  // "oracle" predicts intercept + x_true without fitting anything; it provides
  // the known-truth baseline for the no-noise sanity check.
  std::vector<std::string> models = {"linear", "ar1"};
  OptimOptions optim{.max_evals = 600, .tol = 1e-6, .init_step = 1.0};
};

struct ForecastReplicate {
  std::string model;
  int train_end = 0;  // observations [0, train_end) were the training prefix
  Eigen::VectorXd predicted;
  Eigen::VectorXd observed;
  bool skipped = false;
  std::string error;
};

struct ForecastStudyResult {
  MetricTable table;  // MAPE = mean |err| over the horizon, RMSPE = root mean square
  std::vector<ForecastReplicate> replicates;
};

// Fits every roster model on each training prefix and scores the next
// `horizon` points. The linear model predicts from the observed covariate;
// the AR(1) model extrapolates the latent chain at the fitted
// hyperparameters, so its forecasts decay toward the fitted mean. Replicates
// that fail to fit are skipped and counted; a model with no completed
// replicate aborts the study.
ForecastStudyResult forecast_study(const ForecastStudyConfig& cfg);

// --- k-order spatial holdout study -------------------------------------------

struct SpatialStudyConfig {
  std::uint64_t seed = 1;
  int rows = 8;
  int cols = 8;
  std::vector<int> ks = {1, 2, 3};
  int threads = 1;
  LatticeSimOptions sim;
  std::vector<std::string> models = {"car", "car-cov"};
  OptimOptions optim{.max_evals = 600, .tol = 1e-6, .init_step = 1.0};
};

struct SpatialReplicate {
  std::string model;
  int k = 0;
  int center = 0;
  std::vector<int> held_out;   // the k-order neighborhood of the center
  Eigen::VectorXd predicted;   // predictive mean counts on held-out areas
  Eigen::VectorXd observed;
  bool skipped = false;
  std::string error;
};

struct SpatialStudyResult {
  // MRPE = mean |err|/max(y,1), RRMSPE = sqrt(mean (err/max(y,1))^2); the
  // max(y,1) guard makes the relative error well defined at zero counts.
  MetricTable table;
  std::vector<SpatialReplicate> replicates;
};

// For every area and every k, refits each model with the area's k-order
// neighborhood removed and predicts the held-out counts from the remaining
// data. Per-replicate relative errors are averaged per model and k.
SpatialStudyResult spatial_holdout_study(const SpatialStudyConfig& cfg);

}  // namespace lgocv
