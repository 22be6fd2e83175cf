#include "core/json_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "core/errors.hpp"
#include "core/ingest.hpp"
#include "core/util.hpp"

namespace lgocv {

using ordered = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, p};
}

namespace {

// non-finite summary values (unset criteria) serialize as null
ordered number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string fit_to_json(const FitResult& fit, const InformationCriteria* ic) {
  ordered j;
  j["log_evidence"] = fit.log_evidence;
  j["converged"] = fit.converged;
  j["evaluations"] = fit.evaluations;
  j["newton_iterations"] = fit.approx.newton_iterations;
  ordered hypers = ordered::array();
  for (const auto& h : fit.hypers) {
    ordered hj;
    hj["name"] = h.name;
    hj["natural"] = h.natural;
    hj["internal"] = h.internal;
    hj["free"] = h.free;
    hj["internal_stdev"] = number_or_null(h.internal_stdev);
    hypers.push_back(std::move(hj));
  }
  j["hypers"] = std::move(hypers);
  if (ic != nullptr) {
    ordered cj;
    cj["dic"] = number_or_null(ic->dic);
    cj["p_dic"] = number_or_null(ic->p_dic);
    cj["waic"] = number_or_null(ic->waic);
    cj["p_waic"] = number_or_null(ic->p_waic);
    cj["mean_deviance"] = number_or_null(ic->mean_deviance);
    cj["lppd"] = number_or_null(ic->lppd);
    cj["samples"] = ic->samples;
    j["criteria"] = std::move(cj);
  }
  ordered mode = ordered::array();
  for (int i = 0; i < fit.approx.mode.size(); ++i) mode.push_back(fit.approx.mode[i]);
  j["latent_mode"] = std::move(mode);
  if (fit.latent_sd.size() > 0) {
    ordered sd = ordered::array();
    for (int i = 0; i < fit.latent_sd.size(); ++i) sd.push_back(fit.latent_sd[i]);
    j["latent_sd"] = std::move(sd);
  }
  return j.dump(2) + "\n";
}

std::string groups_to_json(const GroupSet& gs, const std::vector<std::string>& labels) {
  if (!labels.empty() && labels.size() != gs.groups.size()) {
    throw_validation(errc::dimension_mismatch, "group labels do not match group count");
  }
  ordered j;
  j["mode"] = to_string(gs.spec.mode);
  j["m"] = gs.spec.m;
  j["max_size"] = gs.spec.max_size;
  j["tie_tol"] = gs.spec.tie_tol;
  ordered arr = ordered::array();
  for (std::size_t i = 0; i < gs.groups.size(); ++i) {
    ordered gj;
    gj["index"] = i;
    gj["members"] = gs.groups[i];
    if (!labels.empty()) gj["label"] = labels[i];
    arr.push_back(std::move(gj));
  }
  j["groups"] = std::move(arr);
  return j.dump(2) + "\n";
}

std::string cv_report_to_json(const CvReport& rep) {
  ordered j;
  j["method"] = to_string(rep.method);
  j["group_source"] = rep.group_source;
  j["mode"] = to_string(rep.spec.mode);
  j["m"] = rep.spec.m;
  j["max_size"] = rep.spec.max_size;
  j["tie_tol"] = rep.spec.tie_tol;
  j["ls"] = rep.ls;
  j["mspe"] = rep.mspe;
  j["dic"] = number_or_null(rep.dic);
  j["waic"] = number_or_null(rep.waic);
  j["fallback_count"] = rep.fallback_count;
  j["records"] = rep.records.size();
  return j.dump(2) + "\n";
}

std::string metric_table_to_json(const MetricTable& t) {
  ordered j;
  j["study"] = t.study;
  j["metrics"] = t.metric_names;
  ordered rows = ordered::array();
  for (const auto& row : t.rows) {
    ordered rj;
    rj["model"] = row.model;
    if (row.k >= 0) rj["k"] = row.k;
    rj["completed"] = row.completed;
    rj["skipped"] = row.skipped;
    for (const auto& name : t.metric_names) {
      const auto it = row.metrics.find(name);
      if (it == row.metrics.end()) continue;
      ordered mj;
      mj["value"] = it->second.value;
      mj["se"] = it->second.se;
      rj[name] = std::move(mj);
    }
    rows.push_back(std::move(rj));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string cv_records_to_csv(const CvReport& rep) {
  std::string out = "index,group,pred_mean,pred_log_density,exact\n";
  for (const auto& r : rep.records) {
    out += std::to_string(r.index);
    out += ',';
    std::string members;
    for (std::size_t k = 0; k < r.group.size(); ++k) {
      if (k > 0) members += ';';
      members += std::to_string(r.group[k]);
    }
    out += csv_quote(members);
    out += ',';
    out += format_double(r.pred_mean);
    out += ',';
    out += format_double(r.pred_log_density);
    out += ',';
    out += r.exact ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string forecast_replicates_to_csv(const std::vector<ForecastReplicate>& reps) {
  std::string out = "model,train_end,step,predicted,observed,skipped,error\n";
  for (const auto& rep : reps) {
    if (rep.skipped) {
      out += rep.model + ',' + std::to_string(rep.train_end) + ",,,,1," + csv_quote(rep.error) + "\n";
      continue;
    }
    for (int h = 0; h < rep.predicted.size(); ++h) {
      out += rep.model;
      out += ',';
      out += std::to_string(rep.train_end);
      out += ',';
      out += std::to_string(h + 1);
      out += ',';
      out += format_double(rep.predicted[h]);
      out += ',';
      out += format_double(rep.observed[h]);
      out += ",0,\n";
    }
  }
  return out;
}

std::string spatial_replicates_to_csv(const std::vector<SpatialReplicate>& reps) {
  std::string out = "model,k,center,area,predicted,observed,skipped,error\n";
  for (const auto& rep : reps) {
    if (rep.skipped) {
      out += rep.model + ',' + std::to_string(rep.k) + ',' + std::to_string(rep.center) +
             ",,,,1," + csv_quote(rep.error) + "\n";
      continue;
    }
    for (std::size_t j = 0; j < rep.held_out.size(); ++j) {
      out += rep.model;
      out += ',';
      out += std::to_string(rep.k);
      out += ',';
      out += std::to_string(rep.center);
      out += ',';
      out += std::to_string(rep.held_out[j]);
      out += ',';
      out += format_double(rep.predicted[static_cast<Eigen::Index>(j)]);
      out += ',';
      out += format_double(rep.observed[static_cast<Eigen::Index>(j)]);
      out += ",0,\n";
    }
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_validation(errc::parse_error, "cannot open output file: " + path);
  out << content;
  if (!out) throw_validation(errc::parse_error, "failed writing output file: " + path);
}

namespace {

// per-point statistics of one replicate, in row order: a feeds the mean
// metric, b the root-mean-square metric
struct ReplicateAcc {
  std::vector<double> a;
  std::vector<double> b;
};

struct RowAcc {
  MetricRow row;
  std::vector<std::string> rep_order;
  std::map<std::string, ReplicateAcc> reps;
};

}  // namespace

MetricTable table_from_replicates_csv(const std::string& csv_text, const std::string& source) {
  const Csv csv = parse_csv(csv_text, source);
  const std::vector<std::string> forecast_cols = {"model",     "train_end", "step",  "predicted",
                                                  "observed",  "skipped",   "error"};
  const std::vector<std::string> spatial_cols = {"model",    "k",       "center", "area",
                                                 "predicted", "observed", "skipped", "error"};
  const bool forecast = csv.columns == forecast_cols;
  if (!forecast && csv.columns != spatial_cols) {
    throw_validation(errc::schema_error, source + ": not a recognized replicate dump header");
  }

  MetricTable table;
  table.study = forecast ? "temporal-forecast" : "spatial-holdout";
  table.metric_names = forecast ? std::vector<std::string>{"MAPE", "RMSPE"}
                                : std::vector<std::string>{"MRPE", "RRMSPE"};

  const int c_model = csv.require_column("model");
  const int c_pred = csv.require_column("predicted");
  const int c_obs = csv.require_column("observed");
  const int c_skip = csv.require_column("skipped");
  const int c_rep = csv.require_column(forecast ? "train_end" : "center");
  const int c_k = forecast ? -1 : csv.require_column("k");

  std::vector<std::string> row_order;
  std::map<std::string, RowAcc> rows;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    // the row key separates table rows, the replicate key the units the
    // standard error is computed over
    std::string key = csv.rows[r][static_cast<std::size_t>(c_model)];
    if (!forecast) key += '\x1f' + csv.rows[r][static_cast<std::size_t>(c_k)];
    auto it = rows.find(key);
    if (it == rows.end()) {
      it = rows.emplace(key, RowAcc{}).first;
      it->second.row.model = csv.rows[r][static_cast<std::size_t>(c_model)];
      if (!forecast) it->second.row.k = static_cast<int>(csv.integer(static_cast<int>(r), c_k));
      row_order.push_back(key);
    }
    RowAcc& acc = it->second;
    if (csv.integer(static_cast<int>(r), c_skip) != 0) {
      ++acc.row.skipped;
      continue;
    }
    const std::string& rep_key = csv.rows[r][static_cast<std::size_t>(c_rep)];
    auto rit = acc.reps.find(rep_key);
    if (rit == acc.reps.end()) {
      rit = acc.reps.emplace(rep_key, ReplicateAcc{}).first;
      acc.rep_order.push_back(rep_key);
    }
    const double pred = csv.number(static_cast<int>(r), c_pred);
    const double obs = csv.number(static_cast<int>(r), c_obs);
    const double err = forecast ? pred - obs : (pred - obs) / std::max(obs, 1.0);
    rit->second.a.push_back(std::abs(err));
    rit->second.b.push_back(err * err);
  }

  for (const std::string& key : row_order) {
    RowAcc& acc = rows.at(key);
    std::vector<double> mean_metric, rms_metric;
    for (const std::string& rep_key : acc.rep_order) {
      const ReplicateAcc& rep = acc.reps.at(rep_key);
      mean_metric.push_back(pairwise_mean(rep.a));
      rms_metric.push_back(std::sqrt(pairwise_mean(rep.b)));
    }
    acc.row.completed = static_cast<int>(acc.rep_order.size());
    acc.row.metrics[table.metric_names[0]] = summarize_metric(mean_metric);
    acc.row.metrics[table.metric_names[1]] = summarize_metric(rms_metric);
    table.rows.push_back(std::move(acc.row));
  }
  return table;
}

}  // namespace lgocv
