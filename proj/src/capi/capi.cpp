#include "lgocv/lgocv.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "core/cv.hpp"
#include "core/errors.hpp"
#include "core/groups.hpp"
#include "core/inference.hpp"
#include "core/ingest.hpp"
#include "core/json_io.hpp"
#include "core/sim.hpp"
#include "core/study.hpp"
#include "core/util.hpp"

struct lgocv_model {
  lgocv::ModelConfig cfg;
  lgocv::IngestResult data;
};

struct lgocv_fit {
  const lgocv_model* origin = nullptr;
  lgocv::FitResult fit;
  std::vector<double> natural;
  lgocv::InformationCriteria ic;
  bool has_ic = false;
};

struct lgocv_groups {
  const lgocv_model* origin = nullptr;
  lgocv::GroupSet gs;
  std::string source;  // reported as group_source in cv reports
};

namespace {

thread_local std::string t_last_error;

void set_error(const std::string& msg) { t_last_error = msg; }

// malloc so lgocv_string_free pairs with it regardless of the C++ runtime
char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p != nullptr) std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

lgocv_status give_string(const std::string& s, char** out) {
  char* p = dup_string(s);
  if (p == nullptr) {
    set_error("out of memory");
    return LGOCV_NUMERIC;
  }
  *out = p;
  return LGOCV_OK;
}

template <typename Fn>
lgocv_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const lgocv::error& e) {
    set_error(e.what());
    return lgocv::is_validation(e.code()) ? LGOCV_INVALID : LGOCV_NUMERIC;
  } catch (const std::exception& e) {
    set_error(e.what());
    return LGOCV_NUMERIC;
  }
}

lgocv_status require(bool ok, const char* what) {
  if (!ok) set_error(std::string("null argument: ") + what);
  return ok ? LGOCV_OK : LGOCV_INVALID;
}

lgocv_status check_origin(const lgocv_model* m, const lgocv_fit* f) {
  if (f->origin != m) {
    set_error("fit handle does not belong to this model");
    return LGOCV_INVALID;
  }
  return LGOCV_OK;
}

lgocv_status check_origin(const lgocv_model* m, const lgocv_groups* g) {
  if (g->origin != m) {
    set_error("groups handle does not belong to this model");
    return LGOCV_INVALID;
  }
  return LGOCV_OK;
}

}  // namespace

const char* lgocv_version(void) { return "0.1.0"; }

const char* lgocv_last_error(void) { return t_last_error.c_str(); }

void lgocv_string_free(char* s) { std::free(s); }

lgocv_status lgocv_model_create(const char* config_json, const char* base_dir,
                                lgocv_model** out) {
  if (require(config_json != nullptr, "config_json") != LGOCV_OK) return LGOCV_INVALID;
  if (require(out != nullptr, "out") != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    lgocv::ModelConfig cfg = lgocv::parse_model_config(config_json);
    lgocv::IngestResult data = lgocv::ingest(cfg, base_dir != nullptr ? base_dir : "");
    *out = new lgocv_model{std::move(cfg), std::move(data)};
    return LGOCV_OK;
  });
}

void lgocv_model_free(lgocv_model* m) { delete m; }

lgocv_status lgocv_model_fit(const lgocv_model* m, uint64_t seed, int criteria_samples, int ccd,
                             lgocv_fit** out) {
  if (require(m != nullptr, "model") != LGOCV_OK) return LGOCV_INVALID;
  if (require(out != nullptr, "out") != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    auto f = std::make_unique<lgocv_fit>();
    f->origin = m;
    lgocv::FitOptions opts;
    opts.optim = m->cfg.optim;
    opts.ccd = ccd != 0;
    f->fit = lgocv::fit_model(m->data.model, opts);
    f->natural = m->data.model.natural_values(f->fit.theta_internal);
    if (criteria_samples > 0) {
      f->ic = lgocv::information_criteria(m->data.model, f->fit.approx, f->natural,
                                          criteria_samples, seed);
      f->has_ic = true;
    }
    *out = f.release();
    return LGOCV_OK;
  });
}

void lgocv_fit_free(lgocv_fit* f) { delete f; }

lgocv_status lgocv_fit_summary_json(const lgocv_fit* f, char** out) {
  if (require(f != nullptr, "fit") != LGOCV_OK) return LGOCV_INVALID;
  if (require(out != nullptr, "out") != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    return give_string(lgocv::fit_to_json(f->fit, f->has_ic ? &f->ic : nullptr), out);
  });
}

lgocv_status lgocv_groups_build(const lgocv_model* m, const lgocv_fit* f, const char* mode,
                                int level_count, int max_size, double tie_tol,
                                lgocv_groups** out) {
  if (require(m != nullptr, "model") != LGOCV_OK) return LGOCV_INVALID;
  if (require(f != nullptr, "fit") != LGOCV_OK) return LGOCV_INVALID;
  if (require(mode != nullptr, "mode") != LGOCV_OK) return LGOCV_INVALID;
  if (require(out != nullptr, "out") != LGOCV_OK) return LGOCV_INVALID;
  if (check_origin(m, f) != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    lgocv::GroupSpec spec;
    spec.mode = lgocv::correlation_mode_from_string(mode);
    spec.m = level_count;
    spec.max_size = max_size;
    if (tie_tol > 0.0) spec.tie_tol = tie_tol;
    auto g = std::make_unique<lgocv_groups>();
    g->origin = m;
    g->gs = lgocv::construct_all_groups(m->data.model, f->natural, f->fit.approx, spec);
    g->source = lgocv::to_string(spec.mode);
    *out = g.release();
    return LGOCV_OK;
  });
}

lgocv_status lgocv_groups_singletons(const lgocv_model* m, lgocv_groups** out) {
  if (require(m != nullptr, "model") != LGOCV_OK) return LGOCV_INVALID;
  if (require(out != nullptr, "out") != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    auto g = std::make_unique<lgocv_groups>();
    g->origin = m;
    g->gs = lgocv::singleton_groups(static_cast<int>(m->data.model.y().size()));
    g->source = "self";
    *out = g.release();
    return LGOCV_OK;
  });
}

lgocv_status lgocv_groups_rebind(const lgocv_model* m, const lgocv_groups* g,
                                 lgocv_groups** out) {
  if (require(m != nullptr, "model") != LGOCV_OK) return LGOCV_INVALID;
  if (require(g != nullptr, "groups") != LGOCV_OK) return LGOCV_INVALID;
  if (require(out != nullptr, "out") != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    const auto n = static_cast<std::size_t>(m->data.model.y().size());
    if (g->gs.groups.size() != n) {
      lgocv::throw_validation(lgocv::errc::dimension_mismatch,
                              "group set covers " + std::to_string(g->gs.groups.size()) +
                                  " observations, the model has " + std::to_string(n));
    }
    auto r = std::make_unique<lgocv_groups>();
    r->origin = m;
    r->gs = g->gs;
    r->source = g->source;
    *out = r.release();
    return LGOCV_OK;
  });
}

lgocv_status lgocv_groups_expand_linked(const lgocv_model* m, lgocv_groups* g) {
  if (require(m != nullptr, "model") != LGOCV_OK) return LGOCV_INVALID;
  if (require(g != nullptr, "groups") != LGOCV_OK) return LGOCV_INVALID;
  if (check_origin(m, g) != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    if (m->data.linkage.empty()) {
      lgocv::throw_validation(lgocv::errc::bad_linkage,
                              "the model configuration declares no link_column");
    }
    g->gs = lgocv::expand_friendship(g->gs, m->data.linkage);
    return LGOCV_OK;
  });
}

lgocv_status lgocv_groups_json(const lgocv_model* m, const lgocv_groups* g, char** out) {
  if (require(m != nullptr, "model") != LGOCV_OK) return LGOCV_INVALID;
  if (require(g != nullptr, "groups") != LGOCV_OK) return LGOCV_INVALID;
  if (require(out != nullptr, "out") != LGOCV_OK) return LGOCV_INVALID;
  if (check_origin(m, g) != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    const auto labels =
        lgocv::classify_groups(g->gs.groups, m->data.time_index, m->data.space_index);
    return give_string(lgocv::groups_to_json(g->gs, labels), out);
  });
}

void lgocv_groups_free(lgocv_groups* g) { delete g; }

lgocv_status lgocv_cv_score(const lgocv_model* m, const lgocv_fit* f, const lgocv_groups* g,
                            const char* method, int grouped_coordinates, int criteria_samples,
                            uint64_t seed, char** report_json, char** records_csv) {
  if (require(m != nullptr, "model") != LGOCV_OK) return LGOCV_INVALID;
  if (require(f != nullptr, "fit") != LGOCV_OK) return LGOCV_INVALID;
  if (require(g != nullptr, "groups") != LGOCV_OK) return LGOCV_INVALID;
  if (require(method != nullptr, "method") != LGOCV_OK) return LGOCV_INVALID;
  if (check_origin(m, f) != LGOCV_OK) return LGOCV_INVALID;
  if (check_origin(m, g) != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    lgocv::CvOptions opts;
    opts.method = lgocv::cv_method_from_string(method);
    lgocv::CvReport rep =
        grouped_coordinates != 0
            ? lgocv::score_grouped_coordinates(m->data.model, f->natural, f->fit.approx, g->gs,
                                               m->data.linkage, opts)
            : lgocv::score(m->data.model, f->natural, f->fit.approx, g->gs, opts);
    rep.group_source = g->source;
    if (criteria_samples > 0) {
      const auto ic = lgocv::information_criteria(m->data.model, f->fit.approx, f->natural,
                                                  criteria_samples, seed);
      rep.dic = ic.dic;
      rep.waic = ic.waic;
    }
    if (report_json != nullptr) {
      const lgocv_status rc = give_string(lgocv::cv_report_to_json(rep), report_json);
      if (rc != LGOCV_OK) return rc;
    }
    if (records_csv != nullptr) {
      const lgocv_status rc = give_string(lgocv::cv_records_to_csv(rep), records_csv);
      if (rc != LGOCV_OK) {
        if (report_json != nullptr) {
          lgocv_string_free(*report_json);
          *report_json = nullptr;
        }
        return rc;
      }
    }
    return LGOCV_OK;
  });
}

lgocv_status lgocv_simulate_temporal_csv(uint64_t seed, int n, double rho, double noise_sd,
                                         double intercept, char** csv) {
  if (require(csv != nullptr, "csv") != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    lgocv::TemporalSimOptions opts;
    opts.rho = rho;
    opts.noise_sd = noise_sd;
    opts.intercept = intercept;
    const lgocv::TemporalData d = lgocv::simulate_temporal(seed, n, opts);
    std::string out = "t,y,x_tilde,x_true\n";
    for (int i = 0; i < n; ++i) {
      out += std::to_string(i);
      out += ',';
      out += lgocv::format_double(d.y[i]);
      out += ',';
      out += lgocv::format_double(d.x_tilde[i]);
      out += ',';
      out += lgocv::format_double(d.x_true[i]);
      out += '\n';
    }
    return give_string(out, csv);
  });
}

lgocv_status lgocv_simulate_lattice_csv(uint64_t seed, int rows, int cols, double spatial_sd,
                                        char** data_csv, char** graph_text) {
  if (require(data_csv != nullptr, "data_csv") != LGOCV_OK) return LGOCV_INVALID;
  if (require(graph_text != nullptr, "graph_text") != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    lgocv::LatticeSimOptions opts;
    opts.spatial_sd = spatial_sd;
    const lgocv::LatticeData d = lgocv::simulate_lattice(seed, rows, cols, opts);
    const int n = d.graph.n();

    std::string data = "area,y,E,covariate,log_risk\n";
    for (int i = 0; i < n; ++i) {
      data += std::to_string(i);
      data += ',';
      data += lgocv::format_double(d.y[i]);
      data += ',';
      data += lgocv::format_double(d.expected[i]);
      data += ',';
      data += lgocv::format_double(d.covariate[i]);
      data += ',';
      data += lgocv::format_double(d.log_risk[i]);
      data += '\n';
    }

    std::string graph = "n " + std::to_string(n) + "\n";
    for (int v = 0; v < n; ++v) {
      for (int w : d.graph.neighbors(v)) {
        if (v < w) {
          graph += std::to_string(v + 1);
          graph += ' ';
          graph += std::to_string(w + 1);
          graph += '\n';
        }
      }
    }

    const lgocv_status rc = give_string(data, data_csv);
    if (rc != LGOCV_OK) return rc;
    const lgocv_status rc2 = give_string(graph, graph_text);
    if (rc2 != LGOCV_OK) {
      lgocv_string_free(*data_csv);
      *data_csv = nullptr;
      return rc2;
    }
    return LGOCV_OK;
  });
}

lgocv_status lgocv_study_run(const char* config_json, char** table_json, char** replicates_csv) {
  if (require(config_json != nullptr, "config_json") != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    const lgocv::StudyConfig cfg = lgocv::parse_study_config(config_json);
    std::string table, reps;
    if (cfg.kind == "temporal-forecast") {
      const auto res = lgocv::forecast_study(cfg.forecast);
      table = lgocv::metric_table_to_json(res.table);
      reps = lgocv::forecast_replicates_to_csv(res.replicates);
    } else {
      const auto res = lgocv::spatial_holdout_study(cfg.spatial);
      table = lgocv::metric_table_to_json(res.table);
      reps = lgocv::spatial_replicates_to_csv(res.replicates);
    }
    if (table_json != nullptr) {
      const lgocv_status rc = give_string(table, table_json);
      if (rc != LGOCV_OK) return rc;
    }
    if (replicates_csv != nullptr) {
      const lgocv_status rc = give_string(reps, replicates_csv);
      if (rc != LGOCV_OK) {
        if (table_json != nullptr) {
          lgocv_string_free(*table_json);
          *table_json = nullptr;
        }
        return rc;
      }
    }
    return LGOCV_OK;
  });
}

lgocv_status lgocv_study_describe(const char* config_json, char** kind, char** table_path,
                                  char** replicates_path) {
  if (require(config_json != nullptr, "config_json") != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    const lgocv::StudyConfig cfg = lgocv::parse_study_config(config_json);
    if (kind != nullptr) {
      const lgocv_status rc = give_string(cfg.kind, kind);
      if (rc != LGOCV_OK) return rc;
    }
    if (table_path != nullptr) {
      const lgocv_status rc = give_string(cfg.table_out, table_path);
      if (rc != LGOCV_OK) return rc;
    }
    if (replicates_path != nullptr) {
      const lgocv_status rc = give_string(cfg.replicates_out, replicates_path);
      if (rc != LGOCV_OK) return rc;
    }
    return LGOCV_OK;
  });
}

lgocv_status lgocv_report_from_replicates(const char* replicates_csv, char** table_json) {
  if (require(replicates_csv != nullptr, "replicates_csv") != LGOCV_OK) return LGOCV_INVALID;
  if (require(table_json != nullptr, "table_json") != LGOCV_OK) return LGOCV_INVALID;
  return guarded([&] {
    const lgocv::MetricTable t = lgocv::table_from_replicates_csv(replicates_csv);
    return give_string(lgocv::metric_table_to_json(t), table_json);
  });
}
