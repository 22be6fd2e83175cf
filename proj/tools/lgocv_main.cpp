// Command line front end. Everything goes through the shared C interface;
// this file owns only argument parsing and file plumbing.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "lgocv/lgocv.h"

namespace {

constexpr int exit_validation = 2;

struct StringOut {
  char* p = nullptr;
  ~StringOut() { lgocv_string_free(p); }
  char** slot() { return &p; }
  std::string str() const { return p != nullptr ? std::string(p) : std::string(); }
};

[[noreturn]] void die(int code, const std::string& msg) {
  std::fprintf(stderr, "lgocv: %s\n", msg.c_str());
  std::exit(code);
}

[[noreturn]] void die_api(lgocv_status rc) {
  die(static_cast<int>(rc), lgocv_last_error());
}

void check(lgocv_status rc) {
  if (rc != LGOCV_OK) die_api(rc);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die(exit_validation, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) die(exit_validation, "cannot write " + path);
  out << text;
  if (!out) die(exit_validation, "failed writing " + path);
}

// empty path prints to stdout
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_file(path, text);
  }
}

// progress notes go to stderr so files and stdout stay byte-deterministic
class Timer {
 public:
  explicit Timer(std::string what) : what_(std::move(what)), t0_(clock::now()) {}
  ~Timer() {
    const auto dt = std::chrono::duration<double>(clock::now() - t0_).count();
    std::fprintf(stderr, "lgocv: %s in %.2fs\n", what_.c_str(), dt);
  }

 private:
  using clock = std::chrono::steady_clock;
  std::string what_;
  clock::time_point t0_;
};

using ModelPtr = std::unique_ptr<lgocv_model, decltype(&lgocv_model_free)>;
using FitPtr = std::unique_ptr<lgocv_fit, decltype(&lgocv_fit_free)>;
using GroupsPtr = std::unique_ptr<lgocv_groups, decltype(&lgocv_groups_free)>;

ModelPtr make_model(const std::string& config_path, const std::string& base_dir) {
  const std::string text = read_file(config_path);
  // relative data paths resolve against the config's directory unless overridden
  std::string base = base_dir;
  if (base.empty()) {
    const auto slash = config_path.find_last_of('/');
    base = slash == std::string::npos ? std::string(".") : config_path.substr(0, slash);
  }
  lgocv_model* m = nullptr;
  check(lgocv_model_create(text.c_str(), base.c_str(), &m));
  return {m, &lgocv_model_free};
}

FitPtr make_fit(const lgocv_model* m, uint64_t seed, int criteria, bool ccd) {
  lgocv_fit* f = nullptr;
  check(lgocv_model_fit(m, seed, criteria, ccd ? 1 : 0, &f));
  return {f, &lgocv_fit_free};
}

struct GroupFlags {
  std::string mode = "prior";
  int m = 3;
  int max_size = 50;
  double tie_tol = 1e-4;
};

void add_group_flags(CLI::App* cmd, GroupFlags& g) {
  cmd->add_option("--mode", g.mode, "correlation mode: prior or posterior")
      ->check(CLI::IsMember({"prior", "posterior"}));
  cmd->add_option("--m", g.m, "number of correlation levels per group");
  cmd->add_option("--max-size", g.max_size, "group size cap, 0 for unlimited");
  cmd->add_option("--tie-tol", g.tie_tol, "correlation rounding that defines a level");
}

GroupsPtr build_groups(const lgocv_model* m, const lgocv_fit* f, const GroupFlags& g) {
  lgocv_groups* gs = nullptr;
  check(lgocv_groups_build(m, f, g.mode.c_str(), g.m, g.max_size, g.tie_tol, &gs));
  return {gs, &lgocv_groups_free};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent Gaussian models with automatic leave-group-out cross-validation"};
  app.set_version_flag("--version", []() { return std::string(lgocv_version()); });
  app.require_subcommand(1);

  std::string config_path;
  std::string base_dir;
  uint64_t seed = 1;
  app.add_option("--config", config_path, "model or study configuration (JSON)");
  app.add_option("--base-dir", base_dir, "directory data paths resolve against");
  app.add_option("--seed", seed, "seed for every stochastic step");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit a configured model");
  fit_cmd->fallthrough();
  std::string fit_out;
  int fit_criteria = 400;
  bool fit_ccd = false;
  fit_cmd->add_option("--out", fit_out, "write the fit report here instead of stdout");
  fit_cmd->add_option("--criteria-samples", fit_criteria,
                      "Monte Carlo draws for DIC/WAIC, 0 disables");
  fit_cmd->add_flag("--ccd", fit_ccd, "evaluate a design grid around the hyper mode");

  // groups
  auto* groups_cmd = app.add_subcommand("groups", "construct cross-validation groups");
  groups_cmd->fallthrough();
  GroupFlags groups_flags;
  add_group_flags(groups_cmd, groups_flags);
  std::string groups_out;
  bool groups_linked = false;
  groups_cmd->add_option("--out", groups_out, "write the groups report here instead of stdout");
  groups_cmd->add_flag("--linked", groups_linked,
                       "expand groups to whole classes of the configured link column");

  // cv
  auto* cv_cmd = app.add_subcommand("cv", "cross-validated predictive scores");
  cv_cmd->fallthrough();
  GroupFlags cv_flags;
  add_group_flags(cv_cmd, cv_flags);
  std::string cv_method = "fast";
  std::string cv_groups_from;
  std::string cv_out;
  std::string cv_records;
  int cv_criteria = 0;
  bool cv_loo = false;
  bool cv_linked = false;
  cv_cmd->add_option("--method", cv_method, "fast (downdate) or exact (refit per group)")
      ->check(CLI::IsMember({"fast", "exact"}));
  cv_cmd->add_option("--groups-from", cv_groups_from,
                     "model config whose fitted correlations define the groups");
  cv_cmd->add_flag("--loo", cv_loo, "leave-one-out: singleton groups");
  cv_cmd->add_flag("--linked", cv_linked,
                   "expand groups over the link column and score whole classes");
  cv_cmd->add_option("--criteria-samples", cv_criteria,
                     "Monte Carlo draws for DIC/WAIC, 0 disables");
  cv_cmd->add_option("--out", cv_out, "write the score report here instead of stdout");
  cv_cmd->add_option("--records", cv_records, "write per-datum records CSV here");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim_cmd->fallthrough();
  std::string sim_kind;
  std::string sim_out;
  std::string sim_graph_out;
  int sim_n = 2000;
  double sim_rho = 0.9;
  double sim_noise_sd = 0.1;
  double sim_intercept = 0.0;
  int sim_rows = 8;
  int sim_cols = 8;
  double sim_spatial_sd = 0.3;
  sim_cmd->add_option("--kind", sim_kind, "temporal or lattice")
      ->required()
      ->check(CLI::IsMember({"temporal", "lattice"}));
  sim_cmd->add_option("--out", sim_out, "write the data CSV here instead of stdout");
  sim_cmd->add_option("--graph-out", sim_graph_out, "write the lattice adjacency here");
  sim_cmd->add_option("--n", sim_n, "series length (temporal)");
  sim_cmd->add_option("--rho", sim_rho, "AR(1) coefficient (temporal)");
  sim_cmd->add_option("--noise-sd", sim_noise_sd, "observation noise sd (temporal)");
  sim_cmd->add_option("--intercept", sim_intercept, "observation intercept (temporal)");
  sim_cmd->add_option("--rows", sim_rows, "lattice rows");
  sim_cmd->add_option("--cols", sim_cols, "lattice columns");
  sim_cmd->add_option("--spatial-sd", sim_spatial_sd, "spatial field sd (lattice)");

  // study
  auto* study_cmd = app.add_subcommand("study", "run a simulation study");
  study_cmd->fallthrough();
  std::string study_table;
  std::string study_replicates;
  study_cmd->add_option("--table", study_table, "metric table path, stdout when omitted");
  study_cmd->add_option("--replicates", study_replicates,
                        "replicate dump path, overrides the config");

  // report
  auto* report_cmd = app.add_subcommand("report", "recompute a metric table from a dump");
  report_cmd->fallthrough();
  std::string report_in;
  std::string report_out;
  report_cmd->add_option("--replicates", report_in, "replicate dump to read")->required();
  report_cmd->add_option("--out", report_out, "write the table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_validation;
  }

  if (fit_cmd->parsed()) {
    if (config_path.empty()) die(exit_validation, "fit requires --config");
    ModelPtr model = make_model(config_path, base_dir);
    StringOut summary;
    {
      Timer t("fit");
      FitPtr fit = make_fit(model.get(), seed, fit_criteria, fit_ccd);
      check(lgocv_fit_summary_json(fit.get(), summary.slot()));
    }
    emit(fit_out, summary.str());
    return 0;
  }

  if (groups_cmd->parsed()) {
    if (config_path.empty()) die(exit_validation, "groups requires --config");
    ModelPtr model = make_model(config_path, base_dir);
    FitPtr fit = make_fit(model.get(), seed, 0, false);
    GroupsPtr groups = build_groups(model.get(), fit.get(), groups_flags);
    if (groups_linked) check(lgocv_groups_expand_linked(model.get(), groups.get()));
    StringOut json;
    check(lgocv_groups_json(model.get(), groups.get(), json.slot()));
    emit(groups_out, json.str());
    return 0;
  }

  if (cv_cmd->parsed()) {
    if (config_path.empty()) die(exit_validation, "cv requires --config");
    ModelPtr model = make_model(config_path, base_dir);
    FitPtr fit = make_fit(model.get(), seed, 0, false);

    GroupsPtr groups{nullptr, &lgocv_groups_free};
    if (cv_loo) {
      if (!cv_groups_from.empty()) die(exit_validation, "--loo conflicts with --groups-from");
      lgocv_groups* g = nullptr;
      check(lgocv_groups_singletons(model.get(), &g));
      groups = GroupsPtr{g, &lgocv_groups_free};
    } else if (!cv_groups_from.empty()) {
      // groups built on a reference model, transferred onto this one
      ModelPtr ref = make_model(cv_groups_from, base_dir);
      FitPtr ref_fit = make_fit(ref.get(), seed, 0, false);
      GroupsPtr ref_groups = build_groups(ref.get(), ref_fit.get(), cv_flags);
      lgocv_groups* g = nullptr;
      check(lgocv_groups_rebind(model.get(), ref_groups.get(), &g));
      groups = GroupsPtr{g, &lgocv_groups_free};
    } else {
      groups = build_groups(model.get(), fit.get(), cv_flags);
    }
    if (cv_linked) check(lgocv_groups_expand_linked(model.get(), groups.get()));

    StringOut report;
    StringOut records;
    {
      Timer t("cv");
      check(lgocv_cv_score(model.get(), fit.get(), groups.get(), cv_method.c_str(),
                           cv_linked ? 1 : 0, cv_criteria, seed, report.slot(),
                           cv_records.empty() ? nullptr : records.slot()));
    }
    emit(cv_out, report.str());
    if (!cv_records.empty()) write_file(cv_records, records.str());
    return 0;
  }

  if (sim_cmd->parsed()) {
    if (sim_kind == "temporal") {
      StringOut csv;
      check(lgocv_simulate_temporal_csv(seed, sim_n, sim_rho, sim_noise_sd, sim_intercept,
                                        csv.slot()));
      emit(sim_out, csv.str());
    } else {
      if (sim_graph_out.empty()) die(exit_validation, "lattice simulation requires --graph-out");
      StringOut csv;
      StringOut graph;
      check(lgocv_simulate_lattice_csv(seed, sim_rows, sim_cols, sim_spatial_sd, csv.slot(),
                                       graph.slot()));
      emit(sim_out, csv.str());
      write_file(sim_graph_out, graph.str());
    }
    return 0;
  }

  if (study_cmd->parsed()) {
    if (config_path.empty()) die(exit_validation, "study requires --config");
    const std::string text = read_file(config_path);
    StringOut kind;
    StringOut cfg_table;
    StringOut cfg_replicates;
    check(lgocv_study_describe(text.c_str(), kind.slot(), cfg_table.slot(),
                               cfg_replicates.slot()));
    if (study_table.empty()) study_table = cfg_table.str();
    if (study_replicates.empty()) study_replicates = cfg_replicates.str();
    // the raw predictions are always written; they are the audit trail the
    // table can be recomputed from
    if (study_replicates.empty()) study_replicates = kind.str() + "-replicates.csv";

    StringOut table;
    StringOut reps;
    {
      Timer t("study " + kind.str());
      check(lgocv_study_run(text.c_str(), table.slot(), reps.slot()));
    }
    write_file(study_replicates, reps.str());
    emit(study_table, table.str());
    return 0;
  }

  if (report_cmd->parsed()) {
    const std::string text = read_file(report_in);
    StringOut table;
    check(lgocv_report_from_replicates(text.c_str(), table.slot()));
    emit(report_out, table.str());
    return 0;
  }

  die(exit_validation, "no subcommand given");
}
