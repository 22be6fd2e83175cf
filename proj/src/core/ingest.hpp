#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "core/inference.hpp"
#include "core/model.hpp"
#include "core/study.hpp"

namespace lgocv {

// Strict comma-separated table: one header row, double-quote escaping, and
// every record exactly as wide as the header. Cells are kept verbatim;
// numeric conversion happens at the use site so errors can name the source
// line and column.
struct Csv {
  std::string source;  // label used in error messages
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> row_lines;  // 1-based text line each record starts on

  int column(const std::string& name) const;          // -1 when absent
  int require_column(const std::string& name) const;  // schema_error naming it
  double number(int row, int col) const;
  long long integer(int row, int col) const;
  Eigen::VectorXd numeric_column(int col) const;
  // Nonnegative integer ids; limit >= 0 additionally enforces id < limit.
  std::vector<int> index_column(int col, int limit) const;
};

Csv parse_csv(const std::string& text, const std::string& source = "csv");
Csv load_csv(const std::string& path);

// One additive effect of a configured model. `column` names the integer id
// column driving the effect (the time ids for an interaction, which reads its
// spatial ids from `space_column`); a 2-d spline instead reads the numeric
// `lon_column`/`lat_column` coordinates.
struct EffectConfig {
  std::string kind;  // iid | ar1 | rw1 | icar | bym2 | interaction | pspline2d
  std::string name;
  std::string column;
  std::string space_column;
  std::string lon_column;
  std::string lat_column;
  int dim = 0;  // ids run in [0, dim); 0 derives the dimension from the data
  int k_lon = 8;
  int k_lat = 8;
  int degree = 3;
  int order = 2;
  std::string interaction = "iv";
  bool scale = true;
};

struct ModelConfig {
  Likelihood likelihood = Likelihood::gaussian;
  std::string data_csv;
  std::string graph_file;  // required by icar/bym2/interaction effects
  bool intercept = true;
  std::vector<std::string> fixed;  // covariate columns entering as slopes
  std::vector<EffectConfig> effects;
  std::map<std::string, PriorSpec> priors;
  OptimOptions optim;
  // optional integer id columns consumed by group classification and
  // linked-coordinate expansion
  std::string time_column;
  std::string space_column;
  std::string link_column;
};

// Parses the JSON configuration document. Every object accepts exactly its
// documented keys; anything unknown is rejected so a typo cannot silently
// change the model.
ModelConfig parse_model_config(const std::string& json_text);
ModelConfig load_model_config(const std::string& path);

struct IngestResult {
  LatentModel model;
  std::vector<int> time_index;   // empty when the column is undeclared
  std::vector<int> space_index;
  std::vector<int> linkage;
};

// Simulation study configuration: a "study" key selects the kind and only the
// matching member below is populated. Output paths are optional; the CLI falls
// back to default file names, since the replicate dump is always written.
struct StudyConfig {
  std::string kind;  // "temporal-forecast" or "spatial-holdout"
  std::string table_out;
  std::string replicates_out;
  ForecastStudyConfig forecast;
  SpatialStudyConfig spatial;
};

StudyConfig parse_study_config(const std::string& json_text);

// Loads the configured CSV (and graph when spatial structure is declared)
// and builds the validated model. Row order is preserved; relative paths
// resolve against base_dir.
IngestResult ingest(const ModelConfig& cfg, const std::string& base_dir = {});

}  // namespace lgocv
