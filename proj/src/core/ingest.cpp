#include "core/ingest.hpp"

#include <algorithm>
#include <optional>
#include <charconv>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "json.hpp"

#include "core/effects.hpp"
#include "core/errors.hpp"
#include "core/graph.hpp"

namespace lgocv {

namespace {

using nlohmann::json;

[[noreturn]] void cell_error(const Csv& c, int row, int col, const std::string& what) {
  throw_validation(errc::parse_error, c.source + " line " + std::to_string(c.row_lines[row]) +
                                          ", column " + std::to_string(col + 1) + ": " + what);
}

}  // namespace

int Csv::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

int Csv::require_column(const std::string& name) const {
  const int c = column(name);
  if (c < 0) {
    throw_validation(errc::schema_error,
                     source + ": missing required column \"" + name + "\"");
  }
  return c;
}

double Csv::number(int row, int col) const {
  const std::string& cell = rows[row][col];
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  const auto [p, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || p != end) {
    cell_error(*this, row, col, "expected a number, got \"" + cell + "\"");
  }
  return v;
}

long long Csv::integer(int row, int col) const {
  const std::string& cell = rows[row][col];
  long long v = 0;
  const char* end = cell.data() + cell.size();
  const auto [p, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || p != end) {
    cell_error(*this, row, col, "expected an integer, got \"" + cell + "\"");
  }
  return v;
}

Eigen::VectorXd Csv::numeric_column(int col) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    v[static_cast<Eigen::Index>(r)] = number(static_cast<int>(r), col);
  }
  return v;
}

std::vector<int> Csv::index_column(int col, int limit) const {
  std::vector<int> out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const long long v = integer(static_cast<int>(r), col);
    if (v < 0) cell_error(*this, static_cast<int>(r), col, "id must be nonnegative");
    if (limit >= 0 && v >= limit) {
      cell_error(*this, static_cast<int>(r), col,
                 "id " + std::to_string(v) + " is out of range (dimension " +
                     std::to_string(limit) + ")");
    }
    out[r] = static_cast<int>(v);
  }
  return out;
}

Csv parse_csv(const std::string& text, const std::string& source) {
  Csv out;
  out.source = source;

  std::vector<std::vector<std::string>> records;
  std::vector<int> record_lines;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool after_quotes = false;   // closing quote seen, awaiting separator
  bool field_quoted = false;   // current field started with a quote
  bool record_started = false;
  int line = 1;
  int record_line = 1;
  int field_no = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_quoted = false;
    after_quotes = false;
    ++field_no;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record_lines.push_back(record_line);
    record.clear();
    record_started = false;
    field_no = 1;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    if (ch == '\r' && !in_quotes) {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;  // CRLF
      throw_validation(errc::parse_error,
                       source + " line " + std::to_string(line) + ": stray carriage return");
    }
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
          after_quotes = true;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      continue;
    }
    if (after_quotes && ch != ',' && ch != '\n') {
      throw_validation(errc::parse_error, source + " line " + std::to_string(line) +
                                              ", column " + std::to_string(field_no) +
                                              ": text after closing quote");
    }
    switch (ch) {
      case '"':
        if (!field.empty() || field_quoted) {
          throw_validation(errc::parse_error, source + " line " + std::to_string(line) +
                                                  ", column " + std::to_string(field_no) +
                                                  ": quote inside unquoted field");
        }
        in_quotes = true;
        field_quoted = true;
        record_started = true;
        if (record.empty() && field_no == 1) record_line = line;
        break;
      case ',':
        if (!record_started) record_line = line;
        record_started = true;
        end_field();
        break;
      case '\n':
        if (!record_started && record.empty() && field.empty()) {
          throw_validation(errc::parse_error,
                           source + " line " + std::to_string(line) + ": blank line");
        }
        end_record();
        ++line;
        break;
      default:
        if (!record_started) record_line = line;
        record_started = true;
        field += ch;
        break;
    }
  }
  if (in_quotes) {
    throw_validation(errc::parse_error,
                     source + ": unterminated quote (field starting near line " +
                         std::to_string(record_line) + ")");
  }
  if (record_started || !record.empty() || !field.empty()) end_record();

  if (records.empty()) {
    throw_validation(errc::parse_error, source + ": empty CSV");
  }
  out.columns = std::move(records.front());
  std::set<std::string> seen;
  for (const auto& name : out.columns) {
    if (name.empty()) {
      throw_validation(errc::schema_error, source + ": empty column name in header");
    }
    if (!seen.insert(name).second) {
      throw_validation(errc::schema_error, source + ": duplicate column \"" + name + "\"");
    }
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != out.columns.size()) {
      throw_validation(errc::parse_error,
                       source + " line " + std::to_string(record_lines[r]) + ": has " +
                           std::to_string(records[r].size()) + " fields, expected " +
                           std::to_string(out.columns.size()));
    }
    out.rows.push_back(std::move(records[r]));
    out.row_lines.push_back(record_lines[r]);
  }
  return out;
}

Csv load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_validation(errc::parse_error, "cannot open data file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos) {
    name = name.substr(slash + 1);
  }
  return parse_csv(buf.str(), name);
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw_validation(errc::schema_error, where + ": unknown key \"" + key + "\"");
    }
  }
}

const json& require_key(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw_validation(errc::schema_error, where + ": missing required key \"" + key + "\"");
  }
  return *it;
}

std::string get_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw_validation(errc::schema_error, where + " must be a string");
  return v.get<std::string>();
}

int get_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw_validation(errc::schema_error, where + " must be an integer");
  return v.get<int>();
}

double get_double(const json& v, const std::string& where) {
  if (!v.is_number()) throw_validation(errc::schema_error, where + " must be a number");
  return v.get<double>();
}

bool get_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) throw_validation(errc::schema_error, where + " must be a boolean");
  return v.get<bool>();
}

std::uint64_t get_seed(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw_validation(errc::schema_error, where + " must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<std::string> get_string_array(const json& v, const std::string& where) {
  if (!v.is_array()) throw_validation(errc::schema_error, where + " must be an array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(get_string(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

void apply_optimizer(const json& o, OptimOptions& optim) {
  if (!o.is_object()) throw_validation(errc::schema_error, "optimizer must be an object");
  reject_unknown(o, {"max_evals", "tol", "init_step"}, "optimizer");
  if (o.contains("max_evals")) optim.max_evals = get_int(o["max_evals"], "optimizer.max_evals");
  if (o.contains("tol")) optim.tol = get_double(o["tol"], "optimizer.tol");
  if (o.contains("init_step")) {
    optim.init_step = get_double(o["init_step"], "optimizer.init_step");
  }
}

PriorSpec parse_prior(const json& v, const std::string& where) {
  if (!v.is_object()) throw_validation(errc::schema_error, where + " must be an object");
  PriorSpec p;
  const std::string kind = get_string(require_key(v, "kind", where), where + ".kind");
  if (kind == "uniform_stdev") {
    reject_unknown(v, {"kind"}, where);
    p.kind = PriorSpec::Kind::uniform_stdev;
  } else if (kind == "pc_precision") {
    reject_unknown(v, {"kind", "u", "alpha"}, where);
    p.kind = PriorSpec::Kind::pc_precision;
    if (v.contains("u")) p.u = get_double(v["u"], where + ".u");
    if (v.contains("alpha")) p.alpha = get_double(v["alpha"], where + ".alpha");
  } else if (kind == "pc_mixing") {
    reject_unknown(v, {"kind", "u", "alpha"}, where);
    p.kind = PriorSpec::Kind::pc_mixing;
    if (v.contains("u")) p.u = get_double(v["u"], where + ".u");
    if (v.contains("alpha")) p.alpha = get_double(v["alpha"], where + ".alpha");
  } else if (kind == "flat") {
    reject_unknown(v, {"kind"}, where);
    p.kind = PriorSpec::Kind::flat;
  } else if (kind == "fixed_value") {
    reject_unknown(v, {"kind", "value"}, where);
    p.kind = PriorSpec::Kind::fixed_value;
    p.value = get_double(require_key(v, "value", where), where + ".value");
  } else {
    throw_validation(errc::schema_error, where + ": unknown prior kind \"" + kind + "\"");
  }
  return p;
}

EffectConfig parse_effect(const json& v, std::size_t pos) {
  const std::string where = "effects[" + std::to_string(pos) + "]";
  if (!v.is_object()) throw_validation(errc::schema_error, where + " must be an object");
  EffectConfig e;
  e.kind = get_string(require_key(v, "kind", where), where + ".kind");
  e.name = get_string(require_key(v, "name", where), where + ".name");
  if (e.name.empty() || e.name.find('.') != std::string::npos) {
    throw_validation(errc::schema_error, where + ".name must be nonempty without dots");
  }
  if (e.kind == "iid" || e.kind == "ar1") {
    reject_unknown(v, {"kind", "name", "column", "dim"}, where);
    e.column = get_string(require_key(v, "column", where), where + ".column");
    if (v.contains("dim")) e.dim = get_int(v["dim"], where + ".dim");
  } else if (e.kind == "rw1") {
    reject_unknown(v, {"kind", "name", "column", "dim", "scale"}, where);
    e.column = get_string(require_key(v, "column", where), where + ".column");
    if (v.contains("dim")) e.dim = get_int(v["dim"], where + ".dim");
    if (v.contains("scale")) e.scale = get_bool(v["scale"], where + ".scale");
  } else if (e.kind == "icar") {
    reject_unknown(v, {"kind", "name", "column", "scale"}, where);
    e.column = get_string(require_key(v, "column", where), where + ".column");
    if (v.contains("scale")) e.scale = get_bool(v["scale"], where + ".scale");
  } else if (e.kind == "bym2") {
    reject_unknown(v, {"kind", "name", "column"}, where);
    e.column = get_string(require_key(v, "column", where), where + ".column");
  } else if (e.kind == "interaction") {
    reject_unknown(v, {"kind", "name", "column", "space_column", "dim", "type"}, where);
    e.column = get_string(require_key(v, "column", where), where + ".column");
    e.space_column =
        get_string(require_key(v, "space_column", where), where + ".space_column");
    if (v.contains("dim")) e.dim = get_int(v["dim"], where + ".dim");
    if (v.contains("type")) e.interaction = get_string(v["type"], where + ".type");
  } else if (e.kind == "pspline2d") {
    reject_unknown(v, {"kind", "name", "lon_column", "lat_column", "k_lon", "k_lat", "degree",
                       "order"},
                   where);
    e.lon_column = get_string(require_key(v, "lon_column", where), where + ".lon_column");
    e.lat_column = get_string(require_key(v, "lat_column", where), where + ".lat_column");
    if (v.contains("k_lon")) e.k_lon = get_int(v["k_lon"], where + ".k_lon");
    if (v.contains("k_lat")) e.k_lat = get_int(v["k_lat"], where + ".k_lat");
    if (v.contains("degree")) e.degree = get_int(v["degree"], where + ".degree");
    if (v.contains("order")) e.order = get_int(v["order"], where + ".order");
  } else {
    throw_validation(errc::schema_error, where + ": unknown effect kind \"" + e.kind + "\"");
  }
  return e;
}

}  // namespace

ModelConfig parse_model_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw_validation(errc::parse_error, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw_validation(errc::schema_error, "config must be a JSON object");
  reject_unknown(j,
                 {"likelihood", "data_csv", "graph_file", "intercept", "fixed", "effects",
                  "priors", "optimizer", "time_column", "space_column", "link_column"},
                 "config");

  ModelConfig cfg;
  const std::string lik = get_string(require_key(j, "likelihood", "config"), "likelihood");
  if (lik == "gaussian") {
    cfg.likelihood = Likelihood::gaussian;
  } else if (lik == "poisson") {
    cfg.likelihood = Likelihood::poisson;
  } else {
    throw_validation(errc::schema_error, "likelihood must be \"gaussian\" or \"poisson\"");
  }
  cfg.data_csv = get_string(require_key(j, "data_csv", "config"), "data_csv");
  if (j.contains("graph_file")) cfg.graph_file = get_string(j["graph_file"], "graph_file");
  if (j.contains("intercept")) cfg.intercept = get_bool(j["intercept"], "intercept");
  if (j.contains("time_column")) cfg.time_column = get_string(j["time_column"], "time_column");
  if (j.contains("space_column")) {
    cfg.space_column = get_string(j["space_column"], "space_column");
  }
  if (j.contains("link_column")) cfg.link_column = get_string(j["link_column"], "link_column");

  if (j.contains("fixed")) {
    if (!j["fixed"].is_array()) throw_validation(errc::schema_error, "fixed must be an array");
    for (std::size_t i = 0; i < j["fixed"].size(); ++i) {
      cfg.fixed.push_back(get_string(j["fixed"][i], "fixed[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("effects")) {
    if (!j["effects"].is_array()) {
      throw_validation(errc::schema_error, "effects must be an array");
    }
    std::set<std::string> names;
    for (std::size_t i = 0; i < j["effects"].size(); ++i) {
      EffectConfig e = parse_effect(j["effects"][i], i);
      if (!names.insert(e.name).second) {
        throw_validation(errc::schema_error, "duplicate effect name \"" + e.name + "\"");
      }
      cfg.effects.push_back(std::move(e));
    }
  }
  if (j.contains("priors")) {
    if (!j["priors"].is_object()) {
      throw_validation(errc::schema_error, "priors must be an object");
    }
    for (const auto& [name, spec] : j["priors"].items()) {
      cfg.priors[name] = parse_prior(spec, "priors." + name);
    }
  }
  if (j.contains("optimizer")) apply_optimizer(j["optimizer"], cfg.optim);
  return cfg;
}

ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_validation(errc::parse_error, "cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_config(buf.str());
}

StudyConfig parse_study_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw_validation(errc::parse_error, std::string("study config: ") + e.what());
  }
  if (!j.is_object()) {
    throw_validation(errc::schema_error, "study config must be a JSON object");
  }

  StudyConfig out;
  out.kind = get_string(require_key(j, "study", "study config"), "study");
  if (j.contains("table_out")) out.table_out = get_string(j["table_out"], "table_out");
  if (j.contains("replicates_out")) {
    out.replicates_out = get_string(j["replicates_out"], "replicates_out");
  }
  if (out.kind == "temporal-forecast") {
    reject_unknown(j,
                   {"study", "table_out", "replicates_out", "seed", "series_length", "horizon",
                    "windows", "threads", "models", "sim", "optimizer"},
                   "study config");
    ForecastStudyConfig& c = out.forecast;
    if (j.contains("seed")) c.seed = get_seed(j["seed"], "seed");
    if (j.contains("series_length")) {
      c.series_length = get_int(j["series_length"], "series_length");
    }
    if (j.contains("horizon")) c.horizon = get_int(j["horizon"], "horizon");
    if (j.contains("windows")) c.windows = get_int(j["windows"], "windows");
    if (j.contains("threads")) c.threads = get_int(j["threads"], "threads");
    if (j.contains("models")) c.models = get_string_array(j["models"], "models");
    if (c.models.empty()) throw_validation(errc::schema_error, "models must not be empty");
    if (j.contains("sim")) {
      const json& s = j["sim"];
      if (!s.is_object()) throw_validation(errc::schema_error, "sim must be an object");
      reject_unknown(s, {"rho", "noise_sd", "intercept"}, "sim");
      if (s.contains("rho")) c.sim.rho = get_double(s["rho"], "sim.rho");
      if (s.contains("noise_sd")) c.sim.noise_sd = get_double(s["noise_sd"], "sim.noise_sd");
      if (s.contains("intercept")) c.sim.intercept = get_double(s["intercept"], "sim.intercept");
    }
    if (j.contains("optimizer")) apply_optimizer(j["optimizer"], c.optim);
  } else if (out.kind == "spatial-holdout") {
    reject_unknown(j,
                   {"study", "table_out", "replicates_out", "seed", "rows", "cols", "ks",
                    "threads", "models", "sim", "optimizer"},
                   "study config");
    SpatialStudyConfig& c = out.spatial;
    if (j.contains("seed")) c.seed = get_seed(j["seed"], "seed");
    if (j.contains("rows")) c.rows = get_int(j["rows"], "rows");
    if (j.contains("cols")) c.cols = get_int(j["cols"], "cols");
    if (j.contains("threads")) c.threads = get_int(j["threads"], "threads");
    if (j.contains("ks")) {
      if (!j["ks"].is_array() || j["ks"].empty()) {
        throw_validation(errc::schema_error, "ks must be a nonempty array");
      }
      c.ks.clear();
      for (std::size_t i = 0; i < j["ks"].size(); ++i) {
        c.ks.push_back(get_int(j["ks"][i], "ks[" + std::to_string(i) + "]"));
      }
    }
    if (j.contains("models")) c.models = get_string_array(j["models"], "models");
    if (c.models.empty()) throw_validation(errc::schema_error, "models must not be empty");
    if (j.contains("sim")) {
      const json& s = j["sim"];
      if (!s.is_object()) throw_validation(errc::schema_error, "sim must be an object");
      reject_unknown(s, {"intercept", "covariate_coef", "spatial_sd", "expected_lo", "expected_hi"},
                     "sim");
      if (s.contains("intercept")) c.sim.intercept = get_double(s["intercept"], "sim.intercept");
      if (s.contains("covariate_coef")) {
        c.sim.covariate_coef = get_double(s["covariate_coef"], "sim.covariate_coef");
      }
      if (s.contains("spatial_sd")) {
        c.sim.spatial_sd = get_double(s["spatial_sd"], "sim.spatial_sd");
      }
      if (s.contains("expected_lo")) {
        c.sim.expected_lo = get_double(s["expected_lo"], "sim.expected_lo");
      }
      if (s.contains("expected_hi")) {
        c.sim.expected_hi = get_double(s["expected_hi"], "sim.expected_hi");
      }
    }
    if (j.contains("optimizer")) apply_optimizer(j["optimizer"], c.optim);
  } else {
    throw_validation(errc::schema_error,
                     "study must be \"temporal-forecast\" or \"spatial-holdout\"");
  }
  return out;
}

namespace {

std::string join_path(const std::string& base, const std::string& path) {
  if (base.empty() || path.empty() || path.front() == '/') return path;
  return base.back() == '/' ? base + path : base + "/" + path;
}

// dim = declared override, else one past the largest id seen
int derive_dim(const std::vector<int>& idx, int declared, const std::string& name) {
  if (declared > 0) return declared;
  int max_id = -1;
  for (int v : idx) max_id = std::max(max_id, v);
  if (max_id < 0) {
    throw_validation(errc::schema_error, "effect " + name + " has no observations");
  }
  return max_id + 1;
}

}  // namespace

IngestResult ingest(const ModelConfig& cfg, const std::string& base_dir) {
  const Csv csv = load_csv(join_path(base_dir, cfg.data_csv));
  const int n = static_cast<int>(csv.rows.size());
  if (n == 0) throw_validation(errc::schema_error, csv.source + ": no data rows");

  const Eigen::VectorXd y = csv.numeric_column(csv.require_column("y"));
  Eigen::VectorXd exposure;
  if (cfg.likelihood == Likelihood::poisson) {
    exposure = csv.numeric_column(csv.require_column("E"));
  }

  const bool needs_graph = std::any_of(cfg.effects.begin(), cfg.effects.end(), [](auto& e) {
    return e.kind == "icar" || e.kind == "bym2" || e.kind == "interaction";
  });
  std::optional<Graph> graph;
  if (needs_graph) {
    if (cfg.graph_file.empty()) {
      throw_validation(errc::schema_error,
                       "config: graph_file is required by the declared spatial effects");
    }
    graph.emplace(Graph::load(join_path(base_dir, cfg.graph_file)));
  }

  std::vector<BlockPtr> blocks;
  if (cfg.intercept || !cfg.fixed.empty()) {
    std::vector<Eigen::VectorXd> cols;
    std::vector<std::string> names;
    if (cfg.intercept) {
      cols.push_back(Eigen::VectorXd::Ones(n));
      names.push_back("intercept");
    }
    for (const auto& cname : cfg.fixed) {
      cols.push_back(csv.numeric_column(csv.require_column(cname)));
      names.push_back(cname);
    }
    blocks.push_back(make_coef_block("beta", std::move(cols), std::move(names)));
  }
  for (const auto& e : cfg.effects) {
    if (e.kind == "pspline2d") {
      const Eigen::VectorXd lon = csv.numeric_column(csv.require_column(e.lon_column));
      const Eigen::VectorXd lat = csv.numeric_column(csv.require_column(e.lat_column));
      blocks.push_back(
          make_pspline2d_block(e.name, lon, lat, e.k_lon, e.k_lat, e.degree, e.order));
      continue;
    }
    if (e.kind == "interaction") {
      std::vector<int> t_idx = csv.index_column(csv.require_column(e.column), -1);
      std::vector<int> s_idx = csv.index_column(csv.require_column(e.space_column), graph->n());
      const int t_dim = derive_dim(t_idx, e.dim, e.name);
      blocks.push_back(make_interaction_block(e.name, std::move(t_idx), std::move(s_idx), t_dim,
                                              *graph,
                                              interaction_type_from_string(e.interaction)));
      continue;
    }
    if (e.kind == "icar" || e.kind == "bym2") {
      std::vector<int> idx = csv.index_column(csv.require_column(e.column), graph->n());
      if (e.kind == "icar") {
        blocks.push_back(make_icar_block(e.name, std::move(idx), *graph, e.scale));
      } else {
        blocks.push_back(make_bym2_block(e.name, std::move(idx), *graph));
      }
      continue;
    }
    std::vector<int> idx = csv.index_column(csv.require_column(e.column), e.dim > 0 ? e.dim : -1);
    const int dim = derive_dim(idx, e.dim, e.name);
    if (e.kind == "iid") {
      blocks.push_back(make_iid_block(e.name, std::move(idx), dim));
    } else if (e.kind == "ar1") {
      blocks.push_back(make_ar1_block(e.name, std::move(idx), dim));
    } else {
      blocks.push_back(make_rw1_block(e.name, std::move(idx), dim, e.scale));
    }
  }

  IngestResult out{LatentModel(cfg.likelihood, y, exposure, std::move(blocks), cfg.priors),
                   {}, {}, {}};

  const std::vector<std::string> problems = out.model.validate();
  if (!problems.empty()) {
    std::string msg = csv.source + ": invalid model data";
    for (const auto& p : problems) msg += "; " + p;
    throw_validation(errc::schema_error, msg);
  }

  if (!cfg.time_column.empty()) {
    out.time_index = csv.index_column(csv.require_column(cfg.time_column), -1);
  }
  if (!cfg.space_column.empty()) {
    out.space_index = csv.index_column(csv.require_column(cfg.space_column), -1);
  }
  if (!cfg.link_column.empty()) {
    out.linkage = csv.index_column(csv.require_column(cfg.link_column), -1);
  }
  return out;
}

}  // namespace lgocv
