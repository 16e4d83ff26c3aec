#pragma once

// Config-driven multi-trial comparison of Centralized / Local / DC methods.
//
// Trial τ uses seed base + τ. Every random stream inside a trial is derived
// from that seed and a fixed tag; anchor and EMD streams also fold in the
// method name, so adding or removing a method never changes another method's
// numbers. Reports carry no timings and serialize deterministically.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dcsim/anchor.hpp"
#include "dcsim/datasets.hpp"
#include "dcsim/error.hpp"
#include "dcsim/metrics.hpp"
#include "dcsim/models.hpp"
#include "dcsim/protocol.hpp"
#include "dcsim/random.hpp"

namespace dcsim {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kReportFormat = 1;

enum class MethodKind { Centralized, Local, DC };

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::DC;
  AnchorSpec anchor;  // DC only; the seed field is ignored (derived per trial)

  friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

struct DatasetConfig {
  std::string type = "artificial";  // "artificial" | "csv"
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  std::size_t n_public = 100;
  ArtificialParams generator;
  std::string path;
  std::string label_column;
  std::vector<std::string> categorical_columns;
  double test_fraction = 0.25;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct EvaluationConfig {
  std::string mode = "holdout";  // "holdout" | "kfold"
  std::size_t folds = 5;

  friend bool operator==(const EvaluationConfig&, const EvaluationConfig&) = default;
};

// A column reference is a 0-based index or a column name. A name also
// matches the one-hot columns "name=level" produced from a categorical column.
using ColumnRef = std::variant<std::size_t, std::string>;

struct PartitionConfig {
  std::size_t c = 2;
  std::size_t d = 2;
  RowScheme rows = RowScheme::RandomEqual;
  ColScheme columns = ColScheme::RoundRobin;
  std::vector<std::vector<ColumnRef>> column_lists;

  friend bool operator==(const PartitionConfig&, const PartitionConfig&) = default;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  EvaluationConfig evaluation;
  PartitionConfig partition;
  PipelineSpec pipeline;
  std::vector<MethodSpec> methods;
  std::vector<std::string> metrics{"NMI", "ACC", "Dice", "AMD(raw)", "AMD(anc)"};
  std::size_t dice_t = 3;
  bool amd_normalized = false;
  std::size_t trials = 20;
  std::uint64_t seed = 1;

  Json source;                   // echoed verbatim into the report
  std::filesystem::path base_dir;  // relative CSV paths resolve against this

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline std::size_t get_count(const Json& j, const std::string& key, const std::string& where, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(where + "." + key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline double get_real(const Json& j, const std::string& key, const std::string& where, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline std::string get_string(const Json& j, const std::string& key, const std::string& where, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline bool get_bool(const Json& j, const std::string& key, const std::string& where, bool fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
  return v.get<bool>();
}

inline const std::set<std::string>& known_metrics() {
  static const std::set<std::string> names{"ACC", "NMI", "Dice", "AMD(raw)", "AMD(anc)", "EMD"};
  return names;
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
  using namespace detail;
  check_keys(j, "config", {"dataset", "evaluation", "partition", "reduction", "models", "methods", "metrics",
                           "dice_t", "amd_normalized", "trials", "seed"});
  ExperimentConfig cfg;
  cfg.source = j;

  if (!j.contains("dataset")) throw ConfigError("config: missing 'dataset'");
  const auto& ds = j.at("dataset");
  check_keys(ds, "dataset", {"type", "n_train", "n_test", "n_public", "generator", "path", "label_column",
                             "categorical_columns", "test_fraction"});
  auto& d = cfg.dataset;
  d.type = get_string(ds, "type", "dataset", "artificial");
  d.n_public = get_count(ds, "n_public", "dataset", d.n_public);
  if (d.type == "artificial") {
    for (const char* k : {"path", "label_column", "categorical_columns", "test_fraction"})
      if (ds.contains(k)) throw ConfigError(std::string("dataset.") + k + ": only valid for csv datasets");
    d.n_train = get_count(ds, "n_train", "dataset", d.n_train);
    d.n_test = get_count(ds, "n_test", "dataset", d.n_test);
    if (ds.contains("generator")) {
      const auto& g = ds.at("generator");
      check_keys(g, "dataset.generator", {"informative", "features", "center", "spread", "noise_half_width", "label"});
      auto& p = d.generator;
      p.informative = get_count(g, "informative", "dataset.generator", p.informative);
      p.features = get_count(g, "features", "dataset.generator", p.features);
      p.center = get_real(g, "center", "dataset.generator", p.center);
      p.spread = get_real(g, "spread", "dataset.generator", p.spread);
      p.noise_half_width = get_real(g, "noise_half_width", "dataset.generator", p.noise_half_width);
      const auto label = get_string(g, "label", "dataset.generator", p.linear_label ? "linear" : "majority");
      if (label != "linear" && label != "majority") throw ConfigError("dataset.generator.label: expected 'linear' or 'majority'");
      p.linear_label = label == "linear";
    }
  } else if (d.type == "csv") {
    for (const char* k : {"n_train", "n_test", "generator"})
      if (ds.contains(k)) throw ConfigError(std::string("dataset.") + k + ": only valid for artificial datasets");
    d.path = get_string(ds, "path", "dataset", "");
    d.label_column = get_string(ds, "label_column", "dataset", "");
    if (d.path.empty()) throw ConfigError("dataset.path: required for csv datasets");
    if (d.label_column.empty()) throw ConfigError("dataset.label_column: required for csv datasets");
    if (ds.contains("categorical_columns")) {
      const auto& cc = ds.at("categorical_columns");
      if (!cc.is_array()) throw ConfigError("dataset.categorical_columns: expected an array of names");
      for (const auto& v : cc) {
        if (!v.is_string()) throw ConfigError("dataset.categorical_columns: expected an array of names");
        d.categorical_columns.push_back(v.get<std::string>());
      }
    }
    d.test_fraction = get_real(ds, "test_fraction", "dataset", d.test_fraction);
  } else {
    throw ConfigError("dataset.type: expected 'artificial' or 'csv', got '" + d.type + "'");
  }

  if (j.contains("evaluation")) {
    const auto& ev = j.at("evaluation");
    check_keys(ev, "evaluation", {"mode", "folds"});
    cfg.evaluation.mode = get_string(ev, "mode", "evaluation", "holdout");
    if (cfg.evaluation.mode != "holdout" && cfg.evaluation.mode != "kfold") {
      throw ConfigError("evaluation.mode: expected 'holdout' or 'kfold'");
    }
    cfg.evaluation.folds = get_count(ev, "folds", "evaluation", cfg.evaluation.folds);
  }

  if (j.contains("partition")) {
    const auto& pt = j.at("partition");
    check_keys(pt, "partition", {"c", "d", "rows", "columns", "column_lists"});
    auto& p = cfg.partition;
    p.c = get_count(pt, "c", "partition", p.c);
    p.d = get_count(pt, "d", "partition", p.d);
    const auto rows = get_string(pt, "rows", "partition", "random-equal");
    if (rows == "random-equal") p.rows = RowScheme::RandomEqual;
    else if (rows == "contiguous") p.rows = RowScheme::Contiguous;
    else throw ConfigError("partition.rows: expected 'random-equal' or 'contiguous'");
    const auto cols = get_string(pt, "columns", "partition", "round-robin");
    if (cols == "round-robin") p.columns = ColScheme::RoundRobin;
    else if (cols == "index-lists") p.columns = ColScheme::IndexLists;
    else throw ConfigError("partition.columns: expected 'round-robin' or 'index-lists'");
    if (pt.contains("column_lists")) {
      if (p.columns != ColScheme::IndexLists) throw ConfigError("partition.column_lists: requires columns = 'index-lists'");
      const auto& lists = pt.at("column_lists");
      if (!lists.is_array()) throw ConfigError("partition.column_lists: expected an array of arrays");
      for (const auto& list : lists) {
        if (!list.is_array()) throw ConfigError("partition.column_lists: expected an array of arrays");
        auto& group = p.column_lists.emplace_back();
        for (const auto& v : list) {
          if (v.is_string()) group.emplace_back(v.get<std::string>());
          else if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) group.emplace_back(v.get<std::size_t>());
          else throw ConfigError("partition.column_lists: entries must be column indices or names");
        }
      }
      if (!pt.contains("d")) p.d = p.column_lists.size();
    } else if (p.columns == ColScheme::IndexLists) {
      throw ConfigError("partition.column_lists: required when columns = 'index-lists'");
    }
  }

  if (j.contains("reduction")) {
    const auto& rd = j.at("reduction");
    check_keys(rd, "reduction", {"dim", "dim_offset", "dims", "target_dim"});
    const int forms = rd.contains("dim") + rd.contains("dim_offset") + rd.contains("dims");
    if (forms > 1) throw ConfigError("reduction: give at most one of 'dim', 'dim_offset', 'dims'");
    auto& ps = cfg.pipeline;
    ps.uniform_reduced_dim = get_count(rd, "dim", "reduction", ps.uniform_reduced_dim);
    ps.reduced_dim_offset = get_count(rd, "dim_offset", "reduction", 0);
    if (rd.contains("dim_offset") && ps.reduced_dim_offset == 0) throw ConfigError("reduction.dim_offset: must be >= 1");
    if (rd.contains("dims")) {
      const auto& dims = rd.at("dims");
      if (!dims.is_array()) throw ConfigError("reduction.dims: expected a c x d array of integers");
      for (const auto& row : dims) {
        if (!row.is_array()) throw ConfigError("reduction.dims: expected a c x d array of integers");
        auto& out = ps.reduced_dims.emplace_back();
        for (const auto& v : row) {
          if (!v.is_number_unsigned()) throw ConfigError("reduction.dims: expected a c x d array of integers");
          out.push_back(v.get<std::size_t>());
        }
      }
    }
    ps.target_dim = get_count(rd, "target_dim", "reduction", 0);
  }

  if (j.contains("models")) {
    const auto& md = j.at("models");
    check_keys(md, "models", {"ridge_lambda", "tree_max_splits"});
    cfg.pipeline.ridge_lambda = get_real(md, "ridge_lambda", "models", cfg.pipeline.ridge_lambda);
    cfg.pipeline.tree_max_splits = get_count(md, "tree_max_splits", "models", cfg.pipeline.tree_max_splits);
  }

  if (!j.contains("methods") || !j.at("methods").is_array()) throw ConfigError("config: 'methods' must be an array");
  for (std::size_t idx = 0; idx < j.at("methods").size(); ++idx) {
    const auto& mj = j.at("methods")[idx];
    const std::string where = "methods[" + std::to_string(idx) + "]";
    check_keys(mj, where, {"name", "kind", "anchor"});
    MethodSpec m;
    const auto kind = get_string(mj, "kind", where, "");
    if (kind == "centralized") m.kind = MethodKind::Centralized;
    else if (kind == "local") m.kind = MethodKind::Local;
    else if (kind == "dc") m.kind = MethodKind::DC;
    else throw ConfigError(where + ".kind: expected 'centralized', 'local' or 'dc'");
    if (m.kind == MethodKind::DC) {
      if (!mj.contains("anchor")) throw ConfigError(where + ".anchor: required for dc methods");
      const auto& an = mj.at("anchor");
      const auto aw = where + ".anchor";
      check_keys(an, aw, {"method", "r", "rank", "delta", "k", "alpha"});
      try {
        m.anchor.method = anchor_method_from_string(get_string(an, "method", aw, ""));
      } catch (const ParameterError& e) {
        throw ConfigError(aw + ".method: " + e.what());
      }
      m.anchor.r = get_count(an, "r", aw, m.anchor.r);
      m.anchor.tsvd_rank = get_count(an, "rank", aw, m.anchor.tsvd_rank);
      m.anchor.delta = get_real(an, "delta", aw, m.anchor.delta);
      m.anchor.k = get_count(an, "k", aw, m.anchor.k);
      m.anchor.alpha = get_real(an, "alpha", aw, m.anchor.alpha);
    } else if (mj.contains("anchor")) {
      throw ConfigError(where + ".anchor: only valid for dc methods");
    }
    m.name = get_string(mj, "name", where, "");
    if (m.name.empty()) {
      m.name = m.kind == MethodKind::Centralized ? "Centralized"
               : m.kind == MethodKind::Local     ? "Local"
                                                 : "DC(" + to_string(m.anchor.method) + ")";
    }
    cfg.methods.push_back(m);
  }

  if (j.contains("metrics")) {
    const auto& ms = j.at("metrics");
    if (!ms.is_array()) throw ConfigError("metrics: expected an array of names");
    cfg.metrics.clear();
    for (const auto& v : ms) {
      if (!v.is_string()) throw ConfigError("metrics: expected an array of names");
      cfg.metrics.push_back(v.get<std::string>());
    }
  }
  cfg.dice_t = get_count(j, "dice_t", "config", cfg.dice_t);
  cfg.amd_normalized = get_bool(j, "amd_normalized", "config", cfg.amd_normalized);
  cfg.trials = get_count(j, "trials", "config", cfg.trials);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("config.seed: expected a non-negative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  return cfg;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  auto cfg = parse_config(read_json_file(path));
  cfg.base_dir = path.parent_path();
  return cfg;
}

/// Canonical JSON for a config, every field spelled out.
inline Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  const auto& d = cfg.dataset;
  Json ds;
  ds["type"] = d.type;
  if (d.type == "artificial") {
    ds["n_train"] = d.n_train;
    ds["n_test"] = d.n_test;
    ds["n_public"] = d.n_public;
    ds["generator"] = {{"informative", d.generator.informative}, {"features", d.generator.features},
                       {"center", d.generator.center}, {"spread", d.generator.spread},
                       {"noise_half_width", d.generator.noise_half_width},
                       {"label", d.generator.linear_label ? "linear" : "majority"}};
  } else {
    ds["path"] = d.path;
    ds["label_column"] = d.label_column;
    ds["categorical_columns"] = d.categorical_columns;
    ds["n_public"] = d.n_public;
    ds["test_fraction"] = d.test_fraction;
  }
  j["dataset"] = ds;
  j["evaluation"] = {{"mode", cfg.evaluation.mode}, {"folds", cfg.evaluation.folds}};
  Json pt{{"c", cfg.partition.c}, {"d", cfg.partition.d},
          {"rows", cfg.partition.rows == RowScheme::RandomEqual ? "random-equal" : "contiguous"},
          {"columns", cfg.partition.columns == ColScheme::RoundRobin ? "round-robin" : "index-lists"}};
  if (cfg.partition.columns == ColScheme::IndexLists) {
    Json lists = Json::array();
    for (const auto& g : cfg.partition.column_lists) {
      Json list = Json::array();
      for (const auto& ref : g) std::visit([&](const auto& v) { list.push_back(v); }, ref);
      lists.push_back(list);
    }
    pt["column_lists"] = lists;
  }
  j["partition"] = pt;
  Json rd;
  const auto& ps = cfg.pipeline;
  if (!ps.reduced_dims.empty()) rd["dims"] = ps.reduced_dims;
  else if (ps.reduced_dim_offset > 0) rd["dim_offset"] = ps.reduced_dim_offset;
  else rd["dim"] = ps.uniform_reduced_dim;
  rd["target_dim"] = ps.target_dim;
  j["reduction"] = rd;
  j["models"] = {{"ridge_lambda", ps.ridge_lambda}, {"tree_max_splits", ps.tree_max_splits}};
  Json methods = Json::array();
  for (const auto& m : cfg.methods) {
    Json mj{{"name", m.name}};
    mj["kind"] = m.kind == MethodKind::Centralized ? "centralized" : m.kind == MethodKind::Local ? "local" : "dc";
    if (m.kind == MethodKind::DC) {
      mj["anchor"] = {{"method", to_string(m.anchor.method)}, {"r", m.anchor.r}, {"rank", m.anchor.tsvd_rank},
                      {"delta", m.anchor.delta}, {"k", m.anchor.k}, {"alpha", m.anchor.alpha}};
    }
    methods.push_back(mj);
  }
  j["methods"] = methods;
  j["metrics"] = cfg.metrics;
  j["dice_t"] = cfg.dice_t;
  j["amd_normalized"] = cfg.amd_normalized;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  return j;
}

/// Applies --seed / --trials overrides to both the parsed values and the echo.
inline void apply_overrides(ExperimentConfig& cfg, std::optional<std::uint64_t> seed, std::optional<std::size_t> trials) {
  if (cfg.source.is_null()) cfg.source = config_to_json(cfg);
  if (seed) {
    cfg.seed = *seed;
    cfg.source["seed"] = *seed;
  }
  if (trials) {
    cfg.trials = *trials;
    cfg.source["trials"] = *trials;
  }
}

// ---------------------------------------------------------------------------
// Validation

/// Dataset facts a validated config resolves to.
struct PreparedExperiment {
  ExperimentConfig config;
  std::optional<LabeledDataset> csv;  // loaded once, split per trial
  std::size_t features = 0;
  std::size_t train_rows = 0;
  std::vector<std::vector<std::size_t>> column_lists;  // resolved index lists
  std::vector<std::string> metric_columns;              // report metric names in order
};

inline std::string metric_column(const std::string& metric, std::size_t dice_t) {
  return metric == "Dice" ? "Dice" + std::to_string(dice_t) : metric;
}

namespace detail {

inline std::size_t csv_split_sizes(const ExperimentConfig& cfg, std::size_t n, std::size_t* test_rows) {
  std::size_t test = 0;
  if (cfg.evaluation.mode == "kfold") {
    test = n / cfg.evaluation.folds;  // smallest fold
  } else {
    test = static_cast<std::size_t>(std::llround(cfg.dataset.test_fraction * static_cast<double>(n)));
  }
  if (test_rows) *test_rows = test;
  if (cfg.evaluation.mode == "kfold") {
    const std::size_t largest = (n + cfg.evaluation.folds - 1) / cfg.evaluation.folds;
    return n >= largest + cfg.dataset.n_public ? n - largest - cfg.dataset.n_public : 0;
  }
  return n >= test + cfg.dataset.n_public ? n - test - cfg.dataset.n_public : 0;
}

}  // namespace detail

/// Checks every setting against the dataset before any trial runs; loads the
/// CSV when the config names one.
inline PreparedExperiment prepare_experiment(const ExperimentConfig& cfg) {
  PreparedExperiment out;
  out.config = cfg;
  if (cfg.source.is_null()) out.config.source = config_to_json(cfg);
  const auto& d = cfg.dataset;
  if (cfg.methods.empty()) throw ConfigError("methods: at least one method is required");
  if (cfg.trials < 1) throw ConfigError("trials: must be >= 1");
  if (d.n_public < 1) throw ConfigError("dataset.n_public: must be >= 1");

  std::vector<std::string> col_names;
  if (d.type == "artificial") {
    if (d.n_train < 1 || d.n_test < 1) throw ConfigError("dataset: n_train and n_test must be >= 1");
    const auto& g = d.generator;
    if (g.informative < 1 || g.informative > g.features || g.informative % 2 == 0) {
      throw ConfigError("dataset.generator.informative: must be odd and <= features");
    }
    if (!(g.spread >= 0.0) || !(g.noise_half_width >= 0.0) || !std::isfinite(g.center)) {
      throw ConfigError("dataset.generator: spread and noise_half_width must be >= 0");
    }
    if (cfg.evaluation.mode != "holdout") throw ConfigError("evaluation.mode: artificial data uses a fresh test set; use 'holdout'");
    out.features = g.features;
    out.train_rows = d.n_train;
    for (std::size_t f = 0; f < g.features; ++f) col_names.push_back("f" + std::to_string(f + 1));
  } else {
    auto path = std::filesystem::path(d.path);
    if (path.is_relative() && !cfg.base_dir.empty()) path = cfg.base_dir / path;
    try {
      out.csv = load_csv(path.string(), d.label_column, d.categorical_columns);
    } catch (const IngestionError& e) {
      throw ConfigError(std::string("dataset: ") + e.what());
    }
    const std::size_t n = out.csv->X.rows();
    out.features = out.csv->X.cols();
    col_names = out.csv->X.col_names();
    if (cfg.evaluation.mode == "kfold") {
      if (cfg.evaluation.folds < 2 || cfg.evaluation.folds > n) throw ConfigError("evaluation.folds: need 2 <= folds <= n");
      if (cfg.trials > cfg.evaluation.folds) {
        throw ConfigError("trials: k-fold evaluation runs at most one trial per fold (" + std::to_string(cfg.evaluation.folds) + ")");
      }
    } else if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) {
      throw ConfigError("dataset.test_fraction: must lie in (0, 1)");
    }
    std::size_t test_rows = 0;
    out.train_rows = detail::csv_split_sizes(cfg, n, &test_rows);
    if (test_rows < 1) throw ConfigError("dataset: test split is empty");
    if (out.train_rows < 2) throw ConfigError("dataset: too few rows left for training after the public and test splits");
  }

  const auto& p = cfg.partition;
  if (p.c < 1 || p.c > out.train_rows) throw ConfigError("partition.c: need 1 <= c <= training rows");
  if (p.d < 1 || p.d > out.features) throw ConfigError("partition.d: need 1 <= d <= features");
  if (p.columns == ColScheme::IndexLists) {
    if (p.column_lists.size() != p.d) throw ConfigError("partition.column_lists: expected d = " + std::to_string(p.d) + " lists");
    for (const auto& g : p.column_lists) {
      auto& resolved = out.column_lists.emplace_back();
      for (const auto& ref : g) {
        if (const auto* idx = std::get_if<std::size_t>(&ref)) {
          if (*idx >= out.features) throw ConfigError("partition.column_lists: column index " + std::to_string(*idx) + " out of range");
          resolved.push_back(*idx);
          continue;
        }
        const auto& name = std::get<std::string>(ref);
        bool found = false;
        for (std::size_t c = 0; c < col_names.size(); ++c) {
          if (col_names[c] == name || col_names[c].rfind(name + "=", 0) == 0) {
            resolved.push_back(c);
            found = true;
          }
        }
        if (!found) throw ConfigError("partition.column_lists: unknown column '" + name + "'");
      }
    }
    try {
      PartitionPlan probe{{}, out.column_lists};
      for (auto& g : probe.col_groups) std::sort(g.begin(), g.end());
      detail::check_cover(probe.col_groups, out.features, "column");
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("partition.column_lists: ") + e.what());
    }
  }
  std::vector<std::size_t> widths(p.d);
  for (std::size_t j = 0; j < p.d; ++j) {
    widths[j] = p.columns == ColScheme::RoundRobin ? out.features / p.d + (j < out.features % p.d ? 1 : 0)
                                                   : out.column_lists[j].size();
  }

  const auto& ps = cfg.pipeline;
  if (!ps.reduced_dims.empty()) {
    if (ps.reduced_dims.size() != p.c) throw ConfigError("reduction.dims: expected c = " + std::to_string(p.c) + " rows");
    for (const auto& row : ps.reduced_dims)
      if (row.size() != p.d) throw ConfigError("reduction.dims: expected d = " + std::to_string(p.d) + " entries per row");
  }
  std::size_t min_total = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < p.c; ++i) {
    const std::size_t n_i = out.train_rows / p.c;
    std::size_t total = 0;
    for (std::size_t j = 0; j < p.d; ++j) {
      const std::size_t dim = ps.reduced_dim(i, j, widths[j]);
      if (dim < 1 || dim >= widths[j]) {
        throw ConfigError("reduction: party (" + std::to_string(i) + "," + std::to_string(j) + ") needs 1 <= reduced dim < " +
                          std::to_string(widths[j]) + ", got " + std::to_string(dim));
      }
      if (n_i < 2) throw ConfigError("partition.c: each row party needs at least 2 rows for PCA");
      total += dim;
    }
    min_total = std::min(min_total, total);
  }
  if (ps.target_dim > min_total) {
    throw ConfigError("reduction.target_dim: " + std::to_string(ps.target_dim) + " exceeds the smallest party width " +
                      std::to_string(min_total));
  }
  if (!(ps.ridge_lambda > 0.0)) throw ConfigError("models.ridge_lambda: must be > 0");
  if (ps.tree_max_splits < 1) throw ConfigError("models.tree_max_splits: must be >= 1");

  std::set<std::string> names;
  for (const auto& m : cfg.methods) {
    if (!names.insert(m.name).second) throw ConfigError("methods: duplicate name '" + m.name + "'");
    if (m.kind != MethodKind::DC) continue;
    const auto& a = m.anchor;
    const std::string where = "methods '" + m.name + "'.anchor";
    if (a.r < 1) throw ConfigError(where + ".r: must be >= 1");
    switch (a.method) {
      case AnchorMethod::Raw:
        if (a.r > out.train_rows) throw ConfigError(where + ".r: raw anchors need r <= training rows");
        break;
      case AnchorMethod::Tsvd: {
        const std::size_t min_width = *std::min_element(widths.begin(), widths.end());
        const std::size_t min_rows = out.train_rows / p.c;
        if (a.tsvd_rank < 1 || a.tsvd_rank > std::min(min_width, min_rows)) {
          throw ConfigError(where + ".rank: must lie in [1, " + std::to_string(std::min(min_width, min_rows)) + "]");
        }
        if (!(a.delta >= 0.0)) throw ConfigError(where + ".delta: must be >= 0");
        break;
      }
      case AnchorMethod::Smote:
        if (a.k < 1) throw ConfigError(where + ".k: must be >= 1");
        if (!(a.alpha > 0.0)) throw ConfigError(where + ".alpha: must be > 0");
        if (d.n_public < 2) throw ConfigError("dataset.n_public: smote anchors need at least 2 public rows");
        break;
      case AnchorMethod::Random:
        break;
    }
  }

  std::set<std::string> seen;
  for (const auto& metric : cfg.metrics) {
    if (!detail::known_metrics().count(metric)) throw ConfigError("metrics: unknown metric '" + metric + "'");
    if (!seen.insert(metric).second) throw ConfigError("metrics: '" + metric + "' listed twice");
    out.metric_columns.push_back(metric_column(metric, cfg.dice_t));
  }
  if (seen.count("Dice") && (cfg.dice_t < 1 || cfg.dice_t > out.features)) {
    throw ConfigError("dice_t: must lie in [1, features]");
  }
  return out;
}

inline void validate_config(const ExperimentConfig& cfg) { (void)prepare_experiment(cfg); }

// ---------------------------------------------------------------------------
// Report

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string method;
  std::map<std::string, double> metrics;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> warnings;
  std::optional<std::string> error;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct MethodSummary {
  std::string method;
  std::map<std::string, MeanSe> metrics;
  std::size_t succeeded = 0;
  std::size_t failed = 0;

  friend bool operator==(const MethodSummary&, const MethodSummary&) = default;
};

struct ExperimentReport {
  std::string version = kVersion;
  Json config;
  std::vector<std::string> methods;
  std::vector<std::string> metrics;
  std::vector<std::pair<std::string, std::string>> notes;
  std::vector<TrialRecord> trials;  // trial-major, methods in config order
  std::vector<MethodSummary> summary;

  const MethodSummary& method_summary(const std::string& name) const {
    for (const auto& s : summary)
      if (s.method == name) return s;
    throw ParameterError("report: no method named '" + name + "'");
  }

  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

/// Wall-clock timings, kept outside the report so report bytes stay reproducible.
struct RunTimings {
  double total_ms = 0.0;
  std::vector<std::map<std::string, double>> per_trial_ms;  // [trial][method]
};

inline Json report_to_json(const ExperimentReport& r) {
  Json j;
  j["format"] = kReportFormat;
  j["version"] = r.version;
  j["config"] = r.config;
  j["methods"] = r.methods;
  j["metrics"] = r.metrics;
  Json notes = Json::object();
  for (const auto& [k, v] : r.notes) notes[k] = v;
  j["notes"] = notes;
  Json trials = Json::array();
  for (const auto& t : r.trials) {
    Json tj{{"trial", t.trial}, {"seed", t.seed}, {"method", t.method}};
    Json mj = Json::object();
    for (const auto& name : r.metrics)
      if (auto it = t.metrics.find(name); it != t.metrics.end()) mj[name] = it->second;
    tj["metrics"] = mj;
    Json dj = Json::object();
    for (const auto& [k, v] : t.diagnostics) dj[k] = v;
    tj["diagnostics"] = dj;
    tj["warnings"] = t.warnings;
    tj["error"] = t.error ? Json(*t.error) : Json(nullptr);
    trials.push_back(tj);
  }
  j["trials"] = trials;
  Json summary = Json::array();
  for (const auto& s : r.summary) {
    Json sj{{"method", s.method}, {"succeeded", s.succeeded}, {"failed", s.failed}};
    Json mj = Json::object();
    for (const auto& name : r.metrics)
      if (auto it = s.metrics.find(name); it != s.metrics.end()) mj[name] = {{"mean", it->second.mean}, {"se", it->second.se}};
    sj["metrics"] = mj;
    summary.push_back(sj);
  }
  j["summary"] = summary;
  return j;
}

inline ExperimentReport report_from_json(const Json& j) {
  try {
    if (j.at("format").get<int>() != kReportFormat) throw ConfigError("report: unsupported format version");
    ExperimentReport r;
    r.version = j.at("version").get<std::string>();
    r.config = j.at("config");
    r.methods = j.at("methods").get<std::vector<std::string>>();
    r.metrics = j.at("metrics").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("notes").items()) r.notes.emplace_back(k, v.get<std::string>());
    for (const auto& tj : j.at("trials")) {
      TrialRecord t;
      t.trial = tj.at("trial").get<std::size_t>();
      t.seed = tj.at("seed").get<std::uint64_t>();
      t.method = tj.at("method").get<std::string>();
      for (const auto& [k, v] : tj.at("metrics").items()) t.metrics[k] = v.get<double>();
      for (const auto& [k, v] : tj.at("diagnostics").items()) t.diagnostics[k] = v.get<double>();
      t.warnings = tj.at("warnings").get<std::vector<std::string>>();
      if (!tj.at("error").is_null()) t.error = tj.at("error").get<std::string>();
      r.trials.push_back(std::move(t));
    }
    for (const auto& sj : j.at("summary")) {
      MethodSummary s;
      s.method = sj.at("method").get<std::string>();
      s.succeeded = sj.at("succeeded").get<std::size_t>();
      s.failed = sj.at("failed").get<std::size_t>();
      for (const auto& [k, v] : sj.at("metrics").items()) s.metrics[k] = {v.at("mean").get<double>(), v.at("se").get<double>()};
      r.summary.push_back(std::move(s));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report: malformed document: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Execution

struct TrialData {
  LabeledDataset train;
  LabeledDataset test;
  DataMatrix public_data;
};

inline std::uint64_t trial_seed(std::uint64_t base, std::size_t trial) { return base + trial; }

inline TrialData make_trial_data(const PreparedExperiment& prep, std::size_t trial) {
  const auto& cfg = prep.config;
  const auto seed = trial_seed(cfg.seed, trial);
  TrialData out;
  if (cfg.dataset.type == "artificial") {
    auto data = generate_artificial(cfg.dataset.n_train, cfg.dataset.n_test, cfg.dataset.n_public,
                                    derive_seed(seed, "data"), cfg.dataset.generator);
    out.train = std::move(data.train);
    out.test = std::move(data.test);
    out.public_data = std::move(data.public_data);
    return out;
  }
  const auto& all = *prep.csv;
  const std::size_t n = all.X.rows();
  std::vector<std::size_t> test_rows, rest;
  if (cfg.evaluation.mode == "kfold") {
    // Folds come from the base seed so the trials walk one fixed partition.
    const auto fold = kfold_assignment(n, cfg.evaluation.folds, derive_seed(cfg.seed, "split/kfold"));
    for (std::size_t r = 0; r < n; ++r) (fold[r] == trial ? test_rows : rest).push_back(r);
    Rng rng(derive_seed(seed, "split/public"));
    rng.shuffle(rest);
  } else {
    Rng rng(derive_seed(seed, "split/holdout"));
    auto perm = rng.permutation(n);
    std::size_t test_count = 0;
    detail::csv_split_sizes(cfg, n, &test_count);
    test_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(test_count));
    rest.assign(perm.begin() + static_cast<std::ptrdiff_t>(test_count), perm.end());
  }
  std::vector<std::size_t> pub(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(cfg.dataset.n_public));
  std::vector<std::size_t> train(rest.begin() + static_cast<std::ptrdiff_t>(cfg.dataset.n_public), rest.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(pub.begin(), pub.end());
  std::sort(train.begin(), train.end());
  out.train = all.subset(train);
  out.test = all.subset(test_rows);
  out.public_data = all.X.select_rows(pub);
  return out;
}

namespace detail {

struct Evaluation {
  double acc = 0.0;
  double nmi = 0.0;
  double dice = 0.0;
};

// Scores one tree whose features are the global columns `cols` (empty = all).
inline Evaluation evaluate_tree(const DecisionTree& tree, const LabeledDataset& test, const std::vector<std::size_t>& cols,
                                const std::vector<std::size_t>& f_star, std::size_t m, std::size_t t) {
  const auto pred = cols.empty() ? tree.predict(test.X) : tree.predict(test.X.select_cols(cols));
  Evaluation e;
  e.acc = accuracy(test.y, pred);
  e.nmi = nmi(pred, test.y);
  if (t > 0) {
    std::vector<double> global(m, 0.0);
    for (std::size_t f = 0; f < tree.importances.size(); ++f) global[cols.empty() ? f : cols[f]] = tree.importances[f];
    e.dice = dice_t(f_star, top_t_features(global, t), t);
  }
  return e;
}

inline void record(TrialRecord& rec, const std::set<std::string>& wanted, const std::string& metric, std::size_t t, double v) {
  if (wanted.count(metric)) rec.metrics[metric_column(metric, t)] = v;
}

}  // namespace detail

/// Runs every configured method on one trial. A failing method records its
/// error and leaves the others untouched.
inline std::vector<TrialRecord> run_trial(const PreparedExperiment& prep, std::size_t trial,
                                          std::map<std::string, double>* timings = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto& cfg = prep.config;
  const auto seed = trial_seed(cfg.seed, trial);
  const std::set<std::string> wanted(cfg.metrics.begin(), cfg.metrics.end());
  const bool need_dice = wanted.count("Dice") > 0;
  const std::size_t t = need_dice ? cfg.dice_t : 0;

  std::vector<TrialRecord> records;
  for (const auto& m : cfg.methods) records.push_back({trial, seed, m.name, {}, {}, {}, std::nullopt});

  TrialData data;
  PartitionPlan plan;
  DecisionTree central;
  std::vector<std::size_t> f_star;
  try {
    data = make_trial_data(prep, trial);
    plan = make_partition(data.train.X.rows(), data.train.X.cols(), cfg.partition.c, cfg.partition.d, cfg.partition.rows,
                          cfg.partition.columns, derive_seed(seed, "partition"), prep.column_lists);
    central = tree_fit(data.train.X, data.train.y, data.train.class_count, cfg.pipeline.tree_max_splits);
    if (need_dice) f_star = top_t_features(central.importances, t);
  } catch (const std::exception& e) {
    for (auto& rec : records) rec.error = std::string("trial setup: ") + e.what();
    return records;
  }
  const std::size_t m = data.train.X.cols();

  std::optional<NormStats> amd_norm;
  if (cfg.amd_normalized) amd_norm = fit_norm(data.train.X, NormScheme::ZScore);

  for (std::size_t idx = 0; idx < cfg.methods.size(); ++idx) {
    const auto& method = cfg.methods[idx];
    auto& rec = records[idx];
    const auto t0 = clock::now();
    try {
      std::vector<detail::Evaluation> evals;
      if (method.kind == MethodKind::Centralized) {
        evals.push_back(detail::evaluate_tree(central, data.test, {}, f_star, m, t));
      } else if (method.kind == MethodKind::Local) {
        for (std::size_t i = 0; i < plan.c(); ++i) {
          const auto rows = data.train.subset(plan.row_groups[i]);
          for (std::size_t j = 0; j < plan.d(); ++j) {
            const auto& cols = plan.col_groups[j];
            const auto tree = tree_fit(rows.X.select_cols(cols), rows.y, rows.class_count, cfg.pipeline.tree_max_splits);
            evals.push_back(detail::evaluate_tree(tree, data.test, cols, f_star, m, t));
          }
        }
      } else {
        AnchorSpec anchor = method.anchor;
        anchor.seed = derive_seed(seed, "anchor/" + method.name);
        const auto result = run_dc_pipeline(data.train, plan, anchor, &data.public_data, cfg.pipeline);
        for (const auto& tree : result.models) evals.push_back(detail::evaluate_tree(tree, data.test, {}, f_star, m, t));
        rec.warnings = result.diagnostics.warnings;
        rec.diagnostics["anchor_disagreement"] = result.diagnostics.anchor_disagreement;
        rec.diagnostics["pseudo_label_agreement"] = result.diagnostics.pseudo_label_agreement;
        rec.diagnostics["central_training_accuracy"] = result.diagnostics.central_training_accuracy;
        const DataMatrix raw = amd_norm ? apply_norm(*amd_norm, data.train.X) : data.train.X;
        const DataMatrix anc = amd_norm ? apply_norm(*amd_norm, result.anchor) : result.anchor;
        if (wanted.count("AMD(raw)")) rec.metrics["AMD(raw)"] = amd(raw, anc);
        if (wanted.count("AMD(anc)")) rec.metrics["AMD(anc)"] = amd(anc, raw);
        if (wanted.count("EMD")) {
          const auto e = emd_detail(data.train.X, result.anchor, derive_seed(seed, "emd/" + method.name));
          rec.metrics["EMD"] = e.value;
          if (e.subsampled) {
            rec.warnings.push_back("emd: row counts differ; larger set subsampled to " + std::to_string(e.matched) + " rows");
          }
        }
      }
      detail::Evaluation mean;
      for (const auto& e : evals) {
        mean.acc += e.acc / static_cast<double>(evals.size());
        mean.nmi += e.nmi / static_cast<double>(evals.size());
        mean.dice += e.dice / static_cast<double>(evals.size());
      }
      detail::record(rec, wanted, "ACC", t, mean.acc);
      detail::record(rec, wanted, "NMI", t, mean.nmi);
      detail::record(rec, wanted, "Dice", t, mean.dice);
    } catch (const std::exception& e) {
      rec.metrics.clear();
      rec.error = e.what();
    }
    if (timings) (*timings)[method.name] = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  }
  return records;
}

inline std::vector<std::pair<std::string, std::string>> report_notes(const ExperimentConfig& cfg) {
  std::ostringstream lambda;
  lambda << cfg.pipeline.ridge_lambda;
  return {
      {"trial_seed", "seed of trial t is base seed + t"},
      {"reduction", "PCA, features centered but not scaled"},
      {"central_model", "ridge one-hot classifier, lambda = " + lambda.str()},
      {"interpretable_model", "best-first CART, Gini, max splits = " + std::to_string(cfg.pipeline.tree_max_splits)},
      {"feature_importance", "tree impurity (Gini) importance; Dice top-t ties go to the lower feature index"},
      {"local", "mean of the c*d party models' test metrics"},
      {"dc", "mean over the row parties' distilled trees"},
      {"amd_units", cfg.amd_normalized ? "z-scored by training-data statistics" : "raw feature units"},
      {"emd", "un-normalized one-to-one transport cost; unequal row counts are subsampled with a per-trial seed"},
  };
}

/// Aggregates per-trial records (any order) into a report.
inline ExperimentReport assemble_report(const PreparedExperiment& prep, std::vector<std::vector<TrialRecord>> per_trial) {
  const auto& cfg = prep.config;
  ExperimentReport report;
  report.config = cfg.source;
  for (const auto& m : cfg.methods) report.methods.push_back(m.name);
  report.metrics = prep.metric_columns;
  report.notes = report_notes(cfg);
  for (auto& trial : per_trial)
    for (auto& rec : trial) report.trials.push_back(std::move(rec));
  std::stable_sort(report.trials.begin(), report.trials.end(),
                   [](const TrialRecord& a, const TrialRecord& b) { return a.trial < b.trial; });
  for (const auto& name : report.methods) {
    MethodSummary s;
    s.method = name;
    std::map<std::string, std::vector<double>> values;
    for (const auto& rec : report.trials) {
      if (rec.method != name) continue;
      if (rec.error) {
        ++s.failed;
        continue;
      }
      ++s.succeeded;
      for (const auto& [k, v] : rec.metrics) values[k].push_back(v);
    }
    for (const auto& [k, v] : values) s.metrics[k] = mean_se(v);
    report.summary.push_back(std::move(s));
  }
  return report;
}

/// Runs all trials, `jobs` at a time. The result does not depend on `jobs`.
inline ExperimentReport run_experiment(const PreparedExperiment& prep, std::size_t jobs = 1, RunTimings* timings = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const std::size_t trials = prep.config.trials;
  std::vector<std::vector<TrialRecord>> per_trial(trials);
  std::vector<std::map<std::string, double>> trial_ms(trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < trials; t = next++) per_trial[t] = run_trial(prep, t, &trial_ms[t]);
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, trials));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  auto report = assemble_report(prep, std::move(per_trial));
  if (timings) {
    timings->per_trial_ms = std::move(trial_ms);
    timings->total_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
  }
  return report;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1, RunTimings* timings = nullptr) {
  return run_experiment(prepare_experiment(cfg), jobs, timings);
}

// ---------------------------------------------------------------------------
// (k, alpha) sweep

struct SweepResult {
  std::string method;
  std::vector<std::size_t> k_grid;
  std::vector<double> alpha_grid;
  std::vector<std::vector<double>> mean_acc;  // [k index][alpha index]
  std::vector<std::vector<double>> se_acc;
  std::vector<std::string> warnings;          // distinct, first-seen order
};

/// One DC(SMOTE)-only experiment per grid point, reporting mean ACC. The SMOTE
/// method is the first dc/smote entry of the config; other methods are dropped.
inline SweepResult run_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& k_grid,
                             const std::vector<double>& alpha_grid, std::size_t jobs = 1) {
  if (k_grid.empty() || alpha_grid.empty()) throw ConfigError("sweep: k and alpha grids must be non-empty");
  const MethodSpec* smote = nullptr;
  for (const auto& m : cfg.methods)
    if (m.kind == MethodKind::DC && m.anchor.method == AnchorMethod::Smote) {
      smote = &m;
      break;
    }
  if (!smote) throw ConfigError("sweep: the config has no dc method with a smote anchor");
  SweepResult out;
  out.method = smote->name;
  out.k_grid = k_grid;
  out.alpha_grid = alpha_grid;
  std::set<std::string> seen;
  for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
    auto& acc_row = out.mean_acc.emplace_back();
    auto& se_row = out.se_acc.emplace_back();
    for (std::size_t ai = 0; ai < alpha_grid.size(); ++ai) {
      ExperimentConfig point = cfg;
      MethodSpec m = *smote;
      m.anchor.k = k_grid[ki];
      m.anchor.alpha = alpha_grid[ai];
      point.methods = {m};
      point.metrics = {"ACC"};
      point.source = Json();
      const auto report = run_experiment(point, jobs);
      for (const auto& rec : report.trials) {
        if (rec.error) throw Error("sweep: k=" + std::to_string(k_grid[ki]) + " failed: " + *rec.error);
        for (const auto& w : rec.warnings)
          if (seen.insert(w).second) out.warnings.push_back(w);
      }
      const auto& s = report.summary.front().metrics.at("ACC");
      acc_row.push_back(s.mean);
      se_row.push_back(s.se);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output files

namespace detail {

inline std::string number(double v) { return Json(v).dump(); }

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

}  // namespace detail

/// trial,seed,method,<metric...>,error -- one row per (trial, method).
inline std::string trials_csv(const ExperimentReport& r) {
  std::string out = "trial,seed,method";
  for (const auto& m : r.metrics) out += "," + detail::csv_field(m);
  out += ",error\n";
  for (const auto& t : r.trials) {
    out += std::to_string(t.trial) + "," + std::to_string(t.seed) + "," + detail::csv_field(t.method);
    for (const auto& m : r.metrics) {
      auto it = t.metrics.find(m);
      out += "," + (it == t.metrics.end() ? std::string() : detail::number(it->second));
    }
    out += "," + detail::csv_field(t.error.value_or("")) + "\n";
  }
  return out;
}

/// method,<metric>_mean,<metric>_se,...,succeeded,failed -- one row per method.
inline std::string summary_csv(const ExperimentReport& r) {
  std::string out = "method";
  for (const auto& m : r.metrics) out += "," + detail::csv_field(m + "_mean") + "," + detail::csv_field(m + "_se");
  out += ",succeeded,failed\n";
  for (const auto& s : r.summary) {
    out += detail::csv_field(s.method);
    for (const auto& m : r.metrics) {
      auto it = s.metrics.find(m);
      if (it == s.metrics.end()) out += ",,";
      else out += "," + detail::number(it->second.mean) + "," + detail::number(it->second.se);
    }
    out += "," + std::to_string(s.succeeded) + "," + std::to_string(s.failed) + "\n";
  }
  return out;
}

/// Markdown table of mean±se, one row per method; "-" marks a metric that
/// does not apply to the method.
inline std::string summary_table(const ExperimentReport& r, int digits = 2) {
  std::string out = "| Method |";
  for (const auto& m : r.metrics) out += " " + m + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < r.metrics.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& s : r.summary) {
    out += "| " + s.method + " |";
    for (const auto& m : r.metrics) {
      auto it = s.metrics.find(m);
      out += it == s.metrics.end() ? std::string(" - |")
                                   : " " + detail::fixed(it->second.mean, digits) + "±" + detail::fixed(it->second.se, digits) + " |";
    }
    out += "\n";
  }
  return out;
}

inline std::string report_document(const ExperimentReport& r) { return report_to_json(r).dump(2) + "\n"; }

/// Writes trials.csv, summary.csv, summary.md and report.json into `dir`.
inline void emit_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  detail::write_file(dir / "trials.csv", trials_csv(r));
  detail::write_file(dir / "summary.csv", summary_csv(r));
  detail::write_file(dir / "summary.md", summary_table(r));
  detail::write_file(dir / "report.json", report_document(r));
}

inline ExperimentReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report '" + path.string() + "'");
  try {
    return report_from_json(Json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("report '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void emit_timings(const RunTimings& t, const std::filesystem::path& dir) {
  Json j{{"total_ms", t.total_ms}};
  Json trials = Json::array();
  for (const auto& per : t.per_trial_ms) {
    Json tj = Json::object();
    for (const auto& [k, v] : per) tj[k] = v;
    trials.push_back(tj);
  }
  j["trials_ms"] = trials;
  detail::write_file(dir / "timings.json", j.dump(2) + "\n");
}

/// sweep.csv: header "k,<alpha...>", one row of mean ACC per k.
inline void emit_sweep(const SweepResult& s, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::string csv = "k";
  for (double a : s.alpha_grid) csv += "," + detail::number(a);
  csv += "\n";
  for (std::size_t ki = 0; ki < s.k_grid.size(); ++ki) {
    csv += std::to_string(s.k_grid[ki]);
    for (double v : s.mean_acc[ki]) csv += "," + detail::number(v);
    csv += "\n";
  }
  detail::write_file(dir / "sweep.csv", csv);
  Json j{{"method", s.method}, {"k", s.k_grid}, {"alpha", s.alpha_grid}, {"mean_acc", s.mean_acc}, {"se_acc", s.se_acc},
         {"warnings", s.warnings}};
  detail::write_file(dir / "sweep.json", j.dump(2) + "\n");
}

}  // namespace dcsim
