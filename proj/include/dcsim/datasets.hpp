#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dcsim/error.hpp"
#include "dcsim/matrix.hpp"
#include "dcsim/random.hpp"

namespace dcsim {

struct LabeledDataset {
  DataMatrix X;
  std::vector<int> y;
  int class_count = 0;
  std::vector<std::string> class_names;  // optional, index = label

  void validate() const {
    if (X.rows() != y.size()) throw ShapeError("LabeledDataset: label count differs from row count");
    for (int label : y) {
      if (label < 0 || label >= class_count) throw ParameterError("LabeledDataset: label out of range");
    }
  }

  LabeledDataset subset(std::span<const std::size_t> rows) const {
    LabeledDataset out;
    out.X = X.select_rows(rows);
    out.y.reserve(rows.size());
    for (auto r : rows) out.y.push_back(y[r]);
    out.class_count = class_count;
    out.class_names = class_names;
    return out;
  }
};

// ---------------------------------------------------------------------------
// Synthetic two-class benchmark

struct ArtificialParams {
  std::size_t informative = 3;
  std::size_t features = 20;
  double center = 1.0;       // informative clusters sit at ±center per axis
  double spread = 0.15;      // Gaussian spread around each cluster centre
  double noise_half_width = 1.0;  // nuisance features ~ U(-w, w)
  bool linear_label = true;  // sign of the informative sum; false = majority of sides

  friend bool operator==(const ArtificialParams&, const ArtificialParams&) = default;
};

struct ArtificialData {
  LabeledDataset train;
  LabeledDataset test;
  DataMatrix public_data;
};

namespace detail {

inline void draw_artificial(Rng& rng, const ArtificialParams& params, std::size_t n, DataMatrix& x,
                            std::vector<int>* labels) {
  x = DataMatrix(n, params.features);
  if (labels) labels->assign(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t positive = 0;
    double sum = 0.0;
    for (std::size_t f = 0; f < params.informative; ++f) {
      const double side = (rng.next() >> 63) ? 1.0 : -1.0;
      const double value = side * params.center + params.spread * rng.normal();
      x(r, f) = value;
      sum += value;
      if (value > 0.0) ++positive;
    }
    if (params.linear_label) positive = sum > 0.0 ? params.informative : 0;
    for (std::size_t f = params.informative; f < params.features; ++f) {
      x(r, f) = rng.uniform(-params.noise_half_width, params.noise_half_width);
    }
    if (labels) (*labels)[r] = 2 * positive > params.informative ? 1 : 0;
  }
  std::vector<std::string> names;
  for (std::size_t f = 0; f < params.features; ++f) names.push_back("f" + std::to_string(f + 1));
  x.set_col_names(std::move(names));
}

}  // namespace detail

/// Twenty-feature two-class problem. Features 1..3 each place a sample in one
/// of two clusters (centres ±center); the label is the sign of their sum (or
/// the majority of cluster sides), so no proper subset of the informative
/// features determines the class. The remaining features are uniform noise.
inline ArtificialData generate_artificial(std::size_t n_train, std::size_t n_test, std::size_t n_public,
                                          std::uint64_t seed, const ArtificialParams& params = {}) {
  if (n_train < 1 || n_test < 1 || n_public < 1) throw ParameterError("generate_artificial: counts must be >= 1");
  if (params.informative < 1 || params.informative > params.features || params.informative % 2 == 0) {
    throw ParameterError("generate_artificial: informative feature count must be odd and <= features");
  }
  ArtificialData out;
  Rng train_rng(derive_seed(seed, "artificial/train"));
  Rng test_rng(derive_seed(seed, "artificial/test"));
  Rng public_rng(derive_seed(seed, "artificial/public"));
  detail::draw_artificial(train_rng, params, n_train, out.train.X, &out.train.y);
  detail::draw_artificial(test_rng, params, n_test, out.test.X, &out.test.y);
  detail::draw_artificial(public_rng, params, n_public, out.public_data, nullptr);
  out.train.class_count = out.test.class_count = 2;
  out.train.class_names = out.test.class_names = {"0", "1"};
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  if (quoted) throw IngestionError("csv line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Reads a headed CSV. Categorical columns expand into one indicator column per
/// level (levels and classes in first-appearance order).
inline LabeledDataset load_csv(const std::string& path, const std::string& label_column,
                               const std::vector<std::string>& categorical_columns = {}) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open csv file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("csv file '" + path + "' is empty (header row required)");
  auto header = detail::split_csv_line(line, 1);
  for (auto& h : header) h = detail::trim(h);

  auto find_col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IngestionError("csv file '" + path + "': unknown column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_idx = find_col(label_column);
  std::vector<char> is_categorical(header.size(), 0);
  for (const auto& name : categorical_columns) {
    const auto idx = find_col(name);
    if (idx == label_idx) throw IngestionError("column '" + name + "' is both label and categorical");
    is_categorical[idx] = 1;
  }

  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line, line_no);
    if (fields.size() != header.size()) {
      throw IngestionError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      fields[c] = detail::trim(fields[c]);
      if (fields[c].empty()) {
        throw IngestionError("csv line " + std::to_string(line_no) + ": missing value in column '" + header[c] + "'");
      }
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw IngestionError("csv file '" + path + "' has no data rows");

  // Levels per categorical column and class labels, first-appearance order.
  std::vector<std::vector<std::string>> levels(header.size());
  auto level_of = [](std::vector<std::string>& lv, const std::string& v) {
    auto it = std::find(lv.begin(), lv.end(), v);
    if (it != lv.end()) return static_cast<std::size_t>(it - lv.begin());
    lv.push_back(v);
    return lv.size() - 1;
  };
  for (const auto& row : rows)
    for (std::size_t c = 0; c < header.size(); ++c)
      if (is_categorical[c]) level_of(levels[c], row[c]);

  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_idx) continue;
    if (is_categorical[c]) {
      for (const auto& lv : levels[c]) names.push_back(header[c] + "=" + lv);
    } else {
      names.push_back(header[c]);
    }
  }

  LabeledDataset ds;
  std::vector<double> values;
  values.reserve(rows.size() * names.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == label_idx) continue;
      if (is_categorical[c]) {
        const auto lv = level_of(levels[c], row[c]);
        for (std::size_t k = 0; k < levels[c].size(); ++k) values.push_back(k == lv ? 1.0 : 0.0);
      } else {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(row[c], &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != row[c].size() || !std::isfinite(v)) {
          throw IngestionError("csv line " + std::to_string(r + 2) + ": column '" + header[c] +
                               "' value '" + row[c] + "' is not a finite number");
        }
        values.push_back(v);
      }
    }
    ds.y.push_back(static_cast<int>(level_of(ds.class_names, row[label_idx])));
  }
  ds.class_count = static_cast<int>(ds.class_names.size());
  const std::size_t width = names.size();
  ds.X = DataMatrix(rows.size(), width, std::move(values), std::move(names));
  return ds;
}

// ---------------------------------------------------------------------------
// Horizontal / vertical partitioning

enum class RowScheme { RandomEqual, Contiguous };
enum class ColScheme { RoundRobin, IndexLists };

struct PartitionPlan {
  std::vector<std::vector<std::size_t>> row_groups;  // c groups, each sorted ascending
  std::vector<std::vector<std::size_t>> col_groups;  // d groups, each sorted ascending

  std::size_t c() const { return row_groups.size(); }
  std::size_t d() const { return col_groups.size(); }
};

namespace detail {

inline void check_cover(const std::vector<std::vector<std::size_t>>& groups, std::size_t total, const char* what) {
  std::vector<char> seen(total, 0);
  for (const auto& g : groups) {
    if (g.empty()) throw ParameterError(std::string("partition: empty ") + what + " group");
    for (auto idx : g) {
      if (idx >= total) throw ParameterError(std::string("partition: ") + what + " index out of range");
      if (seen[idx]) throw ParameterError(std::string("partition: ") + what + " index " + std::to_string(idx) + " assigned twice");
      seen[idx] = 1;
    }
  }
  for (std::size_t i = 0; i < total; ++i)
    if (!seen[i]) throw ParameterError(std::string("partition: ") + what + " index " + std::to_string(i) + " unassigned");
}

}  // namespace detail

inline void validate_plan(const PartitionPlan& plan, std::size_t n, std::size_t m) {
  detail::check_cover(plan.row_groups, n, "row");
  detail::check_cover(plan.col_groups, m, "column");
}

/// Splits n rows into c groups and m columns into d groups.
/// RoundRobin sends 0-based column j to group j mod d (d=2: odd / even 1-based
/// features). IndexLists takes `col_lists` verbatim.
inline PartitionPlan make_partition(std::size_t n, std::size_t m, std::size_t c, std::size_t d,
                                    RowScheme row_scheme, ColScheme col_scheme, std::uint64_t seed,
                                    const std::vector<std::vector<std::size_t>>& col_lists = {}) {
  if (c < 1 || c > n) throw ParameterError("make_partition: need 1 <= c <= n");
  if (col_scheme == ColScheme::RoundRobin && (d < 1 || d > m)) throw ParameterError("make_partition: need 1 <= d <= m");
  PartitionPlan plan;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (row_scheme == RowScheme::RandomEqual) {
    Rng rng(derive_seed(seed, "partition/rows"));
    rng.shuffle(order);
  }
  plan.row_groups.resize(c);
  std::size_t pos = 0;
  for (std::size_t g = 0; g < c; ++g) {
    const std::size_t size = n / c + (g < n % c ? 1 : 0);
    plan.row_groups[g].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                              order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(plan.row_groups[g].begin(), plan.row_groups[g].end());
    pos += size;
  }
  if (col_scheme == ColScheme::RoundRobin) {
    plan.col_groups.resize(d);
    for (std::size_t j = 0; j < m; ++j) plan.col_groups[j % d].push_back(j);
  } else {
    if (col_lists.size() != d) throw ParameterError("make_partition: expected " + std::to_string(d) + " column lists");
    plan.col_groups = col_lists;
    for (auto& g : plan.col_groups) std::sort(g.begin(), g.end());
  }
  validate_plan(plan, n, m);
  return plan;
}

/// Fold id per row for k-fold evaluation; fold sizes differ by at most one.
inline std::vector<std::size_t> kfold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2 || folds > n) throw ParameterError("kfold_assignment: need 2 <= folds <= n");
  Rng rng(derive_seed(seed, "kfold"));
  auto perm = rng.permutation(n);
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = i % folds;
  return fold;
}

// ---------------------------------------------------------------------------
// Normalization

enum class NormScheme { ZScore, MinMax };

struct NormStats {
  std::vector<double> center;
  std::vector<double> scale;
  NormScheme scheme = NormScheme::ZScore;
};

/// ZScore: center = mean, scale = sample standard deviation. MinMax: center =
/// min, scale = max - min. Zero scales are replaced by 1.
inline NormStats fit_norm(const DataMatrix& a, NormScheme scheme = NormScheme::ZScore) {
  NormStats stats;
  stats.scheme = scheme;
  if (scheme == NormScheme::ZScore) {
    stats.center = column_means(a);
    auto var = column_variances(a);
    for (double v : var) stats.scale.push_back(v > 0.0 ? std::sqrt(v) : 1.0);
  } else {
    stats.center.assign(a.cols(), 0.0);
    stats.scale.assign(a.cols(), 1.0);
    for (std::size_t c = 0; c < a.cols(); ++c) {
      double lo = a.rows() ? a(0, c) : 0.0, hi = lo;
      for (std::size_t r = 0; r < a.rows(); ++r) {
        lo = std::min(lo, a(r, c));
        hi = std::max(hi, a(r, c));
      }
      stats.center[c] = lo;
      stats.scale[c] = hi > lo ? hi - lo : 1.0;
    }
  }
  return stats;
}

inline DataMatrix apply_norm(const NormStats& stats, const DataMatrix& a) {
  if (a.cols() != stats.center.size()) throw ShapeError("apply_norm: column count mismatch");
  DataMatrix out = a;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = (a(r, c) - stats.center[c]) / stats.scale[c];
  return out;
}

inline DataMatrix invert_norm(const NormStats& stats, const DataMatrix& a) {
  if (a.cols() != stats.center.size()) throw ShapeError("invert_norm: column count mismatch");
  DataMatrix out = a;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) * stats.scale[c] + stats.center[c];
  return out;
}

}  // namespace dcsim
