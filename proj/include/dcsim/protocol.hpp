#pragma once

// Interpretable data collaboration as an explicit worker/master exchange.
//
// Workers hold raw blocks X_{i,j}; they share only PCA-reduced views of their
// block and of the common anchor data, plus the row party's labels. The
// master aligns the reduced views through the anchors, trains a central
// model and sends anchor pseudo-labels back; each row party then distills an
// interpretable tree on the full-width anchor data.
//
// Step numbers in errors follow the usual 13-step listing of the protocol
// (1 anchors, 2-4 worker reduction and upload, 5-6 assembly, 7 maps,
// 8 collaboration representation, 9 central model, 10 anchor labels,
// 11-12 return, 13 distillation).

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcsim/anchor.hpp"
#include "dcsim/datasets.hpp"
#include "dcsim/error.hpp"
#include "dcsim/linalg.hpp"
#include "dcsim/matrix.hpp"
#include "dcsim/models.hpp"

namespace dcsim {

struct PartyId {
  std::size_t row_party = 0;
  std::size_t col_party = 0;
  friend auto operator<=>(const PartyId&, const PartyId&) = default;
};

/// Everything a worker keeps private.
struct WorkerState {
  PartyId id;
  DataMatrix local;         // X_{i,j}
  std::vector<int> labels;  // Y_i, shared by every worker of row party i
  int class_count = 0;
  std::size_t reduced_dim = 0;  // must be < local.cols()
};

/// What a worker sends to the master. Carries reduced matrices only: no field
/// can hold a raw block.
struct WorkerUpload {
  PartyId id;
  std::size_t input_dim = 0;        // m_j, for validation on the master side
  DataMatrix intermediate;          // n_i x reduced
  DataMatrix anchor_intermediate;   // r x reduced
  std::optional<std::vector<int>> labels;  // sent by column party 0 only
  int class_count = 0;

  friend bool operator==(const WorkerUpload&, const WorkerUpload&) = default;
};

struct MasterState {
  std::size_t row_parties = 0;
  std::size_t target_dim = 0;
  std::vector<DataMatrix> intermediates;         // X̃_i
  std::vector<DataMatrix> anchor_intermediates;  // X̃_i^anc
  std::vector<std::vector<int>> labels;          // Y_i
  int class_count = 0;
  DataMatrix target;                             // Z, r x target_dim
  std::vector<DataMatrix> maps;                  // G_i
  std::vector<double> map_condition;             // condition number of each X̃_i^anc
  std::optional<RidgeClassifier> model;          // h
  std::vector<int> training_predictions;
  std::vector<std::string> warnings;

  DataMatrix collaboration(std::size_t i) const { return matmul(intermediates[i], maps[i]); }
  DataMatrix anchor_collaboration(std::size_t i) const { return matmul(anchor_intermediates[i], maps[i]); }
};

/// Pseudo-labels for the anchors, one vector per row party.
struct CollabModelBundle {
  std::vector<std::vector<int>> anchor_labels;
  friend bool operator==(const CollabModelBundle&, const CollabModelBundle&) = default;
};

// ---------------------------------------------------------------------------
// Canonical byte encoding: little-endian u64 counts, i64 labels, IEEE-754
// binary64 values, fields in declaration order.
//
// WorkerUpload : "DCWU" u32(version=1) u64 row_party u64 col_party u64 input_dim
//                i64 class_count matrix(intermediate) matrix(anchor_intermediate)
//                u8 has_labels [u64 n, n x i64]
// CollabModelBundle : "DCLB" u32(version=1) u64 c { u64 r, r x i64 } x c
// matrix : u64 rows u64 cols rows*cols x f64 (row-major)

namespace wire {

class Writer {
 public:
  void raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void matrix(const DataMatrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double v : m.values()) f64(v);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  void expect(const char* magic, std::size_t n) {
    need(n);
    if (std::memcmp(bytes_.data() + pos_, magic, n) != 0) throw ParameterError("wire: bad message tag");
    pos_ += n;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  DataMatrix matrix() {
    const auto rows = u64(), cols = u64();
    if (cols != 0 && rows > (bytes_.size() - pos_) / 8 / cols) throw ParameterError("wire: truncated matrix");
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = f64();
    return DataMatrix(rows, cols, std::move(v));
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ParameterError("wire: truncated message");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace wire

inline std::vector<std::uint8_t> serialize(const WorkerUpload& up) {
  wire::Writer w;
  w.raw("DCWU", 4);
  w.u32(1);
  w.u64(up.id.row_party);
  w.u64(up.id.col_party);
  w.u64(up.input_dim);
  w.i64(up.class_count);
  w.matrix(up.intermediate);
  w.matrix(up.anchor_intermediate);
  w.u8(up.labels.has_value() ? 1 : 0);
  if (up.labels) {
    w.u64(up.labels->size());
    for (int l : *up.labels) w.i64(l);
  }
  return w.take();
}

inline WorkerUpload deserialize_upload(const std::vector<std::uint8_t>& bytes) {
  wire::Reader r(bytes);
  r.expect("DCWU", 4);
  if (r.u32() != 1) throw ParameterError("wire: unsupported upload version");
  WorkerUpload up;
  up.id.row_party = r.u64();
  up.id.col_party = r.u64();
  up.input_dim = r.u64();
  up.class_count = static_cast<int>(r.i64());
  up.intermediate = r.matrix();
  up.anchor_intermediate = r.matrix();
  if (r.u8()) {
    std::vector<int> labels(r.u64());
    for (auto& l : labels) l = static_cast<int>(r.i64());
    up.labels = std::move(labels);
  }
  if (!r.done()) throw ParameterError("wire: trailing bytes after upload");
  return up;
}

inline std::vector<std::uint8_t> serialize(const CollabModelBundle& bundle) {
  wire::Writer w;
  w.raw("DCLB", 4);
  w.u32(1);
  w.u64(bundle.anchor_labels.size());
  for (const auto& labels : bundle.anchor_labels) {
    w.u64(labels.size());
    for (int l : labels) w.i64(l);
  }
  return w.take();
}

inline CollabModelBundle deserialize_bundle(const std::vector<std::uint8_t>& bytes) {
  wire::Reader r(bytes);
  r.expect("DCLB", 4);
  if (r.u32() != 1) throw ParameterError("wire: unsupported bundle version");
  CollabModelBundle bundle;
  bundle.anchor_labels.resize(r.u64());
  for (auto& labels : bundle.anchor_labels) {
    labels.resize(r.u64());
    for (auto& l : labels) l = static_cast<int>(r.i64());
  }
  if (!r.done()) throw ParameterError("wire: trailing bytes after bundle");
  return bundle;
}

// ---------------------------------------------------------------------------
// Worker side

/// Fits the party's PCA map once and applies it to both the local block and
/// the party's columns of the anchor data.
inline WorkerUpload worker_prepare(const WorkerState& state, const DataMatrix& anchor_block) {
  if (anchor_block.cols() != state.local.cols()) {
    throw ShapeError("worker_prepare: anchor block has " + std::to_string(anchor_block.cols()) +
                     " columns, local block has " + std::to_string(state.local.cols()));
  }
  if (state.reduced_dim < 1 || state.reduced_dim >= state.local.cols()) {
    throw ParameterError("worker_prepare: reduced dimension " + std::to_string(state.reduced_dim) +
                         " must lie in [1, m_j=" + std::to_string(state.local.cols()) + ")");
  }
  const auto map = fit_pca(state.local, state.reduced_dim);
  WorkerUpload up;
  up.id = state.id;
  up.input_dim = state.local.cols();
  up.intermediate = apply_pca(map, state.local);
  up.anchor_intermediate = apply_pca(map, anchor_block);
  up.class_count = state.class_count;
  if (state.id.col_party == 0) up.labels = state.labels;
  return up;
}

inline DecisionTree worker_distill(const DataMatrix& x_anc, const std::vector<int>& y_anc, int class_count,
                                   std::size_t max_splits, std::vector<std::string>* warnings = nullptr) {
  if (x_anc.rows() != y_anc.size()) throw ShapeError("worker_distill: anchor rows and pseudo-labels differ in count");
  if (warnings && !y_anc.empty() &&
      std::all_of(y_anc.begin(), y_anc.end(), [&](int l) { return l == y_anc.front(); })) {
    warnings->push_back("worker_distill: single-class pseudo-labels, model is constant");
  }
  return tree_fit(x_anc, y_anc, class_count, max_splits);
}

// ---------------------------------------------------------------------------
// Master side

/// Assembles uploads keyed by party, then aligns row parties: the target Z is
/// the top-`target_dim` left singular vectors of [X̃_1^anc, ..., X̃_c^anc]
/// scaled by their singular values, and G_i is the least-squares solution of
/// X̃_i^anc G_i ≈ Z. target_dim = 0 selects min_i m̃_i.
inline MasterState master_fit_maps(std::vector<WorkerUpload> uploads, std::size_t target_dim = 0) {
  if (uploads.empty()) throw PipelineError(5, "no uploads received");
  std::sort(uploads.begin(), uploads.end(), [](const WorkerUpload& a, const WorkerUpload& b) { return a.id < b.id; });
  std::size_t c = 0, d = 0;
  for (const auto& up : uploads) {
    c = std::max(c, up.id.row_party + 1);
    d = std::max(d, up.id.col_party + 1);
  }
  if (uploads.size() != c * d) throw PipelineError(5, "expected uploads from " + std::to_string(c * d) + " parties");
  for (std::size_t k = 0; k + 1 < uploads.size(); ++k)
    if (uploads[k].id == uploads[k + 1].id) throw PipelineError(5, "duplicate upload");

  MasterState state;
  state.row_parties = c;
  state.labels.resize(c);
  const std::size_t r = uploads.front().anchor_intermediate.rows();
  for (std::size_t i = 0; i < c; ++i) {
    std::vector<DataMatrix> reduced, anchors;
    for (std::size_t j = 0; j < d; ++j) {
      const auto& up = uploads[i * d + j];
      if (up.intermediate.cols() != up.anchor_intermediate.cols()) throw PipelineError(6, "upload matrices disagree in width");
      if (up.intermediate.cols() >= up.input_dim) throw PipelineError(6, "upload is not dimension-reduced");
      if (up.anchor_intermediate.rows() != r) throw PipelineError(6, "inconsistent anchor count across uploads");
      if (up.labels) {
        state.labels[i] = *up.labels;
        state.class_count = std::max(state.class_count, up.class_count);
      }
      reduced.push_back(up.intermediate);
      anchors.push_back(up.anchor_intermediate);
    }
    state.intermediates.push_back(hconcat(reduced));
    state.anchor_intermediates.push_back(hconcat(anchors));
    if (state.labels[i].size() != state.intermediates.back().rows()) {
      throw PipelineError(6, "row party " + std::to_string(i) + " labels missing or mismatched");
    }
  }

  std::size_t min_width = state.anchor_intermediates.front().cols();
  for (const auto& a : state.anchor_intermediates) min_width = std::min(min_width, a.cols());
  if (target_dim == 0) target_dim = min_width;
  if (target_dim > min_width) {
    throw PipelineError(7, "target dimension " + std::to_string(target_dim) + " exceeds min reduced width " +
                               std::to_string(min_width));
  }
  if (target_dim > r) throw PipelineError(7, "target dimension exceeds anchor count");
  state.target_dim = target_dim;

  auto svd = truncated_svd(hconcat(state.anchor_intermediates), target_dim);
  state.target = svd.U;
  for (std::size_t row = 0; row < state.target.rows(); ++row)
    for (std::size_t k = 0; k < target_dim; ++k) state.target(row, k) *= svd.singular_values[k];

  for (std::size_t i = 0; i < c; ++i) {
    auto ls = least_squares(state.anchor_intermediates[i], state.target);
    state.maps.push_back(std::move(ls.solution));
    state.map_condition.push_back(ls.condition);
    if (!(ls.condition < 1e10)) {
      state.warnings.push_back("master_fit_maps: anchor representation of row party " + std::to_string(i) +
                               " is ill-conditioned (cond=" + std::to_string(ls.condition) + "), pseudoinverse used");
    }
  }
  return state;
}

/// Stacks X̂ = [X̃_1 G_1; ...; X̃_c G_c] and fits the ridge classifier h.
inline MasterState master_train(MasterState state, double ridge_lambda) {
  if (state.maps.size() != state.row_parties) throw PipelineError(9, "maps not fitted");
  std::vector<DataMatrix> parts;
  std::vector<int> y;
  for (std::size_t i = 0; i < state.row_parties; ++i) {
    parts.push_back(state.collaboration(i));
    if (state.labels[i].size() != parts.back().rows()) throw PipelineError(9, "label/row mismatch");
    y.insert(y.end(), state.labels[i].begin(), state.labels[i].end());
  }
  const auto x_hat = vconcat(parts);
  state.model = ridge_fit(x_hat, y, state.class_count, ridge_lambda);
  state.training_predictions = state.model->predict(x_hat);
  return state;
}

/// Y_i^anc = argmax h(X̃_i^anc G_i) for every row party.
inline CollabModelBundle master_label_anchors(const MasterState& state) {
  if (!state.model) throw PipelineError(10, "central model not trained");
  CollabModelBundle bundle;
  for (std::size_t i = 0; i < state.row_parties; ++i) bundle.anchor_labels.push_back(state.model->predict(state.anchor_collaboration(i)));
  return bundle;
}

// ---------------------------------------------------------------------------
// End-to-end simulation

struct PipelineSpec {
  // Reduced width per party, indexed [i][j]; empty -> uniform_reduced_dim, or
  // m_j - reduced_dim_offset when the offset is non-zero.
  std::vector<std::vector<std::size_t>> reduced_dims;
  std::size_t uniform_reduced_dim = 5;
  std::size_t reduced_dim_offset = 0;
  std::size_t target_dim = 0;  // 0 -> min_i m̃_i
  double ridge_lambda = 1.0;
  std::size_t tree_max_splits = 5;

  std::size_t reduced_dim(std::size_t i, std::size_t j, std::size_t m_j) const {
    if (!reduced_dims.empty()) return reduced_dims.at(i).at(j);
    if (reduced_dim_offset > 0) return m_j > reduced_dim_offset ? m_j - reduced_dim_offset : 0;
    return uniform_reduced_dim;
  }

  friend bool operator==(const PipelineSpec&, const PipelineSpec&) = default;
};

struct PipelineDiagnostics {
  double anchor_disagreement = 0.0;   // max over pairs of ‖X̃_i^anc G_i − X̃_k^anc G_k‖_F / ‖Z‖_F
  double pseudo_label_agreement = 1.0;  // min over pairs of the fraction of equal anchor labels
  double central_training_accuracy = 0.0;
  std::vector<std::string> warnings;
  std::map<std::string, double> timings_ms;
};

struct PipelineResult {
  DataMatrix anchor;
  std::vector<DecisionTree> models;  // t_i, one per row party
  CollabModelBundle bundle;
  PipelineDiagnostics diagnostics;
};

inline std::vector<std::vector<DataMatrix>> split_blocks(const DataMatrix& x, const PartitionPlan& plan) {
  std::vector<std::vector<DataMatrix>> blocks(plan.c());
  for (std::size_t i = 0; i < plan.c(); ++i) {
    const auto rows = x.select_rows(plan.row_groups[i]);
    for (std::size_t j = 0; j < plan.d(); ++j) blocks[i].push_back(rows.select_cols(plan.col_groups[j]));
  }
  return blocks;
}

inline double anchor_disagreement(const MasterState& state) {
  const double z = std::max(frobenius_norm(state.target), 1e-300);
  double worst = 0.0;
  for (std::size_t a = 0; a < state.row_parties; ++a)
    for (std::size_t b = a + 1; b < state.row_parties; ++b)
      worst = std::max(worst, frobenius_norm(subtract(state.anchor_collaboration(a), state.anchor_collaboration(b))) / z);
  return worst;
}

/// Runs the full protocol over simulated parties. The anchor data is built
/// from `spec`; `public_data` feeds the SMOTE constructor.
inline PipelineResult run_dc_pipeline(const LabeledDataset& train, const PartitionPlan& plan, const AnchorSpec& spec,
                                      const DataMatrix* public_data, const PipelineSpec& pipeline) {
  using clock = std::chrono::steady_clock;
  auto elapsed = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  validate_plan(plan, train.X.rows(), train.X.cols());
  PipelineResult result;
  auto& diag = result.diagnostics;
  const auto blocks = split_blocks(train.X, plan);

  auto t0 = clock::now();
  try {
    AnchorSources src{&blocks, &plan, public_data, &train.X};
    result.anchor = build_anchor(spec, src, &diag.warnings);
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(1, e.what());
  }
  diag.timings_ms["anchor"] = elapsed(t0);

  t0 = clock::now();
  std::vector<WorkerUpload> uploads;
  for (std::size_t i = 0; i < plan.c(); ++i) {
    std::vector<int> labels;
    for (auto r : plan.row_groups[i]) labels.push_back(train.y[r]);
    for (std::size_t j = 0; j < plan.d(); ++j) {
      WorkerState worker{{i, j}, blocks[i][j], labels, train.class_count,
                         pipeline.reduced_dim(i, j, plan.col_groups[j].size())};
      try {
        uploads.push_back(worker_prepare(worker, result.anchor.select_cols(plan.col_groups[j])));
      } catch (const Error& e) {
        throw PipelineError(2, e.what());
      }
    }
  }
  diag.timings_ms["workers"] = elapsed(t0);

  t0 = clock::now();
  MasterState master;
  try {
    master = master_fit_maps(std::move(uploads), pipeline.target_dim);
    master = master_train(std::move(master), pipeline.ridge_lambda);
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(7, e.what());
  }
  diag.warnings.insert(diag.warnings.end(), master.warnings.begin(), master.warnings.end());
  diag.anchor_disagreement = anchor_disagreement(master);
  {
    std::vector<int> y;
    for (const auto& l : master.labels) y.insert(y.end(), l.begin(), l.end());
    std::size_t hit = 0;
    for (std::size_t k = 0; k < y.size(); ++k) hit += y[k] == master.training_predictions[k];
    diag.central_training_accuracy = y.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(y.size());
  }
  result.bundle = master_label_anchors(master);
  diag.timings_ms["master"] = elapsed(t0);

  for (std::size_t a = 0; a < plan.c(); ++a)
    for (std::size_t b = a + 1; b < plan.c(); ++b) {
      const auto& la = result.bundle.anchor_labels[a];
      const auto& lb = result.bundle.anchor_labels[b];
      std::size_t same = 0;
      for (std::size_t k = 0; k < la.size(); ++k) same += la[k] == lb[k];
      diag.pseudo_label_agreement =
          std::min(diag.pseudo_label_agreement, la.empty() ? 1.0 : static_cast<double>(same) / static_cast<double>(la.size()));
    }

  t0 = clock::now();
  for (std::size_t i = 0; i < plan.c(); ++i) {
    try {
      result.models.push_back(worker_distill(result.anchor, result.bundle.anchor_labels[i], train.class_count,
                                             pipeline.tree_max_splits, &diag.warnings));
    } catch (const Error& e) {
      throw PipelineError(13, e.what());
    }
  }
  diag.timings_ms["distill"] = elapsed(t0);
  return result;
}

}  // namespace dcsim
