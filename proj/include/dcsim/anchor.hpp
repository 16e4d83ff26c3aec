#pragma once

// Anchor dataset constructors. Every constructor is a pure function of its
// inputs and seed, so each worker can build the same anchors locally.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "dcsim/datasets.hpp"
#include "dcsim/error.hpp"
#include "dcsim/linalg.hpp"
#include "dcsim/matrix.hpp"
#include "dcsim/random.hpp"

namespace dcsim {

enum class AnchorMethod { Random, Tsvd, Smote, Raw };

inline std::string to_string(AnchorMethod m) {
  switch (m) {
    case AnchorMethod::Random: return "random";
    case AnchorMethod::Tsvd: return "tsvd";
    case AnchorMethod::Smote: return "smote";
    case AnchorMethod::Raw: return "raw";
  }
  return "?";
}

inline AnchorMethod anchor_method_from_string(const std::string& s) {
  if (s == "random") return AnchorMethod::Random;
  if (s == "tsvd") return AnchorMethod::Tsvd;
  if (s == "smote") return AnchorMethod::Smote;
  if (s == "raw") return AnchorMethod::Raw;
  throw ParameterError("unknown anchor method '" + s + "'");
}

struct AnchorSpec {
  AnchorMethod method = AnchorMethod::Smote;
  std::size_t r = 1000;
  std::size_t tsvd_rank = 3;
  double delta = 0.05;  // in units of each block column's standard deviation
  std::size_t k = 25;
  double alpha = 1.5;
  std::uint64_t seed = 0;

  friend bool operator==(const AnchorSpec&, const AnchorSpec&) = default;
};

struct FeatureBounds {
  std::vector<double> min;
  std::vector<double> max;
};

inline FeatureBounds feature_bounds(const DataMatrix& a) {
  if (a.rows() == 0) throw ParameterError("feature_bounds: empty matrix");
  FeatureBounds b{std::vector<double>(a.row(0).begin(), a.row(0).end()),
                  std::vector<double>(a.row(0).begin(), a.row(0).end())};
  for (std::size_t r = 1; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) {
      b.min[c] = std::min(b.min[c], a(r, c));
      b.max[c] = std::max(b.max[c], a(r, c));
    }
  return b;
}

/// Uniform anchors: entry (i, j) ~ U(min_j, max_j).
inline DataMatrix random_anchor(const FeatureBounds& bounds, std::size_t r, std::uint64_t seed) {
  if (bounds.min.size() != bounds.max.size()) throw ShapeError("random_anchor: bound vectors differ in length");
  for (std::size_t j = 0; j < bounds.min.size(); ++j) {
    if (!(bounds.min[j] <= bounds.max[j])) {
      throw ParameterError("random_anchor: inverted bounds for feature " + std::to_string(j));
    }
  }
  if (r < 1) throw ParameterError("random_anchor: r must be >= 1");
  Rng rng(derive_seed(seed, "anchor/random"));
  DataMatrix out(r, bounds.min.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < bounds.min.size(); ++j) out(i, j) = rng.uniform(bounds.min[j], bounds.max[j]);
  return out;
}

/// Per-party bounds merged into full-width bounds: elementwise min/max over the
/// row parties sharing a column group. blocks[i][j] is party (i, j).
inline FeatureBounds merge_party_bounds(const std::vector<std::vector<DataMatrix>>& blocks, const PartitionPlan& plan,
                                        std::size_t m) {
  FeatureBounds out{std::vector<double>(m), std::vector<double>(m)};
  std::vector<char> seen(m, 0);
  for (std::size_t i = 0; i < plan.c(); ++i) {
    for (std::size_t j = 0; j < plan.d(); ++j) {
      auto local = feature_bounds(blocks[i][j]);
      for (std::size_t k = 0; k < plan.col_groups[j].size(); ++k) {
        const auto col = plan.col_groups[j][k];
        if (!seen[col]) {
          out.min[col] = local.min[k];
          out.max[col] = local.max[k];
          seen[col] = 1;
        } else {
          out.min[col] = std::min(out.min[col], local.min[k]);
          out.max[col] = std::max(out.max[col], local.max[k]);
        }
      }
    }
  }
  return out;
}

/// Rank-`rank` reconstruction of one party block plus delta-scaled Gaussian noise.
inline DataMatrix tsvd_block_approximation(const DataMatrix& block, std::size_t rank, double delta, std::uint64_t seed) {
  if (rank < 1 || rank > std::min(block.rows(), block.cols())) {
    throw ParameterError("tsvd_anchor: rank " + std::to_string(rank) + " exceeds block dimensions " +
                         std::to_string(block.rows()) + "x" + std::to_string(block.cols()));
  }
  if (!(delta >= 0.0)) throw ParameterError("tsvd_anchor: delta must be >= 0");
  DataMatrix approx = truncated_svd(block, rank).reconstruct();
  if (delta > 0.0) {
    const auto var = column_variances(block);
    Rng rng(seed);
    for (std::size_t r = 0; r < approx.rows(); ++r)
      for (std::size_t c = 0; c < approx.cols(); ++c) {
        const double sd = var[c] > 0.0 ? std::sqrt(var[c]) : 1.0;
        approx(r, c) += delta * sd * rng.normal();
      }
  }
  return approx;
}

/// Low-rank-plus-noise anchors. Each block blocks[i][j] (laid out per `plan`)
/// is approximated locally; the approximations are reassembled into an n x m
/// matrix. r <= n keeps a uniform row subsample; r > n keeps every row and
/// appends r - n random two-row combinations with weights summing to one.
inline DataMatrix tsvd_anchor(const std::vector<std::vector<DataMatrix>>& blocks, const PartitionPlan& plan,
                              std::size_t rank, double delta, std::size_t r, std::uint64_t seed) {
  if (r < 1) throw ParameterError("tsvd_anchor: r must be >= 1");
  if (blocks.size() != plan.c()) throw ShapeError("tsvd_anchor: block grid does not match the partition plan");
  std::size_t n = 0, m = 0;
  for (const auto& g : plan.row_groups) n += g.size();
  for (const auto& g : plan.col_groups) m += g.size();
  DataMatrix full(n, m);
  for (std::size_t i = 0; i < plan.c(); ++i) {
    if (blocks[i].size() != plan.d()) throw ShapeError("tsvd_anchor: block grid does not match the partition plan");
    for (std::size_t j = 0; j < plan.d(); ++j) {
      const auto& block = blocks[i][j];
      if (block.rows() != plan.row_groups[i].size() || block.cols() != plan.col_groups[j].size()) {
        throw ShapeError("tsvd_anchor: block (" + std::to_string(i) + "," + std::to_string(j) + ") has wrong shape");
      }
      auto approx = tsvd_block_approximation(block, rank, delta, derive_seed(seed, "anchor/tsvd/noise", i * plan.d() + j));
      for (std::size_t a = 0; a < approx.rows(); ++a)
        for (std::size_t b = 0; b < approx.cols(); ++b) full(plan.row_groups[i][a], plan.col_groups[j][b]) = approx(a, b);
    }
  }
  Rng rng(derive_seed(seed, "anchor/tsvd/select"));
  if (r <= n) {
    auto perm = rng.permutation(n);
    perm.resize(r);
    return full.select_rows(perm);
  }
  DataMatrix out(r, m);
  for (std::size_t i = 0; i < n; ++i) std::copy(full.row(i).begin(), full.row(i).end(), out.row(i).begin());
  for (std::size_t i = n; i < r; ++i) {
    const std::size_t a = rng.index(n);
    const std::size_t b = rng.index(n);
    double wa = rng.uniform01(), wb = rng.uniform01();
    const double total = wa + wb;
    if (total > 0.0) {
      wa /= total;
      wb /= total;
    } else {
      wa = wb = 0.5;
    }
    for (std::size_t c = 0; c < m; ++c) out(i, c) = wa * full(a, c) + wb * full(b, c);
  }
  return out;
}

/// Number of synthetic rows drawn from each of p sources so the total is r.
/// The first r mod p sources emit one extra row.
inline std::vector<std::size_t> replicate_counts(std::size_t p, std::size_t r) {
  std::vector<std::size_t> counts(p, r / p);
  for (std::size_t i = 0; i < r % p; ++i) ++counts[i];
  return counts;
}

/// Extended SMOTE over the whole public set.
///
/// After z-scoring the public rows, every row x_i spawns its share of r
/// synthetic rows x_i + c·(x̌ − x_i), where x̌ is drawn uniformly (with
/// replacement) from the k nearest public neighbours of x_i and c ~ U(0, α).
/// α > 1 extrapolates beyond the neighbour. The result is mapped back to the
/// original feature scale. k is clamped to p − 1; a note is appended to
/// `warnings` when that happens.
inline DataMatrix smote_anchor(const DataMatrix& x_pub, std::size_t r, std::size_t k, double alpha, std::uint64_t seed,
                               std::vector<std::string>* warnings = nullptr) {
  const std::size_t p = x_pub.rows();
  if (p < 2) throw ParameterError("smote_anchor: need at least 2 public rows to form neighbourhoods");
  if (r < 1) throw ParameterError("smote_anchor: r must be >= 1");
  if (!(alpha > 0.0)) throw ParameterError("smote_anchor: alpha must be > 0");
  if (k < 1) throw ParameterError("smote_anchor: k must be >= 1");
  if (k > p - 1) {
    if (warnings) {
      warnings->push_back("smote_anchor: k=" + std::to_string(k) + " clamped to p-1=" + std::to_string(p - 1));
    }
    k = p - 1;
  }
  const auto stats = fit_norm(x_pub, NormScheme::ZScore);
  const auto normalized = apply_norm(stats, x_pub);
  const auto counts = replicate_counts(p, r);

  Rng rng(derive_seed(seed, "anchor/smote"));
  DataMatrix out(r, x_pub.cols());
  std::size_t row = 0;
  for (std::size_t i = 0; i < p; ++i) {
    if (counts[i] == 0) continue;
    const auto neighbours = knn_indices(normalized, i, k);
    const auto source = normalized.row(i);
    for (std::size_t rep = 0; rep < counts[i]; ++rep) {
      const auto partner = normalized.row(neighbours[rng.index(k)]);
      const double c = rng.uniform(0.0, alpha);
      auto dst = out.row(row++);
      for (std::size_t f = 0; f < dst.size(); ++f) dst[f] = source[f] + c * (partner[f] - source[f]);
    }
  }
  auto result = invert_norm(stats, out);
  result.set_col_names(x_pub.col_names());
  return result;
}

/// Uniform subsample of r raw rows without replacement (a row permutation when r = n).
inline DataMatrix raw_anchor(const DataMatrix& x, std::size_t r, std::uint64_t seed) {
  if (r < 1 || r > x.rows()) {
    throw ParameterError("raw_anchor: r=" + std::to_string(r) + " must lie in [1, n=" + std::to_string(x.rows()) + "]");
  }
  Rng rng(derive_seed(seed, "anchor/raw"));
  auto perm = rng.permutation(x.rows());
  perm.resize(r);
  return x.select_rows(perm);
}

/// Inputs an anchor constructor may draw on. Raw blocks stay inside the
/// simulated worker boundary: random uses only their bounds, tsvd their
/// low-rank approximations.
struct AnchorSources {
  const std::vector<std::vector<DataMatrix>>* blocks = nullptr;  // [i][j]
  const PartitionPlan* plan = nullptr;
  const DataMatrix* public_data = nullptr;
  const DataMatrix* raw = nullptr;  // pooled training data, used by Raw only
};

inline DataMatrix build_anchor(const AnchorSpec& spec, const AnchorSources& src, std::vector<std::string>* warnings = nullptr) {
  switch (spec.method) {
    case AnchorMethod::Random: {
      if (!src.blocks || !src.plan) throw ParameterError("random anchor needs party blocks");
      std::size_t m = 0;
      for (const auto& g : src.plan->col_groups) m += g.size();
      return random_anchor(merge_party_bounds(*src.blocks, *src.plan, m), spec.r, spec.seed);
    }
    case AnchorMethod::Tsvd:
      if (!src.blocks || !src.plan) throw ParameterError("tsvd anchor needs party blocks");
      return tsvd_anchor(*src.blocks, *src.plan, spec.tsvd_rank, spec.delta, spec.r, spec.seed);
    case AnchorMethod::Smote:
      if (!src.public_data) throw ParameterError("smote anchor needs public data");
      return smote_anchor(*src.public_data, spec.r, spec.k, spec.alpha, spec.seed, warnings);
    case AnchorMethod::Raw:
      if (!src.raw) throw ParameterError("raw anchor needs the pooled raw data");
      return raw_anchor(*src.raw, spec.r, spec.seed);
  }
  throw ParameterError("unknown anchor method");
}

}  // namespace dcsim
