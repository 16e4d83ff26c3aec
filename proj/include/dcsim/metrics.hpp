#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "dcsim/error.hpp"
#include "dcsim/linalg.hpp"
#include "dcsim/matrix.hpp"
#include "dcsim/random.hpp"

namespace dcsim {

inline double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.empty()) throw ParameterError("accuracy: empty input");
  if (truth.size() != pred.size()) throw ShapeError("accuracy: length mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

namespace detail {

inline double entropy(const std::map<int, std::size_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [label, count] : counts) {
    const double p = static_cast<double>(count) / n;
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

// True when the two labelings induce the same partition of the samples.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [it1, new1] = ab.emplace(a[i], b[i]);
    auto [it2, new2] = ba.emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

}  // namespace detail

/// I(pred; true) / sqrt(H(pred) H(true)) with natural logs. When an entropy is
/// zero the value is 1 for identical partitions and 0 otherwise.
inline double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.empty()) throw ParameterError("nmi: empty input");
  if (pred.size() != truth.size()) throw ShapeError("nmi: length mismatch");
  const double n = static_cast<double>(pred.size());
  std::map<int, std::size_t> cp, ct;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++cp[pred[i]];
    ++ct[truth[i]];
    ++joint[{pred[i], truth[i]}];
  }
  const double hp = detail::entropy(cp, n);
  const double ht = detail::entropy(ct, n);
  if (hp <= 0.0 || ht <= 0.0) return detail::same_partition(pred, truth) ? 1.0 : 0.0;
  double mi = 0.0;
  for (const auto& [key, count] : joint) {
    const double pij = static_cast<double>(count) / n;
    const double pi = static_cast<double>(cp[key.first]) / n;
    const double pj = static_cast<double>(ct[key.second]) / n;
    mi += pij * std::log(pij / (pi * pj));
  }
  return std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
}

/// |F* ∩ F_pred| / t; both sets must hold exactly t distinct features.
inline double dice_t(const std::vector<std::size_t>& f_star, const std::vector<std::size_t>& f_pred, std::size_t t) {
  const std::set<std::size_t> a(f_star.begin(), f_star.end());
  const std::set<std::size_t> b(f_pred.begin(), f_pred.end());
  if (t == 0 || a.size() != t || b.size() != t || f_star.size() != t || f_pred.size() != t) {
    throw ParameterError("dice_t: both feature sets must contain exactly t distinct indices");
  }
  std::size_t common = 0;
  for (auto f : a) common += b.count(f);
  return static_cast<double>(common) / static_cast<double>(t);
}

/// Indices of the t largest importances; ties go to the lower index.
inline std::vector<std::size_t> top_t_features(const std::vector<double>& importances, std::size_t t) {
  if (t > importances.size()) throw ParameterError("top_t_features: t exceeds feature count");
  std::vector<std::size_t> idx(importances.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return importances[a] > importances[b]; });
  idx.resize(t);
  return idx;
}

/// Mean distance from each row of a to its nearest row of b (directional).
inline double amd(const DataMatrix& a, const DataMatrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("amd: column counts differ");
  if (b.rows() == 0) throw ParameterError("amd: reference set is empty");
  if (a.rows() == 0) throw ParameterError("amd: query set is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) best = std::min(best, squared_distance(ai, b.row(j)));
    total += std::sqrt(best);
  }
  return total / static_cast<double>(a.rows());
}

struct EmdResult {
  double value = 0.0;
  std::size_t matched = 0;  // rows per side after any subsampling
  bool subsampled = false;
};

/// Earth mover's distance under one-to-one transport: the minimum over
/// permutations of the summed Euclidean distances (not normalized). With
/// unequal row counts the larger set is first subsampled to the smaller size
/// using `seed`.
inline EmdResult emd_detail(const DataMatrix& x, const DataMatrix& x_anc, std::uint64_t seed = 0) {
  if (x.cols() != x_anc.cols()) throw ShapeError("emd: column counts differ");
  if (x.rows() == 0 || x_anc.rows() == 0) throw ParameterError("emd: empty input");
  EmdResult out;
  const DataMatrix* a = &x;
  const DataMatrix* b = &x_anc;
  DataMatrix reduced;
  if (x.rows() != x_anc.rows()) {
    out.subsampled = true;
    const bool shrink_x = x.rows() > x_anc.rows();
    const DataMatrix& big = shrink_x ? x : x_anc;
    const std::size_t target = std::min(x.rows(), x_anc.rows());
    Rng rng(derive_seed(seed, "emd/subsample"));
    auto perm = rng.permutation(big.rows());
    perm.resize(target);
    std::sort(perm.begin(), perm.end());
    reduced = big.select_rows(perm);
    (shrink_x ? a : b) = &reduced;
  }
  out.matched = a->rows();
  out.value = min_cost_assignment(pairwise_distances(*a, *b)).total_cost;
  return out;
}

inline double emd(const DataMatrix& x, const DataMatrix& x_anc, std::uint64_t seed = 0) {
  return emd_detail(x, x_anc, seed).value;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  friend bool operator==(const MeanSe&, const MeanSe&) = default;
};

/// Mean and standard error (sample standard deviation / sqrt(T)); se = 0 for T = 1.
inline MeanSe mean_se(const std::vector<double>& values) {
  if (values.empty()) throw ParameterError("aggregate: no trials");
  const double t = static_cast<double>(values.size());
  MeanSe out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / t;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / (t - 1.0)) / std::sqrt(t);
  }
  return out;
}

}  // namespace dcsim
