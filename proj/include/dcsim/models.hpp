#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dcsim/error.hpp"
#include "dcsim/linalg.hpp"
#include "dcsim/matrix.hpp"
#include "dcsim/random.hpp"

namespace dcsim {

inline int argmax_lowest(std::span<const double> scores) {
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

/// n x classes indicator matrix, 1 where row i has class j.
inline DataMatrix one_hot(const std::vector<int>& labels, int class_count) {
  DataMatrix out(labels.size(), static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) throw ParameterError("one_hot: label out of range");
    out(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ridge one-hot classifier

/// Linear least-squares classifier on one-hot targets. Scores are regression
/// outputs, not probabilities; rows need not sum to one.
struct RidgeClassifier {
  DataMatrix weights;             // features x classes
  std::vector<double> intercept;  // classes
  double lambda = 1.0;

  DataMatrix scores(const DataMatrix& x) const {
    if (x.cols() != weights.rows()) throw ShapeError("ridge_predict: feature count mismatch");
    DataMatrix s = matmul(x, weights);
    for (std::size_t r = 0; r < s.rows(); ++r)
      for (std::size_t c = 0; c < s.cols(); ++c) s(r, c) += intercept[c];
    return s;
  }

  std::vector<int> predict(const DataMatrix& x) const {
    const auto s = scores(x);
    std::vector<int> out(s.rows());
    for (std::size_t r = 0; r < s.rows(); ++r) out[r] = argmax_lowest(s.row(r));
    return out;
  }
};

/// The intercept is fitted by centering and is not penalized.
inline RidgeClassifier ridge_fit(const DataMatrix& x, const std::vector<int>& labels, int class_count, double lambda) {
  if (x.rows() != labels.size()) throw ShapeError("ridge_fit: label count differs from row count");
  if (x.rows() == 0) throw ParameterError("ridge_fit: empty training set");
  if (!(lambda > 0.0)) throw ParameterError("ridge_fit: lambda must be > 0");
  const auto targets = one_hot(labels, class_count);
  const auto x_mean = column_means(x);
  const auto y_mean = column_means(targets);
  DataMatrix xc = x, yc = targets;
  xc.set_col_names({});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) xc(r, c) -= x_mean[c];
    for (std::size_t c = 0; c < yc.cols(); ++c) yc(r, c) -= y_mean[c];
  }
  RidgeClassifier model;
  model.lambda = lambda;
  model.weights = ridge_solve(xc, yc, lambda);
  model.intercept = y_mean;
  for (std::size_t c = 0; c < yc.cols(); ++c)
    for (std::size_t f = 0; f < x.cols(); ++f) model.intercept[c] -= x_mean[f] * model.weights(f, c);
  return model;
}

inline std::vector<int> ridge_predict(const RidgeClassifier& model, const DataMatrix& x) { return model.predict(x); }

/// Per-feature importance for a ridge model: sum of absolute class weights.
inline std::vector<double> ridge_importances(const RidgeClassifier& model) {
  std::vector<double> imp(model.weights.rows(), 0.0);
  for (std::size_t f = 0; f < model.weights.rows(); ++f)
    for (std::size_t c = 0; c < model.weights.cols(); ++c) imp[f] += std::abs(model.weights(f, c));
  return imp;
}

// ---------------------------------------------------------------------------
// CART decision tree with a split budget

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  std::vector<std::size_t> class_counts;
  int prediction = 0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t max_splits = 0;
  std::size_t feature_count = 0;
  int class_count = 0;
  std::vector<double> importances;  // impurity decrease per feature, normalized

  std::size_t split_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
  }

  int leaf_index(std::span<const double> x) const {
    int idx = 0;
    while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
      const auto& node = nodes[static_cast<std::size_t>(idx)];
      idx = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return idx;
  }

  std::vector<int> predict(const DataMatrix& x) const {
    if (x.cols() != feature_count) throw ShapeError("tree_predict: feature count mismatch");
    std::vector<int> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = nodes[static_cast<std::size_t>(leaf_index(x.row(r)))].prediction;
    return out;
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

namespace detail {

inline double gini(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

struct SplitCandidate {
  bool valid = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // weighted impurity decrease, relative to the whole training set
};

inline SplitCandidate best_split(const DataMatrix& x, const std::vector<int>& y, const std::vector<std::size_t>& rows,
                                 int class_count, std::size_t total_rows) {
  SplitCandidate best;
  const std::size_t n = rows.size();
  if (n < 2) return best;
  std::vector<std::size_t> parent(static_cast<std::size_t>(class_count), 0);
  for (auto r : rows) ++parent[static_cast<std::size_t>(y[r])];
  const double parent_gini = gini(parent, n);
  if (parent_gini <= 0.0) return best;

  std::vector<std::pair<double, int>> column(n);
  std::vector<std::size_t> left(static_cast<std::size_t>(class_count));
  std::vector<std::size_t> right(static_cast<std::size_t>(class_count));
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (std::size_t i = 0; i < n; ++i) column[i] = {x(rows[i], f), y[rows[i]]};
    std::sort(column.begin(), column.end());
    std::fill(left.begin(), left.end(), 0);
    right = parent;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto cls = static_cast<std::size_t>(column[i].second);
      ++left[cls];
      --right[cls];
      if (column[i].first == column[i + 1].first) continue;
      const std::size_t nl = i + 1, nr = n - nl;
      const double child = (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
                           static_cast<double>(n);
      const double gain = static_cast<double>(n) / static_cast<double>(total_rows) * (parent_gini - child);
      if (gain > best.gain + 1e-15) {
        best.valid = true;
        best.feature = static_cast<int>(f);
        best.threshold = 0.5 * (column[i].first + column[i + 1].first);
        best.gain = gain;
      }
    }
  }
  return best;
}

inline int majority(const std::vector<std::size_t>& counts) {
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

}  // namespace detail

/// Greedy Gini CART grown best-first: among all current leaves, the one whose
/// best split yields the largest impurity decrease is split next, until
/// `max_splits` internal nodes exist or no split improves impurity. Ties go to
/// the earliest-created leaf; within a node to the lowest feature index and
/// then the smallest threshold.
inline DecisionTree tree_fit(const DataMatrix& x, const std::vector<int>& y, int class_count, std::size_t max_splits) {
  if (x.rows() != y.size()) throw ShapeError("tree_fit: label count differs from row count");
  if (x.rows() == 0) throw ParameterError("tree_fit: empty training set");
  if (class_count < 1) throw ParameterError("tree_fit: class_count must be >= 1");
  for (int label : y)
    if (label < 0 || label >= class_count) throw ParameterError("tree_fit: label out of range");

  DecisionTree tree;
  tree.max_splits = max_splits;
  tree.feature_count = x.cols();
  tree.class_count = class_count;
  tree.importances.assign(x.cols(), 0.0);

  std::vector<std::vector<std::size_t>> members;
  std::vector<detail::SplitCandidate> candidates;
  auto add_leaf = [&](std::vector<std::size_t> rows) {
    TreeNode node;
    node.class_counts.assign(static_cast<std::size_t>(class_count), 0);
    for (auto r : rows) ++node.class_counts[static_cast<std::size_t>(y[r])];
    node.prediction = detail::majority(node.class_counts);
    tree.nodes.push_back(std::move(node));
    candidates.push_back(max_splits > 0 ? detail::best_split(x, y, rows, class_count, x.rows()) : detail::SplitCandidate{});
    members.push_back(std::move(rows));
    return static_cast<int>(tree.nodes.size() - 1);
  };
  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), 0);
  add_leaf(std::move(all));

  for (std::size_t split = 0; split < max_splits; ++split) {
    int chosen = -1;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      if (!tree.nodes[i].is_leaf() || !candidates[i].valid) continue;
      if (chosen < 0 || candidates[i].gain > candidates[static_cast<std::size_t>(chosen)].gain + 1e-15) chosen = static_cast<int>(i);
    }
    if (chosen < 0) break;
    const auto cand = candidates[static_cast<std::size_t>(chosen)];
    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : members[static_cast<std::size_t>(chosen)]) {
      (x(r, static_cast<std::size_t>(cand.feature)) <= cand.threshold ? left_rows : right_rows).push_back(r);
    }
    const int left = add_leaf(std::move(left_rows));
    const int right = add_leaf(std::move(right_rows));
    auto& node = tree.nodes[static_cast<std::size_t>(chosen)];
    node.feature = cand.feature;
    node.threshold = cand.threshold;
    node.left = left;
    node.right = right;
    tree.importances[static_cast<std::size_t>(cand.feature)] += cand.gain;
    candidates[static_cast<std::size_t>(chosen)].valid = false;
  }
  const double total = std::accumulate(tree.importances.begin(), tree.importances.end(), 0.0);
  if (total > 0.0)
    for (auto& v : tree.importances) v /= total;
  return tree;
}

inline std::vector<int> tree_predict(const DecisionTree& tree, const DataMatrix& x) { return tree.predict(x); }

inline const std::vector<double>& feature_importances(const DecisionTree& tree) { return tree.importances; }

// Indented text rendering, one node per line.
inline std::string export_text(const DecisionTree& tree, const std::vector<std::string>& feature_names = {}) {
  std::ostringstream out;
  auto name = [&](int f) {
    return static_cast<std::size_t>(f) < feature_names.size() ? feature_names[static_cast<std::size_t>(f)]
                                                             : "x[" + std::to_string(f) + "]";
  };
  std::function<void(int, int)> walk = [&](int idx, int depth) {
    const auto& node = tree.nodes[static_cast<std::size_t>(idx)];
    const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
    if (node.is_leaf()) {
      out << pad << "class " << node.prediction << " [";
      for (std::size_t c = 0; c < node.class_counts.size(); ++c) out << (c ? " " : "") << node.class_counts[c];
      out << "]\n";
      return;
    }
    out << pad << name(node.feature) << " <= " << node.threshold << "\n";
    walk(node.left, depth + 1);
    out << pad << name(node.feature) << " > " << node.threshold << "\n";
    walk(node.right, depth + 1);
  };
  walk(0, 0);
  return out.str();
}

// Graphviz DOT rendering.
inline std::string export_dot(const DecisionTree& tree, const std::vector<std::string>& feature_names = {}) {
  std::ostringstream out;
  out << "digraph tree {\n  node [shape=box];\n";
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    out << "  n" << i << " [label=\"";
    if (node.is_leaf()) {
      out << "class " << node.prediction;
    } else {
      const auto f = static_cast<std::size_t>(node.feature);
      out << (f < feature_names.size() ? feature_names[f] : "x[" + std::to_string(f) + "]") << " <= " << node.threshold;
    }
    out << "\"];\n";
    if (!node.is_leaf()) {
      out << "  n" << i << " -> n" << node.left << " [label=\"yes\"];\n";
      out << "  n" << i << " -> n" << node.right << " [label=\"no\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

/// Mean accuracy drop when one feature column is shuffled, averaged over `repeats`.
inline std::vector<double> permutation_importance(const std::function<std::vector<int>(const DataMatrix&)>& predict,
                                                  const DataMatrix& x, const std::vector<int>& y, std::uint64_t seed,
                                                  std::size_t repeats = 3) {
  auto acc = [&](const std::vector<int>& pred) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hit += pred[i] == y[i];
    return static_cast<double>(hit) / static_cast<double>(y.size());
  };
  const double base = acc(predict(x));
  std::vector<double> imp(x.cols(), 0.0);
  Rng rng(derive_seed(seed, "permutation-importance"));
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      DataMatrix shuffled = x;
      auto perm = rng.permutation(x.rows());
      for (std::size_t r = 0; r < x.rows(); ++r) shuffled(r, f) = x(perm[r], f);
      imp[f] += (base - acc(predict(shuffled))) / static_cast<double>(repeats);
    }
  }
  return imp;
}

}  // namespace dcsim
