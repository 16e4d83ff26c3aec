#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <thread>

#include "dcsim/datasets.hpp"
#include "dcsim/metrics.hpp"
#include "dcsim/models.hpp"
#include "test_util.hpp"

using namespace dcsim;

namespace {

struct Labeled {
  DataMatrix x;
  std::vector<int> y;
};

Labeled two_gaussians(std::size_t n, double gap, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  Labeled out{DataMatrix(n, 2), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.y[i] = static_cast<int>(i % 2);
    const double c = out.y[i] ? gap : -gap;
    out.x(i, 0) = c + z(gen);
    out.x(i, 1) = c + z(gen);
  }
  return out;
}

Labeled xor_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Labeled out{DataMatrix(n, 2), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.x(i, 0) = u(gen);
    out.x(i, 1) = u(gen);
    out.y[i] = (out.x(i, 0) > 0) != (out.x(i, 1) > 0);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ridge

TEST(Ridge, SeparatesWellSeparatedGaussians) {
  const auto train = two_gaussians(400, 4.0, 1), test = two_gaussians(400, 4.0, 2);
  const auto model = ridge_fit(train.x, train.y, 2, 1.0);
  EXPECT_GE(accuracy(test.y, ridge_predict(model, test.x)), 0.99);
}

TEST(Ridge, OneHotInputsArePredictedExactly) {
  const std::vector<int> y{0, 1, 2, 2, 1, 0, 1};
  const auto x = one_hot(y, 3);
  const auto model = ridge_fit(x, y, 3, 1e-3);
  EXPECT_EQ(ridge_predict(model, x), y);
}

TEST(Ridge, MatchesCenteredNormalEquations) {
  std::mt19937_64 gen(3);
  const std::size_t n = 120, m = 4;
  const auto x = testutil::gaussian_matrix(gen, n, m);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 0) + 0.5 * x(i, 1) > 0.5 ? 2 : (x(i, 2) > 0 ? 1 : 0);
  const double lambda = 0.7;
  const auto model = ridge_fit(x, y, 3, lambda);

  Eigen::MatrixXd ex = testutil::to_eigen(x), ey = testutil::to_eigen(one_hot(y, 3));
  const Eigen::RowVectorXd mx = ex.colwise().mean(), my = ey.colwise().mean();
  const Eigen::MatrixXd xc = ex.rowwise() - mx, yc = ey.rowwise() - my;
  const Eigen::MatrixXd w =
      (xc.transpose() * xc + lambda * Eigen::MatrixXd::Identity(m, m)).ldlt().solve(xc.transpose() * yc);
  const Eigen::RowVectorXd b = my - mx * w;
  EXPECT_LE(testutil::max_abs_diff(model.weights, testutil::from_eigen(w)), 1e-9);

  const Eigen::MatrixXd scores = (ex * w).rowwise() + b;
  const auto pred = ridge_predict(model, x);
  bool some_row_off_simplex = false;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index best;
    scores.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    EXPECT_EQ(pred[i], static_cast<int>(best));
    some_row_off_simplex |= std::abs(scores.row(static_cast<Eigen::Index>(i)).sum() - 1.0) > 1e-9 ||
                            scores.row(static_cast<Eigen::Index>(i)).minCoeff() < 0.0;
  }
  // Regression scores: they sum to one by linearity but are not probabilities.
  EXPECT_TRUE(some_row_off_simplex);
}

TEST(Ridge, ArgmaxIgnoresConstantScoreShift) {
  const auto data = two_gaussians(100, 1.0, 4);
  auto model = ridge_fit(data.x, data.y, 2, 1.0);
  const auto before = ridge_predict(model, data.x);
  for (auto& b : model.intercept) b += 17.5;
  EXPECT_EQ(ridge_predict(model, data.x), before);
}

TEST(Ridge, TiesGoToLowestClass) {
  const std::vector<double> s{0.5, 0.5, 0.1};
  EXPECT_EQ(argmax_lowest(s), 0);
}

TEST(Ridge, SingleClassGivesConstantPredictor) {
  const auto data = two_gaussians(50, 1.0, 5);
  const std::vector<int> y(50, 1);
  const auto model = ridge_fit(data.x, y, 2, 1.0);
  for (int p : ridge_predict(model, data.x)) EXPECT_EQ(p, 1);
}

TEST(Ridge, RejectsNonPositiveLambdaAndShapeMismatch) {
  const auto data = two_gaussians(10, 1.0, 6);
  EXPECT_THROW(ridge_fit(data.x, data.y, 2, 0.0), ParameterError);
  EXPECT_THROW(ridge_fit(data.x, std::vector<int>(9, 0), 2, 1.0), ShapeError);
}

// ---------------------------------------------------------------------------
// Decision tree

TEST(Tree, ThresholdOnFeatureZeroNeedsOneSplit) {
  std::mt19937_64 gen(7);
  const auto x = testutil::random_matrix(gen, 200, 3);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = x(i, 0) > 0.2;
  const auto tree = tree_fit(x, y, 2, 5);
  EXPECT_EQ(tree.split_count(), 1u);
  EXPECT_EQ(tree.nodes[0].feature, 0);
  EXPECT_DOUBLE_EQ(accuracy(y, tree_predict(tree, x)), 1.0);
}

TEST(Tree, ZeroBudgetGivesMajorityConstant) {
  const auto data = two_gaussians(9, 1.0, 8);
  std::vector<int> y{0, 1, 1, 1, 0, 1, 0, 1, 1};
  const auto tree = tree_fit(data.x, y, 2, 0);
  EXPECT_EQ(tree.split_count(), 0u);
  for (int p : tree_predict(tree, data.x)) EXPECT_EQ(p, 1);
  for (double v : feature_importances(tree)) EXPECT_EQ(v, 0.0);
}

TEST(Tree, XorSolvedWithThreeSplits) {
  const auto data = xor_data(400, 9);
  const auto tree = tree_fit(data.x, data.y, 2, 3);
  EXPECT_LE(tree.split_count(), 3u);
  EXPECT_GE(accuracy(data.y, tree_predict(tree, data.x)), 0.95);
}

TEST(Tree, XorExhaustiveSmallCases) {
  // Every quadrant multiplicity in {1,2,3}^4 on the corners (+-1, +-1). Once
  // greedy Gini finds a root split, two more splits make the tree exact. When
  // the label is independent of each feature alone, no split has positive gain.
  const double corner[4][2] = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  const int label[4] = {0, 1, 1, 0};
  std::size_t split_cases = 0;
  for (int code = 0; code < 81; ++code) {
    int counts[4], rest = code;
    for (auto& c : counts) c = rest % 3 + 1, rest /= 3;
    std::vector<double> values;
    std::vector<int> y;
    for (int q = 0; q < 4; ++q)
      for (int k = 0; k < counts[q]; ++k) {
        values.insert(values.end(), {corner[q][0], corner[q][1]});
        y.push_back(label[q]);
      }
    const DataMatrix x(y.size(), 2, std::move(values));
    const auto tree = tree_fit(x, y, 2, 3);
    if (tree.split_count() == 0) {
      EXPECT_EQ(counts[1] * counts[3], counts[0] * counts[2]) << "code " << code;
      EXPECT_EQ(counts[2] * counts[3], counts[0] * counts[1]) << "code " << code;
      continue;
    }
    ++split_cases;
    EXPECT_DOUBLE_EQ(accuracy(y, tree_predict(tree, x)), 1.0) << "code " << code;
  }
  EXPECT_GT(split_cases, 60u);
}

TEST(Tree, SingleSplitImportanceIsUnitVector) {
  std::mt19937_64 gen(10);
  const auto x = testutil::random_matrix(gen, 100, 10);
  std::vector<int> y(100);
  for (std::size_t i = 0; i < 100; ++i) y[i] = x(i, 7) > 0.0;
  const auto tree = tree_fit(x, y, 2, 5);
  ASSERT_EQ(tree.split_count(), 1u);
  for (std::size_t f = 0; f < 10; ++f) EXPECT_DOUBLE_EQ(feature_importances(tree)[f], f == 7 ? 1.0 : 0.0);
}

TEST(Tree, ArtificialCentralTreeFindsTheInformativeFeatures) {
  const auto data = generate_artificial(1000, 1, 1, 1);
  const auto tree = tree_fit(data.train.X, data.train.y, 2, 5);
  auto top = top_t_features(feature_importances(tree), 3);
  std::sort(top.begin(), top.end());
  EXPECT_EQ(top, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Tree, DuplicatingAnUnusedColumnLeavesImportancesUnchanged) {
  std::mt19937_64 gen(11);
  const auto x = testutil::random_matrix(gen, 150, 3);
  std::vector<int> y(150);
  for (std::size_t i = 0; i < 150; ++i) y[i] = x(i, 0) > 0.0;
  const auto tree = tree_fit(x, y, 2, 5);
  ASSERT_EQ(feature_importances(tree)[2], 0.0);

  DataMatrix wide(150, 4);
  for (std::size_t i = 0; i < 150; ++i) {
    for (std::size_t c = 0; c < 3; ++c) wide(i, c) = x(i, c);
    wide(i, 3) = x(i, 2);
  }
  const auto wide_tree = tree_fit(wide, y, 2, 5);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(feature_importances(wide_tree)[c], feature_importances(tree)[c]);
  EXPECT_EQ(feature_importances(wide_tree)[3], 0.0);
}

TEST(Tree, StructuralInvariantsOnNoisyData) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 gen(seed);
    const auto x = testutil::random_matrix(gen, 80, 4);
    std::vector<int> y(80);
    for (auto& v : y) v = static_cast<int>(gen() % 3);
    const std::size_t budget = seed % 7;
    const auto tree = tree_fit(x, y, 3, budget);
    EXPECT_LE(tree.split_count(), budget);
    EXPECT_EQ(tree, tree_fit(x, y, 3, budget));

    const auto& imp = feature_importances(tree);
    const double sum = std::accumulate(imp.begin(), imp.end(), 0.0);
    for (double v : imp) EXPECT_GE(v, 0.0);
    if (tree.split_count() > 0) EXPECT_NEAR(sum, 1.0, 1e-12);

    for (const auto& node : tree.nodes) {
      const auto n = std::accumulate(node.class_counts.begin(), node.class_counts.end(), std::size_t{0});
      EXPECT_GT(n, 0u) << "empty node";
      if (!node.is_leaf()) EXPECT_TRUE(std::isfinite(node.threshold));
    }
    // Each training row lands in a leaf whose distribution contains its class.
    for (std::size_t r = 0; r < 80; ++r) {
      const auto& leaf = tree.nodes[static_cast<std::size_t>(tree.leaf_index(x.row(r)))];
      EXPECT_GT(leaf.class_counts[static_cast<std::size_t>(y[r])], 0u);
    }
  }
}

TEST(Tree, GiniOfPureNodeIsZero) {
  EXPECT_EQ(detail::gini({0, 5, 0}, 5), 0.0);
  EXPECT_DOUBLE_EQ(detail::gini({2, 2}, 4), 0.5);
}

TEST(Tree, PredictionIsSafeAcrossThreads) {
  const auto data = xor_data(300, 12);
  const auto tree = tree_fit(data.x, data.y, 2, 5);
  const auto expect = tree_predict(tree, data.x);
  std::vector<std::vector<int>> got(4);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < 4; ++t) threads.emplace_back([&, t] { got[t] = tree_predict(tree, data.x); });
  for (auto& th : threads) th.join();
  for (const auto& g : got) EXPECT_EQ(g, expect);
}

TEST(Tree, TextAndDotExports) {
  const auto x = DataMatrix::from_rows({{0.0}, {1.0}, {2.0}, {3.0}});
  const std::vector<int> y{0, 0, 1, 1};
  const auto tree = tree_fit(x, y, 2, 1);
  EXPECT_EQ(export_text(tree, {"age"}), "age <= 1.5\n  class 0 [2 0]\nage > 1.5\n  class 1 [0 2]\n");
  const auto dot = export_dot(tree);
  EXPECT_NE(dot.find("digraph tree"), std::string::npos);
  EXPECT_NE(dot.find("n0 [label=\"x[0] <= 1.5\"]"), std::string::npos);
  EXPECT_NE(dot.find("n0 -> n1"), std::string::npos);
  EXPECT_NE(dot.find("n0 -> n2"), std::string::npos);
}

TEST(Tree, RejectsBadLabels) {
  const auto x = DataMatrix::from_rows({{0.0}, {1.0}});
  EXPECT_THROW(tree_fit(x, {0, 2}, 2, 1), ParameterError);
  EXPECT_THROW(tree_fit(x, {0}, 2, 1), ShapeError);
}

TEST(Importance, RidgeUsesAbsoluteWeightSums) {
  RidgeClassifier m;
  m.weights = DataMatrix::from_rows({{1.0, -2.0}, {0.0, 0.5}});
  EXPECT_EQ(ridge_importances(m), (std::vector<double>{3.0, 0.5}));
}
