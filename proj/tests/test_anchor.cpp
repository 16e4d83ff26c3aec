#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "dcsim/anchor.hpp"
#include "dcsim/metrics.hpp"
#include "dcsim/protocol.hpp"
#include "test_util.hpp"

using namespace dcsim;

namespace {

double variance_law(double alpha) { return 2.0 / 3.0 * alpha * alpha - alpha + 1.0; }

std::vector<std::vector<double>> sorted_rows(const DataMatrix& m) {
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).begin(), m.row(r).end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

// Residual of `v` after least-squares projection onto the row space of `basis`.
double residual_to_row_space(const DataMatrix& basis, std::span<const double> v) {
  const Eigen::MatrixXd b = testutil::to_eigen(basis).transpose();
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i)) = v[i];
  const Eigen::VectorXd coef = b.completeOrthogonalDecomposition().solve(x);
  return (b * coef - x).norm();
}

}  // namespace

// ---------------------------------------------------------------------------
// random_anchor

TEST(RandomAnchor, DegenerateRangeRepeatsTheBound) {
  FeatureBounds b{{1.0, -2.0}, {1.0, -2.0}};
  const auto anc = random_anchor(b, 5, 1);
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_DOUBLE_EQ(anc(r, 0), 1.0);
    EXPECT_DOUBLE_EQ(anc(r, 1), -2.0);
  }
}

TEST(RandomAnchor, WithinBoundsAndCenteredOnMidpoint) {
  const auto data = generate_artificial(1000, 1, 1, 2);
  const auto b = feature_bounds(data.train.X);
  const std::size_t r = 1000;
  const auto anc = random_anchor(b, r, 3);
  const auto means = column_means(anc);
  for (std::size_t j = 0; j < 20; ++j) {
    for (std::size_t i = 0; i < r; ++i) {
      ASSERT_GE(anc(i, j), b.min[j]);
      ASSERT_LE(anc(i, j), b.max[j]);
    }
    const double se = (b.max[j] - b.min[j]) / std::sqrt(12.0) / std::sqrt(static_cast<double>(r));
    EXPECT_LT(std::abs(means[j] - 0.5 * (b.min[j] + b.max[j])), 3.0 * se) << "feature " << j;
  }
}

TEST(RandomAnchor, SameSeedSameMatrix) {
  FeatureBounds b{{0.0, 0.0}, {1.0, 5.0}};
  EXPECT_EQ(random_anchor(b, 10, 4), random_anchor(b, 10, 4));
  EXPECT_NE(random_anchor(b, 10, 4), random_anchor(b, 10, 5));
}

TEST(RandomAnchor, InvertedBoundsAreParameterError) {
  FeatureBounds b{{1.0}, {0.0}};
  EXPECT_THROW(random_anchor(b, 3, 1), ParameterError);
}

TEST(RandomAnchor, MergedPartyBoundsEqualGlobalBounds) {
  const auto data = generate_artificial(200, 1, 1, 5);
  const auto plan = make_partition(200, 20, 3, 2, RowScheme::RandomEqual, ColScheme::RoundRobin, 5);
  const auto merged = merge_party_bounds(split_blocks(data.train.X, plan), plan, 20);
  const auto global = feature_bounds(data.train.X);
  EXPECT_EQ(merged.min, global.min);
  EXPECT_EQ(merged.max, global.max);
}

// ---------------------------------------------------------------------------
// tsvd_anchor

TEST(TsvdAnchor, LosslessLimitReproducesRawRows) {
  const auto data = generate_artificial(60, 1, 1, 6);
  const auto plan = make_partition(60, 20, 2, 2, RowScheme::RandomEqual, ColScheme::RoundRobin, 6);
  const auto anc = tsvd_anchor(split_blocks(data.train.X, plan), plan, 10, 0.0, 60, 7);
  EXPECT_NEAR(amd(anc, data.train.X), 0.0, 1e-9);
  const auto a = sorted_rows(anc), b = sorted_rows(data.train.X);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < 20; ++c) ASSERT_NEAR(a[r][c], b[r][c], 1e-9);
}

TEST(TsvdAnchor, RankThreeErrorBetweenZeroAndRankOneError) {
  const auto data = generate_artificial(1000, 1, 1, 8);
  const auto plan = make_partition(1000, 20, 2, 2, RowScheme::RandomEqual, ColScheme::RoundRobin, 8);
  const auto blocks = split_blocks(data.train.X, plan);
  for (const auto& row : blocks) {
    for (const auto& block : row) {
      const double err3 = frobenius_norm(subtract(block, tsvd_block_approximation(block, 3, 0.05, 9)));
      const double err1 = frobenius_norm(subtract(block, truncated_svd(block, 1).reconstruct()));
      EXPECT_GT(err3, 0.0);
      EXPECT_LT(err3, err1);
    }
  }
}

TEST(TsvdAnchor, AugmentedRowsStayInTheApproximatedRowSpace) {
  // n = 4 rows of width 6, so the row space is a proper subspace.
  std::mt19937_64 gen(10);
  const auto x = testutil::random_matrix(gen, 4, 6);
  const auto plan = make_partition(4, 6, 2, 2, RowScheme::Contiguous, ColScheme::RoundRobin, 1);
  const auto anc = tsvd_anchor(split_blocks(x, plan), plan, 1, 0.05, 8, 11);
  ASSERT_EQ(anc.rows(), 8u);
  const auto base = anc.select_rows(std::vector<std::size_t>{0, 1, 2, 3});
  for (std::size_t r = 4; r < 8; ++r) EXPECT_LE(residual_to_row_space(base, anc.row(r)), 1e-8);
}

TEST(TsvdAnchor, RankTooLargeIsParameterError) {
  const auto data = generate_artificial(20, 1, 1, 12);
  const auto plan = make_partition(20, 20, 2, 2, RowScheme::RandomEqual, ColScheme::RoundRobin, 12);
  EXPECT_THROW(tsvd_anchor(split_blocks(data.train.X, plan), plan, 11, 0.0, 10, 1), ParameterError);
}

// ---------------------------------------------------------------------------
// smote_anchor

TEST(SmoteAnchor, TinyAlphaCopiesSourceRows) {
  const auto data = generate_artificial(1, 1, 100, 13);
  const auto anc = smote_anchor(data.public_data, 1000, 25, 1e-12, 14);
  const auto counts = replicate_counts(100, 1000);
  std::size_t row = 0;
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t k = 0; k < counts[i]; ++k, ++row)
      for (std::size_t c = 0; c < 20; ++c) ASSERT_NEAR(anc(row, c), data.public_data(i, c), 1e-9);
}

TEST(SmoteAnchor, TwoPointsInterpolateOnTheSegment) {
  const auto pub = DataMatrix::from_rows({{0.0, 1.0}, {4.0, -1.0}});
  const auto anc = smote_anchor(pub, 50, 1, 1.0, 15);
  for (std::size_t r = 0; r < anc.rows(); ++r) {
    const double t = anc(r, 0) / 4.0;  // affine coefficient along the segment
    EXPECT_GE(t, -1e-12);
    EXPECT_LE(t, 1.0 + 1e-12);
    EXPECT_NEAR(anc(r, 1), 1.0 - 2.0 * t, 1e-9);
  }
}

TEST(SmoteAnchor, VarianceLawAtPaperAlpha) {
  std::mt19937_64 gen(16);
  const auto pub = testutil::gaussian_matrix(gen, 100, 3);
  const auto anc = smote_anchor(pub, 100000, 99, 1.5, 17);
  const auto vp = column_variances(pub), va = column_variances(anc);
  for (std::size_t f = 0; f < 3; ++f) EXPECT_NEAR(va[f] / vp[f], 1.0, 0.05) << "feature " << f;
}

TEST(SmoteAnchor, VarianceLawAtAlphaThree) {
  std::mt19937_64 gen(18);
  const auto pub = testutil::gaussian_matrix(gen, 100, 3);
  const auto anc = smote_anchor(pub, 100000, 99, 3.0, 19);
  const auto vp = column_variances(pub), va = column_variances(anc);
  for (std::size_t f = 0; f < 3; ++f) EXPECT_NEAR(va[f] / vp[f], 4.0, 0.2) << "feature " << f;
}

TEST(SmoteAnchor, VarianceLawAcrossAlphaGrid) {
  std::mt19937_64 gen(20);
  const auto pub = testutil::gaussian_matrix(gen, 100, 2);
  const auto vp = column_variances(pub);
  for (double alpha : {0.5, 1.0, 1.5, 3.0}) {
    const auto va = column_variances(smote_anchor(pub, 100000, 99, alpha, 21));
    for (std::size_t f = 0; f < 2; ++f) {
      EXPECT_NEAR(va[f] / vp[f] / variance_law(alpha), 1.0, 0.05) << "alpha " << alpha << " feature " << f;
    }
  }
}

TEST(SmoteAnchor, ExtrapolationFrequencyMatchesAlpha) {
  std::mt19937_64 gen(22);
  const auto pub = testutil::random_matrix(gen, 30, 3);
  const std::size_t r = 3000;
  for (double alpha : {0.8, 2.0}) {
    const auto anc = smote_anchor(pub, r, 5, alpha, 23);
    const auto counts = replicate_counts(30, r);
    const auto z = apply_norm(fit_norm(pub), pub);
    std::size_t row = 0, beyond = 0;
    for (std::size_t i = 0; i < 30; ++i) {
      const auto nbrs = knn_indices(z, i, 5);
      for (std::size_t k = 0; k < counts[i]; ++k, ++row) {
        // Recover (neighbour, c) from collinearity with some neighbour.
        bool found = false;
        for (auto j : nbrs) {
          double dd = 0.0, dp = 0.0;
          for (std::size_t f = 0; f < 3; ++f) {
            const double d = pub(j, f) - pub(i, f);
            dd += d * d;
            dp += d * (anc(row, f) - pub(i, f));
          }
          const double c = dp / dd;
          double res = 0.0;
          for (std::size_t f = 0; f < 3; ++f) {
            const double e = anc(row, f) - pub(i, f) - c * (pub(j, f) - pub(i, f));
            res += e * e;
          }
          if (res < 1e-16) {
            found = true;
            EXPECT_GE(c, -1e-9);
            EXPECT_LE(c, alpha + 1e-9);
            beyond += c > 1.0;
            break;
          }
        }
        ASSERT_TRUE(found) << "row " << row << " is not on a source-neighbour line";
      }
    }
    const double expect = alpha > 1.0 ? (alpha - 1.0) / alpha : 0.0;
    const double sd = std::sqrt(expect * (1.0 - expect) / r);
    EXPECT_NEAR(static_cast<double>(beyond) / r, expect, 3.0 * sd + 1e-12) << "alpha " << alpha;
  }
}

TEST(SmoteAnchor, ReplicateCountsPutExtrasFirst) {
  EXPECT_EQ(replicate_counts(4, 10), (std::vector<std::size_t>{3, 3, 2, 2}));
  EXPECT_EQ(replicate_counts(3, 2), (std::vector<std::size_t>{1, 1, 0}));
}

TEST(SmoteAnchor, KIsClampedWithWarning) {
  std::mt19937_64 gen(24);
  const auto pub = testutil::random_matrix(gen, 10, 2);
  std::vector<std::string> warnings;
  const auto a = smote_anchor(pub, 20, 50, 1.0, 25, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("clamped"), std::string::npos);
  EXPECT_EQ(a, smote_anchor(pub, 20, 9, 1.0, 25));
}

TEST(SmoteAnchor, ParameterErrors) {
  EXPECT_THROW(smote_anchor(DataMatrix::from_rows({{1.0}}), 5, 1, 1.0, 1), ParameterError);
  const auto pub = DataMatrix::from_rows({{0.0}, {1.0}});
  EXPECT_THROW(smote_anchor(pub, 0, 1, 1.0, 1), ParameterError);
  EXPECT_THROW(smote_anchor(pub, 5, 1, 0.0, 1), ParameterError);
}

// ---------------------------------------------------------------------------
// raw_anchor and the shared-randomness contract

TEST(RawAnchor, FullDrawIsARowPermutation) {
  const auto data = generate_artificial(50, 1, 1, 26);
  const auto anc = raw_anchor(data.train.X, 50, 27);
  EXPECT_EQ(sorted_rows(anc), sorted_rows(data.train.X));
  EXPECT_DOUBLE_EQ(amd(anc, data.train.X), 0.0);
  EXPECT_DOUBLE_EQ(amd(data.train.X, anc), 0.0);
  EXPECT_DOUBLE_EQ(amd(raw_anchor(data.train.X, 20, 27), data.train.X), 0.0);
  EXPECT_THROW(raw_anchor(data.train.X, 51, 1), ParameterError);
}

TEST(AnchorSpec, IdenticalSpecsGiveBitIdenticalAnchors) {
  const auto data = generate_artificial(200, 1, 100, 28);
  const auto plan = make_partition(200, 20, 2, 2, RowScheme::RandomEqual, ColScheme::RoundRobin, 28);
  const auto blocks = split_blocks(data.train.X, plan);
  AnchorSources src{&blocks, &plan, &data.public_data, &data.train.X};
  for (auto method : {AnchorMethod::Random, AnchorMethod::Tsvd, AnchorMethod::Smote, AnchorMethod::Raw}) {
    AnchorSpec spec;
    spec.method = method;
    spec.r = 150;
    spec.seed = 29;
    EXPECT_EQ(build_anchor(spec, src), build_anchor(spec, src)) << to_string(method);
    EXPECT_EQ(anchor_method_from_string(to_string(method)), method);
  }
  EXPECT_THROW(anchor_method_from_string("gan"), ParameterError);
}
