#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <type_traits>

#include "dcsim/metrics.hpp"
#include "dcsim/protocol.hpp"
#include "test_util.hpp"

using namespace dcsim;

namespace {

struct Setup {
  ArtificialData data;
  PartitionPlan plan;
  std::vector<std::vector<DataMatrix>> blocks;
};

Setup artificial_setup(std::uint64_t seed, std::size_t c = 2, std::size_t d = 2) {
  Setup s{generate_artificial(1000, 1000, 100, derive_seed(seed, "data")), {}, {}};
  s.plan = make_partition(1000, 20, c, d, RowScheme::RandomEqual, ColScheme::RoundRobin, derive_seed(seed, "partition"));
  s.blocks = split_blocks(s.data.train.X, s.plan);
  return s;
}

std::vector<int> labels_of(const Setup& s, std::size_t i) {
  std::vector<int> y;
  for (auto r : s.plan.row_groups[i]) y.push_back(s.data.train.y[r]);
  return y;
}

WorkerUpload manual_upload(std::size_t i, const DataMatrix& inter, const DataMatrix& anc, std::vector<int> labels) {
  WorkerUpload up;
  up.id = {i, 0};
  up.input_dim = inter.cols() + 1;
  up.intermediate = inter;
  up.anchor_intermediate = anc;
  up.labels = std::move(labels);
  up.class_count = 2;
  return up;
}

DataMatrix orthogonal(std::mt19937_64& gen, std::size_t n) {
  const Eigen::MatrixXd g = testutil::to_eigen(testutil::gaussian_matrix(gen, n, n));
  return testutil::from_eigen(Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ());
}

AnchorSpec spec_for(AnchorMethod m, std::uint64_t seed) {
  AnchorSpec spec;
  spec.method = m;
  spec.r = 1000;
  spec.seed = seed;
  return spec;
}

}  // namespace

// ---------------------------------------------------------------------------
// Worker side

TEST(WorkerPrepare, UploadShapesOnArtificialSetup) {
  const auto s = artificial_setup(1);
  const auto anchor = build_anchor(spec_for(AnchorMethod::Smote, 2), {&s.blocks, &s.plan, &s.data.public_data, nullptr});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      WorkerState w{{i, j}, s.blocks[i][j], labels_of(s, i), 2, 5};
      const auto up = worker_prepare(w, anchor.select_cols(s.plan.col_groups[j]));
      EXPECT_EQ(up.intermediate.rows(), 500u);
      EXPECT_EQ(up.intermediate.cols(), 5u);
      EXPECT_EQ(up.anchor_intermediate.rows(), 1000u);
      EXPECT_EQ(up.anchor_intermediate.cols(), 5u);
      EXPECT_EQ(up.input_dim, 10u);
      EXPECT_EQ(up.labels.has_value(), j == 0);
    }
}

TEST(WorkerPrepare, AnchorEqualToLocalRowsCoincides) {
  const auto s = artificial_setup(3);
  WorkerState w{{0, 0}, s.blocks[0][0], labels_of(s, 0), 2, 4};
  const auto up = worker_prepare(w, s.blocks[0][0]);
  EXPECT_EQ(up.intermediate, up.anchor_intermediate);
}

TEST(WorkerPrepare, DeterministicAndRejectsFullWidth) {
  const auto s = artificial_setup(4);
  WorkerState w{{1, 1}, s.blocks[1][1], labels_of(s, 1), 2, 5};
  const auto anchor = s.blocks[0][1];
  EXPECT_EQ(worker_prepare(w, anchor), worker_prepare(w, anchor));
  w.reduced_dim = 10;
  EXPECT_THROW(worker_prepare(w, anchor), ParameterError);
  w.reduced_dim = 5;
  EXPECT_THROW(worker_prepare(w, s.blocks[0][1].select_cols(std::vector<std::size_t>{0, 1})), ShapeError);
}

TEST(WorkerDistill, SingleInformativeFeatureIsTheTopSplit) {
  std::mt19937_64 gen(5);
  const auto x = testutil::random_matrix(gen, 300, 6);
  std::vector<int> y(300);
  for (std::size_t i = 0; i < 300; ++i) y[i] = x(i, 2) > 0.1;
  const auto tree = worker_distill(x, y, 2, 5);
  EXPECT_EQ(tree.nodes[0].feature, 2);
  EXPECT_EQ(top_t_features(feature_importances(tree), 1).front(), 2u);
}

TEST(WorkerDistill, ConstantPseudoLabelsGiveConstantModelAndWarning) {
  std::mt19937_64 gen(6);
  const auto x = testutil::random_matrix(gen, 50, 4);
  std::vector<std::string> warnings;
  const auto tree = worker_distill(x, std::vector<int>(50, 1), 2, 5, &warnings);
  EXPECT_EQ(tree.split_count(), 0u);
  for (double v : feature_importances(tree)) EXPECT_EQ(v, 0.0);
  for (int p : tree_predict(tree, x)) EXPECT_EQ(p, 1);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("single-class"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Master side

TEST(MasterFitMaps, SinglePartyReproducesTarget) {
  std::mt19937_64 gen(7);
  const auto inter = testutil::gaussian_matrix(gen, 40, 6), anc = testutil::gaussian_matrix(gen, 30, 6);
  const auto state = master_fit_maps({manual_upload(0, inter, anc, std::vector<int>(40, 0))}, 4);
  EXPECT_EQ(state.target.rows(), 30u);
  EXPECT_EQ(state.target.cols(), 4u);
  EXPECT_LE(testutil::max_abs_diff(state.anchor_collaboration(0), state.target), 1e-8);
}

TEST(MasterFitMaps, OrthogonallyRelatedPartiesAgree) {
  std::mt19937_64 gen(8);
  const auto q = orthogonal(gen, 5);
  const auto a1 = testutil::gaussian_matrix(gen, 60, 5), x1 = testutil::gaussian_matrix(gen, 20, 5);
  const auto x2 = testutil::gaussian_matrix(gen, 20, 5);
  const auto state = master_fit_maps(
      {manual_upload(0, x1, a1, std::vector<int>(20, 0)), manual_upload(1, matmul(x2, q), matmul(a1, q), std::vector<int>(20, 1))});
  EXPECT_EQ(state.target_dim, 5u);
  EXPECT_LE(anchor_disagreement(state), 1e-6);
}

TEST(MasterFitMaps, TargetDimensionBeyondNarrowestPartyIsRejected) {
  std::mt19937_64 gen(9);
  const auto a = testutil::gaussian_matrix(gen, 30, 4), x = testutil::gaussian_matrix(gen, 10, 4);
  try {
    master_fit_maps({manual_upload(0, x, a, std::vector<int>(10, 0))}, 5);
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.step(), 7);
  }
}

TEST(MasterFitMaps, UploadOrderDoesNotMatter) {
  const auto s = artificial_setup(10);
  const auto anchor = build_anchor(spec_for(AnchorMethod::Random, 11), {&s.blocks, &s.plan, &s.data.public_data, nullptr});
  std::vector<WorkerUpload> uploads;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      uploads.push_back(worker_prepare({{i, j}, s.blocks[i][j], labels_of(s, i), 2, 5}, anchor.select_cols(s.plan.col_groups[j])));
  auto reversed = uploads;
  std::reverse(reversed.begin(), reversed.end());
  const auto a = master_train(master_fit_maps(uploads), 1.0);
  const auto b = master_train(master_fit_maps(reversed), 1.0);
  EXPECT_EQ(a.target, b.target);
  EXPECT_EQ(a.maps, b.maps);
  EXPECT_EQ(a.training_predictions, b.training_predictions);
  EXPECT_EQ(master_label_anchors(a), master_label_anchors(b));
}

TEST(MasterFitMaps, MissingOrDuplicatePartiesAreRejected) {
  std::mt19937_64 gen(12);
  const auto a = testutil::gaussian_matrix(gen, 30, 4), x = testutil::gaussian_matrix(gen, 10, 4);
  auto up = manual_upload(1, x, a, std::vector<int>(10, 0));
  EXPECT_THROW(master_fit_maps({up}), PipelineError);
  EXPECT_THROW(master_fit_maps({up, up}), PipelineError);
  EXPECT_THROW(master_fit_maps({}), PipelineError);
}

TEST(MasterTrain, SeparableRepresentationIsLearned) {
  std::mt19937_64 gen(13);
  std::normal_distribution<double> z;
  DataMatrix x(200, 3);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    y[i] = static_cast<int>(i % 2);
    for (std::size_t c = 0; c < 3; ++c) x(i, c) = (y[i] ? 3.0 : -3.0) + 0.5 * z(gen);
  }
  auto state = master_train(master_fit_maps({manual_upload(0, x, x, y)}), 1e-6);
  EXPECT_GE(accuracy(y, state.training_predictions), 0.99);
  // One-hot targets: each row of the indicator matrix sums to one.
  const auto targets = one_hot(y, 2);
  for (std::size_t r = 0; r < targets.rows(); ++r) EXPECT_EQ(targets(r, 0) + targets(r, 1), 1.0);
  // The anchors are the training rows, so the pseudo-labels repeat the fit.
  EXPECT_EQ(master_label_anchors(state).anchor_labels[0], state.training_predictions);
  EXPECT_EQ(master_train(state, 1e-6).training_predictions, state.training_predictions);
}

TEST(MasterLabelAnchors, IdenticalUploadsGiveIdenticalLabels) {
  std::mt19937_64 gen(14);
  const auto x = testutil::gaussian_matrix(gen, 30, 4), a = testutil::gaussian_matrix(gen, 50, 4);
  std::vector<int> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = x(i, 0) > 0;
  std::vector<WorkerUpload> ups;
  for (std::size_t i = 0; i < 3; ++i) ups.push_back(manual_upload(i, x, a, y));
  const auto bundle = master_label_anchors(master_train(master_fit_maps(ups), 1.0));
  ASSERT_EQ(bundle.anchor_labels.size(), 3u);
  EXPECT_EQ(bundle.anchor_labels[0], bundle.anchor_labels[1]);
  EXPECT_EQ(bundle.anchor_labels[1], bundle.anchor_labels[2]);
}

TEST(MasterLabelAnchors, RequiresTrainedModel) {
  MasterState state;
  EXPECT_THROW(master_label_anchors(state), PipelineError);
}

// ---------------------------------------------------------------------------
// Messages

TEST(Wire, UploadAndBundleRoundTrip) {
  std::mt19937_64 gen(15);
  auto up = manual_upload(1, testutil::gaussian_matrix(gen, 7, 3), testutil::gaussian_matrix(gen, 9, 3), {0, 1, 1, 0, 1, 0, 0});
  up.id.col_party = 2;
  EXPECT_EQ(deserialize_upload(serialize(up)), up);
  up.labels.reset();
  EXPECT_EQ(deserialize_upload(serialize(up)), up);

  CollabModelBundle bundle{{{0, 1, 2}, {2, 2, 0}}};
  EXPECT_EQ(deserialize_bundle(serialize(bundle)), bundle);

  auto bytes = serialize(bundle);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DCLB");
  bytes.push_back(0);
  EXPECT_THROW(deserialize_bundle(bytes), ParameterError);
  EXPECT_THROW(deserialize_upload(serialize(bundle)), ParameterError);
}

TEST(Wire, ValuesAreLittleEndianDoubles) {
  auto up = manual_upload(0, DataMatrix::from_rows({{1.5}}), DataMatrix::from_rows({{-2.0}}), {0});
  const auto bytes = serialize(up);
  // magic, version, row, col, input_dim, class_count, then the first matrix header.
  const std::size_t offset = 4 + 4 + 8 * 4 + 8 * 2;
  double v;
  std::memcpy(&v, bytes.data() + offset, 8);
  if constexpr (std::endian::native == std::endian::little) EXPECT_EQ(v, 1.5);
  EXPECT_EQ(bytes[offset + 7], 0x3F);
}

TEST(PrivacyBoundary, UploadHoldsOnlyReducedMatrices) {
  // The upload type has exactly these six members, none of them a raw block.
  static_assert(std::is_aggregate_v<WorkerUpload>);
  const auto s = artificial_setup(16);
  const auto anchor = build_anchor(spec_for(AnchorMethod::Smote, 17), {&s.blocks, &s.plan, &s.data.public_data, nullptr});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      const auto up = worker_prepare({{i, j}, s.blocks[i][j], labels_of(s, i), 2, 5}, anchor.select_cols(s.plan.col_groups[j]));
      const auto& [id, input_dim, inter, anc, labels, classes] = up;
      static_assert(std::is_same_v<std::remove_cvref_t<decltype(inter)>, DataMatrix>);
      EXPECT_LT(inter.cols(), input_dim);
      EXPECT_LT(anc.cols(), input_dim);
      // No raw column survives the reduction.
      const auto& raw = s.blocks[i][j];
      for (std::size_t rc = 0; rc < raw.cols(); ++rc)
        for (std::size_t uc = 0; uc < inter.cols(); ++uc) {
          double diff = 0.0;
          for (std::size_t r = 0; r < raw.rows(); ++r) diff = std::max(diff, std::abs(raw(r, rc) - inter(r, uc)));
          EXPECT_GT(diff, 1e-6);
        }
      (void)id;
      (void)labels;
      (void)classes;
    }
}

// ---------------------------------------------------------------------------
// End to end

TEST(Pipeline, SinglePartyNearLosslessMatchesCentralized) {
  const auto s = artificial_setup(18, 1, 1);
  PipelineSpec ps;
  ps.reduced_dim_offset = 1;
  auto spec = spec_for(AnchorMethod::Raw, 19);
  const auto result = run_dc_pipeline(s.data.train, s.plan, spec, &s.data.public_data, ps);
  const double dc = accuracy(s.data.test.y, tree_predict(result.models[0], s.data.test.X));
  const auto central = tree_fit(s.data.train.X, s.data.train.y, 2, 5);
  const double ca = accuracy(s.data.test.y, tree_predict(central, s.data.test.X));
  EXPECT_LE(std::abs(dc - ca), 0.02) << "dc " << dc << " central " << ca;
}

TEST(Pipeline, DeterministicForFixedInputs) {
  const auto s = artificial_setup(20);
  const auto spec = spec_for(AnchorMethod::Tsvd, 21);
  const auto a = run_dc_pipeline(s.data.train, s.plan, spec, &s.data.public_data, {});
  const auto b = run_dc_pipeline(s.data.train, s.plan, spec, &s.data.public_data, {});
  EXPECT_EQ(a.anchor, b.anchor);
  EXPECT_EQ(a.models, b.models);
  EXPECT_EQ(a.bundle, b.bundle);
  EXPECT_EQ(a.diagnostics.anchor_disagreement, b.diagnostics.anchor_disagreement);
}

TEST(Pipeline, ErrorsCarryTheFailingStep) {
  const auto s = artificial_setup(22);
  auto step_of = [&](const AnchorSpec& spec, const DataMatrix* pub, const PipelineSpec& ps) {
    try {
      run_dc_pipeline(s.data.train, s.plan, spec, pub, ps);
    } catch (const PipelineError& e) {
      return e.step();
    }
    return 0;
  };
  PipelineSpec too_wide;
  too_wide.uniform_reduced_dim = 10;
  EXPECT_EQ(step_of(spec_for(AnchorMethod::Random, 1), nullptr, too_wide), 2);
  EXPECT_EQ(step_of(spec_for(AnchorMethod::Smote, 1), nullptr, {}), 1);
  PipelineSpec big_target;
  big_target.target_dim = 11;
  EXPECT_EQ(step_of(spec_for(AnchorMethod::Random, 1), nullptr, big_target), 7);
}

TEST(Pipeline, ArtificialDiagnosticsOverTwentyTrials) {
  // Smoke bounds: pseudo-labels agree on at least 75% of anchors and the
  // distilled DC(SMOTE) trees reach 0.95 mean test accuracy.
  double smote_acc = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto s = artificial_setup(100 + t);
    for (auto m : {AnchorMethod::Random, AnchorMethod::Tsvd, AnchorMethod::Smote, AnchorMethod::Raw}) {
      const auto r = run_dc_pipeline(s.data.train, s.plan, spec_for(m, derive_seed(100 + t, to_string(m))),
                                     &s.data.public_data, {});
      EXPECT_GE(r.diagnostics.pseudo_label_agreement, 0.75) << to_string(m) << " trial " << t;
      EXPECT_TRUE(std::isfinite(r.diagnostics.anchor_disagreement));
      ASSERT_EQ(r.models.size(), 2u);
      if (m == AnchorMethod::Smote) {
        for (const auto& tree : r.models) smote_acc += accuracy(s.data.test.y, tree_predict(tree, s.data.test.X)) / 40.0;
      }
    }
  }
  EXPECT_GE(smote_acc, 0.95);
}
