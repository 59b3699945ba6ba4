#include <gtest/gtest.h>

#include "reconxf/structgen.hpp"
#include "test_util.hpp"

namespace reconxf {
namespace {

using testing::random_matrix;

Graph sbm_graph(int n, std::uint64_t seed) {
  SbmSpec spec;
  spec.n = n;
  spec.seed = seed;
  return generate_sbm(spec);
}

TEST(FullParam, InitReproducesKnnGraph) {
  const Matrix m = random_matrix(15, 4, 3);
  for (Metric metric : {Metric::Cosine, Metric::Euclidean}) {
    const Matrix est = fp_forward(fp_init(m, 3, metric)).values;
    const Matrix knn = knn_graph(m, 3, metric).to_dense();
    EXPECT_LE((est - knn).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(FullParam, InitDegreeAtLeastK) {
  const Graph g = sbm_graph(10, 4);
  const Matrix est = fp_forward(fp_init(g.X, 2, Metric::Cosine)).values;
  for (int i = 0; i < 10; ++i) {
    int degree = 0;
    for (int j = 0; j < 10; ++j) degree += j != i && est(i, j) > 0.5;
    EXPECT_GE(degree, 2);
  }
}

TEST(FullParam, InitDeterministic) {
  const Matrix m = random_matrix(12, 3, 5);
  EXPECT_EQ(fp_init(m, 2, Metric::Cosine).raw(), fp_init(m, 2, Metric::Cosine).raw());
}

TEST(FullParam, SymmetricPositiveRawIsFixedPoint) {
  const Matrix r = testing::random_symmetric_positive(6, 2);
  EXPECT_LE((FullParamGenerator(r).forward().values - (r.array() + 1.0).matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FullParam, LargeNegativeRawIsNearZero) {
  const Matrix est = FullParamGenerator(Matrix::Constant(5, 5, -40.0)).forward().values;
  EXPECT_LE(est.maxCoeff(), 1e-15);
  EXPECT_LT(fp_phi(kFullParamFloor), 1e-6);
}

TEST(FullParam, OutputAlwaysValid) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EstimatedAdjacency est = FullParamGenerator(random_matrix(9, 9, seed, -5.0, 5.0)).forward();
    EXPECT_NO_THROW(est.validate(0.0));
  }
}

TEST(FullParam, PhiIsContinuousAtZero) {
  EXPECT_DOUBLE_EQ(fp_phi(0.0), 1.0);
  EXPECT_NEAR(fp_phi(1e-12), 1.0, 1e-11);
  EXPECT_DOUBLE_EQ(fp_phi_grad(-1.0), std::exp(-1.0));
  EXPECT_DOUBLE_EQ(fp_phi_grad(2.0), 1.0);
}

TEST(MlpDiag, UnitWeightsAndIdentityActivationGiveRawCosine) {
  const Matrix m = random_matrix(6, 4, 7);
  const MlpDiagGenerator gen(4, 2, 5, Activation::Identity);
  EXPECT_EQ(gen.embed(m), m);
  Matrix expected = cosine_similarity(m).cwiseMax(0.0);
  expected.diagonal().setZero();
  EXPECT_LE((gen.forward(m).values - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MlpDiag, DuplicateRowsAlwaysKept) {
  Matrix m = random_matrix(8, 5, 9, 0.0, 1.0);
  m.row(6) = m.row(2);
  const Matrix est = mlpdiag_forward(MlpDiagGenerator(5, 2, 1), m).values;
  EXPECT_NEAR(est(2, 6), 1.0, 1e-12);
  EXPECT_NEAR(est(6, 2), 1.0, 1e-12);
}

TEST(MlpDiag, TopOneMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix m = random_matrix(4, 3, seed);
    const MlpDiagGenerator gen(3, 2, 1, Activation::Identity);
    const Matrix sim = cosine_similarity(m);
    Matrix kept = Matrix::Zero(4, 4);
    for (int i = 0; i < 4; ++i) {
      int best = -1;
      for (int j = 0; j < 4; ++j) {
        if (j != i && (best < 0 || sim(i, j) > sim(i, best))) best = j;
      }
      kept(i, best) = sim(i, best);
    }
    const Matrix expected = (0.5 * (kept + kept.transpose())).cwiseMax(0.0);
    EXPECT_LE((gen.forward(m).values - expected).cwiseAbs().maxCoeff(), 1e-12) << "seed " << seed;
  }
}

TEST(MlpDiag, ZeroEmbeddingRowHasZeroSimilarity) {
  Matrix m = random_matrix(5, 3, 2);
  m.row(1).setZero();
  const Matrix est = MlpDiagGenerator(3, 2, 4, Activation::Identity).forward(m).values;
  EXPECT_EQ(est.row(1).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(est.col(1).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MlpDiag, ParameterCountIsLayersTimesDim) {
  EXPECT_EQ(MlpDiagGenerator(64, 2, 10).parameter_count(), 128u);
  EXPECT_EQ(MlpDiagGenerator(7, 3, 2).parameter_count(), 21u);
  EXPECT_EQ(FullParamGenerator(Matrix::Zero(50, 50)).parameter_count(), 2500u);
  GeneratorOptions opts;
  opts.kind = GeneratorKind::MlpDiag;
  EXPECT_EQ(AdjacencyGenerator(random_matrix(30, 6, 1), opts, AdamOptions{}).parameter_count(), 12u);
}

TEST(MlpDiag, OutputAlwaysValid) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MlpDiagGenerator gen(4, 2, 3);
    gen.weights()[0] = random_matrix(4, 1, seed + 50);
    EXPECT_NO_THROW(gen.forward(random_matrix(12, 4, seed)).validate(0.0));
  }
}

TEST(TopkRowsMask, TiesGoToLowerIndexAndDiagonalExcluded) {
  const Matrix mask = topk_rows_mask(Matrix::Ones(4, 4), 2);
  Matrix expected(4, 4);
  expected << 0, 1, 1, 0,  //
      1, 0, 1, 0,          //
      1, 1, 0, 0,          //
      1, 1, 0, 0;
  EXPECT_EQ(mask, expected);
}

TEST(DaeCorruptionTest, BinaryMaskCounts) {
  const Graph g = sbm_graph(50, 3);
  DaeSpec spec;
  Rng rng = make_rng(1);
  const DaeCorruption c = sample_corruption(g.X, spec, rng);
  const auto ones = static_cast<std::size_t>(g.X.sum());
  const std::size_t masked_ones = static_cast<std::size_t>(c.mask.cwiseProduct(g.X).sum());
  EXPECT_EQ(masked_ones, std::max<std::size_t>(1, fraction_count(0.1, ones)));
  EXPECT_EQ(c.masked, masked_ones + static_cast<std::size_t>(std::llround(5.0 * masked_ones)));
  // Masked positions are zeroed in the corrupted input, the rest untouched.
  EXPECT_EQ(c.input.cwiseProduct(c.mask).cwiseAbs().maxCoeff(), 0.0);
  const Matrix unmasked = (1.0 - c.mask.array()).matrix();
  EXPECT_EQ(c.input.cwiseProduct(unmasked), g.X.cwiseProduct(unmasked));
}

TEST(DaeCorruptionTest, AllZeroBinaryInputRejected) {
  Rng rng = make_rng(1);
  EXPECT_THROW(sample_corruption(Matrix::Zero(5, 3), DaeSpec{}, rng), Error);
}

TEST(DaeLossTest, EmptyMaskGivesZeroLoss) {
  Matrix grad;
  EXPECT_EQ(masked_bce(random_matrix(3, 3, 1), Matrix::Ones(3, 3), Matrix::Zero(3, 3), &grad), 0.0);
  EXPECT_EQ(grad.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(masked_mse(random_matrix(3, 3, 1), Matrix::Ones(3, 3), Matrix::Zero(3, 3), &grad), 0.0);
}

TEST(DaeLossTest, SaturatedPerfectDenoiserApproachesZero) {
  const Matrix target = (random_matrix(6, 5, 2).array() > 0.0).cast<double>();
  const Matrix mask = Matrix::Ones(6, 5);
  double previous = 1e9;
  for (double scale : {1.0, 5.0, 20.0, 40.0}) {
    const Matrix logits = scale * (2.0 * target.array() - 1.0).matrix();
    const double loss = masked_bce(logits, target, mask, nullptr);
    EXPECT_LT(loss, previous);
    previous = loss;
  }
  EXPECT_LT(previous, 1e-15);
}

TEST(DaeLossTest, StableForExtremeLogits) {
  Matrix logits(1, 2);
  logits << 800.0, -800.0;
  Matrix target(1, 2);
  target << 0.0, 1.0;
  const double loss = masked_bce(logits, target, Matrix::Ones(1, 2), nullptr);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, 800.0, 1e-9);
}

// A fixed corruption isolates the optimization trend from resampling noise.
TEST(DaeTraining, LossDecreasesOverFirstHundredEpochs) {
  const Graph g = sbm_graph(200, 5);
  GeneratorOptions opts;
  AdjacencyGenerator gen(g.X, opts, AdamOptions{0.01});
  GcnParams denoiser = init_gcn(g.d, 32, g.d, 6);
  Adam a1({0.01});
  Adam a2({0.01});
  Rng rng = make_rng(7);
  const DaeCorruption corruption = sample_corruption(g.X, DaeSpec{}, rng);
  std::vector<double> losses;
  for (int epoch = 0; epoch < 100; ++epoch) {
    const DaeLoss l = dae_loss(gen.forward(), g.X, corruption, Corruption::MaskBinary, denoiser);
    losses.push_back(l.loss);
    gen.backward(l.grad_adj);
    gen.step();
    a1.step(denoiser.W1, l.grad_denoiser.W1);
    a2.step(denoiser.W2, l.grad_denoiser.W2);
  }
  int increases = 0;
  for (std::size_t e = 1; e < losses.size(); ++e) increases += losses[e] >= losses[e - 1];
  EXPECT_LE(increases, 5);
  EXPECT_LT(losses.back(), losses.front());
}

TEST(AdjacencyIo, DenseAndEdgeListRoundTrip) {
  const EstimatedAdjacency adj = FullParamGenerator(random_matrix(6, 6, 3, -3.0, 2.0)).forward();
  const auto dir = std::filesystem::temp_directory_path() / "reconxf_adj_io";
  std::filesystem::create_directories(dir);
  save_adjacency_dense(adj, dir / "dense.csv");
  EXPECT_LE((load_adjacency(dir / "dense.csv", 6).values - adj.values).cwiseAbs().maxCoeff(), 1e-15);
  save_adjacency_edges(adj, 1.0, dir / "edges.csv");
  Matrix off = adj.values;
  off.diagonal().setZero();
  EXPECT_LE((load_adjacency(dir / "edges.csv", 6).values - off).cwiseAbs().maxCoeff(), 1e-15);
  std::filesystem::remove_all(dir);
}

TEST(GeneratorKindText, RoundTrip) {
  for (GeneratorKind k : {GeneratorKind::FullParam, GeneratorKind::MlpDiag}) EXPECT_EQ(parse_generator(to_string(k)), k);
  EXPECT_THROW(parse_generator("dense"), Error);
}

}  // namespace
}  // namespace reconxf
