#include "odcal/core.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <random>

using namespace odcal;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v(k++) = x;
  return v;
}

Matrix uniform(Eigen::Index n) { return Matrix::Constant(n, n, 1.0 / static_cast<double>(n * n)); }

}  // namespace

TEST(MakeMarginals, Symmetric) {
  const Marginals m = make_marginals(vec({1, 1}), vec({1, 1}));
  EXPECT_EQ(m.l(), vec({0.5, 0.5}));
  EXPECT_EQ(m.w(), vec({0.5, 0.5}));
  EXPECT_EQ(m.total(), 2.0);
}

TEST(MakeMarginals, DirectDivision) {
  const Marginals m = make_marginals(vec({3, 1}), vec({2, 2}));
  EXPECT_EQ(m.l(), vec({0.75, 0.25}));
  EXPECT_EQ(m.w(), vec({0.5, 0.5}));
  EXPECT_EQ(m.total(), 4.0);
}

TEST(MakeMarginals, Errors) {
  EXPECT_THROW(make_marginals(vec({1, 2}), vec({1, 1})), ValidationError);
  EXPECT_THROW(make_marginals(vec({1, 1}), vec({1, 1, 0})), ValidationError);
  EXPECT_THROW(make_marginals(vec({0, 0}), vec({0, 0})), ValidationError);
  EXPECT_THROW(make_marginals(vec({-1, 3}), vec({1, 1})), ValidationError);
  EXPECT_THROW(make_marginals(vec({2}), vec({2})), ValidationError);
}

TEST(Marginals, RejectsBadInput) {
  EXPECT_THROW(Marginals(vec({0.5, 0.5}), vec({0.4, 0.4})), ValidationError);
  EXPECT_THROW(Marginals(vec({0.5, 0.5}), vec({1.0})), ValidationError);
  EXPECT_THROW(Marginals(vec({1.5, -0.5}), vec({0.5, 0.5})), ValidationError);
  EXPECT_THROW(Marginals(vec({0.5, 0.5}), vec({0.5, 0.5}), 0.0), ValidationError);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(Marginals(vec({nan, 0.5}), vec({0.5, 0.5})), ValidationError);
}

TEST(NormalizedShares, SumsToOneExactly) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector v(13);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = u(rng);
    EXPECT_LE(std::abs(normalized_shares(v).sum() - 1.0), 1e-15);
  }
}

TEST(CostMatrix, Validation) {
  EXPECT_THROW(CostMatrix(Matrix(2, 3)), ValidationError);
  EXPECT_THROW(CostMatrix(Matrix(0, 0)), ValidationError);
  Matrix t = Matrix::Zero(2, 2);
  t(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(CostMatrix{t}, ValidationError);
}

TEST(CorrespondenceMatrix, Validation) {
  Matrix d = uniform(2);
  d(0, 0) = -0.25;
  d(0, 1) = 0.75;
  EXPECT_THROW(CorrespondenceMatrix::normalized(d), ValidationError);
  EXPECT_THROW(CorrespondenceMatrix::normalized(Matrix::Constant(2, 2, 0.3)), ValidationError);
  EXPECT_THROW(CorrespondenceMatrix(Matrix::Constant(2, 2, 1.0), Scale::counts, 5.0), ValidationError);
  EXPECT_NO_THROW(CorrespondenceMatrix(Matrix::Constant(2, 2, 1.0), Scale::counts, 4.0));
}

TEST(ToCounts, PopulationScale) {
  const auto d = to_counts(CorrespondenceMatrix::normalized(uniform(2)), 1965.0);
  EXPECT_EQ(d.scale(), Scale::counts);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) EXPECT_EQ(d(i, j), 491.25);
}

TEST(ToCounts, IdentityAtOne) {
  Matrix raw(2, 2);
  raw << 0.1, 0.2, 0.3, 0.4;
  const auto src = CorrespondenceMatrix::normalized(raw);
  const auto d = to_counts(src, 1.0);
  EXPECT_EQ(d.values(), src.values());
  EXPECT_EQ(d.scale(), Scale::counts);
}

TEST(ToCounts, Linearity) {
  Matrix raw(3, 3);
  raw << 0.1, 0.05, 0.05, 0.2, 0.1, 0.1, 0.15, 0.05, 0.2;
  EXPECT_NEAR(to_counts(CorrespondenceMatrix::normalized(raw), 100.0).values().sum(), 100.0, 1e-12);
}

TEST(ToCounts, Errors) {
  const auto d = CorrespondenceMatrix::normalized(uniform(2));
  EXPECT_THROW(to_counts(d, 0.0), ValidationError);
  EXPECT_THROW(to_counts(d, -3.0), ValidationError);
  EXPECT_THROW(to_counts(to_counts(d, 10.0), 10.0), ValidationError);
}

TEST(ToCounts, RoundTripRelative) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix counts(5, 5);
    for (Eigen::Index k = 0; k < counts.size(); ++k) counts.data()[k] = std::floor(u(rng));
    counts(0, 0) += 1.0;
    const auto c = CorrespondenceMatrix::counts(counts);
    const auto back = to_counts(to_normalized(c), c.total());
    for (Eigen::Index k = 0; k < counts.size(); ++k) {
      const double x = counts.data()[k];
      EXPECT_LE(std::abs(back.values().data()[k] - x), 1e-9 * std::max(1.0, std::abs(x)));
    }
  }
}

TEST(DualPotentials, ZerosAndEquality) {
  const auto z = DualPotentials::zeros(3);
  EXPECT_EQ(z.n(), 3u);
  EXPECT_TRUE(z.finite());
  auto other = z;
  EXPECT_EQ(z, other);
  other.lambda_w(1) = 1.0;
  EXPECT_FALSE(z == other);
}

TEST(SolverConfig, Validation) {
  EXPECT_NO_THROW(SolverConfig{}.validate());
  SolverConfig bad;
  bad.eps_f = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = {};
  bad.max_iters = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = {};
  bad.initial_L = -1.0;
  EXPECT_THROW(bad.validate(), ValidationError);
}
