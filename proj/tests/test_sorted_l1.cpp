#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "oracles.hpp"
#include "slope_amp/sorted_l1.hpp"
#include "test_support.hpp"

using namespace slope_amp;
using testing_support::random_theta;
using testing_support::random_vector;
using testing_support::to_eigen;
using testing_support::to_std;

namespace {

Vector vec(std::initializer_list<double> v) { return to_eigen(std::vector<double>(v)); }
LambdaSeq seq(std::initializer_list<double> v) { return LambdaSeq(vec(v)); }

std::set<std::set<Index>> atom_sets(const MagnitudePartition& part, bool star_only) {
  std::set<std::set<Index>> out;
  const auto atoms = star_only ? part.star_support() : std::span<const Atom>(part.atoms);
  for (const Atom& a : atoms) out.insert(std::set<Index>(a.indices.begin(), a.indices.end()));
  return out;
}

}  // namespace

TEST(LambdaSeqTest, AcceptsNonIncreasingNonNegative) {
  const LambdaSeq l = seq({3, 2, 2, 0});
  EXPECT_EQ(l.size(), 4);
  EXPECT_EQ(l.max(), 3);
  EXPECT_EQ(l.min(), 0);
}

TEST(LambdaSeqTest, RejectsIncreasingNegativeAndNonFinite) {
  EXPECT_THROW(seq({1, 2}), InvalidArgument);
  EXPECT_THROW(seq({1, -0.5}), InvalidArgument);
  EXPECT_THROW(seq({std::numeric_limits<double>::quiet_NaN()}), InvalidArgument);
  EXPECT_THROW(seq({std::numeric_limits<double>::infinity(), 1}), InvalidArgument);
}

TEST(LambdaSeqTest, PenaltyRejectsAllZero) {
  EXPECT_NO_THROW(seq({0, 0}));
  EXPECT_THROW(LambdaSeq::penalty(vec({0, 0})), InvalidArgument);
  EXPECT_NO_THROW(LambdaSeq::penalty(vec({1, 0})));
}

TEST(LambdaSeqTest, Shapes) {
  const LambdaSeq lin = LambdaSeq::linear(5, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(lin[0], 2.0);
  EXPECT_DOUBLE_EQ(lin[4], 1.0);
  EXPECT_DOUBLE_EQ(lin[2], 1.5);
  const LambdaSeq bhq = LambdaSeq::bhq(1000, 0.1, 1.0);
  // Phi^{-1}(1 - 0.1/2000) and Phi^{-1}(1 - 0.05).
  EXPECT_NEAR(bhq[0], 3.8905918864131, 1e-9);
  EXPECT_NEAR(bhq[999], 1.6448536269515, 1e-9);
  EXPECT_DOUBLE_EQ(lin.normalized()[0], 1.0);
}

TEST(SortedL1NormTest, Examples) {
  EXPECT_EQ(sorted_l1_norm(vec({0, 0, 0}), seq({2, 1, 0})), 0.0);
  EXPECT_DOUBLE_EQ(sorted_l1_norm(vec({1, -3}), seq({2, 1})), 7.0);
  EXPECT_DOUBLE_EQ(sorted_l1_norm(vec({0.5, -0.5, 2}), seq({1, 1, 1})), 3.0);
}

TEST(SortedL1NormTest, LengthMismatch) {
  EXPECT_THROW(sorted_l1_norm(vec({1, 2}), seq({1})), InvalidArgument);
}

TEST(SortedL1NormTest, MatchesSortAndDotOracle) {
  CounterRng rng(11, StreamRole::kTest);
  for (int trial = 0; trial < 200; ++trial) {
    const Index p = 1 + static_cast<Index>(rng() % 20);
    const Vector b = random_vector(rng, p, 2.0, 0.2);
    const LambdaSeq l = random_theta(rng, p);
    EXPECT_NEAR(sorted_l1_norm(b, l), oracle::sorted_l1(to_std(b), to_std(l.values())), 1e-12);
  }
}

TEST(ProxTest, IdentityAtZeroTheta) {
  CounterRng rng(1, StreamRole::kTest);
  const Vector v = random_vector(rng, 17);
  EXPECT_EQ(prox_sorted_l1(v, LambdaSeq::constant(17, 0.0)), v);
}

TEST(ProxTest, ConstantThetaExample) {
  EXPECT_EQ(prox_sorted_l1(vec({3, -1, 0.5}), seq({1, 1, 1})), vec({2, 0, 0}));
}

TEST(ProxTest, PooledExampleMatchesGridSearch) {
  const Vector out = prox_sorted_l1(vec({4, 3}), seq({2, 1}));
  EXPECT_DOUBLE_EQ(out[0], 2.0);
  EXPECT_DOUBLE_EQ(out[1], 2.0);
  const auto grid = oracle::prox_grid_2d({4, 3}, {2, 1});
  EXPECT_NEAR(grid[0], 2.0, 1e-6);
  EXPECT_NEAR(grid[1], 2.0, 1e-6);
}

TEST(ProxTest, LengthMismatch) {
  EXPECT_THROW(prox_sorted_l1(vec({1, 2}), seq({1})), InvalidArgument);
}

TEST(ProxTest, MatchesEnumerationOracle) {
  CounterRng rng(2, StreamRole::kTest);
  for (int trial = 0; trial < 50; ++trial) {
    const Index p = 2 + static_cast<Index>(rng() % 5);
    const Vector v = random_vector(rng, p, 2.0, 0.15);
    const LambdaSeq theta = random_theta(rng, p);
    const Vector got = prox_sorted_l1(v, theta);
    const Vector want = to_eigen(oracle::prox_enumerate(to_std(v), to_std(theta.values())));
    EXPECT_LE((got - want).lpNorm<Eigen::Infinity>(), 1e-6) << "trial " << trial;
  }
}

TEST(ProxTest, EnumerationOracleAgreesWithGridAtTwoDimensions) {
  CounterRng rng(3, StreamRole::kTest);
  for (int trial = 0; trial < 3; ++trial) {
    const Vector v = random_vector(rng, 2, 1.5);
    const LambdaSeq theta = random_theta(rng, 2, 1.0);
    const auto e = oracle::prox_enumerate(to_std(v), to_std(theta.values()));
    const auto g = oracle::prox_grid_2d(to_std(v), to_std(theta.values()));
    EXPECT_NEAR(e[0], g[0], 1e-6);
    EXPECT_NEAR(e[1], g[1], 1e-6);
  }
}

TEST(ProxTest, OrderSignAndExactZeros) {
  CounterRng rng(4, StreamRole::kTest);
  for (int trial = 0; trial < 300; ++trial) {
    const Index p = 1 + static_cast<Index>(rng() % 30);
    const Vector v = random_vector(rng, p, 2.0, 0.1);
    const Vector out = prox_sorted_l1(v, random_theta(rng, p));
    for (Index i = 0; i < p; ++i) {
      EXPECT_TRUE(out[i] == 0.0 || (out[i] > 0) == (v[i] > 0));
      for (Index j = 0; j < p; ++j) {
        if (std::abs(v[i]) > std::abs(v[j])) {
          EXPECT_GE(std::abs(out[i]), std::abs(out[j]));
        }
      }
    }
  }
}

TEST(ProxTest, Nonexpansive) {
  CounterRng rng(5, StreamRole::kTest);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index p = 1 + static_cast<Index>(rng() % 25);
    const LambdaSeq theta = random_theta(rng, p);
    const Vector a = random_vector(rng, p);
    const Vector b = random_vector(rng, p);
    EXPECT_LE((prox_sorted_l1(a, theta) - prox_sorted_l1(b, theta)).norm(),
              (a - b).norm() * (1.0 + 1e-12));
  }
}

TEST(ProxTest, PermutationEquivariant) {
  CounterRng rng(6, StreamRole::kTest);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index p = 1 + static_cast<Index>(rng() % 25);
    const LambdaSeq theta = random_theta(rng, p);
    const Vector v = random_vector(rng, p);
    std::vector<Index> perm;
    const Vector pv = testing_support::random_permutation_apply(rng, v, &perm);
    const Vector out = prox_sorted_l1(v, theta);
    const Vector pout = prox_sorted_l1(pv, theta);
    for (Index i = 0; i < p; ++i) {
      EXPECT_NEAR(pout[i], out[perm[static_cast<std::size_t>(i)]], 1e-12);
    }
  }
}

TEST(ProxTest, ConstantThetaIsSoftThresholdExactly) {
  CounterRng rng(7, StreamRole::kTest);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index p = 1 + static_cast<Index>(rng() % 40);
    const double c = 2.0 * rng.uniform();
    const Vector v = random_vector(rng, p, 2.0, 0.2);
    const Vector out = prox_sorted_l1(v, LambdaSeq::constant(p, c));
    for (Index i = 0; i < p; ++i) {
      const double want = std::copysign(std::max(std::abs(v[i]) - c, 0.0), v[i]);
      EXPECT_EQ(out[i], want == 0.0 ? 0.0 : want);
    }
  }
}

TEST(ProxTest, SatisfiesSubgradientOptimality) {
  CounterRng rng(8, StreamRole::kTest);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index p = 1 + static_cast<Index>(rng() % 40);
    const LambdaSeq theta = random_theta(rng, p);
    const Vector v = random_vector(rng, p, 2.0, 0.1);
    const Vector out = prox_sorted_l1(v, theta);
    EXPECT_LE(subgradient_distance(out, v - out, theta), 1e-8);
  }
}

TEST(ProxTest, DivergenceMatchesFiniteDifferences) {
  CounterRng rng(9, StreamRole::kTest);
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 100; ++trial) {
    const Index p = 2 + static_cast<Index>(rng() % 15);
    const LambdaSeq theta = random_theta(rng, p);
    const Vector v = random_vector(rng, p);
    const Vector out = prox_sorted_l1(v, theta);
    const auto atoms = atom_sets(magnitude_partition(out), false);
    // Generic points only: the active structure must be unchanged by 1e-4 moves.
    bool generic = true;
    for (Index i = 0; i < p && generic; ++i) {
      for (double s : {-1e-4, 1e-4}) {
        Vector w = v;
        w[i] += s;
        if (atom_sets(magnitude_partition(prox_sorted_l1(w, theta)), false) != atoms) {
          generic = false;
        }
      }
    }
    if (!generic) continue;
    double fd = 0.0;
    for (Index i = 0; i < p; ++i) {
      Vector plus = v, minus = v;
      plus[i] += h;
      minus[i] -= h;
      fd += (prox_sorted_l1(plus, theta)[i] - prox_sorted_l1(minus, theta)[i]) / (2.0 * h);
    }
    EXPECT_NEAR(fd, static_cast<double>(divergence_unique_nonzeros(out)), 1e-3);
    ++checked;
  }
  EXPECT_GE(checked, 50);
}

TEST(DivergenceTest, Examples) {
  EXPECT_EQ(divergence_unique_nonzeros(vec({0, 1, -2, 0, 2})), 2);
  EXPECT_EQ(divergence_unique_nonzeros(Vector::Zero(6)), 0);
}

TEST(DivergenceTest, JacobianExampleHasDiagonalSumTwo) {
  // theta chosen so that the +-1 entries pool, 3 stays alone and 0 stays zero.
  const Vector out = prox_sorted_l1(vec({1, 0, -1, 3}), seq({1, 0.5, 0.5, 0}));
  EXPECT_EQ(out, vec({0.5, 0, -0.5, 2}));
  const Matrix jac = prox_jacobian(out, default_tie_tolerance(out));
  EXPECT_EQ(Vector(jac.diagonal()), vec({0.5, 0, 0.5, 1}));
  EXPECT_EQ(divergence_unique_nonzeros(out), 2);
  EXPECT_EQ(prox_jacobian_trace(out, default_tie_tolerance(out)), 2.0);
}

TEST(DivergenceTest, ToleranceMergesNearTies) {
  EXPECT_EQ(divergence_unique_nonzeros(vec({1.0, 1.0 + 1e-12}), 1e-10), 1);
  EXPECT_EQ(divergence_unique_nonzeros(vec({1.0, 1.0 + 1e-12}), 0.0), 2);
  EXPECT_THROW(divergence_unique_nonzeros(vec({1.0}), -1.0), InvalidArgument);
}

TEST(PartitionTest, StarSupportExample) {
  const MagnitudePartition part = magnitude_partition(vec({1, 1, -1, 0, 2, -1}));
  const std::set<std::set<Index>> want{{0, 1, 2, 5}, {4}};
  EXPECT_EQ(atom_sets(part, true), want);
  EXPECT_EQ(part.atoms.size(), 3u);
  EXPECT_TRUE(part.atoms.back().zero);
}

TEST(PartitionTest, ZeroVectorHasOnlyZeroAtom) {
  const MagnitudePartition part = magnitude_partition(Vector::Zero(4));
  ASSERT_EQ(part.atoms.size(), 1u);
  EXPECT_TRUE(part.atoms[0].zero);
  EXPECT_TRUE(part.star_support().empty());
}

TEST(PartitionTest, DistinctMagnitudesGiveSingletons) {
  const MagnitudePartition part = magnitude_partition(vec({3, -1, 2, 0.5}));
  EXPECT_EQ(part.atoms.size(), 4u);
  EXPECT_EQ(part.star_support().size(), 4u);
  for (const Atom& a : part.atoms) EXPECT_EQ(a.size(), 1);
}

TEST(PartitionTest, AtomsPartitionIndicesAndCountMatchesDivergence) {
  CounterRng rng(10, StreamRole::kTest);
  for (int trial = 0; trial < 200; ++trial) {
    const Index p = 1 + static_cast<Index>(rng() % 30);
    const Vector out = prox_sorted_l1(random_vector(rng, p, 2.0, 0.2), random_theta(rng, p));
    const MagnitudePartition part = magnitude_partition(out);
    std::vector<int> seen(static_cast<std::size_t>(p), 0);
    for (const Atom& a : part.atoms) {
      for (Index i : a.indices) ++seen[static_cast<std::size_t>(i)];
    }
    for (int s : seen) EXPECT_EQ(s, 1);
    EXPECT_EQ(static_cast<Index>(part.star_support().size()), divergence_unique_nonzeros(out));
  }
}

TEST(SubgradientTest, Examples) {
  EXPECT_EQ(subgradient_distance(vec({2, 2}), vec({2, 1}), seq({2, 1})), 0.0);
  EXPECT_EQ(subgradient_distance(vec({0, 0}), vec({-1, 2}), seq({4, 1})), 0.0);
  EXPECT_GT(subgradient_distance(vec({1, 0}), vec({2, 0}), seq({1, 1})), 0.0);
}

TEST(SubgradientTest, SumAndSignViolations) {
  // Tied atom whose entries do not add up to lambda_1 + lambda_2.
  EXPECT_NEAR(subgradient_distance(vec({2, 2}), vec({1, 1}), seq({2, 1})), 1.0, 1e-15);
  // Opposite sign on a nonzero coordinate.
  EXPECT_EQ(subgradient_distance(vec({1, 0}), vec({-1, 0}), seq({1, 1})),
            std::numeric_limits<double>::infinity());
  // Zero atom: partial sum of the largest entry exceeds lambda_1.
  EXPECT_NEAR(subgradient_distance(vec({0, 0}), vec({5, 0}), seq({4, 1})), 1.0, 1e-15);
  EXPECT_THROW(subgradient_distance(vec({0, 0}), vec({1}), seq({1, 1})), InvalidArgument);
}

TEST(SubgradientTest, LassoSpecialCase) {
  // Constant lambda: g_i = lambda sign(b_i) on the support, |g_i| <= lambda off it.
  const LambdaSeq l = LambdaSeq::constant(3, 1.0);
  EXPECT_EQ(subgradient_distance(vec({2, 0, -1}), vec({1, 0.3, -1}), l), 0.0);
  EXPECT_GT(subgradient_distance(vec({2, 0, -1}), vec({0.9, 0.3, -1}), l), 0.0);
  EXPECT_GT(subgradient_distance(vec({2, 0, -1}), vec({1, 1.3, -1}), l), 0.0);
}
