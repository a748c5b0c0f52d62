#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>

#include "slope_amp/amp.hpp"
#include "slope_amp/baselines.hpp"
#include "slope_amp/experiments.hpp"
#include "test_support.hpp"

using namespace slope_amp;

namespace {

ProblemInstance instance(std::uint64_t seed, double sigma_w = 0.1) {
  return gen_instance(100, 200, PriorSpec::bernoulli_gaussian(0.1, 1.0), sigma_w, seed);
}

// Violation of X^T (y - X b) in the subdifferential at b; 0 at a minimizer.
double optimality_violation(const ProblemInstance& inst, const Vector& b, const LambdaSeq& l) {
  return subgradient_distance(b, inst.X.transpose() * (inst.y - inst.X * b), l, 1e-7);
}

}  // namespace

TEST(SlopeCostTest, ZeroEstimateAndLassoCase) {
  const ProblemInstance inst = instance(1);
  const LambdaSeq l = LambdaSeq::linear(200, 1.0, 0.1);
  EXPECT_DOUBLE_EQ(slope_cost(Vector::Zero(200), inst.X, inst.y, l), 0.5 * inst.y.squaredNorm());
  CounterRng rng(3, StreamRole::kTest);
  const Vector b = testing_support::random_vector(rng, 200);
  const double c = 0.7;
  EXPECT_NEAR(slope_cost(b, inst.X, inst.y, LambdaSeq::constant(200, c)),
              0.5 * (inst.y - inst.X * b).squaredNorm() + c * b.lpNorm<1>(), 1e-9);
  EXPECT_THROW(slope_cost(Vector::Zero(3), inst.X, inst.y, l), InvalidArgument);
}

TEST(PowerIterationTest, DiagonalAndRankOne) {
  Matrix d = Matrix::Zero(4, 6);
  d(0, 0) = 1.0;
  d(1, 1) = -3.0;
  d(2, 2) = 2.0;
  d(3, 5) = 0.5;
  EXPECT_NEAR(power_iteration_sigma_max(d, 1e-12), 3.0, 1e-6);
  Vector u = Vector::LinSpaced(5, 1.0, 2.0);
  Vector v = Vector::LinSpaced(7, -1.0, 3.0);
  const Matrix r1 = u * v.transpose();
  EXPECT_NEAR(power_iteration_sigma_max(r1), u.norm() * v.norm(), 1e-9);
}

TEST(PowerIterationTest, GaussianDesignNearMarchenkoPasturEdge) {
  const ProblemInstance inst = gen_instance(500, 1000, PriorSpec::point_mass(0.0), 0.0, 3);
  const double s = power_iteration_sigma_max(inst.X);
  const double edge = 1.0 / std::sqrt(0.5) + 1.0;
  EXPECT_LE(std::abs(s - edge) / edge, 0.05);
  const Eigen::JacobiSVD<Matrix> svd(inst.X);
  EXPECT_NEAR(s, svd.singularValues()[0], 1e-4 * s);
}

TEST(PowerIterationTest, RejectsZeroMatrix) {
  EXPECT_THROW(power_iteration_sigma_max(Matrix::Zero(3, 3)), InvalidArgument);
}

TEST(LipschitzTest, FrobeniusBoundsSpectral) {
  const ProblemInstance inst = instance(2);
  EXPECT_GE(lipschitz_bound(inst.X, StepRule::kFrobenius),
            lipschitz_bound(inst.X, StepRule::kSpectral));
}

TEST(IstaTest, ZeroResponseGivesZero) {
  ProblemInstance inst = instance(3);
  inst.y.setZero();
  const SolverTrace t = ista_run(inst.X, inst.y, LambdaSeq::constant(200, 1.0));
  EXPECT_TRUE(t.converged);
  EXPECT_TRUE((t.beta.array() == 0.0).all());
  EXPECT_EQ(t.iterations, 1);
}

TEST(IstaTest, CostIsMonotoneAndLimitIsOptimal) {
  const ProblemInstance inst = instance(4);
  const LambdaSeq l = LambdaSeq::linear(200, 0.5, 0.1);
  SolverOptions opts;
  opts.opt_tol = 1e-20;
  const SolverTrace t = ista_run(inst.X, inst.y, l, opts);
  ASSERT_TRUE(t.converged);
  for (std::size_t k = 1; k < t.records.size(); ++k) {
    EXPECT_LE(t.records[k].cost, t.records[k - 1].cost * (1.0 + 1e-14));
  }
  EXPECT_LE(optimality_violation(inst, t.beta, l), 1e-6);
}

TEST(FistaTest, IndependentOfStartingPoint) {
  const ProblemInstance inst = instance(5);
  const LambdaSeq l = LambdaSeq::bhq(200, 0.2, 0.3);
  SolverOptions opts;
  opts.opt_tol = 1e-24;
  const SolverTrace a = fista_run(inst.X, inst.y, l, opts);
  CounterRng rng(5, StreamRole::kTest);
  const Vector start = testing_support::random_vector(rng, 200);
  opts.start = &start;
  const SolverTrace b = fista_run(inst.X, inst.y, l, opts);
  EXPECT_LE((a.beta - b.beta).lpNorm<Eigen::Infinity>(), 1e-6);
  EXPECT_LE(optimality_violation(inst, a.beta, l), 1e-6);
}

TEST(FistaTest, AgreesWithIstaAndAmp) {
  const ProblemInstance inst = instance(6, 0.2);
  AmpConfig cfg;
  cfg.alpha = LambdaSeq::linear(200, 2.5, 1.2);
  cfg.max_iter = 2000;
  cfg.opt_tol = 1e-28;
  const AmpResult amp = amp_run(inst.X, inst.y, cfg);
  const LambdaSeq l = fixed_point_lambda(amp.state, cfg.alpha, inst.n());
  SolverOptions opts;
  opts.opt_tol = 1e-24;
  const SolverTrace ista = ista_run(inst.X, inst.y, l, opts);
  const SolverTrace fista = fista_run(inst.X, inst.y, l, opts);
  EXPECT_LE((ista.beta - fista.beta).lpNorm<Eigen::Infinity>(), 1e-5);
  EXPECT_LE((amp.state.beta - fista.beta).lpNorm<Eigen::Infinity>(), 1e-5);
}

TEST(SolverTest, ObserverStopsEarlyAndInputsAreChecked) {
  const ProblemInstance inst = instance(7);
  const LambdaSeq l = LambdaSeq::constant(200, 0.5);
  int calls = 0;
  const SolverTrace t = fista_run(inst.X, inst.y, l, {}, [&](int k, const Vector&) {
    ++calls;
    return k == 5;
  });
  EXPECT_EQ(calls, 5);
  EXPECT_EQ(t.iterations, 5);
  EXPECT_FALSE(t.converged);
  EXPECT_THROW(ista_run(inst.X, Vector::Zero(3), l), InvalidArgument);
  SolverOptions bad;
  bad.max_iter = 0;
  EXPECT_THROW(fista_run(inst.X, inst.y, l, bad), InvalidArgument);
}

TEST(ReferenceSolutionTest, SatisfiesOptimality) {
  const ProblemInstance inst = instance(8);
  const LambdaSeq l = LambdaSeq::bhq(200, 0.1, 0.5);
  EXPECT_LE(optimality_violation(inst, reference_solution(inst.X, inst.y, l), l), 1e-4);
  EXPECT_LE(optimality_violation(inst, reference_solution(inst.X, inst.y, l, 1e-26), l), 1e-8);
}
