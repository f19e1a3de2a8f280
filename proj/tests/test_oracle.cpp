#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <sstream>

#include <qsdlab/oracle.hpp>

#include "support.hpp"

using namespace qsdlab;

namespace {

void expect_vec_near(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "index " << i;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

// Perron vector of a (real-spectrum-leading) matrix by a dense eigensolver.
std::pair<double, std::vector<double>> eigen_perron(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < a.rows(); ++k)
    if (es.eigenvalues()[k].real() > es.eigenvalues()[best].real()) best = k;
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  v /= v.sum();
  return {es.eigenvalues()[best].real(), std::vector<double>(v.data(), v.data() + v.size())};
}

SubMarkovChain random_chain(std::size_t n, std::uint64_t seed) {
  Rng rng({seed, 0});
  Matrix rates(n, n);
  std::vector<double> kill(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) rates(i, j) = rng.uniform(0.05, 2.0);
    kill[i] = rng.uniform(0.0, 1.0);
  }
  return SubMarkovChain::from_rates(rates, kill);
}

}  // namespace

TEST(QsdEig, TwoStateClosedForm) {
  const auto tr = qsd_eig(test::load_fixture("two_state.mat"));
  EXPECT_NEAR(tr.lambda0, 1.381966011250105, 1e-10);
  expect_vec_near(tr.alpha, {0.6180339887498949, 0.3819660112501051}, 1e-10);
  expect_vec_near(tr.eta, {1.170820393249937, 0.7236067977499789}, 1e-9);
  expect_vec_near(quasi_ergodic_law(tr), {0.7236067977499792, 0.27639320225002095}, 1e-9);
}

TEST(QsdEig, ThreeStatePinned) {
  const auto tr = qsd_eig(test::load_fixture("three_state.mat"));
  EXPECT_NEAR(tr.lambda0, 0.27860613397018574, 1e-10);
  expect_vec_near(tr.alpha, {0.2447980525233935, 0.49318150090931906, 0.2620204465672874}, 1e-10);
  expect_vec_near(tr.eta, {1.064912675830239, 1.0433498961849363, 0.8577597131050463}, 1e-9);
  expect_vec_near(quasi_ergodic_law(tr), {0.2606885491507184, 0.5145608677740692, 0.22475058307521256}, 1e-9);
}

TEST(QsdEig, OneStateIsItsKillingRate) {
  const auto tr = qsd_eig(test::load_fixture("one_state.mat"));
  EXPECT_NEAR(tr.lambda0, 0.7, 1e-12);
  expect_vec_near(tr.alpha, {1.0}, 1e-15);
  expect_vec_near(tr.eta, {1.0}, 1e-12);
}

TEST(QsdEig, SymmetricChainHasUniformQsd) {
  const auto tr = qsd_eig(test::load_fixture("symmetric_two_state.mat"));
  EXPECT_NEAR(tr.lambda0, 0.5, 1e-10);
  expect_vec_near(tr.alpha, {0.5, 0.5}, 1e-10);
  expect_vec_near(tr.eta, {1.0, 1.0}, 1e-9);
}

TEST(QsdEig, AgreesWithDenseEigensolverOnRandomChains) {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const auto chain = random_chain(2 + s % 7, s);
    const auto tr = qsd_eig(chain);
    const Eigen::MatrixXd l = to_eigen(chain.generator());
    const auto [mu_left, alpha] = eigen_perron(l.transpose());
    const auto [mu_right, eta] = eigen_perron(l);
    EXPECT_NEAR(tr.lambda0, -mu_left, 1e-9) << "seed " << s;
    EXPECT_NEAR(mu_left, mu_right, 1e-9);
    expect_vec_near(tr.alpha, alpha, 1e-9);
    // eta up to scale: compare eta / sum(eta)
    std::vector<double> e = tr.eta;
    const double se = sum(e);
    for (double& v : e) v /= se;
    expect_vec_near(e, eta, 1e-8);
    EXPECT_NEAR(dot(tr.alpha, tr.eta), 1.0, 1e-12);
  }
}

TEST(QsdEig, EigenRelationsOnFixtures) {
  for (const auto& name : test::fixture_chains()) {
    const auto chain = test::load_fixture(name);
    const auto tr = qsd_eig(chain);
    const auto al = left_multiply(tr.alpha, chain.generator());
    const auto le = right_multiply(chain.generator(), tr.eta);
    for (std::size_t i = 0; i < chain.size(); ++i) {
      EXPECT_NEAR(al[i], -tr.lambda0 * tr.alpha[i], 1e-9) << name;
      EXPECT_NEAR(le[i], -tr.lambda0 * tr.eta[i], 1e-9) << name;
    }
  }
}

TEST(QsdEig, ShiftInvariance) {
  const auto chain = test::load_fixture("five_state.mat");
  const auto a = qsd_eig(chain);
  const auto b = qsd_eig(chain.with_extra_killing(0.9));
  EXPECT_NEAR(b.lambda0, a.lambda0 + 0.9, 1e-9);
  expect_vec_near(b.alpha, a.alpha, 1e-9);
  expect_vec_near(b.eta, a.eta, 1e-8);
}

TEST(QsdEig, SlowGapStillConverges) {
  // Two nearly decoupled blocks: spectral gap about 2e-4.
  Matrix rates(4, 4);
  rates(0, 1) = rates(1, 0) = 1.0;
  rates(2, 3) = rates(3, 2) = 1.0;
  rates(1, 2) = rates(2, 1) = 1e-4;
  const auto chain = SubMarkovChain::from_rates(rates, {0.1, 0.1, 0.1, 0.1001});
  const auto tr = qsd_eig(chain);
  const auto [mu, alpha] = eigen_perron(to_eigen(chain.generator()).transpose());
  EXPECT_NEAR(tr.lambda0, -mu, 1e-9);
  expect_vec_near(tr.alpha, alpha, 1e-6);
}

TEST(QsdEig, ReducibleChainRejected) {
  Matrix rates(2, 2);
  rates(0, 1) = 1.0;
  EXPECT_THROW(qsd_eig(SubMarkovChain::from_rates(rates, {0.5, 0.5})), ValidationError);
}

TEST(QGenerator, ConservativeWithStationaryLawBeta) {
  for (const auto& name : test::fixture_chains()) {
    const auto chain = test::load_fixture(name);
    const auto tr = qsd_eig(chain);
    const Matrix q = q_generator(chain, tr);
    for (std::size_t i = 0; i < chain.size(); ++i) {
      double rs = 0.0;
      for (std::size_t j = 0; j < chain.size(); ++j) rs += q(i, j);
      EXPECT_NEAR(rs, 0.0, 1e-12);
      EXPECT_NEAR(q(i, i), chain.generator()(i, i) + tr.lambda0, 1e-9);
    }
    const auto beta = quasi_ergodic_law(tr);
    const auto bq = left_multiply(beta, q);
    for (double v : bq) EXPECT_NEAR(v, 0.0, 1e-9) << name;
    if (chain.size() > 1) expect_vec_near(stationary_law(q), beta, 1e-9);
  }
}

TEST(Mcne, PinnedConditionedMarginals) {
  const auto two = test::load_fixture("two_state.mat");
  expect_vec_near(mcne_exact(two, {1, 0}, 1.0), {0.6534539341427221, 0.34654606585727793}, 1e-11);
  expect_vec_near(mcne_exact(two, {1, 0}, 2.0), {0.6217667899641638, 0.3782332100358362}, 1e-11);
  EXPECT_NEAR(survival_exact(two, {1, 0}, 1.0), 0.28939074347169663, 1e-11);
  EXPECT_NEAR(survival_exact(two, {1, 0}, 2.0), 0.0736894751805529, 1e-11);
  const auto three = test::load_fixture("three_state.mat");
  expect_vec_near(mcne_exact(three, {1, 0, 0}, 1.0), {0.3874420760163732, 0.42707317805469164, 0.18548474592893516},
                  1e-11);
  expect_vec_near(mcne_exact(three, {1, 0, 0}, 2.0), {0.27377870530307735, 0.4844216471905365, 0.2417996475063862},
                  1e-11);
  EXPECT_NEAR(survival_exact(three, {1, 0, 0}, 1.0), 0.7922757278899775, 1e-11);
  EXPECT_NEAR(survival_exact(three, {1, 0, 0}, 2.0), 0.6073271945149834, 1e-11);
}

TEST(Mcne, QsdIsFixedAndAttracting) {
  const auto chain = test::load_fixture("five_state.mat");
  const auto tr = qsd_eig(chain);
  expect_vec_near(mcne_exact(chain, tr.alpha, 3.0), tr.alpha, 1e-10);
  EXPECT_NEAR(survival_exact(chain, tr.alpha, 3.0), std::exp(-3.0 * tr.lambda0), 1e-10);
  expect_vec_near(mcne_exact(chain, {0, 0, 0, 0, 1}, 60.0), tr.alpha, 1e-9);
  expect_vec_near(mcne_exact(chain, {2, 0, 0, 0, 0}, 0.0), {1, 0, 0, 0, 0}, 0.0);
}

TEST(Mcne, AgreesWithDenseMatrixExponential) {
  const auto chain = random_chain(6, 99);
  const Eigen::MatrixXd l = to_eigen(chain.generator());
  Eigen::EigenSolver<Eigen::MatrixXd> es(l * 1.7);
  const Eigen::MatrixXd e = (es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
                             es.eigenvectors().inverse())
                                .real();
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(6);
  mu(2) = 1.0;
  const Eigen::RowVectorXd v = mu * e;
  std::vector<double> want(v.data(), v.data() + 6);
  EXPECT_NEAR(survival_exact(chain, {0, 0, 1, 0, 0, 0}, 1.7), v.sum(), 1e-10);
  for (double& w : want) w /= v.sum();
  expect_vec_near(mcne_exact(chain, {0, 0, 1, 0, 0, 0}, 1.7), want, 1e-10);
}

TEST(Mcne, UnderflowIsReported) {
  const auto chain = test::load_fixture("one_state.mat");
  EXPECT_THROW(mcne_exact(chain, {1.0}, 2000.0), UnderflowError);
  EXPECT_THROW(survival_exact(chain, {1.0}, 2000.0), UnderflowError);
  EXPECT_THROW(mcne_exact(chain, {-1.0}, 1.0), DomainError);
}

TEST(Propagate, RightActionGivesSurvivalFromEachState) {
  const auto chain = test::load_fixture("three_state.mat");
  const auto s = propagate_right(chain, {1, 1, 1}, 1.0);
  EXPECT_NEAR(s[0], 0.7922757278899775, 1e-11);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> d(3, 0.0);
    d[i] = 1.0;
    EXPECT_NEAR(s[i], survival_exact(chain, d, 1.0), 1e-12);
  }
}

TEST(HTransform, MarginalsConvergeToBeta) {
  const auto chain = test::load_fixture("three_state.mat");
  const auto tr = qsd_eig(chain);
  const auto m = simulate_qprocess_htransform(chain, tr, 0, {0.0, 1.0, 50.0});
  expect_vec_near(m[0], {1, 0, 0}, 0.0);
  EXPECT_NEAR(sum(m[1]), 1.0, 1e-12);
  expect_vec_near(m[2], quasi_ergodic_law(tr), 1e-9);
}

TEST(HTransform, MatchesConditioningOnLongSurvival) {
  // P(X_t = j | T < tau) -> Q-process marginal as T grows.
  const auto chain = test::load_fixture("two_state.mat");
  const auto tr = qsd_eig(chain);
  const double t = 0.7, big = 30.0;
  auto at_t = propagate_left(chain, {1, 0}, t);
  const auto surv_rest = propagate_right(chain, {1, 1}, big - t);
  std::vector<double> cond(2);
  for (std::size_t j = 0; j < 2; ++j) cond[j] = at_t[j] * surv_rest[j];
  detail::normalize_l1(cond);
  expect_vec_near(simulate_qprocess_htransform(chain, tr, 0, {t})[0], cond, 1e-9);
}

TEST(Taboo, RestrictedKernel) {
  const auto chain = test::load_fixture("three_state.mat");
  const Matrix k = taboo_kernel(chain, {0, 1}, 0.0);
  EXPECT_DOUBLE_EQ(k(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(k(0, 1), 0.0);
  const Matrix k1 = taboo_kernel(chain, {0, 1}, 1.0);
  const Matrix full = expm(chain.generator() * 1.0);
  EXPECT_LT(k1(0, 1), full(0, 1));
  EXPECT_GT(k1(0, 1), 0.0);
}

TEST(Discretize, OneStepRowOfUniformBall) {
  const auto p = PureJumpParams::from_uniform_ball(UniformBallParams{});
  const auto chain = discretize_pure_jump(p, LatticeGrid{{-1.0}, {1.0}, 0.25});
  ASSERT_EQ(chain.size(), 9u);
  // Centre (index 4): offsets k = -3..3 at rate h_J * spacing, kept in the grid.
  for (std::size_t j = 0; j < 9; ++j) {
    const double want = j == 4 ? -1.25 : (j >= 1 && j <= 7 ? 0.125 : 0.0);
    EXPECT_DOUBLE_EQ(chain.generator()(4, j), want) << j;
  }
  EXPECT_DOUBLE_EQ(chain.killing()[4], 0.5);
  // Left edge (index 0, x = -1): rho_e2 plus three offsets off the grid.
  EXPECT_DOUBLE_EQ(chain.killing()[0], 1.6 + 3 * 0.125);
  EXPECT_EQ(chain.embedding()[0], (Point{-1.0}));
}

TEST(Discretize, RejectsCoarseGrid) {
  const auto p = PureJumpParams::from_uniform_ball(UniformBallParams{});
  EXPECT_THROW(discretize_pure_jump(p, LatticeGrid{{-1.0}, {1.0}, 0.5}), ValidationError);
}

TEST(Discretize, UniformBallLambdaPinned) {
  const auto p = PureJumpParams::from_uniform_ball(UniformBallParams{});
  const double a = qsd_eig(discretize_pure_jump(p, LatticeGrid{{-4.0}, {4.0}, 0.05})).lambda0;
  const double b = qsd_eig(discretize_pure_jump(p, LatticeGrid{{-4.0}, {4.0}, 0.025})).lambda0;
  EXPECT_NEAR(a, 0.6728565352801905, 1e-8);
  EXPECT_NEAR(b, 0.674719693354072, 1e-8);
  EXPECT_LT(std::abs(a - b) / b, 0.005);
}

TEST(ChainFile, RoundTrip) {
  const auto chain = test::load_fixture("five_state.mat");
  std::stringstream ss;
  write_chain(ss, chain);
  const auto back = read_chain(ss);
  EXPECT_EQ(back.generator().data(), chain.generator().data());
}

TEST(ChainFile, EmbeddingRoundTrip) {
  const auto p = PureJumpParams::from_uniform_ball(UniformBallParams{});
  const auto chain = discretize_pure_jump(p, LatticeGrid{{-1.0}, {1.0}, 0.25});
  std::stringstream ss;
  write_chain(ss, chain);
  const auto back = read_chain(ss);
  EXPECT_EQ(back.embedding(), chain.embedding());
}

TEST(ChainFile, RejectsPositiveRowSum) {
  std::stringstream ss("2\n-1 2\n1 -1\n");
  EXPECT_THROW(read_chain(ss), ValidationError);
}
