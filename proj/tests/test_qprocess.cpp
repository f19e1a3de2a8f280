#include <gtest/gtest.h>

#include <qsdlab/qprocess.hpp>

#include "support.hpp"

using namespace qsdlab;

namespace {

McContext ctx(std::uint64_t seed, unsigned threads = 4) {
  McContext c;
  c.seed = seed;
  c.threads = threads;
  return c;
}

// P(X_t = j | T < tau) from mu.
std::vector<double> conditioned_exact(const SubMarkovChain& chain, const std::vector<double>& mu, double t, double horizon) {
  auto at_t = propagate_left(chain, mu, t);
  const auto rest = propagate_right(chain, std::vector<double>(chain.size(), 1.0), horizon - t);
  for (std::size_t j = 0; j < at_t.size(); ++j) at_t[j] *= rest[j];
  detail::normalize_l1(at_t);
  return at_t;
}

std::vector<double> histogram(const EmpiricalMeasure& m, std::size_t states) {
  return Partition::discrete(states).histogram(m);
}

}  // namespace

TEST(Rejection, MarginalMatchesFiniteHorizonConditioning) {
  const auto chain = test::load_fixture("three_state.mat");
  const ModelSpec m = ChainModel(chain);
  const auto run = simulate_qprocess_rejection(m, InitialLaw::on_states({1, 0, 0}), 1.0, 8.0, 60000, ctx(3));
  EXPECT_EQ(run.launched, 60000u);
  EXPECT_NEAR(run.acceptance, survival_exact(chain, {1, 0, 0}, 8.0),
              4.0 * test::binomial_se(run.acceptance, 60000.0));
  EXPECT_LT(tv_exact(histogram(run.marginal, 3), conditioned_exact(chain, {1, 0, 0}, 1.0, 8.0)), 0.03);
}

TEST(Rejection, AcceptedCountIsExactAndThreadIndependent) {
  const ModelSpec m = ChainModel(test::load_fixture("two_state.mat"));
  const auto mu = InitialLaw::on_states({1, 0});
  const auto a = simulate_qprocess_rejection_accepted(m, mu, 0.5, 2.0, 1500, ctx(4, 1));
  const auto b = simulate_qprocess_rejection_accepted(m, mu, 0.5, 2.0, 1500, ctx(4, 8));
  EXPECT_EQ(a.accepted, 1500u);
  EXPECT_EQ(a.marginal.particles.size(), 1500u);
  EXPECT_EQ(a.launched, b.launched);
  EXPECT_EQ(a.marginal.particles, b.marginal.particles);
  EXPECT_GT(a.launched, a.accepted);
}

TEST(Rejection, LowAcceptanceIsRefused) {
  const ModelSpec m = ChainModel(test::load_fixture("one_state.mat"));
  const auto mu = InitialLaw::on_states({1});
  // exp(-0.7 * 20) is far below the floor.
  EXPECT_THROW(simulate_qprocess_rejection(m, mu, 1.0, 20.0, 5000, ctx(1)), DegenerateError);
  EXPECT_THROW(simulate_qprocess_rejection_accepted(m, mu, 1.0, 20.0, 10, ctx(1)), DegenerateError);
}

TEST(Rejection, ValidatesTimes) {
  const ModelSpec m = ChainModel(test::load_fixture("one_state.mat"));
  const auto mu = InitialLaw::on_states({1});
  EXPECT_THROW(simulate_qprocess_rejection(m, mu, 2.0, 2.0, 100, ctx(1)), ValidationError);
  EXPECT_THROW(simulate_qprocess_rejection(m, mu, -1.0, 2.0, 100, ctx(1)), ValidationError);
  EXPECT_THROW(simulate_qprocess_rejection(m, mu, 0.5, 2.0, 0, ctx(1)), ValidationError);
}

TEST(EtaBias, Reweights) {
  const auto b = eta_biased({0.5, 0.5}, {1.0, 3.0});
  EXPECT_DOUBLE_EQ(b[0], 0.25);
  EXPECT_DOUBLE_EQ(b[1], 0.75);
  EXPECT_THROW(eta_biased({1.0, 0.0}, {0.0, 1.0}), DomainError);
  EXPECT_THROW(eta_biased({1.0}, {1.0, 1.0}), ValidationError);
}

TEST(ExactMarginal, EtaBiasedStartGivesEtaWeightedConditionedLaw) {
  const auto chain = test::load_fixture("five_state.mat");
  const auto tr = qsd_eig(chain);
  const std::vector<double> mu = {0.1, 0.0, 0.5, 0.4, 0.0};
  const double t = 1.3;
  auto want = mcne_exact(chain, mu, t);
  for (std::size_t j = 0; j < want.size(); ++j) want[j] *= tr.eta[j];
  detail::normalize_l1(want);
  const auto got = qprocess_marginal_exact(chain, tr, eta_biased(mu, tr.eta), t);
  for (std::size_t j = 0; j < want.size(); ++j) EXPECT_NEAR(got[j], want[j], 1e-10);
}

TEST(ExactMarginal, AgreesWithHTransformFromPoint) {
  const auto chain = test::load_fixture("three_state.mat");
  const auto tr = qsd_eig(chain);
  const auto a = qprocess_marginal_exact(chain, tr, {0, 0, 1}, 0.8);
  const auto b = simulate_qprocess_htransform(chain, tr, 2, {0.8})[0];
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
}

TEST(ExactMarginal, LongHorizonRejectionApproachesQProcess) {
  const auto chain = test::load_fixture("two_state.mat");
  const auto tr = qsd_eig(chain);
  const auto q = qprocess_marginal_exact(chain, tr, {1, 0}, 0.5);
  const auto c = conditioned_exact(chain, {1, 0}, 0.5, 20.0);
  EXPECT_LT(tv_exact(q, c), 1e-9);
}

TEST(Beta, ChainOccupationMatchesOracle) {
  const auto chain = test::load_fixture("three_state.mat");
  const auto tr = qsd_eig(chain);
  const auto m = estimate_beta_chain(chain, tr, 0, BetaOptions{}, ctx(8));
  EXPECT_NEAR(sum(m.weights), 1.0, 1e-12);
  std::vector<double> est(3, 0.0);
  for (std::size_t k = 0; k < m.particles.size(); ++k) est[m.particles[k].index()] = m.weights[k];
  EXPECT_LT(tv_exact(est, quasi_ergodic_law(tr)), 0.03);
}

TEST(Beta, BurnInMustPrecedeRunEnd) {
  const auto chain = test::load_fixture("two_state.mat");
  const auto tr = qsd_eig(chain);
  BetaOptions opt;
  opt.burn_in = opt.run_length;
  EXPECT_THROW(estimate_beta_chain(chain, tr, 0, opt, ctx(1)), UsageError);
  const ModelSpec m = ChainModel(chain);
  EXPECT_THROW(estimate_beta_rejection(m, InitialLaw::on_states({1, 0}), opt, ctx(1)), UsageError);
}

TEST(Beta, SlidingHorizonRejectionNearOracle) {
  const auto chain = test::load_fixture("three_state.mat");
  const auto tr = qsd_eig(chain);
  const ModelSpec m = ChainModel(chain);
  BetaOptions opt;
  opt.run_length = 6.0;
  opt.burn_in = 2.0;
  opt.lookahead = 4.0;
  opt.paths = 20000;
  const auto est = estimate_beta_rejection(m, InitialLaw::on_states({1, 0, 0}), opt, ctx(6));
  EXPECT_GT(est.n_survived, 500u);
  EXPECT_LT(tv_exact(histogram(est, 3), quasi_ergodic_law(tr)), 0.05);
}
