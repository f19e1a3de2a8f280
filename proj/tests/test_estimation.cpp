#include <gtest/gtest.h>

#include <cmath>

#include <qsdlab/estimation.hpp>
#include <qsdlab/oracle.hpp>

#include "support.hpp"

using namespace qsdlab;

namespace {

ModelSpec chain_model(const std::string& name) { return ChainModel(test::load_fixture(name)); }

McContext ctx(std::uint64_t seed, unsigned threads = 4) {
  McContext c;
  c.seed = seed;
  c.threads = threads;
  return c;
}

std::vector<double> histogram(const EmpiricalMeasure& m, std::size_t states) {
  return Partition::discrete(states).histogram(m);
}

}  // namespace

TEST(Survival, FromAbsorptionTimes) {
  const auto c = survival_from_taus({1.0, 2.0, 3.0, kInfinity}, {0.5, 1.5, 2.5, 3.5});
  EXPECT_EQ(c.survival, (std::vector<double>{1.0, 0.75, 0.5, 0.25}));
  EXPECT_EQ(c.alive, (std::vector<std::size_t>{4, 3, 2, 1}));
  EXPECT_DOUBLE_EQ(c.se[1], std::sqrt(0.75 * 0.25 / 4.0));
  EXPECT_EQ(c.se[0], 0.0);
}

TEST(Survival, MatchesExactCurve) {
  const auto m = chain_model("three_state.mat");
  const std::vector<double> times = {0.5, 1.0, 2.0, 4.0};
  const auto c = estimate_survival_curve(m, InitialLaw::on_states({1, 0, 0}), times, 20000, ctx(1));
  const auto chain = test::load_fixture("three_state.mat");
  for (std::size_t k = 0; k < times.size(); ++k)
    EXPECT_NEAR(c.survival[k], survival_exact(chain, {1, 0, 0}, times[k]), 4.0 * c.se[k] + 1e-12);
}

TEST(Survival, RejectsBadInput) {
  const auto m = chain_model("one_state.mat");
  const auto mu = InitialLaw::on_states({1});
  EXPECT_THROW(estimate_survival_curve(m, mu, {1.0, 0.5}, 1000, ctx(1)), ValidationError);
  EXPECT_THROW(estimate_survival_curve(m, mu, {1.0, 1.0}, 1000, ctx(1)), ValidationError);
  EXPECT_THROW(estimate_survival_curve(m, mu, {1.0}, 10, ctx(1)), ValidationError);
  EXPECT_THROW(estimate_survival_curve(m, mu, {200.0}, 100, ctx(1)), DegenerateError);
}

TEST(Lambda, ExactExponentialGivesExactSlope) {
  SurvivalCurve c;
  c.n = 1000000;
  for (int k = 0; k <= 20; ++k) {
    const double t = 0.5 * k;
    c.times.push_back(t);
    c.survival.push_back(0.9 * std::exp(-0.37 * t));
    c.se.push_back(0.0);
    c.alive.push_back(1000);
  }
  const auto est = estimate_lambda0(c);
  EXPECT_NEAR(est.value, 0.37, 1e-12);
  EXPECT_EQ(est.se, 0.0);
  EXPECT_NEAR(estimate_lambda0(c, FitWindow{1.0, 3.0}).value, 0.37, 1e-12);
}

TEST(Lambda, DefaultWindowDropsEarlyAndSparsePoints) {
  SurvivalCurve c;
  c.n = 1000;
  for (int k = 0; k < 10; ++k) {
    c.times.push_back(k);
    // Early points are off the exponential; they must be ignored.
    c.survival.push_back(k < 2 ? 0.99 : std::exp(-0.5 * k));
    c.se.push_back(0.0);
    c.alive.push_back(k < 9 ? 100 : 10);
  }
  EXPECT_NEAR(estimate_lambda0(c).value, 0.5, 1e-12);
}

TEST(Lambda, TooFewPointsIsDegenerate) {
  SurvivalCurve c;
  c.times = {0, 1, 2, 3};
  c.survival = {1.0, 0.5, 0.0, 0.0};
  c.se = {0, 0, 0, 0};
  c.alive = {100, 50, 0, 0};
  c.n = 100;
  EXPECT_THROW(estimate_lambda0(c), DegenerateError);
  EXPECT_THROW(estimate_lambda0(c, FitWindow{0.0, 3.0}), DegenerateError);
}

TEST(Lambda, OneStateChainWithinThreeStandardErrors) {
  const auto m = chain_model("one_state.mat");
  std::vector<double> times;
  for (int k = 0; k <= 20; ++k) times.push_back(0.25 * k);
  const auto c = estimate_survival_curve(m, InitialLaw::on_states({1}), times, 50000, ctx(3));
  const auto est = estimate_lambda0(c);
  EXPECT_NEAR(est.value, 0.7, 3.0 * est.se);
  EXPECT_GT(est.se, 0.0);
  EXPECT_LT(est.se, 0.02);
}

TEST(Lambda, StandardErrorIsCalibrated) {
  // Spread of independent fits against the reported SE.
  const auto m = chain_model("two_state.mat");
  const auto chain = test::load_fixture("two_state.mat");
  const auto tr = qsd_eig(chain);
  std::vector<double> times;
  for (int k = 0; k <= 16; ++k) times.push_back(0.25 * k);
  const int reps = 40;
  double mean = 0.0, sq = 0.0, se = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto c = estimate_survival_curve(m, InitialLaw::on_states(tr.alpha), times, 5000, ctx(100 + r));
    const auto est = estimate_lambda0(c);
    mean += est.value / reps;
    sq += est.value * est.value / reps;
    se += est.se / reps;
  }
  const double sd = std::sqrt(sq - mean * mean);
  EXPECT_NEAR(mean, tr.lambda0, 4.0 * sd / std::sqrt(static_cast<double>(reps)));
  EXPECT_GT(sd / se, 0.6);
  EXPECT_LT(sd / se, 1.5);
}

TEST(Mcne, NaiveAndFlemingViotMatchExact) {
  const auto m = chain_model("three_state.mat");
  const auto chain = test::load_fixture("three_state.mat");
  const auto exact = mcne_exact(chain, {1, 0, 0}, 2.0);
  const auto mu0 = InitialLaw::on_states({1, 0, 0});
  for (auto method : {McneMethod::naive, McneMethod::fleming_viot}) {
    const auto est = estimate_mcne(m, mu0, 2.0, 20000, method, ctx(7));
    EXPECT_LT(tv_exact(histogram(est, 3), exact), 0.02) << to_string(method);
  }
}

TEST(Mcne, FlemingViotKeepsAllParticles) {
  const auto m = chain_model("two_state.mat");
  const auto est = estimate_mcne(m, InitialLaw::on_states({1, 0}), 4.0, 2000, McneMethod::fleming_viot, ctx(2));
  EXPECT_EQ(est.particles.size(), 2000u);
  EXPECT_GT(est.resampling_count, 2000u);
  const auto chain = test::load_fixture("two_state.mat");
  EXPECT_LT(tv_exact(histogram(est, 2), mcne_exact(chain, {1, 0}, 4.0)), 0.05);
}

TEST(Mcne, IndependentOfThreadCount) {
  const auto m = chain_model("five_state.mat");
  const auto mu0 = InitialLaw::on_states({0, 0, 1, 0, 0});
  for (auto method : {McneMethod::naive, McneMethod::fleming_viot}) {
    const auto a = estimate_mcne(m, mu0, 3.0, 3000, method, ctx(5, 1));
    const auto b = estimate_mcne(m, mu0, 3.0, 3000, method, ctx(5, 8));
    EXPECT_EQ(a.particles, b.particles);
    EXPECT_EQ(a.resampling_count, b.resampling_count);
  }
}

TEST(Mcne, RejectsSmallSamplesAndTotalDeath) {
  const auto m = chain_model("one_state.mat");
  const auto mu0 = InitialLaw::on_states({1});
  EXPECT_THROW(estimate_mcne(m, mu0, 1.0, 999, McneMethod::naive, ctx(1)), ValidationError);
  EXPECT_THROW(estimate_mcne(m, mu0, 100.0, 1000, McneMethod::naive, ctx(1)), DegenerateError);
}

TEST(Eta, DeltaMethodError) {
  const EstimateWithCI lam{0.5, 0.01, 100, ""};
  const auto e = eta_from_survival(0.4, 0.02, 2.0, lam, 100);
  const double g = std::exp(1.0);
  EXPECT_DOUBLE_EQ(e.value, g * 0.4);
  EXPECT_DOUBLE_EQ(e.se, g * std::sqrt(0.02 * 0.02 + (2.0 * 0.4 * 0.01) * (2.0 * 0.4 * 0.01)));
  EXPECT_THROW(eta_from_survival(0.0, 0.0, 1.0, lam, 100), DegenerateError);
}

TEST(Eta, MatchesOracleWithExactLambda) {
  const auto m = chain_model("three_state.mat");
  const auto tr = qsd_eig(test::load_fixture("three_state.mat"));
  const EstimateWithCI lam{tr.lambda0, 0.0, 0, "exact"};
  for (std::size_t x = 0; x < 3; ++x) {
    const auto e = estimate_eta(m, AbsorbedState::chain_state(x), 12.0, lam, 40000, ctx(11 + x));
    EXPECT_NEAR(e.value, tr.eta[x], 4.0 * e.se + 1e-3) << x;
  }
}

namespace {

// E[(1/t) int_0^t f(X_s) ds | t < tau] from mu, by Simpson quadrature over s
// of mu e^{Ls} diag(f) e^{L(t-s)} 1.
double exact_conditioned_average(const SubMarkovChain& chain, const std::vector<double>& mu, const std::vector<double>& f,
                                 double t) {
  const int m = 400;
  const double h = t / m;
  double acc = 0.0;
  for (int k = 0; k <= m; ++k) {
    const double s = h * k;
    const auto left = propagate_left(chain, mu, s);
    const auto right = propagate_right(chain, std::vector<double>(chain.size(), 1.0), t - s);
    double v = 0.0;
    for (std::size_t i = 0; i < chain.size(); ++i) v += left[i] * f[i] * right[i];
    const double w = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * v;
  }
  return acc * h / 3.0 / t / survival_exact(chain, mu, t);
}

}  // namespace

TEST(QuasiErgodic, ChainAverageMatchesQuadrature) {
  const auto chain = test::load_fixture("three_state.mat");
  const auto m = chain_model("three_state.mat");
  const StateFunction f = [](const AbsorbedState& s) { return s.index() == 1 ? 1.0 : 0.0; };
  const auto r = quasi_ergodic_average(m, InitialLaw::on_states({1, 0, 0}), f, 6.0, 20000, ctx(9));
  const double want = exact_conditioned_average(chain, {1, 0, 0}, {0, 1, 0}, 6.0);
  EXPECT_NEAR(r.average.value, want, 4.0 * r.average.se);
  EXPECT_EQ(r.n_survived, r.path_averages.size());
  const auto dev = r.deviation_probability(want, 10.0);
  EXPECT_EQ(dev.value, 0.0);
}

TEST(QuasiErgodic, TrapezoidOnDriftFlow) {
  // No jumps, weak constant killing: x_s = -s, average of x over [0, t] is -t/2.
  DriftJumpParams p;
  p.rho_e = RadialFunction::constant(0.01);
  p.with_default_bounds();
  const ModelSpec m = DriftJumpModel(p);
  const StateFunction f = [](const AbsorbedState& s) { return s.x()[0]; };
  const auto r = quasi_ergodic_average(m, InitialLaw::point(Point{0.0}), f, 3.0, 200, ctx(1));
  for (double a : r.path_averages) EXPECT_NEAR(a, -1.5, 1e-12);
}

TEST(QuasiErgodic, RejectsNonPositiveTime) {
  const auto m = chain_model("one_state.mat");
  const StateFunction f = [](const AbsorbedState&) { return 1.0; };
  EXPECT_THROW(quasi_ergodic_average(m, InitialLaw::on_states({1}), f, 0.0, 10, ctx(1)), ValidationError);
}
