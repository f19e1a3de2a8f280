#include <gtest/gtest.h>

#include <qsdlab/oracle.hpp>
#include <qsdlab/verify.hpp>

#include "support.hpp"

using namespace qsdlab;

namespace {

McContext ctx(std::uint64_t seed) {
  McContext c;
  c.seed = seed;
  c.threads = 4;
  return c;
}

ModelSpec uniball_model() { return PureJumpModel(PureJumpParams::from_uniform_ball(UniformBallParams{})); }

}  // namespace

TEST(Moment, MeanAndTopShare) {
  const auto m = exponential_moment({0.0, std::log(2.0)}, 1.0);
  EXPECT_DOUBLE_EQ(m.mean, 1.5);
  EXPECT_DOUBLE_EQ(m.se, 0.5);
  std::vector<double> t(100, 0.0);
  t[7] = std::log(100.0);
  const auto h = exponential_moment(t, 1.0, std::log(50.0));
  EXPECT_NEAR(h.top_share, 100.0 / 199.0, 1e-12);
  EXPECT_EQ(h.capped, 1u);
}

TEST(Halton, PointsStayInRegionAndRepeat) {
  const Region ball = Region::ball({0.0, 0.0}, 2.0);
  const auto a = halton_points(ball, 50);
  ASSERT_EQ(a.size(), 50u);
  for (const auto& s : a) EXPECT_TRUE(ball.contains(s));
  EXPECT_EQ(a, halton_points(ball, 50));
  EXPECT_THROW(halton_points(Region::states({0}), 3), UsageError);
}

TEST(AuditA5, OneStateChainDecayRateIsItsKilling) {
  const ModelSpec m = ChainModel(test::load_fixture("one_state.mat"));
  std::vector<double> times;
  for (int k = 1; k <= 10; ++k) times.push_back(0.5 * k);
  const auto r = check_a5_survival(m, {AbsorbedState::chain_state(0)}, Region::states({0}), times, 20000, ctx(1));
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.constants.at("rho_sv"), 0.7, 4.0 * r.constants.at("rho_sv_se"));
  EXPECT_NEAR(r.constants.at("c"), 1.0, 0.05);
  EXPECT_EQ(r.verdict.rfind("consistent with", 0), 0u);
}

TEST(AuditA5, UniformBallConfinedSurvival) {
  const ModelSpec m = uniball_model();
  const Region d_m = Region::ball({0.0}, 3.0);
  const auto xs = halton_points(Region::ball({0.0}, 1.0), 4);
  const auto r = check_a5_survival(m, xs, d_m, {0.5, 1.0, 1.5, 2.0, 2.5, 3.0}, 5000, ctx(2));
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.constants.at("c"), 0.0);
  EXPECT_EQ(r.evidence.rows.size(), 4u * 6u);
}

TEST(AuditA5, StartOutsideRegionFails) {
  const ModelSpec m = uniball_model();
  const auto r =
      check_a5_survival(m, {AbsorbedState(Point{5.0})}, Region::ball({0.0}, 1.0), {0.5, 1.0, 1.5, 2.0}, 200, ctx(3));
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.verdict.rfind("not consistent with", 0), 0u);
}

TEST(AuditA4, FastEscapeHasFiniteMoment) {
  const ModelSpec m = uniball_model();
  const auto r = check_a4_moment(m, 0.5, Region::ball({0.0}, 1.0), {AbsorbedState(Point{3.0})}, 10000, 200.0, ctx(4));
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(r.inconclusive);
  // Escape rate is at least rho_e2 = 1.6 outside the ball.
  EXPECT_LT(r.constants.at("sup_moment"), 1.6 / (1.6 - 0.5) + 0.1);
  EXPECT_EQ(check_a4_moment(m, 0.5, Region::ball({0.0}, 1.0), {AbsorbedState(Point{0.0})}, 10, 1.0, ctx(4))
                .constants.at("sup_moment"),
            1.0);
}

TEST(AuditA4, HeavyTailIsInconclusive) {
  // Escape is absorption at rate 0.7 and rho = 0.69 sits next to it.
  const ModelSpec m = ChainModel(test::load_fixture("one_state.mat"));
  const auto r = check_a4_moment(m, 0.69, Region::states({}), {AbsorbedState::chain_state(0)}, 10000, 1e6, ctx(5));
  EXPECT_TRUE(r.inconclusive);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.verdict.rfind("inconclusive", 0), 0u);
}

TEST(AuditA4, BoundIsEnforced) {
  const ModelSpec m = ChainModel(test::load_fixture("one_state.mat"));
  // E exp(0.35 tau) = 0.7 / 0.35 = 2.
  const auto ok = check_a4_moment(m, 0.35, Region::states({}), {AbsorbedState::chain_state(0)}, 20000, 1e6, ctx(6), 2.0);
  EXPECT_TRUE(ok.pass);
  const auto bad = check_a4_moment(m, 0.35, Region::states({}), {AbsorbedState::chain_state(0)}, 20000, 1e6, ctx(6), 1.5);
  EXPECT_FALSE(bad.pass);
}

TEST(AuditCoordinate, MomentBelowBoundInEachDimension) {
  for (std::size_t d : {1u, 2u, 3u}) {
    const auto p = CoordJumpParams::symmetric(d, 0.5, 1.0, RadialFunction::constant(0.5));
    const auto r = check_coordinate_moment(p, 0.5 * p.rho_sb(), Point(d, 0.0), 20000, ctx(7));
    EXPECT_TRUE(r.pass) << d;
    EXPECT_DOUBLE_EQ(r.constants.at("bound"), std::pow(4.0, static_cast<double>(d)));
    EXPECT_LE(r.constants.at("moment"), r.constants.at("bound"));
  }
  const auto p = CoordJumpParams::symmetric(2, 0.5, 1.0, RadialFunction::constant(0.5));
  EXPECT_THROW(check_coordinate_moment(p, 2.0, Point(2, 0.0), 10, ctx(7)), ValidationError);
}

TEST(AuditA2, ChainMixesTowardsQsd) {
  const auto chain = test::load_fixture("three_state.mat");
  const ModelSpec m = ChainModel(chain);
  const auto alpha = qsd_eig(chain).alpha;
  const Region all = Region::states({0, 1, 2});
  const std::vector<AbsorbedState> xs = {AbsorbedState::chain_state(0), AbsorbedState::chain_state(2)};
  const auto r = check_a2_mixing(m, xs, all, all, Partition::discrete(3), alpha, 1.0, 5000, ctx(8));
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.constants.at("c"), 0.1);
  EXPECT_EQ(r.evidence.rows.size(), 6u);
}

TEST(AuditA2, UnreachableCellFails) {
  // Confined to state 0, the chain can never reach state 1.
  const auto chain = test::load_fixture("two_state.mat");
  const ModelSpec m = ChainModel(chain);
  const auto r = check_a2_mixing(m, {AbsorbedState::chain_state(0)}, Region::states({0}), Region::states({0, 1}),
                                 Partition::discrete(2), {0.5, 0.5}, 1.0, 2000, ctx(9));
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.note.empty());
}

TEST(AuditBdSv, ChainRatioStaysBounded) {
  const auto chain = test::load_fixture("three_state.mat");
  const ModelSpec m = ChainModel(chain);
  const auto tr = qsd_eig(chain);
  std::vector<AbsorbedState> xs;
  for (std::size_t i = 0; i < 3; ++i) xs.push_back(AbsorbedState::chain_state(i));
  const auto r = check_bdsv_ratio(m, InitialLaw::on_states(tr.alpha), xs, {1, 2, 3, 4, 5, 6}, 20000, ctx(10));
  EXPECT_TRUE(r.pass);
  // The ratio tends to max eta.
  EXPECT_NEAR(r.constants.at("last_third_max"), 1.0649, 0.05);
}

TEST(AuditBdSv, SparseReferenceIsDegenerate) {
  const ModelSpec m = ChainModel(test::load_fixture("one_state.mat"));
  EXPECT_THROW(check_bdsv_ratio(m, InitialLaw::on_states({1}), {AbsorbedState::chain_state(0)}, {1, 10, 20}, 1000, ctx(1)),
               DegenerateError);
}

TEST(AuditNonuniformity, FarStartSeparates) {
  NonuniformityOptions opt;
  opt.n = 5000;
  const auto r = check_nonuniformity(UniformBallParams{}, opt, ctx(11));
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.constants.at("tv"), 0.9 - 2.0 * 0.01);
  EXPECT_GT(r.constants.at("x_radius"), 1.0);
}

TEST(AuditReport, JsonCarriesProvenance) {
  const ModelSpec m = ChainModel(test::load_fixture("one_state.mat"));
  const auto r = check_a4_moment(m, 0.1, Region::states({}), {AbsorbedState::chain_state(0)}, 100, 1e3, ctx(12));
  const auto j = r.to_json();
  EXPECT_EQ(j["audit"], "A4-moment");
  EXPECT_EQ(j["seed"], 12u);
  EXPECT_EQ(j["model_hash"], model_hash(m));
  EXPECT_TRUE(j.contains("constants"));
  EXPECT_NE(r.text().find("A4-moment"), std::string::npos);
}
