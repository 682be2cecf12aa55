#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "cowqkd/protocol.hpp"
#include "cowqkd/report.hpp"
#include "cowqkd/simkernel.hpp"

using namespace cow;
using namespace cow::protocol;
using sim::FrameKind;

namespace {

sim::RunConfig config(std::uint64_t n)
{
    sim::RunConfig c;
    c.n_frames = n;
    c.threads = 1;
    return c;
}

std::string dump(const Outcome& o)
{
    return report::to_json(o).dump();
}

bool within_3sigma(const VisibilityEstimate& e, double v0)
{
    return e.available && std::abs(e.z_score(v0)) <= 3.0;
}

}  // namespace

TEST(Estimator, NormalQuantile)
{
    EXPECT_NEAR(normal_quantile(0.99), 2.5758293035489004, 1e-12);
    EXPECT_NEAR(normal_quantile(0.95), 1.959963984540054, 1e-12);
    EXPECT_THROW(normal_quantile(1.0), InvalidParameter);
}

TEST(Estimator, Visibility)
{
    const auto e = estimate_visibility(90, 10, 1000, 0.0, 0.99);
    ASSERT_TRUE(e.available);
    EXPECT_DOUBLE_EQ(e.raw, 0.8);
    EXPECT_DOUBLE_EQ(e.value, 0.8);
    EXPECT_GT(e.half_width, 0.0);

    // background subtraction: 10 dark clicks expected per detector
    const auto b = estimate_visibility(100, 10, 1000, 0.01, 0.99);
    EXPECT_DOUBLE_EQ(b.raw, 1.0);

    const auto over = estimate_visibility(100, 5, 1000, 0.01, 0.99);
    EXPECT_GT(over.raw, 1.0);
    EXPECT_EQ(over.value, 1.0);

    EXPECT_FALSE(estimate_visibility(0, 0, 0, 0.0, 0.99).available);
    EXPECT_FALSE(estimate_visibility(0, 0, 100, 0.0, 0.99).available);
}

TEST(Session, StepOrderEnforced)
{
    const auto r = sim::run_simulation(config(1000));
    Session s({r.alice_kinds}, {r.records}, r.config.params);
    EXPECT_THROW(s.step3_bitboundary_audit(), std::logic_error);
    EXPECT_THROW(s.step4_sift_and_rate(), std::logic_error);
    s.step2_decoy_audit();
    EXPECT_THROW(s.step2_decoy_audit(), std::logic_error);
    EXPECT_THROW(s.step4_sift_and_rate(), std::logic_error);
    s.step3_bitboundary_audit();
    EXPECT_NO_THROW(s.step4_sift_and_rate());
}

TEST(Session, RejectsMismatchedViews)
{
    std::vector<FrameKind> kinds(3, FrameKind::bit0);
    std::vector<std::uint8_t> rec(6, 0);
    EXPECT_THROW(Session({kinds}, {rec}, SystemParams{}), InvalidParameter);
}

TEST(Session, HandBuiltBoundaryAudit)
{
    // frames: 1 0 d 1 0 0 ; "1,0" boundaries at slots 2 and 8
    const std::vector<FrameKind> kinds{FrameKind::bit1,  FrameKind::bit0, FrameKind::decoy,
                                       FrameKind::bit1, FrameKind::bit0, FrameKind::bit0};
    std::vector<std::uint8_t> rec(13, 0);
    rec[2] = sim::click::m1;    // "1,0" boundary
    rec[8] = sim::click::m2;    // "1,0" boundary
    rec[10] = sim::click::m2;   // "0,0" boundary: not counted
    rec[4] = sim::click::m2;    // touches the decoy: not announced
    rec[5] = sim::click::m1;    // decoy check
    SystemParams p;
    p.p_d = 0.0;
    Session s({kinds}, {rec}, p);
    const auto& d = s.step2_decoy_audit();
    EXPECT_EQ(d.decoy_frames, std::vector<std::uint64_t>{2});
    EXPECT_EQ(d.v_d.n_m1, 1u);
    EXPECT_EQ(d.v_d.n_m2, 0u);
    const auto& b = s.step3_bitboundary_audit();
    EXPECT_EQ(b.all_boundaries, 5u);
    EXPECT_EQ(b.boundaries, 3u);  // (0,1), (3,4), (4,5)
    EXPECT_EQ(b.ten_boundaries, 2u);
    EXPECT_EQ(b.v_10.n_m1, 1u);
    EXPECT_EQ(b.v_10.n_m2, 1u);
    EXPECT_EQ(b.disclosed_frames, (std::vector<std::uint64_t>{0, 1, 3, 4}));

    // Bob's announcements never include the decoy-adjacent slot.
    for (const auto& m : s.transcript().messages) {
        if (m.sender == "bob" && m.topic.starts_with("boundary")) {
            EXPECT_EQ(std::count(m.items.begin(), m.items.end(), 4u), 0);
        }
    }
}

TEST(Session, InformationHygiene)
{
    auto c = config(200'000);
    c.strategy = {.beam_split = true, .p_ir = 0.1, .p_2c = 0.2};
    auto r = sim::run_simulation(c);
    const auto reference = dump(run_protocol(r));

    KeyedRng garbage(999, 0, 0);
    for (auto& e : r.eve) e = static_cast<std::uint8_t>(garbage.next());
    r.stats = sim::RawStats{};
    r.stats.decoy_m2 = 12345;
    r.config.strategy = {.beam_split = false, .p_ir = 0.0, .p_2c = 0.9};
    EXPECT_EQ(dump(run_protocol(r)), reference);
}

TEST(Session, BitAccountingIsDisjoint)
{
    auto c = config(300'000);
    c.params.p_d = 1e-3;
    const auto r = sim::run_simulation(c);
    const auto o = run_protocol(r, {.sample_fraction = 0.2, .confidence = 0.99, .seed = 7});
    ASSERT_FALSE(o.aborted) << o.abort_reason;
    const auto& st = o.stats;
    EXPECT_EQ(st.n_sampled + st.n_disclosed + st.n_key_bits, st.n_raw_bits);
    EXPECT_GT(st.n_disclosed, 0u);

    std::vector<std::uint64_t> both;
    std::set_intersection(o.sampled_frames.begin(), o.sampled_frames.end(), o.key_frames.begin(),
                          o.key_frames.end(), std::back_inserter(both));
    EXPECT_TRUE(both.empty());

    // No decoy frame contributes to the sample or the key.
    for (auto j : o.sampled_frames) EXPECT_NE(r.alice_kinds[j], FrameKind::decoy);
    for (auto j : o.key_frames) EXPECT_NE(r.alice_kinds[j], FrameKind::decoy);

    // Sample fraction is honoured.
    const double frac = static_cast<double>(st.n_sampled) / static_cast<double>(st.n_raw_bits);
    EXPECT_NEAR(frac, 0.2, 3 * std::sqrt(0.16 / st.n_raw_bits));
}

TEST(Session, DecoyDetectionsRemoved)
{
    auto c = config(100'000);
    c.params.f = 0.5;
    const auto r = sim::run_simulation(c);
    Session s({r.alice_kinds}, {r.records}, c.params);
    const auto& d = s.step2_decoy_audit();
    std::uint64_t decoy_clicks = 0;
    std::uint64_t data_clicks = 0;
    for (std::uint64_t j = 0; j < c.n_frames; ++j) {
        const bool hit = ((r.records[2 * j] | r.records[2 * j + 1]) & sim::click::db) != 0;
        (r.alice_kinds[j] == FrameKind::decoy ? decoy_clicks : data_clicks) += hit;
    }
    EXPECT_EQ(d.removed_detections, decoy_clicks);
    s.step3_bitboundary_audit();
    EXPECT_EQ(s.step4_sift_and_rate().stats.n_raw_bits, data_clicks);
}

TEST(Session, IdealRun)
{
    auto c = config(500'000);
    c.params.p_d = 0.0;
    const auto r = sim::run_simulation(c);
    const auto o = run_protocol(r);
    ASSERT_FALSE(o.aborted) << o.abort_reason;
    EXPECT_EQ(o.stats.v_d.n_m2, 0u);
    EXPECT_EQ(o.stats.v_10.n_m2, 0u);
    EXPECT_EQ(o.stats.v_d.value, 1.0);
    EXPECT_EQ(o.stats.v_10.value, 1.0);
    EXPECT_EQ(o.inferred.p_ir, 0.0);
    EXPECT_EQ(o.inferred.p_2c, 0.0);
    ASSERT_TRUE(o.measured);
    EXPECT_EQ(o.measured->q, 0.0);
    EXPECT_EQ(o.measured->q_prime, 0.0);
    const double lost = c.params.mu * (1.0 - c.params.t());
    EXPECT_DOUBLE_EQ(o.measured->secret_rate, o.stats.r_b * (1.0 - lost));
}

TEST(Session, TenFractionIsIid)
{
    const auto r = sim::run_simulation(config(400'000));
    Session s({r.alice_kinds}, {r.records}, r.config.params);
    s.step2_decoy_audit();
    const auto& b = s.step3_bitboundary_audit();
    const double want = analytic::ten_prefactor(0.1, analytic::TenConvention::iid);
    EXPECT_NEAR(b.ten_fraction, want, 3 * std::sqrt(want * (1 - want) / 4e5));
}

TEST(Session, EqualVisibilitiesInferNoTwoCoherent)
{
    // Lossless line with intercept-resend only: both visibilities drop alike.
    auto c = config(2'000'000);
    c.params.distance_km = 0.0;
    c.strategy.p_ir = 0.4;
    const auto o = run_protocol(sim::run_simulation(c));
    ASSERT_FALSE(o.aborted) << o.abort_reason;
    EXPECT_LE(std::abs(o.inferred.p_2c_raw), o.inferred.tolerance);
    EXPECT_TRUE(within_3sigma(o.stats.v_d, 0.6));
    EXPECT_TRUE(within_3sigma(o.stats.v_10, 0.6));
}

TEST(Session, MixedAttackInference)
{
    auto c = config(2'000'000);
    c.strategy = {.beam_split = true, .p_ir = 0.1, .p_2c = 0.2};
    const auto o = run_protocol(sim::run_simulation(c));
    ASSERT_FALSE(o.aborted) << o.abort_reason;
    EXPECT_TRUE(within_3sigma(o.stats.v_10, 0.9));
    EXPECT_TRUE(within_3sigma(o.stats.v_d, 0.7));
    EXPECT_LE(std::abs(o.inferred.p_ir - 0.1), o.inferred.tolerance);
    EXPECT_LE(std::abs(o.inferred.p_2c - 0.2), o.inferred.tolerance);
    EXPECT_LT(o.measured->secret_rate, analytic::secret_rate(c.params, EveStrategy{}).secret_rate);
}

TEST(Session, EstimatorScalesAsInverseRootN)
{
    auto c = config(100'000);
    c.params.distance_km = 0.0;
    c.params.visibility = 0.95;
    const auto small = run_protocol(sim::run_simulation(c));
    c.n_frames = 10'000'000;
    const auto large = run_protocol(sim::run_simulation(c));
    for (auto pick : {&SiftedStats::v_d, &SiftedStats::v_10}) {
        const auto& a = small.stats.*pick;
        const auto& b = large.stats.*pick;
        // ~50 decoy signal clicks at 1e5 frames: the ratio itself is ~7% noisy
        EXPECT_NEAR(a.sigma_at(0.95) / b.sigma_at(0.95), 10.0, 2.5);
        EXPECT_LE(std::abs(b.raw - 0.95), 3 * b.sigma_at(0.95));
        EXPECT_LE(std::abs(a.raw - 0.95), 3 * a.sigma_at(0.95));
    }
}

TEST(Abort, NoRawBits)
{
    auto c = config(1000);
    c.params.mu = 0.0;
    c.params.p_d = 0.0;
    const auto o = run_protocol(sim::run_simulation(c));
    EXPECT_TRUE(o.aborted);
    EXPECT_FALSE(o.measured);
    EXPECT_NE(o.abort_reason.find("QBER"), std::string::npos);
}

TEST(Abort, NoMonitorSignal)
{
    // Many data clicks, but the monitor detectors never fire.
    std::vector<FrameKind> kinds;
    for (int i = 0; i < 400; ++i) kinds.push_back(i % 3 == 2 ? FrameKind::decoy : (i % 2 ? FrameKind::bit1 : FrameKind::bit0));
    std::vector<std::uint8_t> rec(2 * kinds.size() + 1, 0);
    for (std::size_t j = 0; j < kinds.size(); ++j) rec[2 * j + (kinds[j] == FrameKind::bit1)] = sim::click::db;
    SystemParams p;
    p.p_d = 0.0;
    Session s({kinds}, {rec}, p, {.sample_fraction = 0.5});
    const auto o = s.run();
    EXPECT_TRUE(o.aborted);
    EXPECT_NE(o.abort_reason.find("visibility"), std::string::npos);
    EXPECT_EQ(o.stats.n_sample_errors, 0u);
}

namespace {

// Alternating 1,0 frames with a decoy every fourth frame; monitor clicks at
// the checks are chosen to produce given visibilities.
Outcome synthetic(double v_d, double v_10, SystemParams p)
{
    std::vector<FrameKind> kinds;
    for (int i = 0; i < 40'000; ++i) {
        kinds.push_back(i % 4 == 3 ? FrameKind::decoy : (i % 2 == 0 ? FrameKind::bit1 : FrameKind::bit0));
    }
    std::vector<std::uint8_t> rec(2 * kinds.size() + 1, 0);
    int nd = 0;
    int nt = 0;
    for (std::size_t j = 0; j < kinds.size(); ++j) {
        rec[2 * j + (kinds[j] == FrameKind::bit1)] |= sim::click::db;
        if (kinds[j] == FrameKind::decoy) {
            rec[2 * j + 1] |= (nd++ % 100) < 50 * (1 + v_d) ? sim::click::m1 : sim::click::m2;
        }
        if (j + 1 < kinds.size() && kinds[j] == FrameKind::bit1 && kinds[j + 1] == FrameKind::bit0) {
            rec[2 * j + 2] |= (nt++ % 100) < 50 * (1 + v_10) ? sim::click::m1 : sim::click::m2;
        }
    }
    p.p_d = 0.0;
    Session s({kinds}, {rec}, p);
    return s.run();
}

}  // namespace

TEST(Abort, DecoyVisibilityAboveBoundary)
{
    SystemParams p;
    const auto ok = synthetic(0.8, 0.8, p);
    ASSERT_FALSE(ok.aborted) << ok.abort_reason;
    EXPECT_NEAR(ok.inferred.p_2c_raw, 0.0, 1e-12);

    const auto bad = synthetic(1.0, 0.2, p);
    EXPECT_TRUE(bad.aborted);
    EXPECT_NE(bad.abort_reason.find("decoy visibility"), std::string::npos);
}

TEST(Abort, AttackMassExceedsBudget)
{
    SystemParams p;
    p.mu = 1.5;
    p.alpha_db_per_km = 1.0;
    p.distance_km = 3.010299956639812;  // t = 0.5, budget 0.25
    const auto o = synthetic(0.0, 0.0, p);
    EXPECT_TRUE(o.aborted);
    EXPECT_NE(o.abort_reason.find("1 - mu(1-t)"), std::string::npos);
}

TEST(Abort, ClipsToFeasibleRegion)
{
    SystemParams p;
    p.distance_km = 0.0;
    const auto o = synthetic(0.3, 1.0, p);
    ASSERT_FALSE(o.aborted) << o.abort_reason;
    EXPECT_EQ(o.inferred.p_ir, 0.0);
    EXPECT_NEAR(o.inferred.p_2c, 0.7, 1e-12);
}
