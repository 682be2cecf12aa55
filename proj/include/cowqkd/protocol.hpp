#pragma once

// Classical post-processing: decoy audit, bit-boundary audit, sifting and the
// measured secret-rate estimate. A Session only sees Alice's frame list, Bob's
// click records and the public transcript it writes itself.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cowqkd/analytic.hpp"
#include "cowqkd/errors.hpp"
#include "cowqkd/params.hpp"
#include "cowqkd/rng.hpp"
#include "cowqkd/simkernel.hpp"

namespace cow::protocol {

using sim::FrameKind;

struct AliceView {
    std::span<const FrameKind> kinds;
};

struct BobView {
    std::span<const std::uint8_t> records;  ///< 2N+1 per-slot click flags
};

/// One public announcement.
struct Message {
    std::string sender;
    std::string topic;
    std::vector<std::uint64_t> items;
    std::uint64_t value = 0;
};

struct Transcript {
    std::deque<Message> messages;  // stable references across posts

    const Message& post(std::string sender, std::string topic, std::vector<std::uint64_t> items = {},
                        std::uint64_t value = 0)
    {
        messages.push_back({std::move(sender), std::move(topic), std::move(items), value});
        return messages.back();
    }
};

struct Options {
    double sample_fraction = 0.1;  ///< share of raw bits disclosed to measure Q
    double confidence = 0.99;      ///< two-sided level of the visibility intervals
    std::uint64_t seed = 42;       ///< public sampling randomness
};

/// z such that a standard normal lies in [-z, z] with the given probability.
inline double normal_quantile(double confidence)
{
    detail::require(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0,1)");
    const double tail = 1.0 - confidence;
    double lo = 0.0;
    double hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::erfc(mid / std::sqrt(2.0)) > tail ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Visibility from click counts at coherence-checked slots:
/// v = (n1 - n2) / (n1 + n2 - 2 b), with b = checks * p_d the expected dark
/// clicks per detector.
struct VisibilityEstimate {
    std::uint64_t checks = 0;
    std::uint64_t n_m1 = 0;
    std::uint64_t n_m2 = 0;
    double dark_per_detector = 0.0;
    double raw = 0.0;         ///< unclipped
    double value = 0.0;       ///< clipped to [0,1]
    double half_width = 0.0;  ///< normal-approximation interval
    bool available = false;

    double signal() const { return static_cast<double>(n_m1 + n_m2) - 2.0 * dark_per_detector; }

    /// Delta-method standard deviation assuming true visibility v0 and the
    /// observed total signal.
    double sigma_at(double v0) const
    {
        const double s = signal();
        if (!(s > 0.0)) {
            return 0.0;
        }
        const double e1 = s * (1.0 + v0) / 2.0 + dark_per_detector;
        const double e2 = s * (1.0 - v0) / 2.0 + dark_per_detector;
        const double b = dark_per_detector;
        const double var = 4.0 * ((e2 - b) * (e2 - b) * e1 + (e1 - b) * (e1 - b) * e2) / (s * s * s * s);
        return std::sqrt(var);
    }

    double z_score(double v0) const
    {
        const double sd = sigma_at(v0);
        if (sd == 0.0) {
            const double inf = std::numeric_limits<double>::infinity();
            return raw == v0 ? 0.0 : (raw > v0 ? inf : -inf);
        }
        return (raw - v0) / sd;
    }
};

inline VisibilityEstimate estimate_visibility(std::uint64_t n_m1, std::uint64_t n_m2, std::uint64_t checks,
                                              double p_d, double confidence)
{
    VisibilityEstimate e;
    e.checks = checks;
    e.n_m1 = n_m1;
    e.n_m2 = n_m2;
    e.dark_per_detector = static_cast<double>(checks) * p_d;
    const double s = e.signal();
    if (checks == 0 || !(s > 0.0)) {
        return e;
    }
    e.available = true;
    e.raw = (static_cast<double>(n_m1) - static_cast<double>(n_m2)) / s;
    e.value = std::clamp(e.raw, 0.0, 1.0);
    const double b = e.dark_per_detector;
    const double n1 = static_cast<double>(n_m1);
    const double n2 = static_cast<double>(n_m2);
    const double var = 4.0 * ((n2 - b) * (n2 - b) * n1 + (n1 - b) * (n1 - b) * n2) / (s * s * s * s);
    e.half_width = normal_quantile(confidence) * std::sqrt(var);
    return e;
}

struct DecoyAudit {
    std::vector<std::uint64_t> decoy_frames;
    std::uint64_t removed_detections = 0;  ///< Bob's data clicks dropped from the raw key
    VisibilityEstimate v_d;
};

struct BoundaryAudit {
    std::uint64_t boundaries = 0;      ///< adjacent non-decoy frame pairs
    std::uint64_t ten_boundaries = 0;  ///< of those, "1,0" (announced by Alice)
    std::uint64_t all_boundaries = 0;  ///< N - 1
    double ten_fraction = 0.0;         ///< ten_boundaries / all_boundaries
    std::vector<std::uint64_t> disclosed_frames;
    VisibilityEstimate v_10;
};

struct SiftedStats {
    std::uint64_t n_frames_sent = 0;
    std::uint64_t n_decoy_frames = 0;
    std::uint64_t n_raw_bits = 0;      ///< data-line detections on non-decoy frames
    std::uint64_t n_sampled = 0;
    std::uint64_t n_sample_errors = 0;
    std::uint64_t n_disclosed = 0;     ///< raw bits revealed by the boundary audit
    std::uint64_t n_key_bits = 0;      ///< retained for error correction
    double r_b = 0.0;
    double measured_q = 0.0;
    double double_count_rate = 0.0;    ///< per slot
    std::uint64_t double_counts = 0;
    std::uint64_t n_slots = 0;
    VisibilityEstimate v_d;
    VisibilityEstimate v_10;
    double ten_fraction = 0.0;
    double ten_prefactor_printed = 0.0;
    double ten_prefactor_iid = 0.0;
};

struct Inference {
    double p_ir = 0.0;
    double p_2c = 0.0;
    double p_ir_raw = 0.0;
    double p_2c_raw = 0.0;
    double tolerance = 0.0;
};

struct Outcome {
    SiftedStats stats;
    Inference inferred;
    std::optional<analytic::KeyRateReport> measured;  ///< empty when aborted
    bool aborted = false;
    std::string abort_reason;
    std::vector<std::uint64_t> sampled_frames;
    std::vector<std::uint64_t> key_frames;
};

/// Runs the post-processing steps in order over one run.
class Session {
public:
    Session(AliceView alice, BobView bob, SystemParams calibration, Options opt = {})
        : alice_(alice), bob_(bob), params_(calibration), opt_(opt)
    {
        params_.validate();
        detail::require(bob_.records.size() == 2 * alice_.kinds.size() + 1,
                        "Bob's record must hold 2N+1 slots for N frames");
        detail::require(opt_.sample_fraction >= 0.0 && opt_.sample_fraction <= 1.0,
                        "sample_fraction must lie in [0,1]");
    }

    std::uint64_t n_frames() const { return alice_.kinds.size(); }
    const Transcript& transcript() const { return transcript_; }

    /// Alice reveals the decoy frames; Bob drops their data clicks and counts
    /// monitor clicks at the second slot of each decoy.
    const DecoyAudit& step2_decoy_audit()
    {
        if (decoy_) {
            throw std::logic_error("step2 already done");
        }
        DecoyAudit a;
        for (std::uint64_t j = 0; j < n_frames(); ++j) {
            if (alice_.kinds[j] == FrameKind::decoy) {
                a.decoy_frames.push_back(j);
            }
        }
        const auto& msg = transcript_.post("alice", "decoy_frames", a.decoy_frames);

        is_decoy_.assign(n_frames(), false);
        std::uint64_t m1 = 0;
        std::uint64_t m2 = 0;
        for (auto j : msg.items) {
            is_decoy_[j] = true;
            const auto first = bob_.records[2 * j];
            const auto second = bob_.records[2 * j + 1];
            a.removed_detections += ((first | second) & sim::click::db) != 0;
            m1 += (second & sim::click::m1) != 0;
            m2 += (second & sim::click::m2) != 0;
        }
        a.v_d = estimate_visibility(m1, m2, msg.items.size(), params_.p_d, opt_.confidence);
        decoy_ = std::move(a);
        return *decoy_;
    }

    /// Bob announces monitor clicks at the boundaries of adjacent non-decoy
    /// frames; Alice answers which of them follow a "1,0" pair and how many
    /// "1,0" boundaries she sent. Frames named in her answer are disclosed.
    const BoundaryAudit& step3_bitboundary_audit()
    {
        if (!decoy_) {
            throw std::logic_error("step3 requires step2");
        }
        if (boundary_) {
            throw std::logic_error("step3 already done");
        }
        BoundaryAudit a;
        a.all_boundaries = n_frames() > 0 ? n_frames() - 1 : 0;
        std::vector<std::uint64_t> m1_slots;
        std::vector<std::uint64_t> m2_slots;
        for (std::uint64_t j = 0; j + 1 < n_frames(); ++j) {
            if (is_decoy_[j] || is_decoy_[j + 1]) {
                continue;
            }
            a.boundaries += 1;
            const std::uint64_t slot = 2 * j + 2;
            const auto flags = bob_.records[slot];
            if (flags & sim::click::m1) m1_slots.push_back(slot);
            if (flags & sim::click::m2) m2_slots.push_back(slot);
        }
        const auto& bob_m1 = transcript_.post("bob", "boundary_m1_slots", m1_slots);
        const auto& bob_m2 = transcript_.post("bob", "boundary_m2_slots", m2_slots);

        // Alice's side.
        auto is_ten = [&](std::uint64_t slot) {
            const std::uint64_t j = (slot - 2) / 2;
            return alice_.kinds[j] == FrameKind::bit1 && alice_.kinds[j + 1] == FrameKind::bit0;
        };
        std::uint64_t ten_count = 0;
        for (std::uint64_t j = 0; j + 1 < n_frames(); ++j) {
            ten_count += alice_.kinds[j] == FrameKind::bit1 && alice_.kinds[j + 1] == FrameKind::bit0;
        }
        std::vector<std::uint64_t> ten_m1;
        std::vector<std::uint64_t> ten_m2;
        std::copy_if(bob_m1.items.begin(), bob_m1.items.end(), std::back_inserter(ten_m1), is_ten);
        std::copy_if(bob_m2.items.begin(), bob_m2.items.end(), std::back_inserter(ten_m2), is_ten);
        transcript_.post("alice", "ten_m1_slots", ten_m1);
        transcript_.post("alice", "ten_m2_slots", ten_m2);
        const auto& count_msg = transcript_.post("alice", "ten_boundary_count", {}, ten_count);

        for (const auto* list : {&ten_m1, &ten_m2}) {
            for (auto slot : *list) {
                const std::uint64_t j = (slot - 2) / 2;
                a.disclosed_frames.push_back(j);
                a.disclosed_frames.push_back(j + 1);
            }
        }
        std::sort(a.disclosed_frames.begin(), a.disclosed_frames.end());
        a.disclosed_frames.erase(std::unique(a.disclosed_frames.begin(), a.disclosed_frames.end()),
                                 a.disclosed_frames.end());

        a.ten_boundaries = count_msg.value;
        a.ten_fraction =
            a.all_boundaries > 0 ? static_cast<double>(a.ten_boundaries) / static_cast<double>(a.all_boundaries) : 0.0;
        a.v_10 = estimate_visibility(ten_m1.size(), ten_m2.size(), a.ten_boundaries, params_.p_d, opt_.confidence);
        boundary_ = std::move(a);
        return *boundary_;
    }

    /// Bob reveals his detected frames, a public random sample measures Q,
    /// the attack mix is inferred from the two visibilities and the
    /// model-restricted I(B:E) bound gives the secret fraction.
    Outcome step4_sift_and_rate()
    {
        if (!boundary_) {
            throw std::logic_error("step4 requires step3");
        }
        Outcome out;
        auto& st = out.stats;
        st.n_frames_sent = n_frames();
        st.n_decoy_frames = decoy_->decoy_frames.size();
        st.v_d = decoy_->v_d;
        st.v_10 = boundary_->v_10;
        st.ten_fraction = boundary_->ten_fraction;
        st.ten_prefactor_printed = analytic::ten_prefactor(params_.f, analytic::TenConvention::printed);
        st.ten_prefactor_iid = analytic::ten_prefactor(params_.f, analytic::TenConvention::iid);
        st.n_slots = bob_.records.size();
        for (auto flags : bob_.records) {
            st.double_counts += (flags & sim::click::double_count) != 0;
        }
        st.double_count_rate = static_cast<double>(st.double_counts) / static_cast<double>(st.n_slots);

        // Bob's bits.
        std::vector<std::uint64_t> detected;
        std::vector<std::uint8_t> bob_bits;
        for (std::uint64_t j = 0; j < n_frames(); ++j) {
            if (is_decoy_[j]) {
                continue;
            }
            const bool early = bob_.records[2 * j] & sim::click::db;
            const bool late = bob_.records[2 * j + 1] & sim::click::db;
            if (!early && !late) {
                continue;
            }
            std::uint8_t bit = late ? 1 : 0;
            if (early && late) {
                KeyedRng local(opt_.seed, j, stream::protocol + 1);
                bit = local.bernoulli(0.5) ? 1 : 0;
            }
            detected.push_back(j);
            bob_bits.push_back(bit);
        }
        transcript_.post("bob", "detected_frames", detected);
        st.n_raw_bits = detected.size();
        st.r_b = static_cast<double>(st.n_raw_bits) / static_cast<double>(n_frames());

        const auto& disclosed = boundary_->disclosed_frames;
        std::vector<std::uint64_t> sample_msg;
        for (std::size_t i = 0; i < detected.size(); ++i) {
            const std::uint64_t j = detected[i];
            KeyedRng pub(opt_.seed, j, stream::protocol);
            const bool sampled = pub.bernoulli(opt_.sample_fraction);
            if (sampled) {
                sample_msg.push_back(j);
                out.sampled_frames.push_back(j);
                const std::uint8_t alice_bit = alice_.kinds[j] == FrameKind::bit1 ? 1 : 0;
                st.n_sample_errors += alice_bit != bob_bits[i];
            } else if (std::binary_search(disclosed.begin(), disclosed.end(), j)) {
                st.n_disclosed += 1;
            } else {
                out.key_frames.push_back(j);
            }
        }
        transcript_.post("both", "sampled_frames", sample_msg);
        st.n_sampled = out.sampled_frames.size();
        st.n_key_bits = out.key_frames.size();

        auto abort = [&](std::string why) {
            out.aborted = true;
            out.abort_reason = std::move(why);
            return out;
        };
        if (st.n_sampled == 0) {
            return abort("no raw bits sampled: QBER unavailable");
        }
        st.measured_q = static_cast<double>(st.n_sample_errors) / static_cast<double>(st.n_sampled);
        if (!st.v_d.available || !st.v_10.available) {
            return abort("visibility estimate unavailable (no monitor signal at checked slots)");
        }

        // Strategy inversion under the two-attack model.
        auto& inf = out.inferred;
        inf.p_ir_raw = 1.0 - st.v_10.raw;
        inf.p_2c_raw = st.v_10.raw - st.v_d.raw;
        inf.tolerance = std::hypot(st.v_d.half_width, st.v_10.half_width);
        if (inf.p_2c_raw < -inf.tolerance) {
            return abort("decoy visibility exceeds boundary visibility beyond tolerance");
        }
        const double lost = params_.mu * (1.0 - params_.t());
        const double budget = std::max(0.0, 1.0 - lost);
        const double mass = std::max(0.0, inf.p_ir_raw) + std::max(0.0, inf.p_2c_raw);
        if (mass > budget + inf.tolerance) {
            return abort("inferred attack mass exceeds 1 - mu(1-t)");
        }
        inf.p_ir = std::clamp(inf.p_ir_raw, 0.0, budget);
        inf.p_2c = std::clamp(inf.p_2c_raw, 0.0, budget - inf.p_ir);

        analytic::EveInfoTerms x;
        x.lost_fraction = lost;
        x.attack_mass = inf.p_ir + inf.p_2c;
        x.r_b = st.r_b;
        x.q = std::min(st.measured_q, 1.0);
        x.r_b_prime = std::max(0.0, analytic::raw_rate_eve_attributable(params_, st.r_b));
        x.q_prime = analytic::eve_q_prime(params_);
        out.measured = analytic::report_from_terms(x, {st.v_d.value, st.v_10.value}, params_.small_signal_ok());
        return out;
    }

    /// All three steps.
    Outcome run()
    {
        step2_decoy_audit();
        step3_bitboundary_audit();
        return step4_sift_and_rate();
    }

private:
    AliceView alice_;
    BobView bob_;
    SystemParams params_;
    Options opt_;
    Transcript transcript_;
    std::vector<bool> is_decoy_;
    std::optional<DecoyAudit> decoy_;
    std::optional<BoundaryAudit> boundary_;
};

/// Post-processing of a simulated run. Eve's annotations are not passed on.
inline Outcome run_protocol(const sim::SimulationResult& r, Options opt = {})
{
    Session s({r.alice_kinds}, {r.records}, r.config.params, opt);
    return s.run();
}

}  // namespace cow::protocol
