#pragma once

// Pulse-level Monte Carlo of the coherent one-way protocol.
//
// Indexing is 0-based and in increasing time: frame j occupies slots 2j
// (first pulse) and 2j+1 (second pulse). The one-pulse-delay interferometer
// output at slot s mixes pulses s-1 and s, so
//   * slot 2j+1 checks the coherence inside frame j (decoy check), and
//   * slot 2j+2 checks the coherence across the boundary of frames j, j+1
//     (the "1,0" check when frame j is bit 1 and frame j+1 is bit 0).
// A run of N frames yields 2N+1 detection slots; slot 0 and slot 2N see one
// empty interferometer arm and are never used as coherence checks.
//
// Coherence is tracked with integer group tags: two adjacent coherent pulses
// interfere iff their tags match. Intercept-resend replaces pulses by single
// photons, which interfere with nothing.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <new>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cowqkd/analytic.hpp"
#include "cowqkd/params.hpp"
#include "cowqkd/rng.hpp"

namespace cow::sim {

enum class FrameKind : std::uint8_t { bit0 = 0, bit1 = 1, decoy = 2 };

inline const char* to_string(FrameKind k)
{
    switch (k) {
    case FrameKind::bit0: return "bit0";
    case FrameKind::bit1: return "bit1";
    case FrameKind::decoy: return "decoy";
    }
    return "?";
}

/// Decoy with probability f, otherwise bit 0 / bit 1 with equal probability.
inline FrameKind sample_kind(double u, double f)
{
    if (u < f) {
        return FrameKind::decoy;
    }
    return u < f + 0.5 * (1.0 - f) ? FrameKind::bit0 : FrameKind::bit1;
}

enum class AttackMode : std::uint8_t { none = 0, intercept_resend = 1, two_coherent = 2 };

/// Where a single photon ends up inside Bob's station.
enum class PhotonRoute : std::uint8_t { none = 0, data, short_m1, short_m2, long_m1, long_m2 };

/// Branching of a single photon: data line with probability t_B, otherwise
/// one of the two interferometer arms and one of the two outputs, uniformly.
inline PhotonRoute route_single_photon(double u, double t_b)
{
    if (u < t_b) {
        return PhotonRoute::data;
    }
    const int cell = std::min(3, static_cast<int>((u - t_b) / (1.0 - t_b) * 4.0));
    return static_cast<PhotonRoute>(static_cast<int>(PhotonRoute::short_m1) + cell);
}

struct Slot {
    std::uint64_t index = 0;
    double intensity = 0.0;   ///< mean photon number of the coherent pulse
    std::uint64_t group = 0;  ///< coherence tag, 0 = Alice's original phase reference
    bool photon = false;      ///< a single resent photon occupies the slot
    PhotonRoute route = PhotonRoute::none;

    bool coherent() const { return !photon && intensity > 0.0; }
};

struct PulseTrain {
    std::vector<Slot> slots;
    std::vector<FrameKind> kinds;
};

/// Per-frame diagnostic flags. Never read by the protocol layer.
namespace eve_flag {
inline constexpr std::uint8_t de_fired = 1;
inline constexpr std::uint8_t intercept_resend = 2;
inline constexpr std::uint8_t two_coherent = 4;
inline constexpr std::uint8_t knows_bit = 8;
}  // namespace eve_flag

/// Per-slot detector flags.
namespace click {
inline constexpr std::uint8_t db = 1;
inline constexpr std::uint8_t m1 = 2;
inline constexpr std::uint8_t m2 = 4;
inline constexpr std::uint8_t double_count = 8;
}  // namespace click

struct RunConfig {
    SystemParams params;
    EveStrategy strategy;
    std::uint64_t n_frames = 1'000'000;
    std::uint64_t seed = 42;
    /// Eve holds one attack mode for this many consecutive frames.
    std::uint64_t attack_block_frames = 64;
    /// Worker threads; 0 defers to COWSIM_THREADS, then to the hardware.
    unsigned threads = 0;

    void validate() const
    {
        params.validate();
        strategy.check_feasible(params);
        detail::require(n_frames >= 1, "n_frames must be >= 1");
        detail::require(attack_block_frames >= 1, "attack_block_frames must be >= 1");
    }
};

inline AttackMode attack_mode(const RunConfig& cfg, std::uint64_t frame)
{
    const auto& s = cfg.strategy;
    if (s.p_ir == 0.0 && s.p_2c == 0.0) {
        return AttackMode::none;
    }
    KeyedRng rng(cfg.seed, frame / cfg.attack_block_frames, stream::attack);
    const double u = rng.uniform();
    if (u < s.p_ir) {
        return AttackMode::intercept_resend;
    }
    return u < s.p_ir + s.p_2c ? AttackMode::two_coherent : AttackMode::none;
}

// Tags: 0 original, odd = unique per resent slot, even > 0 = shared by a 2c pair.
inline std::uint64_t resent_group(std::uint64_t slot) { return 2 * slot + 1; }
inline std::uint64_t pair_group(std::uint64_t owner_frame) { return 2 * owner_frame + 2; }

/// Alice's emitted pulses for one frame.
inline std::array<double, 2> emitted_intensities(FrameKind k, double mu)
{
    switch (k) {
    case FrameKind::bit0: return {mu, 0.0};
    case FrameKind::bit1: return {0.0, mu};
    case FrameKind::decoy: return {mu, mu};
    }
    return {0.0, 0.0};
}

struct FrameState {
    FrameKind kind = FrameKind::bit0;
    std::array<Slot, 2> slots{};
    std::uint8_t eve = 0;
};

inline FrameState emit_frame(std::uint64_t frame, FrameKind kind, double mu)
{
    FrameState fs;
    fs.kind = kind;
    const auto in = emitted_intensities(kind, mu);
    for (int i = 0; i < 2; ++i) {
        fs.slots[i].index = 2 * frame + i;
        fs.slots[i].intensity = in[i];
    }
    return fs;
}

/// Channel loss plus Eve's action on one frame. Consumes `rng` after the
/// kind draw.
inline void transmit_frame(FrameState& fs, std::uint64_t frame, const RunConfig& cfg, KeyedRng& rng)
{
    const auto& p = cfg.params;
    const double t = p.t();
    const AttackMode mode = attack_mode(cfg, frame);
    const AttackMode prev = frame > 0 ? attack_mode(cfg, frame - 1) : AttackMode::none;

    bool de_fired = false;
    for (auto& s : fs.slots) {
        if (s.intensity <= 0.0) {
            continue;
        }
        if (cfg.strategy.beam_split && rng.bernoulli(-std::expm1(-s.intensity * (1.0 - t)))) {
            de_fired = true;
        }
        s.intensity *= t;
    }
    if (de_fired) {
        fs.eve |= eve_flag::de_fired | eve_flag::knows_bit;
    }

    // Coherence tags. The pair owned by frame j is (2j+1, 2j+2).
    if (prev == AttackMode::two_coherent) {
        fs.slots[0].group = pair_group(frame - 1);
    }
    if (mode == AttackMode::two_coherent) {
        fs.slots[1].group = pair_group(frame);
        fs.eve |= eve_flag::two_coherent | eve_flag::knows_bit;
    }

    if (mode == AttackMode::intercept_resend) {
        fs.eve |= eve_flag::intercept_resend;
        for (auto& s : fs.slots) {
            s.group = resent_group(s.index);
            if (s.intensity <= 0.0) {
                continue;
            }
            const bool caught = rng.bernoulli(-std::expm1(-s.intensity));
            s.intensity = 0.0;
            if (caught) {
                s.photon = true;
                fs.eve |= eve_flag::knows_bit;
            }
        }
    }

    for (auto& s : fs.slots) {
        if (s.photon) {
            s.route = route_single_photon(rng.uniform(), p.t_b);
        }
    }
}

/// The frame as it reaches Bob, regenerated from (seed, frame) alone.
inline FrameState channel_frame(const RunConfig& cfg, std::uint64_t frame)
{
    KeyedRng rng(cfg.seed, frame, stream::source);
    FrameState fs = emit_frame(frame, sample_kind(rng.uniform(), cfg.params.f), cfg.params.mu);
    transmit_frame(fs, frame, cfg, rng);
    return fs;
}

/// Alice's emitted train for a run.
inline PulseTrain generate_train(const RunConfig& cfg)
{
    cfg.validate();
    PulseTrain train;
    train.kinds.reserve(cfg.n_frames);
    train.slots.reserve(2 * cfg.n_frames);
    for (std::uint64_t j = 0; j < cfg.n_frames; ++j) {
        KeyedRng rng(cfg.seed, j, stream::source);
        const auto fs = emit_frame(j, sample_kind(rng.uniform(), cfg.params.f), cfg.params.mu);
        train.kinds.push_back(fs.kind);
        train.slots.push_back(fs.slots[0]);
        train.slots.push_back(fs.slots[1]);
    }
    return train;
}

/// Train built from a fixed list of frame kinds.
inline PulseTrain train_from_kinds(const std::vector<FrameKind>& kinds, double mu)
{
    PulseTrain train;
    train.kinds = kinds;
    for (std::uint64_t j = 0; j < kinds.size(); ++j) {
        const auto fs = emit_frame(j, kinds[j], mu);
        train.slots.push_back(fs.slots[0]);
        train.slots.push_back(fs.slots[1]);
    }
    return train;
}

/// Applies the channel and Eve to an emitted train. Uses the same per-frame
/// streams as run_simulation, so the result matches the simulated run when
/// the train came from generate_train. Eve flags go to `eve_out` if given.
inline PulseTrain apply_channel_and_eve(const PulseTrain& in, const RunConfig& cfg,
                                        std::vector<std::uint8_t>* eve_out = nullptr)
{
    cfg.validate();
    detail::require(in.slots.size() == 2 * in.kinds.size(), "train must hold two slots per frame");
    PulseTrain out = in;
    if (eve_out) {
        eve_out->assign(in.kinds.size(), 0);
    }
    for (std::uint64_t j = 0; j < in.kinds.size(); ++j) {
        KeyedRng rng(cfg.seed, j, stream::source);
        (void)rng.uniform();
        FrameState fs;
        fs.kind = in.kinds[j];
        fs.slots = {in.slots[2 * j], in.slots[2 * j + 1]};
        transmit_frame(fs, j, cfg, rng);
        out.slots[2 * j] = fs.slots[0];
        out.slots[2 * j + 1] = fs.slots[1];
        if (eve_out) {
            (*eve_out)[j] = fs.eve;
        }
    }
    return out;
}

struct SplitIntensity {
    double data = 0.0;
    double monitor = 0.0;
};

/// Coherent pulses split classically in intensity at Bob's splitter.
inline SplitIntensity bob_beamsplit(double intensity, double t_b)
{
    return {intensity * t_b, intensity * (1.0 - t_b)};
}

/// 1 - (1-p_d) exp(-eta * intensity).
inline double click_probability(double intensity, double eta, double p_d)
{
    return 1.0 - (1.0 - p_d) * std::exp(-eta * intensity);
}

/// A single photon present at the detector.
inline double photon_click_probability(double eta, double p_d)
{
    return 1.0 - (1.0 - p_d) * (1.0 - eta);
}

inline bool detect_data(double data_intensity, double eta, double p_d, KeyedRng& rng)
{
    return rng.bernoulli(click_probability(data_intensity, eta, p_d));
}

/// Mean photon numbers reaching D_M1 and D_M2 at one slot.
struct MonitorIntensity {
    double m1 = 0.0;
    double m2 = 0.0;
};

/// Delay-interferometer output for amplitudes a_prev (long arm) and a_curr
/// (short arm). With matching coherence tags a fraction V of the light
/// interferes (D_M1 ~ |a_prev + a_curr|^2/4, D_M2 ~ |a_curr - a_prev|^2/4);
/// the rest, and all light of mismatched tags, splits evenly.
inline MonitorIntensity interfere_intensities(double a_prev, double a_curr, bool same_group, double v)
{
    const double incoherent = (a_prev * a_prev + a_curr * a_curr) / 4.0;
    if (!same_group) {
        return {incoherent, incoherent};
    }
    const double sum = (a_prev + a_curr) * (a_prev + a_curr) / 4.0;
    const double diff = (a_curr - a_prev) * (a_curr - a_prev) / 4.0;
    return {v * sum + (1.0 - v) * incoherent, v * diff + (1.0 - v) * incoherent};
}

struct ClickPair {
    double m1 = 0.0;
    double m2 = 0.0;
};

inline ClickPair interfere(double a_prev, double a_curr, bool same_group, double v, double eta, double p_d)
{
    const auto in = interfere_intensities(a_prev, a_curr, same_group, v);
    return {click_probability(in.m1, eta, p_d), click_probability(in.m2, eta, p_d)};
}

/// Click flags for slot `curr`, whose long interferometer arm carries `prev`.
inline std::uint8_t detect_slot(const Slot& prev, const Slot& curr, const SystemParams& p, KeyedRng& rng)
{
    const double keep_dark = 1.0 - p.p_d;

    double p_db = 0.0;
    if (curr.photon) {
        p_db = curr.route == PhotonRoute::data ? photon_click_probability(p.eta, p.p_d) : p.p_d;
    } else {
        p_db = click_probability(bob_beamsplit(curr.intensity, p.t_b).data, p.eta, p.p_d);
    }

    const double a_prev = prev.coherent() ? std::sqrt(bob_beamsplit(prev.intensity, p.t_b).monitor) : 0.0;
    const double a_curr = curr.coherent() ? std::sqrt(bob_beamsplit(curr.intensity, p.t_b).monitor) : 0.0;
    const bool same = prev.coherent() && curr.coherent() && prev.group == curr.group;
    const auto mi = interfere_intensities(a_prev, a_curr, same, p.visibility);

    int photons_m1 = 0;
    int photons_m2 = 0;
    if (prev.photon) {
        photons_m1 += prev.route == PhotonRoute::long_m1;
        photons_m2 += prev.route == PhotonRoute::long_m2;
    }
    if (curr.photon) {
        photons_m1 += curr.route == PhotonRoute::short_m1;
        photons_m2 += curr.route == PhotonRoute::short_m2;
    }
    const double p_m1 = 1.0 - keep_dark * std::exp(-p.eta * mi.m1) * std::pow(1.0 - p.eta, photons_m1);
    const double p_m2 = 1.0 - keep_dark * std::exp(-p.eta * mi.m2) * std::pow(1.0 - p.eta, photons_m2);

    std::uint8_t flags = 0;
    if (rng.bernoulli(p_db)) flags |= click::db;
    if (rng.bernoulli(p_m1)) flags |= click::m1;
    if (rng.bernoulli(p_m2)) flags |= click::m2;
    const int n = (flags & click::db ? 1 : 0) + (flags & click::m1 ? 1 : 0) + (flags & click::m2 ? 1 : 0);
    if (n >= 2) flags |= click::double_count;
    return flags;
}

/// Ground-truth tallies of a run, including categories only the simulator
/// can know.
struct RawStats {
    std::uint64_t n_frames = 0;
    std::uint64_t n_slots = 0;
    std::array<std::uint64_t, 3> frames_by_kind{};
    std::array<std::uint64_t, 3> data_frames_by_kind{};  ///< frames with at least one D_B click
    std::uint64_t decoy_checks = 0, decoy_m1 = 0, decoy_m2 = 0;
    std::uint64_t ten_checks = 0, ten_m1 = 0, ten_m2 = 0;
    std::uint64_t clicks_db = 0, clicks_m1 = 0, clicks_m2 = 0;
    std::uint64_t double_counts = 0;
    std::uint64_t de_fired_frames = 0, ir_frames = 0, two_coherent_frames = 0, eve_knows_frames = 0;

    void merge(const RawStats& o)
    {
        n_frames += o.n_frames;
        n_slots += o.n_slots;
        for (int i = 0; i < 3; ++i) {
            frames_by_kind[i] += o.frames_by_kind[i];
            data_frames_by_kind[i] += o.data_frames_by_kind[i];
        }
        decoy_checks += o.decoy_checks;
        decoy_m1 += o.decoy_m1;
        decoy_m2 += o.decoy_m2;
        ten_checks += o.ten_checks;
        ten_m1 += o.ten_m1;
        ten_m2 += o.ten_m2;
        clicks_db += o.clicks_db;
        clicks_m1 += o.clicks_m1;
        clicks_m2 += o.clicks_m2;
        double_counts += o.double_counts;
        de_fired_frames += o.de_fired_frames;
        ir_frames += o.ir_frames;
        two_coherent_frames += o.two_coherent_frames;
        eve_knows_frames += o.eve_knows_frames;
    }

    bool operator==(const RawStats&) const = default;
};

struct SimulationResult {
    RunConfig config;
    std::vector<FrameKind> alice_kinds;   ///< Alice's private record
    std::vector<std::uint8_t> records;    ///< click flags, 2N+1 slots
    std::vector<std::uint8_t> eve;        ///< diagnostic Eve flags per frame
    RawStats stats;
};

inline unsigned resolve_threads(unsigned requested)
{
    if (requested == 0) {
        if (const char* env = std::getenv("COWSIM_THREADS")) {
            char* end = nullptr;
            const unsigned long v = std::strtoul(env, &end, 10);
            if (end != env && *end == '\0') {
                requested = static_cast<unsigned>(v);
            }
        }
    }
    if (requested == 0) {
        requested = std::max(1u, std::thread::hardware_concurrency());
    }
    return requested;
}

inline constexpr std::uint64_t chunk_frames = 1u << 15;

namespace detail {

inline void tally(RawStats& st, std::uint8_t flags)
{
    st.n_slots += 1;
    st.clicks_db += (flags & click::db) != 0;
    st.clicks_m1 += (flags & click::m1) != 0;
    st.clicks_m2 += (flags & click::m2) != 0;
    st.double_counts += (flags & click::double_count) != 0;
}

inline RawStats run_chunk(const RunConfig& cfg, std::uint64_t begin, std::uint64_t end, SimulationResult& out)
{
    RawStats st;
    const auto& p = cfg.params;
    FrameState prev;
    bool have_prev = begin > 0;
    if (have_prev) {
        prev = channel_frame(cfg, begin - 1);
    }
    for (std::uint64_t j = begin; j < end; ++j) {
        const FrameState cur = channel_frame(cfg, j);
        KeyedRng det(cfg.seed, j, stream::detection);
        const Slot before = have_prev ? prev.slots[1] : Slot{};
        const std::uint8_t f0 = detect_slot(before, cur.slots[0], p, det);
        const std::uint8_t f1 = detect_slot(cur.slots[0], cur.slots[1], p, det);
        out.records[2 * j] = f0;
        out.records[2 * j + 1] = f1;
        out.alice_kinds[j] = cur.kind;
        out.eve[j] = cur.eve;

        st.n_frames += 1;
        const auto k = static_cast<int>(cur.kind);
        st.frames_by_kind[k] += 1;
        st.data_frames_by_kind[k] += ((f0 | f1) & click::db) != 0;
        tally(st, f0);
        tally(st, f1);
        if (cur.kind == FrameKind::decoy) {
            st.decoy_checks += 1;
            st.decoy_m1 += (f1 & click::m1) != 0;
            st.decoy_m2 += (f1 & click::m2) != 0;
        }
        if (have_prev && prev.kind == FrameKind::bit1 && cur.kind == FrameKind::bit0) {
            st.ten_checks += 1;
            st.ten_m1 += (f0 & click::m1) != 0;
            st.ten_m2 += (f0 & click::m2) != 0;
        }
        st.de_fired_frames += (cur.eve & eve_flag::de_fired) != 0;
        st.ir_frames += (cur.eve & eve_flag::intercept_resend) != 0;
        st.two_coherent_frames += (cur.eve & eve_flag::two_coherent) != 0;
        st.eve_knows_frames += (cur.eve & eve_flag::knows_bit) != 0;
        prev = cur;
        have_prev = true;
    }
    if (end == cfg.n_frames) {
        KeyedRng det(cfg.seed, end, stream::detection);
        const std::uint8_t last = detect_slot(prev.slots[1], Slot{2 * end}, p, det);
        out.records[2 * end] = last;
        tally(st, last);
    }
    return st;
}

}  // namespace detail

/// Runs the full pulse-level simulation. Frames are processed in fixed-size
/// chunks on worker threads; the output is identical for any thread count.
inline SimulationResult run_simulation(const RunConfig& cfg)
{
    cfg.validate();
    SimulationResult out;
    out.config = cfg;
    try {
        out.alice_kinds.resize(cfg.n_frames);
        out.records.resize(2 * cfg.n_frames + 1);
        out.eve.resize(cfg.n_frames);
    } catch (const std::bad_alloc&) {
        throw std::runtime_error("run_simulation: cannot allocate records for " + std::to_string(cfg.n_frames) +
                                 " frames");
    }

    const std::uint64_t n_chunks = (cfg.n_frames + chunk_frames - 1) / chunk_frames;
    std::vector<RawStats> partial(n_chunks);
    const unsigned n_threads =
        static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(cfg.threads), n_chunks));

    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        try {
            for (std::uint64_t c = next++; c < n_chunks; c = next++) {
                const std::uint64_t begin = c * chunk_frames;
                const std::uint64_t end = std::min(cfg.n_frames, begin + chunk_frames);
                partial[c] = detail::run_chunk(cfg, begin, end, out);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (unsigned i = 0; i < n_threads; ++i) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    for (const auto& s : partial) {
        out.stats.merge(s);
    }
    return out;
}

}  // namespace cow::sim
