#pragma once

// Closed-form rates, error rates and information quantities of the coherent
// one-way protocol in the small mu*t limit. Everything here is a pure function
// and doubles as the oracle for the Monte Carlo engine.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "cowqkd/errors.hpp"
#include "cowqkd/params.hpp"

namespace cow::analytic {

/// Shannon binary entropy in bits, H(0) = H(1) = 0.
inline double binary_entropy(double q)
{
    detail::require(q >= 0.0 && q <= 1.0, "binary_entropy: q must lie in [0,1]");
    if (q == 0.0 || q == 1.0) {
        return 0.0;
    }
    return -q * std::log2(q) - (1.0 - q) * std::log2(1.0 - q);
}

/// Data-line detections per two-pulse frame after decoys are removed.
inline double raw_rate(const SystemParams& p)
{
    p.validate();
    const double mu_t = p.mu * p.big_t();
    return (mu_t + (1.0 - mu_t) * p.p_d) * (1.0 - p.f);
}

/// Data-line QBER, caused by dark counts alone.
///
/// The (1-f) factor cancels against R_B; it is kept to mirror the printed
/// expression.
inline double data_qber(const SystemParams& p)
{
    const double r_b = raw_rate(p);
    if (!(r_b > 0.0)) {
        throw UndefinedQber("data_qber: raw rate is zero");
    }
    const double mu_t = p.mu * p.big_t();
    return 0.5 * (1.0 - mu_t) * p.p_d * (1.0 - p.f) / r_b;
}

/// r_b * (1 - H(q)).
inline double mutual_info(double r_b, double q)
{
    return r_b * (1.0 - binary_entropy(q));
}

inline double mutual_info_ab(const SystemParams& p)
{
    return mutual_info(raw_rate(p), data_qber(p));
}

/// Per-slot click probability of D_M1 (first) or D_M2 (second) at a
/// coherence-checked slot with effective visibility v.
struct DetectorPair {
    double m1 = 0.0;
    double m2 = 0.0;
};

inline DetectorPair monitor_detector_rates(const SystemParams& p, double v)
{
    detail::require(v >= 0.0 && v <= 1.0, "visibility must lie in [0,1]");
    p.validate();
    const double mt = p.mu * p.big_t_monitor();
    const double s1 = mt * (1.0 + v) / 2.0;
    const double s2 = mt * (1.0 - v) / 2.0;
    return {s1 + (1.0 - s1) * p.p_d, s2 + (1.0 - s2) * p.p_d};
}

struct MonitorRates {
    DetectorPair per_slot_d;   ///< R^d_{M1,2}
    DetectorPair per_slot_10;  ///< R^10_{M1,2}
    DetectorPair decoy;        ///< R^d_{1,2}: per frame, at decoy times
    DetectorPair ten;          ///< R^10_{1,2}: per frame, at "1,0" times
};

/// Probability that a frame boundary is preceded by "1" and followed by "0".
enum class TenConvention {
    printed,  ///< (1-f)/4, as printed with the monitoring-rate formulas
    iid,      ///< ((1-f)/2)^2 for independent frames
};

inline double ten_prefactor(double f, TenConvention c)
{
    return c == TenConvention::printed ? (1.0 - f) / 4.0 : (1.0 - f) * (1.0 - f) / 4.0;
}

/// Monitoring-line rates, neglecting double counts. v_d and v_10 are the
/// effective visibilities (intrinsic visibility times the unattacked share).
inline MonitorRates monitor_rates(const SystemParams& p, double v_d, double v_10,
                                  TenConvention convention = TenConvention::printed)
{
    MonitorRates r;
    r.per_slot_d = monitor_detector_rates(p, v_d);
    r.per_slot_10 = monitor_detector_rates(p, v_10);
    r.decoy = {r.per_slot_d.m1 * p.f, r.per_slot_d.m2 * p.f};
    const double pre = ten_prefactor(p.f, convention);
    r.ten = {r.per_slot_10.m1 * pre, r.per_slot_10.m2 * pre};
    return r;
}

/// Fraction of Bob's detections on which an intercept-resend Eve holds the
/// wrong bit.
inline double eve_q_prime(const SystemParams& p)
{
    p.validate();
    const double tb_eta = p.t_b * p.eta;
    const double denom = tb_eta + (1.0 - tb_eta) * p.p_d;
    return 0.5 * (1.0 - tb_eta) * p.p_d / denom;
}

/// R_B' = R_B - (1 - mu t) p_d (1 - f): detections Eve can attribute to her
/// own resent photon.
inline double raw_rate_eve_attributable(const SystemParams& p, double r_b)
{
    return r_b - (1.0 - p.mu * p.t()) * p.p_d * (1.0 - p.f);
}

/// Inputs of the Bob-Eve information, either predicted or measured.
struct EveInfoTerms {
    double lost_fraction = 0.0;  ///< mu(1-t), zero when Eve ignores the losses
    double attack_mass = 0.0;    ///< p_IR + p_2c
    double r_b = 0.0;
    double q = 0.0;
    double r_b_prime = 0.0;
    double q_prime = 0.0;
};

inline double eve_information(const EveInfoTerms& x)
{
    return x.lost_fraction * mutual_info(x.r_b, x.q) + x.attack_mass * mutual_info(x.r_b_prime, x.q_prime);
}

inline EveInfoTerms eve_terms(const SystemParams& p, const EveStrategy& s)
{
    s.check_feasible(p);
    EveInfoTerms x;
    x.lost_fraction = s.beam_split ? p.mu * (1.0 - p.t()) : 0.0;
    x.attack_mass = s.p_ir + s.p_2c;
    x.r_b = raw_rate(p);
    x.q = data_qber(p);
    x.r_b_prime = raw_rate_eve_attributable(p, x.r_b);
    x.q_prime = eve_q_prime(p);
    return x;
}

/// I(B:E) in bits per frame.
inline double eve_information(const SystemParams& p, const EveStrategy& s)
{
    if (p.mu == 0.0) {
        s.check_feasible(p);
        return 0.0;
    }
    return eve_information(eve_terms(p, s));
}

/// Visibilities expected at decoy and "1,0" checks under a given attack mix.
struct Visibilities {
    double v_d = 1.0;
    double v_10 = 1.0;
};

inline Visibilities predicted_visibilities(const EveStrategy& s, double intrinsic = 1.0)
{
    return {intrinsic * (1.0 - s.p_ir - s.p_2c), intrinsic * (1.0 - s.p_ir)};
}

struct KeyRateReport {
    double r_b = 0.0;
    double q = 0.0;
    double q_prime = 0.0;
    double r_b_prime = 0.0;
    double i_ab = 0.0;
    double i_be = 0.0;
    double secret_rate = 0.0;
    double v_d = 1.0;
    double v_10 = 1.0;
    bool small_signal = true;

    bool secure() const { return secret_rate > 0.0; }
};

inline KeyRateReport report_from_terms(const EveInfoTerms& x, Visibilities v, bool small_signal)
{
    KeyRateReport r;
    r.r_b = x.r_b;
    r.q = x.q;
    r.q_prime = x.q_prime;
    r.r_b_prime = x.r_b_prime;
    r.i_ab = mutual_info(x.r_b, x.q);
    r.i_be = eve_information(x);
    r.secret_rate = r.i_ab - r.i_be;
    r.v_d = v.v_d;
    r.v_10 = v.v_10;
    r.small_signal = small_signal;
    return r;
}

/// Csiszar-Korner secret fraction I(A:B) - I(B:E) with every intermediate.
inline KeyRateReport secret_rate(const SystemParams& p, const EveStrategy& s)
{
    auto terms = eve_terms(p, s);
    return report_from_terms(terms, predicted_visibilities(s), p.small_signal_ok());
}

/// R(mu) = mu t t_B eta (1-f)(1 - mu(1-t)): zero errors, no dark counts.
inline double zero_error_rate(const SystemParams& p, double mu)
{
    const double t = p.t();
    return mu * t * p.t_b * p.eta * (1.0 - p.f) * (1.0 - mu * (1.0 - t));
}

/// Golden-section search for the maximum of a unimodal function on [lo, hi].
inline double golden_section_maximize(const std::function<double(double)>& fn, double lo, double hi,
                                      double tol = 1e-10)
{
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = fn(c);
    double fd = fn(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = fn(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = fn(d);
        }
    }
    return 0.5 * (a + b);
}

struct MuOptimum {
    double t = 0.0;
    double mu_opt = 0.0;      ///< closed form 1/(2(1-t))
    double r_opt = 0.0;       ///< closed form t t_B eta (1-f)/(4(1-t))
    double mu_numeric = 0.0;  ///< golden-section maximiser of zero_error_rate
    double r_numeric = 0.0;
};

/// Optimal mean photon number in the zero-error regime. The mu field of the
/// input is ignored.
inline MuOptimum optimize_mu(const SystemParams& p)
{
    const double t = p.t();
    if (!(t < 1.0)) {
        throw InvalidParameter("optimize_mu: requires t < 1 (non-zero channel loss)");
    }
    MuOptimum out;
    out.t = t;
    out.mu_opt = 1.0 / (2.0 * (1.0 - t));
    out.r_opt = t * p.t_b * p.eta * (1.0 - p.f) / (4.0 * (1.0 - t));

    const double hi = 10.0 / (1.0 - t);
    out.mu_numeric = golden_section_maximize([&](double mu) { return zero_error_rate(p, mu); }, 0.0, hi);
    out.r_numeric = zero_error_rate(p, out.mu_numeric);

    const double rel = out.r_opt > 0.0 ? std::abs(out.r_numeric - out.r_opt) / out.r_opt : 0.0;
    if (rel > 1e-9 || std::abs(out.mu_numeric - out.mu_opt) > 1e-6) {
        throw std::logic_error("optimize_mu: numeric maximiser disagrees with closed form");
    }
    return out;
}

struct Bb84Reference {
    double mu = 0.0;
    double rate = 0.0;
};

/// BB84 with weak pulses under photon-number splitting: mu = t, R = eta t^2 / 4.
inline Bb84Reference bb84_reference(double t, double eta)
{
    detail::require(t > 0.0 && t <= 1.0, "bb84_reference: t must lie in (0,1]");
    return {t, 0.25 * eta * t * t};
}

}  // namespace cow::analytic
