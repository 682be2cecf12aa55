#pragma once

#include <cmath>
#include <string>

#include "cowqkd/errors.hpp"

namespace cow {

/// Fiber transmission t = 10^(-alpha*d/10).
inline double channel_transmission(double alpha_db_per_km, double distance_km)
{
    detail::require(alpha_db_per_km >= 0.0 && std::isfinite(alpha_db_per_km),
                    "alpha_db_per_km must be finite and >= 0");
    detail::require(distance_km >= 0.0 && std::isfinite(distance_km),
                    "distance_km must be finite and >= 0");
    return std::pow(10.0, -alpha_db_per_km * distance_km / 10.0);
}

/// Physical and protocol parameters of the honest parties.
///
/// The pulse phase is fixed at zero and is therefore not a field.
struct SystemParams {
    double mu = 0.5;               ///< mean photon number of a non-empty pulse
    double f = 0.1;                ///< decoy-sequence probability
    double t_b = 0.9;              ///< Bob's splitter transmission to the data line
    double eta = 0.1;              ///< detector efficiency
    double p_d = 1e-5;             ///< dark-count probability per gate
    double visibility = 1.0;       ///< intrinsic interferometer visibility
    double alpha_db_per_km = 0.2;
    double distance_km = 25.0;
    double tau_ns = 1.0;           ///< pulse period, metadata only

    double t() const { return channel_transmission(alpha_db_per_km, distance_km); }
    /// Data-line transmission including detection: t * t_B * eta.
    double big_t() const { return t() * t_b * eta; }
    /// Monitoring-line transmission including detection: t * (1 - t_B) * eta.
    double big_t_monitor() const { return t() * (1.0 - t_b) * eta; }

    /// The closed-form rates are linearised in mu*t.
    bool small_signal_ok(double threshold = 0.1) const { return mu * t() <= threshold; }

    void validate() const
    {
        using detail::require;
        require(std::isfinite(mu) && mu >= 0.0, "mu must be >= 0");
        require(f >= 0.0 && f <= 1.0, "f must lie in [0,1]");
        require(t_b > 0.0 && t_b < 1.0, "t_b must lie in (0,1)");
        require(eta > 0.0 && eta <= 1.0, "eta must lie in (0,1]");
        require(p_d >= 0.0 && p_d < 1.0, "p_d must lie in [0,1)");
        require(visibility >= 0.0 && visibility <= 1.0, "visibility must lie in [0,1]");
        require(tau_ns > 0.0, "tau_ns must be > 0");
        (void)t();
    }
};

/// Adversary configuration.
struct EveStrategy {
    bool beam_split = true;  ///< Eve collects the line losses
    double p_ir = 0.0;       ///< intercept-resend fraction
    double p_2c = 0.0;       ///< two-pulse coherent photon-number-counting fraction

    void validate() const
    {
        using detail::require;
        require(p_ir >= 0.0 && p_ir <= 1.0, "p_ir must lie in [0,1]");
        require(p_2c >= 0.0 && p_2c <= 1.0, "p_2c must lie in [0,1]");
        require(p_ir + p_2c <= 1.0 + 1e-12, "p_ir + p_2c must not exceed 1");
    }

    /// Checks the attack budget p_IR + p_2c <= 1 - mu(1-t) against the
    /// parameters it will be evaluated with.
    void check_feasible(const SystemParams& params) const
    {
        validate();
        const double lost = params.mu * (1.0 - params.t());
        if (lost > 1.0 + 1e-12) {
            throw InfeasibleStrategy("beam-splitting fraction mu(1-t) = " + std::to_string(lost) +
                                     " exceeds 1");
        }
        const double budget = 1.0 - lost;
        if (p_ir + p_2c > budget + 1e-12) {
            throw InfeasibleStrategy("p_ir + p_2c = " + std::to_string(p_ir + p_2c) +
                                     " exceeds 1 - mu(1-t) = " + std::to_string(budget));
        }
    }
};

}  // namespace cow
