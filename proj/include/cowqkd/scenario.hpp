#pragma once

// Flat key=value scenario configuration shared by every CLI subcommand.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cowqkd/params.hpp"
#include "cowqkd/protocol.hpp"
#include "cowqkd/simkernel.hpp"

namespace cow::cli {

/// Bad key, bad value or bad combination of keys.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SweepScale { linear, log };

struct SweepSpec {
    std::string var = "distance_km";
    double start = 0.0;
    double stop = 100.0;
    std::uint64_t steps = 11;
    SweepScale scale = SweepScale::linear;

    std::vector<double> points() const
    {
        if (steps == 0) {
            throw ConfigError("sweep_steps must be >= 1");
        }
        if (scale == SweepScale::log && (start <= 0.0 || stop <= 0.0)) {
            throw ConfigError("log sweep needs positive sweep_start and sweep_stop");
        }
        std::vector<double> out;
        out.reserve(steps);
        for (std::uint64_t i = 0; i < steps; ++i) {
            const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
            if (scale == SweepScale::linear) {
                out.push_back(start + (stop - start) * frac);
            } else {
                out.push_back(start * std::pow(stop / start, frac));
            }
        }
        return out;
    }
};

struct Scenario {
    SystemParams params;
    EveStrategy strategy{.beam_split = true, .p_ir = 0.0, .p_2c = 0.0};
    std::uint64_t n_frames = 1'000'000;
    std::uint64_t seed = 42;
    std::uint64_t attack_block_frames = 64;
    double sample_fraction = 0.1;
    double confidence = 0.99;
    SweepSpec sweep;

    sim::RunConfig run_config() const
    {
        sim::RunConfig c;
        c.params = params;
        c.strategy = strategy;
        c.n_frames = n_frames;
        c.seed = seed;
        c.attack_block_frames = attack_block_frames;
        return c;
    }

    protocol::Options protocol_options() const
    {
        return {.sample_fraction = sample_fraction, .confidence = confidence, .seed = seed};
    }
};

/// Every accepted key, in documentation order.
inline constexpr std::array<std::string_view, 22> scenario_keys{
    "mu",         "f",           "t_b",         "eta",         "p_d",
    "visibility", "alpha_db_per_km", "distance_km", "tau_ns",  "beam_split",
    "p_ir",       "p_2c",        "n_frames",    "seed",        "attack_block_frames",
    "sample_fraction", "confidence", "sweep_var", "sweep_start", "sweep_stop",
    "sweep_steps", "sweep_scale"};

/// Keys that a sweep may vary.
inline constexpr std::array<std::string_view, 10> sweepable_keys{
    "mu", "f", "t_b", "eta", "p_d", "visibility", "alpha_db_per_km", "distance_km", "p_ir", "p_2c"};

inline bool is_key(std::string_view key)
{
    return std::find(scenario_keys.begin(), scenario_keys.end(), key) != scenario_keys.end();
}

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view key, std::string_view v)
{
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(x)) {
        throw ConfigError("invalid number for " + std::string(key) + ": '" + std::string(v) + "'");
    }
    return x;
}

inline std::uint64_t parse_u64(std::string_view key, std::string_view v)
{
    // Accept integral values written in floating notation, e.g. 1e6.
    std::uint64_t x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec == std::errc{} && ptr == v.data() + v.size()) {
        return x;
    }
    const double d = parse_double(key, v);
    if (d < 0.0 || d != std::floor(d) || d > 1.8e19) {
        throw ConfigError("invalid non-negative integer for " + std::string(key) + ": '" + std::string(v) + "'");
    }
    return static_cast<std::uint64_t>(d);
}

inline bool parse_bool(std::string_view key, std::string_view v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

}  // namespace detail

/// Numeric field addressed by a sweepable key.
inline double& numeric_field(Scenario& s, std::string_view key)
{
    auto& p = s.params;
    if (key == "mu") return p.mu;
    if (key == "f") return p.f;
    if (key == "t_b") return p.t_b;
    if (key == "eta") return p.eta;
    if (key == "p_d") return p.p_d;
    if (key == "visibility") return p.visibility;
    if (key == "alpha_db_per_km") return p.alpha_db_per_km;
    if (key == "distance_km") return p.distance_km;
    if (key == "p_ir") return s.strategy.p_ir;
    if (key == "p_2c") return s.strategy.p_2c;
    throw ConfigError("'" + std::string(key) + "' cannot be swept");
}

inline void set_key(Scenario& s, std::string_view key, std::string_view raw)
{
    using namespace detail;
    const auto value = trim(raw);
    if (!is_key(key)) {
        throw ConfigError("unknown key '" + std::string(key) + "'");
    }
    if (std::find(sweepable_keys.begin(), sweepable_keys.end(), key) != sweepable_keys.end()) {
        numeric_field(s, key) = parse_double(key, value);
    } else if (key == "tau_ns") {
        s.params.tau_ns = parse_double(key, value);
    } else if (key == "beam_split") {
        s.strategy.beam_split = parse_bool(key, value);
    } else if (key == "n_frames") {
        s.n_frames = parse_u64(key, value);
    } else if (key == "seed") {
        s.seed = parse_u64(key, value);
    } else if (key == "attack_block_frames") {
        s.attack_block_frames = parse_u64(key, value);
    } else if (key == "sample_fraction") {
        s.sample_fraction = parse_double(key, value);
    } else if (key == "confidence") {
        s.confidence = parse_double(key, value);
    } else if (key == "sweep_var") {
        const std::string name(value);
        if (std::find(sweepable_keys.begin(), sweepable_keys.end(), name) == sweepable_keys.end()) {
            throw ConfigError("sweep_var '" + name + "' is not a sweepable key");
        }
        s.sweep.var = name;
    } else if (key == "sweep_start") {
        s.sweep.start = parse_double(key, value);
    } else if (key == "sweep_stop") {
        s.sweep.stop = parse_double(key, value);
    } else if (key == "sweep_steps") {
        s.sweep.steps = parse_u64(key, value);
    } else if (key == "sweep_scale") {
        if (value == "linear") {
            s.sweep.scale = SweepScale::linear;
        } else if (value == "log") {
            s.sweep.scale = SweepScale::log;
        } else {
            throw ConfigError("sweep_scale must be 'linear' or 'log'");
        }
    }
}

/// Reads `key = value` lines; '#' starts a comment.
inline void load_config(Scenario& s, std::istream& in)
{
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v(line);
        if (const auto hash = v.find('#'); hash != std::string_view::npos) {
            v = v.substr(0, hash);
        }
        v = detail::trim(v);
        if (v.empty()) {
            continue;
        }
        const auto eq = v.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        const auto key = detail::trim(v.substr(0, eq));
        try {
            set_key(s, key, v.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

}  // namespace cow::cli
