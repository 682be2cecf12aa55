#pragma once

// JSON views of the result types. Field names are part of the output
// contract; key order is fixed by ordered_json.

#include <cmath>
#include <cstdint>

#include <nlohmann/json.hpp>

#include "cowqkd/analytic.hpp"
#include "cowqkd/params.hpp"
#include "cowqkd/protocol.hpp"
#include "cowqkd/simkernel.hpp"

namespace cow::report {

using Json = nlohmann::ordered_json;

/// NaN and infinities become null.
inline Json number(double x)
{
    return std::isfinite(x) ? Json(x) : Json(nullptr);
}

inline Json to_json(const SystemParams& p)
{
    return Json{{"mu", p.mu},
                {"f", p.f},
                {"t_b", p.t_b},
                {"eta", p.eta},
                {"p_d", p.p_d},
                {"visibility", p.visibility},
                {"alpha_db_per_km", p.alpha_db_per_km},
                {"distance_km", p.distance_km},
                {"tau_ns", p.tau_ns},
                {"t", p.t()}};
}

inline Json to_json(const EveStrategy& s)
{
    return Json{{"beam_split", s.beam_split}, {"p_ir", s.p_ir}, {"p_2c", s.p_2c}};
}

inline Json to_json(const analytic::KeyRateReport& r)
{
    return Json{{"r_b", number(r.r_b)},
                {"q", number(r.q)},
                {"q_prime", number(r.q_prime)},
                {"r_b_prime", number(r.r_b_prime)},
                {"i_ab", number(r.i_ab)},
                {"i_be", number(r.i_be)},
                {"secret_rate", number(r.secret_rate)},
                {"secure", r.secure()},
                {"v_d", number(r.v_d)},
                {"v_10", number(r.v_10)},
                {"small_signal_ok", r.small_signal}};
}

inline Json to_json(const analytic::MuOptimum& o)
{
    return Json{{"t", number(o.t)},
                {"mu_opt", number(o.mu_opt)},
                {"r_opt", number(o.r_opt)},
                {"mu_numeric", number(o.mu_numeric)},
                {"r_numeric", number(o.r_numeric)}};
}

inline Json to_json(const sim::RawStats& s)
{
    return Json{{"n_frames", s.n_frames},
                {"n_slots", s.n_slots},
                {"frames_bit0", s.frames_by_kind[0]},
                {"frames_bit1", s.frames_by_kind[1]},
                {"frames_decoy", s.frames_by_kind[2]},
                {"data_frames_bit0", s.data_frames_by_kind[0]},
                {"data_frames_bit1", s.data_frames_by_kind[1]},
                {"data_frames_decoy", s.data_frames_by_kind[2]},
                {"decoy_checks", s.decoy_checks},
                {"decoy_m1", s.decoy_m1},
                {"decoy_m2", s.decoy_m2},
                {"ten_checks", s.ten_checks},
                {"ten_m1", s.ten_m1},
                {"ten_m2", s.ten_m2},
                {"clicks_db", s.clicks_db},
                {"clicks_m1", s.clicks_m1},
                {"clicks_m2", s.clicks_m2},
                {"double_counts", s.double_counts},
                {"eve_de_fired_frames", s.de_fired_frames},
                {"eve_ir_frames", s.ir_frames},
                {"eve_2c_frames", s.two_coherent_frames},
                {"eve_knows_frames", s.eve_knows_frames}};
}

inline Json to_json(const protocol::VisibilityEstimate& e)
{
    return Json{{"available", e.available},
                {"value", number(e.value)},
                {"raw", number(e.raw)},
                {"half_width", number(e.half_width)},
                {"checks", e.checks},
                {"n_m1", e.n_m1},
                {"n_m2", e.n_m2},
                {"dark_per_detector", number(e.dark_per_detector)}};
}

inline Json to_json(const protocol::SiftedStats& s)
{
    return Json{{"n_frames_sent", s.n_frames_sent},
                {"n_decoy_frames", s.n_decoy_frames},
                {"n_raw_bits", s.n_raw_bits},
                {"r_b", number(s.r_b)},
                {"n_sampled", s.n_sampled},
                {"n_sample_errors", s.n_sample_errors},
                {"measured_q", number(s.measured_q)},
                {"n_disclosed", s.n_disclosed},
                {"n_key_bits", s.n_key_bits},
                {"double_counts", s.double_counts},
                {"double_count_rate", number(s.double_count_rate)},
                {"v_d", to_json(s.v_d)},
                {"v_10", to_json(s.v_10)},
                {"dm2_decoy", s.v_d.n_m2},
                {"dm2_ten", s.v_10.n_m2},
                {"ten_fraction", number(s.ten_fraction)},
                {"ten_prefactor_printed", number(s.ten_prefactor_printed)},
                {"ten_prefactor_iid", number(s.ten_prefactor_iid)}};
}

inline Json to_json(const protocol::Outcome& o)
{
    Json j{{"sifted", to_json(o.stats)},
           {"inferred",
            Json{{"p_ir", number(o.inferred.p_ir)},
                 {"p_2c", number(o.inferred.p_2c)},
                 {"p_ir_raw", number(o.inferred.p_ir_raw)},
                 {"p_2c_raw", number(o.inferred.p_2c_raw)},
                 {"tolerance", number(o.inferred.tolerance)}}},
           {"aborted", o.aborted},
           {"abort_reason", o.abort_reason}};
    if (o.measured) {
        Json m = to_json(*o.measured);
        m["i_be_label"] = "model-restricted bound";
        j["measured"] = std::move(m);
    } else {
        j["measured"] = nullptr;
    }
    return j;
}

}  // namespace cow::report
