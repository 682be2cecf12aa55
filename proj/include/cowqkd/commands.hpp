#pragma once

// Subcommand bodies. Each returns the process exit code:
//   0 success, 1 usage/config error, 2 completed but insecure regime.

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "cowqkd/analytic.hpp"
#include "cowqkd/protocol.hpp"
#include "cowqkd/records_io.hpp"
#include "cowqkd/report.hpp"
#include "cowqkd/scenario.hpp"
#include "cowqkd/simkernel.hpp"

namespace cow::cli {

enum class Format { json, csv };

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_insecure = 2;

/// CSV number: up to 10 significant digits (printf %.10g), "nan"/"inf"
/// for non-finite values.
inline std::string csv_number(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

inline void write_csv_row(std::ostream& os, const std::vector<double>& row)
{
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << csv_number(row[i]);
    }
    os << '\n';
}

inline report::Json scenario_json(const Scenario& s)
{
    return report::Json{{"params", report::to_json(s.params)},
                        {"strategy", report::to_json(s.strategy)},
                        {"n_frames", s.n_frames},
                        {"seed", s.seed},
                        {"attack_block_frames", s.attack_block_frames},
                        {"sample_fraction", s.sample_fraction},
                        {"confidence", s.confidence}};
}

inline void write_json(std::ostream& os, const report::Json& j)
{
    os << j.dump(2) << '\n';
}

inline int cmd_rate(const Scenario& s, Format fmt, std::ostream& out)
{
    const auto r = analytic::secret_rate(s.params, s.strategy);
    if (fmt == Format::csv) {
        out << "t,r_b,q,q_prime,r_b_prime,i_ab,i_be,secret_rate,v_d,v_10\n";
        write_csv_row(out, {s.params.t(), r.r_b, r.q, r.q_prime, r.r_b_prime, r.i_ab, r.i_be, r.secret_rate,
                            r.v_d, r.v_10});
    } else {
        write_json(out, report::Json{{"scenario", scenario_json(s)}, {"report", report::to_json(r)}});
    }
    return r.secure() ? exit_ok : exit_insecure;
}

inline constexpr const char* sweep_columns = "t,mu_opt,r_opt,r_bb84,r_secret,q,v_d,v_10";

/// One sweep row: swept value, t, mu_opt, r_opt, r_bb84, r_secret, q, v_d, v_10.
inline std::vector<double> sweep_row(const Scenario& s, double x)
{
    const double t = s.params.t();
    double mu_opt = NAN;
    double r_opt = NAN;
    if (t < 1.0) {
        const auto o = analytic::optimize_mu(s.params);
        mu_opt = o.mu_opt;
        r_opt = o.r_opt;
    }
    const auto bb = analytic::bb84_reference(t, s.params.eta);
    const auto r = analytic::secret_rate(s.params, s.strategy);
    return {x, t, mu_opt, r_opt, bb.rate, r.secret_rate, r.q, r.v_d, r.v_10};
}

inline int cmd_sweep(const Scenario& s, Format fmt, std::ostream& out)
{
    const auto xs = s.sweep.points();
    std::vector<std::vector<double>> rows;
    rows.reserve(xs.size());
    for (double x : xs) {
        Scenario row = s;
        numeric_field(row, s.sweep.var) = x;
        rows.push_back(sweep_row(row, x));
    }
    if (fmt == Format::csv) {
        out << s.sweep.var << ',' << sweep_columns << '\n';
        for (const auto& r : rows) {
            write_csv_row(out, r);
        }
    } else {
        static const char* names[] = {"t", "mu_opt", "r_opt", "r_bb84", "r_secret", "q", "v_d", "v_10"};
        report::Json arr = report::Json::array();
        for (const auto& r : rows) {
            report::Json j{{s.sweep.var, report::number(r[0])}};
            for (int i = 0; i < 8; ++i) {
                j[names[i]] = report::number(r[i + 1]);
            }
            arr.push_back(std::move(j));
        }
        write_json(out, report::Json{{"scenario", scenario_json(s)}, {"rows", std::move(arr)}});
    }
    return exit_ok;
}

inline int cmd_optimize_mu(const Scenario& s, Format fmt, std::ostream& out)
{
    const auto o = analytic::optimize_mu(s.params);
    const auto bb = analytic::bb84_reference(o.t, s.params.eta);
    if (fmt == Format::csv) {
        out << "t,mu_opt,r_opt,mu_numeric,r_numeric,mu_bb84,r_bb84,advantage\n";
        write_csv_row(out, {o.t, o.mu_opt, o.r_opt, o.mu_numeric, o.r_numeric, bb.mu, bb.rate, o.r_opt / bb.rate});
    } else {
        auto j = report::to_json(o);
        j["mu_bb84"] = bb.mu;
        j["r_bb84"] = bb.rate;
        j["advantage"] = report::number(o.r_opt / bb.rate);
        write_json(out, report::Json{{"scenario", scenario_json(s)}, {"optimum", std::move(j)}});
    }
    return exit_ok;
}

/// A measured statistic next to its closed-form prediction.
struct Comparison {
    std::string name;
    double measured = 0.0;
    double predicted = 0.0;
    double sigma = 0.0;

    double z() const { return sigma > 0.0 ? (measured - predicted) / sigma : (measured == predicted ? 0.0 : NAN); }
};

/// Binomial comparison of a per-frame rate.
inline Comparison rate_comparison(std::string name, std::uint64_t count, std::uint64_t trials, double p)
{
    const double n = static_cast<double>(trials);
    return {std::move(name), static_cast<double>(count) / n, p, std::sqrt(p * (1.0 - p) / n)};
}

/// Measured statistics of a simulated run against the closed forms:
/// R_B, R^d_{1,2}, R^10_{1,2} (with i.i.d. "1,0" adjacency) and the two
/// visibilities.
inline std::vector<Comparison> compare_with_analytic(const sim::SimulationResult& r, const protocol::Outcome& o)
{
    const auto& p = r.config.params;
    const auto v = analytic::predicted_visibilities(r.config.strategy, p.visibility);
    const auto rates = analytic::monitor_rates(p, v.v_d, v.v_10, analytic::TenConvention::iid);
    const auto n = r.config.n_frames;
    const auto& st = r.stats;
    std::vector<Comparison> out;
    out.push_back(rate_comparison("r_b", o.stats.n_raw_bits, n, analytic::raw_rate(p)));
    out.push_back(rate_comparison("r_d_m1", st.decoy_m1, n, rates.decoy.m1));
    out.push_back(rate_comparison("r_d_m2", st.decoy_m2, n, rates.decoy.m2));
    out.push_back(rate_comparison("r_10_m1", st.ten_m1, n, rates.ten.m1));
    out.push_back(rate_comparison("r_10_m2", st.ten_m2, n, rates.ten.m2));
    out.push_back({"v_d", o.stats.v_d.raw, v.v_d, o.stats.v_d.sigma_at(v.v_d)});
    out.push_back({"v_10", o.stats.v_10.raw, v.v_10, o.stats.v_10.sigma_at(v.v_10)});
    return out;
}

inline report::Json simulate_report(const Scenario& s, const sim::SimulationResult& r, const protocol::Outcome& o)
{
    const auto& p = s.params;
    const auto v = analytic::predicted_visibilities(s.strategy, p.visibility);
    const auto printed = analytic::monitor_rates(p, v.v_d, v.v_10, analytic::TenConvention::printed);
    const auto iid = analytic::monitor_rates(p, v.v_d, v.v_10, analytic::TenConvention::iid);

    report::Json predicted{{"report", report::to_json(analytic::secret_rate(p, s.strategy))},
                           {"v_d_effective", v.v_d},
                           {"v_10_effective", v.v_10},
                           {"r_d_m1", printed.decoy.m1},
                           {"r_d_m2", printed.decoy.m2},
                           {"r_10_m1_printed", printed.ten.m1},
                           {"r_10_m2_printed", printed.ten.m2},
                           {"r_10_m1_iid", iid.ten.m1},
                           {"r_10_m2_iid", iid.ten.m2}};

    report::Json cmp = report::Json::array();
    for (const auto& c : compare_with_analytic(r, o)) {
        cmp.push_back(report::Json{{"statistic", c.name},
                                   {"measured", report::number(c.measured)},
                                   {"predicted", report::number(c.predicted)},
                                   {"sigma", report::number(c.sigma)},
                                   {"z", report::number(c.z())}});
    }
    return report::Json{{"scenario", scenario_json(s)},
                        {"protocol", report::to_json(o)},
                        {"predicted", std::move(predicted)},
                        {"comparison", std::move(cmp)},
                        {"simulator_truth", report::to_json(r.stats)}};
}

inline int cmd_simulate(const Scenario& s, std::ostream& out, const std::string& dump_path = {})
{
    const auto r = sim::run_simulation(s.run_config());
    if (!dump_path.empty()) {
        std::ofstream dump(dump_path, std::ios::binary);
        if (!dump) {
            throw ConfigError("cannot open dump file '" + dump_path + "'");
        }
        io::write_records(dump, r);
    }
    const auto o = protocol::run_protocol(r, s.protocol_options());
    write_json(out, simulate_report(s, r, o));
    const bool secure = !o.aborted && o.measured && o.measured->secure();
    return secure ? exit_ok : exit_insecure;
}

}  // namespace cow::cli
