// cowsim: analytic rates, sweeps, Monte Carlo runs and mu optimisation
// for the coherent one-way QKD protocol.

#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cowqkd/commands.hpp"
#include "cowqkd/errors.hpp"

namespace {

using namespace cow;

struct Invocation {
    std::string config;
    std::string out;
    std::string format;
    std::string dump;
    std::map<std::string, std::string, std::less<>> overrides;
};

cli::Scenario build_scenario(const Invocation& inv)
{
    cli::Scenario s;
    if (!inv.config.empty()) {
        std::ifstream in(inv.config);
        if (!in) {
            throw cli::ConfigError("cannot open config file '" + inv.config + "'");
        }
        cli::load_config(s, in);
    }
    // Command-line flags override the file, applied in documented key order.
    for (const auto key : cli::scenario_keys) {
        if (const auto it = inv.overrides.find(key); it != inv.overrides.end()) {
            cli::set_key(s, key, it->second);
        }
    }
    return s;
}

cli::Format resolve_format(const std::string& flag, cli::Format fallback)
{
    if (flag.empty()) return fallback;
    if (flag == "json") return cli::Format::json;
    if (flag == "csv") return cli::Format::csv;
    throw cli::ConfigError("--format must be csv or json");
}

int dispatch(const std::string& command, const Invocation& inv)
{
    const auto s = build_scenario(inv);
    std::ostringstream buf;
    int code = cli::exit_ok;
    if (command == "rate") {
        code = cli::cmd_rate(s, resolve_format(inv.format, cli::Format::json), buf);
    } else if (command == "sweep") {
        code = cli::cmd_sweep(s, resolve_format(inv.format, cli::Format::csv), buf);
    } else if (command == "optimize-mu") {
        code = cli::cmd_optimize_mu(s, resolve_format(inv.format, cli::Format::json), buf);
    } else {
        if (resolve_format(inv.format, cli::Format::json) != cli::Format::json) {
            throw cli::ConfigError("simulate only writes json");
        }
        code = cli::cmd_simulate(s, buf, inv.dump);
    }
    if (inv.out.empty()) {
        std::cout << buf.str();
    } else {
        std::ofstream f(inv.out, std::ios::binary);
        if (!f) {
            throw cli::ConfigError("cannot open output file '" + inv.out + "'");
        }
        f << buf.str();
    }
    return code;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Coherent one-way QKD key rates and Monte Carlo simulation"};
    app.require_subcommand(1);
    app.fallthrough();

    Invocation inv;
    app.add_option("--config", inv.config, "key = value scenario file");
    app.add_option("--out", inv.out, "write output here instead of stdout");
    app.add_option("--format", inv.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    for (const auto key : cli::scenario_keys) {
        const std::string name(key);
        app.add_option_function<std::string>(
            "--" + name, [&inv, name](const std::string& v) { inv.overrides[name] = v; },
            "override scenario key " + name);
    }

    auto* rate = app.add_subcommand("rate", "closed-form key-rate report");
    auto* sweep = app.add_subcommand("sweep", "closed-form rates over a parameter sweep");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo run followed by the protocol steps");
    auto* optimize = app.add_subcommand("optimize-mu", "optimal mean photon number");
    simulate->add_option("--dump", inv.dump, "write per-slot detection records as NDJSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::exit_usage;
    }

    std::string command;
    for (auto* sub : {rate, sweep, simulate, optimize}) {
        if (sub->parsed()) command = sub->get_name();
    }

    try {
        return dispatch(command, inv);
    } catch (const std::exception& e) {
        std::cerr << "cowsim: " << e.what() << '\n';
        return cli::exit_usage;
    }
}
