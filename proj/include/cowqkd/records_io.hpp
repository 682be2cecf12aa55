#pragma once

// NDJSON dump of per-slot detection records.
//
//   {"format":"cowsim-records","version":1,"n_frames":N,"n_slots":2N+1,"seed":S}
//   {"slot":0,"db":0,"m1":0,"m2":0,"dc":0}
//   ...
//
// One line per slot in increasing slot order, LF line endings.

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cowqkd/simkernel.hpp"

namespace cow::io {

inline constexpr int records_format_version = 1;

struct RecordDump {
    std::uint64_t n_frames = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint8_t> records;
};

inline void write_records(std::ostream& os, const sim::SimulationResult& r)
{
    os << "{\"format\":\"cowsim-records\",\"version\":" << records_format_version
       << ",\"n_frames\":" << r.config.n_frames << ",\"n_slots\":" << r.records.size()
       << ",\"seed\":" << r.config.seed << "}\n";
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        const auto f = r.records[i];
        os << "{\"slot\":" << i << ",\"db\":" << ((f & sim::click::db) ? 1 : 0)
           << ",\"m1\":" << ((f & sim::click::m1) ? 1 : 0) << ",\"m2\":" << ((f & sim::click::m2) ? 1 : 0)
           << ",\"dc\":" << ((f & sim::click::double_count) ? 1 : 0) << "}\n";
    }
}

inline RecordDump read_records(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) {
        throw std::runtime_error("record dump: missing header");
    }
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != "cowsim-records") {
        throw std::runtime_error("record dump: unknown format");
    }
    if (header.value("version", 0) != records_format_version) {
        throw std::runtime_error("record dump: unsupported version");
    }
    RecordDump d;
    d.n_frames = header.at("n_frames").get<std::uint64_t>();
    d.seed = header.at("seed").get<std::uint64_t>();
    const auto n_slots = header.at("n_slots").get<std::uint64_t>();
    d.records.reserve(n_slots);
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        const auto j = nlohmann::json::parse(line);
        if (j.at("slot").get<std::uint64_t>() != d.records.size()) {
            throw std::runtime_error("record dump: slots out of order");
        }
        std::uint8_t f = 0;
        if (j.at("db").get<int>()) f |= sim::click::db;
        if (j.at("m1").get<int>()) f |= sim::click::m1;
        if (j.at("m2").get<int>()) f |= sim::click::m2;
        if (j.at("dc").get<int>()) f |= sim::click::double_count;
        d.records.push_back(f);
    }
    if (d.records.size() != n_slots) {
        throw std::runtime_error("record dump: expected " + std::to_string(n_slots) + " slots, found " +
                                 std::to_string(d.records.size()));
    }
    return d;
}

}  // namespace cow::io
