#include "drsf/network_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "drsf/error.hpp"

namespace drsf::grid {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::optional<double> parse_double(std::string_view s)
{
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<long long> parse_int(std::string_view s)
{
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

double require_double(std::string_view s, const std::string& file, std::size_t lineno, const char* field)
{
    auto v = parse_double(s);
    if (!v) throw ParseError(file, lineno, std::string("bad ") + field + " '" + std::string(s) + "'");
    return *v;
}

std::size_t require_index(std::string_view s, const std::string& file, std::size_t lineno, const char* field)
{
    auto v = parse_int(s);
    if (!v || *v < 0) throw ParseError(file, lineno, std::string("bad ") + field + " '" + std::string(s) + "'");
    return static_cast<std::size_t>(*v);
}

void expect_header(const std::vector<std::string_view>& cols, const std::vector<std::string_view>& want,
                   const std::string& file, std::size_t lineno)
{
    if (cols != want) {
        std::string expected;
        for (auto w : want) expected += (expected.empty() ? "" : ",") + std::string(w);
        throw ParseError(file, lineno, "expected header '" + expected + "'");
    }
}

struct RawBus {
    double p_kw, q_kvar;
    std::optional<double> pv_p_kw, pv_s_kva;
};

}  // namespace

Network parse_network(std::istream& bus_csv, std::istream& line_csv, const OperationalLimits& limits,
                      const NetworkOptions& options, const std::string& bus_name, const std::string& line_name)
{
    limits.validate();
    std::optional<BaseValues> base;
    double v0 = 1.0;
    std::map<std::size_t, RawBus> raw;
    bool header_seen = false;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(bus_csv, line)) {
        ++lineno;
        const auto text = trim(line);
        if (text.empty()) continue;
        if (text.front() == '#') {
            const auto cols = split(text.substr(1));
            if (cols[0] == "base") {
                if (cols.size() != 3) throw UnitError(bus_name + ":" + std::to_string(lineno) + ": malformed #base line");
                auto s = parse_double(cols[1]);
                auto v = parse_double(cols[2]);
                if (!s || !v || *s <= 0.0 || *v <= 0.0) {
                    throw UnitError(bus_name + ":" + std::to_string(lineno) + ": base values must be positive numbers");
                }
                base = BaseValues{*s, *v};
            } else if (cols[0] == "v0") {
                if (cols.size() != 2) throw ParseError(bus_name, lineno, "malformed #v0 line");
                v0 = require_double(cols[1], bus_name, lineno, "v0");
            }
            continue;
        }
        const auto cols = split(text);
        if (!header_seen) {
            expect_header(cols, {"id", "p_load_kw", "q_load_kvar", "pv_p_kw", "pv_s_kva"}, bus_name, lineno);
            header_seen = true;
            continue;
        }
        if (cols.size() != 5) throw ParseError(bus_name, lineno, "expected 5 columns");
        const auto id = require_index(cols[0], bus_name, lineno, "id");
        RawBus rb{require_double(cols[1], bus_name, lineno, "p_load_kw"),
                  require_double(cols[2], bus_name, lineno, "q_load_kvar"), std::nullopt, std::nullopt};
        const bool has_p = !cols[3].empty();
        const bool has_s = !cols[4].empty();
        if (has_p != has_s) throw ParseError(bus_name, lineno, "PV needs both pv_p_kw and pv_s_kva");
        if (has_p) {
            rb.pv_p_kw = require_double(cols[3], bus_name, lineno, "pv_p_kw");
            rb.pv_s_kva = require_double(cols[4], bus_name, lineno, "pv_s_kva");
        }
        if (!raw.emplace(id, rb).second) throw ParseError(bus_name, lineno, "duplicate bus id " + std::to_string(id));
    }
    if (!base) throw UnitError(bus_name + ": missing '#base,S_base_MVA,V_base_kV' line");
    if (!header_seen) throw ParseError(bus_name, lineno, "missing header");
    if (raw.empty()) throw ParseError(bus_name, lineno, "no buses");
    if (raw.rbegin()->first != raw.size() - 1) throw ParseError(bus_name, lineno, "bus ids must be 0..n-1");

    const double s_kva = base->s_base_kva();
    const double z_base = base->z_base_ohm();
    std::vector<Bus> buses;
    std::vector<PvUnit> pvs;
    for (const auto& [id, rb] : raw) {
        buses.push_back(Bus{id, rb.p_kw / s_kva, rb.q_kvar / s_kva, std::nullopt});
        if (rb.pv_p_kw) pvs.push_back(PvUnit{id, *rb.pv_p_kw / s_kva, *rb.pv_s_kva / s_kva, 0.0});
    }

    std::vector<Line> lines;
    header_seen = false;
    lineno = 0;
    while (std::getline(line_csv, line)) {
        ++lineno;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto cols = split(text);
        if (!header_seen) {
            expect_header(cols, {"from", "to", "r_ohm", "x_ohm"}, line_name, lineno);
            header_seen = true;
            continue;
        }
        if (cols.size() != 4) throw ParseError(line_name, lineno, "expected 4 columns");
        lines.push_back(Line{require_index(cols[0], line_name, lineno, "from"),
                             require_index(cols[1], line_name, lineno, "to"),
                             require_double(cols[2], line_name, lineno, "r_ohm") / z_base,
                             require_double(cols[3], line_name, lineno, "x_ohm") / z_base});
    }
    if (!header_seen) throw ParseError(line_name, lineno, "missing header");

    try {
        return Network(std::move(buses), std::move(lines), std::move(pvs), v0, limits, *base, options);
    } catch (const TopologyError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ParseError(bus_name, 0, e.what());
    }
}

Network load_network(const std::filesystem::path& bus_csv, const std::filesystem::path& line_csv,
                     const OperationalLimits& limits, const NetworkOptions& options)
{
    std::ifstream bus(bus_csv);
    if (!bus) throw ParseError(bus_csv.string(), 0, "cannot open file");
    std::ifstream lines(line_csv);
    if (!lines) throw ParseError(line_csv.string(), 0, "cannot open file");
    return parse_network(bus, lines, limits, options, bus_csv.string(), line_csv.string());
}

}  // namespace drsf::grid
