#include "drsf/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "drsf/error.hpp"

namespace drsf::sim {

double Profile::load_at(std::size_t step) const
{
    return load_scale.empty() ? 1.0 : load_scale[step % load_scale.size()];
}

double Profile::pv_at(std::size_t step) const
{
    return pv_scale.empty() ? 1.0 : pv_scale[step % pv_scale.size()];
}

Profile synthetic_profile(std::size_t steps, std::uint64_t seed, std::size_t steps_per_day)
{
    if (steps_per_day == 0) throw ValidationError("steps_per_day must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> load_noise(0.0, 0.02);
    std::normal_distribution<double> pv_noise(0.0, 0.05);
    Profile p;
    p.load_scale.reserve(steps);
    p.pv_scale.reserve(steps);
    const double pi = std::numbers::pi;
    for (std::size_t t = 0; t < steps; ++t) {
        const double hour = 24.0 * static_cast<double>(t % steps_per_day) / static_cast<double>(steps_per_day);
        const double load = 0.8 + 0.2 * std::sin(2.0 * pi * (hour - 13.0) / 24.0) + load_noise(rng);
        const double sun = hour > 6.0 && hour < 18.0 ? std::sin(pi * (hour - 6.0) / 12.0) : 0.0;
        const double pv = sun * (1.0 + pv_noise(rng));
        p.load_scale.push_back(std::clamp(load, 0.5, 1.05));
        p.pv_scale.push_back(std::clamp(pv, 0.0, 1.0));
    }
    return p;
}

Profile parse_profile_csv(std::istream& in, const std::string& name)
{
    Profile p;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "step,load_scale,pv_scale") throw ParseError(name, lineno, "expected header 'step,load_scale,pv_scale'");
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string a, b, c, extra;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',') ||
            std::getline(ss, extra, ',')) {
            throw ParseError(name, lineno, "expected 3 columns");
        }
        try {
            const auto step = std::stoul(a);
            if (step != p.size()) throw ParseError(name, lineno, "steps must be consecutive from 0");
            const double load = std::stod(b);
            const double pv = std::stod(c);
            if (!(load >= 0.0) || !(pv >= 0.0) || !std::isfinite(load) || !std::isfinite(pv)) {
                throw ParseError(name, lineno, "scales must be finite and >= 0");
            }
            p.load_scale.push_back(load);
            p.pv_scale.push_back(pv);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError(name, lineno, "non-numeric field");
        }
    }
    if (!header) throw ParseError(name, lineno, "missing header");
    if (p.size() == 0) throw ParseError(name, lineno, "profile has no rows");
    return p;
}

Profile load_profile_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    return parse_profile_csv(in, path.string());
}

}  // namespace drsf::sim
