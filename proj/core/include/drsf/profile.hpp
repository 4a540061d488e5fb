#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <vector>

namespace drsf::sim {

/// Per-step multipliers on every load and every PV unit's real output.
struct Profile {
    std::vector<double> load_scale;
    std::vector<double> pv_scale;

    std::size_t size() const { return load_scale.size(); }
    /// Wraps around when step >= size().
    double load_at(std::size_t step) const;
    double pv_at(std::size_t step) const;
};

/// Seeded daily shape: a sinusoidal load between about 0.6 and 1.0 peaking in
/// the evening and a midday PV bell, both with small Gaussian noise.
Profile synthetic_profile(std::size_t steps, std::uint64_t seed, std::size_t steps_per_day = 96);

/// CSV with header `step,load_scale,pv_scale`. Throws ParseError.
Profile parse_profile_csv(std::istream& in, const std::string& name = "<profile>");
Profile load_profile_csv(const std::filesystem::path& path);

}  // namespace drsf::sim
