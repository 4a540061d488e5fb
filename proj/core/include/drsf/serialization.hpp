#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "drsf/dro.hpp"
#include "drsf/harness.hpp"
#include "drsf/safety_filter.hpp"

namespace drsf::io {

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::string bounds_to_json(const dro::RobustBounds& bounds);
dro::RobustBounds bounds_from_json(const std::string& text);
dro::RobustBounds load_bounds(const std::filesystem::path& path);

/// Bounds for all three classes in one object keyed by class name.
std::string bound_set_to_json(const filter::BoundSet& set);
filter::BoundSet bound_set_from_json(const std::string& text);
filter::BoundSet load_bound_set(const std::filesystem::path& path);

/// One sample per row, no header; every row has the same width.
std::string samples_to_csv(const dro::ErrorSampleSet& set);
dro::ErrorSampleSet parse_samples_csv(std::istream& in, dro::ErrorKind kind, const std::string& name = "<samples>");
dro::ErrorSampleSet load_samples_csv(const std::filesystem::path& path, dro::ErrorKind kind);

std::string filter_result_to_json(const filter::FilterResult& result);

/// A JSON array of numbers.
std::vector<double> parse_action_json(const std::string& text);

/// Everything a simulate or sweep run needs beyond the network.
struct SimulationSpec {
    sim::EpisodeConfig episode;
    std::string controller = "random";
    std::size_t n_samples = 50;
    double sample_sigma = 0.3;
    double epsilon = 0.01;
    double alpha = 0.1;
};

/// Keys: horizon, sigma, seed, filter, scenarios, omega, relaxation_tol,
/// violation_penalty, reward_weights {deviation, loss}, redraw_each_step,
/// record_timing, profile (CSV path, relative to the config file),
/// controller, samples, sample_sigma, epsilon, alpha.
/// Unknown keys and bad values throw ConfigError.
SimulationSpec parse_simulation_spec(const std::string& text, const std::filesystem::path& base_dir = {});
SimulationSpec load_simulation_spec(const std::filesystem::path& path);
std::string simulation_spec_to_json(const SimulationSpec& spec);

std::string report_to_json(const sim::EpisodeReport& report);
std::string reports_to_json(const std::vector<sim::EpisodeReport>& reports);
/// `step,violations_v,violations_i,violations_s,loss,reward,deviation,filter_ms`,
/// with a leading scenario column when several reports are written.
std::string reports_to_csv(const std::vector<sim::EpisodeReport>& reports);
std::string sweep_to_csv(const std::vector<sim::SweepPoint>& points);

}  // namespace drsf::io
