#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "drsf/controllers.hpp"
#include "drsf/dro.hpp"
#include "drsf/network.hpp"
#include "drsf/power_flow.hpp"
#include "drsf/profile.hpp"
#include "drsf/safety_filter.hpp"

namespace drsf::sim {

struct ErrorSamples {
    dro::ErrorSampleSet voltage;
    dro::ErrorSampleSet current;
    dro::ErrorSampleSet substation;
};

/// For each sample: perturb the line parameters, draw a random feasible action,
/// and record true minus nominal for v^2 per bus, l per line and P0^2 + Q0^2.
/// Deterministic in `seed`. Power-flow failures are rethrown as StepError with the sample index.
ErrorSamples generate_error_samples(const grid::Network& nominal, double sigma, std::size_t n, std::uint64_t seed);

/// One robust box per error class.
filter::BoundSet compute_bounds(const ErrorSamples& samples, const dro::WassersteinBall& ball);

struct ViolationCounts {
    std::size_t voltage = 0;     // buses outside [Vmin^2, Vmax^2]
    std::size_t current = 0;     // lines with l > Imax^2
    std::size_t substation = 0;  // 1 if P0^2 + Q0^2 > S0max^2

    std::size_t total() const { return voltage + current + substation; }
    ViolationCounts& operator+=(const ViolationCounts& o);
    bool operator==(const ViolationCounts&) const = default;
};

/// Counts limit violations of a solved point. A quantity counts only when it
/// is beyond its limit by more than `tol` (p.u.^2).
ViolationCounts count_violations(const grid::OperatingPoint& op, const grid::OperationalLimits& limits,
                                 double tol = 1e-6);

struct RewardWeights {
    double deviation = 2000.0;
    double loss = 1000.0;
};

/// -w_dev * deviation - w_loss * loss.
double compute_reward(double deviation, double loss, const RewardWeights& weights);

struct EpisodeConfig {
    std::size_t horizon = 96;
    double sigma = 0.3;
    std::uint64_t seed = 1;
    bool filter_on = true;
    std::size_t n_scenarios = 1;
    filter::DRSFConfig drsf;
    RewardWeights weights;
    /// Draw a new true system every step instead of once per scenario.
    bool redraw_each_step = false;
    /// Synthetic profile from `seed` when empty.
    std::optional<Profile> profile;
    /// Record wall-clock filter times; everything else is a pure function of the config.
    bool record_timing = true;

    void validate() const;
};

struct StepRecord {
    std::size_t step = 0;
    ViolationCounts violations;
    double loss = 0.0;
    double reward = 0.0;
    double deviation = 0.0;
    double filter_ms = 0.0;
    bool fallback = false;
    std::size_t clipped = 0;  // controller setpoints clipped to the rating
    double exactness_gap = 0.0;
    bool operator==(const StepRecord&) const = default;
};

struct EpisodeReport {
    std::size_t scenario = 0;
    std::vector<StepRecord> steps;

    ViolationCounts totals() const;
    double total_loss() const;
    std::size_t fallback_steps() const;
    /// Steps with at least one voltage violation.
    std::size_t voltage_violation_steps() const;
    double max_exactness_gap() const;
};

/// Runs one closed-loop scenario. `bounds` is required when cfg.filter_on.
/// Failures are rethrown as StepError carrying the step index.
EpisodeReport run_episode(const EpisodeConfig& cfg, Controller& controller, const grid::Network& nominal,
                          std::size_t scenario = 0);

/// Runs cfg.n_scenarios scenarios on up to `jobs` threads; results are ordered by scenario.
std::vector<EpisodeReport> run_scenarios(const EpisodeConfig& cfg, const ControllerFactory& factory,
                                         const grid::Network& nominal, std::size_t jobs = 1);

struct SweepPoint {
    double epsilon = 0.0;
    double violation_probability = 0.0;  // fraction of steps with a voltage violation
    std::size_t steps = 0;
    ViolationCounts totals;
    std::size_t fallback_steps = 0;
    double voltage_width = 0.0;  // total width of the voltage box
};

/// For each epsilon: recompute the bounds from `samples`, run the scenarios
/// with identical seeds, and report the voltage violation frequency.
std::vector<SweepPoint> run_sweep(const std::vector<double>& epsilons, double alpha, const ErrorSamples& samples,
                                  const EpisodeConfig& cfg, const ControllerFactory& factory,
                                  const grid::Network& nominal, std::size_t jobs = 1);

/// Summary of a run set.
struct RunSummary {
    std::size_t steps = 0;
    ViolationCounts totals;
    std::size_t voltage_violation_steps = 0;
    std::size_t fallback_steps = 0;
    double total_loss = 0.0;
    double max_exactness_gap = 0.0;
};
RunSummary summarize(const std::vector<EpisodeReport>& reports);

/// Stream-separated seed for a (seed, index, stream) triple.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t stream);

}  // namespace drsf::sim
