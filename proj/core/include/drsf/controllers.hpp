#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace drsf::sim {

/// What a controller sees each step: the nominal-model operating point at the
/// previously applied action under the current loads.
struct Observation {
    std::size_t step = 0;
    std::vector<double> v_sq;    // per bus
    double loss = 0.0;           // nominal-model real loss (p.u.)
    std::vector<double> q_max;   // per PV unit, at the current real output
    std::vector<std::size_t> pv_bus;
};

class Controller {
public:
    virtual ~Controller() = default;
    virtual std::string name() const = 0;
    /// Proposed reactive setpoints, one per PV unit (p.u.).
    virtual std::vector<double> act(const Observation& obs) = 0;
};

/// Builds the controller for one scenario index.
using ControllerFactory = std::function<std::unique_ptr<Controller>(std::size_t scenario)>;

/// Uniform in [-q_max, q_max] per unit.
class RandomController : public Controller {
public:
    explicit RandomController(std::uint64_t seed);
    std::string name() const override { return "random"; }
    std::vector<double> act(const Observation& obs) override;

private:
    std::mt19937_64 rng_;
};

/// Proportional droop: q = gain * (v_ref - |V|) at the unit's bus.
class GreedyVoltController : public Controller {
public:
    explicit GreedyVoltController(double gain = 10.0, double v_ref = 1.0);
    std::string name() const override { return "greedy-volt"; }
    std::vector<double> act(const Observation& obs) override;

private:
    double gain_;
    double v_ref_;
};

/// Plays back recorded actions: row t is used at step t.
class ReplayController : public Controller {
public:
    explicit ReplayController(std::vector<std::vector<double>> actions);
    std::string name() const override { return "replay"; }
    std::vector<double> act(const Observation& obs) override;

private:
    std::vector<std::vector<double>> actions_;
};

/// Reads a CSV of actions, one row per step, one column per PV unit.
/// An optional first line that does not parse as numbers is treated as a header.
std::vector<std::vector<double>> load_actions_csv(const std::filesystem::path& path);

/// "random", "greedy-volt" or "replay:<file>". Random controllers are seeded from
/// `seed` and the scenario index.
ControllerFactory make_controller_factory(const std::string& spec, std::uint64_t seed);

}  // namespace drsf::sim
