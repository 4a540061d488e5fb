#include "drsf/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "drsf/error.hpp"
#include "drsf/harness.hpp"

namespace drsf::sim {

RandomController::RandomController(std::uint64_t seed) : rng_(seed) {}

std::vector<double> RandomController::act(const Observation& obs)
{
    std::vector<double> q;
    q.reserve(obs.q_max.size());
    for (double qmax : obs.q_max) {
        std::uniform_real_distribution<double> dist(-qmax, qmax);
        q.push_back(qmax > 0.0 ? dist(rng_) : 0.0);
    }
    return q;
}

GreedyVoltController::GreedyVoltController(double gain, double v_ref) : gain_(gain), v_ref_(v_ref) {}

std::vector<double> GreedyVoltController::act(const Observation& obs)
{
    std::vector<double> q;
    q.reserve(obs.q_max.size());
    for (std::size_t u = 0; u < obs.q_max.size(); ++u) {
        const double v = std::sqrt(std::max(0.0, obs.v_sq.at(obs.pv_bus.at(u))));
        q.push_back(std::clamp(gain_ * (v_ref_ - v), -obs.q_max[u], obs.q_max[u]));
    }
    return q;
}

ReplayController::ReplayController(std::vector<std::vector<double>> actions) : actions_(std::move(actions)) {}

std::vector<double> ReplayController::act(const Observation& obs)
{
    if (obs.step >= actions_.size()) {
        throw ConfigError("replay file has " + std::to_string(actions_.size()) + " rows; step " +
                          std::to_string(obs.step) + " requested");
    }
    return actions_[obs.step];
}

std::vector<std::vector<double>> load_actions_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
                if (used != cell.size()) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (rows.empty() && lineno == 1) continue;
            throw ParseError(path.string(), lineno, "non-numeric action row");
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError(path.string(), lineno, "row length differs from the first row");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

ControllerFactory make_controller_factory(const std::string& spec, std::uint64_t seed)
{
    if (spec == "random") {
        return [seed](std::size_t scenario) -> std::unique_ptr<Controller> {
            return std::make_unique<RandomController>(derive_seed(seed, scenario, 3));
        };
    }
    if (spec == "greedy-volt") {
        return [](std::size_t) -> std::unique_ptr<Controller> { return std::make_unique<GreedyVoltController>(); };
    }
    if (spec.rfind("replay:", 0) == 0) {
        auto actions = std::make_shared<const std::vector<std::vector<double>>>(load_actions_csv(spec.substr(7)));
        return [actions](std::size_t) -> std::unique_ptr<Controller> {
            return std::make_unique<ReplayController>(*actions);
        };
    }
    throw ConfigError("unknown controller '" + spec + "' (expected random, greedy-volt or replay:<file>)");
}

}  // namespace drsf::sim
