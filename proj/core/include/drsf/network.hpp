#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace drsf::grid {

struct PvUnit {
    std::size_t bus = 0;
    double p_gen = 0.0;     // real output (p.u.)
    double s_rating = 0.0;  // apparent rating (p.u.)
    double q_set = 0.0;     // commanded reactive output (p.u.)

    /// Largest |q| the inverter can deliver at its current real output.
    double q_max() const;
};

struct Bus {
    std::size_t id = 0;
    double p_load = 0.0;
    double q_load = 0.0;
    std::optional<std::size_t> pv;  // index into Network::pv_units()
};

struct Line {
    std::size_t from = 0;
    std::size_t to = 0;
    double r = 0.0;
    double x = 0.0;
};

/// Operational limits. Voltage and current bounds are magnitudes in p.u.; the
/// constraints themselves act on squared quantities.
struct OperationalLimits {
    double v_min = 0.95;
    double v_max = 1.05;
    double i_max = 3.46;
    double s0_max = 3.46;

    void validate() const;
};

struct BaseValues {
    double s_base_mva = 1.0;
    double v_base_kv = 1.0;

    double z_base_ohm() const { return v_base_kv * v_base_kv / s_base_mva; }
    double s_base_kva() const { return s_base_mva * 1000.0; }
};

/// Orientation of a radial network rooted at the substation (bus 0).
struct RadialOrientation {
    std::vector<bool> flipped;                       // per input line: stored as (to, from)
    std::vector<std::optional<std::size_t>> parent_line;  // per bus; empty for bus 0
    std::vector<std::vector<std::size_t>> child_lines;    // per bus
    std::vector<std::size_t> bfs_order;              // bus indices, substation first
};

/// Orients every line away from bus 0. Throws TopologyError unless the lines
/// form a spanning tree over `n_buses` buses.
RadialOrientation validate_radial(std::size_t n_buses, std::span<const Line> lines);

struct NetworkOptions {
    bool allow_negative_loads = false;
};

/// Radial feeder in per-unit. Immutable once built; the transforming
/// operations below return modified copies.
class Network {
public:
    Network(std::vector<Bus> buses, std::vector<Line> lines, std::vector<PvUnit> pv_units, double v0 = 1.0,
            OperationalLimits limits = {}, BaseValues base = {}, NetworkOptions options = {});

    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Line>& lines() const { return lines_; }
    const std::vector<PvUnit>& pv_units() const { return pv_units_; }
    double v0() const { return v0_; }
    const OperationalLimits& limits() const { return limits_; }
    const BaseValues& base() const { return base_; }
    const NetworkOptions& options() const { return options_; }

    std::size_t num_buses() const { return buses_.size(); }
    std::size_t num_lines() const { return lines_.size(); }
    std::size_t num_pv() const { return pv_units_.size(); }

    std::span<const std::size_t> bfs_order() const { return orientation_.bfs_order; }
    std::optional<std::size_t> parent_line(std::size_t bus) const { return orientation_.parent_line.at(bus); }
    std::span<const std::size_t> child_lines(std::size_t bus) const { return orientation_.child_lines.at(bus); }

    /// Net real/reactive injection at a bus excluding the substation source:
    /// P_j = P_pv - P_load, Q_j = Q_pv - Q_load.
    double p_injection(std::size_t bus) const;
    double q_injection(std::size_t bus) const;

    std::vector<double> q_setpoints() const;
    std::vector<double> q_limits() const;

    Network with_lines(std::vector<Line> lines) const;
    Network with_pv_units(std::vector<PvUnit> pv_units) const;
    Network with_buses(std::vector<Bus> buses) const;
    Network with_limits(OperationalLimits limits) const;
    Network with_v0(double v0) const;

private:
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    std::vector<PvUnit> pv_units_;
    double v0_;
    OperationalLimits limits_;
    BaseValues base_;
    NetworkOptions options_;
    RadialOrientation orientation_;
    std::vector<std::vector<std::size_t>> pv_at_bus_;
};

/// Sets every PV unit's reactive setpoint. Throws DimensionError on a length
/// mismatch and RatingError when p^2 + q^2 exceeds the unit's rating.
Network apply_action(const Network& net, std::span<const double> q_pv);

/// Multiplies each line's r and x by independent (1 + delta), delta ~ N(0, sigma^2),
/// redrawing any delta <= -1. Deterministic in `seed`.
Network perturb_parameters(const Network& net, double sigma, std::uint64_t seed);

/// Scales all loads by `load_scale` and all PV real outputs by `pv_scale`
/// (capped at each unit's rating). Reactive setpoints are clipped to the new limits.
Network scale_injections(const Network& net, double load_scale, double pv_scale);

/// Returns a copy with every PV unit's real output set to zero and q reset to zero.
Network without_pv_output(const Network& net);

}  // namespace drsf::grid
