#include "drsf/network.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <string>

#include "drsf/error.hpp"

namespace drsf::grid {

double PvUnit::q_max() const
{
    return std::sqrt(std::max(0.0, s_rating * s_rating - p_gen * p_gen));
}

void OperationalLimits::validate() const
{
    if (!(v_min > 0.0) || !(v_max > 0.0)) throw ValidationError("voltage limits must be positive");
    if (!(i_max > 0.0)) throw ValidationError("current limit must be positive");
    if (!(s0_max > 0.0)) throw ValidationError("substation apparent-power limit must be positive");
}

RadialOrientation validate_radial(std::size_t n_buses, std::span<const Line> lines)
{
    if (n_buses == 0) throw TopologyError("network has no buses");
    if (lines.size() != n_buses - 1) {
        throw TopologyError("radial network with " + std::to_string(n_buses) + " buses needs " +
                            std::to_string(n_buses - 1) + " lines, got " + std::to_string(lines.size()));
    }

    std::vector<std::vector<std::size_t>> incident(n_buses);
    for (std::size_t e = 0; e < lines.size(); ++e) {
        const auto& ln = lines[e];
        if (ln.from >= n_buses || ln.to >= n_buses) {
            throw TopologyError("line " + std::to_string(e) + " references an unknown bus");
        }
        if (ln.from == ln.to) throw TopologyError("line " + std::to_string(e) + " is a self-loop");
        incident[ln.from].push_back(e);
        incident[ln.to].push_back(e);
    }

    RadialOrientation out;
    out.flipped.assign(lines.size(), false);
    out.parent_line.assign(n_buses, std::nullopt);
    out.child_lines.assign(n_buses, {});
    out.bfs_order.reserve(n_buses);

    std::vector<bool> seen(n_buses, false);
    std::vector<bool> used(lines.size(), false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    while (!frontier.empty()) {
        const std::size_t bus = frontier.front();
        frontier.pop();
        out.bfs_order.push_back(bus);
        for (std::size_t e : incident[bus]) {
            if (used[e]) continue;
            used[e] = true;
            const auto& ln = lines[e];
            const std::size_t other = ln.from == bus ? ln.to : ln.from;
            if (seen[other]) throw TopologyError("cycle through line " + std::to_string(e));
            seen[other] = true;
            out.flipped[e] = ln.from != bus;
            out.parent_line[other] = e;
            out.child_lines[bus].push_back(e);
            frontier.push(other);
        }
    }
    if (out.bfs_order.size() != n_buses) throw TopologyError("network is disconnected from the substation");
    return out;
}

Network::Network(std::vector<Bus> buses, std::vector<Line> lines, std::vector<PvUnit> pv_units, double v0,
                 OperationalLimits limits, BaseValues base, NetworkOptions options)
    : buses_(std::move(buses)),
      lines_(std::move(lines)),
      pv_units_(std::move(pv_units)),
      v0_(v0),
      limits_(limits),
      base_(base),
      options_(options)
{
    if (!(v0_ > 0.0)) throw ValidationError("substation squared voltage v0 must be positive");
    limits_.validate();
    if (!(base_.s_base_mva > 0.0) || !(base_.v_base_kv > 0.0)) throw UnitError("base values must be positive");

    for (std::size_t i = 0; i < buses_.size(); ++i) {
        auto& b = buses_[i];
        b.id = i;
        b.pv.reset();
        if (!std::isfinite(b.p_load) || !std::isfinite(b.q_load)) {
            throw ValidationError("bus " + std::to_string(i) + " has a non-finite load");
        }
        if (!options_.allow_negative_loads && b.p_load < 0.0) {
            throw ValidationError("bus " + std::to_string(i) + " has a negative real load");
        }
    }
    for (std::size_t e = 0; e < lines_.size(); ++e) {
        const auto& ln = lines_[e];
        if (!(ln.r >= 0.0) || !(ln.x >= 0.0) || (ln.r == 0.0 && ln.x == 0.0)) {
            throw ValidationError("line " + std::to_string(e) + " needs r >= 0, x >= 0, not both zero");
        }
    }

    orientation_ = validate_radial(buses_.size(), lines_);
    for (std::size_t e = 0; e < lines_.size(); ++e) {
        if (orientation_.flipped[e]) std::swap(lines_[e].from, lines_[e].to);
    }
    orientation_.flipped.assign(lines_.size(), false);

    pv_at_bus_.assign(buses_.size(), {});
    for (std::size_t g = 0; g < pv_units_.size(); ++g) {
        const auto& pv = pv_units_[g];
        if (pv.bus >= buses_.size()) throw ValidationError("PV unit " + std::to_string(g) + " sits on an unknown bus");
        if (!(pv.s_rating >= 0.0) || !(pv.p_gen >= 0.0) || pv.p_gen > pv.s_rating) {
            throw ValidationError("PV unit " + std::to_string(g) + " needs 0 <= p_gen <= s_rating");
        }
        if (!buses_[pv.bus].pv) buses_[pv.bus].pv = g;
        pv_at_bus_[pv.bus].push_back(g);
    }
}

double Network::p_injection(std::size_t bus) const
{
    double p = -buses_.at(bus).p_load;
    for (std::size_t g : pv_at_bus_[bus]) p += pv_units_[g].p_gen;
    return p;
}

double Network::q_injection(std::size_t bus) const
{
    double q = -buses_.at(bus).q_load;
    for (std::size_t g : pv_at_bus_[bus]) q += pv_units_[g].q_set;
    return q;
}

std::vector<double> Network::q_setpoints() const
{
    std::vector<double> q;
    q.reserve(pv_units_.size());
    for (const auto& pv : pv_units_) q.push_back(pv.q_set);
    return q;
}

std::vector<double> Network::q_limits() const
{
    std::vector<double> q;
    q.reserve(pv_units_.size());
    for (const auto& pv : pv_units_) q.push_back(pv.q_max());
    return q;
}

Network Network::with_lines(std::vector<Line> lines) const
{
    return Network(buses_, std::move(lines), pv_units_, v0_, limits_, base_, options_);
}

Network Network::with_pv_units(std::vector<PvUnit> pv_units) const
{
    return Network(buses_, lines_, std::move(pv_units), v0_, limits_, base_, options_);
}

Network Network::with_buses(std::vector<Bus> buses) const
{
    return Network(std::move(buses), lines_, pv_units_, v0_, limits_, base_, options_);
}

Network Network::with_limits(OperationalLimits limits) const
{
    return Network(buses_, lines_, pv_units_, v0_, limits, base_, options_);
}

Network Network::with_v0(double v0) const
{
    return Network(buses_, lines_, pv_units_, v0, limits_, base_, options_);
}

Network apply_action(const Network& net, std::span<const double> q_pv)
{
    if (q_pv.size() != net.num_pv()) {
        throw DimensionError("action has " + std::to_string(q_pv.size()) + " entries, network has " +
                             std::to_string(net.num_pv()) + " PV units");
    }
    auto units = net.pv_units();
    for (std::size_t g = 0; g < units.size(); ++g) {
        auto& pv = units[g];
        const double q = q_pv[g];
        const double s2 = pv.s_rating * pv.s_rating;
        const double margin = pv.p_gen * pv.p_gen + q * q - s2;
        // closed set: tolerate the rounding of q = sqrt(s^2 - p^2)
        if (!std::isfinite(q) || margin > 1e-12 * std::max(1.0, s2)) throw RatingError(g, margin);
        pv.q_set = q;
    }
    return net.with_pv_units(std::move(units));
}

Network perturb_parameters(const Network& net, double sigma, std::uint64_t seed)
{
    if (!(sigma >= 0.0)) throw ValidationError("perturbation sigma must be >= 0");
    if (sigma == 0.0) return net;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    auto factor = [&] {
        double d = normal(rng);
        while (d <= -1.0) d = normal(rng);
        return 1.0 + d;
    };
    auto lines = net.lines();
    for (auto& ln : lines) {
        ln.r *= factor();
        ln.x *= factor();
    }
    return net.with_lines(std::move(lines));
}

Network scale_injections(const Network& net, double load_scale, double pv_scale)
{
    if (!(load_scale >= 0.0) || !(pv_scale >= 0.0)) throw ValidationError("injection scales must be >= 0");
    auto buses = net.buses();
    for (auto& b : buses) {
        b.p_load *= load_scale;
        b.q_load *= load_scale;
    }
    auto units = net.pv_units();
    for (auto& pv : units) {
        pv.p_gen = std::min(pv.s_rating, pv.p_gen * pv_scale);
        const double qm = pv.q_max();
        pv.q_set = std::clamp(pv.q_set, -qm, qm);
    }
    return Network(std::move(buses), net.lines(), std::move(units), net.v0(), net.limits(), net.base(),
                   net.options());
}

Network without_pv_output(const Network& net)
{
    auto units = net.pv_units();
    for (auto& pv : units) {
        pv.p_gen = 0.0;
        pv.q_set = 0.0;
    }
    return net.with_pv_units(std::move(units));
}

}  // namespace drsf::grid
