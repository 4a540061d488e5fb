#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "drsf/network.hpp"
#include "drsf/network_io.hpp"

namespace fixtures {

inline drsf::grid::Network ieee33()
{
    return drsf::grid::load_network(DRSF_DATA_DIR "/ieee33_bus.csv", DRSF_DATA_DIR "/ieee33_line.csv");
}

inline drsf::grid::Network ieee33_pv()
{
    return drsf::grid::load_network(DRSF_DATA_DIR "/ieee33_pv_bus.csv", DRSF_DATA_DIR "/ieee33_line.csv");
}

// One line 0-1 with r = x = z, load (p, q) at bus 1 and an optional PV unit there.
inline drsf::grid::Network two_bus(double z, double p, double q, double pv_p = 0.0, double pv_s = 0.0, double v0 = 1.0)
{
    using namespace drsf::grid;
    std::vector<Bus> buses{{0, 0.0, 0.0, std::nullopt}, {1, p, q, std::nullopt}};
    std::vector<PvUnit> pvs;
    if (pv_s > 0.0) {
        pvs.push_back({1, pv_p, pv_s, 0.0});
        buses[1].pv = 0;
    }
    return Network(std::move(buses), {{0, 1, z, z}}, std::move(pvs), v0);
}

// Complex-phasor forward/backward sweep on bus currents. Returns |V| per bus.
inline std::vector<double> phasor_sweep(const drsf::grid::Network& net, double tol = 1e-13)
{
    using cd = std::complex<double>;
    const auto n = net.num_buses();
    const auto& lines = net.lines();
    std::vector<std::size_t> parent(n, 0), parent_line(n, 0);
    std::vector<std::vector<std::size_t>> children(n);
    std::vector<std::size_t> order{0};
    std::vector<bool> seen(n, false);
    seen[0] = true;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto u = order[k];
        for (std::size_t e = 0; e < lines.size(); ++e) {
            std::size_t w;
            if (lines[e].from == u) {
                w = lines[e].to;
            } else if (lines[e].to == u) {
                w = lines[e].from;
            } else {
                continue;
            }
            if (seen[w]) continue;
            seen[w] = true;
            parent[w] = u;
            parent_line[w] = e;
            children[u].push_back(w);
            order.push_back(w);
        }
    }
    std::vector<cd> s_inj(n);
    for (std::size_t j = 0; j < n; ++j) s_inj[j] = cd(net.p_injection(j), net.q_injection(j));
    std::vector<cd> v(n, cd(std::sqrt(net.v0()), 0.0));
    for (int it = 0; it < 1000; ++it) {
        std::vector<cd> branch(n);
        for (auto k = order.size(); k-- > 1;) {
            const auto j = order[k];
            branch[j] += -std::conj(s_inj[j] / v[j]);
            branch[parent[j]] += branch[j];
        }
        double change = 0.0;
        for (std::size_t k = 1; k < order.size(); ++k) {
            const auto j = order[k];
            const auto& ln = lines[parent_line[j]];
            const cd nv = v[parent[j]] - cd(ln.r, ln.x) * branch[j];
            change = std::max(change, std::abs(nv - v[j]));
            v[j] = nv;
        }
        if (change < tol) break;
    }
    std::vector<double> mag(n);
    for (std::size_t j = 0; j < n; ++j) mag[j] = std::abs(v[j]);
    return mag;
}

}  // namespace fixtures
