#pragma once

#include <vector>

#include "drsf/network.hpp"

namespace drsf::grid {

/// A DistFlow solution. Line quantities follow Network::lines() order and
/// orientation (sending end = parent bus).
struct OperatingPoint {
    std::vector<double> v_sq;    // per bus (p.u.^2)
    std::vector<double> l_sq;    // per line (p.u.^2)
    std::vector<double> p_flow;  // sending-end P_ij
    std::vector<double> q_flow;  // sending-end Q_ij
    double p0 = 0.0;             // substation injection
    double q0 = 0.0;
    double loss = 0.0;           // sum r_ij l_ij
    int iterations = 0;
    double residual = 0.0;

    double s0_sq() const { return p0 * p0 + q0 * q0; }
    double min_v_sq() const;
    double max_v_sq() const;
};

struct PowerFlowOptions {
    double tol = 1e-10;
    int max_iter = 200;
};

/// Forward/backward sweep on the branch-flow equations, iterated until the
/// largest DistFlow residual is at most `tol`.
/// Throws NoConvergence or VoltageCollapse.
OperatingPoint solve_power_flow(const Network& net, const PowerFlowOptions& opts = {});

struct DistFlowResiduals {
    double p_balance = 0.0;  // active balance at every bus (incl. substation)
    double q_balance = 0.0;
    double voltage_drop = 0.0;
    double branch_power = 0.0;  // |v_i l_ij - P_ij^2 - Q_ij^2|

    double max() const;
};

/// Evaluates the DistFlow equations at `op` for the network's current setpoints.
DistFlowResiduals distflow_residuals(const Network& net, const OperatingPoint& op);

/// Total real generation minus load minus loss; zero at any physical solution.
double power_balance_mismatch(const Network& net, const OperatingPoint& op);

}  // namespace drsf::grid
