#include "drsf/power_flow.hpp"

#include <algorithm>
#include <cmath>

#include "drsf/error.hpp"

namespace drsf::grid {

double OperatingPoint::min_v_sq() const
{
    return v_sq.empty() ? 0.0 : *std::min_element(v_sq.begin(), v_sq.end());
}

double OperatingPoint::max_v_sq() const
{
    return v_sq.empty() ? 0.0 : *std::max_element(v_sq.begin(), v_sq.end());
}

double DistFlowResiduals::max() const
{
    return std::max({p_balance, q_balance, voltage_drop, branch_power});
}

namespace {

void finish(const Network& net, OperatingPoint& op)
{
    // substation source covers whatever bus 0's own injection does not
    op.p0 = -net.p_injection(0);
    op.q0 = -net.q_injection(0);
    for (std::size_t e : net.child_lines(0)) {
        op.p0 += op.p_flow[e];
        op.q0 += op.q_flow[e];
    }
    op.loss = 0.0;
    for (std::size_t e = 0; e < net.num_lines(); ++e) op.loss += net.lines()[e].r * op.l_sq[e];
}

}  // namespace

OperatingPoint solve_power_flow(const Network& net, const PowerFlowOptions& opts)
{
    if (!(opts.tol > 0.0)) throw ValidationError("power-flow tolerance must be positive");
    const auto& lines = net.lines();
    const std::size_t nb = net.num_buses();
    const std::size_t nl = net.num_lines();

    OperatingPoint op;
    op.v_sq.assign(nb, net.v0());
    op.l_sq.assign(nl, 0.0);
    op.p_flow.assign(nl, 0.0);
    op.q_flow.assign(nl, 0.0);

    std::vector<double> p_inj(nb), q_inj(nb);
    for (std::size_t j = 0; j < nb; ++j) {
        p_inj[j] = net.p_injection(j);
        q_inj[j] = net.q_injection(j);
    }

    const auto order = net.bfs_order();
    double residual = 0.0;
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        // backward sweep: flows and squared currents from the leaves up
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const std::size_t j = *it;
            const auto parent = net.parent_line(j);
            if (!parent) continue;
            const std::size_t e = *parent;
            double p = -p_inj[j];
            double q = -q_inj[j];
            for (std::size_t c : net.child_lines(j)) {
                p += op.p_flow[c];
                q += op.q_flow[c];
            }
            const auto& ln = lines[e];
            const double v_from = op.v_sq[ln.from];
            const double p_send = p + ln.r * op.l_sq[e];
            const double q_send = q + ln.x * op.l_sq[e];
            op.l_sq[e] = (p_send * p_send + q_send * q_send) / v_from;
            op.p_flow[e] = p + ln.r * op.l_sq[e];
            op.q_flow[e] = q + ln.x * op.l_sq[e];
        }
        // forward sweep: voltages from the substation down
        for (std::size_t j : order) {
            const auto parent = net.parent_line(j);
            if (!parent) {
                op.v_sq[j] = net.v0();
                continue;
            }
            const std::size_t e = *parent;
            const auto& ln = lines[e];
            const double z2 = ln.r * ln.r + ln.x * ln.x;
            const double v = op.v_sq[ln.from] - 2.0 * (ln.r * op.p_flow[e] + ln.x * op.q_flow[e]) + z2 * op.l_sq[e];
            if (!(v > 0.0)) throw VoltageCollapse(j, v);
            op.v_sq[j] = v;
        }

        residual = 0.0;
        for (std::size_t e = 0; e < nl; ++e) {
            const auto& ln = lines[e];
            const double lhs = op.v_sq[ln.from] * op.l_sq[e];
            const double rhs = op.p_flow[e] * op.p_flow[e] + op.q_flow[e] * op.q_flow[e];
            residual = std::max(residual, std::abs(lhs - rhs));
        }
        if (!std::isfinite(residual)) throw NoConvergence(iter, residual);
        if (residual <= opts.tol) {
            op.iterations = iter;
            op.residual = residual;
            finish(net, op);
            return op;
        }
    }
    throw NoConvergence(opts.max_iter, residual);
}

DistFlowResiduals distflow_residuals(const Network& net, const OperatingPoint& op)
{
    DistFlowResiduals res;
    const auto& lines = net.lines();
    for (std::size_t j = 0; j < net.num_buses(); ++j) {
        double p_in = 0.0, q_in = 0.0;
        if (const auto parent = net.parent_line(j)) {
            const auto& ln = lines[*parent];
            p_in = op.p_flow[*parent] - ln.r * op.l_sq[*parent];
            q_in = op.q_flow[*parent] - ln.x * op.l_sq[*parent];
        } else {
            p_in = op.p0;
            q_in = op.q0;
        }
        double p_out = 0.0, q_out = 0.0;
        for (std::size_t c : net.child_lines(j)) {
            p_out += op.p_flow[c];
            q_out += op.q_flow[c];
        }
        res.p_balance = std::max(res.p_balance, std::abs(p_in + net.p_injection(j) - p_out));
        res.q_balance = std::max(res.q_balance, std::abs(q_in + net.q_injection(j) - q_out));
    }
    for (std::size_t e = 0; e < net.num_lines(); ++e) {
        const auto& ln = lines[e];
        const double z2 = ln.r * ln.r + ln.x * ln.x;
        const double drop = op.v_sq[ln.from] - 2.0 * (ln.r * op.p_flow[e] + ln.x * op.q_flow[e]) + z2 * op.l_sq[e];
        res.voltage_drop = std::max(res.voltage_drop, std::abs(op.v_sq[ln.to] - drop));
        res.branch_power = std::max(res.branch_power, std::abs(op.v_sq[ln.from] * op.l_sq[e] -
                                                               op.p_flow[e] * op.p_flow[e] -
                                                               op.q_flow[e] * op.q_flow[e]));
    }
    res.voltage_drop = std::max(res.voltage_drop, std::abs(op.v_sq[0] - net.v0()));
    return res;
}

double power_balance_mismatch(const Network& net, const OperatingPoint& op)
{
    double injected = op.p0;
    for (std::size_t j = 0; j < net.num_buses(); ++j) injected += net.p_injection(j);
    return injected - op.loss;
}

}  // namespace drsf::grid
