#include "drsf/safety_filter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "drsf/error.hpp"

namespace drsf::filter {

using conic::ConicProgram;
using conic::Entry;

namespace {

void check_bounds(const grid::Network& net, const BoundSet& b)
{
    auto check = [](const dro::RobustBounds& rb, std::size_t dim, const char* what) {
        if (rb.lower.size() != dim || rb.upper.size() != dim) {
            throw DimensionError(std::string(what) + " bounds have dimension " + std::to_string(rb.lower.size()) +
                                 ", expected " + std::to_string(dim));
        }
    };
    check(b.voltage, net.num_buses(), "voltage");
    check(b.current, net.num_lines(), "current");
    check(b.substation, 1, "substation");
}

double elapsed(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

FilterResult extract(const grid::Network& net, std::span<const double> q_learn, const DRSFConfig& cfg,
                     const DrsfLayout& lay, const conic::ConicSolution& sol)
{
    FilterResult res;
    res.status = sol.status;
    res.objective = sol.objective;
    const auto& z = sol.primal;
    const auto& pvs = net.pv_units();
    double dev2 = 0.0;
    for (std::size_t u = 0; u < pvs.size(); ++u) {
        const double qmax = pvs[u].q_max();
        const double q = std::clamp(z[lay.q_pv[u]], -qmax, qmax);
        res.q_safe.push_back(q);
        dev2 += (q_learn[u] - q) * (q_learn[u] - q);
    }
    res.deviation = std::sqrt(dev2);

    auto& op = res.predicted;
    for (std::size_t j = 0; j < net.num_buses(); ++j) op.v_sq.push_back(z[lay.v_sq[j]]);
    for (std::size_t e = 0; e < net.num_lines(); ++e) {
        op.p_flow.push_back(z[lay.p_flow[e]]);
        op.q_flow.push_back(z[lay.q_flow[e]]);
        op.l_sq.push_back(z[lay.l_sq[e]]);
        op.loss += net.lines()[e].r * z[lay.l_sq[e]];
    }
    op.p0 = z[lay.p0];
    op.q0 = z[lay.q0];
    res.exactness_gap = relaxation_gap(net, op);
    res.exact = res.exactness_gap <= cfg.relaxation_tol;
    return res;
}

void collect_violations(const DrsfLayout& lay, const conic::ConicSolution& sol, FilterResult& res)
{
    auto total = [&](const std::vector<std::size_t>& idx) {
        double t = 0.0;
        for (std::size_t i : idx) t += std::max(0.0, sol.primal[i]);
        return t;
    };
    const double v = total(lay.viol_v_low) + total(lay.viol_v_high);
    const double i = total(lay.viol_i);
    const double s = lay.viol_s ? std::max(0.0, sol.primal[*lay.viol_s]) : 0.0;
    constexpr double kReport = 1e-7;
    if (v > kReport) res.violated_classes.push_back("voltage");
    if (i > kReport) res.violated_classes.push_back("current");
    if (s > kReport) res.violated_classes.push_back("substation");
    res.total_violation = v + i + s;
}

conic::ConicSolution run_solver(const ConicProgram& prog, const conic::SolverSettings& settings)
{
    try {
        return conic::solve(prog, settings);
    } catch (const NumericalFailure& e) {
        throw SolverFailure(std::string("filter program: ") + e.what());
    }
}

}  // namespace

BoundSet BoundSet::zero(const grid::Network& net)
{
    return BoundSet{dro::RobustBounds::zero(dro::ErrorKind::Voltage, net.num_buses()),
                    dro::RobustBounds::zero(dro::ErrorKind::Current, net.num_lines()),
                    dro::RobustBounds::zero(dro::ErrorKind::Substation, 1)};
}

DrsfProgram build_drsf(const grid::Network& net, std::span<const double> q_learn, const DRSFConfig& cfg,
                       bool slack_penalized)
{
    if (!cfg.bounds) throw BoundsMissing("filter configuration has no robust bounds");
    if (!(cfg.omega >= 0.0)) throw ValidationError("omega must be >= 0");
    const BoundSet& bounds = *cfg.bounds;
    check_bounds(net, bounds);
    const auto& pvs = net.pv_units();
    if (q_learn.size() != pvs.size()) {
        throw DimensionError("q_learn has " + std::to_string(q_learn.size()) + " entries for " +
                             std::to_string(pvs.size()) + " PV units");
    }
    const grid::OperationalLimits lim = cfg.limits.value_or(net.limits());
    const auto& lines = net.lines();
    const std::size_t nb = net.num_buses();
    const std::size_t nl = net.num_lines();

    DrsfProgram out;
    ConicProgram& prog = out.program;
    DrsfLayout& lay = out.layout;
    std::vector<std::size_t> nonneg;
    auto slack = [&]() {
        const std::size_t i = prog.add_variable();
        nonneg.push_back(i);
        return i;
    };

    // PV units: (s, p, q) in SOC with s and p pinned; action change d = q_learn - q
    std::vector<std::size_t> dev;
    for (std::size_t u = 0; u < pvs.size(); ++u) {
        const std::size_t s = prog.add_variable();
        const std::size_t p = prog.add_variable();
        const std::size_t q = prog.add_variable();
        const std::size_t d = prog.add_variable();
        prog.add_equality({{s, 1.0}}, pvs[u].s_rating);
        prog.add_equality({{p, 1.0}}, pvs[u].p_gen);
        prog.add_soc({s, p, q});
        prog.add_equality({{d, 1.0}, {q, 1.0}}, q_learn[u]);
        lay.q_pv.push_back(q);
        dev.push_back(d);
    }
    lay.deviation = prog.add_epigraph_norm(dev);
    prog.set_cost(lay.deviation, 1.0);

    lay.v_sq.resize(nb);
    for (std::size_t j = 0; j < nb; ++j) lay.v_sq[j] = prog.add_variable();
    lay.p_flow.resize(nl);
    lay.q_flow.resize(nl);
    lay.l_sq.resize(nl);
    for (std::size_t e = 0; e < nl; ++e) {
        lay.p_flow[e] = prog.add_variable();
        lay.q_flow[e] = prog.add_variable();
        lay.l_sq[e] = prog.add_variable(cfg.omega);
    }
    lay.p0 = prog.add_variable();
    lay.q0 = prog.add_variable();

    prog.add_equality({{lay.v_sq[0], 1.0}}, net.v0());

    // power balance at every bus
    std::vector<std::vector<std::size_t>> pv_at(nb);
    for (std::size_t u = 0; u < pvs.size(); ++u) pv_at[pvs[u].bus].push_back(u);
    for (std::size_t j = 0; j < nb; ++j) {
        const auto& bus = net.buses()[j];
        double p_pv = 0.0;
        for (std::size_t u : pv_at[j]) p_pv += pvs[u].p_gen;
        std::vector<Entry> prow, qrow;
        if (const auto parent = net.parent_line(j)) {
            const auto& ln = lines[*parent];
            prow = {{lay.p_flow[*parent], 1.0}, {lay.l_sq[*parent], -ln.r}};
            qrow = {{lay.q_flow[*parent], 1.0}, {lay.l_sq[*parent], -ln.x}};
        } else {
            prow = {{lay.p0, 1.0}};
            qrow = {{lay.q0, 1.0}};
        }
        for (std::size_t c : net.child_lines(j)) {
            prow.push_back({lay.p_flow[c], -1.0});
            qrow.push_back({lay.q_flow[c], -1.0});
        }
        for (std::size_t u : pv_at[j]) qrow.push_back({lay.q_pv[u], 1.0});
        prog.add_equality(prow, bus.p_load - p_pv);
        prog.add_equality(qrow, bus.q_load);
    }

    // voltage drop and relaxed branch equation ||(2P, 2Q, v_i - l)|| <= v_i + l
    for (std::size_t e = 0; e < nl; ++e) {
        const auto& ln = lines[e];
        const std::size_t vi = lay.v_sq[ln.from];
        const std::size_t vj = lay.v_sq[ln.to];
        prog.add_equality({{vj, 1.0},
                           {vi, -1.0},
                           {lay.p_flow[e], 2.0 * ln.r},
                           {lay.q_flow[e], 2.0 * ln.x},
                           {lay.l_sq[e], -(ln.r * ln.r + ln.x * ln.x)}},
                          0.0);
        const std::size_t a = prog.add_variable();
        const std::size_t b = prog.add_variable();
        const std::size_t c = prog.add_variable();
        const std::size_t d = prog.add_variable();
        prog.add_equality({{a, 1.0}, {vi, -1.0}, {lay.l_sq[e], -1.0}}, 0.0);
        prog.add_equality({{b, 1.0}, {lay.p_flow[e], -2.0}}, 0.0);
        prog.add_equality({{c, 1.0}, {lay.q_flow[e], -2.0}}, 0.0);
        prog.add_equality({{d, 1.0}, {vi, -1.0}, {lay.l_sq[e], 1.0}}, 0.0);
        prog.add_soc({a, b, c, d});
    }

    // robust limits, each as a nonnegative slack (plus a penalized violation in the fallback)
    // violations enter through one norm ||u||_2, so conflicting requirements on
    // the same quantity settle at their midpoint instead of anywhere in between
    std::vector<std::size_t> all_viol;
    auto limit_row = [&](std::vector<Entry> row, double rhs, std::vector<std::size_t>* viol) {
        row.push_back({slack(), -1.0});
        if (slack_penalized) {
            const std::size_t u = prog.add_variable();
            row.push_back({u, 1.0});
            viol->push_back(u);
            all_viol.push_back(u);
        }
        prog.add_equality(row, rhs);
    };
    const double vmin2 = lim.v_min * lim.v_min;
    const double vmax2 = lim.v_max * lim.v_max;
    const double imax2 = lim.i_max * lim.i_max;
    const double smax2 = lim.s0_max * lim.s0_max;
    for (std::size_t j = 0; j < nb; ++j) {
        // v + lower - Vmin^2 >= 0 ; Vmax^2 - v - upper >= 0
        limit_row({{lay.v_sq[j], 1.0}}, vmin2 - bounds.voltage.lower[j], &lay.viol_v_low);
        limit_row({{lay.v_sq[j], -1.0}}, bounds.voltage.upper[j] - vmax2, &lay.viol_v_high);
    }
    for (std::size_t e = 0; e < nl; ++e) {
        limit_row({{lay.l_sq[e], -1.0}}, bounds.current.upper[e] - imax2, &lay.viol_i);
    }
    // substation: ||(P0, Q0)|| <= t, with t pinned to the robust magnitude limit
    {
        const double room = smax2 - bounds.substation.upper[0];
        lay.s0_cap = prog.add_variable();
        std::vector<Entry> row{{lay.s0_cap, 1.0}};
        if (slack_penalized) {
            const std::size_t u = prog.add_variable();
            row.push_back({u, -1.0});
            lay.viol_s = u;
            all_viol.push_back(u);
        }
        prog.add_equality(row, room >= 0.0 ? std::sqrt(room) : -std::sqrt(-room));
        const std::size_t b = prog.add_variable();
        const std::size_t c = prog.add_variable();
        prog.add_equality({{b, 1.0}, {lay.p0, -1.0}}, 0.0);
        prog.add_equality({{c, 1.0}, {lay.q0, -1.0}}, 0.0);
        prog.add_soc({lay.s0_cap, b, c});
    }
    if (slack_penalized) prog.set_cost(prog.add_epigraph_norm(all_viol), cfg.violation_penalty);
    prog.add_nonneg(std::move(nonneg));
    return out;
}

namespace {

// Solves at cfg.omega and, while the relaxation is inexact, again at larger weights up to omega_max.
FilterResult solve_escalating(const grid::Network& net, std::span<const double> q_learn, const DRSFConfig& cfg,
                              bool penalized)
{
    const auto t0 = std::chrono::steady_clock::now();
    DRSFConfig run = cfg;
    for (;;) {
        const DrsfProgram built = build_drsf(net, q_learn, run, penalized);
        const auto sol = run_solver(built.program, run.solver);
        if (sol.status == conic::SolveStatus::Infeasible && !penalized) {
            const FilterResult probe = solve_escalating(net, q_learn, cfg, true);
            auto classes = probe.violated_classes;
            if (classes.empty()) classes.push_back("unknown");
            throw InfeasibleFilter(classes);
        }
        if (sol.status != conic::SolveStatus::Optimal) {
            throw SolverFailure(std::string(penalized ? "fallback " : "") + "filter program ended with status " +
                                conic::to_string(sol.status));
        }
        FilterResult res = extract(net, q_learn, run, built.layout, sol);
        res.omega = run.omega;
        const double next = std::max(run.omega * cfg.omega_growth, cfg.omega_floor);
        if (res.exact || next > cfg.omega_max || !(cfg.omega_growth > 1.0)) {
            if (penalized) {
                res.fallback = true;
                collect_violations(built.layout, sol, res);
            }
            res.solve_time = elapsed(t0);
            return res;
        }
        run.omega = next;
    }
}

}  // namespace

FilterResult filter_action(const grid::Network& net, std::span<const double> q_learn, const DRSFConfig& cfg)
{
    return solve_escalating(net, q_learn, cfg, false);
}

FilterResult filter_action_fallback(const grid::Network& net, std::span<const double> q_learn,
                                    const DRSFConfig& cfg)
{
    return solve_escalating(net, q_learn, cfg, true);
}

double relaxation_gap(const grid::Network& net, const grid::OperatingPoint& op)
{
    if (op.l_sq.size() != net.num_lines() || op.v_sq.size() != net.num_buses()) {
        throw DimensionError("operating point does not match the network");
    }
    double gap = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < net.num_lines(); ++e) {
        const auto& ln = net.lines()[e];
        gap = std::max(gap, op.v_sq[ln.from] * op.l_sq[e] - op.p_flow[e] * op.p_flow[e] - op.q_flow[e] * op.q_flow[e]);
    }
    return net.num_lines() == 0 ? 0.0 : gap;
}

}  // namespace drsf::filter
