#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drsf/conic.hpp"
#include "drsf/dro.hpp"
#include "drsf/network.hpp"
#include "drsf/power_flow.hpp"

namespace drsf::filter {

struct BoundSet {
    dro::RobustBounds voltage;     // per bus, p.u.^2
    dro::RobustBounds current;     // per line, p.u.^2
    dro::RobustBounds substation;  // scalar, p.u.^2

    /// Bounds of zero width for `net`: the filter then enforces the nominal limits.
    static BoundSet zero(const grid::Network& net);
};

struct DRSFConfig {
    double omega = 1e-5;           // weight on total squared current
    double relaxation_tol = 1e-5;  // exactness gap above which a result is flagged
    std::optional<BoundSet> bounds;
    /// Overrides the network's limits without validating them.
    std::optional<grid::OperationalLimits> limits;
    conic::SolverSettings solver;
    /// Weight on the Euclidean norm of the violations in the fallback program.
    double violation_penalty = 1e3;
    /// While the exactness gap exceeds relaxation_tol, re-solve with omega
    /// raised to max(omega * omega_growth, omega_floor), up to omega_max.
    /// omega_max <= omega solves once.
    double omega_max = 10.0;
    double omega_growth = 10.0;
    double omega_floor = 1e-3;
};

struct FilterResult {
    std::vector<double> q_safe;
    double deviation = 0.0;  // Euclidean norm of q_learn - q_safe
    grid::OperatingPoint predicted;
    double exactness_gap = 0.0;
    bool exact = true;  // exactness_gap <= relaxation_tol
    conic::SolveStatus status = conic::SolveStatus::Optimal;
    double solve_time = 0.0;  // seconds
    double objective = 0.0;
    bool fallback = false;
    double omega = 0.0;  // weight of the returned solve
    /// Fallback only: constraint classes that could not be met and their total violation.
    std::vector<std::string> violated_classes;
    double total_violation = 0.0;
};

/// Variable indices of an assembled filter program.
struct DrsfLayout {
    std::vector<std::size_t> q_pv;
    std::vector<std::size_t> p_flow, q_flow, l_sq;
    std::vector<std::size_t> v_sq;
    std::size_t p0 = 0, q0 = 0;
    std::size_t deviation = 0;  // epigraph of the action change norm
    std::size_t s0_cap = 0;     // robust limit on sqrt(P0^2 + Q0^2)
    // fallback only
    std::vector<std::size_t> viol_v_low, viol_v_high, viol_i;
    std::optional<std::size_t> viol_s;
};

struct DrsfProgram {
    conic::ConicProgram program;
    DrsfLayout layout;
};

/// Assembles the filter's second-order cone program for `net` and `q_learn`.
/// With `slack_penalized` every robust limit gets a penalized violation
/// variable, so the program is always feasible.
/// Throws DimensionError or BoundsMissing.
DrsfProgram build_drsf(const grid::Network& net, std::span<const double> q_learn, const DRSFConfig& cfg,
                       bool slack_penalized = false);

/// Closest robust-feasible action to `q_learn`.
/// Throws InfeasibleFilter (naming the classes that cannot be met) or SolverFailure.
FilterResult filter_action(const grid::Network& net, std::span<const double> q_learn, const DRSFConfig& cfg);

/// Action minimizing the filter objective plus violation_penalty times the
/// Euclidean norm of the robust-limit violations. Labeled fallback = true.
FilterResult filter_action_fallback(const grid::Network& net, std::span<const double> q_learn,
                                    const DRSFConfig& cfg);

/// max over lines of v_from * l - P^2 - Q^2.
double relaxation_gap(const grid::Network& net, const grid::OperatingPoint& op);

}  // namespace drsf::filter
