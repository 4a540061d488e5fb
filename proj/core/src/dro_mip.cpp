// Big-M mixed-integer reformulation of the worst-case coverage constraint:
//
//   min  sum_k (upper_k - lower_k)
//   s.t. lower_k <= 0 <= upper_k
//        alpha*gamma - eps*v >= (1/N) sum_s z_s
//        gamma - z_s <= r_s
//        r_s <= upper_k - xi_ks + M_s (1 - y_s)      for every k
//        r_s <= xi_ks - lower_k + M_s (1 - y_s)      for every k
//        r_s <= M_s y_s
//        sum_s y_s >= (1 - alpha) N
//        v >= 1, gamma, r, z >= 0, y binary
//
// solved by depth-first branch-and-bound over y with LP relaxations.

#include <algorithm>
#include <cmath>
#include <optional>

#include "drsf/conic.hpp"
#include "drsf/dro.hpp"
#include "drsf/error.hpp"

namespace drsf::dro {

namespace {

using conic::ConicProgram;
using conic::Entry;

// Builds the relaxation; fixed[s] = -1 leaves y_s in [0, 1], otherwise pins it.
ConicProgram build_lp(const ErrorSampleSet& samples, const WassersteinBall& ball, const std::vector<int>& fixed,
                      std::vector<std::size_t>& lower_neg, std::vector<std::size_t>& upper,
                      std::vector<std::size_t>& y)
{
    const std::size_t n = samples.size();
    const std::size_t dim = samples.dim();
    const double inv_n = 1.0 / static_cast<double>(n);

    double scale = 0.0;
    for (const auto& row : samples.samples) {
        for (double v : row) scale = std::max(scale, std::abs(v));
    }
    double big_m = 2.0 * scale + 1.0;
    if (ball.alpha > 0.0) big_m += 2.0 * ball.epsilon / ball.alpha;

    ConicProgram lp;
    std::vector<std::size_t> nonneg;
    auto var = [&](double cost) {
        const std::size_t i = lp.add_variable(cost);
        nonneg.push_back(i);
        return i;
    };
    lower_neg.clear();
    upper.clear();
    y.clear();
    for (std::size_t k = 0; k < dim; ++k) lower_neg.push_back(var(1.0));
    for (std::size_t k = 0; k < dim; ++k) upper.push_back(var(1.0));
    const std::size_t gamma = var(0.0);
    const std::size_t v_extra = var(0.0);  // v = 1 + v_extra
    std::vector<std::size_t> r(n), z(n);
    for (std::size_t s = 0; s < n; ++s) {
        r[s] = var(0.0);
        z[s] = var(0.0);
        y.push_back(var(0.0));
    }

    {
        std::vector<Entry> row{{gamma, ball.alpha}, {v_extra, -ball.epsilon}, {var(0.0), -1.0}};
        for (std::size_t s = 0; s < n; ++s) row.push_back({z[s], -inv_n});
        lp.add_equality(row, ball.epsilon);
    }
    for (std::size_t s = 0; s < n; ++s) {
        lp.add_equality({{gamma, 1.0}, {z[s], -1.0}, {r[s], -1.0}, {var(0.0), 1.0}}, 0.0);
        for (std::size_t k = 0; k < dim; ++k) {
            const double xi = samples.samples[s][k];
            lp.add_equality({{r[s], 1.0}, {upper[k], -1.0}, {y[s], big_m}, {var(0.0), 1.0}}, big_m - xi);
            lp.add_equality({{r[s], 1.0}, {lower_neg[k], -1.0}, {y[s], big_m}, {var(0.0), 1.0}}, big_m + xi);
        }
        lp.add_equality({{r[s], 1.0}, {y[s], -big_m}, {var(0.0), 1.0}}, 0.0);
        if (fixed[s] < 0) {
            lp.add_equality({{y[s], 1.0}, {var(0.0), 1.0}}, 1.0);
        } else {
            lp.add_equality({{y[s], 1.0}}, static_cast<double>(fixed[s]));
        }
    }
    {
        std::vector<Entry> row{{var(0.0), -1.0}};
        for (std::size_t s = 0; s < n; ++s) row.push_back({y[s], 1.0});
        lp.add_equality(row, (1.0 - ball.alpha) * static_cast<double>(n));
    }
    lp.add_nonneg(std::move(nonneg));
    return lp;
}

struct NodeResult {
    bool feasible = false;
    double objective = 0.0;
    std::vector<double> y;
    std::vector<double> lower, upper;
};

NodeResult solve_node(const ErrorSampleSet& samples, const WassersteinBall& ball, const std::vector<int>& fixed,
                      const MipOptions& options)
{
    std::vector<std::size_t> lower_neg, upper, y;
    const ConicProgram lp = build_lp(samples, ball, fixed, lower_neg, upper, y);
    conic::SolverSettings settings;
    settings.tol = options.lp_tol;
    settings.infeasibility_tol = 1e-9;
    settings.max_iter = 200;
    const auto sol = conic::solve(lp, settings);
    NodeResult res;
    if (sol.status == conic::SolveStatus::Infeasible) return res;
    if (sol.status != conic::SolveStatus::Optimal) {
        throw SolverFailure(std::string("MIP relaxation ended with status ") + conic::to_string(sol.status));
    }
    res.feasible = true;
    res.objective = sol.objective;
    for (std::size_t i : y) res.y.push_back(sol.primal[i]);
    for (std::size_t i : lower_neg) res.lower.push_back(-sol.primal[i]);
    for (std::size_t i : upper) res.upper.push_back(sol.primal[i]);
    return res;
}

struct Search {
    const ErrorSampleSet& samples;
    const WassersteinBall& ball;
    const MipOptions& options;
    std::optional<NodeResult> incumbent;

    void explore(std::vector<int>& fixed)
    {
        NodeResult node = solve_node(samples, ball, fixed, options);
        if (!node.feasible) return;
        if (incumbent && node.objective >= incumbent->objective - 1e-12) return;

        std::size_t branch = fixed.size();
        double most = -1.0;
        for (std::size_t s = 0; s < fixed.size(); ++s) {
            if (fixed[s] >= 0) continue;
            const double frac = std::min(node.y[s], 1.0 - node.y[s]);
            if (frac > most) {
                most = frac;
                branch = s;
            }
        }
        if (most <= 1e-7) {
            // integral relaxation: pin every free y to its rounded value for an exact objective
            std::vector<int> pinned = fixed;
            for (std::size_t s = 0; s < pinned.size(); ++s) {
                if (pinned[s] < 0) pinned[s] = node.y[s] > 0.5 ? 1 : 0;
            }
            NodeResult leaf = pinned == fixed ? node : solve_node(samples, ball, pinned, options);
            if (leaf.feasible) {
                if (!incumbent || leaf.objective < incumbent->objective) incumbent = std::move(leaf);
                return;
            }
            if (branch == fixed.size()) return;
        }
        const int first = node.y[branch] >= 0.5 ? 1 : 0;
        for (int value : {first, 1 - first}) {
            fixed[branch] = value;
            explore(fixed);
        }
        fixed[branch] = -1;
    }
};

}  // namespace

RobustBounds solve_bounds_mip(const ErrorSampleSet& samples, const WassersteinBall& ball, const MipOptions& options)
{
    samples.validate();
    ball.validate();
    if (samples.size() > options.max_samples) throw SizeGuard(samples.size(), options.max_samples);

    Search search{samples, ball, options, std::nullopt};
    std::vector<int> fixed(samples.size(), -1);
    search.explore(fixed);
    if (!search.incumbent) {
        const std::vector<double> lo(samples.dim(), -1e12), hi(samples.dim(), 1e12);
        throw InfeasibleBounds(worst_case_box_probability(samples, ball, lo, hi), "mixed-integer program is infeasible");
    }
    RobustBounds out;
    out.kind = samples.kind;
    out.lower = search.incumbent->lower;
    out.upper = search.incumbent->upper;
    // the relaxation may leave the sign constraints active only to solver precision
    for (auto& v : out.lower) v = std::min(v, 0.0);
    for (auto& v : out.upper) v = std::max(v, 0.0);
    out.epsilon = ball.epsilon;
    out.alpha = ball.alpha;
    out.certified_prob = worst_case_box_probability(samples, ball, out.lower, out.upper);
    // LP solutions are accurate to the solver tolerance; widen by the smallest
    // margin that restores an exact certificate
    const std::vector<double> lo0 = out.lower, hi0 = out.upper;
    for (double margin = 1e-13; !validate_bounds(out, samples, ball).pass && margin < 1e-3; margin *= 2.0) {
        for (std::size_t k = 0; k < lo0.size(); ++k) {
            out.lower[k] = lo0[k] - margin;
            out.upper[k] = hi0[k] + margin;
        }
        out.certified_prob = worst_case_box_probability(samples, ball, out.lower, out.upper);
    }
    return out;
}

}  // namespace drsf::dro
