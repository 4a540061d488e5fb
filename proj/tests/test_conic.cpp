#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "drsf/conic.hpp"
#include "drsf/error.hpp"

using namespace drsf;
using namespace drsf::conic;

namespace {

// minimize c'x over a product of unit balls in R^4 with one linear equality a'x = b.
struct BallProgram {
    std::vector<double> c, a;
    double b = 0.0;
    std::size_t groups = 5, dim = 4;
};

BallProgram random_balls(unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    BallProgram bp;
    const auto n = bp.groups * bp.dim;
    bp.c.resize(n);
    bp.a.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        bp.c[i] = g(rng);
        bp.a[i] = g(rng);
    }
    bp.b = 0.3 * g(rng);
    return bp;
}

ConicProgram build(const BallProgram& bp, double scale = 1.0)
{
    ConicProgram prog;
    std::vector<Entry> link;
    for (std::size_t k = 0; k < bp.groups; ++k) {
        const auto t = prog.add_variable();
        const auto x = prog.add_variables(bp.dim);
        std::vector<std::size_t> idx{t};
        for (std::size_t i = 0; i < bp.dim; ++i) {
            idx.push_back(x + i);
            prog.set_cost(x + i, scale * bp.c[k * bp.dim + i]);
            link.push_back({x + i, scale * bp.a[k * bp.dim + i]});
        }
        prog.add_soc(idx);
        prog.add_equality({{t, 1.0}}, 1.0);
    }
    prog.add_equality(link, scale * bp.b);
    return prog;
}

// Lagrangian dual: max over lambda of -lambda b - sum_g ||c_g + lambda a_g||, concave in lambda.
double dual_oracle(const BallProgram& bp)
{
    auto f = [&](double lam) {
        double v = -lam * bp.b;
        for (std::size_t k = 0; k < bp.groups; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < bp.dim; ++i) {
                const double w = bp.c[k * bp.dim + i] + lam * bp.a[k * bp.dim + i];
                s += w * w;
            }
            v -= std::sqrt(s);
        }
        return v;
    };
    double lo = -100.0, hi = 100.0;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double m1 = hi - phi * (hi - lo), m2 = lo + phi * (hi - lo);
    double f1 = f(m1), f2 = f(m2);
    for (int it = 0; it < 200; ++it) {
        if (f1 < f2) {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + phi * (hi - lo);
            f2 = f(m2);
        } else {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - phi * (hi - lo);
            f1 = f(m1);
        }
    }
    return f(0.5 * (lo + hi));
}

}  // namespace

TEST_CASE("scalar lower bound")
{
    ConicProgram prog;
    const auto x = prog.add_variable(1.0);
    const auto s = prog.add_variable();
    prog.add_nonneg({s});
    prog.add_equality({{x, 1.0}, {s, -1.0}}, 1.0);
    const auto sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.primal[x] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("norm of a fixed vector")
{
    ConicProgram prog;
    const auto u = prog.add_variables(2);
    prog.add_equality({{u, 1.0}}, 3.0);
    prog.add_equality({{u + 1, 1.0}}, 4.0);
    const std::vector<std::size_t> vec{u, u + 1};
    const auto t = prog.add_epigraph_norm(vec);
    prog.set_cost(t, 1.0);
    const auto sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.primal[t] == doctest::Approx(5.0).epsilon(1e-7));
}

TEST_CASE("epigraph of an empty vector")
{
    ConicProgram prog;
    const auto t = prog.add_epigraph_norm({});
    prog.set_cost(t, 1.0);
    const auto sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.primal[t]) <= 1e-7);
}

TEST_CASE("kkt_residuals on a hand-built pair")
{
    // min x s.t. x - s = 1, s >= 0. Optimal z = (1, 0), y = -1, cone dual s = 1.
    ConicProgram prog;
    const auto x = prog.add_variable(1.0);
    const auto s = prog.add_variable();
    prog.add_nonneg({s});
    prog.add_equality({{x, 1.0}, {s, -1.0}}, 1.0);
    ConicSolution sol;
    sol.primal = {1.0, 0.0};
    sol.eq_dual = {-1.0};
    sol.cone_dual = {1.0};
    const auto exact = kkt_residuals(prog, sol);
    CHECK(exact.max() <= 1e-14);

    sol.primal = {1.001, 0.0};
    const auto off = kkt_residuals(prog, sol);
    CHECK(off.primal == doctest::Approx(1e-3));
    CHECK(off.gap == doctest::Approx(1e-3 / 2.001));

    sol.primal = {1.0};
    CHECK_THROWS_AS(kkt_residuals(prog, sol), DimensionError);
}

TEST_CASE("20-variable ball program matches its Lagrangian dual")
{
    for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
        CAPTURE(seed);
        const auto bp = random_balls(seed);
        const auto sol = solve(build(bp));
        REQUIRE(sol.status == SolveStatus::Optimal);
        CHECK(sol.kkt.max() <= 1e-8);
        CHECK(std::abs(sol.objective - dual_oracle(bp)) <= 1e-5);
    }
}

TEST_CASE("objective scales with the cost and constraint scaling")
{
    const auto bp = random_balls(11);
    const auto base = solve(build(bp));
    const auto scaled = solve(build(bp, 3.0));
    REQUIRE(base.status == SolveStatus::Optimal);
    REQUIRE(scaled.status == SolveStatus::Optimal);
    CHECK(scaled.objective == doctest::Approx(3.0 * base.objective).epsilon(1e-6));
}

TEST_CASE("weak duality at the returned pair")
{
    const auto bp = random_balls(17);
    const auto prog = build(bp);
    const auto sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    double dual_obj = 0.0;
    for (std::size_t r = 0; r < prog.num_equalities(); ++r) dual_obj -= prog.rhs()[r] * sol.eq_dual[r];
    CHECK(sol.objective >= dual_obj - 1e-7);
}

TEST_CASE("infeasible and unbounded programs are detected")
{
    SUBCASE("negative value in the nonnegative orthant")
    {
        ConicProgram prog;
        const auto x = prog.add_variable(1.0);
        prog.add_nonneg({x});
        prog.add_equality({{x, 1.0}}, -1.0);
        CHECK(solve(prog).status == SolveStatus::Infeasible);
    }
    SUBCASE("conflicting equalities on a cone")
    {
        ConicProgram prog;
        const auto t = prog.add_variables(3);
        prog.add_soc({t, t + 1, t + 2});
        prog.add_equality({{t, 1.0}}, 1.0);
        prog.add_equality({{t + 1, 1.0}}, 2.0);
        CHECK(solve(prog).status == SolveStatus::Infeasible);
    }
    SUBCASE("ray along the cone")
    {
        ConicProgram prog;
        const auto x = prog.add_variable(-1.0);
        prog.add_nonneg({x});
        CHECK(solve(prog).status == SolveStatus::Unbounded);
    }
}

TEST_CASE("dependent equality rows are dropped with a warning")
{
    ConicProgram prog;
    const auto x = prog.add_variables(2);
    prog.set_cost(x, 1.0);
    prog.set_cost(x + 1, 1.0);
    prog.add_nonneg({x, x + 1});
    prog.add_equality({{x, 1.0}, {x + 1, 1.0}}, 2.0);
    prog.add_equality({{x, 2.0}, {x + 1, 2.0}}, 4.0);
    const auto sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-7));
    CHECK_FALSE(sol.warnings.empty());
}

TEST_CASE("solves are deterministic")
{
    const auto prog = build(random_balls(23));
    const auto a = solve(prog);
    const auto b = solve(prog);
    CHECK(a.iterations == b.iterations);
    CHECK(a.primal == b.primal);
    CHECK(a.eq_dual == b.eq_dual);
}

TEST_CASE("dump and parse round trip")
{
    const auto prog = build(random_balls(29));
    std::stringstream ss;
    prog.dump(ss);
    const auto back = ConicProgram::parse(ss);
    CHECK(back.num_vars() == prog.num_vars());
    CHECK(back.num_equalities() == prog.num_equalities());
    CHECK(back.cones().size() == prog.cones().size());
    CHECK(back.cost() == prog.cost());
    CHECK(back.rhs() == prog.rhs());
    CHECK(solve(back).objective == solve(prog).objective);
}

TEST_CASE("invalid cone indices")
{
    ConicProgram prog(2);
    prog.add_nonneg({0});
    prog.add_soc({0, 1});
    CHECK_THROWS_AS(prog.validate(), DimensionError);
    ConicProgram out(1);
    out.add_nonneg({3});
    CHECK_THROWS_AS(out.validate(), DimensionError);
}
