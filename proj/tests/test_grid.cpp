#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "drsf/error.hpp"
#include "drsf/network.hpp"
#include "drsf/network_io.hpp"
#include "drsf/power_flow.hpp"
#include "fixtures.hpp"

using namespace drsf;
using namespace drsf::grid;

namespace {

Network parse(const std::string& bus, const std::string& line)
{
    std::istringstream b(bus), l(line);
    return parse_network(b, l);
}

const char* kTwoBusCsv = "#base,1,1\nid,p_load_kw,q_load_kvar,pv_p_kw,pv_s_kva\n0,0,0,,\n1,200,100,,\n";
const char* kTwoLineCsv = "from,to,r_ohm,x_ohm\n0,1,0.05,0.05\n";

}  // namespace

TEST_CASE("bus/line CSV pair loads into per-unit network")
{
    const auto net = parse(kTwoBusCsv, kTwoLineCsv);
    CHECK(net.num_buses() == 2);
    CHECK(net.num_lines() == 1);
    // 1 MVA and 1 kV give a 1 ohm impedance base.
    CHECK(net.buses()[1].p_load == doctest::Approx(0.2));
    CHECK(net.buses()[1].q_load == doctest::Approx(0.1));
    CHECK(net.lines()[0].r == doctest::Approx(0.05));
}

TEST_CASE("33-bus feeder files")
{
    const auto net = fixtures::ieee33();
    CHECK(net.num_buses() == 33);
    CHECK(net.num_lines() == 32);
    CHECK(net.num_pv() == 0);
    const auto pv = fixtures::ieee33_pv();
    CHECK(pv.num_pv() == 5);
}

TEST_CASE("malformed network files")
{
    SUBCASE("duplicate line")
    {
        CHECK_THROWS_AS(parse(kTwoBusCsv, "from,to,r_ohm,x_ohm\n0,1,0.05,0.05\n0,1,0.05,0.05\n"), TopologyError);
    }
    SUBCASE("missing base")
    {
        CHECK_THROWS_AS(parse("id,p_load_kw,q_load_kvar,pv_p_kw,pv_s_kva\n0,0,0,,\n1,1,1,,\n", kTwoLineCsv), UnitError);
    }
    SUBCASE("bad number")
    {
        CHECK_THROWS_AS(parse("#base,1,1\nid,p_load_kw,q_load_kvar,pv_p_kw,pv_s_kva\n0,0,0,,\n1,abc,1,,\n", kTwoLineCsv),
                        ParseError);
    }
    SUBCASE("wrong column count")
    {
        CHECK_THROWS_AS(parse(kTwoBusCsv, "from,to,r_ohm,x_ohm\n0,1,0.05\n"), ParseError);
    }
}

TEST_CASE("radial orientation")
{
    SUBCASE("path")
    {
        const std::vector<Line> lines{{1, 0, 0.1, 0.1}, {1, 2, 0.1, 0.1}};
        const auto o = validate_radial(3, lines);
        CHECK(o.flipped[0]);
        CHECK_FALSE(o.flipped[1]);
        CHECK(o.parent_line[2] == std::optional<std::size_t>(1));
    }
    SUBCASE("star")
    {
        const std::vector<Line> lines{{0, 1, 0.1, 0.1}, {0, 2, 0.1, 0.1}, {3, 0, 0.1, 0.1}};
        const auto o = validate_radial(4, lines);
        CHECK(o.child_lines[0].size() == 3);
        CHECK(o.flipped[2]);
    }
    SUBCASE("triangle")
    {
        const std::vector<Line> lines{{0, 1, 0.1, 0.1}, {1, 2, 0.1, 0.1}, {2, 0, 0.1, 0.1}};
        CHECK_THROWS_AS(validate_radial(3, lines), TopologyError);
    }
}

TEST_CASE("apply_action respects inverter ratings")
{
    const auto net = fixtures::two_bus(0.05, 0.1, 0.05, 0.3, 0.5);
    const double qmax = 0.4;  // sqrt(0.5^2 - 0.3^2)
    CHECK(net.pv_units()[0].q_max() == doctest::Approx(qmax));

    const std::vector<double> zero{0.0};
    const auto same = apply_action(net, zero);
    CHECK(same.q_injection(1) == net.q_injection(1));

    const std::vector<double> edge{qmax};
    CHECK_NOTHROW(apply_action(net, edge));

    const std::vector<double> over{0.5};
    CHECK_THROWS_AS(apply_action(net, over), RatingError);

    const std::vector<double> two{0.0, 0.0};
    CHECK_THROWS_AS(apply_action(net, two), DimensionError);
}

TEST_CASE("zero load gives a flat profile")
{
    const auto op = solve_power_flow(fixtures::two_bus(0.05, 0.0, 0.0));
    CHECK(op.v_sq[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(op.l_sq[0] == doctest::Approx(0.0));
    CHECK(op.loss == doctest::Approx(0.0));
}

TEST_CASE("2-bus solution matches a scalar fixed-point oracle")
{
    // P = p + r l, Q = q + x l, l = (P^2 + Q^2) / v0, v1 = v0 - 2(rP + xQ) + (r^2 + x^2) l
    const double r = 0.05, x = 0.05, p = 0.2, q = 0.1, v0 = 1.0;
    double l = 0.0;
    for (int it = 0; it < 1000; ++it) {
        const double P = p + r * l, Q = q + x * l;
        const double next = (P * P + Q * Q) / v0;
        if (std::abs(next - l) < 1e-15) break;
        l = next;
    }
    const double P = p + r * l, Q = q + x * l;
    const double v1 = v0 - 2.0 * (r * P + x * Q) + (r * r + x * x) * l;

    const auto net = fixtures::two_bus(0.05, p, q);
    const auto op = solve_power_flow(net);
    CHECK(op.l_sq[0] == doctest::Approx(l).epsilon(1e-9));
    CHECK(op.v_sq[1] == doctest::Approx(v1).epsilon(1e-9));
    CHECK(op.l_sq[0] == doctest::Approx(0.05156).epsilon(1e-4 / 0.05156));
    CHECK(op.v_sq[1] == doctest::Approx(0.96974).epsilon(1e-4));
    CHECK(distflow_residuals(net, op).max() <= 1e-8);
}

TEST_CASE("33-bus base case matches a phasor sweep oracle")
{
    const auto net = fixtures::ieee33();
    const auto op = solve_power_flow(net);
    const auto mag = fixtures::phasor_sweep(net);
    for (std::size_t j = 0; j < net.num_buses(); ++j) CHECK(std::sqrt(op.v_sq[j]) == doctest::Approx(mag[j]).epsilon(1e-8));
    const double vmin = *std::min_element(mag.begin(), mag.end());
    CHECK(std::sqrt(op.min_v_sq()) == doctest::Approx(vmin).epsilon(2e-3));
    CHECK(vmin == doctest::Approx(0.913).epsilon(2e-3));
    CHECK(distflow_residuals(net, op).max() <= 1e-8);
}

TEST_CASE("power-flow failures")
{
    SUBCASE("iteration cap")
    {
        CHECK_THROWS_AS(solve_power_flow(fixtures::ieee33(), PowerFlowOptions{1e-10, 1}), NoConvergence);
    }
    SUBCASE("collapse under extreme load")
    {
        CHECK_THROWS_AS(solve_power_flow(fixtures::two_bus(0.5, 5.0, 5.0)), Error);
    }
    SUBCASE("non-positive tolerance")
    {
        CHECK_THROWS_AS(solve_power_flow(fixtures::ieee33(), PowerFlowOptions{0.0, 10}), ValidationError);
    }
}

TEST_CASE("loss equals generation minus load")
{
    const auto net = fixtures::ieee33_pv();
    const auto op = solve_power_flow(net);
    double gen = op.p0, load = 0.0;
    for (const auto& pv : net.pv_units()) gen += pv.p_gen;
    for (const auto& b : net.buses()) load += b.p_load;
    CHECK(std::abs(gen - load - op.loss) <= 1e-8);
    CHECK(std::abs(power_balance_mismatch(net, op)) <= 1e-8);
}

TEST_CASE("perturb_parameters")
{
    const auto net = fixtures::ieee33();
    SUBCASE("sigma 0 is the identity")
    {
        const auto same = perturb_parameters(net, 0.0, 5);
        for (std::size_t e = 0; e < net.num_lines(); ++e) {
            CHECK(same.lines()[e].r == net.lines()[e].r);
            CHECK(same.lines()[e].x == net.lines()[e].x);
        }
    }
    SUBCASE("seeded and bitwise reproducible")
    {
        const auto a = perturb_parameters(net, 0.3, 42);
        const auto b = perturb_parameters(net, 0.3, 42);
        const auto c = perturb_parameters(net, 0.3, 43);
        bool differs = false;
        for (std::size_t e = 0; e < net.num_lines(); ++e) {
            CHECK(a.lines()[e].r == b.lines()[e].r);
            CHECK(a.lines()[e].x == b.lines()[e].x);
            CHECK(a.lines()[e].r > 0.0);
            differs = differs || a.lines()[e].r != c.lines()[e].r;
        }
        CHECK(differs);
    }
    SUBCASE("relative deviations average near zero")
    {
        const auto a = perturb_parameters(net, 0.3, 7);
        double sum = 0.0;
        for (std::size_t e = 0; e < net.num_lines(); ++e) sum += a.lines()[e].r / net.lines()[e].r - 1.0;
        CHECK(std::abs(sum / static_cast<double>(net.num_lines())) <= 0.2);
    }
}

TEST_CASE("scale_injections")
{
    const auto net = fixtures::ieee33_pv();
    const auto dark = scale_injections(net, 0.5, 0.0);
    CHECK(dark.buses()[1].p_load == doctest::Approx(0.5 * net.buses()[1].p_load));
    for (const auto& pv : dark.pv_units()) {
        CHECK(pv.p_gen == 0.0);
        CHECK(pv.q_max() == doctest::Approx(pv.s_rating));
    }
    const auto capped = scale_injections(net, 1.0, 10.0);
    for (const auto& pv : capped.pv_units()) CHECK(pv.p_gen == doctest::Approx(pv.s_rating));
}
