#include <doctest.h>

#include <sstream>

#include "drsf/error.hpp"
#include "drsf/harness.hpp"
#include "fixtures.hpp"

using namespace drsf;
using namespace drsf::sim;

namespace {

EpisodeConfig quick_config(const grid::Network& net, std::size_t horizon)
{
    EpisodeConfig cfg;
    cfg.horizon = horizon;
    cfg.drsf.bounds = filter::BoundSet::zero(net);
    cfg.record_timing = false;
    return cfg;
}

class WrongSize : public Controller {
public:
    std::string name() const override { return "wrong"; }
    std::vector<double> act(const Observation&) override { return {0.0}; }
};

}  // namespace

TEST_CASE("error samples")
{
    const auto net = fixtures::ieee33_pv();
    SUBCASE("no parameter error gives zero samples")
    {
        const auto s = generate_error_samples(net, 0.0, 5, 3);
        REQUIRE(s.voltage.size() == 5);
        CHECK(s.voltage.dim() == 33);
        CHECK(s.current.dim() == 32);
        CHECK(s.substation.dim() == 1);
        for (const auto* set : {&s.voltage, &s.current, &s.substation})
            for (const auto& row : set->samples)
                for (double x : row) CHECK(std::abs(x) <= 1e-9);
    }
    SUBCASE("seeded")
    {
        const auto a = generate_error_samples(net, 0.3, 4, 8);
        const auto b = generate_error_samples(net, 0.3, 4, 8);
        const auto c = generate_error_samples(net, 0.3, 4, 9);
        CHECK(a.voltage.samples == b.voltage.samples);
        CHECK(a.substation.samples == b.substation.samples);
        CHECK(a.voltage.samples != c.voltage.samples);
    }
    SUBCASE("bounds from samples contain zero")
    {
        const auto s = generate_error_samples(net, 0.3, 20, 4);
        const auto b = compute_bounds(s, {0.001, 0.1});
        for (std::size_t j = 0; j < 33; ++j) {
            CHECK(b.voltage.lower[j] <= 0.0);
            CHECK(b.voltage.upper[j] >= 0.0);
        }
        CHECK(b.substation.certified_prob >= 0.9 - 1e-12);
    }
}

TEST_CASE("count_violations")
{
    grid::OperatingPoint op;
    op.v_sq = {1.0, 0.9, 1.2, 0.9025 - 5e-7};
    op.l_sq = {12.0, 11.0};
    op.p0 = 3.0;
    op.q0 = 2.0;
    const grid::OperationalLimits lim;  // 0.95 / 1.05 / 3.46 / 3.46
    const auto c = count_violations(op, lim);
    CHECK(c.voltage == 2);
    CHECK(c.current == 1);
    CHECK(c.substation == 1);
    CHECK(c.total() == 4);
    CHECK(count_violations(op, lim, 0.0).voltage == 3);

    ViolationCounts sum;
    sum += c;
    sum += c;
    CHECK(sum.voltage == 4);
}

TEST_CASE("compute_reward")
{
    CHECK(compute_reward(0.1, 0.01, RewardWeights{}) == doctest::Approx(-210.0));
    CHECK(compute_reward(0.0, 0.0, RewardWeights{}) == 0.0);
    CHECK(compute_reward(1.0, 2.0, RewardWeights{1.0, 0.5}) == doctest::Approx(-2.0));
}

TEST_CASE("episode configuration errors")
{
    const auto net = fixtures::ieee33_pv();
    RandomController ctl(1);
    auto cfg = quick_config(net, 2);
    cfg.sigma = -1.0;
    CHECK_THROWS_AS(run_episode(cfg, ctl, net), ConfigError);
    cfg = quick_config(net, 2);
    cfg.drsf.bounds.reset();
    CHECK_THROWS_AS(run_episode(cfg, ctl, net), BoundsMissing);
    cfg.filter_on = false;
    CHECK_NOTHROW(run_episode(cfg, ctl, net));

    WrongSize bad;
    try {
        run_episode(quick_config(net, 3), bad, net);
        FAIL("expected StepError");
    } catch (const StepError& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("empty horizon")
{
    const auto net = fixtures::ieee33_pv();
    RandomController ctl(1);
    const auto rep = run_episode(quick_config(net, 0), ctl, net);
    CHECK(rep.steps.empty());
    CHECK(rep.totals().total() == 0);
}

TEST_CASE("filter keeps the exact model safe")
{
    const auto net = fixtures::ieee33_pv();
    auto cfg = quick_config(net, 24);
    cfg.sigma = 0.0;
    RandomController ctl(5);
    const auto rep = run_episode(cfg, ctl, net);
    REQUIRE(rep.steps.size() == 24);
    CHECK(rep.totals().total() == 0);
    CHECK(rep.fallback_steps() == 0);
}

TEST_CASE("filtered runs violate less than unfiltered runs")
{
    const auto net = fixtures::ieee33_pv();
    auto cfg = quick_config(net, 24);
    cfg.redraw_each_step = true;
    RandomController a(7), b(7);
    const auto on = run_episode(cfg, a, net);
    cfg.filter_on = false;
    const auto off = run_episode(cfg, b, net);
    CHECK(off.totals().voltage > 0);
    CHECK(on.totals().voltage < off.totals().voltage);
    for (const auto& s : off.steps) CHECK(s.deviation == 0.0);
}

TEST_CASE("reproducibility and thread invariance")
{
    const auto net = fixtures::ieee33_pv();
    auto cfg = quick_config(net, 6);
    cfg.n_scenarios = 3;
    const auto factory = make_controller_factory("random", 11);
    const auto one = run_scenarios(cfg, factory, net, 1);
    const auto again = run_scenarios(cfg, factory, net, 1);
    const auto three = run_scenarios(cfg, factory, net, 3);
    REQUIRE(one.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(one[k].scenario == k);
        CHECK(one[k].steps == again[k].steps);
        CHECK(one[k].steps == three[k].steps);
    }
    const auto summary = summarize(one);
    CHECK(summary.steps == 18);
}

TEST_CASE("controllers")
{
    const auto net = fixtures::ieee33_pv();
    auto cfg = quick_config(net, 4);
    cfg.filter_on = false;
    GreedyVoltController greedy;
    const auto rep = run_episode(cfg, greedy, net);
    CHECK(rep.steps.size() == 4);
    CHECK_THROWS_AS(make_controller_factory("sac", 1), ConfigError);
}

TEST_CASE("profile CSV")
{
    std::istringstream ok("step,load_scale,pv_scale\n0,0.5,0\n1,1.0,0.8\n");
    const auto p = parse_profile_csv(ok);
    CHECK(p.size() == 2);
    CHECK(p.load_at(3) == 1.0);
    CHECK(p.pv_at(1) == doctest::Approx(0.8));
    std::istringstream bad("step,load_scale,pv_scale\n0,x,0\n");
    CHECK_THROWS_AS(parse_profile_csv(bad), ParseError);

    const auto a = synthetic_profile(96, 3);
    const auto b = synthetic_profile(96, 3);
    CHECK(a.load_scale == b.load_scale);
    CHECK(a.pv_at(0) <= a.pv_at(48));
}

TEST_CASE("small epsilon sweep")
{
    const auto net = fixtures::ieee33_pv();
    const auto samples = generate_error_samples(net, 0.3, 20, 2);
    auto cfg = quick_config(net, 4);
    cfg.sigma = 0.3;
    const auto points = run_sweep({0.0, 0.001}, 0.1, samples, cfg, make_controller_factory("random", 3), net);
    REQUIRE(points.size() == 2);
    CHECK(points[0].steps == 4);
    CHECK(points[1].voltage_width >= points[0].voltage_width);
    CHECK(points[1].violation_probability <= points[0].violation_probability);
}
