#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "drsf/dro.hpp"
#include "drsf/error.hpp"

using namespace drsf;
using namespace drsf::dro;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ErrorSampleSet scalar(std::vector<double> xs)
{
    ErrorSampleSet set;
    set.kind = ErrorKind::Substation;
    for (double x : xs) set.samples.push_back({x});
    return set;
}

// Transport oracle: each inside sample can be pushed out at l-inf cost equal
// to its distance to the box complement; the adversary buys the cheapest first.
double greedy_oracle(const ErrorSampleSet& set, double eps, const std::vector<double>& lo, const std::vector<double>& hi)
{
    const double n = static_cast<double>(set.size());
    std::vector<double> d;
    for (const auto& s : set.samples) {
        double dist = kInf;
        bool inside = true;
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (s[k] < lo[k] || s[k] > hi[k]) inside = false;
            dist = std::min({dist, hi[k] - s[k], s[k] - lo[k]});
        }
        if (inside) d.push_back(dist);
    }
    std::sort(d.begin(), d.end());
    double prob = static_cast<double>(d.size()) / n;
    if (eps <= 0.0) return prob;
    double budget = eps;
    for (double di : d) {
        if (!std::isfinite(di)) break;
        const double mass = di > 0.0 ? std::min(1.0 / n, budget / di) : 1.0 / n;
        prob -= mass;
        budget -= mass * di;
        if (budget <= 0.0) break;
    }
    return std::max(prob, 0.0);
}

// Smallest width over intervals [a, b] with a, b in {0} u samples, a <= 0 <= b. Exact at eps = 0.
double enumeration_oracle(const ErrorSampleSet& set, const WassersteinBall& ball)
{
    std::vector<double> cand{0.0};
    for (const auto& s : set.samples) cand.push_back(s[0]);
    double best = kInf;
    for (double a : cand) {
        if (a > 0.0) continue;
        for (double b : cand) {
            if (b < 0.0 || b - a >= best) continue;
            if (greedy_oracle(set, ball.epsilon, {a}, {b}) >= 1.0 - ball.alpha - 1e-12) best = b - a;
        }
    }
    return best;
}

// Scan of the lower end on a fine grid; for each, the smallest feasible upper end by
// bisection on the transport oracle. An upper estimate of the optimal width at eps > 0.
double scan_oracle(const ErrorSampleSet& set, const WassersteinBall& ball)
{
    double lo_min = 0.0, hi_max = 0.0;
    for (const auto& s : set.samples) {
        lo_min = std::min(lo_min, s[0]);
        hi_max = std::max(hi_max, s[0]);
    }
    const double pad = ball.epsilon * static_cast<double>(set.size()) + (hi_max - lo_min) + 0.1;
    lo_min -= pad;
    hi_max += pad;
    auto ok = [&](double a, double b) { return greedy_oracle(set, ball.epsilon, {a}, {b}) >= 1.0 - ball.alpha - 1e-12; };
    double best = kInf;
    const int steps = 4000;
    for (int i = 0; i <= steps; ++i) {
        const double a = lo_min * (1.0 - static_cast<double>(i) / steps);
        if (!ok(a, hi_max)) continue;
        double l = 0.0, h = hi_max;
        if (!ok(a, l)) {
            for (int it = 0; it < 100; ++it) {
                const double m = 0.5 * (l + h);
                (ok(a, m) ? h : l) = m;
            }
        } else {
            h = l;
        }
        best = std::min(best, h - a);
    }
    return best;
}

ErrorSampleSet random_scalar(std::mt19937_64& rng, std::size_t n)
{
    std::normal_distribution<double> g(0.0, 0.2);
    std::vector<double> xs(n);
    for (auto& x : xs) x = g(rng);
    return scalar(xs);
}

}  // namespace

TEST_CASE("worst-case probability worked examples")
{
    const auto set = scalar({0.1, 0.2, 0.4, -0.5});
    const std::vector<double> lo{0.0}, hi{0.3};
    CHECK(worst_case_box_probability(set, {0.0, 0.1}, lo, hi) == 0.5);

    const std::vector<double> lo1{-1.0}, hi1{1.0};
    CHECK(worst_case_box_probability(set, {0.2, 0.1}, lo1, hi1) == doctest::Approx(0.625).epsilon(1e-14));
    CHECK(greedy_oracle(set, 0.2, lo1, hi1) == doctest::Approx(0.625).epsilon(1e-14));

    const std::vector<double> lo2{-kInf}, hi2{kInf};
    CHECK(worst_case_box_probability(set, {5.0, 0.1}, lo2, hi2) == 1.0);
}

TEST_CASE("worst-case probability agrees with the transport oracle")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 200; ++trial) {
        ErrorSampleSet set;
        const std::size_t dim = 1 + trial % 3;
        for (int s = 0; s < 10; ++s) {
            std::vector<double> row(dim);
            for (auto& x : row) x = u(rng);
            set.samples.push_back(row);
        }
        std::vector<double> lo(dim), hi(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            lo[k] = -std::abs(u(rng));
            hi[k] = std::abs(u(rng));
        }
        const double eps = 0.05 * std::abs(u(rng));
        CAPTURE(trial);
        CHECK(worst_case_box_probability(set, {eps, 0.1}, lo, hi) ==
              doctest::Approx(greedy_oracle(set, eps, lo, hi)).epsilon(1e-12));
    }
}

TEST_CASE("worst-case probability input errors")
{
    const auto set = scalar({0.1, 0.2});
    const std::vector<double> lo{0.3}, hi{0.1};
    CHECK_THROWS_AS(worst_case_box_probability(set, {0.0, 0.1}, lo, hi), BoxError);
    const std::vector<double> lo2{0.0, 0.0}, hi2{1.0, 1.0};
    CHECK_THROWS_AS(worst_case_box_probability(set, {0.0, 0.1}, lo2, hi2), DimensionError);
}

TEST_CASE("scalar bounds worked examples")
{
    const auto set = scalar({-0.2, 0.1, 0.3, 0.6});
    const auto all = solve_bounds(set, {0.0, 0.0});
    CHECK(all.lower[0] == -0.2);
    CHECK(all.upper[0] == 0.6);

    const auto cut = solve_bounds(set, {0.0, 0.25});
    CHECK(cut.lower[0] == -0.2);
    CHECK(cut.upper[0] == 0.3);
    CHECK(cut.width() == doctest::Approx(0.5));
    CHECK(cut.certified_prob >= 0.75);

    const auto mip = solve_bounds_mip(set, {0.0, 0.25});
    CHECK(mip.lower[0] == doctest::Approx(-0.2).epsilon(1e-9));
    CHECK(mip.upper[0] == doctest::Approx(0.3).epsilon(1e-9));

    const auto mip_all = solve_bounds_mip(set, {0.0, 0.0});
    CHECK(mip_all.lower[0] <= -0.2);
    CHECK(mip_all.upper[0] >= 0.6);
}

TEST_CASE("scalar bounds at eps = 0 match interval enumeration")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 60; ++trial) {
        const auto set = random_scalar(rng, 3 + trial % 10);
        const WassersteinBall ball{0.0, 0.05 + 0.05 * (trial % 5)};
        CAPTURE(trial);
        const auto b = solve_bounds(set, ball);
        CHECK(b.width() == doctest::Approx(enumeration_oracle(set, ball)).epsilon(1e-12));
        CHECK(b.lower[0] <= 0.0);
        CHECK(b.upper[0] >= 0.0);
        CHECK(validate_bounds(b, set, ball).pass);
    }
}

TEST_CASE("scalar bounds at eps > 0 are feasible, tight and no wider than a scan")
{
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        const auto set = random_scalar(rng, 4 + trial % 9);
        const WassersteinBall ball{0.005 * (1 + trial % 4), 0.1 + 0.05 * (trial % 4)};
        CAPTURE(trial);
        const double scan = scan_oracle(set, ball);
        if (!std::isfinite(scan)) {
            CHECK_THROWS_AS(solve_bounds(set, ball), InfeasibleBounds);
            continue;
        }
        const auto b = solve_bounds(set, ball);
        const double target = 1.0 - ball.alpha;
        CHECK(greedy_oracle(set, ball.epsilon, b.lower, b.upper) >= target - 1e-9);
        CHECK(b.width() <= scan + 1e-9);
        CHECK(b.width() >= scan - 1e-3);
        CHECK(greedy_oracle(set, ball.epsilon, {b.lower[0] + 1e-7}, b.upper) < target);
        CHECK(greedy_oracle(set, ball.epsilon, b.lower, {b.upper[0] - 1e-7}) < target);
    }
}

TEST_CASE("robustness premium on 50 Gaussian samples")
{
    std::mt19937_64 rng(2024);
    const auto set = random_scalar(rng, 50);
    const auto nominal = solve_bounds(set, {0.0, 0.1});
    const auto robust = solve_bounds(set, {0.01, 0.1});
    CHECK(robust.width() > nominal.width());
}

TEST_CASE("vector bounds cover the target and contain zero")
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 0.05);
    ErrorSampleSet set;
    for (int s = 0; s < 50; ++s) set.samples.push_back({g(rng), g(rng), g(rng), g(rng)});
    const WassersteinBall ball{0.002, 0.1};
    const auto b = solve_bounds(set, ball);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(b.lower[k] <= 0.0);
        CHECK(b.upper[k] >= 0.0);
    }
    const auto cert = validate_bounds(b, set, ball);
    CHECK(cert.pass);
    CHECK(cert.coverage == doctest::Approx(greedy_oracle(set, ball.epsilon, b.lower, b.upper)).epsilon(1e-12));
}

TEST_CASE("MIP agrees with the run enumeration")
{
    std::mt19937_64 rng(77);
    SUBCASE("N = 8 at eps 0.05, alpha 0.25")
    {
        const auto set = random_scalar(rng, 8);
        const WassersteinBall ball{0.05, 0.25};
        const auto exact = solve_bounds(set, ball);
        const auto mip = solve_bounds_mip(set, ball);
        CHECK(std::abs(mip.width() - exact.width()) <= 1e-9);
        CHECK(mip.width() <= scan_oracle(set, ball) + 1e-9);
    }
    SUBCASE("random small instances")
    {
        for (int trial = 0; trial < 15; ++trial) {
            const auto set = random_scalar(rng, 2 + trial % 7);
            const WassersteinBall ball{0.005 * (trial % 3), 0.1 + 0.05 * (trial % 4)};
            CAPTURE(trial);
            if (!std::isfinite(scan_oracle(set, ball))) {
                CHECK_THROWS_AS(solve_bounds_mip(set, ball), InfeasibleBounds);
                continue;
            }
            const auto b = solve_bounds_mip(set, ball);
            CHECK(std::abs(b.width() - solve_bounds(set, ball).width()) <= 1e-9);
            CHECK(validate_bounds(b, set, ball).pass);
        }
    }
}

TEST_CASE("infeasible targets and size guard")
{
    const auto set = scalar({0.1, 0.2, 0.3});
    // Every sample must stay inside but a large budget can push one out entirely.
    CHECK_THROWS_AS(solve_bounds(set, {10.0, 0.0}), InfeasibleBounds);
    CHECK_THROWS_AS(solve_bounds_mip(set, {10.0, 0.0}), InfeasibleBounds);

    std::mt19937_64 rng(1);
    const auto big = random_scalar(rng, 21);
    CHECK_THROWS_AS(solve_bounds_mip(big, {0.0, 0.1}), SizeGuard);
    CHECK_NOTHROW(solve_bounds_mip(random_scalar(rng, 5), {0.0, 0.1}, MipOptions{5}));
}

TEST_CASE("validate_bounds")
{
    const auto set = scalar({-0.2, 0.1, 0.3, 0.6});
    const WassersteinBall ball{0.0, 0.25};
    auto b = solve_bounds(set, ball);
    CHECK(validate_bounds(b, set, ball).pass);

    auto shrunk = b;
    shrunk.lower[0] *= 0.5;
    shrunk.upper[0] *= 0.5;
    const auto cert = validate_bounds(shrunk, set, ball);
    CHECK_FALSE(cert.pass);
    CHECK(cert.coverage < 0.75);
    CHECK(cert.coverage == greedy_oracle(set, 0.0, shrunk.lower, shrunk.upper));

    const WassersteinBall wide{0.02, 0.25};
    const WassersteinBall wider{0.04, 0.25};
    CHECK(validate_bounds(b, set, wider).coverage <= validate_bounds(b, set, wide).coverage);
}

TEST_CASE("invalid inputs")
{
    CHECK_THROWS_AS((WassersteinBall{-0.1, 0.1}.validate()), ValidationError);
    CHECK_THROWS_AS((WassersteinBall{0.1, 1.0}.validate()), ValidationError);
    ErrorSampleSet empty;
    CHECK_THROWS_AS(empty.validate(), ValidationError);
    ErrorSampleSet ragged;
    ragged.samples = {{0.1}, {0.1, 0.2}};
    CHECK_THROWS_AS(ragged.validate(), ValidationError);
    CHECK(kind_from_string("current") == ErrorKind::Current);
    CHECK_THROWS_AS(kind_from_string("power"), ValidationError);
}
