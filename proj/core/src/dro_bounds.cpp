#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "drsf/dro.hpp"
#include "drsf/error.hpp"

namespace drsf::dro {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCoverageSlack = 1e-12;

// Probability mass the adversary moves out of the box with budget eps, given
// each inside sample's distance to the box complement. Distances are sorted in place.
double moved_mass(std::vector<double>& dist, double eps, std::size_t n)
{
    const double w = 1.0 / static_cast<double>(n);
    if (eps <= 0.0) return 0.0;
    std::sort(dist.begin(), dist.end());
    double budget = eps;
    double moved = 0.0;
    for (double d : dist) {
        if (d <= 0.0) {
            moved += w;
            continue;
        }
        if (!std::isfinite(d)) break;
        const double cost = w * d;
        if (cost <= budget) {
            moved += w;
            budget -= cost;
        } else {
            moved += budget / d;
            break;
        }
    }
    return moved;
}

double side_distance(std::span<const double> xi, std::span<const double> lower, std::span<const double> upper,
                     bool& inside)
{
    double d = kInf;
    inside = true;
    for (std::size_t k = 0; k < xi.size(); ++k) {
        if (xi[k] < lower[k] || xi[k] > upper[k]) {
            inside = false;
            return 0.0;
        }
        d = std::min({d, upper[k] - xi[k], xi[k] - lower[k]});
    }
    return d;
}

bool meets(double coverage, double alpha) { return coverage >= 1.0 - alpha - kCoverageSlack; }

// ---------------------------------------------------------------------------
// scalar sets: enumerate contiguous runs of sorted samples

struct RunSearch {
    const std::vector<double>& sorted;
    std::size_t first, last;  // run [first, last]
    double eps, alpha;
    std::size_t n;

    // coverage counting only the run's samples as inside; the cheapest samples
    // to move sit at the two ends of the run
    double coverage(double lo, double hi) const
    {
        const double w = 1.0 / static_cast<double>(n);
        const double inside = static_cast<double>(last - first + 1) * w;
        if (eps <= 0.0) return inside;
        double budget = eps;
        double moved = 0.0;
        std::size_t i = first, j = last + 1;
        while (i < j) {
            const double dl = sorted[i] - lo;
            const double dr = hi - sorted[j - 1];
            const bool left = dl <= dr;
            const double d = left ? dl : dr;
            if (left) {
                ++i;
            } else {
                --j;
            }
            if (d <= 0.0) {
                moved += w;
                continue;
            }
            if (!std::isfinite(d)) break;
            const double cost = w * d;
            if (cost <= budget) {
                moved += w;
                budget -= cost;
            } else {
                moved += budget / d;
                break;
            }
        }
        return inside - moved;
    }

    bool feasible(double lo, double hi) const { return meets(coverage(lo, hi), alpha); }
};

template <class Pred>
double bisect_min(double feasible_hi, double lo_bound, Pred ok)
{
    // smallest x in [lo_bound, feasible_hi] with ok(x); ok is monotone and ok(feasible_hi) holds
    if (ok(lo_bound)) return lo_bound;
    double lo = lo_bound, hi = feasible_hi;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

struct Interval {
    double lo, hi;
    double width() const { return hi - lo; }
};

bool solve_run(const RunSearch& run, Interval& best)
{
    const double a = run.sorted[run.first];
    const double b = run.sorted[run.last];
    const double lo_max = std::min(0.0, a);
    const double hi_min = std::max(0.0, b);
    if (run.eps <= 0.0) {
        best = {lo_max, hi_min};
        return true;
    }
    const double beta = static_cast<double>(run.last - run.first + 1) / static_cast<double>(run.n) - (1.0 - run.alpha);
    if (beta <= 0.0) return false;
    const double margin = run.eps / beta + (b - a) + 1.0;
    const double lo_min = lo_max - margin;
    const double hi_max = hi_min + margin;
    if (!run.feasible(lo_min, hi_max)) return false;

    auto upper_for = [&](double lo) {
        return bisect_min(hi_max, hi_min, [&](double hi) { return run.feasible(lo, hi); });
    };
    // largest feasible lo (coverage is nonincreasing in lo)
    double lo_feasible = lo_min;
    if (run.feasible(lo_max, hi_max)) {
        lo_feasible = lo_max;
    } else {
        double l = lo_min, h = lo_max;
        for (int i = 0; i < 200 && h - l > 1e-15 * std::max(1.0, std::abs(l)); ++i) {
            const double mid = 0.5 * (l + h);
            if (mid <= l || mid >= h) break;
            (run.feasible(mid, hi_max) ? l : h) = mid;
        }
        lo_feasible = l;
    }

    // width(lo) = upper_for(lo) - lo is convex on [lo_min, lo_feasible]
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double l = lo_min, h = lo_feasible;
    double x1 = h - phi * (h - l), x2 = l + phi * (h - l);
    double f1 = upper_for(x1) - x1, f2 = upper_for(x2) - x2;
    for (int i = 0; i < 300 && h - l > 1e-14 * std::max(1.0, std::abs(l)); ++i) {
        if (f1 <= f2) {
            h = x2;
            x2 = x1;
            f2 = f1;
            x1 = h - phi * (h - l);
            f1 = upper_for(x1) - x1;
        } else {
            l = x1;
            x1 = x2;
            f1 = f2;
            x2 = l + phi * (h - l);
            f2 = upper_for(x2) - x2;
        }
    }
    Interval cand{lo_feasible, upper_for(lo_feasible)};
    for (double x : {l, h, x1, x2}) {
        const Interval c{x, upper_for(x)};
        if (c.width() < cand.width()) cand = c;
    }
    best = cand;
    return true;
}

RobustBounds solve_scalar(const ErrorSampleSet& samples, const WassersteinBall& ball)
{
    const std::size_t n = samples.size();
    std::vector<double> sorted(n);
    for (std::size_t s = 0; s < n; ++s) sorted[s] = samples.samples[s][0];
    std::sort(sorted.begin(), sorted.end());

    const auto need = static_cast<std::size_t>(std::ceil((1.0 - ball.alpha) * static_cast<double>(n) - 1e-9));
    bool found = false;
    Interval best{0.0, 0.0};
    // narrowest hulls first, so wide runs can be skipped
    struct Run {
        std::size_t first, last;
        double hull;
    };
    std::vector<Run> runs;
    for (std::size_t count = std::max<std::size_t>(need, 1); count <= n; ++count) {
        for (std::size_t first = 0; first + count <= n; ++first) {
            const std::size_t last = first + count - 1;
            runs.push_back({first, last, std::max(0.0, sorted[last]) - std::min(0.0, sorted[first])});
        }
    }
    std::stable_sort(runs.begin(), runs.end(), [](const Run& x, const Run& y) { return x.hull < y.hull; });
    for (const auto& r : runs) {
        if (found && r.hull >= best.width()) break;
        RunSearch run{sorted, r.first, r.last, ball.epsilon, ball.alpha, n};
        Interval cand{};
        if (!solve_run(run, cand)) continue;
        if (!found || cand.width() < best.width()) {
            best = cand;
            found = true;
        }
    }
    if (!found) {
        const double reach = 1e6 * std::max({1.0, std::abs(sorted.front()), std::abs(sorted.back())});
        const double lo[1] = {-reach}, hi[1] = {reach};
        throw InfeasibleBounds(worst_case_box_probability(samples, ball, lo, hi),
                               "no interval reaches coverage " + std::to_string(1.0 - ball.alpha));
    }
    RobustBounds out;
    out.kind = samples.kind;
    out.lower = {best.lo};
    out.upper = {best.hi};
    return out;
}

// ---------------------------------------------------------------------------
// vector sets: nested exclusion sequence, then uniform margin and coordinate descent

double total_width(const std::vector<double>& lo, const std::vector<double>& hi)
{
    double w = 0.0;
    for (std::size_t k = 0; k < lo.size(); ++k) w += hi[k] - lo[k];
    return w;
}

void hull_with_zero(const ErrorSampleSet& samples, const std::vector<bool>& active, std::vector<double>& lo,
                    std::vector<double>& hi)
{
    const std::size_t dim = samples.dim();
    lo.assign(dim, 0.0);
    hi.assign(dim, 0.0);
    for (std::size_t s = 0; s < samples.size(); ++s) {
        if (!active[s]) continue;
        for (std::size_t k = 0; k < dim; ++k) {
            lo[k] = std::min(lo[k], samples.samples[s][k]);
            hi[k] = std::max(hi[k], samples.samples[s][k]);
        }
    }
}

RobustBounds solve_vector(const ErrorSampleSet& samples, const WassersteinBall& ball)
{
    const std::size_t n = samples.size();
    const std::size_t dim = samples.dim();
    const auto max_excluded = static_cast<std::size_t>(std::floor(ball.alpha * static_cast<double>(n) + 1e-9));

    auto coverage = [&](const std::vector<double>& lo, const std::vector<double>& hi) {
        return worst_case_box_probability(samples, ball, lo, hi);
    };

    double spread = 1.0;
    for (const auto& row : samples.samples) {
        for (double v : row) spread = std::max(spread, std::abs(v));
    }

    std::vector<bool> active(n, true);
    bool found = false;
    std::vector<double> best_lo, best_hi;
    double best_width = kInf;
    double best_coverage = 0.0;

    for (std::size_t excluded = 0;; ++excluded) {
        std::vector<double> lo, hi;
        hull_with_zero(samples, active, lo, hi);

        if (ball.epsilon > 0.0) {
            // smallest uniform margin that certifies the box
            auto widened = [&](double m, std::vector<double>& l, std::vector<double>& h) {
                l = lo;
                h = hi;
                for (std::size_t k = 0; k < dim; ++k) {
                    l[k] -= m;
                    h[k] += m;
                }
            };
            std::vector<double> l, h;
            double m_hi = ball.epsilon + 1e-12;
            bool ok = false;
            for (int i = 0; i < 60; ++i) {
                widened(m_hi, l, h);
                const double cov = coverage(l, h);
                best_coverage = std::max(best_coverage, cov);
                if (meets(cov, ball.alpha)) {
                    ok = true;
                    break;
                }
                if (m_hi > 1e6 * spread) break;
                m_hi *= 2.0;
            }
            if (ok) {
                const double m = bisect_min(m_hi, 0.0, [&](double mm) {
                    widened(mm, l, h);
                    return meets(coverage(l, h), ball.alpha);
                });
                widened(m, lo, hi);
                // coordinate descent on each side toward zero
                for (int sweep = 0; sweep < 50; ++sweep) {
                    const double before = total_width(lo, hi);
                    for (std::size_t k = 0; k < dim; ++k) {
                        const double cur_hi = hi[k];
                        hi[k] = bisect_min(cur_hi, 0.0, [&](double x) {
                            std::vector<double> hh = hi;
                            hh[k] = x;
                            return meets(coverage(lo, hh), ball.alpha);
                        });
                        const double cur_lo = lo[k];
                        const double neg = bisect_min(-cur_lo, 0.0, [&](double x) {
                            std::vector<double> ll = lo;
                            ll[k] = -x;
                            return meets(coverage(ll, hi), ball.alpha);
                        });
                        lo[k] = -neg;
                    }
                    if (before - total_width(lo, hi) <= 1e-13 * std::max(1.0, before)) break;
                }
                const double w = total_width(lo, hi);
                if (w < best_width) {
                    best_width = w;
                    best_lo = lo;
                    best_hi = hi;
                    found = true;
                }
            }
        } else {
            const double w = total_width(lo, hi);
            if (w < best_width) {
                best_width = w;
                best_lo = lo;
                best_hi = hi;
                found = true;
            }
        }

        if (excluded >= max_excluded) break;
        // drop the active sample whose removal shrinks the hull the most
        std::size_t drop = n;
        double drop_width = kInf;
        for (std::size_t s = 0; s < n; ++s) {
            if (!active[s]) continue;
            active[s] = false;
            std::vector<double> l2, h2;
            hull_with_zero(samples, active, l2, h2);
            const double w = total_width(l2, h2);
            active[s] = true;
            if (w < drop_width) {
                drop_width = w;
                drop = s;
            }
        }
        if (drop == n) break;
        active[drop] = false;
    }

    if (!found) {
        throw InfeasibleBounds(best_coverage, "no box reaches coverage " + std::to_string(1.0 - ball.alpha));
    }
    RobustBounds out;
    out.kind = samples.kind;
    out.lower = std::move(best_lo);
    out.upper = std::move(best_hi);
    return out;
}

}  // namespace

const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Voltage: return "voltage";
    case ErrorKind::Current: return "current";
    case ErrorKind::Substation: return "substation";
    }
    return "unknown";
}

ErrorKind kind_from_string(const std::string& name)
{
    if (name == "voltage") return ErrorKind::Voltage;
    if (name == "current") return ErrorKind::Current;
    if (name == "substation") return ErrorKind::Substation;
    throw ValidationError("unknown error kind '" + name + "'");
}

void ErrorSampleSet::validate() const
{
    if (samples.empty()) throw ValidationError("error sample set is empty");
    const std::size_t d = samples.front().size();
    for (std::size_t s = 0; s < samples.size(); ++s) {
        if (samples[s].size() != d) throw ValidationError("sample " + std::to_string(s) + " has a different dimension");
        for (double v : samples[s]) {
            if (!std::isfinite(v)) throw ValidationError("sample " + std::to_string(s) + " has a non-finite entry");
        }
    }
}

void WassersteinBall::validate() const
{
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be finite and >= 0");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in [0, 1)");
}

double RobustBounds::width() const
{
    double w = 0.0;
    for (std::size_t k = 0; k < lower.size(); ++k) w += upper[k] - lower[k];
    return w;
}

RobustBounds RobustBounds::zero(ErrorKind kind, std::size_t dim)
{
    RobustBounds b;
    b.kind = kind;
    b.lower.assign(dim, 0.0);
    b.upper.assign(dim, 0.0);
    return b;
}

double worst_case_box_probability(const ErrorSampleSet& samples, const WassersteinBall& ball,
                                  std::span<const double> lower, std::span<const double> upper)
{
    if (lower.size() != upper.size()) throw DimensionError("box bounds differ in length");
    for (std::size_t k = 0; k < lower.size(); ++k) {
        if (lower[k] > upper[k]) throw BoxError("lower bound exceeds upper bound in coordinate " + std::to_string(k));
    }
    if (!(ball.epsilon >= 0.0)) throw ValidationError("epsilon must be >= 0");
    const std::size_t n = samples.size();
    if (n == 0) throw ValidationError("error sample set is empty");

    std::vector<double> dist;
    dist.reserve(n);
    std::size_t outside = 0;
    for (const auto& xi : samples.samples) {
        if (xi.size() != lower.size()) throw DimensionError("sample and box dimensions differ");
        bool inside = false;
        const double d = side_distance(xi, lower, upper, inside);
        if (inside) {
            dist.push_back(d);
        } else {
            ++outside;
        }
    }
    const double inside_mass = 1.0 - static_cast<double>(outside) / static_cast<double>(n);
    return std::max(0.0, inside_mass - moved_mass(dist, ball.epsilon, n));
}

RobustBounds solve_bounds(const ErrorSampleSet& samples, const WassersteinBall& ball)
{
    samples.validate();
    ball.validate();
    RobustBounds out = samples.dim() == 1 ? solve_scalar(samples, ball) : solve_vector(samples, ball);
    out.epsilon = ball.epsilon;
    out.alpha = ball.alpha;
    out.certified_prob = worst_case_box_probability(samples, ball, out.lower, out.upper);
    return out;
}

BoundsCertificate validate_bounds(const RobustBounds& bounds, const ErrorSampleSet& samples,
                                  const WassersteinBall& ball)
{
    BoundsCertificate cert;
    cert.coverage = worst_case_box_probability(samples, ball, bounds.lower, bounds.upper);
    cert.pass = meets(cert.coverage, ball.alpha);
    return cert;
}

}  // namespace drsf::dro
