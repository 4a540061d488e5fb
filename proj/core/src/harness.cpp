#include "drsf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

#include "drsf/error.hpp"

namespace drsf::sim {

namespace {

enum Stream : std::uint64_t {
    kTrueSystem = 1,
    kSampleAction = 2,
    kController = 3,
    kProfile = 4,
    kStepSystem = 5,
    kSampleSystem = 6,
};

std::vector<double> random_action(const grid::Network& net, std::mt19937_64& rng)
{
    std::vector<double> q;
    for (const auto& pv : net.pv_units()) {
        const double qmax = pv.q_max();
        std::uniform_real_distribution<double> dist(-qmax, qmax);
        q.push_back(qmax > 0.0 ? dist(rng) : 0.0);
    }
    return q;
}

std::vector<double> clip_to_ratings(const grid::Network& net, std::vector<double> q, std::size_t& clipped)
{
    clipped = 0;
    const auto& pvs = net.pv_units();
    for (std::size_t u = 0; u < q.size(); ++u) {
        const double qmax = pvs[u].q_max();
        if (!std::isfinite(q[u])) {
            q[u] = 0.0;
            ++clipped;
        } else if (std::abs(q[u]) > qmax) {
            q[u] = std::clamp(q[u], -qmax, qmax);
            ++clipped;
        }
    }
    return q;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

ErrorSamples generate_error_samples(const grid::Network& nominal, double sigma, std::size_t n, std::uint64_t seed)
{
    if (n == 0) throw ValidationError("sample count must be at least 1");
    ErrorSamples out;
    out.voltage.kind = dro::ErrorKind::Voltage;
    out.current.kind = dro::ErrorKind::Current;
    out.substation.kind = dro::ErrorKind::Substation;
    for (std::size_t s = 0; s < n; ++s) {
        try {
            const grid::Network truth = grid::perturb_parameters(nominal, sigma, derive_seed(seed, s, kSampleSystem));
            std::mt19937_64 rng(derive_seed(seed, s, kSampleAction));
            const auto q = random_action(nominal, rng);
            const auto nom = grid::solve_power_flow(grid::apply_action(nominal, q));
            const auto tru = grid::solve_power_flow(grid::apply_action(truth, q));
            std::vector<double> dv(nom.v_sq.size()), dl(nom.l_sq.size());
            for (std::size_t j = 0; j < dv.size(); ++j) dv[j] = tru.v_sq[j] - nom.v_sq[j];
            for (std::size_t e = 0; e < dl.size(); ++e) dl[e] = tru.l_sq[e] - nom.l_sq[e];
            out.voltage.samples.push_back(std::move(dv));
            out.current.samples.push_back(std::move(dl));
            out.substation.samples.push_back({tru.s0_sq() - nom.s0_sq()});
        } catch (const Error& e) {
            throw StepError("sample", s, e.what());
        }
    }
    return out;
}

filter::BoundSet compute_bounds(const ErrorSamples& samples, const dro::WassersteinBall& ball)
{
    return filter::BoundSet{dro::solve_bounds(samples.voltage, ball), dro::solve_bounds(samples.current, ball),
                            dro::solve_bounds(samples.substation, ball)};
}

ViolationCounts& ViolationCounts::operator+=(const ViolationCounts& o)
{
    voltage += o.voltage;
    current += o.current;
    substation += o.substation;
    return *this;
}

ViolationCounts count_violations(const grid::OperatingPoint& op, const grid::OperationalLimits& limits, double tol)
{
    ViolationCounts c;
    const double vmin2 = limits.v_min * limits.v_min;
    const double vmax2 = limits.v_max * limits.v_max;
    const double imax2 = limits.i_max * limits.i_max;
    const double smax2 = limits.s0_max * limits.s0_max;
    for (double v : op.v_sq) {
        if (v < vmin2 - tol || v > vmax2 + tol) ++c.voltage;
    }
    for (double l : op.l_sq) {
        if (l > imax2 + tol) ++c.current;
    }
    if (op.s0_sq() > smax2 + tol) c.substation = 1;
    return c;
}

double compute_reward(double deviation, double loss, const RewardWeights& weights)
{
    return -weights.deviation * deviation - weights.loss * loss;
}

void EpisodeConfig::validate() const
{
    if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
    if (!(weights.deviation >= 0.0) || !(weights.loss >= 0.0)) throw ConfigError("reward weights must be >= 0");
    if (n_scenarios == 0) throw ConfigError("n_scenarios must be at least 1");
    if (!(drsf.omega >= 0.0)) throw ConfigError("omega must be >= 0");
}

ViolationCounts EpisodeReport::totals() const
{
    ViolationCounts c;
    for (const auto& s : steps) c += s.violations;
    return c;
}

double EpisodeReport::total_loss() const
{
    double t = 0.0;
    for (const auto& s : steps) t += s.loss;
    return t;
}

std::size_t EpisodeReport::fallback_steps() const
{
    return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const auto& s) { return s.fallback; }));
}

std::size_t EpisodeReport::voltage_violation_steps() const
{
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [](const auto& s) { return s.violations.voltage > 0; }));
}

double EpisodeReport::max_exactness_gap() const
{
    double g = 0.0;
    for (const auto& s : steps) g = std::max(g, s.exactness_gap);
    return g;
}

EpisodeReport run_episode(const EpisodeConfig& cfg, Controller& controller, const grid::Network& nominal,
                          std::size_t scenario)
{
    cfg.validate();
    if (cfg.filter_on && !cfg.drsf.bounds) throw BoundsMissing("filter is on but no robust bounds were supplied");
    const Profile profile = cfg.profile ? *cfg.profile : synthetic_profile(cfg.horizon, derive_seed(cfg.seed, 0, kProfile));
    const grid::Network truth_fixed =
        grid::perturb_parameters(nominal, cfg.sigma, derive_seed(cfg.seed, scenario, kTrueSystem));
    const std::uint64_t step_seed = derive_seed(cfg.seed, scenario, kStepSystem);

    EpisodeReport report;
    report.scenario = scenario;
    std::vector<double> q_prev(nominal.num_pv(), 0.0);
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
        try {
            const double load = profile.load_at(t);
            const double pv = profile.pv_at(t);
            const grid::Network model = grid::scale_injections(nominal, load, pv);
            const grid::Network truth = grid::scale_injections(
                cfg.redraw_each_step ? grid::perturb_parameters(nominal, cfg.sigma, derive_seed(step_seed, t, kStepSystem))
                                     : truth_fixed,
                load, pv);

            std::size_t ignored = 0;
            const auto observed = grid::solve_power_flow(grid::apply_action(model, clip_to_ratings(model, q_prev, ignored)));
            Observation obs;
            obs.step = t;
            obs.v_sq = observed.v_sq;
            obs.loss = observed.loss;
            for (const auto& unit : model.pv_units()) {
                obs.q_max.push_back(unit.q_max());
                obs.pv_bus.push_back(unit.bus);
            }

            auto proposed = controller.act(obs);
            if (proposed.size() != model.num_pv()) {
                throw DimensionError("controller returned " + std::to_string(proposed.size()) + " setpoints for " +
                                     std::to_string(model.num_pv()) + " PV units");
            }
            StepRecord rec;
            rec.step = t;
            const auto q_learn = clip_to_ratings(model, std::move(proposed), rec.clipped);

            std::vector<double> q_applied = q_learn;
            if (cfg.filter_on) {
                filter::FilterResult fr;
                try {
                    fr = filter::filter_action(model, q_learn, cfg.drsf);
                } catch (const InfeasibleFilter&) {
                    fr = filter::filter_action_fallback(model, q_learn, cfg.drsf);
                }
                q_applied = fr.q_safe;
                rec.deviation = fr.deviation;
                rec.fallback = fr.fallback;
                rec.exactness_gap = fr.exactness_gap;
                if (cfg.record_timing) rec.filter_ms = 1e3 * fr.solve_time;
            }

            const auto actual = grid::solve_power_flow(grid::apply_action(truth, q_applied));
            rec.violations = count_violations(actual, truth.limits());
            rec.loss = actual.loss;
            rec.reward = compute_reward(rec.deviation, rec.loss, cfg.weights);
            report.steps.push_back(rec);
            q_prev = q_applied;
        } catch (const StepError&) {
            throw;
        } catch (const Error& e) {
            throw StepError("step", t, e.what());
        }
    }
    return report;
}

std::vector<EpisodeReport> run_scenarios(const EpisodeConfig& cfg, const ControllerFactory& factory,
                                         const grid::Network& nominal, std::size_t jobs)
{
    const std::size_t n = cfg.n_scenarios;
    std::vector<EpisodeReport> reports(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t s = next++; s < n; s = next++) {
            try {
                auto controller = factory(s);
                reports[s] = run_episode(cfg, *controller, nominal, s);
            } catch (...) {
                errors[s] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, n);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return reports;
}

RunSummary summarize(const std::vector<EpisodeReport>& reports)
{
    RunSummary s;
    for (const auto& r : reports) {
        s.steps += r.steps.size();
        s.totals += r.totals();
        s.voltage_violation_steps += r.voltage_violation_steps();
        s.fallback_steps += r.fallback_steps();
        s.total_loss += r.total_loss();
        s.max_exactness_gap = std::max(s.max_exactness_gap, r.max_exactness_gap());
    }
    return s;
}

std::vector<SweepPoint> run_sweep(const std::vector<double>& epsilons, double alpha, const ErrorSamples& samples,
                                  const EpisodeConfig& cfg, const ControllerFactory& factory,
                                  const grid::Network& nominal, std::size_t jobs)
{
    std::vector<SweepPoint> out;
    for (double eps : epsilons) {
        const dro::WassersteinBall ball{eps, alpha};
        EpisodeConfig run = cfg;
        run.filter_on = true;
        run.drsf.bounds = compute_bounds(samples, ball);
        const auto summary = summarize(run_scenarios(run, factory, nominal, jobs));
        SweepPoint p;
        p.epsilon = eps;
        p.steps = summary.steps;
        p.totals = summary.totals;
        p.fallback_steps = summary.fallback_steps;
        p.violation_probability =
            summary.steps == 0 ? 0.0 : static_cast<double>(summary.voltage_violation_steps) / static_cast<double>(summary.steps);
        p.voltage_width = run.drsf.bounds->voltage.width();
        out.push_back(p);
    }
    return out;
}

}  // namespace drsf::sim
