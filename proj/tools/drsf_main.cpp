// drsf: command-line front end for the distributionally robust safety filter.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drsf/dro.hpp"
#include "drsf/error.hpp"
#include "drsf/harness.hpp"
#include "drsf/network_io.hpp"
#include "drsf/power_flow.hpp"
#include "drsf/safety_filter.hpp"
#include "drsf/serialization.hpp"

namespace fs = std::filesystem;
using namespace drsf;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string network;
    std::uint64_t seed = 1;
    std::string out;
    std::size_t jobs = 1;
};

grid::Network load_net(const std::string& spec)
{
    fs::path bus = fs::path(DRSF_DEFAULT_DATA_DIR) / "ieee33_pv_bus.csv";
    fs::path line = fs::path(DRSF_DEFAULT_DATA_DIR) / "ieee33_line.csv";
    if (!spec.empty()) {
        const auto comma = spec.find(',');
        if (comma == std::string::npos) throw UsageError("--network expects <bus.csv>,<line.csv>");
        bus = spec.substr(0, comma);
        line = spec.substr(comma + 1);
    }
    return grid::load_network(bus, line);
}

void log_run(const std::string& cmd, const std::string& config, std::uint64_t seed)
{
    std::cerr << "drsf " << cmd << ": config " << config << " seed " << seed << '\n';
}

void emit(const std::string& out, const std::string& content)
{
    if (out.empty()) {
        std::cout << content;
    } else {
        io::write_atomic(out, content);
    }
}

io::SimulationSpec load_spec(const std::string& path, const CLI::App& sub, const Common& common)
{
    if (!fs::exists(path)) throw UsageError("config file not found: " + path);
    io::SimulationSpec spec = io::load_simulation_spec(path);
    if (sub.count("--seed")) spec.episode.seed = common.seed;
    return spec;
}

filter::BoundSet offline_bounds(const grid::Network& net, const io::SimulationSpec& spec, double epsilon)
{
    const auto samples =
        sim::generate_error_samples(net, spec.sample_sigma, spec.n_samples, spec.episode.seed);
    return sim::compute_bounds(samples, dro::WassersteinBall{epsilon, spec.alpha});
}

void print_summary(const sim::RunSummary& s)
{
    std::cerr << "steps " << s.steps << ", voltage violations " << s.totals.voltage << " (" << s.voltage_violation_steps
              << " steps), current " << s.totals.current << ", substation " << s.totals.substation << ", fallback steps "
              << s.fallback_steps << ", max exactness gap " << s.max_exactness_gap << '\n';
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Distributionally robust safety filter for PV volt/var control"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub, bool network, bool jobs) {
        if (network) sub->add_option("--network", common.network, "bus.csv,line.csv (default: bundled IEEE 33-bus)");
        sub->add_option("--seed", common.seed, "seed for every stochastic output");
        sub->add_option("--out", common.out, "output path");
        if (jobs) sub->add_option("--jobs", common.jobs, "parallel scenarios")->check(CLI::PositiveNumber);
    };

    // samples
    auto* samples = app.add_subcommand("samples", "generate model-error samples");
    add_common(samples, true, false);
    std::size_t n_samples = 50;
    double sigma = 0.3;
    samples->add_option("--n", n_samples, "number of samples")->check(CLI::PositiveNumber);
    samples->add_option("--sigma", sigma, "relative line-parameter error")->check(CLI::NonNegativeNumber);
    samples->get_option("--out")->required()->description("output directory");

    // bounds
    auto* bounds = app.add_subcommand("bounds", "robust error bounds from samples");
    add_common(bounds, false, false);
    std::string sample_file, sample_dir, kind = "voltage", method = "greedy";
    double alpha = 0.1, epsilon = 0.01;
    auto* from_file = bounds->add_option("--samples", sample_file, "sample CSV, one sample per row")->check(CLI::ExistingFile);
    auto* from_dir = bounds->add_option("--samples-dir", sample_dir, "directory written by `drsf samples`")
                         ->check(CLI::ExistingDirectory);
    from_file->excludes(from_dir);
    bounds->add_option("--kind", kind, "voltage, current or substation")
        ->check(CLI::IsMember({"voltage", "current", "substation"}));
    bounds->add_option("--alpha", alpha, "risk level");
    bounds->add_option("--epsilon", epsilon, "Wasserstein radius");
    bounds->add_option("--method", method, "greedy or mip")->check(CLI::IsMember({"greedy", "mip"}));

    // filter
    auto* filt = app.add_subcommand("filter", "filter one action");
    add_common(filt, true, false);
    std::string action_file, bounds_file;
    bool nominal = false, fallback = false;
    double omega = 1e-5, load_scale = 1.0, pv_scale = 1.0;
    filt->add_option("--action", action_file, "JSON array of reactive setpoints (p.u.)")->required()->check(CLI::ExistingFile);
    auto* bopt = filt->add_option("--bounds", bounds_file, "bound-set JSON from `drsf bounds --samples-dir`")
                     ->check(CLI::ExistingFile);
    auto* nopt = filt->add_flag("--nominal", nominal, "zero-width bounds (nominal limits)");
    bopt->excludes(nopt);
    filt->add_flag("--fallback", fallback, "use the violation-penalized program when infeasible");
    filt->add_option("--omega", omega, "loss weight")->check(CLI::NonNegativeNumber);
    filt->add_option("--load-scale", load_scale, "load multiplier")->check(CLI::NonNegativeNumber);
    filt->add_option("--pv-scale", pv_scale, "PV output multiplier")->check(CLI::NonNegativeNumber);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "closed-loop episodes");
    add_common(simulate, true, true);
    std::string config_file;
    bool no_filter = false;
    simulate->add_option("--config", config_file, "episode config JSON")->required();
    simulate->add_flag("--no-filter", no_filter, "apply controller actions unfiltered");
    simulate->get_option("--out")->required()->description("output directory");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "violation probability over a radius grid");
    add_common(sweep, true, true);
    std::vector<double> epsilons{0.0, 0.005, 0.01, 0.02, 0.05};
    std::string sweep_config;
    sweep->add_option("--config", sweep_config, "episode config JSON")->required();
    sweep->add_option("--epsilons", epsilons, "comma-separated radii")->delimiter(',');
    sweep->add_option("--alpha", alpha, "risk level (default: from config)");

    // bench
    auto* bench = app.add_subcommand("bench", "time filter solves on random actions");
    add_common(bench, true, false);
    int repeats = 20;
    bench->add_option("--repeats", repeats, "number of solves")->check(CLI::PositiveNumber);
    bench->add_option("--omega", omega, "loss weight")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*samples) {
            log_run("samples", "{\"n\":" + std::to_string(n_samples) + ",\"sigma\":" + std::to_string(sigma) + "}",
                    common.seed);
            const auto net = load_net(common.network);
            const auto set = sim::generate_error_samples(net, sigma, n_samples, common.seed);
            fs::create_directories(common.out);
            io::write_atomic(fs::path(common.out) / "voltage.csv", io::samples_to_csv(set.voltage));
            io::write_atomic(fs::path(common.out) / "current.csv", io::samples_to_csv(set.current));
            io::write_atomic(fs::path(common.out) / "substation.csv", io::samples_to_csv(set.substation));
        } else if (*bounds) {
            if (sample_file.empty() && sample_dir.empty()) throw UsageError("one of --samples or --samples-dir is required");
            log_run("bounds",
                    "{\"alpha\":" + std::to_string(alpha) + ",\"epsilon\":" + std::to_string(epsilon) + ",\"method\":\"" +
                        method + "\"}",
                    common.seed);
            const dro::WassersteinBall ball{epsilon, alpha};
            auto solve = [&](const dro::ErrorSampleSet& set) {
                auto b = method == "mip" ? dro::solve_bounds_mip(set, ball) : dro::solve_bounds(set, ball);
                const auto cert = dro::validate_bounds(b, set, ball);
                std::cerr << to_string(set.kind) << ": worst-case coverage " << cert.coverage
                          << (cert.pass ? " (certified)" : " (NOT certified)") << '\n';
                return b;
            };
            if (!sample_file.empty()) {
                emit(common.out, io::bounds_to_json(solve(io::load_samples_csv(sample_file, dro::kind_from_string(kind)))));
            } else {
                const fs::path dir(sample_dir);
                filter::BoundSet set{solve(io::load_samples_csv(dir / "voltage.csv", dro::ErrorKind::Voltage)),
                                     solve(io::load_samples_csv(dir / "current.csv", dro::ErrorKind::Current)),
                                     solve(io::load_samples_csv(dir / "substation.csv", dro::ErrorKind::Substation))};
                emit(common.out, io::bound_set_to_json(set));
            }
        } else if (*filt) {
            if (bounds_file.empty() && !nominal) throw UsageError("one of --bounds or --nominal is required");
            log_run("filter",
                    "{\"omega\":" + std::to_string(omega) + ",\"load_scale\":" + std::to_string(load_scale) +
                        ",\"pv_scale\":" + std::to_string(pv_scale) + "}",
                    common.seed);
            const auto net = grid::scale_injections(load_net(common.network), load_scale, pv_scale);
            std::ifstream in(action_file);
            std::stringstream ss;
            ss << in.rdbuf();
            const auto q = io::parse_action_json(ss.str());
            filter::DRSFConfig cfg;
            cfg.omega = omega;
            cfg.bounds = nominal ? filter::BoundSet::zero(net) : io::load_bound_set(bounds_file);
            filter::FilterResult res;
            try {
                res = filter::filter_action(net, q, cfg);
            } catch (const InfeasibleFilter&) {
                if (!fallback) throw;
                res = filter::filter_action_fallback(net, q, cfg);
            }
            emit(common.out, io::filter_result_to_json(res));
        } else if (*simulate) {
            auto spec = load_spec(config_file, *simulate, common);
            if (no_filter) spec.episode.filter_on = false;
            log_run("simulate", io::simulation_spec_to_json(spec), spec.episode.seed);
            const auto net = load_net(common.network);
            if (spec.episode.filter_on) spec.episode.drsf.bounds = offline_bounds(net, spec, spec.epsilon);
            const auto factory = sim::make_controller_factory(spec.controller, spec.episode.seed);
            const auto reports = sim::run_scenarios(spec.episode, factory, net, common.jobs);
            print_summary(sim::summarize(reports));
            fs::create_directories(common.out);
            io::write_atomic(fs::path(common.out) / "report.json", io::reports_to_json(reports));
            io::write_atomic(fs::path(common.out) / "report.csv", io::reports_to_csv(reports));
        } else if (*sweep) {
            auto spec = load_spec(sweep_config, *sweep, common);
            if (sweep->count("--alpha")) spec.alpha = alpha;
            log_run("sweep", io::simulation_spec_to_json(spec), spec.episode.seed);
            const auto net = load_net(common.network);
            const auto samples_set =
                sim::generate_error_samples(net, spec.sample_sigma, spec.n_samples, spec.episode.seed);
            const auto factory = sim::make_controller_factory(spec.controller, spec.episode.seed);
            const auto points = sim::run_sweep(epsilons, spec.alpha, samples_set, spec.episode, factory, net, common.jobs);
            emit(common.out, io::sweep_to_csv(points));
        } else if (*bench) {
            log_run("bench", "{\"repeats\":" + std::to_string(repeats) + ",\"omega\":" + std::to_string(omega) + "}",
                    common.seed);
            const auto net = load_net(common.network);
            filter::DRSFConfig cfg;
            cfg.omega = omega;
            cfg.bounds = filter::BoundSet::zero(net);
            std::mt19937_64 rng(common.seed);
            std::vector<double> times;
            filter::FilterResult last;
            for (int r = 0; r < repeats; ++r) {
                std::vector<double> q;
                for (const auto& pv : net.pv_units()) {
                    std::uniform_real_distribution<double> d(-pv.q_max(), pv.q_max());
                    q.push_back(d(rng));
                }
                last = filter::filter_action(net, q, cfg);
                times.push_back(last.solve_time);
            }
            const auto pf0 = std::chrono::steady_clock::now();
            for (int r = 0; r < repeats; ++r) (void)grid::solve_power_flow(net);
            const double pf = std::chrono::duration<double>(std::chrono::steady_clock::now() - pf0).count() / repeats;
            double mean = 0.0;
            for (double t : times) mean += t;
            mean /= static_cast<double>(times.size());
            std::ostringstream os;
            os << "{\n  \"repeats\": " << repeats << ",\n  \"filter_mean_s\": " << mean
               << ",\n  \"filter_max_s\": " << *std::max_element(times.begin(), times.end())
               << ",\n  \"power_flow_mean_s\": " << pf << ",\n  \"last\": " << io::filter_result_to_json(last) << "}\n";
            emit(common.out, os.str());
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
