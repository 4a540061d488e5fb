#include "drsf/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "drsf/error.hpp"

namespace drsf::io {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const std::string& what)
{
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(what, 0, e.what());
    }
}

json bounds_json(const dro::RobustBounds& b)
{
    return json{{"kind", dro::to_string(b.kind)}, {"lower", b.lower},          {"upper", b.upper},
                {"epsilon", b.epsilon},           {"alpha", b.alpha},          {"certified_prob", b.certified_prob}};
}

dro::RobustBounds bounds_of(const json& j)
{
    try {
        dro::RobustBounds b;
        b.kind = dro::kind_from_string(j.at("kind").get<std::string>());
        b.lower = j.at("lower").get<std::vector<double>>();
        b.upper = j.at("upper").get<std::vector<double>>();
        b.epsilon = j.at("epsilon").get<double>();
        b.alpha = j.at("alpha").get<double>();
        b.certified_prob = j.at("certified_prob").get<double>();
        if (b.lower.size() != b.upper.size()) throw DimensionError("bounds: lower and upper differ in length");
        for (std::size_t k = 0; k < b.lower.size(); ++k) {
            if (b.lower[k] > b.upper[k]) throw BoxError("bounds: lower exceeds upper at index " + std::to_string(k));
        }
        return b;
    } catch (const json::exception& e) {
        throw ParseError("<bounds>", 0, e.what());
    }
}

json point_json(const grid::OperatingPoint& op)
{
    return json{{"v_sq", op.v_sq}, {"l_sq", op.l_sq}, {"p_flow", op.p_flow}, {"q_flow", op.q_flow},
                {"p0", op.p0},     {"q0", op.q0},     {"loss", op.loss}};
}

json step_json(const sim::StepRecord& s)
{
    return json{{"step", s.step},
                {"violations_v", s.violations.voltage},
                {"violations_i", s.violations.current},
                {"violations_s", s.violations.substation},
                {"loss", s.loss},
                {"reward", s.reward},
                {"deviation", s.deviation},
                {"filter_ms", s.filter_ms},
                {"fallback", s.fallback},
                {"clipped", s.clipped},
                {"exactness_gap", s.exactness_gap}};
}

json report_json(const sim::EpisodeReport& r)
{
    json steps = json::array();
    for (const auto& s : r.steps) steps.push_back(step_json(s));
    const auto t = r.totals();
    return json{{"scenario", r.scenario},
                {"steps", std::move(steps)},
                {"totals", {{"voltage", t.voltage}, {"current", t.current}, {"substation", t.substation}}},
                {"total_loss", r.total_loss()},
                {"fallback_steps", r.fallback_steps()},
                {"max_exactness_gap", r.max_exactness_gap()}};
}

std::string fmt(double x)
{
    std::ostringstream ss;
    ss << std::setprecision(17) << x;
    return ss.str();
}

template <typename T>
T take(const json& j, const char* key, const T& fallback)
{
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

}  // namespace

void write_atomic(const std::filesystem::path& path, const std::string& content)
{
    std::random_device rd;
    auto tmp = path;
    tmp += ".tmp" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw Error("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot rename onto " + path.string() + ": " + ec.message());
    }
}

std::string bounds_to_json(const dro::RobustBounds& bounds)
{
    return bounds_json(bounds).dump(2) + "\n";
}

dro::RobustBounds bounds_from_json(const std::string& text)
{
    return bounds_of(parse_json(text, "<bounds>"));
}

dro::RobustBounds load_bounds(const std::filesystem::path& path)
{
    return bounds_from_json(read_file(path));
}

std::string bound_set_to_json(const filter::BoundSet& set)
{
    return json{{"voltage", bounds_json(set.voltage)},
                {"current", bounds_json(set.current)},
                {"substation", bounds_json(set.substation)}}
               .dump(2) +
           "\n";
}

filter::BoundSet bound_set_from_json(const std::string& text)
{
    const auto j = parse_json(text, "<bounds>");
    try {
        filter::BoundSet s{bounds_of(j.at("voltage")), bounds_of(j.at("current")), bounds_of(j.at("substation"))};
        if (s.voltage.kind != dro::ErrorKind::Voltage || s.current.kind != dro::ErrorKind::Current ||
            s.substation.kind != dro::ErrorKind::Substation) {
            throw ParseError("<bounds>", 0, "bound kinds do not match their keys");
        }
        return s;
    } catch (const json::exception& e) {
        throw ParseError("<bounds>", 0, e.what());
    }
}

filter::BoundSet load_bound_set(const std::filesystem::path& path)
{
    return bound_set_from_json(read_file(path));
}

std::string samples_to_csv(const dro::ErrorSampleSet& set)
{
    std::string out;
    for (const auto& row : set.samples) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out += ',';
            out += fmt(row[k]);
        }
        out += '\n';
    }
    return out;
}

dro::ErrorSampleSet parse_samples_csv(std::istream& in, dro::ErrorKind kind, const std::string& name)
{
    dro::ErrorSampleSet set;
    set.kind = kind;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                const double x = std::stod(cell, &used);
                if (used != cell.size() || !std::isfinite(x)) throw std::invalid_argument(cell);
                row.push_back(x);
            } catch (const std::exception&) {
                throw ParseError(name, lineno, "bad number '" + cell + "'");
            }
        }
        if (!set.samples.empty() && row.size() != set.dim()) {
            throw ParseError(name, lineno, "row has " + std::to_string(row.size()) + " values, expected " +
                                               std::to_string(set.dim()));
        }
        set.samples.push_back(std::move(row));
    }
    if (set.samples.empty()) throw ParseError(name, lineno, "no samples");
    return set;
}

dro::ErrorSampleSet load_samples_csv(const std::filesystem::path& path, dro::ErrorKind kind)
{
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    return parse_samples_csv(in, kind, path.string());
}

std::string filter_result_to_json(const filter::FilterResult& r)
{
    return json{{"q_safe", r.q_safe},
                {"deviation", r.deviation},
                {"exactness_gap", r.exactness_gap},
                {"exact", r.exact},
                {"status", conic::to_string(r.status)},
                {"solve_time", r.solve_time},
                {"objective", r.objective},
                {"fallback", r.fallback},
                {"violated_classes", r.violated_classes},
                {"total_violation", r.total_violation},
                {"predicted", point_json(r.predicted)}}
               .dump(2) +
           "\n";
}

std::vector<double> parse_action_json(const std::string& text)
{
    const auto j = parse_json(text, "<action>");
    try {
        return j.get<std::vector<double>>();
    } catch (const json::exception&) {
        throw ParseError("<action>", 0, "action must be a JSON array of numbers");
    }
}

SimulationSpec parse_simulation_spec(const std::string& text, const std::filesystem::path& base_dir)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known{"horizon",        "sigma",         "seed",           "filter",
                                             "scenarios",      "omega",         "relaxation_tol", "violation_penalty",
                                             "reward_weights", "redraw_each_step", "record_timing", "profile",
                                             "controller",     "samples",       "sample_sigma",   "epsilon",
                                             "alpha"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }

    SimulationSpec s;
    auto& e = s.episode;
    e.horizon = take(j, "horizon", e.horizon);
    e.sigma = take(j, "sigma", e.sigma);
    e.seed = take(j, "seed", e.seed);
    e.filter_on = take(j, "filter", e.filter_on);
    e.n_scenarios = take(j, "scenarios", e.n_scenarios);
    e.drsf.omega = take(j, "omega", e.drsf.omega);
    e.drsf.relaxation_tol = take(j, "relaxation_tol", e.drsf.relaxation_tol);
    e.drsf.violation_penalty = take(j, "violation_penalty", e.drsf.violation_penalty);
    e.redraw_each_step = take(j, "redraw_each_step", e.redraw_each_step);
    e.record_timing = take(j, "record_timing", e.record_timing);
    if (j.contains("reward_weights")) {
        const auto& w = j.at("reward_weights");
        if (!w.is_object()) throw ConfigError("reward_weights must be an object");
        for (const auto& [key, _] : w.items()) {
            if (key != "deviation" && key != "loss") throw ConfigError("unknown reward_weights key '" + key + "'");
        }
        e.weights.deviation = take(w, "deviation", e.weights.deviation);
        e.weights.loss = take(w, "loss", e.weights.loss);
    }
    if (j.contains("profile")) {
        std::filesystem::path p = take<std::string>(j, "profile", "");
        if (p.is_relative()) p = base_dir / p;
        try {
            e.profile = sim::load_profile_csv(p);
        } catch (const ParseError& err) {
            throw ConfigError(std::string("profile: ") + err.what());
        }
    }
    s.controller = take(j, "controller", s.controller);
    s.n_samples = take(j, "samples", s.n_samples);
    s.sample_sigma = take(j, "sample_sigma", e.sigma);
    s.epsilon = take(j, "epsilon", s.epsilon);
    s.alpha = take(j, "alpha", s.alpha);

    e.validate();
    if (s.n_samples == 0) throw ConfigError("samples must be at least 1");
    if (!(s.sample_sigma >= 0.0)) throw ConfigError("sample_sigma must be >= 0");
    try {
        dro::WassersteinBall{s.epsilon, s.alpha}.validate();
    } catch (const ValidationError& err) {
        throw ConfigError(err.what());
    }
    return s;
}

SimulationSpec load_simulation_spec(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_simulation_spec(ss.str(), path.parent_path());
}

std::string simulation_spec_to_json(const SimulationSpec& s)
{
    const auto& e = s.episode;
    json j{{"horizon", e.horizon},
           {"sigma", e.sigma},
           {"seed", e.seed},
           {"filter", e.filter_on},
           {"scenarios", e.n_scenarios},
           {"omega", e.drsf.omega},
           {"relaxation_tol", e.drsf.relaxation_tol},
           {"violation_penalty", e.drsf.violation_penalty},
           {"reward_weights", {{"deviation", e.weights.deviation}, {"loss", e.weights.loss}}},
           {"redraw_each_step", e.redraw_each_step},
           {"record_timing", e.record_timing},
           {"controller", s.controller},
           {"samples", s.n_samples},
           {"sample_sigma", s.sample_sigma},
           {"epsilon", s.epsilon},
           {"alpha", s.alpha}};
    return j.dump();
}

std::string report_to_json(const sim::EpisodeReport& report)
{
    return report_json(report).dump(2) + "\n";
}

std::string reports_to_json(const std::vector<sim::EpisodeReport>& reports)
{
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    return arr.dump(2) + "\n";
}

std::string reports_to_csv(const std::vector<sim::EpisodeReport>& reports)
{
    const bool multi = reports.size() > 1;
    std::string out = multi ? "scenario," : "";
    out += "step,violations_v,violations_i,violations_s,loss,reward,deviation,filter_ms\n";
    for (const auto& r : reports) {
        for (const auto& s : r.steps) {
            if (multi) out += std::to_string(r.scenario) + ",";
            out += std::to_string(s.step) + "," + std::to_string(s.violations.voltage) + "," +
                   std::to_string(s.violations.current) + "," + std::to_string(s.violations.substation) + "," +
                   fmt(s.loss) + "," + fmt(s.reward) + "," + fmt(s.deviation) + "," + fmt(s.filter_ms) + "\n";
        }
    }
    return out;
}

std::string sweep_to_csv(const std::vector<sim::SweepPoint>& points)
{
    std::string out = "epsilon,violation_probability,steps,violations_v,violations_i,violations_s,fallback_steps,voltage_width\n";
    for (const auto& p : points) {
        out += fmt(p.epsilon) + "," + fmt(p.violation_probability) + "," + std::to_string(p.steps) + "," +
               std::to_string(p.totals.voltage) + "," + std::to_string(p.totals.current) + "," +
               std::to_string(p.totals.substation) + "," + std::to_string(p.fallback_steps) + "," +
               fmt(p.voltage_width) + "\n";
    }
    return out;
}

}  // namespace drsf::io
