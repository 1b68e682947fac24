#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <type_traits>

#include "spml/io.hpp"

namespace spml::cli {

using nlohmann::json;

namespace {

class Section {
public:
    Section(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(label("") + " must be an object");
        for (const auto& [key, value] : j_.items())
            if (!allowed.count(key)) throw ConfigError("unknown config key '" + label(key) + "'");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    const json& raw(const std::string& key) const { return j_.at(key); }
    std::string label(const std::string& key) const {
        if (path_.empty()) return key.empty() ? "config" : key;
        return key.empty() ? path_ : path_ + "." + key;
    }

    template <class T>
    void read(const std::string& key, T& out) const {
        if (!j_.contains(key)) return;
        if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
            if (!j_.at(key).is_number_unsigned())
                throw ConfigError("config key '" + label(key) + "' must be a nonnegative integer");
        }
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + label(key) + "' has the wrong type");
        }
    }

    void positive(const std::string& key, double& out) const {
        if (!j_.contains(key)) return;
        read(key, out);
        if (!(out > 0.0) || !std::isfinite(out)) throw ConfigError("config key '" + label(key) + "' must be positive");
    }

private:
    const json& j_;
    std::string path_;
};

}  // namespace

Grid ExperimentConfig::grid() const {
    try {
        return Grid(grid_n, x_min, x_max);
    } catch (const Error& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
}

System ExperimentConfig::system() const {
    const Grid g = grid();
    try {
        if (system_kind == "fhn1d") return FhnSystem(g, nu, beta, gamma);
        if (weight_kind == "uniform") return RdSystem::uniform(g, nu);
        return RdSystem::weighted(g, weight, nu);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("system: ") + e.what());
    }
}

ICSpec ExperimentConfig::ic(const System& sys) const {
    ICSpec spec = ICSpec::for_system(sys);
    const Section s(ic_overrides, "ic", {"modes", "center", "amplitude", "t0"});
    s.read("modes", spec.modes);
    s.read("center", spec.center);
    s.read("amplitude", spec.amplitude);
    s.read("t0", spec.t0);
    spec.validate();
    return spec;
}

std::vector<std::string> ExperimentConfig::metrics_or_default() const {
    if (!eval_metrics.empty()) return eval_metrics;
    if (system_kind == "fhn1d") return {"L2", "dense:0", "sensors:0.9", "atoms:0"};
    return {"L2", "intrinsic", "dense:0", "sensors:0.9", "atoms:-0.72;0.72", "atoms:-1;1", "atoms:-0.5;0.5"};
}

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    const Section root(j, "",
                       {"system", "grid", "integrator", "ic", "attractors", "classify", "library", "spml", "sensors",
                        "evaluation", "seed", "output_dir"});
    if (root.has("system")) {
        const Section s(root.raw("system"), "system", {"kind", "nu", "weight", "beta", "gamma"});
        s.read("kind", c.system_kind);
        if (c.system_kind != "rd1d" && c.system_kind != "fhn1d")
            throw ConfigError("config key 'system.kind' must be rd1d or fhn1d");
        s.positive("nu", c.nu);
        s.positive("beta", c.beta);
        s.positive("gamma", c.gamma);
        if (s.has("weight")) {
            const Section w(s.raw("weight"), "system.weight", {"kind", "a", "x0", "epsilon"});
            w.read("kind", c.weight_kind);
            if (c.weight_kind != "tanh" && c.weight_kind != "uniform")
                throw ConfigError("config key 'system.weight.kind' must be tanh or uniform");
            w.read("a", c.weight.a);
            w.read("x0", c.weight.x0);
            w.positive("epsilon", c.weight.epsilon);
        }
    }
    if (root.has("grid")) {
        const Section s(root.raw("grid"), "grid", {"n", "x_min", "x_max"});
        s.read("n", c.grid_n);
        s.read("x_min", c.x_min);
        s.read("x_max", c.x_max);
        if (c.grid_n < 3) throw ConfigError("config key 'grid.n' must be at least 3");
        if (!(c.x_max > c.x_min)) throw ConfigError("config key 'grid.x_max' must exceed grid.x_min");
    }
    if (root.has("integrator")) {
        const Section s(root.raw("integrator"), "integrator", {"rtol", "atol", "max_step", "initial_step", "max_steps"});
        s.positive("rtol", c.integrator.rtol);
        s.positive("atol", c.integrator.atol);
        s.positive("max_step", c.integrator.max_step);
        s.read("initial_step", c.integrator.initial_step);
        s.read("max_steps", c.integrator.max_steps);
        if (c.integrator.max_steps == 0) throw ConfigError("config key 'integrator.max_steps' must be positive");
        if (c.integrator.initial_step < 0.0) throw ConfigError("config key 'integrator.initial_step' must be >= 0");
    }
    if (root.has("ic")) {
        c.ic_overrides = root.raw("ic");
        const Section check(c.ic_overrides, "ic", {"modes", "center", "amplitude", "t0"});
    }
    if (root.has("attractors")) {
        const Section s(root.raw("attractors"), "attractors", {"n_pilot", "t_long", "t_polish_max", "merge_tol"});
        s.read("n_pilot", c.discovery.n_pilot);
        if (c.discovery.n_pilot < 50) throw ConfigError("config key 'attractors.n_pilot' must be at least 50");
        s.positive("t_long", c.discovery.t_long);
        s.positive("t_polish_max", c.discovery.t_polish_max);
        s.positive("merge_tol", c.discovery.merge_tol);
    }
    if (root.has("classify")) {
        const Section s(root.raw("classify"), "classify", {"window", "t_max", "match_tol"});
        s.positive("window", c.classify.window);
        s.positive("t_max", c.classify.t_max);
        s.positive("match_tol", c.classify.match_tol);
    }
    if (root.has("library")) {
        const Section s(root.raw("library"), "library", {"n_per_attractor", "augment", "draw_budget_factor"});
        s.read("n_per_attractor", c.n_per_attractor);
        if (c.n_per_attractor == 0) throw ConfigError("config key 'library.n_per_attractor' must be positive");
        s.read("augment", c.augment);
        s.positive("draw_budget_factor", c.draw_budget_factor);
    }
    if (root.has("spml")) {
        const Section s(root.raw("spml"), "spml", {"alpha", "lambdas", "level", "kkt_tol", "max_iterations", "method"});
        s.read("alpha", c.spml.alpha);
        s.read("lambdas", c.lambdas);
        s.read("level", c.spml.level);
        s.read("kkt_tol", c.spml.kkt_tol);
        s.read("max_iterations", c.spml.max_iterations);
        std::string method = "active-set";
        s.read("method", method);
        if (method == "active-set") c.spml.method = SolverMethod::ActiveSetKkt;
        else if (method == "projected-gradient") c.spml.method = SolverMethod::ProjectedGradient;
        else throw ConfigError("config key 'spml.method' must be active-set or projected-gradient");
        if (c.lambdas.empty()) throw ConfigError("config key 'spml.lambdas' must not be empty");
    }
    for (double lambda : c.lambdas) {
        SPMLParams p = c.spml;
        p.lambda = lambda;
        p.validate();
    }
    if (root.has("sensors")) {
        const Section s(root.raw("sensors"), "sensors", {"mass_fraction"});
        s.read("mass_fraction", c.mass_fraction);
        if (!(c.mass_fraction > 0.0 && c.mass_fraction <= 1.0))
            throw ConfigError("config key 'sensors.mass_fraction' must lie in (0, 1]");
    }
    if (root.has("evaluation")) {
        const Section s(root.raw("evaluation"), "evaluation", {"sizes", "n_test", "shared_test_set", "metrics"});
        s.read("sizes", c.eval_sizes);
        s.read("n_test", c.n_test);
        s.read("shared_test_set", c.shared_test_set);
        s.read("metrics", c.eval_metrics);
        if (c.eval_sizes.empty() || std::find(c.eval_sizes.begin(), c.eval_sizes.end(), 0u) != c.eval_sizes.end())
            throw ConfigError("config key 'evaluation.sizes' must list positive sizes");
        if (c.n_test == 0) throw ConfigError("config key 'evaluation.n_test' must be positive");
    }
    root.read("seed", c.seed);
    root.read("output_dir", c.output_dir);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config(io::read_json(path));
}

namespace {

double parse_number(const std::string& text, const std::string& metric) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) throw ConfigError("metric '" + metric + "': bad number '" + text + "'");
    return v;
}

}  // namespace

MetricSpec metric_from_name(const std::string& name, const ExperimentConfig& cfg, const System& sys) {
    if (name == "L2") return MetricSpec::fixed(name, Metric::plain_l2());
    if (name == "intrinsic") {
        const auto* rd = std::get_if<RdSystem>(&sys);
        if (!rd) throw ConfigError("metric 'intrinsic' needs a reaction-diffusion system");
        return MetricSpec::fixed(name, Metric::intrinsic(rd->weight()));
    }
    const auto colon = name.find(':');
    if (colon == std::string::npos) throw ConfigError("unknown metric '" + name + "'");
    const std::string head = name.substr(0, colon), tail = name.substr(colon + 1);
    if (head == "dense" || head == "sensors") {
        SPMLParams p = cfg.spml;
        p.lambda = parse_number(tail, name);
        try {
            p.validate();
        } catch (const ConfigError& e) {
            throw ConfigError("metric '" + name + "': " + e.what());
        }
        if (head == "dense") return MetricSpec::learned_dense(name, p);
        return MetricSpec::learned_sensors(name, p, cfg.mass_fraction);
    }
    if (head == "atoms") {
        std::vector<double> xs;
        std::stringstream ss(tail);
        for (std::string item; std::getline(ss, item, ';');) xs.push_back(parse_number(item, name));
        try {
            SensorSet sensors(xs);
            sensors.indices(system_grid(sys));
            return MetricSpec::fixed(name, Metric::atoms(std::move(sensors)));
        } catch (const Error& e) {
            throw ConfigError("metric '" + name + "': " + e.what());
        }
    }
    throw ConfigError("unknown metric '" + name + "'");
}

}  // namespace spml::cli
