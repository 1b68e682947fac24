#include "commands.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "spml/io.hpp"
#include "spml/library.hpp"
#include "spml/metrics.hpp"
#include "spml/parallel.hpp"
#include "spml/random.hpp"

namespace spml::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string out_dir;
};

ExperimentConfig resolve(const Globals& g) {
    ExperimentConfig cfg = g.config_path.empty() ? parse_config(json::object()) : load_config(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
    return cfg;
}

std::vector<Attractor> attractors_for(const ExperimentConfig& cfg, const System& sys, const ICSpec& ic,
                                      const std::string& catalog_path, unsigned threads, std::ostream& out) {
    if (!catalog_path.empty()) {
        io::Catalog cat = io::catalog_from_json(io::read_json(catalog_path));
        if (io::system_params_to_json(cat.system) != io::system_params_to_json(sys) ||
            !(system_grid(cat.system) == system_grid(sys)))
            throw ConfigError(catalog_path + ": attractor catalog was built for a different system");
        return std::move(cat.attractors);
    }
    DiscoveryOptions opts = cfg.discovery;
    opts.seed = cfg.seed;
    opts.integrator = cfg.integrator;
    opts.threads = threads;
    DiscoveryReport rep = discover_attractors(sys, ic, opts);
    out << "discovered " << rep.attractors.size() << " attractors (" << rep.dropped << " pilots dropped, "
        << rep.unstable << " unstable)\n";
    return std::move(rep.attractors);
}

ClassifyOptions classify_options(const ExperimentConfig& cfg) {
    ClassifyOptions c = cfg.classify;
    c.integrator = cfg.integrator;
    return c;
}

std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Field read_field_file(const std::string& path, const Grid& grid) {
    Field f = io::field_from_json(io::read_json(path));
    if (!(f.grid() == grid)) throw ParseError(path + ": field grid differs from the configured grid");
    return f;
}

SensorSet sensors_from_any(const json& j) {
    if (j.contains("version")) return io::sensors_from_json(j);
    json copy = j;
    copy["version"] = io::sensors_version;
    if (!copy.contains("weights")) copy["weights"] = std::vector<double>(copy.at("locations").size(), 1.0);
    return io::sensors_from_json(copy);
}

// ---- subcommands ---------------------------------------------------------

int cmd_discover(const Globals& g, std::ostream& out) {
    const ExperimentConfig cfg = resolve(g);
    const System sys = cfg.system();
    const ICSpec ic = cfg.ic(sys);
    const auto atts = attractors_for(cfg, sys, ic, "", g.threads, out);
    const fs::path path = fs::path(cfg.output_dir) / "attractors.json";
    io::write_json(path, io::catalog_to_json(sys, atts));
    for (const Attractor& a : atts) out << "  A" << a.id << " " << a.tag << "\n";
    out << "wrote " << path.string() << "\n";
    return kOk;
}

struct SimulateArgs {
    std::string ic = "random";
    std::size_t ic_index = 0;
    double t_end = 100.0;
    std::size_t samples = 20;
    double project = 0.0;
    std::string attractors;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a, std::ostream& out) {
    const ExperimentConfig cfg = resolve(g);
    const System sys = cfg.system();
    const Grid& grid = system_grid(sys);
    const ICSpec spec = cfg.ic(sys);
    if (!(a.t_end > 0.0)) throw ConfigError("--t-end must be positive");
    if (a.samples == 0) throw ConfigError("--samples must be positive");

    std::vector<double> state;
    if (a.ic == "random") {
        const RandomIC r = generate_random_ic(spec, grid, derive_seed(cfg.seed, a.ic_index));
        state = make_state(sys, r.u, r.v);
    } else if (a.ic.rfind("constant:", 0) == 0) {
        double v = 0.0;
        try {
            v = std::stod(a.ic.substr(9));
        } catch (const std::exception&) {
            throw ConfigError("--ic constant:<value> needs a number");
        }
        state = make_state(sys, Field::constant(grid, v), std::nullopt);
    } else {
        state = make_state(sys, read_field_file(a.ic, grid), std::nullopt);
    }

    IntegratorConfig ic = cfg.integrator;
    ic.t_end = a.t_end;
    std::vector<double> times(a.samples);
    for (std::size_t i = 0; i < a.samples; ++i)
        times[i] = a.t_end * static_cast<double>(i + 1) / static_cast<double>(a.samples);
    const Trajectory traj = integrate(sys, state, ic, times);

    const auto* rd = std::get_if<RdSystem>(&sys);
    std::ostringstream csv;
    csv << "t";
    if (rd) csv << ",energy";
    for (std::size_t k = 0; k < grid.size(); ++k) csv << ",u" << k;
    if (!rd)
        for (std::size_t k = 0; k < grid.size(); ++k) csv << ",v" << k;
    csv << "\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        csv << csv_number(traj.times[i]);
        if (rd) {
            const Field u = observable(sys, traj.states[i]);
            csv << "," << csv_number(energy_functional(u, rd->weight(), rd->nu(), &RdSystem::reaction_antiderivative));
        }
        for (double v : traj.states[i]) csv << "," << csv_number(v);
        csv << "\n";
    }
    const fs::path path = fs::path(cfg.output_dir) / "trajectory.csv";
    io::write_text(path, csv.str());
    out << "wrote " << path.string() << " (" << traj.times.size() << " rows)\n";

    if (a.project > 0.0) {
        const SensorSet sensors = SensorSet::symmetric_pair(a.project);
        std::string label;
        if (!a.attractors.empty()) {
            const auto atts = attractors_for(cfg, sys, spec, a.attractors, g.threads, out);
            const auto l = classify_attractor(sys, traj.final_state(), atts, classify_options(cfg));
            label = l ? std::to_string(*l) : "unconverged";
        }
        const auto points = project_trajectory(sys, traj, sensors);
        std::ostringstream p;
        p << "t,x_plus,x_minus,label\n";
        for (std::size_t i = 0; i < points.size(); ++i)
            p << csv_number(traj.times[i]) << "," << csv_number(points[i][1]) << "," << csv_number(points[i][0]) << ","
              << label << "\n";
        const fs::path ppath = fs::path(cfg.output_dir) / "projection.csv";
        io::write_text(ppath, p.str());
        out << "wrote " << ppath.string() << "\n";
    }
    return kOk;
}

int cmd_gen_library(const Globals& g, const std::string& catalog, std::optional<std::size_t> n, std::ostream& out) {
    const ExperimentConfig cfg = resolve(g);
    const System sys = cfg.system();
    const ICSpec ic = cfg.ic(sys);
    const auto atts = attractors_for(cfg, sys, ic, catalog, g.threads, out);
    LibraryOptions lo;
    lo.n_per_attractor = n.value_or(cfg.n_per_attractor);
    lo.seed = library_stream_seed(cfg.seed);
    lo.augment = cfg.augment;
    lo.draw_budget_factor = cfg.draw_budget_factor;
    lo.classify = classify_options(cfg);
    lo.threads = g.threads;
    const LabeledLibrary lib = build_library(sys, atts, ic, lo);
    const fs::path path = fs::path(cfg.output_dir) / "library.json";
    io::write_json(path, io::library_to_json(lib));
    out << "library: " << lib.size() << " states from " << lib.stats.draws << " draws (" << lib.stats.unconverged
        << " unconverged, " << lib.stats.rejected_full << " rejected)\n";
    out << "wrote " << path.string() << "\n";
    return kOk;
}

int cmd_learn_metric(const Globals& g, const std::string& library, std::optional<double> alpha,
                     const std::vector<double>& lambdas, std::ostream& out) {
    const ExperimentConfig cfg = resolve(g);
    const LabeledLibrary lib = io::library_from_json(io::read_json(library));
    const PairSums ps = assemble_pair_sums(lib);
    SPMLParams p = cfg.spml;
    if (alpha) p.alpha = *alpha;
    for (double lambda : lambdas.empty() ? cfg.lambdas : lambdas) {
        p.lambda = lambda;
        p.validate();
        const SPMLSolution sol = solve(ps, p);
        const fs::path path = fs::path(cfg.output_dir) / ("phi_lambda_" + io::format_double(lambda) + ".json");
        io::write_json(path, io::density_to_json(sol));
        out << "lambda " << lambda << ": J=" << sol.objective << " D=" << sol.dissimilar << " kkt=" << sol.kkt
            << " active=" << sol.active_set << " -> " << path.string() << "\n";
    }
    return kOk;
}

int cmd_sensors(const Globals& g, const std::string& density, std::optional<double> mass_fraction, std::ostream& out) {
    const ExperimentConfig cfg = resolve(g);
    const Density phi = io::density_from_json(io::read_json(density));
    const double mf = mass_fraction.value_or(cfg.mass_fraction);
    if (!(mf > 0.0 && mf <= 1.0)) throw ConfigError("--mass-fraction must lie in (0, 1]");
    const SensorSet sensors = extract_sensors(phi, mf);
    const fs::path path = fs::path(cfg.output_dir) / "sensors.json";
    io::write_json(path, io::sensors_to_json(sensors));
    out << "sensors:";
    for (double x : sensors.locations()) out << " " << x;
    out << "\nwrote " << path.string() << "\n";
    return kOk;
}

struct ClassifyArgs {
    std::string library;
    std::string measurement;
    std::string state;
    std::string sensors;
    std::string density;
    std::string metric = "L2";
};

int cmd_classify(const Globals& g, const ClassifyArgs& a, std::ostream& out) {
    resolve(g);
    const LabeledLibrary lib = io::library_from_json(io::read_json(a.library));
    Prediction pred;
    if (!a.measurement.empty()) {
        const json m = io::read_json(a.measurement);
        std::optional<Measurement> meas;
        try {
            meas.emplace(sensors_from_any(m.at("sensors")), m.at("values").get<std::vector<double>>());
        } catch (const json::exception& e) {
            throw ParseError(a.measurement + ": " + e.what());
        } catch (const Error& e) {
            throw ParseError(a.measurement + ": " + e.what());
        }
        SensorSet sensors = meas->sensors;
        if (!a.sensors.empty()) sensors = io::sensors_from_json(io::read_json(a.sensors));
        pred = nearest_neighbor_classify(*meas, lib, Metric::atoms(sensors));
    } else if (!a.state.empty()) {
        const Field u = read_field_file(a.state, lib.grid());
        std::optional<Metric> metric;
        if (!a.density.empty()) metric = Metric::dense(io::density_from_json(io::read_json(a.density)));
        else if (!a.sensors.empty()) metric = Metric::atoms(io::sensors_from_json(io::read_json(a.sensors)));
        else if (a.metric == "L2") metric = Metric::plain_l2();
        else if (a.metric == "intrinsic") {
            const auto* rd = std::get_if<RdSystem>(&lib.system());
            if (!rd) throw ConfigError("--metric intrinsic needs a reaction-diffusion library");
            metric = Metric::intrinsic(rd->weight());
        } else {
            throw ConfigError("--metric must be L2 or intrinsic");
        }
        pred = nearest_neighbor_classify(u, lib, *metric);
    } else {
        throw ConfigError("classify needs --measurement or --state");
    }
    out << json{{"label", pred.label}, {"distance_sq", pred.distance_sq}, {"index", pred.index}}.dump() << "\n";
    return kOk;
}

int cmd_evaluate(const Globals& g, const std::string& catalog, std::ostream& out) {
    const ExperimentConfig cfg = resolve(g);
    const System sys = cfg.system();
    const ICSpec ic = cfg.ic(sys);
    std::vector<MetricSpec> metrics;
    for (const std::string& name : cfg.metrics_or_default()) metrics.push_back(metric_from_name(name, cfg, sys));
    const auto atts = attractors_for(cfg, sys, ic, catalog, g.threads, out);
    EvaluationOptions eo;
    eo.sizes = cfg.eval_sizes;
    eo.n_test = cfg.n_test;
    eo.seed = cfg.seed;
    eo.augment = cfg.augment;
    eo.shared_test_set = cfg.shared_test_set;
    eo.draw_budget_factor = cfg.draw_budget_factor;
    eo.classify = classify_options(cfg);
    eo.threads = g.threads;
    DrawCache cache;
    eo.cache = &cache;
    const ErrorTable table = evaluate_error(sys, atts, ic, metrics, eo);
    const fs::path path = fs::path(cfg.output_dir) / "errors.csv";
    io::write_text(path, table.to_csv());
    for (const ErrorRow& r : table.rows)
        out << "n=" << r.n_labels << " " << r.metric << ": error " << r.error << " over " << r.n_test << " ("
            << r.excluded << " excluded)\n";
    out << "wrote " << path.string() << "\n";
    return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparsity-promoting metric learning for attractor prediction", "spml"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "Base seed (overrides the config)");
    app.add_option("--threads", g.threads, "Worker threads (0 = available parallelism)");
    app.add_option("--out", g.out_dir, "Output directory (overrides the config)");

    auto* discover = app.add_subcommand("discover-attractors", "Find the stable steady states");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Integrate one initial condition");
    simulate->add_option("--ic", sim.ic, "random | constant:<value> | field JSON path");
    simulate->add_option("--ic-index", sim.ic_index, "Draw index of the random initial condition");
    simulate->add_option("--t-end", sim.t_end, "Final time");
    simulate->add_option("--samples", sim.samples, "Number of sample times after t=0");
    simulate->add_option("--project", sim.project, "Also write the (u(x), u(-x)) projection for this x > 0");
    simulate->add_option("--attractors", sim.attractors, "Catalog used to label the projection");

    std::string catalog;
    std::optional<std::size_t> n_per;
    auto* gen = app.add_subcommand("gen-library", "Generate a labeled library");
    gen->add_option("--attractors", catalog, "Attractor catalog (discovered when omitted)");
    gen->add_option("--n-per-attractor", n_per, "States per attractor");

    std::string library;
    std::optional<double> alpha;
    std::vector<double> lambdas;
    auto* learn = app.add_subcommand("learn-metric", "Learn densities for a list of sparsity parameters");
    learn->add_option("--library", library, "Library JSON")->required();
    learn->add_option("--alpha", alpha, "Regularization weight");
    learn->add_option("--lambda", lambdas, "Sparsity parameter (repeatable)");

    std::string density;
    std::optional<double> mass_fraction;
    auto* sensors = app.add_subcommand("sensors", "Extract sensor locations from a density");
    sensors->add_option("--density", density, "Density JSON")->required();
    sensors->add_option("--mass-fraction", mass_fraction, "Captured fraction of the density mass");

    ClassifyArgs cl;
    auto* classify = app.add_subcommand("classify", "Predict the attractor of a measured state");
    classify->add_option("--library", cl.library, "Library JSON")->required();
    classify->add_option("--measurement", cl.measurement, "Measurement JSON {sensors, values}");
    classify->add_option("--state", cl.state, "Full field JSON");
    classify->add_option("--sensors", cl.sensors, "Sensors JSON (atom metric)");
    classify->add_option("--density", cl.density, "Density JSON (dense metric, with --state)");
    classify->add_option("--metric", cl.metric, "L2 | intrinsic (with --state)");

    auto* evaluate = app.add_subcommand("evaluate", "Classification error versus library size");
    evaluate->add_option("--attractors", catalog, "Attractor catalog (discovered when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kConfig;
    }
    if (seed_opt->count()) g.seed = seed;

    try {
        if (*discover) return cmd_discover(g, out);
        if (*simulate) return cmd_simulate(g, sim, out);
        if (*gen) return cmd_gen_library(g, catalog, n_per, out);
        if (*learn) return cmd_learn_metric(g, library, alpha, lambdas, out);
        if (*sensors) return cmd_sensors(g, density, mass_fraction, out);
        if (*classify) return cmd_classify(g, cl, out);
        if (*evaluate) return cmd_evaluate(g, catalog, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const IntegrationError& e) {
        err << "integration failure at t=" << e.last_good_time() << ": " << e.what() << "\n";
        return kIntegration;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return kParse;
    } catch (const GenerationError& e) {
        err << "generation error: " << e.what() << "\n";
        return kGeneration;
    } catch (const NonConvergenceError& e) {
        err << "solver did not converge: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kDomain;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kDomain;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUnexpected;
    }
    return kUnexpected;
}

}  // namespace spml::cli
