#include "spml/io.hpp"

#include <fstream>
#include <sstream>

#include "spml/metrics.hpp"

namespace spml::io {

namespace {

// Runs a decoder, turning schema and type errors into ParseError.
template <class F>
auto decode(const char* what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ParseError(std::string(what) + ": " + e.what());
    } catch (const DimensionError& e) {
        throw ParseError(std::string(what) + ": " + e.what());
    } catch (const DomainError& e) {
        throw ParseError(std::string(what) + ": " + e.what());
    }
}

void require_version(const json& j, const char* expected) {
    if (!j.is_object() || !j.contains("version")) throw ParseError(std::string("missing version field, expected ") + expected);
    const auto& v = j.at("version");
    if (!v.is_string() || v.get<std::string>() != expected)
        throw ParseError("version mismatch: expected " + std::string(expected) + ", found " + v.dump());
}

json values_array(std::span<const double> values) { return json(std::vector<double>(values.begin(), values.end())); }

}  // namespace

json grid_to_json(const Grid& g) { return {{"n", g.size()}, {"x_min", g.x_min()}, {"x_max", g.x_max()}}; }

Grid grid_from_json(const json& j) {
    return decode("grid", [&] {
        return Grid(j.at("n").get<std::size_t>(), j.at("x_min").get<double>(), j.at("x_max").get<double>());
    });
}

json field_to_json(const Field& f) { return {{"grid", grid_to_json(f.grid())}, {"values", values_array(f.values())}}; }

Field field_from_json(const json& j) {
    return decode("field", [&] { return Field(grid_from_json(j.at("grid")), j.at("values").get<std::vector<double>>()); });
}

json system_params_to_json(const System& sys) {
    if (const auto* rd = std::get_if<RdSystem>(&sys)) {
        json weight = {{"kind", "uniform"}};
        if (const auto& p = rd->weight_params()) weight = {{"kind", "tanh"}, {"a", p->a}, {"x0", p->x0}, {"epsilon", p->epsilon}};
        return {{"kind", "rd1d"}, {"nu", rd->nu()}, {"weight", weight}};
    }
    const auto& fhn = std::get<FhnSystem>(sys);
    return {{"kind", "fhn1d"}, {"nu", fhn.nu()}, {"beta", fhn.beta()}, {"gamma", fhn.gamma()}};
}

System system_from_json(const json& params, const Grid& grid) {
    return decode("system parameters", [&]() -> System {
        const std::string kind = params.at("kind").get<std::string>();
        if (kind == "rd1d") {
            const double nu = params.at("nu").get<double>();
            const json& w = params.at("weight");
            const std::string wk = w.at("kind").get<std::string>();
            if (wk == "uniform") return RdSystem::uniform(grid, nu);
            if (wk != "tanh") throw ParseError("unknown weight kind '" + wk + "'");
            TanhWeight tw{w.at("a").get<double>(), w.at("x0").get<double>(), w.at("epsilon").get<double>()};
            return RdSystem::weighted(grid, tw, nu);
        }
        if (kind == "fhn1d")
            return FhnSystem(grid, params.at("nu").get<double>(), params.at("beta").get<double>(),
                             params.at("gamma").get<double>());
        throw ParseError("unknown system kind '" + kind + "'");
    });
}

json ic_to_json(const ICSpec& ic) {
    return {{"kind", ic.kind}, {"modes", ic.modes}, {"center", ic.center}, {"amplitude", ic.amplitude}, {"t0", ic.t0}};
}

ICSpec ic_from_json(const json& j) {
    return decode("initial-condition spec", [&] {
        ICSpec ic;
        ic.kind = j.at("kind").get<std::string>();
        ic.modes = j.at("modes").get<int>();
        ic.center = j.at("center").get<double>();
        ic.amplitude = j.at("amplitude").get<double>();
        ic.t0 = j.at("t0").get<double>();
        try {
            ic.validate();
        } catch (const ConfigError& e) {
            throw ParseError(e.what());
        }
        return ic;
    });
}

namespace {

json attractors_to_json(std::span<const Attractor> attractors) {
    json out = json::array();
    for (const Attractor& a : attractors)
        out.push_back({{"id", a.id}, {"values", values_array(a.state.values())}, {"tag", a.tag}});
    return out;
}

std::vector<Attractor> attractors_from_json(const json& j, const Grid& grid) {
    std::vector<Attractor> out;
    for (const json& a : j)
        out.push_back(Attractor{a.at("id").get<int>(), Field(grid, a.at("values").get<std::vector<double>>()),
                                a.at("tag").get<std::string>()});
    if (out.empty()) throw ParseError("attractor catalog is empty");
    return out;
}

}  // namespace

json catalog_to_json(const System& sys, std::span<const Attractor> attractors) {
    return {{"system", system_kind(sys)},
            {"params", system_params_to_json(sys)},
            {"grid", grid_to_json(system_grid(sys))},
            {"attractors", attractors_to_json(attractors)}};
}

Catalog catalog_from_json(const json& j) {
    return decode("attractor catalog", [&] {
        const Grid grid = grid_from_json(j.at("grid"));
        System sys = system_from_json(j.at("params"), grid);
        if (j.at("system").get<std::string>() != system_kind(sys)) throw ParseError("system kind disagrees with params");
        return Catalog{std::move(sys), attractors_from_json(j.at("attractors"), grid)};
    });
}

json library_to_json(const LabeledLibrary& lib) {
    json states = json::array();
    for (const LabeledState& s : lib.states()) {
        json e = {{"u0", values_array(s.u0.values())}};
        if (s.v0) e["v0"] = values_array(s.v0->values());
        e["label"] = s.label;
        e["seed"] = s.seed;
        e["augmented"] = s.augmented;
        states.push_back(std::move(e));
    }
    return {{"version", library_version},
            {"system", system_kind(lib.system())},
            {"params", system_params_to_json(lib.system())},
            {"grid", grid_to_json(lib.grid())},
            {"ic", ic_to_json(lib.ic())},
            {"attractors", attractors_to_json(lib.attractors())},
            {"stats", {{"draws", lib.stats.draws}, {"unconverged", lib.stats.unconverged}, {"rejected_full", lib.stats.rejected_full}}},
            {"states", std::move(states)}};
}

LabeledLibrary library_from_json(const json& j) {
    require_version(j, library_version);
    return decode("library", [&] {
        const Grid grid = grid_from_json(j.at("grid"));
        System sys = system_from_json(j.at("params"), grid);
        if (j.at("system").get<std::string>() != system_kind(sys)) throw ParseError("system kind disagrees with params");
        LabeledLibrary lib(std::move(sys), ic_from_json(j.at("ic")), attractors_from_json(j.at("attractors"), grid));
        for (const json& s : j.at("states")) {
            LabeledState st{Field(grid, s.at("u0").get<std::vector<double>>()), std::nullopt, s.at("label").get<int>(),
                            s.at("seed").get<std::uint64_t>(), s.at("augmented").get<bool>()};
            if (s.contains("v0")) st.v0 = Field(grid, s.at("v0").get<std::vector<double>>());
            lib.add(std::move(st));
        }
        if (j.contains("stats")) {
            const json& st = j.at("stats");
            lib.stats = LibraryStats{st.at("draws").get<std::size_t>(), st.at("unconverged").get<std::size_t>(),
                                     st.at("rejected_full").get<std::size_t>()};
        }
        return lib;
    });
}

json density_to_json(const SPMLSolution& sol) {
    return {{"version", density_version},
            {"grid", grid_to_json(sol.phi.grid())},
            {"phi", values_array(sol.phi.values())},
            {"alpha", sol.phi.alpha()},
            {"lambda", sol.phi.lambda()},
            {"diagnostics",
             {{"objective", sol.objective}, {"D", sol.dissimilar}, {"kkt", sol.kkt}, {"iters", sol.iterations},
              {"active_set", sol.active_set}}}};
}

Density density_from_json(const json& j) {
    require_version(j, density_version);
    return decode("density", [&] {
        return Density(grid_from_json(j.at("grid")), j.at("phi").get<std::vector<double>>(), j.at("alpha").get<double>(),
                       j.at("lambda").get<double>());
    });
}

json sensors_to_json(const SensorSet& sensors) {
    return {{"version", sensors_version},
            {"locations", values_array(sensors.locations())},
            {"weights", values_array(sensors.weights())}};
}

SensorSet sensors_from_json(const json& j) {
    require_version(j, sensors_version);
    return decode("sensors", [&] {
        return SensorSet(j.at("locations").get<std::vector<double>>(), j.at("weights").get<std::vector<double>>());
    });
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open file");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw ConfigError(path.string() + ": write failed");
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

std::string format_double(double v) { return json(v).dump(); }

}  // namespace spml::io
