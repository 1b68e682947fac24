#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "spml/dynamics.hpp"
#include "spml/grid.hpp"
#include "spml/initial_conditions.hpp"
#include "spml/library.hpp"
#include "spml/spml_solver.hpp"

namespace spml {

class SensorSet;

namespace io {

using nlohmann::json;

inline constexpr const char* library_version = "spml-lib/1";
inline constexpr const char* density_version = "spml-phi/1";
inline constexpr const char* sensors_version = "spml-sensors/1";

json grid_to_json(const Grid& g);
Grid grid_from_json(const json& j);

/// {grid:{n,x_min,x_max}, values:[...]}
json field_to_json(const Field& f);
Field field_from_json(const json& j);

/// {kind:"rd1d", nu, weight:{kind:"tanh", a, x0, epsilon} | {kind:"uniform"}} or
/// {kind:"fhn1d", nu, beta, gamma}
json system_params_to_json(const System& sys);
System system_from_json(const json& params, const Grid& grid);

json ic_to_json(const ICSpec& ic);
ICSpec ic_from_json(const json& j);

/// {system, params, grid, attractors:[{id, values, tag}]}
json catalog_to_json(const System& sys, std::span<const Attractor> attractors);
struct Catalog {
    System system;
    std::vector<Attractor> attractors;
};
Catalog catalog_from_json(const json& j);

json library_to_json(const LabeledLibrary& lib);
LabeledLibrary library_from_json(const json& j);

/// Learned density with its solver diagnostics.
json density_to_json(const SPMLSolution& sol);
Density density_from_json(const json& j);

json sensors_to_json(const SensorSet& sensors);
SensorSet sensors_from_json(const json& j);

/// Text I/O. Reading raises ParseError naming the file on malformed or
/// truncated content.
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Shortest decimal form that round-trips a double.
std::string format_double(double v);

}  // namespace io
}  // namespace spml
