#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "spml/dynamics.hpp"
#include "spml/initial_conditions.hpp"
#include "spml/metrics.hpp"
#include "spml/spml_solver.hpp"

namespace spml::cli {

/// Everything a pipeline run needs. Defaults reproduce the weighted
/// reaction-diffusion experiment.
struct ExperimentConfig {
    std::string system_kind = "rd1d";
    double nu = 1e-2;
    std::string weight_kind = "tanh";  ///< tanh | uniform
    TanhWeight weight{};
    double beta = 1e-2;
    double gamma = 1.0;

    std::size_t grid_n = 201;
    double x_min = -1.0;
    double x_max = 1.0;

    IntegratorConfig integrator{};
    nlohmann::json ic_overrides = nlohmann::json::object();

    DiscoveryOptions discovery{};
    ClassifyOptions classify{};

    std::size_t n_per_attractor = 20;
    bool augment = true;
    double draw_budget_factor = 100.0;

    SPMLParams spml{};
    std::vector<double> lambdas{0.0, 0.5, 0.9};

    double mass_fraction = 0.99;

    std::vector<std::size_t> eval_sizes{5, 10, 20, 50};
    std::size_t n_test = 3000;
    bool shared_test_set = false;
    std::vector<std::string> eval_metrics;  ///< empty: defaults for the system

    std::uint64_t seed = 1;
    std::string output_dir = "out";

    Grid grid() const;
    System system() const;
    ICSpec ic(const System& sys) const;
    std::vector<std::string> metrics_or_default() const;
};

/// Parses a config object; unknown keys and out-of-range values raise
/// ConfigError naming the dotted key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Metric names: L2, intrinsic, dense:<lambda>, sensors:<lambda>, atoms:<x1;x2;...>.
MetricSpec metric_from_name(const std::string& name, const ExperimentConfig& cfg, const System& sys);

}  // namespace spml::cli
