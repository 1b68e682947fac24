#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spml/dynamics.hpp"
#include "spml/grid.hpp"
#include "spml/library.hpp"
#include "spml/spml_solver.hpp"

namespace spml {

/// Sparse measurement locations with positive atom weights. Locations are
/// strictly increasing; they are checked against a grid when sampled.
class SensorSet {
public:
    SensorSet(std::vector<double> locations, std::vector<double> weights = {});

    /// Sensors at -x and +x with unit weights.
    static SensorSet symmetric_pair(double x);

    std::span<const double> locations() const noexcept { return locations_; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return locations_.size(); }
    SensorSet scaled(double c) const;

    /// Grid index of each sensor; throws DomainError when a location is not a
    /// grid point (within 1e-6 dx) or lies outside the grid.
    std::vector<std::size_t> indices(const Grid& grid) const;

    friend bool operator==(const SensorSet&, const SensorSet&) = default;

private:
    std::vector<double> locations_;
    std::vector<double> weights_;
};

/// Values sampled at a sensor set.
struct Measurement {
    SensorSet sensors;
    std::vector<double> values;

    Measurement(SensorSet s, std::vector<double> v);
};

Measurement measure(const Field& u, const SensorSet& sensors);

class Metric {
public:
    struct Dense { Density phi; };
    struct Atoms { SensorSet sensors; };
    struct Intrinsic { Field weight; };
    struct PlainL2 { double scale = 1.0; };

    static Metric dense(Density phi);
    static Metric atoms(SensorSet sensors);
    static Metric intrinsic(Field weight);
    static Metric plain_l2();

    bool is_atoms() const noexcept { return std::holds_alternative<Atoms>(kind_); }
    const SensorSet* sensors() const noexcept;
    /// Dense density or atom weights multiplied by c > 0.
    Metric scaled(double c) const;
    std::string describe() const;

    const std::variant<Dense, Atoms, Intrinsic, PlainL2>& kind() const noexcept { return kind_; }

private:
    explicit Metric(std::variant<Dense, Atoms, Intrinsic, PlainL2> k) : kind_(std::move(k)) {}
    std::variant<Dense, Atoms, Intrinsic, PlainL2> kind_;
};

double distance_sq(const Field& a, const Field& b, const Metric& metric);
/// Atom metrics only; the measurement's sensors must equal the metric's.
double distance_sq(const Measurement& a, const Field& b, const Metric& metric);
double distance_sq(const Measurement& a, const Measurement& b, const Metric& metric);

/// Sensor locations from a learned density: the smallest set of grid points
/// (by phi_k q_k, descending) holding mass_fraction of the mass, with
/// contiguous runs merged at their phi-weighted centroid.
SensorSet extract_sensors(const Density& phi, double mass_fraction = 0.99);

struct Prediction {
    int label = 0;
    std::size_t index = 0;  ///< library index of the nearest state
    double distance_sq = 0.0;
};

/// Nearest library state under the metric; ties go to the lowest index.
Prediction nearest_neighbor_classify(const Field& query, const LabeledLibrary& lib, const Metric& metric);
Prediction nearest_neighbor_classify(const Measurement& query, const LabeledLibrary& lib, const Metric& metric);

/// Sampled values at the sensors, in sensor order.
std::vector<double> project_observation(const Field& u, const SensorSet& sensors);
/// One projected point per trajectory sample.
std::vector<std::vector<double>> project_trajectory(const System& sys, const Trajectory& traj,
                                                    const SensorSet& sensors);

/// A metric entry of an evaluation run.
struct MetricSpec {
    /// Predictor given full access to the query, the library and the simulated
    /// label (for reference or oracle predictors).
    using Predictor = std::function<int(const Field& query, const LabeledLibrary& lib, int truth)>;
    struct Fixed { Metric metric; };
    struct LearnedDense { SPMLParams params; };
    struct LearnedSensors { SPMLParams params; double mass_fraction = 0.99; };
    struct Custom { Predictor predict; };

    std::string name;
    std::variant<Fixed, LearnedDense, LearnedSensors, Custom> kind;

    static MetricSpec fixed(std::string name, Metric metric);
    static MetricSpec learned_dense(std::string name, SPMLParams params);
    static MetricSpec learned_sensors(std::string name, SPMLParams params, double mass_fraction = 0.99);
    static MetricSpec custom(std::string name, Predictor predict);
};

struct EvaluationOptions {
    std::vector<std::size_t> sizes{5, 10, 20, 50};
    std::size_t n_test = 3000;
    std::uint64_t seed = 1;
    bool augment = true;
    /// Reuse one test set for every library size instead of drawing a fresh
    /// one per size.
    bool shared_test_set = false;
    double draw_budget_factor = 100.0;
    ClassifyOptions classify{};
    unsigned threads = 0;
    DrawCache* cache = nullptr;
};

struct ErrorRow {
    std::size_t n_labels = 0;
    std::string metric;
    double error = 0.0;
    std::size_t n_test = 0;    ///< converged test states classified
    std::size_t excluded = 0;  ///< unconverged test states left out
    std::uint64_t seed = 0;
};

struct ErrorTable {
    std::vector<ErrorRow> rows;

    /// header n_labels_per_attractor,metric,error,n_test,seed
    std::string to_csv() const;
};

/// Stream seeds used by evaluate_error: libraries of every size draw from one
/// stream (so smaller libraries are prefixes of larger ones), test sets from
/// their own streams.
std::uint64_t library_stream_seed(std::uint64_t seed);
std::uint64_t test_stream_seed(std::uint64_t seed, std::size_t size_index);

/// Classification error per (library size, metric) against simulated labels.
ErrorTable evaluate_error(const System& sys, std::span<const Attractor> attractors, const ICSpec& ic,
                          std::span<const MetricSpec> metrics, const EvaluationOptions& options);

}  // namespace spml
