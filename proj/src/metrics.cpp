#include "spml/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "spml/parallel.hpp"
#include "spml/random.hpp"

namespace spml {

namespace {

std::string number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

}  // namespace

SensorSet::SensorSet(std::vector<double> locations, std::vector<double> weights)
    : locations_(std::move(locations)), weights_(std::move(weights)) {
    if (locations_.empty()) throw DomainError("a sensor set needs at least one location");
    if (weights_.empty()) weights_.assign(locations_.size(), 1.0);
    if (weights_.size() != locations_.size()) throw DimensionError("sensor weights and locations differ in length");
    for (std::size_t j = 0; j < locations_.size(); ++j) {
        if (!std::isfinite(locations_[j])) throw DomainError("sensor location is not finite");
        if (!(weights_[j] > 0.0) || !std::isfinite(weights_[j])) throw DomainError("sensor weights must be positive");
        if (j > 0 && !(locations_[j] > locations_[j - 1]))
            throw DomainError("sensor locations must be strictly increasing");
    }
}

SensorSet SensorSet::symmetric_pair(double x) {
    if (!(x > 0.0)) throw DomainError("symmetric sensor pair needs x > 0");
    return SensorSet({-x, x});
}

SensorSet SensorSet::scaled(double c) const {
    if (!(c > 0.0)) throw DomainError("sensor weights can only be scaled by c > 0");
    std::vector<double> w(weights_);
    for (double& v : w) v *= c;
    return SensorSet(locations_, std::move(w));
}

std::vector<std::size_t> SensorSet::indices(const Grid& grid) const {
    std::vector<std::size_t> idx(locations_.size());
    for (std::size_t j = 0; j < locations_.size(); ++j) {
        const double x = locations_[j];
        const double slack = 1e-6 * grid.spacing();
        if (x < grid.x_min() - slack || x > grid.x_max() + slack)
            throw DomainError("sensor at x=" + number(x) + " lies outside the grid");
        idx[j] = grid.nearest_index(x);
        if (std::abs(grid.x(idx[j]) - x) > slack)
            throw DomainError("sensor at x=" + number(x) + " is not a grid point");
    }
    return idx;
}

Measurement::Measurement(SensorSet s, std::vector<double> v) : sensors(std::move(s)), values(std::move(v)) {
    if (values.size() != sensors.size()) throw DimensionError("measurement value count differs from sensor count");
    for (double x : values)
        if (!std::isfinite(x)) throw DomainError("measurement values must be finite");
}

Measurement measure(const Field& u, const SensorSet& sensors) {
    return Measurement(sensors, project_observation(u, sensors));
}

Metric Metric::dense(Density phi) { return Metric(Dense{std::move(phi)}); }
Metric Metric::atoms(SensorSet sensors) { return Metric(Atoms{std::move(sensors)}); }
Metric Metric::plain_l2() { return Metric(PlainL2{}); }

Metric Metric::intrinsic(Field weight) {
    for (double w : weight.values())
        if (!(w > 0.0)) throw DomainError("intrinsic metric needs a positive weight");
    return Metric(Intrinsic{std::move(weight)});
}

const SensorSet* Metric::sensors() const noexcept {
    const auto* a = std::get_if<Atoms>(&kind_);
    return a ? &a->sensors : nullptr;
}

Metric Metric::scaled(double c) const {
    if (!(c > 0.0)) throw DomainError("metrics can only be scaled by c > 0");
    return std::visit(
        [c](const auto& k) -> Metric {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Dense>) return Metric::dense(k.phi.scaled(c));
            else if constexpr (std::is_same_v<K, Atoms>) return Metric::atoms(k.sensors.scaled(c));
            else if constexpr (std::is_same_v<K, Intrinsic>) {
                std::vector<double> w(k.weight.values().begin(), k.weight.values().end());
                for (double& v : w) v *= c;
                return Metric::intrinsic(Field(k.weight.grid(), std::move(w)));
            } else {
                return Metric(PlainL2{k.scale * c});
            }
        },
        kind_);
}

std::string Metric::describe() const {
    return std::visit(
        [](const auto& k) -> std::string {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Dense>) return "dense";
            else if constexpr (std::is_same_v<K, Atoms>) {
                std::string s = "atoms(";
                for (std::size_t j = 0; j < k.sensors.size(); ++j) {
                    if (j) s += ";";
                    s += number(k.sensors.locations()[j]);
                }
                return s + ")";
            } else if constexpr (std::is_same_v<K, Intrinsic>) return "intrinsic";
            else return "L2";
        },
        kind_);
}

double distance_sq(const Field& a, const Field& b, const Metric& metric) {
    require_same_grid(a.grid(), b.grid(), "distance_sq");
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            const Grid& g = a.grid();
            if constexpr (std::is_same_v<K, Metric::Dense>) {
                require_same_grid(g, k.phi.grid(), "distance_sq");
                double sum = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double d = a[i] - b[i];
                    sum += d * d * k.phi[i] * g.weight(i);
                }
                return sum;
            } else if constexpr (std::is_same_v<K, Metric::Atoms>) {
                const auto idx = k.sensors.indices(g);
                double sum = 0.0;
                for (std::size_t j = 0; j < idx.size(); ++j) {
                    const double d = a[idx[j]] - b[idx[j]];
                    sum += k.sensors.weights()[j] * d * d;
                }
                return sum;
            } else if constexpr (std::is_same_v<K, Metric::Intrinsic>) {
                require_same_grid(g, k.weight.grid(), "distance_sq");
                double sum = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double d = a[i] - b[i];
                    sum += d * d * k.weight[i] * g.weight(i);
                }
                return sum;
            } else {
                return k.scale * l2_distance_sq(a, b);
            }
        },
        metric.kind());
}

namespace {

const SensorSet& require_matching_atoms(const SensorSet& measured, const Metric& metric) {
    const SensorSet* s = metric.sensors();
    if (!s) throw DimensionError("measurements can only be compared under an atom metric");
    if (s->size() != measured.size()) throw DimensionError("measurement sensors differ from the metric's sensors");
    for (std::size_t j = 0; j < s->size(); ++j)
        if (std::abs(s->locations()[j] - measured.locations()[j]) > 1e-9)
            throw DimensionError("measurement sensors differ from the metric's sensors");
    return *s;
}

}  // namespace

double distance_sq(const Measurement& a, const Field& b, const Metric& metric) {
    const SensorSet& s = require_matching_atoms(a.sensors, metric);
    const auto idx = s.indices(b.grid());
    double sum = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const double d = a.values[j] - b[idx[j]];
        sum += s.weights()[j] * d * d;
    }
    return sum;
}

double distance_sq(const Measurement& a, const Measurement& b, const Metric& metric) {
    const SensorSet& s = require_matching_atoms(a.sensors, metric);
    require_matching_atoms(b.sensors, metric);
    double sum = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double d = a.values[j] - b.values[j];
        sum += s.weights()[j] * d * d;
    }
    return sum;
}

SensorSet extract_sensors(const Density& phi, double mass_fraction) {
    if (!(mass_fraction > 0.0 && mass_fraction <= 1.0)) throw DomainError("mass_fraction must lie in (0, 1]");
    if (phi.is_zero()) throw DomainError("cannot extract sensors from a zero density");
    const Grid& g = phi.grid();
    const std::size_t n = g.size();
    std::vector<double> mass(n);
    for (std::size_t k = 0; k < n; ++k) mass[k] = phi[k] * g.weight(k);
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return mass[i] > mass[j]; });
    std::vector<bool> chosen(n, false);
    double captured = 0.0;
    for (std::size_t k : order) {
        if (captured >= mass_fraction * total) break;
        chosen[k] = true;
        captured += mass[k];
    }

    std::vector<double> locations, weights;
    for (std::size_t k = 0; k < n;) {
        if (!chosen[k]) {
            ++k;
            continue;
        }
        double run_mass = 0.0, moment = 0.0, run_phi = 0.0;
        for (; k < n && chosen[k]; ++k) {
            run_mass += mass[k];
            run_phi += phi[k];
            moment += phi[k] * g.x(k);
        }
        const double x = g.x(g.nearest_index(moment / run_phi));
        if (!locations.empty() && x <= locations.back()) {
            weights.back() += run_mass;
            continue;
        }
        locations.push_back(x);
        weights.push_back(run_mass);
    }
    return SensorSet(std::move(locations), std::move(weights));
}

namespace {

template <class DistanceFn>
Prediction nearest(const LabeledLibrary& lib, DistanceFn&& dist) {
    if (lib.empty()) throw DomainError("nearest-neighbor classification needs a nonempty library");
    Prediction best{0, 0, std::numeric_limits<double>::infinity()};
    const auto states = lib.states();
    for (std::size_t i = 0; i < states.size(); ++i) {
        const double d = dist(states[i].u0);
        if (d < best.distance_sq) best = Prediction{states[i].label, i, d};
    }
    return best;
}

}  // namespace

Prediction nearest_neighbor_classify(const Field& query, const LabeledLibrary& lib, const Metric& metric) {
    if (const SensorSet* s = metric.sensors()) {
        // Sample once and compare point values only.
        return nearest_neighbor_classify(measure(query, *s), lib, metric);
    }
    return nearest(lib, [&](const Field& u) { return distance_sq(query, u, metric); });
}

Prediction nearest_neighbor_classify(const Measurement& query, const LabeledLibrary& lib, const Metric& metric) {
    const SensorSet& s = require_matching_atoms(query.sensors, metric);
    const auto idx = s.indices(lib.grid());
    return nearest(lib, [&](const Field& u) {
        double sum = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const double d = query.values[j] - u[idx[j]];
            sum += s.weights()[j] * d * d;
        }
        return sum;
    });
}

std::vector<double> project_observation(const Field& u, const SensorSet& sensors) {
    const auto idx = sensors.indices(u.grid());
    std::vector<double> out(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) out[j] = u[idx[j]];
    return out;
}

std::vector<std::vector<double>> project_trajectory(const System& sys, const Trajectory& traj,
                                                    const SensorSet& sensors) {
    std::vector<std::vector<double>> out;
    out.reserve(traj.states.size());
    for (const auto& state : traj.states) out.push_back(project_observation(observable(sys, state), sensors));
    return out;
}

MetricSpec MetricSpec::fixed(std::string name, Metric metric) { return {std::move(name), Fixed{std::move(metric)}}; }
MetricSpec MetricSpec::learned_dense(std::string name, SPMLParams params) {
    return {std::move(name), LearnedDense{params}};
}
MetricSpec MetricSpec::learned_sensors(std::string name, SPMLParams params, double mass_fraction) {
    return {std::move(name), LearnedSensors{params, mass_fraction}};
}
MetricSpec MetricSpec::custom(std::string name, Predictor predict) {
    if (!predict) throw ConfigError("custom metric '" + name + "' needs a predictor");
    return {std::move(name), Custom{std::move(predict)}};
}

std::string ErrorTable::to_csv() const {
    std::ostringstream out;
    out << "n_labels_per_attractor,metric,error,n_test,seed\n";
    for (const ErrorRow& r : rows) {
        char err[32];
        std::snprintf(err, sizeof err, "%.6f", r.error);
        out << r.n_labels << ',' << r.metric << ',' << err << ',' << r.n_test << ',' << r.seed << '\n';
    }
    return out.str();
}

std::uint64_t library_stream_seed(std::uint64_t seed) { return seed; }

std::uint64_t test_stream_seed(std::uint64_t seed, std::size_t size_index) {
    return derive_seed(derive_seed(seed, 0x7e57'0000'0000'0000ull), size_index);
}

ErrorTable evaluate_error(const System& sys, std::span<const Attractor> attractors, const ICSpec& ic,
                          std::span<const MetricSpec> metrics, const EvaluationOptions& options) {
    if (options.sizes.empty()) throw ConfigError("evaluation.sizes must not be empty");
    if (metrics.empty()) throw ConfigError("evaluation needs at least one metric");
    if (options.n_test == 0) throw ConfigError("evaluation.n_test must be positive");
    const unsigned threads = resolve_threads(options.threads);

    ErrorTable table;
    std::vector<DrawOutcome> shared;
    for (std::size_t si = 0; si < options.sizes.size(); ++si) {
        LibraryOptions lo;
        lo.n_per_attractor = options.sizes[si];
        lo.seed = library_stream_seed(options.seed);
        lo.augment = options.augment;
        lo.draw_budget_factor = options.draw_budget_factor;
        lo.classify = options.classify;
        lo.threads = threads;
        lo.cache = options.cache;
        const LabeledLibrary lib = build_library(sys, attractors, ic, lo);

        if (!options.shared_test_set || si == 0) {
            const std::uint64_t stream = test_stream_seed(options.seed, options.shared_test_set ? 0 : si);
            shared = simulate_draws(sys, attractors, ic, stream, 0, options.n_test, options.classify, threads,
                                    options.cache);
        }
        std::vector<std::size_t> usable;
        for (std::size_t t = 0; t < shared.size(); ++t)
            if (shared[t].label) usable.push_back(t);

        std::optional<PairSums> sums;
        for (const MetricSpec& spec : metrics) {
            std::function<int(const Field&, int)> predict;
            std::optional<Metric> metric;
            if (const auto* f = std::get_if<MetricSpec::Fixed>(&spec.kind)) {
                metric = f->metric;
            } else if (const auto* c = std::get_if<MetricSpec::Custom>(&spec.kind)) {
                predict = [c, &lib](const Field& u, int truth) { return c->predict(u, lib, truth); };
            } else {
                if (!sums) sums = assemble_pair_sums(lib);
                if (const auto* d = std::get_if<MetricSpec::LearnedDense>(&spec.kind)) {
                    metric = Metric::dense(solve(*sums, d->params).phi);
                } else {
                    const auto& s = std::get<MetricSpec::LearnedSensors>(spec.kind);
                    metric = Metric::atoms(extract_sensors(solve(*sums, s.params).phi, s.mass_fraction));
                }
            }
            if (metric) predict = [&](const Field& u, int) { return nearest_neighbor_classify(u, lib, *metric).label; };

            std::vector<char> wrong(usable.size(), 0);
            parallel_for(usable.size(), threads, [&](std::size_t i) {
                const DrawOutcome& o = shared[usable[i]];
                const Field u = observable(sys, o.state);
                wrong[i] = predict(u, *o.label) != *o.label;
            });
            const std::size_t errors = static_cast<std::size_t>(std::count(wrong.begin(), wrong.end(), 1));
            ErrorRow row;
            row.n_labels = options.sizes[si];
            row.metric = spec.name;
            row.n_test = usable.size();
            row.excluded = shared.size() - usable.size();
            row.error = usable.empty() ? 0.0 : static_cast<double>(errors) / static_cast<double>(usable.size());
            row.seed = options.seed;
            table.rows.push_back(row);
        }
    }
    return table;
}

}  // namespace spml
