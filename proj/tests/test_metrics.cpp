#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "spml/error.hpp"
#include "spml/metrics.hpp"
#include "support.hpp"

using namespace spml;

namespace {

// Library of random fields with labels 1..k, attached to a placeholder catalog.
LabeledLibrary random_library(std::mt19937_64& rng, const Grid& g, int k, int n) {
    std::vector<Attractor> cat;
    for (int c = 1; c <= k; ++c) cat.push_back({c, Field::constant(g, double(c)), "placeholder"});
    LabeledLibrary lib(RdSystem::weighted(g), ICSpec::reaction_diffusion(), cat);
    for (int i = 0; i < n; ++i)
        lib.add({spml::testing::random_field(rng, g), std::nullopt, 1 + i % k, std::uint64_t(i), false});
    return lib;
}

// Direct quadrature of each metric.
double naive_distance(const Field& a, const Field& b, const Metric& m) {
    const Grid& g = a.grid();
    double sum = 0.0;
    if (const auto* d = std::get_if<Metric::Dense>(&m.kind())) {
        for (std::size_t k = 0; k < g.size(); ++k) sum += g.weight(k) * d->phi[k] * std::pow(a[k] - b[k], 2);
    } else if (const auto* s = std::get_if<Metric::Atoms>(&m.kind())) {
        for (std::size_t i = 0; i < s->sensors.size(); ++i) {
            const std::size_t k = g.nearest_index(s->sensors.locations()[i]);
            sum += s->sensors.weights()[i] * std::pow(a[k] - b[k], 2);
        }
    } else if (const auto* w = std::get_if<Metric::Intrinsic>(&m.kind())) {
        for (std::size_t k = 0; k < g.size(); ++k) sum += g.weight(k) * w->weight[k] * std::pow(a[k] - b[k], 2);
    } else {
        const double c = std::get<Metric::PlainL2>(m.kind()).scale;
        for (std::size_t k = 0; k < g.size(); ++k) sum += c * g.weight(k) * std::pow(a[k] - b[k], 2);
    }
    return sum;
}

std::vector<Metric> sample_metrics(std::mt19937_64& rng, const Grid& g) {
    return {Metric::plain_l2(), Metric::intrinsic(RdSystem::weighted(g).weight()),
            Metric::dense(spml::testing::random_density(rng, g)), Metric::atoms(SensorSet::symmetric_pair(0.72)),
            Metric::atoms(SensorSet({-0.4, 0.0, 0.96}, {0.5, 2.0, 1.0}))};
}

}  // namespace

TEST_CASE("sensor sets validate their locations") {
    CHECK_THROWS_AS(SensorSet({}), DomainError);
    CHECK_THROWS_AS(SensorSet({0.2, 0.1}), DomainError);
    CHECK_THROWS_AS(SensorSet({0.1, 0.1}), DomainError);
    CHECK_THROWS_AS(SensorSet({0.1, 0.2}, {1.0}), DimensionError);
    CHECK_THROWS_AS(SensorSet({0.1}, {0.0}), DomainError);
    const SensorSet pair = SensorSet::symmetric_pair(0.72);
    CHECK(pair.locations()[0] == -0.72);
    CHECK(pair.locations()[1] == 0.72);
    CHECK(pair.weights()[0] == 1.0);
    const Grid g(201);
    const auto idx = pair.indices(g);
    CHECK(idx[0] == 28);
    CHECK(idx[1] == 172);
    CHECK_THROWS_AS(SensorSet({0.725}).indices(g), DomainError);
    CHECK_THROWS_AS(SensorSet({1.5}).indices(g), DomainError);
}

TEST_CASE("distance examples") {
    const Grid g(201);
    const Field one = Field::constant(g, 1.0), zero = Field::constant(g, 0.0);
    const Metric atoms = Metric::atoms(SensorSet::symmetric_pair(0.72));
    CHECK(distance_sq(one, one, atoms) == 0.0);
    CHECK(distance_sq(one, zero, atoms) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(distance_sq(one, zero, Metric::plain_l2()) == doctest::Approx(2.0).epsilon(1e-14));

    const Metric center = Metric::atoms(SensorSet({0.0}));
    CHECK(distance_sq(Field::constant(g, 0.3), Field::constant(g, 0.1), center) == doctest::Approx(0.04).epsilon(1e-12));

    const Measurement m = measure(one, atoms.sensors() ? *atoms.sensors() : SensorSet({0.0}));
    CHECK(distance_sq(m, zero, atoms) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(distance_sq(m, measure(zero, *atoms.sensors()), atoms) == doctest::Approx(2.0).epsilon(1e-14));

    CHECK_THROWS_AS(distance_sq(m, zero, Metric::plain_l2()), DimensionError);
    CHECK_THROWS_AS(distance_sq(m, zero, Metric::atoms(SensorSet({0.0}))), DimensionError);
    CHECK_THROWS_AS(distance_sq(one, Field::constant(Grid(51), 0.0), atoms), DimensionError);
    CHECK_THROWS_AS(Metric::intrinsic(zero), DomainError);
}

TEST_CASE("distances match direct quadrature and are pseudo-metrics") {
    std::mt19937_64 rng(11);
    const Grid g(201);
    for (const Metric& m : sample_metrics(rng, g)) {
        for (int trial = 0; trial < 20; ++trial) {
            const Field a = spml::testing::random_field(rng, g);
            const Field b = spml::testing::random_field(rng, g);
            const Field c = spml::testing::random_field(rng, g);
            const double ab = distance_sq(a, b, m);
            CHECK(ab == doctest::Approx(naive_distance(a, b, m)).epsilon(1e-12));
            CHECK(ab == distance_sq(b, a, m));
            CHECK(ab >= 0.0);
            CHECK(distance_sq(a, a, m) == 0.0);
            CHECK(std::sqrt(ab) <= std::sqrt(distance_sq(a, c, m)) + std::sqrt(distance_sq(c, b, m)) + 1e-12);
            CHECK(distance_sq(a, b, m.scaled(3.0)) == doctest::Approx(3.0 * ab).epsilon(1e-12));
        }
    }
}

TEST_CASE("sensor extraction") {
    const Grid g(201);
    std::vector<double> spike(g.size(), 0.0);
    spike[100] = 5.0;
    const SensorSet one = extract_sensors(Density(g, spike));
    REQUIRE(one.size() == 1);
    CHECK(one.locations()[0] == doctest::Approx(0.0).epsilon(1e-12));

    // Two separated bumps give two sensors at their centroids.
    std::vector<double> bumps(g.size(), 0.0);
    for (int d = -2; d <= 2; ++d) {
        bumps[28 + d] = 3.0 - std::abs(d);
        bumps[172 + d] = 3.0 - std::abs(d);
    }
    const SensorSet two = extract_sensors(Density(g, bumps), 0.999);
    REQUIRE(two.size() == 2);
    CHECK(two.locations()[0] == doctest::Approx(-0.72).epsilon(1e-12));
    CHECK(two.locations()[1] == doctest::Approx(0.72).epsilon(1e-12));
    CHECK(two.weights()[0] == doctest::Approx(two.weights()[1]).epsilon(1e-12));

    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const Density phi = spml::testing::random_density(rng, g);
        for (double mf : {0.5, 0.9, 0.99}) {
            const SensorSet s = extract_sensors(phi, mf);
            const SensorSet t = extract_sensors(phi.scaled(7.5), mf);
            CHECK(s.locations().size() == t.locations().size());
            for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.locations()[i] == t.locations()[i]);
            CHECK_NOTHROW(s.indices(g));
        }
    }
    CHECK_THROWS_AS(extract_sensors(Density::zero(g)), DomainError);
    CHECK_THROWS_AS(extract_sensors(Density::uniform(g), 0.0), DomainError);
    CHECK_THROWS_AS(extract_sensors(Density::uniform(g), 1.5), DomainError);
}

TEST_CASE("nearest-neighbor classification") {
    std::mt19937_64 rng(13);
    const Grid g(51);
    const LabeledLibrary lib = random_library(rng, g, 3, 30);
    for (const Metric& m : sample_metrics(rng, g)) {
        // Exact library members return themselves.
        for (std::size_t i = 0; i < lib.size(); i += 7) {
            const Prediction p = nearest_neighbor_classify(lib.states()[i].u0, lib, m);
            CHECK(p.distance_sq == 0.0);
            CHECK(p.label == lib.states()[i].label);
        }
        for (int trial = 0; trial < 20; ++trial) {
            const Field q = spml::testing::random_field(rng, g);
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t i = 0; i < lib.size(); ++i) {
                const double d = naive_distance(q, lib.states()[i].u0, m);
                if (d < best) {
                    best = d;
                    arg = i;
                }
            }
            const Prediction p = nearest_neighbor_classify(q, lib, m);
            CHECK(p.index == arg);
            CHECK(p.label == lib.states()[arg].label);
            CHECK(nearest_neighbor_classify(q, lib, m.scaled(4.0)).index == p.index);
            if (const SensorSet* s = m.sensors()) {
                const Prediction pm = nearest_neighbor_classify(measure(q, *s), lib, m);
                CHECK(pm.index == p.index);
                CHECK(pm.distance_sq == doctest::Approx(p.distance_sq).epsilon(1e-14));
            }
        }
    }
    // Ties resolve to the lowest index.
    std::vector<Attractor> cat{{1, Field::constant(g, 0.0), ""}, {2, Field::constant(g, 1.0), ""}};
    LabeledLibrary tie(RdSystem::weighted(g), ICSpec::reaction_diffusion(), cat);
    tie.add({Field::constant(g, 1.0), std::nullopt, 2, 0, false});
    tie.add({Field::constant(g, -1.0), std::nullopt, 1, 1, false});
    const Prediction p = nearest_neighbor_classify(Field::constant(g, 0.0), tie, Metric::plain_l2());
    CHECK(p.index == 0);
    CHECK(p.label == 2);

    LabeledLibrary empty(RdSystem::weighted(g), ICSpec::reaction_diffusion(), cat);
    CHECK_THROWS_AS(nearest_neighbor_classify(Field::constant(g, 0.0), empty, Metric::plain_l2()), DomainError);
}

TEST_CASE("two-sensor projection of constants and attractors") {
    const Grid g(201);
    const SensorSet s = SensorSet::symmetric_pair(0.72);
    auto p = project_observation(Field::constant(g, 1.0), s);
    CHECK(p == std::vector<double>{1.0, 1.0});
    p = project_observation(Field::constant(g, 0.0), s);
    CHECK(p == std::vector<double>{0.0, 0.0});

    const auto& cat = spml::testing::weighted_rd_catalog();
    REQUIRE(cat.attractors.size() == 4);
    const std::vector<std::vector<double>> corners{{0, 0}, {1, 1}, {1, 0}, {0, 1}};
    for (std::size_t i = 0; i < 4; ++i) {
        const auto q = project_observation(cat.attractors[i].state, s);
        CHECK(std::abs(q[0] - corners[i][0]) <= 0.05);
        CHECK(std::abs(q[1] - corners[i][1]) <= 0.05);
    }

    // Trajectory projection: one point per sample, last one near an attractor corner.
    const System& sys = cat.system;
    IntegratorConfig cfg;
    cfg.t_end = 100.0;
    std::vector<double> samples;
    for (int i = 0; i <= 10; ++i) samples.push_back(10.0 * i);
    const RandomIC ic = generate_random_ic(ICSpec::reaction_diffusion(), g, 5);
    const Trajectory traj = integrate(sys, make_state(sys, ic.u), cfg, samples);
    const auto proj = project_trajectory(sys, traj, s);
    REQUIRE(proj.size() == samples.size());
    for (std::size_t i = 0; i < proj.size(); ++i) {
        CHECK(proj[i] == project_observation(observable(sys, traj.states[i]), s));
    }
}

TEST_CASE("evaluation with an oracle predictor has zero error") {
    const auto& cat = spml::testing::weighted_rd_catalog(51);
    const ICSpec ic = ICSpec::for_system(cat.system);
    EvaluationOptions opts;
    opts.sizes = {2, 4};
    opts.n_test = 40;
    opts.seed = 3;
    DrawCache cache;
    opts.cache = &cache;
    const std::vector<MetricSpec> metrics{
        MetricSpec::custom("oracle", [](const Field&, const LabeledLibrary&, int truth) { return truth; }),
        MetricSpec::custom("never", [](const Field&, const LabeledLibrary&, int) { return -1; }),
        MetricSpec::fixed("L2", Metric::plain_l2()),
        MetricSpec::learned_dense("dense", SPMLParams{}),
        MetricSpec::learned_sensors("sensors", SPMLParams{}, 0.9),
    };
    const ErrorTable t = evaluate_error(cat.system, cat.attractors, ic, metrics, opts);
    REQUIRE(t.rows.size() == 10);
    for (const ErrorRow& r : t.rows) {
        CHECK(r.n_test + r.excluded == 40);
        CHECK(r.error >= 0.0);
        CHECK(r.error <= 1.0);
        CHECK(r.seed == 3);
        if (r.metric == "oracle") CHECK(r.error == 0.0);
        if (r.metric == "never") CHECK(r.error == 1.0);
    }
    const std::string csv = t.to_csv();
    CHECK(csv.rfind("n_labels_per_attractor,metric,error,n_test,seed\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);

    // Reproducible, with and without the cache.
    EvaluationOptions again = opts;
    again.cache = nullptr;
    again.threads = 1;
    CHECK(evaluate_error(cat.system, cat.attractors, ic, metrics, again).to_csv() == csv);

    CHECK(test_stream_seed(3, 0) != test_stream_seed(3, 1));
    CHECK(test_stream_seed(3, 0) != library_stream_seed(3));
}
