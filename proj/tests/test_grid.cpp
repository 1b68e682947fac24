#include <doctest.h>

#include <cmath>
#include <random>

#include "spml/dynamics.hpp"
#include "spml/error.hpp"
#include "spml/grid.hpp"
#include "support.hpp"

using namespace spml;
using spml::testing::random_density;
using spml::testing::random_field;

namespace {

// Closed form of the integral of the tanh-step weight over [-1, 1]:
// int a tanh((x - x0)/eps) dx = a eps log cosh((x - x0)/eps), and the mirrored
// term integrates to the same value.
double exact_weight_integral(const TanhWeight& p) {
    auto log_cosh = [](double z) {
        const double a = std::abs(z);
        return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
    };
    const double one = p.a * p.epsilon * (log_cosh((1.0 - p.x0) / p.epsilon) - log_cosh((-1.0 - p.x0) / p.epsilon));
    return 2.0 + 2.0 * one;
}

}  // namespace

TEST_CASE("grid spacing, coordinates and trapezoid weights") {
    const Grid g(201);
    CHECK(g.spacing() == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(g.x(0) == -1.0);
    CHECK(g.x(200) == 1.0);
    CHECK(g.x(100) == 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(g.x(k) == -g.x(g.size() - 1 - k));
    double sum = 0.0;
    for (double q : g.quadrature_weights()) sum += q;
    CHECK(std::abs(sum - 2.0) < 1e-12);
    CHECK(g.weight(0) == doctest::Approx(0.005));
    CHECK(g.weight(1) == doctest::Approx(0.01));
    CHECK(g.nearest_index(0.72) == 172);
    CHECK(g.nearest_index(5.0) == 200);

    CHECK_THROWS_AS(Grid(2), DomainError);
    CHECK_THROWS_AS(Grid(11, 1.0, 1.0), DomainError);
}

TEST_CASE("trapezoid is exact for affine integrands") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const double lo = std::uniform_real_distribution<double>(-3, 0)(rng);
        const double hi = lo + std::uniform_real_distribution<double>(0.5, 4)(rng);
        const Grid g(37, lo, hi);
        const double a = std::normal_distribution<double>()(rng), b = std::normal_distribution<double>()(rng);
        const Field f = Field::from_function(g, [&](double x) { return a + b * x; });
        const double exact = a * (hi - lo) + 0.5 * b * (hi * hi - lo * lo);
        CHECK(std::abs(integrate(g, f.values()) - exact) < 1e-12);
    }
}

TEST_CASE("fields and densities validate their contents") {
    const Grid g(11);
    CHECK_THROWS_AS(Field(g, std::vector<double>(10, 0.0)), DimensionError);
    std::vector<double> bad(11, 0.0);
    bad[3] = NAN;
    CHECK_THROWS_AS(Field(g, bad), DomainError);
    std::vector<double> neg(11, 1.0);
    neg[2] = -1e-3;
    CHECK_THROWS_AS(Density(g, neg), DomainError);
    CHECK_THROWS_AS(Density(g, std::vector<double>(11, 0.0)), DomainError);
    CHECK(Density::zero(g).is_zero());
    const Density d(g, std::vector<double>(11, 2.0), 1.0, 0.5);
    CHECK(d.alpha() == 1.0);
    CHECK(d.lambda() == 0.5);
    CHECK(d.max_normalized()[4] == 1.0);
    CHECK(d.scaled(3.0)[0] == 6.0);
}

TEST_CASE("weighted inner product examples") {
    const Grid g(201);
    const Field one = Field::constant(g, 1.0);
    CHECK(weighted_inner_product(one, one, Density::uniform(g)) == doctest::Approx(2.0).epsilon(1e-14));

    const TanhWeight p{};
    const Field w = tanh_weight(g, p);
    const double exact = exact_weight_integral(p);
    CHECK(exact == doctest::Approx(1.4).epsilon(1e-9));
    const Density phi(g, std::vector<double>(w.values().begin(), w.values().end()));
    CHECK(std::abs(weighted_inner_product(one, one, phi) - exact) < 1e-4);

    std::mt19937_64 rng(3);
    const Field u = random_field(rng, g);
    CHECK(weighted_inner_product(u, u, Density::zero(g)) == 0.0);

    CHECK_THROWS_AS(weighted_inner_product(u, Field::constant(Grid(101), 1.0), Density::uniform(g)), DimensionError);
}

TEST_CASE("weighted norm matches a naive loop and the norm axioms") {
    std::mt19937_64 rng(11);
    const Grid g(51);
    CHECK(weighted_norm_sq(Field::constant(g, 0.0), random_density(rng, g)) == 0.0);
    CHECK(weighted_norm_sq(Field::constant(g, 1.0), Density::uniform(g)) == doctest::Approx(2.0));
    for (int trial = 0; trial < 50; ++trial) {
        const Field u = random_field(rng, g), v = random_field(rng, g), z = random_field(rng, g);
        const Density phi = random_density(rng, g);
        double naive = 0.0;
        const double dx = 2.0 / 50.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double q = (k == 0 || k == g.size() - 1) ? dx / 2 : dx;
            naive += u[k] * u[k] * phi[k] * q;
        }
        CHECK(std::abs(weighted_norm_sq(u, phi) - naive) < 1e-12);
        CHECK(weighted_norm_sq(u, phi) >= 0.0);

        const double c = std::uniform_real_distribution<double>(-5, 5)(rng);
        std::vector<double> cu(u.values().begin(), u.values().end());
        for (double& x : cu) x *= c;
        CHECK(std::sqrt(weighted_norm_sq(Field(g, cu), phi)) ==
              doctest::Approx(std::abs(c) * std::sqrt(weighted_norm_sq(u, phi))).epsilon(1e-12));

        // ||u - z|| <= ||u - v|| + ||v - z||
        auto dist = [&](const Field& a, const Field& b) {
            std::vector<double> d(g.size());
            for (std::size_t k = 0; k < g.size(); ++k) d[k] = a[k] - b[k];
            return std::sqrt(weighted_norm_sq(Field(g, d), phi));
        };
        CHECK(dist(u, z) <= dist(u, v) + dist(v, z) + 1e-12);
    }
}

TEST_CASE("intrinsic norm") {
    const Grid g(201);
    std::mt19937_64 rng(5);
    const Field u = random_field(rng, g);
    CHECK(intrinsic_norm_sq(u, Field::constant(g, 1.0)) ==
          doctest::Approx(l2_distance_sq(u, Field::constant(g, 0.0))).epsilon(1e-14));
    const Field w = tanh_weight(g, TanhWeight{});
    CHECK(std::abs(intrinsic_norm_sq(Field::constant(g, 1.0), w) - exact_weight_integral(TanhWeight{})) < 1e-4);
    CHECK(intrinsic_norm_sq(Field::constant(g, 0.0), w) == 0.0);
    std::vector<double> bad(w.values().begin(), w.values().end());
    bad[10] = 0.0;
    CHECK_THROWS_AS(intrinsic_norm_sq(u, Field(g, bad)), DomainError);
}

TEST_CASE("energy functional") {
    const Grid g(201);
    const Field w = tanh_weight(g, TanhWeight{});
    const auto F = &RdSystem::reaction_antiderivative;
    CHECK(F(0.0) == 0.0);
    CHECK(F(1.0) == 0.0);
    // F' = f symbolically: check by central differences at a few points.
    for (double u : {-0.3, 0.2, 0.5, 0.8, 1.4}) {
        const double h = 1e-5;
        CHECK((F(u + h) - F(u - h)) / (2 * h) == doctest::Approx(RdSystem::reaction(u)).epsilon(1e-8));
    }
    CHECK(energy_functional(Field::constant(g, 0.0), w, 1e-2, F) == 0.0);
    CHECK(std::abs(energy_functional(Field::constant(g, 1.0), w, 1e-2, F)) < 1e-15);

    // Gradient part: u = x on w == 1 gives (nu/2) * 2 exactly (stencils are exact for affine u).
    const Field lin = Field::from_function(g, [](double x) { return x; });
    const auto zeroF = [](double) { return 0.0; };
    CHECK(energy_functional(lin, Field::constant(g, 1.0), 0.5, zeroF) == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(energy_functional(lin, w, 0.0, F), DomainError);
    std::vector<double> bad(w.values().begin(), w.values().end());
    bad[0] = -1.0;
    CHECK_THROWS_AS(energy_functional(lin, Field(g, bad), 1e-2, F), DomainError);
}

TEST_CASE("derivative stencils") {
    const Grid g(201);
    const Field quad = Field::from_function(g, [](double x) { return 3 * x * x - x + 2; });
    const auto d = derivative(quad);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(d[k] == doctest::Approx(6 * g.x(k) - 1).epsilon(1e-10));
    // A Neumann-compatible profile has vanishing boundary slope up to O(dx^2).
    const Field c = Field::from_function(g, [](double x) { return std::cos(M_PI * x); });
    const auto dc = derivative(c);
    CHECK(std::abs(dc.front()) < 2e-3);
    CHECK(std::abs(dc.back()) < 2e-3);
}
