#include <doctest.h>

#include <cmath>
#include <random>

#include "spml/spml_solver.hpp"
#include "support.hpp"

using namespace spml;

namespace {

struct Synthetic {
    std::vector<Field> states;
    std::vector<int> labels;
};

// k classes of n noisy copies of a random prototype each.
Synthetic synthetic_library(std::mt19937_64& rng, const Grid& g, int k, int n, double noise = 0.3) {
    Synthetic lib;
    std::normal_distribution<double> normal;
    for (int c = 0; c < k; ++c) {
        const auto proto = spml::testing::random_values(rng, g.size());
        for (int i = 0; i < n; ++i) {
            std::vector<double> v(proto);
            for (double& x : v) x += noise * normal(rng);
            lib.states.emplace_back(g, std::move(v));
            lib.labels.push_back(c + 1);
        }
    }
    return lib;
}

PairSums sums_of(const Synthetic& s) { return assemble_pair_sums(s.states, s.labels); }

// Direct double loop over pairs.
std::pair<double, double> double_loop(const Synthetic& s, const Density& phi) {
    double S = 0.0, D = 0.0;
    for (std::size_t i = 0; i < s.states.size(); ++i)
        for (std::size_t j = i + 1; j < s.states.size(); ++j) {
            std::vector<double> diff(phi.size());
            for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = s.states[i][k] - s.states[j][k];
            const double d2 = weighted_norm_sq(Field(phi.grid(), diff), phi);
            (s.labels[i] == s.labels[j] ? S : D) += d2;
        }
    return {S, D};
}

PairSums hand_sums(std::vector<double> s, std::vector<double> d) {
    PairSums ps{Grid(s.size()), std::move(s), std::move(d), 0, 0};
    return ps;
}

double rel_diff(std::span<const double> a, std::span<const double> b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(b[i]));
    }
    return num / den;
}

}  // namespace

TEST_CASE("pair sums: identical states, counts, and the double-loop oracle") {
    const Grid g(51);
    std::mt19937_64 rng(1);
    {
        const Field a = spml::testing::random_field(rng, g);
        const Field b = spml::testing::random_field(rng, g);
        const std::vector<Field> st{a, a, b};
        const std::vector<int> lab{1, 1, 2};
        const PairSums ps = assemble_pair_sums(st, lab);
        for (double s : ps.similar) CHECK(s == 0.0);
        CHECK(ps.similar_pairs == 1);
        CHECK(ps.dissimilar_pairs == 2);
    }
    {
        const Synthetic s = synthetic_library(rng, g, 4, 10);
        const PairSums ps = sums_of(s);
        CHECK(ps.similar_pairs == 180);
        CHECK(ps.dissimilar_pairs == 600);
    }
    for (int trial = 0; trial < 10; ++trial) {
        const Synthetic s = synthetic_library(rng, g, 3, 4 + trial % 3);
        const PairSums ps = sums_of(s);
        const Density phi = spml::testing::random_density(rng, g);
        const auto [S, D] = double_loop(s, phi);
        CHECK(std::abs(ps.similar_sum(phi) - S) <= 1e-10 * std::max(1.0, S));
        CHECK(std::abs(ps.dissimilar_sum(phi) - D) <= 1e-10 * std::max(1.0, D));
        for (std::size_t k = 0; k < g.size(); ++k) {
            CHECK(ps.similar[k] >= 0.0);
            CHECK(ps.dissimilar[k] >= 0.0);
        }
    }
    const std::vector<Field> one_label{Field::constant(g, 0.0), Field::constant(g, 1.0)};
    CHECK_THROWS_AS(assemble_pair_sums(one_label, std::vector<int>{3, 3}), DomainError);
    CHECK_THROWS_AS(assemble_pair_sums(one_label, std::vector<int>{3}), DimensionError);
}

TEST_CASE("pair sums with a second component add its differences") {
    const Grid g(21);
    std::mt19937_64 rng(2);
    const Synthetic u = synthetic_library(rng, g, 2, 3);
    const Synthetic v = synthetic_library(rng, g, 2, 3);
    const PairSums pu = assemble_pair_sums(u.states, u.labels);
    const PairSums pv = assemble_pair_sums(v.states, u.labels);
    const PairSums both = assemble_pair_sums(u.states, u.labels, v.states);
    for (std::size_t k = 0; k < g.size(); ++k) {
        CHECK(both.similar[k] == doctest::Approx(pu.similar[k] + pv.similar[k]).epsilon(1e-12));
        CHECK(both.dissimilar[k] == doctest::Approx(pu.dissimilar[k] + pv.dissimilar[k]).epsilon(1e-12));
    }
}

TEST_CASE("objective examples") {
    const Grid g(51);
    std::mt19937_64 rng(3);
    const PairSums ps = sums_of(synthetic_library(rng, g, 3, 5));
    SPMLParams p;
    p.alpha = 0.7;
    p.lambda = 0.4;
    CHECK(objective(Density::zero(g), ps, p) == 0.0);
    for (int trial = 0; trial < 10; ++trial) {
        const Density phi = spml::testing::random_density(rng, g);
        const double c = std::uniform_real_distribution<double>(0.1, 10)(rng);
        CHECK(objective(phi.scaled(c), ps, p) == doctest::Approx(c * objective(phi, ps, p)).epsilon(1e-12));
        SPMLParams p0 = p;
        p0.alpha = 0.0;
        CHECK(objective(phi, ps, p0) == ps.similar_sum(phi));
    }
    // Hand value: s = 1, q = trapezoid, phi = 1 -> S = 2, ||phi||_1 = 2, ||phi||_2 = sqrt 2.
    const PairSums unit = hand_sums(std::vector<double>(51, 1.0), std::vector<double>(51, 1.0));
    CHECK(objective(Density::uniform(g), unit, p) == doctest::Approx(2.0 + 0.7 * (0.4 * 2.0 + 0.6 * std::sqrt(2.0))));
}

TEST_CASE("analytic LP vertex") {
    const PairSums ps = hand_sums({3, 1, 2}, {1, 1, 1});
    const Density phi = lp_degenerate_solution(ps, 1.0);
    CHECK(phi[0] == 0.0);
    CHECK(phi[1] == 1.0);
    CHECK(phi[2] == 0.0);
    CHECK(ps.dissimilar_sum(phi) == 1.0);

    const PairSums tie = hand_sums({2, 1, 1, 3, 2}, {1, 2, 2, 1, 4});
    const Density t = lp_degenerate_solution(tie, 1.0);
    CHECK(t[1] > 0.0);
    CHECK(active_set_size(t) == 1);
    // Ratios 0.5 at indices 1, 2 and 4: the lowest index wins.
    const Grid g5(5);
    CHECK(t[1] == doctest::Approx(1.0 / (2.0 * g5.weight(1))));

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const PairSums r = sums_of(synthetic_library(rng, Grid(51), 3, 4));
        const double c = std::uniform_real_distribution<double>(0.2, 5)(rng);
        CHECK(r.dissimilar_sum(lp_degenerate_solution(r, c)) == doctest::Approx(c).epsilon(1e-15));
    }
    CHECK_THROWS_AS(lp_degenerate_solution(hand_sums({1, 1, 1}, {0, 0, 0}), 1.0), DomainError);
}

TEST_CASE("KKT residual examples") {
    std::mt19937_64 rng(5);
    const Grid g(51);
    for (int trial = 0; trial < 10; ++trial) {
        const PairSums ps = sums_of(synthetic_library(rng, g, 3, 5));
        SPMLParams p0;
        p0.alpha = 0.0;
        CHECK(kkt_residual(lp_degenerate_solution(ps), ps, p0) < 1e-10);

        SPMLParams p;
        p.alpha = 1.0;
        p.lambda = 0.5;
        const SPMLSolution sol = solve(ps, p);
        CHECK(sol.kkt <= 1e-6);
        CHECK(kkt_residual(sol.phi, ps, p) == sol.kkt);

        std::vector<double> noisy(sol.phi.values().begin(), sol.phi.values().end());
        const double scale = *std::max_element(noisy.begin(), noisy.end());
        for (double& x : noisy) x += 0.05 * scale * std::uniform_real_distribution<double>(0, 1)(rng);
        const Density raw(g, noisy);
        const Density renorm = raw.scaled(1.0 / ps.dissimilar_sum(raw));
        CHECK(kkt_residual(renorm, ps, p) > sol.kkt);
    }
    const PairSums ps = sums_of(synthetic_library(rng, g, 2, 3));
    CHECK_THROWS_AS(kkt_residual(Density::zero(g), ps, SPMLParams{}), DomainError);
}

TEST_CASE("solver properties on random instances") {
    std::mt19937_64 rng(6);
    const Grid g(51);
    for (int trial = 0; trial < 20; ++trial) {
        const PairSums ps = sums_of(synthetic_library(rng, g, 2 + trial % 3, 3 + trial % 4));
        SPMLParams p;
        p.alpha = std::uniform_real_distribution<double>(0.1, 3)(rng);
        p.lambda = std::uniform_real_distribution<double>(0.0, 0.95)(rng);
        const SPMLSolution sol = solve(ps, p);
        CHECK(std::abs(sol.dissimilar - 1.0) <= 1e-8);
        CHECK(sol.kkt <= 1e-6);
        CHECK(sol.objective == doctest::Approx(objective(sol.phi, ps, p)).epsilon(1e-14));

        // Scale equivariance.
        for (double c : {0.5, 2.0, 10.0}) {
            SPMLParams pc = p;
            pc.level = c;
            const SPMLSolution sc = solve(ps, pc);
            std::vector<double> scaled(sol.phi.values().begin(), sol.phi.values().end());
            for (double& x : scaled) x *= c;
            CHECK(rel_diff(sc.phi.values(), scaled) <= 1e-6);
        }

        // Convexity along random feasible chords.
        for (int k = 0; k < 5; ++k) {
            const Density a = spml::testing::random_density(rng, g), b = spml::testing::random_density(rng, g);
            const double t = std::uniform_real_distribution<double>(0, 1)(rng);
            std::vector<double> mix(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) mix[i] = t * a[i] + (1 - t) * b[i];
            CHECK(objective(Density(g, mix), ps, p) <= t * objective(a, ps, p) + (1 - t) * objective(b, ps, p) + 1e-12);
        }

        // Optimality against feasible competitors.
        for (int k = 0; k < 5; ++k) {
            const Density r = spml::testing::random_density(rng, g);
            CHECK(sol.objective <= objective(r.scaled(1.0 / ps.dissimilar_sum(r)), ps, p) + 1e-12);
        }

        // Degenerate LP limit.
        SPMLParams p0 = p;
        p0.alpha = 0.0;
        const SPMLSolution lp = solve(ps, p0);
        CHECK(lp.active_set == 1);
        CHECK(rel_diff(lp.phi.values(), lp_degenerate_solution(ps).values()) <= 1e-10);
        CHECK(std::abs(lp.objective - objective(lp_degenerate_solution(ps), ps, p0)) <= 1e-10);
    }
}

TEST_CASE("elastic-net regularization spreads the support") {
    std::mt19937_64 rng(7);
    const PairSums ps = sums_of(synthetic_library(rng, Grid(51), 3, 6));
    SPMLParams p;
    p.alpha = 5.0;
    p.lambda = 0.0;
    CHECK(solve(ps, p).active_set > 1);
    p.alpha = 0.0;
    CHECK(solve(ps, p).active_set == 1);
}

TEST_CASE("projected gradient agrees with the active-set solver") {
    std::mt19937_64 rng(8);
    const Grid g(51);
    for (int trial = 0; trial < 12; ++trial) {
        const PairSums ps = sums_of(synthetic_library(rng, g, 3, 5));
        SPMLParams p;
        p.alpha = std::uniform_real_distribution<double>(0.2, 3)(rng);
        p.lambda = trial % 3 == 0 ? 0.0 : std::uniform_real_distribution<double>(0.0, 0.9)(rng);
        const SPMLSolution exact = solve(ps, p);
        p.method = SolverMethod::ProjectedGradient;
        const SPMLSolution pg = solve(ps, p);
        CHECK(pg.kkt <= 1e-6);
        CHECK(std::abs(pg.dissimilar - 1.0) <= 1e-8);
        CHECK(pg.objective == doctest::Approx(exact.objective).epsilon(1e-8));
        CHECK(rel_diff(pg.phi.values(), exact.phi.values()) <= 1e-3);
    }
    const PairSums ps = sums_of(synthetic_library(rng, g, 3, 5));
    SPMLParams p;
    p.method = SolverMethod::ProjectedGradient;
    p.max_iterations = 2;
    try {
        solve(ps, p);
        FAIL("expected non-convergence");
    } catch (const NonConvergenceError& e) {
        CHECK(std::abs(e.best().dissimilar - 1.0) <= 1e-8);
        CHECK(e.best().objective > 0.0);
    }
}

TEST_CASE("three-point instances match an exhaustive search of the constraint slice") {
    // Feasible points phi_k = w_k / (d_k q_k) with w on the unit simplex.
    std::mt19937_64 rng(9);
    const Grid g(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = spml::testing::random_values(rng, 3, 0.1, 2.0);
        const auto d = spml::testing::random_values(rng, 3, 0.5, 2.0);
        const PairSums ps = hand_sums(s, d);
        SPMLParams p;
        p.alpha = std::uniform_real_distribution<double>(0.2, 2)(rng);
        p.lambda = std::uniform_real_distribution<double>(0, 0.9)(rng);
        const SPMLSolution sol = solve(ps, p);
        double best = INFINITY;
        const int m = 600;
        for (int i = 0; i <= m; ++i)
            for (int j = 0; i + j <= m; ++j) {
                const double w[3] = {double(i) / m, double(j) / m, double(m - i - j) / m};
                std::vector<double> phi(3);
                for (int k = 0; k < 3; ++k) phi[k] = w[k] / (d[k] * g.weight(k));
                best = std::min(best, objective(Density(g, phi, 0, 0, true), ps, p));
            }
        CHECK(sol.objective <= best + 1e-12);
        CHECK(best - sol.objective <= 1e-3 * best);
    }
}

TEST_CASE("unsquared dissimilarity constraint does not force a single atom") {
    // With the alternative constraint sum_D ||u_i - u_j||_phi >= 1, take two
    // dissimilar pairs differing only at x_0 and only at x_1 respectively, and
    // unit similar coefficients. Minimizing S subject to the constraint reduces,
    // by degree-1/2 homogeneity, to maximizing (sqrt(phi_0) + sqrt(phi_1))^2 on
    // {phi_0 + phi_1 = 1}, whose maximizer phi_0 = phi_1 = 1/2 has two atoms.
    // The squared dissimilar sum on the same data yields a linear program with
    // a single-atom minimizer.
    double best_ratio = INFINITY, best_t = -1.0;
    for (int i = 0; i <= 1000; ++i) {
        const double t = i / 1000.0;
        const double s = t + (1 - t);
        const double dhat = std::sqrt(t) + std::sqrt(1 - t);
        const double ratio = s / (dhat * dhat);
        if (ratio < best_ratio - 1e-15) {
            best_ratio = ratio;
            best_t = t;
        }
    }
    CHECK(best_t == doctest::Approx(0.5));
    const PairSums squared = hand_sums({1.0, 1.01, 5.0}, {1.0, 1.0, 0.0});
    SPMLParams p0;
    p0.alpha = 0.0;
    CHECK(solve(squared, p0).active_set == 1);
}

TEST_CASE("parameter validation") {
    SPMLParams p;
    p.lambda = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.lambda = 0.5;
    p.alpha = -1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.alpha = 1.0;
    p.level = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    CHECK_THROWS_AS(solve(hand_sums({1, 1, 1}, {0, 0, 0}), SPMLParams{}), DomainError);
}
