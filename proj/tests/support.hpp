#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "spml/dynamics.hpp"
#include "spml/grid.hpp"
#include "spml/initial_conditions.hpp"

namespace spml::testing {

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

inline Field random_field(std::mt19937_64& rng, const Grid& g, double lo = -1.0, double hi = 1.0) {
    return Field(g, random_values(rng, g.size(), lo, hi));
}

/// Nonnegative density with roughly a third of its entries exactly zero.
inline Density random_density(std::mt19937_64& rng, const Grid& g) {
    std::vector<double> v = random_values(rng, g.size(), -0.5, 1.0);
    for (double& x : v) x = std::max(x, 0.0);
    v[g.size() / 2] = 1.0;
    return Density(g, std::move(v));
}

/// Weighted reaction-diffusion system and its catalog, discovered once per process.
struct Catalog {
    System system;
    std::vector<Attractor> attractors;
};

inline const Catalog& weighted_rd_catalog(std::size_t n = 201) {
    static std::map<std::size_t, Catalog> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        System sys = RdSystem::weighted(Grid(n));
        DiscoveryReport rep = discover_attractors(sys, ICSpec::for_system(sys), DiscoveryOptions{});
        it = cache.emplace(n, Catalog{std::move(sys), std::move(rep.attractors)}).first;
    }
    return it->second;
}

inline const Catalog& fhn_catalog(std::size_t n = 201) {
    static std::map<std::size_t, Catalog> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        System sys = FhnSystem(Grid(n));
        DiscoveryReport rep = discover_attractors(sys, ICSpec::for_system(sys), DiscoveryOptions{});
        it = cache.emplace(n, Catalog{std::move(sys), std::move(rep.attractors)}).first;
    }
    return it->second;
}

}  // namespace spml::testing
