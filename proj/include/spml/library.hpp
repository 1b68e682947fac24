#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "spml/dynamics.hpp"
#include "spml/grid.hpp"
#include "spml/initial_conditions.hpp"

namespace spml {

/// Library member: an observed initial state and the attractor it converges to.
struct LabeledState {
    Field u0;
    std::optional<Field> v0;
    int label = 0;
    std::uint64_t seed = 0;  ///< per-draw seed reproducing the random function
    bool augmented = false;  ///< produced by reflection rather than simulation

    friend bool operator==(const LabeledState&, const LabeledState&) = default;
};

struct LibraryStats {
    std::size_t draws = 0;
    std::size_t unconverged = 0;   ///< draws that never matched an attractor
    std::size_t rejected_full = 0; ///< draws landing on an already full attractor

    friend bool operator==(const LibraryStats&, const LibraryStats&) = default;
};

class LabeledLibrary {
public:
    LabeledLibrary(System system, ICSpec ic, std::vector<Attractor> attractors);

    const System& system() const noexcept { return system_; }
    const Grid& grid() const noexcept { return system_grid(system_); }
    const ICSpec& ic() const noexcept { return ic_; }
    std::span<const Attractor> attractors() const noexcept { return attractors_; }
    std::span<const LabeledState> states() const noexcept { return states_; }
    std::size_t size() const noexcept { return states_.size(); }
    bool empty() const noexcept { return states_.empty(); }

    /// Number of states per attractor id (every catalog id present, possibly 0).
    std::map<int, std::size_t> counts() const;

    /// Appends a state; throws if the label is not in the catalog or the grid differs.
    void add(LabeledState state);

    LibraryStats stats;

private:
    System system_;
    ICSpec ic_;
    std::vector<Attractor> attractors_;
    std::vector<LabeledState> states_;
};

/// Values reversed in index order: u(x) -> u(-x) on a symmetric grid.
Field reflect(const Field& u);

/// Label of the reflected copy of each attractor, found by matching the
/// reflected representative against the catalog within tol (L2).
std::map<int, int> reflection_label_map(std::span<const Attractor> attractors, double tol = 0.05);

/// Outcome of simulating one random draw: the observed state (after t0) and its label.
struct DrawOutcome {
    std::vector<double> state;
    std::optional<int> label;
};

/// Thread-safe memo of draw outcomes keyed by draw seed, shared between
/// libraries and test sets built from the same system and catalog.
class DrawCache {
public:
    std::optional<DrawOutcome> find(std::uint64_t seed) const;
    void store(std::uint64_t seed, const DrawOutcome& outcome);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::unordered_map<std::uint64_t, DrawOutcome> entries_;
};

/// Draw, evolve by ic.t0, and label by simulation.
DrawOutcome simulate_draw(const System& sys, std::span<const Attractor> attractors, const ICSpec& ic,
                          std::uint64_t draw_seed, const ClassifyOptions& classify = {});

/// Outcomes for draw indices [first, first + count) of the stream rooted at
/// stream_seed, computed in parallel and returned in index order.
std::vector<DrawOutcome> simulate_draws(const System& sys, std::span<const Attractor> attractors, const ICSpec& ic,
                                        std::uint64_t stream_seed, std::size_t first, std::size_t count,
                                        const ClassifyOptions& classify, unsigned threads, DrawCache* cache = nullptr);

struct LibraryOptions {
    std::size_t n_per_attractor = 20;
    std::uint64_t seed = 1;
    bool augment = true;
    double draw_budget_factor = 100.0;  ///< max draws = factor * n_per_attractor * k
    ClassifyOptions classify{};
    unsigned threads = 0;
    DrawCache* cache = nullptr;
};

/// Builds a library with exactly n_per_attractor states per attractor.
///
/// Draws are taken in index order; a draw is kept while its attractor is not
/// full and, with augmentation, its reflection is added under the mapped label
/// when that attractor still has room. Unconverged draws are discarded.
/// Throws GenerationError naming the starved attractor when the draw budget
/// runs out.
LabeledLibrary build_library(const System& sys, std::span<const Attractor> attractors, const ICSpec& ic,
                             const LibraryOptions& options);

}  // namespace spml
