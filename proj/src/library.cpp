#include "spml/library.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spml/error.hpp"
#include "spml/parallel.hpp"
#include "spml/random.hpp"

namespace spml {

LabeledLibrary::LabeledLibrary(System system, ICSpec ic, std::vector<Attractor> attractors)
    : system_(std::move(system)), ic_(std::move(ic)), attractors_(std::move(attractors)) {
    if (attractors_.empty()) throw DomainError("a labeled library needs a nonempty attractor catalog");
    for (const Attractor& a : attractors_) require_same_grid(a.state.grid(), grid(), "LabeledLibrary");
}

std::map<int, std::size_t> LabeledLibrary::counts() const {
    std::map<int, std::size_t> c;
    for (const Attractor& a : attractors_) c[a.id] = 0;
    for (const LabeledState& s : states_) ++c[s.label];
    return c;
}

void LabeledLibrary::add(LabeledState state) {
    require_same_grid(state.u0.grid(), grid(), "LabeledLibrary::add");
    if (state.v0) require_same_grid(state.v0->grid(), grid(), "LabeledLibrary::add");
    const bool known = std::any_of(attractors_.begin(), attractors_.end(),
                                   [&](const Attractor& a) { return a.id == state.label; });
    if (!known) throw DomainError("label " + std::to_string(state.label) + " is not in the attractor catalog");
    states_.push_back(std::move(state));
}

Field reflect(const Field& u) {
    if (!u.grid().is_symmetric()) throw DomainError("reflection needs a grid symmetric about x = 0");
    std::vector<double> v(u.values().rbegin(), u.values().rend());
    return Field(u.grid(), std::move(v));
}

std::map<int, int> reflection_label_map(std::span<const Attractor> attractors, double tol) {
    std::map<int, int> map;
    for (const Attractor& a : attractors) {
        const auto match = match_attractor(reflect(a.state), attractors, tol);
        if (!match)
            throw GenerationError("reflection of attractor " + std::to_string(a.id) + " matches no catalog entry");
        map[a.id] = *match;
    }
    return map;
}

std::optional<DrawOutcome> DrawCache::find(std::uint64_t seed) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(seed);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void DrawCache::store(std::uint64_t seed, const DrawOutcome& outcome) {
    std::lock_guard lock(mutex_);
    entries_.emplace(seed, outcome);
}

std::size_t DrawCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

DrawOutcome simulate_draw(const System& sys, std::span<const Attractor> attractors, const ICSpec& ic,
                          std::uint64_t draw_seed, const ClassifyOptions& classify) {
    DrawOutcome out;
    out.state = evolved_initial_state(sys, ic, draw_seed, classify.integrator);
    out.label = classify_attractor(sys, out.state, attractors, classify);
    return out;
}

std::vector<DrawOutcome> simulate_draws(const System& sys, std::span<const Attractor> attractors, const ICSpec& ic,
                                        std::uint64_t stream_seed, std::size_t first, std::size_t count,
                                        const ClassifyOptions& classify, unsigned threads, DrawCache* cache) {
    std::vector<DrawOutcome> outcomes(count);
    parallel_for(count, threads, [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(stream_seed, first + i);
        if (cache) {
            if (auto hit = cache->find(seed)) {
                outcomes[i] = std::move(*hit);
                return;
            }
        }
        outcomes[i] = simulate_draw(sys, attractors, ic, seed, classify);
        if (cache) cache->store(seed, outcomes[i]);
    });
    return outcomes;
}

LabeledLibrary build_library(const System& sys, std::span<const Attractor> attractors, const ICSpec& ic,
                             const LibraryOptions& options) {
    if (options.n_per_attractor < 1) throw ConfigError("library.n_per_attractor must be at least 1");
    if (!(options.draw_budget_factor > 0.0)) throw ConfigError("library draw budget factor must be positive");
    LabeledLibrary lib(sys, ic, std::vector<Attractor>(attractors.begin(), attractors.end()));
    const std::map<int, int> mirror =
        options.augment ? reflection_label_map(attractors) : std::map<int, int>{};

    const std::size_t target = options.n_per_attractor;
    const auto budget = static_cast<std::size_t>(
        std::ceil(options.draw_budget_factor * static_cast<double>(target * attractors.size())));
    std::map<int, std::size_t> counts = lib.counts();
    auto complete = [&] {
        return std::all_of(counts.begin(), counts.end(), [&](const auto& kv) { return kv.second >= target; });
    };

    const std::size_t batch = std::max<std::size_t>(1, resolve_threads(options.threads));
    std::size_t next = 0;
    while (!complete()) {
        if (next >= budget) {
            for (const auto& [id, n] : counts)
                if (n < target)
                    throw GenerationError("draw budget of " + std::to_string(budget) + " exhausted with attractor " +
                                          std::to_string(id) + " at " + std::to_string(n) + "/" +
                                          std::to_string(target) + " states");
        }
        const std::size_t count = std::min(batch, budget - next);
        std::vector<DrawOutcome> outcomes =
            simulate_draws(sys, attractors, ic, options.seed, next, count, options.classify, options.threads, options.cache);
        for (std::size_t i = 0; i < count && !complete(); ++i) {
            const std::uint64_t seed = derive_seed(options.seed, next + i);
            DrawOutcome& o = outcomes[i];
            ++lib.stats.draws;
            if (!o.label) {
                ++lib.stats.unconverged;
                continue;
            }
            const int label = *o.label;
            if (counts[label] >= target) {
                ++lib.stats.rejected_full;
                continue;
            }
            Field u = observable(sys, o.state);
            std::optional<Field> v = hidden_component(sys, o.state);
            lib.add(LabeledState{u, v, label, seed, false});
            ++counts[label];
            if (options.augment) {
                const int mirrored = mirror.at(label);
                if (counts[mirrored] < target) {
                    const std::vector<double> r = reflect_state(sys, o.state);
                    lib.add(LabeledState{observable(sys, r), hidden_component(sys, r), mirrored, seed, true});
                    ++counts[mirrored];
                }
            }
        }
        next += count;
    }
    return lib;
}

}  // namespace spml
