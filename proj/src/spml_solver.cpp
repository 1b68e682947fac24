#include "spml/spml_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "spml/library.hpp"

namespace spml {

namespace {

double weighted_sum(const Grid& g, std::span<const double> coeff, const Density& phi) {
    require_same_grid(g, phi.grid(), "pair sums");
    double sum = 0.0;
    for (std::size_t k = 0; k < coeff.size(); ++k) sum += coeff[k] * phi[k] * g.weight(k);
    return sum;
}

void require_nonzero_dissimilar(const PairSums& ps) {
    if (std::none_of(ps.dissimilar.begin(), ps.dissimilar.end(), [](double d) { return d > 0.0; }))
        throw DomainError("dissimilar sums vanish identically; the constraint D(phi) >= c is infeasible");
}

struct Gradient {
    std::vector<double> values;
    double l2 = 0.0;
};

// Gradient of J at phi (phi >= 0, nonzero when the L2 term is active).
Gradient objective_gradient(std::span<const double> phi, const PairSums& ps, const SPMLParams& p) {
    const Grid& g = ps.grid;
    double l2_sq = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) l2_sq += phi[k] * phi[k] * g.weight(k);
    Gradient grad{std::vector<double>(phi.size()), std::sqrt(l2_sq)};
    const double ridge = p.alpha * (1.0 - p.lambda);
    for (std::size_t k = 0; k < phi.size(); ++k) {
        double v = ps.similar[k] + p.alpha * p.lambda;
        if (ridge > 0.0) v += ridge * phi[k] / grad.l2;
        grad.values[k] = v * g.weight(k);
    }
    return grad;
}

double objective_raw(std::span<const double> phi, const PairSums& ps, const SPMLParams& p) {
    const Grid& g = ps.grid;
    double s = 0.0, l1 = 0.0, l2 = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        const double q = g.weight(k);
        s += ps.similar[k] * phi[k] * q;
        l1 += phi[k] * q;
        l2 += phi[k] * phi[k] * q;
    }
    return s + p.alpha * (p.lambda * l1 + (1.0 - p.lambda) * std::sqrt(l2));
}

double dissimilar_raw(std::span<const double> phi, const PairSums& ps) {
    double d = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) d += ps.dissimilar[k] * phi[k] * ps.grid.weight(k);
    return d;
}

double kkt_raw(std::span<const double> phi, const PairSums& ps, const SPMLParams& p) {
    const double max_phi = *std::max_element(phi.begin(), phi.end());
    if (!(max_phi > 0.0)) throw DomainError("KKT residual is undefined at phi = 0");
    const Gradient grad = objective_gradient(phi, ps, p);
    // Multiplier of the dissimilarity constraint from complementarity:
    // sum_k phi_k (g_k - mu a_k) = 0 whenever the KKT system holds.
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        const double a = ps.dissimilar[k] * ps.grid.weight(k);
        num += phi[k] * grad.values[k];
        den += phi[k] * a;
    }
    if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
    const double mu = num / den;
    double worst = std::max(0.0, -mu);
    const double support = 1e-10 * max_phi;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        const double r = grad.values[k] - mu * ps.dissimilar[k] * ps.grid.weight(k);
        worst = std::max(worst, std::max(0.0, -r));               // eta_k >= 0
        if (phi[k] > support) worst = std::max(worst, std::abs(r));  // eta_k phi_k = 0
    }
    const double gap = dissimilar_raw(phi, ps) - p.level;
    worst = std::max(worst, std::max(0.0, -gap));
    worst = std::max(worst, std::abs(mu * gap));
    return worst;
}

SPMLSolution make_solution(std::vector<double> phi, const PairSums& ps, const SPMLParams& p, std::size_t iterations) {
    for (double& v : phi) v = std::max(v, 0.0);
    SPMLSolution sol{Density(ps.grid, std::move(phi), p.alpha, p.lambda), 0.0, 0.0, 0.0, iterations, 0};
    sol.objective = objective_raw(sol.phi.values(), ps, p);
    sol.dissimilar = dissimilar_raw(sol.phi.values(), ps);
    sol.kkt = kkt_raw(sol.phi.values(), ps, p);
    sol.active_set = active_set_size(sol.phi);
    return sol;
}

// Exact minimizer for alpha > 0. Stationarity on the support gives
//   phi_k = (||phi||_2 / beta) * max(0, mu d_k - e_k),  e_k = s_k + alpha*lambda,
// with beta = alpha (1 - lambda); consistency of ||phi||_2 forces
//   h(mu) = sum_k q_k max(0, mu d_k - e_k)^2 = beta^2,
// and h is continuous and increasing, so mu is located by scanning the sorted
// breakpoints e_k / d_k and then solving the quadratic on the bracket.
// The level constraint then fixes the overall scale.
SPMLSolution solve_active_set(const PairSums& ps, const SPMLParams& p) {
    const Grid& g = ps.grid;
    const std::size_t n = g.size();
    const double beta = p.alpha * (1.0 - p.lambda);
    std::vector<std::size_t> order;
    std::vector<double> e(n);
    for (std::size_t k = 0; k < n; ++k) {
        e[k] = ps.similar[k] + p.alpha * p.lambda;
        if (ps.dissimilar[k] > 0.0) order.push_back(k);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return e[i] / ps.dissimilar[i] < e[j] / ps.dissimilar[j];
    });
    auto h = [&](double mu, std::size_t active) {
        double sum = 0.0;
        for (std::size_t m = 0; m < active; ++m) {
            const std::size_t k = order[m];
            const double r = std::max(0.0, mu * ps.dissimilar[k] - e[k]);
            sum += g.weight(k) * r * r;
        }
        return sum;
    };
    const double target = beta * beta;
    std::size_t active = order.size();
    for (std::size_t m = 1; m < order.size(); ++m) {
        const std::size_t k = order[m];
        if (h(e[k] / ps.dissimilar[k], m) >= target) {
            active = m;
            break;
        }
    }
    double A = 0.0, B = 0.0, C = 0.0;
    for (std::size_t m = 0; m < active; ++m) {
        const std::size_t k = order[m];
        const double q = g.weight(k), d = ps.dissimilar[k];
        A += q * d * d;
        B += q * d * e[k];
        C += q * e[k] * e[k];
    }
    const double lo = e[order[0]] / ps.dissimilar[order[0]];
    double mu = (B + std::sqrt(std::max(0.0, B * B - A * (C - target)))) / A;
    mu = std::max(mu, lo);
    // Newton refinement on the directly evaluated h.
    for (int it = 0; it < 5; ++it) {
        double hv = 0.0, dh = 0.0;
        for (std::size_t m = 0; m < active; ++m) {
            const std::size_t k = order[m];
            const double r = mu * ps.dissimilar[k] - e[k];
            if (r <= 0.0) continue;
            hv += g.weight(k) * r * r;
            dh += 2.0 * g.weight(k) * r * ps.dissimilar[k];
        }
        if (!(dh > 0.0)) break;
        const double next = mu - (hv - target) / dh;
        if (!(next >= lo) || next == mu) break;
        mu = next;
    }

    std::vector<double> phi(n, 0.0);
    double mass = 0.0;
    for (std::size_t m = 0; m < active; ++m) {
        const std::size_t k = order[m];
        phi[k] = std::max(0.0, mu * ps.dissimilar[k] - e[k]);
        mass += ps.dissimilar[k] * phi[k] * g.weight(k);
    }
    if (!(mass > 0.0)) {
        // beta underflows relative to the data: the support collapses onto the
        // lowest breakpoint, which is the alpha*lambda-shifted LP vertex.
        phi.assign(n, 0.0);
        phi[order[0]] = 1.0;
        mass = ps.dissimilar[order[0]] * g.weight(order[0]);
    }
    for (double& v : phi) v *= p.level / mass;
    return make_solution(std::move(phi), ps, p, 1);
}

// Euclidean projection onto {phi >= 0, sum_k a_k phi_k = level}:
// phi_k = max(0, y_k - tau a_k) with tau chosen by a breakpoint scan.
std::vector<double> project_slice(std::span<const double> y, std::span<const double> a, double level) {
    const std::size_t n = y.size();
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < n; ++k)
        if (a[k] > 0.0) idx.push_back(k);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return y[i] / a[i] > y[j] / a[j]; });
    // With the m largest breakpoints active: sum a (y - tau a) = level.
    double sum_ay = 0.0, sum_aa = 0.0, tau = 0.0;
    for (std::size_t m = 0; m < idx.size(); ++m) {
        const std::size_t k = idx[m];
        sum_ay += a[k] * y[k];
        sum_aa += a[k] * a[k];
        tau = (sum_ay - level) / sum_aa;
        const bool last = m + 1 == idx.size();
        if (last || tau >= y[idx[m + 1]] / a[idx[m + 1]]) break;
    }
    std::vector<double> phi(n);
    for (std::size_t k = 0; k < n; ++k) phi[k] = a[k] > 0.0 ? std::max(0.0, y[k] - tau * a[k]) : 0.0;
    return phi;
}

SPMLSolution solve_projected_gradient(const PairSums& ps, const SPMLParams& p) {
    const Grid& g = ps.grid;
    const std::size_t n = g.size();
    std::vector<double> a(n);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        a[k] = ps.dissimilar[k] * g.weight(k);
        total += a[k];
    }
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] > 0.0 ? p.level / total : 0.0;
    std::vector<double> y = x, x_prev = x;
    double f_x = objective_raw(x, ps, p);
    double t = 1.0;
    double L = 1.0;
    std::vector<double> best = x;
    double best_f = f_x;

    for (std::size_t it = 1; it <= p.max_iterations; ++it) {
        const Gradient grad = objective_gradient(y, ps, p);
        const double f_y = objective_raw(y, ps, p);
        std::vector<double> candidate;
        double f_c = 0.0;
        L = std::max(L * 0.5, 1e-300);
        for (int bt = 0; bt < 200; ++bt) {
            std::vector<double> step(n);
            for (std::size_t k = 0; k < n; ++k) step[k] = y[k] - grad.values[k] / L;
            candidate = project_slice(step, a, p.level);
            f_c = objective_raw(candidate, ps, p);
            double lin = 0.0, quad = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double d = candidate[k] - y[k];
                lin += grad.values[k] * d;
                quad += d * d;
            }
            if (f_c <= f_y + lin + 0.5 * L * quad + 1e-15 * std::abs(f_y)) break;
            L *= 2.0;
        }
        const double f_prev = f_x;
        x_prev = std::move(x);
        x = std::move(candidate);
        f_x = f_c;
        if (f_x < best_f) {
            best_f = f_x;
            best = x;
        }
        // Momentum with function-value restart.
        double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if (f_x > f_prev) t_next = 1.0, t = 1.0;
        const double momentum = (t - 1.0) / t_next;
        for (std::size_t k = 0; k < n; ++k) y[k] = std::max(0.0, x[k] + momentum * (x[k] - x_prev[k]));
        if (momentum != 0.0) y = project_slice(y, a, p.level);
        t = t_next;

        const double rel_change = std::abs(f_prev - f_x) / std::max(std::abs(f_x), 1e-300);
        if (rel_change < 1e-10 && kkt_raw(x, ps, p) < p.kkt_tol) return make_solution(x, ps, p, it);
    }
    throw NonConvergenceError("projected gradient did not reach the KKT tolerance within " +
                                  std::to_string(p.max_iterations) + " iterations",
                              make_solution(best, ps, p, p.max_iterations));
}

}  // namespace

double PairSums::similar_sum(const Density& phi) const { return weighted_sum(grid, similar, phi); }
double PairSums::dissimilar_sum(const Density& phi) const { return weighted_sum(grid, dissimilar, phi); }

PairSums assemble_pair_sums(std::span<const Field> states, std::span<const int> labels,
                            std::span<const Field> second_component) {
    if (states.empty()) throw DomainError("cannot assemble pair sums of an empty library");
    if (states.size() != labels.size()) throw DimensionError("state and label counts differ");
    if (!second_component.empty() && second_component.size() != states.size())
        throw DimensionError("second component count differs from state count");
    const Grid& g = states.front().grid();
    for (const Field& f : states) require_same_grid(g, f.grid(), "assemble_pair_sums");
    for (const Field& f : second_component) require_same_grid(g, f.grid(), "assemble_pair_sums");

    std::map<int, std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i]].push_back(i);
    if (classes.size() < 2) throw DomainError("pair sums need at least two distinct labels");

    PairSums ps{g, std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0), 0, 0};
    const double n_total = static_cast<double>(states.size());
    for (const auto& [label, members] : classes) {
        ps.similar_pairs += members.size() * (members.size() - 1) / 2;
    }
    const std::size_t all_pairs = states.size() * (states.size() - 1) / 2;
    ps.dissimilar_pairs = all_pairs - ps.similar_pairs;

    // sum_{i<j} (a_i - a_j)^2 = m * sum_i (a_i - mean)^2 over any group of m values.
    auto spread = [](const auto& values, double m) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= m;
        double acc = 0.0;
        for (double v : values) acc += (v - mean) * (v - mean);
        return m * acc;
    };
    const std::size_t components = second_component.empty() ? 1 : 2;
    std::vector<double> column(states.size());
    for (std::size_t c = 0; c < components; ++c) {
        std::span<const Field> src = c == 0 ? states : second_component;
        for (std::size_t k = 0; k < g.size(); ++k) {
            for (std::size_t i = 0; i < src.size(); ++i) column[i] = src[i][k];
            const double total = spread(column, n_total);
            double within = 0.0;
            for (const auto& [label, members] : classes) {
                std::vector<double> vals(members.size());
                for (std::size_t m = 0; m < members.size(); ++m) vals[m] = column[members[m]];
                within += spread(vals, static_cast<double>(members.size()));
            }
            ps.similar[k] += within;
            ps.dissimilar[k] += std::max(0.0, total - within);
        }
    }
    require_nonzero_dissimilar(ps);
    return ps;
}

PairSums assemble_pair_sums(const LabeledLibrary& lib, bool use_u_only) {
    std::vector<Field> u, v;
    std::vector<int> labels;
    for (const LabeledState& s : lib.states()) {
        u.push_back(s.u0);
        labels.push_back(s.label);
        if (!use_u_only && s.v0) v.push_back(*s.v0);
    }
    if (!v.empty() && v.size() != u.size()) throw DimensionError("library mixes states with and without v");
    return assemble_pair_sums(u, labels, v);
}

void SPMLParams::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("spml.alpha must be finite and >= 0");
    if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("spml.lambda must lie in [0, 1)");
    if (!(level > 0.0) || !std::isfinite(level)) throw ConfigError("spml.level must be positive");
    if (!(kkt_tol > 0.0) || !(constraint_tol > 0.0)) throw ConfigError("spml tolerances must be positive");
    if (max_iterations == 0) throw ConfigError("spml.max_iterations must be positive");
}

double objective(const Density& phi, const PairSums& ps, const SPMLParams& params) {
    require_same_grid(ps.grid, phi.grid(), "objective");
    return objective_raw(phi.values(), ps, params);
}

Density lp_degenerate_solution(const PairSums& ps, double level) {
    require_nonzero_dissimilar(ps);
    if (!(level > 0.0)) throw DomainError("constraint level must be positive");
    std::size_t best = ps.dissimilar.size();
    for (std::size_t k = 0; k < ps.dissimilar.size(); ++k) {
        if (!(ps.dissimilar[k] > 0.0)) continue;
        // s_k / d_k < s_b / d_b without division, so exact ties keep the lowest index.
        if (best == ps.dissimilar.size() ||
            ps.similar[k] * ps.dissimilar[best] < ps.similar[best] * ps.dissimilar[k])
            best = k;
    }
    std::vector<double> phi(ps.grid.size(), 0.0);
    phi[best] = level / (ps.dissimilar[best] * ps.grid.weight(best));
    return Density(ps.grid, std::move(phi));
}

SPMLSolution solve(const PairSums& ps, const SPMLParams& params) {
    params.validate();
    require_nonzero_dissimilar(ps);
    if (params.method == SolverMethod::ProjectedGradient) return solve_projected_gradient(ps, params);
    if (params.alpha == 0.0) {
        const Density lp = lp_degenerate_solution(ps, params.level);
        return make_solution(std::vector<double>(lp.values().begin(), lp.values().end()), ps, params, 1);
    }
    return solve_active_set(ps, params);
}

double kkt_residual(const Density& phi, const PairSums& ps, const SPMLParams& params) {
    require_same_grid(ps.grid, phi.grid(), "kkt_residual");
    return kkt_raw(phi.values(), ps, params);
}

std::size_t active_set_size(const Density& phi) {
    return static_cast<std::size_t>(
        std::count_if(phi.values().begin(), phi.values().end(), [](double v) { return v > 1e-10; }));
}

}  // namespace spml
