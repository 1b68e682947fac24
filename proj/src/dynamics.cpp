#include "spml/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "spml/error.hpp"
#include "spml/initial_conditions.hpp"
#include "spml/parallel.hpp"
#include "spml/random.hpp"

namespace spml {

Field tanh_weight(const Grid& grid, const TanhWeight& p) {
    if (!(p.epsilon > 0.0)) throw DomainError("tanh weight epsilon must be positive");
    return Field::from_function(grid, [&](double x) {
        return p.a * std::tanh((x - p.x0) / p.epsilon) + p.a * std::tanh((-x - p.x0) / p.epsilon) + 1.0;
    });
}

RdSystem::RdSystem(Field weight, double nu, std::optional<TanhWeight> params)
    : weight_(std::move(weight)), nu_(nu), weight_params_(params) {
    if (!(nu > 0.0)) throw DomainError("diffusion coefficient nu must be positive");
    const std::size_t n = weight_.size();
    inv_weight_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(weight_[i] > 0.0)) throw DomainError("diffusion weight must be strictly positive");
        inv_weight_[i] = 1.0 / weight_[i];
    }
    half_weight_.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) half_weight_[i] = 0.5 * (weight_[i] + weight_[i + 1]);
}

RdSystem RdSystem::uniform(const Grid& grid, double nu) {
    return RdSystem(Field::constant(grid, 1.0), nu, std::nullopt);
}

RdSystem RdSystem::weighted(const Grid& grid, const TanhWeight& params, double nu) {
    return RdSystem(tanh_weight(grid, params), nu, params);
}

RdSystem RdSystem::without_reaction() const {
    RdSystem copy = *this;
    copy.reaction_ = false;
    return copy;
}

void RdSystem::rhs(std::span<const double> u, std::span<double> dudt) const {
    const std::size_t n = u.size();
    const double dx = grid().spacing();
    const double scale = nu_ / (dx * dx);
    // Mirror ghost points u_{-1} = u_1, u_n = u_{n-2} give zero boundary flux.
    for (std::size_t i = 0; i < n; ++i) {
        const double left = i == 0 ? u[1] : u[i - 1];
        const double right = i + 1 == n ? u[n - 2] : u[i + 1];
        const double w_left = i == 0 ? half_weight_[0] : half_weight_[i - 1];
        const double w_right = i + 1 == n ? half_weight_[n - 2] : half_weight_[i];
        const double flux = w_right * (right - u[i]) - w_left * (u[i] - left);
        dudt[i] = scale * inv_weight_[i] * flux + (reaction_ ? reaction(u[i]) : 0.0);
    }
}

FhnSystem::FhnSystem(const Grid& grid, double nu, double beta, double gamma)
    : grid_(grid), nu_(nu), beta_(beta), gamma_(gamma) {
    if (!(nu > 0.0)) throw DomainError("FHN nu must be positive");
    if (!(gamma > 0.0)) throw DomainError("FHN gamma must be positive");
    if (!(gamma * gamma - 16.0 * beta * gamma > 0.0))
        throw DomainError("FHN parameters must satisfy gamma^2 - 16 beta gamma > 0");
}

std::array<double, 3> FhnSystem::constant_steady_states() const {
    const double root = std::sqrt(gamma_ * gamma_ - 16.0 * beta_ * gamma_);
    return {0.0, (3.0 * gamma_ - root) / (4.0 * gamma_), (3.0 * gamma_ + root) / (4.0 * gamma_)};
}

void FhnSystem::rhs(std::span<const double> state, std::span<double> dstate) const {
    const std::size_t n = grid_.size();
    const auto u = state.subspan(0, n);
    const auto v = state.subspan(n, n);
    const double dx = grid_.spacing();
    const double scale = nu_ / (dx * dx);
    for (std::size_t i = 0; i < n; ++i) {
        const double left = i == 0 ? u[1] : u[i - 1];
        const double right = i + 1 == n ? u[n - 2] : u[i + 1];
        const double lap = (right - u[i]) - (u[i] - left);
        dstate[i] = scale * lap - v[i] + reaction(u[i]);
        dstate[n + i] = beta_ * u[i] - gamma_ * v[i];
    }
}

const Grid& system_grid(const System& sys) {
    return std::visit([](const auto& s) -> const Grid& { return s.grid(); }, sys);
}

std::size_t state_size(const System& sys) {
    const std::size_t n = system_grid(sys).size();
    return std::holds_alternative<FhnSystem>(sys) ? 2 * n : n;
}

std::string system_kind(const System& sys) { return std::holds_alternative<FhnSystem>(sys) ? "fhn1d" : "rd1d"; }

void evaluate_rhs(const System& sys, std::span<const double> state, std::span<double> dstate) {
    if (state.size() != state_size(sys) || dstate.size() != state.size())
        throw DimensionError("state vector length does not match the system");
    std::visit([&](const auto& s) { s.rhs(state, dstate); }, sys);
}

Field observable(const System& sys, std::span<const double> state) {
    if (state.size() != state_size(sys)) throw DimensionError("state vector length does not match the system");
    const Grid& g = system_grid(sys);
    return Field(g, std::vector<double>(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(g.size())));
}

std::optional<Field> hidden_component(const System& sys, std::span<const double> state) {
    if (!std::holds_alternative<FhnSystem>(sys)) return std::nullopt;
    if (state.size() != state_size(sys)) throw DimensionError("state vector length does not match the system");
    const Grid& g = system_grid(sys);
    return Field(g, std::vector<double>(state.begin() + static_cast<std::ptrdiff_t>(g.size()), state.end()));
}

std::vector<double> make_state(const System& sys, const Field& u, const std::optional<Field>& v) {
    const Grid& g = system_grid(sys);
    require_same_grid(g, u.grid(), "make_state");
    std::vector<double> state(u.values().begin(), u.values().end());
    if (std::holds_alternative<FhnSystem>(sys)) {
        if (v) {
            require_same_grid(g, v->grid(), "make_state");
            state.insert(state.end(), v->values().begin(), v->values().end());
        } else {
            state.resize(2 * g.size(), 0.0);
        }
    }
    return state;
}

double rhs_max_norm(const System& sys, std::span<const double> state) {
    std::vector<double> d(state.size());
    evaluate_rhs(sys, state, d);
    double m = 0.0;
    for (double x : d) m = std::max(m, std::abs(x));
    return m;
}

std::vector<double> reflect_state(const System& sys, std::span<const double> state) {
    if (state.size() != state_size(sys)) throw DimensionError("state vector length does not match the system");
    const std::size_t n = system_grid(sys).size();
    std::vector<double> out(state.begin(), state.end());
    for (std::size_t c = 0; c < out.size(); c += n)
        std::reverse(out.begin() + static_cast<std::ptrdiff_t>(c), out.begin() + static_cast<std::ptrdiff_t>(c + n));
    return out;
}

Field rd_rhs(const Field& u, const RdSystem& sys) {
    require_same_grid(u.grid(), sys.grid(), "rd_rhs");
    std::vector<double> d(u.size());
    sys.rhs(u.values(), d);
    return Field(u.grid(), std::move(d));
}

std::pair<Field, Field> fhn_rhs(const Field& u, const Field& v, const FhnSystem& sys) {
    require_same_grid(u.grid(), sys.grid(), "fhn_rhs");
    require_same_grid(v.grid(), sys.grid(), "fhn_rhs");
    const std::size_t n = u.size();
    std::vector<double> state(u.values().begin(), u.values().end());
    state.insert(state.end(), v.values().begin(), v.values().end());
    std::vector<double> d(2 * n);
    sys.rhs(state, d);
    return {Field(u.grid(), std::vector<double>(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(n))),
            Field(u.grid(), std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(n), d.end()))};
}

Trajectory integrate(const System& sys, std::vector<double> state, const IntegratorConfig& config,
                     std::span<const double> sample_times) {
    if (state.size() != state_size(sys)) throw DimensionError("state vector length does not match the system");
    const RhsFunction rhs = [&sys](double, std::span<const double> y, std::span<double> dy) {
        std::visit([&](const auto& s) { s.rhs(y, dy); }, sys);
    };
    return integrate_ode(rhs, std::move(state), 0.0, config, sample_times);
}

std::optional<int> match_attractor(const Field& u, std::span<const Attractor> attractors, double tol) {
    const double tol_sq = tol * tol;
    for (const Attractor& a : attractors)
        if (l2_distance_sq(u, a.state) < tol_sq) return a.id;
    return std::nullopt;
}

std::optional<int> classify_attractor(const System& sys, std::vector<double> state,
                                      std::span<const Attractor> attractors, const ClassifyOptions& options) {
    if (attractors.empty()) throw DomainError("classify_attractor needs a nonempty attractor catalog");
    if (!(options.window > 0.0) || !(options.t_max > 0.0)) throw ConfigError("classification window/t_max must be positive");
    IntegratorConfig cfg = options.integrator;
    double t = 0.0;
    while (t < options.t_max) {
        cfg.t_end = std::min(options.window, options.t_max - t);
        state = integrate(sys, std::move(state), cfg).final_state();
        t += cfg.t_end;
        if (auto id = match_attractor(observable(sys, state), attractors, options.match_tol)) return id;
    }
    return std::nullopt;
}

namespace {

bool is_spatially_constant(const Field& u) {
    const auto [lo, hi] = std::minmax_element(u.values().begin(), u.values().end());
    return *hi - *lo < 1e-6 * (1.0 + std::abs(*hi));
}

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 5e-7 ? 0.0 : v);
    return buf;
}

double reaction_derivative(double u) noexcept { return -0.5 + 3.0 * u - 3.0 * u * u; }

// Tridiagonal linear part L of the u-equation (diffusion, plus -beta/gamma for
// FHN after eliminating v) and the diagonal weight sigma making sigma*L symmetric.
struct Tridiagonal {
    std::vector<double> lower, diag, upper, sigma;
    double shift = 0.0;      // constant diagonal term
    double threshold = 0.0;  // stability needs eig(L_diffusion + f') < threshold
};

Tridiagonal linear_part(const System& sys) {
    const Grid& g = system_grid(sys);
    const std::size_t n = g.size();
    const double dx = g.spacing();
    Tridiagonal t{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                  std::vector<double>(n, 0.0)};
    if (const auto* rd = std::get_if<RdSystem>(&sys)) {
        const double s = rd->nu() / (dx * dx);
        const Field& w = rd->weight();
        for (std::size_t i = 0; i < n; ++i) {
            const double wl = 0.5 * (w[i] + w[i == 0 ? 1 : i - 1]);
            const double wr = 0.5 * (w[i] + w[i + 1 == n ? n - 2 : i + 1]);
            const double c = s / w[i];
            t.diag[i] = -c * (wl + wr);
            if (i == 0) t.upper[i] = c * (wl + wr);
            else if (i + 1 == n) t.lower[i] = c * (wl + wr);
            else {
                t.lower[i] = c * wl;
                t.upper[i] = c * wr;
            }
            t.sigma[i] = w[i] * g.weight(i);
        }
    } else {
        const auto& fhn = std::get<FhnSystem>(sys);
        const double s = fhn.nu() / (dx * dx);
        for (std::size_t i = 0; i < n; ++i) {
            t.diag[i] = -2.0 * s;
            if (i == 0) t.upper[i] = 2.0 * s;
            else if (i + 1 == n) t.lower[i] = 2.0 * s;
            else t.lower[i] = t.upper[i] = s;
            t.sigma[i] = g.weight(i);
        }
        t.shift = -fhn.beta() / fhn.gamma();
        t.threshold = fhn.beta() / fhn.gamma();
    }
    return t;
}

// Solves the tridiagonal system in place (Thomas algorithm); false if a pivot vanishes.
bool solve_tridiagonal(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper,
                       std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (diag[i - 1] == 0.0) return false;
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    if (diag[n - 1] == 0.0) return false;
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    for (double x : rhs)
        if (!std::isfinite(x)) return false;
    return true;
}

std::vector<double> reduced_residual(const System& sys, const Tridiagonal& lin, std::span<const double> u) {
    const std::size_t n = u.size();
    const bool react = !std::holds_alternative<RdSystem>(sys) || std::get<RdSystem>(sys).has_reaction();
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = lin.diag[i] * u[i] + lin.shift * u[i] + (react ? RdSystem::reaction(u[i]) : 0.0);
        if (i > 0) v += lin.lower[i] * u[i - 1];
        if (i + 1 < n) v += lin.upper[i] * u[i + 1];
        r[i] = v;
    }
    return r;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

std::optional<std::vector<double>> polish_steady_state(const System& sys, std::span<const double> state,
                                                       double rhs_tol, int max_iterations) {
    const std::size_t n = system_grid(sys).size();
    if (state.size() != state_size(sys)) throw DimensionError("state vector length does not match the system");
    const Tridiagonal lin = linear_part(sys);
    const bool react = !std::holds_alternative<RdSystem>(sys) || std::get<RdSystem>(sys).has_reaction();

    std::vector<double> u(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(n));
    auto assemble = [&](std::span<const double> uu) {
        std::vector<double> full(uu.begin(), uu.end());
        if (const auto* fhn = std::get_if<FhnSystem>(&sys)) {
            full.resize(2 * n);
            for (std::size_t i = 0; i < n; ++i) full[n + i] = fhn->beta() * uu[i] / fhn->gamma();
        }
        return full;
    };

    std::vector<double> res = reduced_residual(sys, lin, u);
    double res_norm = max_abs(res);
    for (int it = 0; it < max_iterations; ++it) {
        std::vector<double> full = assemble(u);
        if (res_norm < 0.1 * rhs_tol && rhs_max_norm(sys, full) < rhs_tol) return full;
        std::vector<double> diag(n);
        for (std::size_t i = 0; i < n; ++i)
            diag[i] = lin.diag[i] + lin.shift + (react ? reaction_derivative(u[i]) : 0.0);
        std::vector<double> step = res;
        if (!solve_tridiagonal(lin.lower, diag, lin.upper, step)) return std::nullopt;
        // Backtrack on the residual norm.
        double lambda = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
            std::vector<double> trial(u);
            for (std::size_t i = 0; i < n; ++i) trial[i] -= lambda * step[i];
            std::vector<double> trial_res = reduced_residual(sys, lin, trial);
            const double trial_norm = max_abs(trial_res);
            if (trial_norm < res_norm || trial_norm < 0.1 * rhs_tol) {
                u = std::move(trial);
                res = std::move(trial_res);
                res_norm = trial_norm;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    std::vector<double> full = assemble(u);
    if (rhs_max_norm(sys, full) < rhs_tol) return full;
    return std::nullopt;
}

bool is_linearly_stable(const System& sys, std::span<const double> steady_state) {
    const std::size_t n = system_grid(sys).size();
    if (steady_state.size() != state_size(sys)) throw DimensionError("state vector length does not match the system");
    const Tridiagonal lin = linear_part(sys);
    const bool react = !std::holds_alternative<RdSystem>(sys) || std::get<RdSystem>(sys).has_reaction();
    // B = sigma (threshold I - L - diag f') is symmetric tridiagonal; it must be
    // positive definite, i.e. every LDL^T pivot must be positive.
    double pivot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = lin.diag[i] + (react ? reaction_derivative(steady_state[i]) : 0.0);
        double b = lin.sigma[i] * (lin.threshold - d);
        if (i > 0) {
            const double e = -lin.sigma[i - 1] * lin.upper[i - 1];
            b -= e * e / pivot;
        }
        if (!(b > 0.0)) return false;
        pivot = b;
    }
    return true;
}


DiscoveryReport discover_attractors(const System& sys, const ICSpec& ic, const DiscoveryOptions& options) {
    if (options.n_pilot < 50) throw ConfigError("attractor discovery needs at least 50 pilot states");
    if (!(options.merge_tol > 0.0) || !(options.rhs_tol > 0.0)) throw ConfigError("merge_tol and rhs_tol must be positive");
    if (ic.kind != system_kind(sys)) throw ConfigError("ic.kind does not match the system");

    const Grid& grid = system_grid(sys);
    std::vector<std::optional<std::vector<double>>> finals(options.n_pilot);
    std::vector<char> unstable(options.n_pilot, 0);

    parallel_for(options.n_pilot, options.threads, [&](std::size_t i) {
        const RandomIC r = generate_random_ic(ic, grid, derive_seed(options.seed, i));
        IntegratorConfig cfg = options.integrator;
        cfg.t_end = options.t_long;
        std::vector<double> state = integrate(sys, make_state(sys, r.u, r.v), cfg).final_state();
        double t = options.t_long;
        std::optional<std::vector<double>> polished;
        for (;;) {
            if (rhs_max_norm(sys, state) < options.rhs_tol) polished = state;
            else polished = polish_steady_state(sys, state, options.rhs_tol);
            if (polished) {
                const double moved = std::sqrt(l2_distance_sq(observable(sys, *polished), observable(sys, state)));
                if (moved < options.merge_tol) break;
                polished.reset();
            }
            if (t >= options.t_polish_max) break;
            cfg.t_end = std::min(25.0, options.t_polish_max - t);
            state = integrate(sys, std::move(state), cfg).final_state();
            t += cfg.t_end;
        }
        if (!polished) return;
        if (!is_linearly_stable(sys, *polished)) {
            unstable[i] = 1;
            return;
        }
        state = std::move(*polished);
        finals[i] = std::move(state);
    });

    DiscoveryReport report;
    std::vector<Attractor> found;
    for (std::size_t i = 0; i < finals.size(); ++i) {
        const auto& f = finals[i];
        if (!f) {
            if (unstable[i]) ++report.unstable;
            else ++report.dropped;
            continue;
        }
        Field u = observable(sys, *f);
        if (!match_attractor(u, found, options.merge_tol)) found.push_back(Attractor{0, std::move(u), ""});
    }
    if (found.empty()) throw GenerationError("attractor discovery found no converged steady state");

    std::stable_sort(found.begin(), found.end(), [](const Attractor& a, const Attractor& b) {
        const bool ca = is_spatially_constant(a.state), cb = is_spatially_constant(b.state);
        if (ca != cb) return ca;
        if (ca) return a.state[0] < b.state[0];
        return a.state[0] > b.state[0];
    });
    const std::size_t last = grid.size() - 1;
    for (std::size_t i = 0; i < found.size(); ++i) {
        Attractor& a = found[i];
        a.id = static_cast<int>(i) + 1;
        if (is_spatially_constant(a.state))
            a.tag = "constant-" + format_value(a.state[0]);
        else if (a.state[0] > a.state[last])
            a.tag = "left-high";
        else if (a.state[0] < a.state[last])
            a.tag = "right-high";
        else
            a.tag = "symmetric";
    }
    report.attractors = std::move(found);
    return report;
}

}  // namespace spml
