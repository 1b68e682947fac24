#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spml/grid.hpp"
#include "spml/integrator.hpp"

namespace spml {

/// Parameters of the tanh-step diffusion weight
/// w(x) = a tanh((x - x0)/eps) + a tanh((-x - x0)/eps) + 1.
struct TanhWeight {
    double a = 0.3;
    double x0 = 0.5;
    double epsilon = 0.01;
};

Field tanh_weight(const Grid& grid, const TanhWeight& params);

/// Weighted reaction-diffusion equation
///   u_t = nu (1/w) (w u_x)_x + f(u),  f(u) = -u (1/2 - u)(1 - u),
/// with zero-flux boundaries, discretized in conservative flux form.
class RdSystem {
public:
    /// Uniform weight w == 1.
    static RdSystem uniform(const Grid& grid, double nu = 1e-2);
    /// Tanh-step weight.
    static RdSystem weighted(const Grid& grid, const TanhWeight& params = {}, double nu = 1e-2);

    const Grid& grid() const noexcept { return weight_.grid(); }
    const Field& weight() const noexcept { return weight_; }
    double nu() const noexcept { return nu_; }
    /// Tanh parameters, or nullopt for the uniform weight.
    const std::optional<TanhWeight>& weight_params() const noexcept { return weight_params_; }
    /// Replaces the reaction term by zero (pure weighted diffusion).
    RdSystem without_reaction() const;
    bool has_reaction() const noexcept { return reaction_; }

    static double reaction(double u) noexcept { return -u * (0.5 - u) * (1.0 - u); }
    /// Antiderivative of the reaction term with F(0) = 0.
    static double reaction_antiderivative(double u) noexcept {
        const double u2 = u * u;
        return -0.25 * u2 + 0.5 * u2 * u - 0.25 * u2 * u2;
    }

    void rhs(std::span<const double> u, std::span<double> dudt) const;

private:
    RdSystem(Field weight, double nu, std::optional<TanhWeight> params);

    Field weight_;
    double nu_;
    std::optional<TanhWeight> weight_params_;
    bool reaction_ = true;
    std::vector<double> half_weight_;  // w_{i+1/2}, i = 0..n-2
    std::vector<double> inv_weight_;
};

/// FitzHugh-Nagumo system
///   u_t = nu u_xx - v + f(u),  v_t = beta u - gamma v,  f(u) = u (1/2 - u)(u - 1),
/// with zero-flux boundaries. The state vector stores u followed by v.
class FhnSystem {
public:
    explicit FhnSystem(const Grid& grid, double nu = 1e-2, double beta = 1e-2, double gamma = 1.0);

    const Grid& grid() const noexcept { return grid_; }
    double nu() const noexcept { return nu_; }
    double beta() const noexcept { return beta_; }
    double gamma() const noexcept { return gamma_; }

    static double reaction(double u) noexcept { return u * (0.5 - u) * (u - 1.0); }

    /// Spatially constant steady states u_1 = 0 < u_2 < u_3.
    std::array<double, 3> constant_steady_states() const;

    void rhs(std::span<const double> state, std::span<double> dstate) const;

private:
    Grid grid_;
    double nu_, beta_, gamma_;
};

using System = std::variant<RdSystem, FhnSystem>;

const Grid& system_grid(const System& sys);
std::size_t state_size(const System& sys);
/// "rd1d" or "fhn1d".
std::string system_kind(const System& sys);
void evaluate_rhs(const System& sys, std::span<const double> state, std::span<double> dstate);
/// Observable component u of a full state vector.
Field observable(const System& sys, std::span<const double> state);
/// Packs (u, v) into a state vector; v defaults to zero for FHN and is ignored for RD.
std::vector<double> make_state(const System& sys, const Field& u, const std::optional<Field>& v = {});
/// v component of a FHN state; nullopt for RD.
std::optional<Field> hidden_component(const System& sys, std::span<const double> state);
/// Max-norm of the right-hand side at a state.
double rhs_max_norm(const System& sys, std::span<const double> state);
/// Reflection x -> -x of a full state vector (each component reversed).
std::vector<double> reflect_state(const System& sys, std::span<const double> state);

Field rd_rhs(const Field& u, const RdSystem& sys);
std::pair<Field, Field> fhn_rhs(const Field& u, const Field& v, const FhnSystem& sys);

/// Integrates a system from t = 0 to config.t_end; see integrate_ode.
Trajectory integrate(const System& sys, std::vector<double> state, const IntegratorConfig& config,
                     std::span<const double> sample_times = {});

/// Newton iteration on the steady-state equations starting from state.
///
/// For FHN the hidden variable is eliminated through v = beta u / gamma. Returns
/// the polished state when the iteration converges to rhs_max_norm < rhs_tol,
/// nullopt otherwise.
std::optional<std::vector<double>> polish_steady_state(const System& sys, std::span<const double> state,
                                                       double rhs_tol = 1e-6, int max_iterations = 50);

/// True when every eigenvalue of the linearization at a steady state has
/// negative real part. Both systems have Jacobians that are symmetric under a
/// diagonal weighting, so stability is decided by an LDL^T inertia count.
bool is_linearly_stable(const System& sys, std::span<const double> steady_state);

/// Asymptotically stable steady state used as a classification target.
struct Attractor {
    int id = 0;
    Field state;  ///< observable component u
    std::string tag;
};

struct DiscoveryOptions {
    std::size_t n_pilot = 60;
    std::uint64_t seed = 1;
    double t_long = 300.0;
    double t_polish_max = 500.0;
    double merge_tol = 0.05;
    double rhs_tol = 1e-6;
    IntegratorConfig integrator{};
    unsigned threads = 0;  ///< 0 = hardware concurrency
};

struct DiscoveryReport {
    std::vector<Attractor> attractors;
    std::size_t dropped = 0;   ///< pilots that never reached rhs_tol
    std::size_t unstable = 0;  ///< pilots that polished to an unstable steady state
};

struct ICSpec;

/// Integrates random pilot states, polishes them to numerical steady states and
/// merges them into a catalog.
///
/// Each pilot runs to t_long, then alternates a Newton polish with further
/// 25-unit integration windows until the polish succeeds or t_polish_max is
/// reached. Polished states farther than merge_tol from the integrated state,
/// or linearly unstable ones, are dropped.
///
/// Ids start at 1: spatially constant attractors come first in increasing
/// order of value, the rest follow sorted by their value at x_min, descending.
DiscoveryReport discover_attractors(const System& sys, const ICSpec& ic, const DiscoveryOptions& options);

struct ClassifyOptions {
    double window = 25.0;
    double t_max = 500.0;
    double match_tol = 1e-2;  ///< L2 distance (not squared)
    IntegratorConfig integrator{};
};

/// Integrates in windows until the observable state is within match_tol of an
/// attractor. Returns nullopt (unconverged) past t_max.
std::optional<int> classify_attractor(const System& sys, std::vector<double> state,
                                      std::span<const Attractor> attractors, const ClassifyOptions& options = {});

/// Id of the attractor within tol (L2) of the observable state, if any.
std::optional<int> match_attractor(const Field& u, std::span<const Attractor> attractors, double tol);

}  // namespace spml
