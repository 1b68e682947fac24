#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spml/error.hpp"
#include "spml/grid.hpp"

namespace spml {

class LabeledLibrary;

/// Per-grid-point pair coefficients: S(phi) = sum_k s_k phi_k q_k and
/// D(phi) = sum_k d_k phi_k q_k, with s_k (d_k) the sum over equally
/// (differently) labeled pairs of squared differences at x_k.
struct PairSums {
    Grid grid;
    std::vector<double> similar;
    std::vector<double> dissimilar;
    std::size_t similar_pairs = 0;
    std::size_t dissimilar_pairs = 0;

    double similar_sum(const Density& phi) const;
    double dissimilar_sum(const Density& phi) const;
};

/// Pair sums over arbitrary labeled fields (optionally with a second component
/// per state, e.g. the FHN v field; pass an empty span to ignore it).
PairSums assemble_pair_sums(std::span<const Field> states, std::span<const int> labels,
                            std::span<const Field> second_component = {});

/// Pair sums of a library. With use_u_only = false the FHN v component is
/// added to the squared differences.
PairSums assemble_pair_sums(const LabeledLibrary& lib, bool use_u_only = true);

enum class SolverMethod {
    ActiveSetKkt,       ///< exact search over the KKT multiplier (default)
    ProjectedGradient,  ///< accelerated projected gradient on the constraint slice
};

struct SPMLParams {
    double alpha = 1.0;
    double lambda = 0.0;
    double level = 1.0;  ///< constraint D(phi) >= level
    double kkt_tol = 1e-6;
    double constraint_tol = 1e-8;
    std::size_t max_iterations = 200'000;
    SolverMethod method = SolverMethod::ActiveSetKkt;

    void validate() const;
};

struct SPMLSolution {
    Density phi;
    double objective = 0.0;
    double dissimilar = 0.0;  ///< D(phi)
    double kkt = 0.0;
    std::size_t iterations = 0;
    std::size_t active_set = 0;  ///< count of phi_k > 1e-10
};

class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, SPMLSolution best) : Error(what), best_(std::move(best)) {}
    const SPMLSolution& best() const noexcept { return best_; }

private:
    SPMLSolution best_;
};

/// J(phi) = S(phi) + alpha (lambda ||phi||_1 + (1 - lambda) ||phi||_2), both
/// norms quadrature-weighted.
double objective(const Density& phi, const PairSums& ps, const SPMLParams& params);

/// Minimizes J subject to D(phi) >= level, phi >= 0.
SPMLSolution solve(const PairSums& ps, const SPMLParams& params);

/// Closed-form minimizer for alpha = 0: a single atom at the lowest index k
/// minimizing s_k / d_k, scaled so that D(phi) = level.
Density lp_degenerate_solution(const PairSums& ps, double level = 1.0);

/// Max violation of the KKT system of the convex program at phi: dual
/// feasibility, stationarity on the support, complementarity with the
/// dissimilarity constraint, and primal feasibility.
double kkt_residual(const Density& phi, const PairSums& ps, const SPMLParams& params);

/// Number of entries above 1e-10.
std::size_t active_set_size(const Density& phi);

}  // namespace spml
