#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spml/dynamics.hpp"
#include "spml/grid.hpp"

namespace spml {

/// Random smooth initial functions
///   u(x, 0) = center + amplitude * sum_{k=1..K} [a_k cos(k pi x) + b_k sin((2k-1)/2 pi x)]
/// with i.i.d. standard normal a_k, b_k drawn in the order a_1, b_1, a_2, b_2, ...
struct ICSpec {
    std::string kind = "rd1d";  ///< rd1d | fhn1d
    int modes = 10;
    double center = 0.5;
    double amplitude = 0.1;
    double t0 = 10.0;  ///< pre-evolution time

    static ICSpec reaction_diffusion();
    /// Centered at the unstable constant state u_2, amplitude 1/K with K = 22.
    static ICSpec fitzhugh_nagumo(const FhnSystem& sys);
    /// Default for the given system.
    static ICSpec for_system(const System& sys);

    void validate() const;
};

struct RandomIC {
    Field u;
    std::optional<Field> v;  ///< zero for FHN, absent for RD
};

RandomIC generate_random_ic(const ICSpec& spec, const Grid& grid, std::uint64_t seed);

/// Same expansion with caller-supplied coefficients (lengths must equal modes).
RandomIC ic_from_coefficients(const ICSpec& spec, const Grid& grid, std::span<const double> a,
                              std::span<const double> b);

/// Random function evolved for spec.t0 time units: the state actually observed.
std::vector<double> evolved_initial_state(const System& sys, const ICSpec& spec, std::uint64_t seed,
                                          const IntegratorConfig& integrator = {});

}  // namespace spml
