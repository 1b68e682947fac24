#include "spml/initial_conditions.hpp"

#include <cmath>
#include <numbers>

#include "spml/error.hpp"
#include "spml/random.hpp"

namespace spml {

double NormalStream::next() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

ICSpec ICSpec::reaction_diffusion() { return ICSpec{}; }

ICSpec ICSpec::fitzhugh_nagumo(const FhnSystem& sys) {
    ICSpec spec;
    spec.kind = "fhn1d";
    spec.modes = 22;
    spec.center = sys.constant_steady_states()[1];
    spec.amplitude = 1.0 / 22.0;
    return spec;
}

ICSpec ICSpec::for_system(const System& sys) {
    if (const auto* fhn = std::get_if<FhnSystem>(&sys)) return fitzhugh_nagumo(*fhn);
    return reaction_diffusion();
}

void ICSpec::validate() const {
    if (kind != "rd1d" && kind != "fhn1d") throw ConfigError("ic.kind must be rd1d or fhn1d, got '" + kind + "'");
    if (modes < 1) throw ConfigError("ic.modes must be at least 1");
    if (!(t0 >= 0.0)) throw ConfigError("ic.t0 must be nonnegative");
    if (!std::isfinite(center) || !std::isfinite(amplitude)) throw ConfigError("ic.center/amplitude must be finite");
}

RandomIC ic_from_coefficients(const ICSpec& spec, const Grid& grid, std::span<const double> a,
                              std::span<const double> b) {
    spec.validate();
    const auto modes = static_cast<std::size_t>(spec.modes);
    if (a.size() != modes || b.size() != modes) throw DimensionError("coefficient count does not match ic.modes");
    constexpr double pi = std::numbers::pi;
    std::vector<double> u(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.x(i);
        double sum = 0.0;
        for (std::size_t k = 1; k <= modes; ++k) {
            const double kd = static_cast<double>(k);
            sum += a[k - 1] * std::cos(kd * pi * x) + b[k - 1] * std::sin(0.5 * (2.0 * kd - 1.0) * pi * x);
        }
        u[i] = spec.center + spec.amplitude * sum;
    }
    RandomIC ic{Field(grid, std::move(u)), std::nullopt};
    if (spec.kind == "fhn1d") ic.v = Field::constant(grid, 0.0);
    return ic;
}

RandomIC generate_random_ic(const ICSpec& spec, const Grid& grid, std::uint64_t seed) {
    spec.validate();
    const auto modes = static_cast<std::size_t>(spec.modes);
    NormalStream normals(seed);
    std::vector<double> a(modes), b(modes);
    for (std::size_t k = 0; k < modes; ++k) {
        a[k] = normals.next();
        b[k] = normals.next();
    }
    return ic_from_coefficients(spec, grid, a, b);
}

std::vector<double> evolved_initial_state(const System& sys, const ICSpec& spec, std::uint64_t seed,
                                          const IntegratorConfig& integrator) {
    if (spec.kind != system_kind(sys))
        throw ConfigError("ic.kind '" + spec.kind + "' does not match system '" + system_kind(sys) + "'");
    const RandomIC ic = generate_random_ic(spec, system_grid(sys), seed);
    std::vector<double> state = make_state(sys, ic.u, ic.v);
    if (spec.t0 == 0.0) return state;
    IntegratorConfig cfg = integrator;
    cfg.t_end = spec.t0;
    return integrate(sys, std::move(state), cfg).final_state();
}

}  // namespace spml
