#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace spml {

/// Settings for the adaptive Dormand-Prince 5(4) integrator.
struct IntegratorConfig {
    double rtol = 1e-5;
    double atol = 1e-5;
    double max_step = std::numeric_limits<double>::infinity();
    double initial_step = 0.0;  ///< 0 selects the initial step automatically
    double t_end = 10.0;
    std::size_t max_steps = 50'000'000;

    void validate() const;
};

/// Time-stamped states; index 0 is always the initial state.
struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;

    const std::vector<double>& final_state() const { return states.back(); }
    double final_time() const { return times.back(); }
};

using RhsFunction = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

/// Integrates dy/dt = f(t, y) from t0 to t0 + config.t_end with an embedded
/// Runge-Kutta 5(4) pair (Dormand-Prince coefficients, FSAL).
///
/// Steps are accepted when every component of the local error estimate
/// satisfies |e_i| <= atol + rtol*max(|y_i|, |y_new_i|). Requested sample
/// times (absolute, strictly inside (t0, t0 + t_end]) are hit exactly by
/// shortening steps, so samples carry full step accuracy.
///
/// Throws IntegrationError carrying the last good time on step-size underflow
/// or a non-finite state.
Trajectory integrate_ode(const RhsFunction& rhs, std::vector<double> y0, double t0,
                         const IntegratorConfig& config, std::span<const double> sample_times = {});

}  // namespace spml
