#include "spml/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spml/error.hpp"

namespace spml {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                 b6 = 11.0 / 84.0;
// Difference between the 5th order and embedded 4th order weights.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

double error_norm(std::span<const double> err, std::span<const double> y, std::span<const double> y_new,
                  double atol, double rtol) {
    double worst = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
        worst = std::max(worst, std::abs(err[i]) / scale);
    }
    return worst;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

void IntegratorConfig::validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("integrator tolerances must be positive");
    if (!(max_step > 0.0)) throw ConfigError("integrator max_step must be positive");
    if (initial_step < 0.0) throw ConfigError("integrator initial_step must be nonnegative");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("integrator t_end must be finite and nonnegative");
}

Trajectory integrate_ode(const RhsFunction& rhs, std::vector<double> y0, double t0,
                         const IntegratorConfig& config, std::span<const double> sample_times) {
    config.validate();
    const std::size_t n = y0.size();
    const double t_final = t0 + config.t_end;

    Trajectory traj;
    traj.times.push_back(t0);
    traj.states.push_back(y0);

    std::vector<double> targets;
    for (double ts : sample_times)
        if (ts > t0 && ts < t_final) targets.push_back(ts);
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    targets.push_back(t_final);
    if (config.t_end == 0.0) return traj;

    std::vector<double> y = std::move(y0);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n), err(n);

    double t = t0;
    rhs(t, y, k1);

    double h = config.initial_step;
    if (h == 0.0) {
        // Hairer's starting step heuristic for a 5th order method.
        const double d0 = error_norm(y, y, y, config.atol, config.rtol);
        const double d1 = error_norm(k1, y, y, config.atol, config.rtol);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, config.t_end);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h0 * k1[i];
        rhs(t + h0, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) err[i] = (k2[i] - k1[i]);
        const double d2 = error_norm(err, y, y, config.atol, config.rtol) / h0;
        const double dm = std::max(d1, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
        h = std::min(100.0 * h0, h1);
    }
    h = std::min({h, config.max_step, config.t_end});

    // PI step-size control constants (Hairer & Wanner, DOPRI5).
    constexpr double safety = 0.9, beta = 0.04, expo = 0.2 - beta * 0.75;
    constexpr double fac_min = 0.2, fac_max = 10.0;
    double err_old = 1e-4;
    bool last_rejected = false;

    std::size_t target_idx = 0;
    while (target_idx < targets.size()) {
        if (traj.accepted_steps + traj.rejected_steps >= config.max_steps)
            throw IntegrationError("integrator exceeded the step budget at t=" + std::to_string(t), t);

        const double target = targets[target_idx];
        bool hits_target = false;
        double step = h;
        if (t + step >= target || target - (t + step) < 1e-12 * std::max(1.0, std::abs(target))) {
            step = target - t;
            hits_target = true;
        }
        if (!(step > 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))))
            throw IntegrationError("step size underflow at t=" + std::to_string(t), t);

        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + step * a21 * k1[i];
        rhs(t + c2 * step, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + step * (a31 * k1[i] + a32 * k2[i]);
        rhs(t + c3 * step, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + step * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(t + c4 * step, tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + step * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(t + c5 * step, tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + step * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        rhs(t + step, tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            y_new[i] = y[i] + step * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        rhs(t + step, y_new, k7);
        for (std::size_t i = 0; i < n; ++i)
            err[i] = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

        double e = error_norm(err, y, y_new, config.atol, config.rtol);
        if (!std::isfinite(e)) e = 1e10;

        if (e <= 1.0) {
            const double fac11 = std::pow(std::max(e, 1e-10), expo);
            double fac = fac11 / std::pow(err_old, beta) / safety;
            fac = std::clamp(fac, 1.0 / fac_max, 1.0 / fac_min);
            double h_next = step / fac;
            if (last_rejected) h_next = std::min(h_next, step);
            err_old = std::max(e, 1e-4);
            last_rejected = false;

            t = hits_target ? target : t + step;
            std::swap(y, y_new);
            std::swap(k1, k7);
            ++traj.accepted_steps;
            if (!std::isfinite(max_abs(y)))
                throw IntegrationError("non-finite state at t=" + std::to_string(t), t);

            if (hits_target) {
                traj.times.push_back(t);
                traj.states.push_back(y);
                ++target_idx;
                // A step shortened to hit a sample must not shrink the next one.
                h_next = std::max(h_next, h);
            }
            h = std::min(h_next, config.max_step);
        } else {
            const double fac11 = std::pow(e, expo);
            h = step / std::min(1.0 / fac_min, fac11 / safety);
            last_rejected = true;
            ++traj.rejected_steps;
        }
    }
    return traj;
}

}  // namespace spml
