#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace spml {

/// Uniform 1D grid on [x_min, x_max] with trapezoidal quadrature weights.
///
/// The grid is a small value type; coordinates and weights are computed on
/// demand. Coordinates are evaluated as (x_min*(n-1-k) + x_max*k)/(n-1) so that
/// a grid symmetric about zero is exactly symmetric in floating point
/// (x(k) == -x(n-1-k) bit for bit).
class Grid {
public:
    Grid(std::size_t n_points = 201, double x_min = -1.0, double x_max = 1.0);

    std::size_t size() const noexcept { return n_; }
    double x_min() const noexcept { return x_min_; }
    double x_max() const noexcept { return x_max_; }
    double spacing() const noexcept { return dx_; }

    double x(std::size_t k) const noexcept {
        const double last = static_cast<double>(n_ - 1);
        return (x_min_ * (last - static_cast<double>(k)) + x_max_ * static_cast<double>(k)) / last;
    }

    /// Trapezoidal weight: dx/2 at the endpoints, dx inside.
    double weight(std::size_t k) const noexcept {
        return (k == 0 || k + 1 == n_) ? 0.5 * dx_ : dx_;
    }

    std::vector<double> coordinates() const;
    std::vector<double> quadrature_weights() const;

    /// Index of the grid point nearest to x (x is clamped to the domain).
    std::size_t nearest_index(double x) const noexcept;

    /// True when reflection x -> -x maps grid points onto grid points.
    bool is_symmetric() const noexcept { return x_min_ == -x_max_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t n_;
    double x_min_;
    double x_max_;
    double dx_;
};

/// Real samples of a function on a grid.
class Field {
public:
    Field() : grid_(3) , values_(3, 0.0) {}
    Field(Grid grid, std::vector<double> values);

    static Field constant(const Grid& grid, double value);
    static Field from_function(const Grid& grid, const std::function<double(double)>& f);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t k) const noexcept { return values_[k]; }

    friend bool operator==(const Field&, const Field&) = default;

private:
    Grid grid_;
    std::vector<double> values_;
};

/// Nonnegative weight function defining a weighted L2 (pseudo-)metric.
///
/// alpha and lambda record the regularization the density was learned with;
/// hand-built densities leave them at zero.
class Density {
public:
    Density(Grid grid, std::vector<double> values, double alpha = 0.0, double lambda = 0.0,
            bool allow_zero = false);

    static Density uniform(const Grid& grid, double value = 1.0);
    static Density zero(const Grid& grid);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t k) const noexcept { return values_[k]; }
    double alpha() const noexcept { return alpha_; }
    double lambda() const noexcept { return lambda_; }
    bool is_zero() const noexcept;

    Density scaled(double c) const;
    /// Copy normalized so that its maximum value is 1 (for plotting).
    Density max_normalized() const;

    friend bool operator==(const Density&, const Density&) = default;

private:
    Grid grid_;
    std::vector<double> values_;
    double alpha_;
    double lambda_;
};

/// Trapezoidal integral of sampled values.
double integrate(const Grid& grid, std::span<const double> values);

double weighted_inner_product(const Field& u, const Field& v, const Density& phi);
double weighted_norm_sq(const Field& u, const Density& phi);

/// Squared norm weighted by a strictly positive weight field w.
double intrinsic_norm_sq(const Field& u, const Field& w);

/// Plain (unweighted) L2 norm squared of u - v.
double l2_distance_sq(const Field& u, const Field& v);

/// Second-order finite-difference derivative (central inside, one-sided at the ends).
std::vector<double> derivative(const Field& u);

/// Discrete gradient-flow energy sum_k [nu/2 (u_x)_k^2 - F(u_k)] w_k q_k.
double energy_functional(const Field& u, const Field& w, double nu,
                         const std::function<double(double)>& antiderivative);

void require_same_grid(const Grid& a, const Grid& b, const char* what);

}  // namespace spml
