#include "spml/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spml/error.hpp"

namespace spml {

Grid::Grid(std::size_t n_points, double x_min, double x_max)
    : n_(n_points), x_min_(x_min), x_max_(x_max), dx_(0.0) {
    if (n_points < 3) throw DomainError("grid needs at least 3 points, got " + std::to_string(n_points));
    if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_max > x_min))
        throw DomainError("grid requires finite x_min < x_max");
    dx_ = (x_max - x_min) / static_cast<double>(n_points - 1);
}

std::vector<double> Grid::coordinates() const {
    std::vector<double> xs(n_);
    for (std::size_t k = 0; k < n_; ++k) xs[k] = x(k);
    return xs;
}

std::vector<double> Grid::quadrature_weights() const {
    std::vector<double> q(n_);
    for (std::size_t k = 0; k < n_; ++k) q[k] = weight(k);
    return q;
}

std::size_t Grid::nearest_index(double xq) const noexcept {
    const double t = std::clamp((xq - x_min_) / dx_, 0.0, static_cast<double>(n_ - 1));
    return static_cast<std::size_t>(std::lround(t));
}

Field::Field(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size())
        throw DimensionError("field has " + std::to_string(values_.size()) + " values for a grid of " +
                             std::to_string(grid_.size()) + " points");
    for (double v : values_)
        if (!std::isfinite(v)) throw DomainError("field contains a non-finite value");
}

Field Field::constant(const Grid& grid, double value) {
    return Field(grid, std::vector<double>(grid.size(), value));
}

Field Field::from_function(const Grid& grid, const std::function<double(double)>& f) {
    std::vector<double> v(grid.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(grid.x(k));
    return Field(grid, std::move(v));
}

Density::Density(Grid grid, std::vector<double> values, double alpha, double lambda, bool allow_zero)
    : grid_(grid), values_(std::move(values)), alpha_(alpha), lambda_(lambda) {
    if (values_.size() != grid_.size())
        throw DimensionError("density has " + std::to_string(values_.size()) + " values for a grid of " +
                             std::to_string(grid_.size()) + " points");
    bool any_positive = false;
    for (double v : values_) {
        if (!std::isfinite(v) || v < 0.0) throw DomainError("density values must be finite and nonnegative");
        any_positive = any_positive || v > 0.0;
    }
    if (!any_positive && !allow_zero) throw DomainError("density is identically zero");
}

Density Density::uniform(const Grid& grid, double value) {
    return Density(grid, std::vector<double>(grid.size(), value));
}

Density Density::zero(const Grid& grid) {
    return Density(grid, std::vector<double>(grid.size(), 0.0), 0.0, 0.0, true);
}

bool Density::is_zero() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

Density Density::scaled(double c) const {
    if (!(c > 0.0)) throw DomainError("density scale factor must be positive");
    std::vector<double> v(values_);
    for (double& x : v) x *= c;
    return Density(grid_, std::move(v), alpha_, lambda_, is_zero());
}

Density Density::max_normalized() const {
    const double m = *std::max_element(values_.begin(), values_.end());
    if (m == 0.0) throw DomainError("cannot max-normalize a zero density");
    return scaled(1.0 / m);
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!(a == b)) throw DimensionError(std::string(what) + ": operands are defined on different grids");
}

double integrate(const Grid& grid, std::span<const double> values) {
    if (values.size() != grid.size()) throw DimensionError("integrate: length does not match grid");
    double sum = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) sum += values[k] * grid.weight(k);
    return sum;
}

double weighted_inner_product(const Field& u, const Field& v, const Density& phi) {
    require_same_grid(u.grid(), v.grid(), "weighted_inner_product");
    require_same_grid(u.grid(), phi.grid(), "weighted_inner_product");
    const Grid& g = u.grid();
    double sum = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) sum += u[k] * v[k] * phi[k] * g.weight(k);
    return sum;
}

double weighted_norm_sq(const Field& u, const Density& phi) { return weighted_inner_product(u, u, phi); }

double intrinsic_norm_sq(const Field& u, const Field& w) {
    require_same_grid(u.grid(), w.grid(), "intrinsic_norm_sq");
    const Grid& g = u.grid();
    double sum = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(w[k] > 0.0)) throw DomainError("intrinsic norm weight must be strictly positive");
        sum += u[k] * u[k] * w[k] * g.weight(k);
    }
    return sum;
}

double l2_distance_sq(const Field& u, const Field& v) {
    require_same_grid(u.grid(), v.grid(), "l2_distance_sq");
    const Grid& g = u.grid();
    double sum = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double d = u[k] - v[k];
        sum += d * d * g.weight(k);
    }
    return sum;
}

std::vector<double> derivative(const Field& u) {
    const std::size_t n = u.size();
    const double h2 = 2.0 * u.grid().spacing();
    std::vector<double> du(n);
    du[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / h2;
    for (std::size_t k = 1; k + 1 < n; ++k) du[k] = (u[k + 1] - u[k - 1]) / h2;
    du[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / h2;
    return du;
}

double energy_functional(const Field& u, const Field& w, double nu,
                         const std::function<double(double)>& antiderivative) {
    require_same_grid(u.grid(), w.grid(), "energy_functional");
    if (!(nu > 0.0)) throw DomainError("energy_functional: nu must be positive");
    const std::vector<double> du = derivative(u);
    const Grid& g = u.grid();
    double sum = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(w[k] > 0.0)) throw DomainError("energy_functional: weight must be strictly positive");
        sum += (0.5 * nu * du[k] * du[k] - antiderivative(u[k])) * w[k] * g.weight(k);
    }
    return sum;
}

}  // namespace spml
