#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "wavelab/grid.hpp"

namespace wavelab {

/// A state (u, u_t) of the flow, sampled on grid nodes.
struct FieldPair {
    std::vector<double> u;
    std::vector<double> v;  // u_t

    FieldPair() = default;
    explicit FieldPair(std::size_t n) : u(n, 0.0), v(n, 0.0) {}
    FieldPair(std::vector<double> u_, std::vector<double> v_) : u(std::move(u_)), v(std::move(v_)) {
        if (u.size() != v.size()) throw std::invalid_argument("FieldPair: slot size mismatch");
    }

    std::size_t size() const { return u.size(); }
};

inline void check_field(const RadialGrid& g, const FieldPair& f) {
    if (f.u.size() != g.n || f.v.size() != g.n)
        throw std::invalid_argument("FieldPair does not match grid");
}

inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

namespace detail {
inline void check_interval(double r_lo, double r_hi) {
    if (!(r_lo >= 0.0) || !(r_lo < r_hi))
        throw std::invalid_argument("energy window: need 0 <= r_lo < r_hi");
}
}  // namespace detail

/// Squared localized energy norm: int_{r_lo}^{r_hi} [u_t^2 + (d_r u)^2 + u^2/r^2] r^{D-1} dr.
inline double energy_norm_sq(const RadialGrid& g, const FieldPair& f, double r_lo = 0.0,
                             double r_hi = kInfiniteRadius) {
    check_field(g, f);
    detail::check_interval(r_lo, r_hi);
    const double hi = std::min(r_hi, g.r_max);
    std::vector<double> du = radial_derivative(g, f.u);
    std::vector<double> dens(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        dens[i] = f.v[i] * f.v[i] + du[i] * du[i] + f.u[i] * f.u[i] / (g.r[i] * g.r[i]);
    if (r_lo == 0.0 && r_hi >= g.r_max) return g.integrate(dens);
    return g.integrate_window(dens, r_lo, hi);
}

inline double energy_norm(const RadialGrid& g, const FieldPair& f, double r_lo = 0.0,
                          double r_hi = kInfiniteRadius) {
    return std::sqrt(std::max(0.0, energy_norm_sq(g, f, r_lo, r_hi)));
}

/// Nonlinear energy E = int 1/2 [u_t^2 + (d_r u)^2] - (D-2)/(2D) |u|^{2D/(D-2)}.
inline double nonlinear_energy(const RadialGrid& g, const FieldPair& f, double r_lo = 0.0,
                               double r_hi = kInfiniteRadius) {
    check_field(g, f);
    detail::check_interval(r_lo, r_hi);
    const int D = g.dim;
    const double p1 = 2.0 * D / (D - 2.0);
    const double cnl = (D - 2.0) / (2.0 * D);
    std::vector<double> du = radial_derivative(g, f.u);
    std::vector<double> dens(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        dens[i] = 0.5 * (f.v[i] * f.v[i] + du[i] * du[i]) - cnl * std::pow(std::abs(f.u[i]), p1);
    if (r_lo == 0.0 && r_hi >= g.r_max) return g.integrate(dens);
    return g.integrate_window(dens, r_lo, std::min(r_hi, g.r_max));
}

/// Exterior energy |u|^2_{E(rho, infinity)}.
inline double exterior_energy(const RadialGrid& g, const FieldPair& f, double rho) {
    if (!(rho >= 0.0) || rho >= g.r_max)
        throw std::invalid_argument("exterior_energy: need 0 <= rho < r_max");
    if (rho == 0.0) return energy_norm_sq(g, f);
    return energy_norm_sq(g, f, rho, kInfiniteRadius);
}

// <a | b> for pairs under the r^{D-1} dr measure: slot-wise sum.
inline double pair_inner(const RadialGrid& g, const FieldPair& a, const FieldPair& b) {
    check_field(g, a);
    check_field(g, b);
    return g.inner(a.u, b.u) + g.inner(a.v, b.v);
}

}  // namespace wavelab
