#pragma once

#include <cmath>
#include <vector>

#include "wavelab/bubbles.hpp"
#include "wavelab/field.hpp"
#include "wavelab/grid.hpp"

namespace wavelab {

/// Nehari functional K(u) = |grad u|^2 - |u|^{p+1}_{p+1}, p = 1 + 4/(D-2).
inline double nehari_K(const RadialGrid& g, std::span<const double> u) {
    g.check_size(u);
    const double p1 = 2.0 * g.dim / (g.dim - 2.0);
    std::vector<double> du = radial_derivative(g, u);
    std::vector<double> dens(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        dens[i] = du[i] * du[i] - std::pow(std::abs(u[i]), p1);
    return g.integrate(dens);
}

/// J(u) = 1/2 |grad u|^2 - 1/(p+1) |u|^{p+1}_{p+1}.
inline double kinetic_J(const RadialGrid& g, std::span<const double> u) {
    g.check_size(u);
    const double p1 = 2.0 * g.dim / (g.dim - 2.0);
    std::vector<double> du = radial_derivative(g, u);
    std::vector<double> dens(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        dens[i] = 0.5 * du[i] * du[i] - std::pow(std::abs(u[i]), p1) / p1;
    return g.integrate(dens);
}

/// Z(u, u_t) = <u_t | u> + alpha |u|_{L^2}^2.
inline double z_functional(const RadialGrid& g, const FieldPair& f, double alpha) {
    check_field(g, f);
    std::vector<double> dens(g.n);
    for (std::size_t i = 0; i < g.n; ++i) dens[i] = f.v[i] * f.u[i] + alpha * f.u[i] * f.u[i];
    return g.integrate(dens);
}

/// Modified energy Etilde = 2E + alpha Z.
inline double etilde(const RadialGrid& g, const FieldPair& f, double alpha) {
    return 2.0 * nonlinear_energy(g, f) + alpha * z_functional(g, f, alpha);
}

/// Expanded form 1/2(|u_t|^2 + alpha^2 |u|^2 + |u_t + alpha u|^2) + 2 J(u);
/// agrees with `etilde` identically and serves as its cross-check.
inline double etilde_expanded(const RadialGrid& g, const FieldPair& f, double alpha) {
    check_field(g, f);
    std::vector<double> dens(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double s = f.v[i] + alpha * f.u[i];
        dens[i] = 0.5 * (f.v[i] * f.v[i] + alpha * alpha * f.u[i] * f.u[i] + s * s);
    }
    return g.integrate(dens) + 2.0 * kinetic_J(g, f.u);
}

struct TrapReport {
    double E_value = 0.0;
    double gradu_norm_sq = 0.0;
    double gradW_norm_sq = 0.0;
    double threshold = 0.0;   // E(W, 0) on this grid
    bool inside_trap = false;
    double K_value = 0.0;
    double J_value = 0.0;
    double Etilde_value = 0.0;
};

namespace detail {
inline double ground_state_energy(const RadialGrid& g) {
    std::vector<double> w(g.n);
    for (std::size_t i = 0; i < g.n; ++i) w[i] = ground_state(g.dim, g.r[i]);
    return kinetic_J(g, w);
}
}  // namespace detail

/// Trapping check: inside iff E < E(W,0) and |grad u|^2 < |grad W|^2, with a
/// 1e-6 relative margin on the strict inequalities against float ties.
inline TrapReport trap_check(const RadialGrid& g, const FieldPair& f, double alpha) {
    check_field(g, f);
    static thread_local std::vector<std::tuple<int, std::size_t, double, double>> cache;
    double eW = 0.0;
    bool found = false;
    for (const auto& [dim, n, rmax, val] : cache)
        if (dim == g.dim && n == g.n && rmax == g.r_max) {
            eW = val;
            found = true;
            break;
        }
    if (!found) {
        eW = detail::ground_state_energy(g);
        cache.emplace_back(g.dim, g.n, g.r_max, eW);
    }
    TrapReport rep;
    rep.threshold = eW;
    rep.E_value = nonlinear_energy(g, f);
    std::vector<double> du = radial_derivative(g, f.u);
    std::vector<double> dens(g.n);
    for (std::size_t i = 0; i < g.n; ++i) dens[i] = du[i] * du[i];
    rep.gradu_norm_sq = g.integrate(dens);
    std::vector<double> w(g.n);
    for (std::size_t i = 0; i < g.n; ++i) w[i] = ground_state(g.dim, g.r[i]);
    std::vector<double> dw = radial_derivative(g, w);
    for (std::size_t i = 0; i < g.n; ++i) dens[i] = dw[i] * dw[i];
    rep.gradW_norm_sq = g.integrate(dens);
    rep.K_value = nehari_K(g, f.u);
    rep.J_value = kinetic_J(g, f.u);
    rep.Etilde_value = etilde(g, f, alpha);
    const double margin = 1e-6;
    rep.inside_trap = rep.E_value < eW * (1.0 - margin) &&
                      rep.gradu_norm_sq < rep.gradW_norm_sq * (1.0 - margin);
    return rep;
}

}  // namespace wavelab
