#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "wavelab/bubbles.hpp"
#include "wavelab/field.hpp"
#include "wavelab/grid.hpp"

namespace wavelab {

enum class RunStatus {
    completed,
    blowup_candidate,  // sup-norm crossed the guard threshold
    nan_detected,      // aborted; last good state kept
};

/// Quadratic extrapolation of the sample values to r = r_max (the wall sits
/// half a cell beyond the last node).
inline double boundary_trace(const RadialGrid& g, std::span<const double> u) {
    g.check_size(u);
    const std::size_t n = g.n;
    return (15.0 * u[n - 1] - 10.0 * u[n - 2] + 3.0 * u[n - 3]) / 8.0;
}

struct IntegratorOptions {
    double alpha = 0.0;
    double dt = 0.0;                 // must satisfy dt <= 0.5 h
    double t_end = 0.0;
    double snapshot_cadence = 0.1;   // diagnostics stride; 0 disables snapshots
    bool hold_boundary_trace = true; // Dirichlet against the data's own trace
    std::optional<double> trace_override;  // explicit wall value
    bool nonlinear = true;
    double blowup_factor = 1e3;      // flag when E-norm exceeds this multiple of the initial
};

/// Time series produced by a run: snapshots at the diagnostic cadence plus the
/// exactly-accumulated damping integral int_0^t int u_t^2 r^{D-1} dr ds.
struct Trajectory {
    std::vector<double> times;
    std::vector<FieldPair> states;
    std::vector<double> damping_integral;  // aligned with times
    RunStatus status = RunStatus::completed;
    double t_reached = 0.0;
    double boundary_trace = 0.0;
    double sup_growth = 1.0;  // max over run of E-norm relative to initial
};

namespace detail {

struct FlowWorkspace {
    std::vector<double> k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v, tu, tv;
    explicit FlowWorkspace(std::size_t n)
        : k1u(n), k1v(n), k2u(n), k2v(n), k3u(n), k3v(n), k4u(n), k4v(n), tu(n), tv(n) {}
};

inline void flow_rhs(const RadialGrid& g, std::span<const double> u, std::span<const double> v,
                     double alpha, bool nonlinear, double trace, std::span<double> du,
                     std::span<double> dv) {
    laplacian_radial(g, u, dv, OuterClosure::dirichlet, trace);
    if (nonlinear)
        for (std::size_t i = 0; i < g.n; ++i) dv[i] += nonlinearity(g.dim, u[i]);
    for (std::size_t i = 0; i < g.n; ++i) {
        dv[i] -= alpha * v[i];
        du[i] = v[i];
    }
}

}  // namespace detail

/// One classical RK4 stage update of (u, u_t) with u_tt = Delta u - alpha u_t + f(u).
inline FieldPair step(const RadialGrid& g, const FieldPair& state, double dt, double alpha,
                      bool nonlinear = true, double trace = 0.0) {
    check_field(g, state);
    if (!(dt > 0.0) || dt > 0.5 * g.h + 1e-15)
        throw std::invalid_argument("step: CFL requires 0 < dt <= 0.5 h");
    const std::size_t n = g.n;
    detail::FlowWorkspace ws(n);
    FieldPair out = state;
    auto stage = [&](const std::vector<double>& u, const std::vector<double>& v,
                     std::vector<double>& du, std::vector<double>& dv) {
        detail::flow_rhs(g, u, v, alpha, nonlinear, trace, du, dv);
    };
    stage(state.u, state.v, ws.k1u, ws.k1v);
    for (std::size_t i = 0; i < n; ++i) {
        ws.tu[i] = state.u[i] + 0.5 * dt * ws.k1u[i];
        ws.tv[i] = state.v[i] + 0.5 * dt * ws.k1v[i];
    }
    stage(ws.tu, ws.tv, ws.k2u, ws.k2v);
    for (std::size_t i = 0; i < n; ++i) {
        ws.tu[i] = state.u[i] + 0.5 * dt * ws.k2u[i];
        ws.tv[i] = state.v[i] + 0.5 * dt * ws.k2v[i];
    }
    stage(ws.tu, ws.tv, ws.k3u, ws.k3v);
    for (std::size_t i = 0; i < n; ++i) {
        ws.tu[i] = state.u[i] + dt * ws.k3u[i];
        ws.tv[i] = state.v[i] + dt * ws.k3v[i];
    }
    stage(ws.tu, ws.tv, ws.k4u, ws.k4v);
    for (std::size_t i = 0; i < n; ++i) {
        out.u[i] += dt / 6.0 * (ws.k1u[i] + 2.0 * ws.k2u[i] + 2.0 * ws.k3u[i] + ws.k4u[i]);
        out.v[i] += dt / 6.0 * (ws.k1v[i] + 2.0 * ws.k2v[i] + 2.0 * ws.k3v[i] + ws.k4v[i]);
    }
    return out;
}

/// Integrates to t_end (or until a blow-up/NaN flag fires), recording
/// snapshots at the diagnostic cadence. The damping integral is accumulated
/// through the same RK4 stages as the state, so the energy-decay audit closes
/// to time-integration accuracy.
inline Trajectory integrate(const RadialGrid& g, const FieldPair& initial,
                            const IntegratorOptions& opt) {
    check_field(g, initial);
    if (!(opt.dt > 0.0) || opt.dt > 0.5 * g.h + 1e-15)
        throw std::invalid_argument("integrate: CFL requires 0 < dt <= 0.5 h");
    if (!(opt.t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be > 0");

    Trajectory traj;
    if (opt.trace_override)
        traj.boundary_trace = *opt.trace_override;
    else
        traj.boundary_trace = opt.hold_boundary_trace ? boundary_trace(g, initial.u) : 0.0;
    const double trace = traj.boundary_trace;
    const std::size_t n = g.n;

    const std::size_t total_steps = static_cast<std::size_t>(std::ceil(opt.t_end / opt.dt - 1e-12));
    const double dt = opt.t_end / static_cast<double>(total_steps);
    std::size_t stride = total_steps;
    if (opt.snapshot_cadence > 0.0)
        stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.snapshot_cadence / dt)));

    const double e0 = energy_norm(g, initial);
    const double guard = opt.blowup_factor * std::max(e0, 1e-12);

    FieldPair state = initial;
    double damping = 0.0;
    detail::FlowWorkspace ws(n);
    auto kinetic = [&](std::span<const double> v) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += g.w[i] * v[i] * v[i];
        return s;
    };

    traj.times.push_back(0.0);
    traj.states.push_back(state);
    traj.damping_integral.push_back(0.0);

    FieldPair last_good = state;
    double t = 0.0;
    for (std::size_t sn = 0; sn < total_steps; ++sn) {
        auto stage = [&](const std::vector<double>& u, const std::vector<double>& v,
                         std::vector<double>& du, std::vector<double>& dv) {
            detail::flow_rhs(g, u, v, opt.alpha, opt.nonlinear, trace, du, dv);
        };
        stage(state.u, state.v, ws.k1u, ws.k1v);
        const double i1 = kinetic(state.v);
        for (std::size_t i = 0; i < n; ++i) {
            ws.tu[i] = state.u[i] + 0.5 * dt * ws.k1u[i];
            ws.tv[i] = state.v[i] + 0.5 * dt * ws.k1v[i];
        }
        stage(ws.tu, ws.tv, ws.k2u, ws.k2v);
        const double i2 = kinetic(ws.tv);
        for (std::size_t i = 0; i < n; ++i) {
            ws.tu[i] = state.u[i] + 0.5 * dt * ws.k2u[i];
            ws.tv[i] = state.v[i] + 0.5 * dt * ws.k2v[i];
        }
        stage(ws.tu, ws.tv, ws.k3u, ws.k3v);
        const double i3 = kinetic(ws.tv);
        for (std::size_t i = 0; i < n; ++i) {
            ws.tu[i] = state.u[i] + dt * ws.k3u[i];
            ws.tv[i] = state.v[i] + dt * ws.k3v[i];
        }
        stage(ws.tu, ws.tv, ws.k4u, ws.k4v);
        const double i4 = kinetic(ws.tv);
        for (std::size_t i = 0; i < n; ++i) {
            state.u[i] += dt / 6.0 * (ws.k1u[i] + 2.0 * ws.k2u[i] + 2.0 * ws.k3u[i] + ws.k4u[i]);
            state.v[i] += dt / 6.0 * (ws.k1v[i] + 2.0 * ws.k2v[i] + 2.0 * ws.k3v[i] + ws.k4v[i]);
        }
        damping += dt / 6.0 * (i1 + 2.0 * i2 + 2.0 * i3 + i4);
        t = dt * static_cast<double>(sn + 1);

        bool bad = false;
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(state.u[i]) || !std::isfinite(state.v[i])) {
                bad = true;
                break;
            }
        if (bad) {
            traj.status = RunStatus::nan_detected;
            traj.t_reached = t - dt;
            traj.states.push_back(last_good);
            traj.times.push_back(t - dt);
            traj.damping_integral.push_back(damping);
            return traj;
        }
        const double en = energy_norm(g, state);
        traj.sup_growth = std::max(traj.sup_growth, en / std::max(e0, 1e-300));
        if (en > guard) {
            traj.status = RunStatus::blowup_candidate;
            traj.t_reached = t;
            traj.times.push_back(t);
            traj.states.push_back(state);
            traj.damping_integral.push_back(damping);
            return traj;
        }
        last_good = state;
        if ((sn + 1) % stride == 0 || sn + 1 == total_steps) {
            traj.times.push_back(t);
            traj.states.push_back(state);
            traj.damping_integral.push_back(damping);
        }
    }
    traj.t_reached = t;
    return traj;
}

/// Time-averaged kinetic energy over [t_lo, t_hi]; with `self_similar_T` set,
/// the spatial integral is restricted to r <= T - t (backward light cone).
inline double kinetic_time_average(const RadialGrid& g, const Trajectory& traj, double t_lo,
                                   double t_hi, std::optional<double> self_similar_T = {}) {
    if (!(t_hi > t_lo)) throw std::invalid_argument("kinetic_time_average: bad window");
    double acc = 0.0;
    double prev_t = 0.0, prev_k = 0.0;
    bool have_prev = false;
    for (std::size_t s = 0; s < traj.times.size(); ++s) {
        const double t = traj.times[s];
        if (t < t_lo - 1e-12 || t > t_hi + 1e-12) {
            have_prev = false;
            continue;
        }
        std::vector<double> dens(g.n);
        const FieldPair& f = traj.states[s];
        double cap = kInfiniteRadius;
        if (self_similar_T) cap = std::max(0.0, *self_similar_T - t);
        for (std::size_t i = 0; i < g.n; ++i)
            dens[i] = (g.r[i] <= cap) ? f.v[i] * f.v[i] : 0.0;
        const double k = g.integrate(dens);
        if (have_prev) acc += 0.5 * (k + prev_k) * (t - prev_t);
        prev_t = t;
        prev_k = k;
        have_prev = true;
    }
    return acc / (t_hi - t_lo);
}


}  // namespace wavelab
