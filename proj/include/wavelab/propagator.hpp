#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wavelab/field.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/math_util.hpp"
#include "wavelab/spectral.hpp"

namespace wavelab {

// ---------------------------------------------------------------------------
// Frequency multiplier of the damped free evolution
// ---------------------------------------------------------------------------

namespace detail {
// f(z) = sinh(sqrt z)/sqrt z for z > 0, sin(sqrt -z)/sqrt -z for z < 0;
// series near 0 removes the branch-point cancellation.
inline double sinhc_signed(double z) {
    if (std::abs(z) < 1e-8) return 1.0 + z / 6.0 + z * z / 120.0;
    if (z > 0.0) {
        const double s = std::sqrt(z);
        return std::sinh(s) / s;
    }
    const double s = std::sqrt(-z);
    return std::sin(s) / s;
}

inline double coshc_signed(double z) {
    if (std::abs(z) < 1e-8) return 1.0 + z / 2.0 + z * z / 24.0;
    if (z > 0.0) return std::cosh(std::sqrt(z));
    return std::cos(std::sqrt(-z));
}
}  // namespace detail

/// The damped-wave symbol e^{-alpha t/2} L(t, xi) with
/// L = sinh(t sqrt(alpha^2/4 - xi^2))/sqrt(...) below the branch point and the
/// sin counterpart above it; both branches meet at t e^{-alpha t/2}.
inline double multiplier_L(double alpha, double t, double xi) {
    if (!(t >= 0.0)) throw std::invalid_argument("multiplier_L: t must be >= 0");
    const double z = (alpha * alpha / 4.0 - xi * xi) * t * t;
    return std::exp(-alpha * t / 2.0) * t * detail::sinhc_signed(z);
}

/// Time derivative of the damped symbol.
inline double multiplier_L_dt(double alpha, double t, double xi) {
    if (!(t >= 0.0)) throw std::invalid_argument("multiplier_L_dt: t must be >= 0");
    const double z = (alpha * alpha / 4.0 - xi * xi) * t * t;
    return std::exp(-alpha * t / 2.0) *
           (detail::coshc_signed(z) - 0.5 * alpha * t * detail::sinhc_signed(z));
}

/// Undamped multiplier L(t, xi) itself (no exponential prefactor).
inline double multiplier_L_raw(double alpha, double t, double xi) {
    const double z = (alpha * alpha / 4.0 - xi * xi) * t * t;
    return t * detail::sinhc_signed(z);
}

// ---------------------------------------------------------------------------
// Exact-in-time free evolution on the discrete radial Laplacian
// ---------------------------------------------------------------------------

/// Diagonalizes the self-adjoint discrete -Delta once and applies the damped
/// multiplier mode by mode; time evolution is then exact for the
/// spatially-discretized linear flow. Serves as the validation oracle for the
/// time-stepped integrator.
class FreePropagator {
  public:
    FreePropagator(const RadialGrid& g, double alpha) : n_(g.n), alpha_(alpha) {
        if (!(alpha >= 0.0)) throw std::invalid_argument("FreePropagator: alpha must be >= 0");
        std::vector<double> zero_potential(g.n, 0.0);
        LinearizedOperator op = linearized_operator(g, 1.0, &zero_potential);
        Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(op.diag.data(), static_cast<long>(g.n));
        Eigen::VectorXd sub = Eigen::Map<const Eigen::VectorXd>(op.sub.data(), static_cast<long>(g.n - 1));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(diag, sub);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("FreePropagator: eigensolve failed");
        evals_ = es.eigenvalues();
        evecs_ = es.eigenvectors();
        sqrt_m_.resize(static_cast<long>(g.n));
        for (std::size_t i = 0; i < g.n; ++i) sqrt_m_[static_cast<long>(i)] = std::sqrt(op.m[i]);
    }

    std::size_t size() const { return n_; }
    double alpha() const { return alpha_; }

    double frequency(std::size_t k) const { return std::sqrt(std::max(0.0, evals_[static_cast<long>(k)])); }

    /// Modal coefficients of a field sample with respect to the discrete basis.
    Eigen::VectorXd analyze(std::span<const double> u) const {
        if (u.size() != n_) throw std::invalid_argument("FreePropagator: size mismatch");
        Eigen::VectorXd y(static_cast<long>(n_));
        for (std::size_t i = 0; i < n_; ++i) y[static_cast<long>(i)] = sqrt_m_[static_cast<long>(i)] * u[i];
        return evecs_.transpose() * y;
    }

    std::vector<double> synthesize(const Eigen::VectorXd& c) const {
        Eigen::VectorXd y = evecs_ * c;
        std::vector<double> u(n_);
        for (std::size_t i = 0; i < n_; ++i) u[i] = y[static_cast<long>(i)] / sqrt_m_[static_cast<long>(i)];
        return u;
    }

    /// Fraction of the squared modal mass carried by the top `tail_fraction`
    /// of the spectrum; used for aliasing rejection.
    double spectral_tail_mass(const FieldPair& f, double tail_fraction = 0.1) const {
        Eigen::VectorXd c0 = analyze(f.u), c1 = analyze(f.v);
        const long n = static_cast<long>(n_);
        const long cut = n - static_cast<long>(tail_fraction * static_cast<double>(n));
        double total = 0.0, tail = 0.0;
        for (long k = 0; k < n; ++k) {
            const double s = c0[k] * c0[k] + c1[k] * c1[k];
            total += s;
            if (k >= cut) tail += s;
        }
        return total > 0.0 ? tail / total : 0.0;
    }

    /// Evolves (u, u_t) by time t under u_tt - Delta u + alpha u_t = 0.
    /// Rejects under-resolved data when `check_aliasing` is set.
    FieldPair evolve(const FieldPair& f, double t, bool check_aliasing = false) const {
        if (f.size() != n_) throw std::invalid_argument("FreePropagator: size mismatch");
        if (check_aliasing && spectral_tail_mass(f) > 1e-6)
            throw std::runtime_error("FreePropagator: spectral tail mass above 1e-6, refine the grid");
        Eigen::VectorXd a = analyze(f.u), b = analyze(f.v);
        Eigen::VectorXd cu(a.size()), cv(a.size());
        for (long k = 0; k < a.size(); ++k) {
            const double xi2 = evals_[k];
            const double z = (alpha_ * alpha_ / 4.0 - xi2) * t * t;
            const double ea = std::exp(-alpha_ * t / 2.0);
            const double Ds = ea * t * detail::sinhc_signed(z);
            const double Dp = ea * (detail::coshc_signed(z) - 0.5 * alpha_ * t * detail::sinhc_signed(z));
            const double Dpp = -alpha_ * Dp - xi2 * Ds;
            // u(t) = Ds (u1 + alpha u0) + Ds' u0, modal form
            cu[k] = Ds * (b[k] + alpha_ * a[k]) + Dp * a[k];
            cv[k] = Dp * (b[k] + alpha_ * a[k]) + Dpp * a[k];
        }
        return FieldPair(synthesize(cu), synthesize(cv));
    }

    /// Smooth low-pass projection: multiplies modal data by a C^2 cutoff equal
    /// to 1 for xi <= xi_on and 0 for xi >= xi_off.
    FieldPair band_limit(const FieldPair& f, double xi_on, double xi_off) const {
        Eigen::VectorXd a = analyze(f.u), b = analyze(f.v);
        for (long k = 0; k < a.size(); ++k) {
            const double xi = std::sqrt(std::max(0.0, evals_[k]));
            const double c = 1.0 - smoothstep_c2((xi - xi_on) / (xi_off - xi_on));
            a[k] *= c;
            b[k] *= c;
        }
        return FieldPair(synthesize(a), synthesize(b));
    }

    FieldPair high_pass(const FieldPair& f, double xi_cut) const {
        Eigen::VectorXd a = analyze(f.u), b = analyze(f.v);
        for (long k = 0; k < a.size(); ++k) {
            const double xi = std::sqrt(std::max(0.0, evals_[k]));
            if (xi <= xi_cut) {
                a[k] = 0.0;
                b[k] = 0.0;
            }
        }
        return FieldPair(synthesize(a), synthesize(b));
    }

    /// Lowest discrete mode as a field (near-DC probe for decay fits).
    FieldPair lowest_mode() const {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<long>(n_));
        c[0] = 1.0;
        return FieldPair(synthesize(c), std::vector<double>(n_, 0.0));
    }

  private:
    std::size_t n_;
    double alpha_;
    Eigen::VectorXd evals_;
    Eigen::MatrixXd evecs_;
    Eigen::VectorXd sqrt_m_;
};

// ---------------------------------------------------------------------------
// Empirical decay-rate measurement
// ---------------------------------------------------------------------------

struct DecayFit {
    double slope = 0.0;
    double residual = 0.0;
    bool reliable = false;
};

/// Least-squares slope of log |D(t) g|_{L^p} against log t over [t_lo, t_hi].
/// p = inf uses the sup norm; otherwise the L^p norm in r^{D-1} dr.
inline DecayFit measure_decay(const RadialGrid& g, const FreePropagator& prop, const FieldPair& data,
                              double p, double t_lo = 10.0, double t_hi = 100.0, int samples = 12) {
    if (!(t_hi > t_lo) || t_lo <= 0.0) throw std::invalid_argument("measure_decay: bad window");
    std::vector<double> lx, ly;
    for (int k = 0; k < samples; ++k) {
        const double t = t_lo * std::pow(t_hi / t_lo, static_cast<double>(k) / (samples - 1));
        FieldPair ft = prop.evolve(data, t);
        double nrm;
        if (std::isinf(p)) {
            nrm = 0.0;
            for (double v : ft.u) nrm = std::max(nrm, std::abs(v));
        } else {
            std::vector<double> dens(g.n);
            for (std::size_t i = 0; i < g.n; ++i) dens[i] = std::pow(std::abs(ft.u[i]), p);
            nrm = std::pow(g.integrate(dens), 1.0 / p);
        }
        if (nrm <= 0.0) throw std::runtime_error("measure_decay: norm vanished");
        lx.push_back(std::log(t));
        ly.push_back(std::log(nrm));
    }
    LinearFit f = linear_fit(lx, ly);
    DecayFit out;
    out.slope = f.slope;
    out.residual = f.residual_rms;
    out.reliable = f.residual_rms <= 0.1;
    return out;
}

}  // namespace wavelab
