#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "wavelab/field.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/math_util.hpp"
#include "wavelab/quadrature.hpp"

namespace wavelab {

// ---------------------------------------------------------------------------
// Radial cutoff chi: 1 on r <= rho, 0 on r >= 2 rho, quintic C^2 blend
// ---------------------------------------------------------------------------

struct Cutoff {
    double rho = 1.0;

    explicit Cutoff(double rho_) : rho(rho_) {
        if (!(rho > 0.0)) throw std::invalid_argument("Cutoff: rho must be > 0");
    }

    // profile in the scaled variable x = r/rho
    static double chi(double x) { return 1.0 - smoothstep_c2(x - 1.0); }
    static double x_chi_prime(double x) { return -x * smoothstep_c2_deriv(x - 1.0); }

    double operator()(double r) const { return chi(r / rho); }
    double x_dchi(double r) const { return x_chi_prime(r / rho); }
};

// ---------------------------------------------------------------------------
// Truncated potential q_{c,R}
// ---------------------------------------------------------------------------

/// q' = r s(r) with s a C^4 plateau in log r: s = 1 on [1/R, R], 0 outside
/// [1/Rtilde, Rtilde], log Rtilde = log R + K/c. q is anchored by q(R) = R^2/2
/// so q = r^2/2 exactly on the plateau. The blend constant K is chosen by a
/// doubling search until all six required properties verify on the grid.
class TruncatedQ {
  public:
    double c = 0.0;
    double R = 0.0;
    double blend_K = 0.0;
    double log_R_tilde = 0.0;  // Rtilde itself may overflow a double

    // samples on the build grid
    std::vector<double> q, qp, qpp, lap_q, bilap_q;

    static TruncatedQ build(double c, double R, const RadialGrid& g) {
        if (!(c > 0.0) || !(R > 1.0))
            throw std::invalid_argument("TruncatedQ: need c > 0 and R > 1");
        for (double K = 4.0; K <= 512.0; K *= 2.0) {
            TruncatedQ q = assemble(c, R, K, g);
            if (q.verify(g) == 0) return q;
        }
        TruncatedQ last = assemble(c, R, 512.0, g);
        const int bad = last.verify(g);
        throw std::runtime_error("TruncatedQ: property (" + std::to_string(bad) +
                                 ") cannot be satisfied for these (c, R)");
    }

    // -- analytic profile pieces (y = log r) --------------------------------

    double s_of(double r) const { return s_derivs(std::log(r))[0]; }

    double q_prime(double r) const { return r * s_of(r); }

    double q_second(double r) const {
        auto d = s_derivs(std::log(r));
        return d[0] + d[1];
    }

    double lap_q_at(double r, int dim) const {
        auto d = s_derivs(std::log(r));
        return dim * d[0] + d[1];
    }

    double bilap_q_at(double r, int dim) const {
        auto d = s_derivs(std::log(r));
        const double gy = dim * d[1] + d[2];
        const double gyy = dim * d[2] + d[3];
        return (gyy + (dim - 2.0) * gy) / (r * r);
    }

    double qp_over_r_deriv(double r) const {
        return s_derivs(std::log(r))[1] / r;  // (q'/r)' = s'
    }

    double q_at(double r) const {
        // integrate q' = rho s(rho) from the nearest plateau anchor
        if (r >= 1.0 / R && r <= R) return 0.5 * r * r;
        if (r > R) return 0.5 * R * R + integrate_gl([this](double x) { return q_prime(x); }, R, r, 32);
        return 0.5 / (R * R) - integrate_gl([this](double x) { return q_prime(x); }, r, 1.0 / R, 32);
    }

    /// Returns 0 if all six properties hold on the grid, else the index of the
    /// first violated property (1-based, following the construction contract).
    int verify(const RadialGrid& g) const {
        const int D = g.dim;
        for (std::size_t i = 0; i < g.n; ++i) {
            const double r = g.r[i];
            if (r >= 1.0 / R && r <= R) {
                if (std::abs(q[i] - 0.5 * r * r) > 1e-10 * std::max(1.0, r * r)) return 1;
            }
            if (std::log(r) >= log_R_tilde || std::log(r) <= -log_R_tilde) {
                if (std::abs(qp[i]) > 1e-14) return 2;
            }
            if (std::abs(qp[i]) > 1.000001 * r) return 3;
            if (std::abs(qpp[i]) > 4.0) return 3;
            if (lap_q[i] < -c * (1.0 + 1e-9)) return 4;
            if (std::abs(bilap_q[i]) > c / (r * r) * (1.0 + 1e-9)) return 5;
            if (std::abs(qp_over_r_deriv(r)) > c / r * (1.0 + 1e-9)) return 6;
        }
        return 0;
    }

  private:
    static TruncatedQ assemble(double c, double R, double K, const RadialGrid& g) {
        TruncatedQ out;
        out.c = c;
        out.R = R;
        out.blend_K = K;
        out.log_R_tilde = std::log(R) + K / c;
        out.q.resize(g.n);
        out.qp.resize(g.n);
        out.qpp.resize(g.n);
        out.lap_q.resize(g.n);
        out.bilap_q.resize(g.n);
        // cumulative q from the plateau outward in both directions
        for (std::size_t i = 0; i < g.n; ++i) {
            const double r = g.r[i];
            out.qp[i] = out.q_prime(r);
            out.qpp[i] = out.q_second(r);
            out.lap_q[i] = out.lap_q_at(r, g.dim);
            out.bilap_q[i] = out.bilap_q_at(r, g.dim);
        }
        double acc = 0.0;
        std::optional<std::size_t> anchor;
        for (std::size_t i = 0; i < g.n; ++i)
            if (g.r[i] >= 1.0 / R && g.r[i] <= R) {
                out.q[i] = 0.5 * g.r[i] * g.r[i];
                anchor = i;
            }
        if (!anchor) throw std::invalid_argument("TruncatedQ: grid does not reach the plateau");
        // below the plateau
        for (std::size_t i = g.n; i-- > 0;) {
            if (g.r[i] >= 1.0 / R) continue;
            const double right = (g.r[i + 1] < 1.0 / R) ? g.r[i + 1] : 1.0 / R;
            const double qright = (g.r[i + 1] < 1.0 / R) ? out.q[i + 1] : 0.5 / (R * R);
            acc = qright - integrate_gl([&](double x) { return out.q_prime(x); }, g.r[i], right, 16);
            out.q[i] = acc;
        }
        // above the plateau
        for (std::size_t i = 0; i < g.n; ++i) {
            if (g.r[i] <= R) continue;
            const double left = (i > 0 && g.r[i - 1] > R) ? g.r[i - 1] : R;
            const double qleft = (i > 0 && g.r[i - 1] > R) ? out.q[i - 1] : 0.5 * R * R;
            out.q[i] = qleft + integrate_gl([&](double x) { return out.q_prime(x); }, left, g.r[i], 16);
        }
        return out;
    }

    // s and its first three log-derivatives
    std::array<double, 4> s_derivs(double y) const {
        const double yR = std::log(R);
        const double ell = blend_K / c;
        std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
        double t, sgn;
        if (y >= -yR && y <= yR) {
            out[0] = 1.0;
            return out;
        }
        if (y > yR) {
            t = (y - yR) / ell;   // falling blend
            sgn = -1.0;
        } else {
            t = (-yR - y) / ell;  // rising side, mirrored
            sgn = -1.0;
        }
        if (t >= 1.0) return out;
        out[0] = 1.0 - smoothstep_c4(t);
        const double d1 = -smoothstep_c4_d1(t) / ell;
        const double d2 = -smoothstep_c4_d2(t) / (ell * ell);
        const double d3 = -smoothstep_c4_d3(t) / (ell * ell * ell);
        if (y > yR) {
            out[1] = d1;
            out[2] = d2;
            out[3] = d3;
        } else {
            // mirrored variable: dy = -ell dt
            out[1] = -d1;
            out[2] = d2;
            out[3] = -d3;
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Localized virial operators A(lambda), A-underline(lambda)
// ---------------------------------------------------------------------------

struct VirialOps {
    std::vector<double> a;        // A(lambda) g
    std::vector<double> a_under;  // A_underline(lambda) g
};

/// A(lambda)g   = q'(r/lambda) d_r g + (D-2)/(2D) (1/lambda) (Delta q)(r/lambda) g
/// A_ul(lambda)g= q'(r/lambda) d_r g + 1/(2 lambda)      (Delta q)(r/lambda) g
inline VirialOps virial_ops(const RadialGrid& g, const TruncatedQ& q, double lambda,
                            std::span<const double> field) {
    if (!(lambda > 0.0)) throw std::invalid_argument("virial_ops: lambda must be > 0");
    g.check_size(field);
    VirialOps out;
    out.a.resize(g.n);
    out.a_under.resize(g.n);
    std::vector<double> df = radial_derivative(g, field);
    const int D = g.dim;
    for (std::size_t i = 0; i < g.n; ++i) {
        const double x = g.r[i] / lambda;
        const double qp = q.q_prime(x);
        const double lq = q.lap_q_at(x, D);
        out.a[i] = qp * df[i] + (D - 2.0) / (2.0 * D) * lq / lambda * field[i];
        out.a_under[i] = qp * df[i] + 0.5 * lq / lambda * field[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Virial functionals and cutoff error terms
// ---------------------------------------------------------------------------

enum class VirialWeight {
    h1,  // r d_r + (D-2)/2   (H^1-invariant generator)
    l2,  // r d_r + D/2       (L^2-invariant generator)
};

/// V = <u_t | chi_rho (r d_r u + c u)> with c from the weight variant;
/// `exp_rate` multiplies by e^{exp_rate * t_shift} for the finite-time variant.
inline double virial_value(const RadialGrid& g, const FieldPair& f, const Cutoff& cut,
                           VirialWeight weight = VirialWeight::h1, double exp_rate = 0.0,
                           double t_shift = 0.0) {
    check_field(g, f);
    const double cw = (weight == VirialWeight::h1) ? 0.5 * (g.dim - 2.0) : 0.5 * g.dim;
    std::vector<double> du = radial_derivative(g, f.u);
    std::vector<double> dens(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        dens[i] = f.v[i] * cut(g.r[i]) * (g.r[i] * du[i] + cw * f.u[i]);
    const double v = g.integrate(dens);
    return exp_rate == 0.0 ? v : std::exp(exp_rate * t_shift) * v;
}

struct OmegaErrors {
    double omega1 = 0.0;
    double omega2 = 0.0;
};

/// The two cutoff error integrals, exactly as displayed:
///   Omega1 = -(rho'/rho) int u_t r u_r (x chi')  - 1/2 int (u_t^2 + u_r^2)(x chi')
///            + (D-2)/(2D) int |u|^{2D/(D-2)} (x chi')
///   Omega2 = -(rho'/rho) int u_t u (x chi') - int u_r (u/r)(x chi')
inline OmegaErrors omega_errors(const RadialGrid& g, const FieldPair& f, const Cutoff& cut,
                                double rho_prime, bool nonlinear = true) {
    check_field(g, f);
    const int D = g.dim;
    const double p1 = 2.0 * D / (D - 2.0);
    std::vector<double> du = radial_derivative(g, f.u);
    std::vector<double> d1(g.n), d2(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double xs = cut.x_dchi(g.r[i]);
        if (xs == 0.0) {
            d1[i] = 0.0;
            d2[i] = 0.0;
            continue;
        }
        d1[i] = -(rho_prime / cut.rho) * f.v[i] * g.r[i] * du[i] * xs -
                0.5 * (f.v[i] * f.v[i] + du[i] * du[i]) * xs;
        if (nonlinear) d1[i] += 0.5 * (D - 2.0) / D * std::pow(std::abs(f.u[i]), p1) * xs;
        d2[i] = -(rho_prime / cut.rho) * f.v[i] * f.u[i] * xs - du[i] * f.u[i] / g.r[i] * xs;
    }
    OmegaErrors out;
    out.omega1 = g.integrate(d1);
    out.omega2 = g.integrate(d2);
    return out;
}

enum class VirialIdentity { rdr, plain_u, h1_combined, l2_combined };  // (2.5)-(2.8)

/// Right-hand side of the selected identity at one time slice; the caller
/// differentiates the matching virial value in time and compares. Pass
/// nonlinear = false when auditing the free (f == 0) flow.
inline double virial_identity_rhs(const RadialGrid& g, const FieldPair& f, const Cutoff& cut,
                                  double rho_prime, double alpha, VirialIdentity which,
                                  bool nonlinear = true) {
    check_field(g, f);
    const int D = g.dim;
    const double p1 = 2.0 * D / (D - 2.0);
    std::vector<double> du = radial_derivative(g, f.u);
    std::vector<double> kin(g.n), pot(g.n), vr(g.n), vu(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double ch = cut(g.r[i]);
        kin[i] = f.v[i] * f.v[i] * ch;
        pot[i] = (du[i] * du[i] - (nonlinear ? std::pow(std::abs(f.u[i]), p1) : 0.0)) * ch;
        vr[i] = f.v[i] * ch * g.r[i] * du[i];
        vu[i] = f.v[i] * ch * f.u[i];
    }
    const double K = g.integrate(kin);
    const double P = g.integrate(pot);
    const double Vr = g.integrate(vr);
    const double Vu = g.integrate(vu);
    const OmegaErrors om = omega_errors(g, f, cut, rho_prime, nonlinear);
    switch (which) {
        case VirialIdentity::rdr:
            return -0.5 * D * K + 0.5 * (D - 2.0) * P - alpha * Vr + om.omega1;
        case VirialIdentity::plain_u:
            return K - P - alpha * Vu + om.omega2;
        case VirialIdentity::h1_combined:
            return -K - alpha * (Vr + 0.5 * (D - 2.0) * Vu) + om.omega1 + 0.5 * (D - 2.0) * om.omega2;
        case VirialIdentity::l2_combined:
            return -P - alpha * (Vr + 0.5 * D * Vu) + om.omega1 + 0.5 * D * om.omega2;
    }
    throw std::logic_error("virial_identity_rhs: bad variant");
}

/// Matching left-hand-side functional whose time derivative the identity
/// describes.
inline double virial_identity_lhs(const RadialGrid& g, const FieldPair& f, const Cutoff& cut,
                                  VirialIdentity which) {
    check_field(g, f);
    std::vector<double> du = radial_derivative(g, f.u);
    const int D = g.dim;
    double cw = 0.0;
    switch (which) {
        case VirialIdentity::rdr: cw = 0.0; break;
        case VirialIdentity::plain_u: cw = -1.0; break;  // marker: <u_t | chi u>
        case VirialIdentity::h1_combined: cw = 0.5 * (D - 2.0); break;
        case VirialIdentity::l2_combined: cw = 0.5 * D; break;
    }
    std::vector<double> dens(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double ch = cut(g.r[i]);
        if (which == VirialIdentity::plain_u)
            dens[i] = f.v[i] * ch * f.u[i];
        else
            dens[i] = f.v[i] * ch * (g.r[i] * du[i] + cw * f.u[i]);
    }
    return g.integrate(dens);
}

}  // namespace wavelab
