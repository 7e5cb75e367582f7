#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "wavelab/field.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/quadrature.hpp"

namespace wavelab {

// ---------------------------------------------------------------------------
// Ground state W and its scalings
// ---------------------------------------------------------------------------

/// W(r) = (1 + r^2/(D(D-2)))^{-(D-2)/2}, the radial stationary profile.
inline double ground_state(int D, double r) {
    const double s = r * r / (D * (D - 2.0));
    return std::pow(1.0 + s, -(D - 2.0) / 2.0);
}

/// W_lambda(r) = lambda^{-(D-2)/2} W(r/lambda)  (H^1-invariant scaling).
inline double ground_state_scaled(int D, double lambda, double r) {
    if (!(lambda > 0.0)) throw std::invalid_argument("ground_state_scaled: lambda must be > 0");
    return std::pow(lambda, -(D - 2.0) / 2.0) * ground_state(D, r / lambda);
}

inline double ground_state_deriv(int D, double r) {
    const double s = r * r / (D * (D - 2.0));
    return -(r / D) * std::pow(1.0 + s, -D / 2.0);
}

/// Lambda W with Lambda = r d_r + (D-2)/2, derived from the generator;
/// equals ((D-2)/2)(1-s)(1+s)^{-D/2} with s = r^2/(D(D-2)).
inline double lambda_w(int D, double r) {
    const double s = r * r / (D * (D - 2.0));
    return 0.5 * (D - 2.0) * (1.0 - s) * std::pow(1.0 + s, -D / 2.0);
}

inline double lambda_w_scaled(int D, double lambda, double r) {
    return std::pow(lambda, -(D - 2.0) / 2.0) * lambda_w(D, r / lambda);
}

/// L^2-scaled copies f_{lambda-underline}(r) = lambda^{-D/2} f(r/lambda).
inline double l2_scaled(double lambda, int D, double f_of_r_over_lambda) {
    return std::pow(lambda, -D / 2.0) * f_of_r_over_lambda;
}

/// LambdaUnderline LambdaW, with LambdaUnderline = r d_r + D/2 (analytic).
inline double lambda_under_lambda_w(int D, double r) {
    const double dd = D * (D - 2.0);
    const double s = r * r / dd;
    const double c = 0.5 * (D - 2.0);
    // r d_r acting on (1-s)(1+s)^{-D/2} equals 2s d_ds of the same
    const double base = std::pow(1.0 + s, -D / 2.0);
    const double dds = c * (-base + (1.0 - s) * (-D / 2.0) * base / (1.0 + s));
    return 2.0 * s * dds + 0.5 * D * lambda_w(D, r);
}

// ---------------------------------------------------------------------------
// Nonlinearity f(u) = |u|^{4/(D-2)} u and its derivative
// ---------------------------------------------------------------------------

inline double nonlinearity(int D, double u) {
    if (D == 6) return std::abs(u) * u;
    if (D == 4) return u * u * u;
    return std::pow(std::abs(u), 4.0 / (D - 2.0)) * u;
}

inline double nonlinearity_deriv(int D, double u) {
    const double c = (D + 2.0) / (D - 2.0);
    if (D == 6) return c * std::abs(u);
    if (D == 4) return c * u * u;
    return c * std::pow(std::abs(u), 4.0 / (D - 2.0));
}

// ---------------------------------------------------------------------------
// Discrete dilation generators
// ---------------------------------------------------------------------------

struct GeneratorPair {
    std::vector<double> lam;        // (r d_r + (D-2)/2) f
    std::vector<double> lam_under;  // (r d_r + D/2) f
};

inline GeneratorPair lambda_generators(const RadialGrid& g, std::span<const double> f) {
    g.check_size(f);
    GeneratorPair out;
    std::vector<double> df = radial_derivative(g, f);
    out.lam.resize(g.n);
    out.lam_under.resize(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double rdr = g.r[i] * df[i];
        out.lam[i] = rdr + 0.5 * (g.dim - 2.0) * f[i];
        out.lam_under[i] = rdr + 0.5 * g.dim * f[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Multi-bubble configurations
// ---------------------------------------------------------------------------

/// Signs and strictly increasing scales defining W(iota, lambda).
struct BubbleFamily {
    int dim = 6;
    std::vector<int> iotas;        // each +1 or -1
    std::vector<double> lambdas;   // strictly increasing
};

inline void validate_family(const BubbleFamily& f) {
    if (f.dim < 3) throw std::invalid_argument("BubbleFamily: dimension must be >= 3");
    if (f.iotas.size() != f.lambdas.size())
        throw std::invalid_argument("BubbleFamily: iotas/lambdas size mismatch");
    for (std::size_t j = 0; j < f.iotas.size(); ++j) {
        if (f.iotas[j] != 1 && f.iotas[j] != -1)
            throw std::invalid_argument("BubbleFamily: signs must be +-1");
        if (!(f.lambdas[j] > 0.0)) throw std::invalid_argument("BubbleFamily: scales must be > 0");
        if (j > 0 && !(f.lambdas[j] > f.lambdas[j - 1]))
            throw std::invalid_argument("BubbleFamily: scales must be strictly increasing");
    }
}

inline std::vector<double> separation_ratios(const BubbleFamily& f) {
    std::vector<double> out;
    for (std::size_t j = 0; j + 1 < f.lambdas.size(); ++j)
        out.push_back(f.lambdas[j] / f.lambdas[j + 1]);
    return out;
}

struct MultibubbleResult {
    FieldPair field;
    double tail_energy_fraction = 0.0;  // energy-norm fraction outside r_max
    bool tail_warning = false;
};

/// Samples (sum_j iota_j W_{lambda_j}, 0). The largest bubble's tail beyond
/// r_max is quantified; a fraction above `tail_tol` sets the warning flag.
inline MultibubbleResult multibubble_checked(const RadialGrid& g, const BubbleFamily& fam,
                                             double tail_tol = 1e-2) {
    validate_family(fam);
    if (fam.dim != g.dim) throw std::invalid_argument("multibubble: dimension mismatch");
    MultibubbleResult res;
    res.field = FieldPair(g.n);
    for (std::size_t j = 0; j < fam.lambdas.size(); ++j)
        for (std::size_t i = 0; i < g.n; ++i)
            res.field.u[i] += fam.iotas[j] * ground_state_scaled(g.dim, fam.lambdas[j], g.r[i]);
    if (!fam.lambdas.empty()) {
        const int D = g.dim;
        // energy-norm tail of W_lambda beyond r_max vs the whole line, by quadrature
        auto dens = [&](double lam) {
            return [=](double r) {
                const double du = std::pow(lam, -(D - 2.0) / 2.0) * ground_state_deriv(D, r / lam) / lam;
                const double u = ground_state_scaled(D, lam, r);
                return (du * du + u * u / (r * r)) * std::pow(r, D - 1);
            };
        };
        const double lam = fam.lambdas.back();
        ImproperOptions opt;
        const double total = integrate_improper(dens(lam), opt);
        ImproperOptions tail_opt;
        tail_opt.r_lo = g.r_max;
        tail_opt.first_panel = g.r_max;
        const double tail = integrate_improper(dens(lam), tail_opt);
        res.tail_energy_fraction = std::sqrt(std::max(0.0, tail / total));
        res.tail_warning = res.tail_energy_fraction > tail_tol;
    }
    return res;
}

inline FieldPair multibubble(const RadialGrid& g, const BubbleFamily& fam) {
    return multibubble_checked(g, fam).field;
}

// ---------------------------------------------------------------------------
// Nonlinear interaction between bubbles
// ---------------------------------------------------------------------------

/// f_i = f(W(iota, lambda)) - sum_j iota_j f(W_{lambda_j}) on the grid.
inline std::vector<double> interaction_field(const RadialGrid& g, const BubbleFamily& fam) {
    validate_family(fam);
    std::vector<double> out(g.n, 0.0);
    if (fam.lambdas.empty()) return out;
    for (std::size_t i = 0; i < g.n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < fam.lambdas.size(); ++j)
            sum += fam.iotas[j] * ground_state_scaled(g.dim, fam.lambdas[j], g.r[i]);
        double fi = nonlinearity(g.dim, sum);
        for (std::size_t j = 0; j < fam.lambdas.size(); ++j)
            fi -= fam.iotas[j] *
                  nonlinearity(g.dim, ground_state_scaled(g.dim, fam.lambdas[j], g.r[i]));
        out[i] = fi;
    }
    return out;
}

/// <LambdaW_{lambda_j} | f_i>, evaluated grid-free by segmented quadrature
/// over the whole half-line (analytic profiles, no truncation error).
inline double interaction_bracket(const BubbleFamily& fam, std::size_t j) {
    validate_family(fam);
    if (j >= fam.lambdas.size()) throw std::invalid_argument("interaction_bracket: bad index");
    if (fam.lambdas.size() == 1) return 0.0;
    const int D = fam.dim;
    auto integrand = [&](double r) {
        double sum = 0.0;
        for (std::size_t k = 0; k < fam.lambdas.size(); ++k)
            sum += fam.iotas[k] * ground_state_scaled(D, fam.lambdas[k], r);
        double fi = nonlinearity(D, sum);
        for (std::size_t k = 0; k < fam.lambdas.size(); ++k)
            fi -= fam.iotas[k] * nonlinearity(D, ground_state_scaled(D, fam.lambdas[k], r));
        return lambda_w_scaled(D, fam.lambdas[j], r) * fi * std::pow(r, D - 1);
    };
    ImproperOptions opt;
    opt.r_hi = 1e9 * fam.lambdas.back();
    opt.panels_per_decade = 6;
    opt.first_panel = 1e-6 * fam.lambdas.front();
    return integrate_improper(integrand, opt);
}

/// Leading-order prediction of the bracket:
/// iota_{j-1} C_D (lambda_{j-1}/lambda_j)^{(D-2)/2} - iota_{j+1} C_D (lambda_j/lambda_{j+1})^{(D-2)/2}.
inline double interaction_bracket_leading(const BubbleFamily& fam, std::size_t j) {
    validate_family(fam);
    if (j >= fam.lambdas.size()) throw std::invalid_argument("interaction_bracket_leading: bad index");
    const int D = fam.dim;
    const double cd = (D - 2.0) / (2.0 * D) * std::pow(D * (D - 2.0), D / 2.0);
    const double expn = (D - 2.0) / 2.0;
    double out = 0.0;
    if (j > 0) out += fam.iotas[j - 1] * cd * std::pow(fam.lambdas[j - 1] / fam.lambdas[j], expn);
    if (j + 1 < fam.lambdas.size())
        out -= fam.iotas[j + 1] * cd * std::pow(fam.lambdas[j] / fam.lambdas[j + 1], expn);
    return out;
}

// ---------------------------------------------------------------------------
// Closed-form constants of the ground state
// ---------------------------------------------------------------------------

/// Closed-form constants attached to W in the radial r^{D-1} dr convention.
///
/// lambda_w_l2sq is the closed form
///   2 (D^2-4) (D(D-2))^{D/2} / (D^2 (D-4)) * Gamma(1+D/2)^2 / Gamma(D),
/// which direct quadrature of int (LambdaW)^2 r^{D-1} dr reproduces; see the
/// unit tests for the cross-check. Diverges logarithmically at D = 4.
struct GroundStateConstants {
    int dim = 0;
    double lambda_w_l2sq = 0.0;   // |LambdaW|_{L^2}^2, D >= 5
    double interaction_const = 0.0;  // (D-2)/(2D) (D(D-2))^{D/2}
    double omega_sq = 0.0;           // interaction_const / lambda_w_l2sq
};

inline double interaction_constant(int D) {
    return (D - 2.0) / (2.0 * D) * std::pow(D * (D - 2.0), D / 2.0);
}

inline double lambda_w_l2sq_closed(int D) {
    if (D < 5)
        throw std::invalid_argument("lambda_w_l2sq_closed: diverges for D = 4 (use the truncated form)");
    const double g1 = std::tgamma(1.0 + D / 2.0);
    return 2.0 * (D * D - 4.0) * std::pow(D * (D - 2.0), D / 2.0) / (D * D * (D - 4.0)) * g1 * g1 /
           std::tgamma(static_cast<double>(D));
}

inline GroundStateConstants ground_state_constants(int D) {
    GroundStateConstants c;
    c.dim = D;
    c.interaction_const = interaction_constant(D);
    c.lambda_w_l2sq = lambda_w_l2sq_closed(D);
    c.omega_sq = c.interaction_const / c.lambda_w_l2sq;
    return c;
}

/// int_0^R (LambdaW)^2 r^{D-1} dr by quadrature (any D; finite for all R).
inline double lambda_w_l2sq_truncated(int D, double R) {
    auto f = [D](double r) { return sq(lambda_w(D, r)) * std::pow(r, D - 1); };
    ImproperOptions opt;
    opt.r_hi = R;
    return integrate_improper(f, opt);
}

/// Coefficient of log R in int_0^R (LambdaW)^2 r^3 dr for D = 4: the square of
/// the tail coefficient (D-2)/2 (D(D-2))^{(D-2)/2} = 8, i.e. 64.
inline double lambda_w_log_slope_coeff(int D) {
    const double c = 0.5 * (D - 2.0) * std::pow(D * (D - 2.0), (D - 2.0) / 2.0);
    return c * c;
}

}  // namespace wavelab
