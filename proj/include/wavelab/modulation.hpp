#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavelab/bubbles.hpp"
#include "wavelab/field.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/integrate.hpp"
#include "wavelab/spectral.hpp"
#include "wavelab/virial.hpp"

namespace wavelab {

// ---------------------------------------------------------------------------
// Scale detection heuristic
// ---------------------------------------------------------------------------

struct ScaleCandidate {
    int iota = 1;
    double lambda = 1.0;
    double strength = 0.0;  // peak height of |u| r^{(D-2)/2}
};

/// Local maxima of r -> |u(r)| r^{(D-2)/2}; W_lambda peaks at r = lambda sqrt(D(D-2)),
/// which calibrates the reported scale. Returns at most max_bubbles candidates,
/// sorted by increasing scale.
inline std::vector<ScaleCandidate> detect_scales(const RadialGrid& g, const FieldPair& f,
                                                 std::size_t max_bubbles) {
    check_field(g, f);
    std::vector<double> prof(g.n);
    double peak = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
        prof[i] = std::abs(f.u[i]) * std::pow(g.r[i], (g.dim - 2.0) / 2.0);
        peak = std::max(peak, prof[i]);
    }
    std::vector<ScaleCandidate> out;
    if (peak <= 0.0) return out;
    const double floor = 1e-3 * peak;
    const double calib = std::sqrt(g.dim * (g.dim - 2.0));
    for (std::size_t i = 2; i + 2 < g.n; ++i) {
        if (prof[i] < floor) continue;
        if (prof[i] >= prof[i - 1] && prof[i] >= prof[i - 2] && prof[i] > prof[i + 1] &&
            prof[i] > prof[i + 2]) {
            ScaleCandidate c;
            c.lambda = g.r[i] / calib;
            c.iota = f.u[i] >= 0.0 ? 1 : -1;
            c.strength = prof[i];
            out.push_back(c);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const ScaleCandidate& a, const ScaleCandidate& b) { return a.strength > b.strength; });
    if (out.size() > max_bubbles) out.resize(max_bubbles);
    std::sort(out.begin(), out.end(),
              [](const ScaleCandidate& a, const ScaleCandidate& b) { return a.lambda < b.lambda; });
    return out;
}

// ---------------------------------------------------------------------------
// Static modulation fit
// ---------------------------------------------------------------------------

struct ModulationState {
    std::vector<int> iotas;
    std::vector<double> lambdas;
    FieldPair g;                    // residual u - W(iota, lambda)
    std::vector<double> a_minus, a_plus;
    std::vector<double> beta, xi;
    double d_value = 0.0;
    double g_norm = 0.0;            // |g|_E
    double orth_residual = 0.0;     // max_j |<Z_j, g>| / (|Z_j| |g|)
    int iterations = 0;
    bool converged = false;
};

struct FitOptions {
    int max_iter = 50;
    double step_limit = 0.5;        // max relative lambda change per iteration
    double horizon = kInfiniteRadius;  // lambda_{M+1} for the d ratio sum
};

namespace detail {

// dense solve by Gaussian elimination with partial pivoting (M is tiny)
inline std::vector<double> solve_dense(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t rr = col + 1; rr < n; ++rr)
            if (std::abs(A[rr][col]) > std::abs(A[piv][col])) piv = rr;
        if (std::abs(A[piv][col]) < 1e-300)
            throw std::runtime_error("modulation fit: singular Jacobian (bubble collision)");
        std::swap(A[piv], A[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t rr = col + 1; rr < n; ++rr) {
            const double f = A[rr][col] / A[col][col];
            for (std::size_t cc = col; cc < n; ++cc) A[rr][cc] -= f * A[col][cc];
            b[rr] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= A[i][j] * x[j];
        x[i] = s / A[i][i];
    }
    return x;
}

inline std::vector<double> multibubble_u(const RadialGrid& g, const std::vector<int>& iotas,
                                         const std::vector<double>& lambdas) {
    std::vector<double> out(g.n, 0.0);
    for (std::size_t j = 0; j < lambdas.size(); ++j)
        for (std::size_t i = 0; i < g.n; ++i)
            out[i] += iotas[j] * ground_state_scaled(g.dim, lambdas[j], g.r[i]);
    return out;
}

}  // namespace detail

/// d(v) from fitted parameters: (|g|_E^2 + sum_j (lambda_j/lambda_{j+1})^{(D-2)/2})^{1/2},
/// with lambda_{M+1} = horizon (infinite horizon drops the last ratio, the
/// K = 0, rho = 0 static case).
inline double proximity_value(int dim, double g_norm, const std::vector<double>& lambdas,
                              double horizon = kInfiniteRadius) {
    double s = g_norm * g_norm;
    const double expn = (dim - 2.0) / 2.0;
    for (std::size_t j = 0; j + 1 < lambdas.size(); ++j)
        s += std::pow(lambdas[j] / lambdas[j + 1], expn);
    if (std::isfinite(horizon) && !lambdas.empty())
        s += std::pow(lambdas.back() / horizon, expn);
    return std::sqrt(s);
}

/// Refined proximity d_K(; rho): localized energy norm on (rho, infinity)
/// plus consecutive ratios along [rho (as lambda_K), lambda_{K+1..N}, horizon].
inline double proximity_value_refined(const RadialGrid& g, const FieldPair& residual,
                                      const std::vector<double>& lambdas, std::size_t K, double rho,
                                      double horizon = kInfiniteRadius) {
    const double gn2 = (rho > 0.0) ? energy_norm_sq(g, residual, rho, kInfiniteRadius)
                                   : energy_norm_sq(g, residual);
    std::vector<double> seq;
    if (K >= 1 && rho > 0.0) seq.push_back(rho);
    for (std::size_t j = std::min(K, lambdas.size()); j < lambdas.size(); ++j)
        seq.push_back(lambdas[j]);
    if (std::isfinite(horizon)) seq.push_back(horizon);
    double s = gn2;
    const double expn = (g.dim - 2.0) / 2.0;
    for (std::size_t j = 0; j + 1 < seq.size(); ++j) s += std::pow(seq[j] / seq[j + 1], expn);
    return std::sqrt(s);
}

/// Gauss-Newton solve of the M orthogonality conditions <Z_{lambda_j-ul} | g> = 0
/// in the scales, holding the signs fixed. Throws on a singular Jacobian;
/// reports non-convergence through the returned state.
inline ModulationState fit_modulation(const RadialGrid& g, const FieldPair& state,
                                      std::vector<int> iotas, std::vector<double> lambdas,
                                      const SpectralPack& pack, const FitOptions& opt = {}) {
    check_field(g, state);
    if (iotas.size() != lambdas.size() || lambdas.empty())
        throw std::invalid_argument("fit_modulation: need matching nonempty iotas/lambdas");
    if (pack.dim() != g.dim) throw std::invalid_argument("fit_modulation: pack dimension mismatch");
    const std::size_t M = lambdas.size();

    auto z_under_vec = [&](double lam) {
        std::vector<double> z(g.n);
        for (std::size_t i = 0; i < g.n; ++i) z[i] = pack.z_under_at(lam, g.r[i]);
        return z;
    };
    auto residual_u = [&](const std::vector<double>& lams) {
        std::vector<double> gu = detail::multibubble_u(g, iotas, lams);
        for (std::size_t i = 0; i < g.n; ++i) gu[i] = state.u[i] - gu[i];
        return gu;
    };

    ModulationState ms;
    ms.iotas = iotas;
    int it = 0;
    bool converged = false;
    for (; it < opt.max_iter; ++it) {
        std::vector<double> gu = residual_u(lambdas);
        std::vector<double> F(M);
        std::vector<std::vector<double>> zs(M);
        for (std::size_t j = 0; j < M; ++j) {
            zs[j] = z_under_vec(lambdas[j]);
            F[j] = g.inner(zs[j], gu);
        }
        // Jacobian: d F_j / d lambda_k
        std::vector<std::vector<double>> J(M, std::vector<double>(M, 0.0));
        for (std::size_t j = 0; j < M; ++j) {
            const double dl = 1e-6 * lambdas[j];
            std::vector<double> zp = z_under_vec(lambdas[j] + dl);
            std::vector<double> zm = z_under_vec(lambdas[j] - dl);
            double dterm = 0.0;
            for (std::size_t i = 0; i < g.n; ++i)
                dterm += g.w[i] * (zp[i] - zm[i]) / (2.0 * dl) * gu[i];
            J[j][j] += dterm;
            for (std::size_t k = 0; k < M; ++k) {
                double cross = 0.0;
                for (std::size_t i = 0; i < g.n; ++i)
                    cross += g.w[i] * zs[j][i] * lambda_w_scaled(g.dim, lambdas[k], g.r[i]);
                J[j][k] += iotas[k] * cross / lambdas[k];
            }
        }
        std::vector<double> negF(M);
        for (std::size_t j = 0; j < M; ++j) negF[j] = -F[j];
        std::vector<double> dl = detail::solve_dense(J, negF);
        double max_rel = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
            const double lim = opt.step_limit * lambdas[j];
            dl[j] = std::clamp(dl[j], -lim, lim);
            lambdas[j] += dl[j];
            if (!(lambdas[j] > 0.0))
                throw std::runtime_error("modulation fit: scale driven non-positive");
            max_rel = std::max(max_rel, std::abs(dl[j]) / lambdas[j]);
        }
        if (max_rel < 1e-13) {
            converged = true;
            break;
        }
    }
    // sorted scales are part of the contract
    for (std::size_t j = 0; j + 1 < M; ++j)
        if (!(lambdas[j] < lambdas[j + 1]))
            throw std::runtime_error("modulation fit: scales crossed (degenerate fit)");

    ms.lambdas = lambdas;
    ms.iterations = it + 1;
    ms.converged = converged;
    std::vector<double> gu = residual_u(lambdas);
    ms.g = FieldPair(gu, state.v);
    ms.g_norm = energy_norm(g, ms.g);
    // relative orthogonality residual; the state norm floors the denominator
    // so exact-multibubble inputs (g ~ 0) do not divide by zero
    const double state_scale = energy_norm(g, state);
    double orth = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
        std::vector<double> z = z_under_vec(lambdas[j]);
        const double zn = std::sqrt(g.inner(z, z));
        const double denom = zn * std::max(ms.g_norm, 1e-8 * state_scale + 1e-300);
        orth = std::max(orth, std::abs(g.inner(z, gu)) / denom);
    }
    ms.orth_residual = orth;
    ms.d_value = proximity_value(g.dim, ms.g_norm, lambdas, opt.horizon);
    ms.a_minus.resize(M);
    ms.a_plus.resize(M);
    for (std::size_t j = 0; j < M; ++j) {
        ms.a_minus[j] = pack.alpha_pair(g, lambdas[j], -1, ms.g);
        ms.a_plus[j] = pack.alpha_pair(g, lambdas[j], +1, ms.g);
    }
    return ms;
}

/// Stable/unstable components a_j^{+-} = <alpha^{+-}_{lambda_j} | g>.
inline std::pair<std::vector<double>, std::vector<double>> components(const RadialGrid& g,
                                                                      const FieldPair& res,
                                                                      const std::vector<double>& lambdas,
                                                                      const SpectralPack& pack) {
    std::vector<double> am(lambdas.size()), ap(lambdas.size());
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
        am[j] = pack.alpha_pair(g, lambdas[j], -1, res);
        ap[j] = pack.alpha_pair(g, lambdas[j], +1, res);
    }
    return {am, ap};
}

// ---------------------------------------------------------------------------
// Refined parameters xi_j, beta_j (D >= 6)
// ---------------------------------------------------------------------------

struct RefinedParams {
    std::vector<double> xi;
    std::vector<double> beta;
};

/// beta_j = -(iota_j/|LambdaW|^2) <LambdaW_{lambda_j-ul} | g_t>
///          - (1/|LambdaW|^2) <A_ul(lambda_j) g | g_t>;
/// xi_j = lambda_j for D >= 7, lambda_j - (iota_j/|LambdaW|^2)
///          <chi(./L lambda_j) LambdaW_{lambda_j-ul} | g> for D = 6.
inline RefinedParams refined_params(const RadialGrid& g, const FieldPair& res,
                                    const std::vector<int>& iotas,
                                    const std::vector<double>& lambdas, const TruncatedQ& q,
                                    double L = 32.0) {
    if (g.dim < 6)
        throw std::invalid_argument("refined_params: defined for D >= 6 only");
    const double lw2 = lambda_w_l2sq_closed(g.dim);
    RefinedParams out;
    out.xi.resize(lambdas.size());
    out.beta.resize(lambdas.size());
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
        const double lam = lambdas[j];
        std::vector<double> lwu(g.n);
        for (std::size_t i = 0; i < g.n; ++i)
            lwu[i] = std::pow(lam, -g.dim / 2.0) * lambda_w(g.dim, g.r[i] / lam);
        const double t1 = g.inner(lwu, res.v);
        VirialOps ops = virial_ops(g, q, lam, res.u);
        const double t2 = g.inner(ops.a_under, res.v);
        out.beta[j] = -iotas[j] / lw2 * t1 - t2 / lw2;
        if (g.dim >= 7) {
            out.xi[j] = lam;
        } else {
            std::vector<double> cutlw(g.n);
            for (std::size_t i = 0; i < g.n; ++i)
                cutlw[i] = Cutoff::chi(g.r[i] / (L * lam)) * lwu[i];
            out.xi[j] = lam - iotas[j] / lw2 * g.inner(cutlw, res.u);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory-level tracking
// ---------------------------------------------------------------------------

struct TrackSettings {
    std::size_t max_bubbles = 3;
    double warm_step_limit = 0.1;   // per-sample trust region on lambda
    int redetect_after_failures = 10;
    std::optional<double> q_c;      // enable refined params when set
    std::optional<double> q_R;
    double xi_L = 32.0;
};

struct TrackSample {
    double t = 0.0;
    ModulationState state;
    bool fit_ok = false;
    bool redetected = false;
};

struct ModulationTrack {
    std::vector<TrackSample> samples;
    std::size_t bubble_count = 0;
    std::vector<std::string> events;  // re-detection log, one line per event
};

inline ModulationTrack track(const RadialGrid& g, const Trajectory& traj, const SpectralPack& pack,
                             const TrackSettings& settings = {}) {
    ModulationTrack tr;
    std::optional<TruncatedQ> q;
    if (settings.q_c && settings.q_R)
        q = TruncatedQ::build(*settings.q_c, *settings.q_R, g);

    std::vector<int> iotas;
    std::vector<double> lambdas;
    int failures = 0;
    for (std::size_t s = 0; s < traj.times.size(); ++s) {
        const FieldPair& state = traj.states[s];
        if (lambdas.empty()) {
            auto cands = detect_scales(g, state, settings.max_bubbles);
            iotas.clear();
            lambdas.clear();
            for (const auto& c : cands) {
                iotas.push_back(c.iota);
                lambdas.push_back(c.lambda);
            }
            if (!lambdas.empty())
                tr.events.push_back("t=" + format_g17(traj.times[s]) + " detected " +
                                    std::to_string(lambdas.size()) + " bubble(s)");
        }
        TrackSample sample;
        sample.t = traj.times[s];
        if (lambdas.empty()) {
            tr.samples.push_back(std::move(sample));
            continue;
        }
        FitOptions fo;
        fo.step_limit = settings.warm_step_limit;
        try {
            sample.state = fit_modulation(g, state, iotas, lambdas, pack, fo);
            sample.fit_ok = sample.state.converged;
        } catch (const std::exception&) {
            sample.fit_ok = false;
        }
        if (sample.fit_ok) {
            lambdas = sample.state.lambdas;
            failures = 0;
            if (q) {
                RefinedParams rp =
                    refined_params(g, sample.state.g, iotas, lambdas, *q, settings.xi_L);
                sample.state.xi = std::move(rp.xi);
                sample.state.beta = std::move(rp.beta);
            }
        } else if (++failures > settings.redetect_after_failures) {
            lambdas.clear();
            iotas.clear();
            failures = 0;
            sample.redetected = true;
            tr.events.push_back("t=" + format_g17(traj.times[s]) +
                                " persistent fit failure, re-detection triggered");
        }
        tr.samples.push_back(std::move(sample));
    }
    tr.bubble_count = lambdas.size();
    return tr;
}

}  // namespace wavelab
