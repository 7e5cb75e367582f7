#include <catch2/catch_amalgamated.hpp>

#include "wavelab/integrate.hpp"
#include "wavelab/modulation.hpp"

using namespace wavelab;

namespace {

const SpectralPack& pack6() {
    static SpectralPack p = SpectralPack::build(6, 4096, 64.0);
    return p;
}

}  // namespace

TEST_CASE("scale detection", "[modulation]") {
    RadialGrid g = make_uniform_grid(6, 4096, 200.0);
    // zero field: no candidates
    FieldPair zero(g.n);
    CHECK(detect_scales(g, zero, 3).empty());

    // exact single bubble: one candidate within 20% of lambda = 1
    FieldPair w = multibubble(g, {6, {1}, {1.0}});
    auto c1 = detect_scales(g, w, 3);
    REQUIRE(c1.size() == 1);
    CHECK(std::abs(c1[0].lambda - 1.0) < 0.2);
    CHECK(c1[0].iota == 1);

    // two bubbles at (1, 32), opposite signs
    FieldPair two = multibubble(g, {6, {1, -1}, {1.0, 32.0}});
    auto c2 = detect_scales(g, two, 3);
    REQUIRE(c2.size() == 2);
    CHECK(std::abs(c2[0].lambda - 1.0) < 0.2);
    CHECK(std::abs(c2[1].lambda - 32.0) / 32.0 < 0.2);
    CHECK(c2[0].iota == 1);
    CHECK(c2[1].iota == -1);
}

TEST_CASE("fit recovers exact multibubbles", "[modulation]") {
    RadialGrid g = make_uniform_grid(6, 4096, 200.0);
    FieldPair two = multibubble(g, {6, {1, 1}, {1.0, 16.0}});
    ModulationState ms = fit_modulation(g, two, {1, 1}, {1.15, 14.0}, pack6());
    REQUIRE(ms.converged);
    CHECK(std::abs(ms.lambdas[0] - 1.0) < 1e-8);
    CHECK(std::abs(ms.lambdas[1] - 16.0) / 16.0 < 1e-8);
    CHECK(ms.g_norm < 1e-10);
    CHECK(ms.orth_residual <= 1e-8);
    // d equals the separation penalty alone
    CHECK(ms.d_value == Catch::Approx(std::sqrt(std::pow(1.0 / 16.0, 2.0))).epsilon(1e-6));

    // uniqueness: a different admissible start lands on the same scales
    ModulationState ms2 = fit_modulation(g, two, {1, 1}, {0.9, 19.0}, pack6());
    CHECK(std::abs(ms2.lambdas[0] - ms.lambdas[0]) < 1e-6);
    CHECK(std::abs(ms2.lambdas[1] - ms.lambdas[1]) < 1e-6);
}

TEST_CASE("epsilon-perturbed fit: d window and component oracle", "[modulation]") {
    RadialGrid g = make_uniform_grid(6, 4096, 200.0);
    const SpectralPack& pack = pack6();
    const double eps = 1e-3;
    FieldPair state = multibubble(g, {6, {1}, {1.0}});
    std::vector<double> y(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        y[i] = pack.y_at(g.r[i]);
        state.u[i] += eps * y[i];
    }
    ModulationState ms = fit_modulation(g, state, {1}, {1.0}, pack);
    REQUIRE(ms.converged);
    // <Z, Y> = 0 keeps the fit first-order blind to the perturbation
    CHECK(std::abs(ms.lambdas[0] - 1.0) < 1e-6);
    CHECK(ms.d_value >= eps / 10.0);
    CHECK(ms.d_value <= 10.0 * eps);
    // direct-pairing oracle: a+- = <alpha+-, (eps Y, 0)>
    FieldPair pert(g.n);
    for (std::size_t i = 0; i < g.n; ++i) pert.u[i] = eps * y[i];
    const double ap_oracle = pack.alpha_pair(g, 1.0, +1, pert);
    const double am_oracle = pack.alpha_pair(g, 1.0, -1, pert);
    CHECK(std::abs(ms.a_plus[0] - ap_oracle) <= 0.05 * std::abs(ap_oracle));
    CHECK(std::abs(ms.a_minus[0] - am_oracle) <= 0.05 * std::abs(am_oracle));
}

TEST_CASE("components: normalization, zero and bilinearity", "[modulation]") {
    RadialGrid g = make_uniform_grid(6, 2048, 80.0);
    const SpectralPack& pack = pack6();
    for (double lam : {0.5, 2.0}) {
        FieldPair ym = pack.y_pair(g, lam, -1);
        auto [am, ap] = components(g, ym, {lam}, pack);
        CHECK(am[0] == Catch::Approx(1.0).margin(1e-10));
        CHECK(ap[0] == Catch::Approx(0.0).margin(1e-10));
    }
    FieldPair zero(g.n);
    auto [zm, zp] = components(g, zero, {1.0}, pack);
    CHECK(zm[0] == 0.0);
    CHECK(zp[0] == 0.0);
    // bilinearity
    FieldPair f(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        f.u[i] = std::exp(-sq((g.r[i] - 3.0) / 1.5));
        f.v[i] = 0.2 * std::exp(-sq((g.r[i] - 2.0) / 1.0));
    }
    FieldPair f2(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        f2.u[i] = 2.0 * f.u[i];
        f2.v[i] = 2.0 * f.v[i];
    }
    auto [m1, p1] = components(g, f, {1.0}, pack);
    auto [m2, p2] = components(g, f2, {1.0}, pack);
    CHECK(m2[0] == Catch::Approx(2.0 * m1[0]).epsilon(1e-12));
    CHECK(p2[0] == Catch::Approx(2.0 * p1[0]).epsilon(1e-12));
}

TEST_CASE("degenerate fits are rejected", "[modulation]") {
    RadialGrid g = make_uniform_grid(6, 2048, 200.0);
    FieldPair two = multibubble(g, {6, {1, 1}, {1.0, 16.0}});
    // collided scales give identical orthogonality rows: singular Jacobian
    CHECK_THROWS_AS(fit_modulation(g, two, {1, 1}, {8.0, 8.0}, pack6()), std::runtime_error);
}

TEST_CASE("proximity variants", "[modulation]") {
    // horizon term: K = 0, rho = 0 with lambda_{M+1} = t
    CHECK(proximity_value(6, 0.0, {1.0}, 100.0) == Catch::Approx(1.0 / 100.0));
    CHECK(proximity_value(6, 0.0, {1.0}) == 0.0);
    const double d2 = proximity_value(6, 0.1, {1.0, 16.0});
    CHECK(d2 == Catch::Approx(std::sqrt(0.01 + std::pow(1.0 / 16.0, 2.0))));
    // refined variant: rho localization drops interior mass
    RadialGrid g = make_uniform_grid(6, 2048, 200.0);
    FieldPair res(g.n);
    for (std::size_t i = 0; i < g.n; ++i) res.u[i] = 0.1 * std::exp(-sq((g.r[i] - 5.0) / 2.0));
    const double full = proximity_value_refined(g, res, {1.0}, 0, 0.0);
    CHECK(full == Catch::Approx(std::sqrt(energy_norm_sq(g, res))).epsilon(1e-12));
    // K = 1, rho = 30: all bubbles interior, only the exterior norm remains
    const double ext = proximity_value_refined(g, res, {1.0}, 1, 30.0);
    CHECK(ext < full);
    CHECK(ext == Catch::Approx(std::sqrt(energy_norm_sq(g, res, 30.0, kInfiniteRadius))));
    // finite horizon appends the (rho / horizon) penalty
    const double ext_h = proximity_value_refined(g, res, {1.0}, 1, 30.0, 120.0);
    CHECK(ext_h == Catch::Approx(std::sqrt(energy_norm_sq(g, res, 30.0, kInfiniteRadius) +
                                           std::pow(30.0 / 120.0, 2.0))));
}

TEST_CASE("argmin consistency of the fitted proximity", "[modulation]") {
    // perturbing the fitted scales by +-1% increases |g|_E^2 + ratio penalty
    RadialGrid g = make_uniform_grid(6, 4096, 200.0);
    FieldPair state = multibubble(g, {6, {1, 1}, {1.0, 16.0}});
    // small symmetric perturbation so g != 0 at the optimum
    for (std::size_t i = 0; i < g.n; ++i)
        state.u[i] += 1e-3 * std::exp(-sq((g.r[i] - 3.0) / 1.0));
    ModulationState ms = fit_modulation(g, state, {1, 1}, {1.0, 16.0}, pack6());
    REQUIRE(ms.converged);
    auto objective = [&](const std::vector<double>& lams) {
        std::vector<double> gu(g.n);
        for (std::size_t i = 0; i < g.n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < lams.size(); ++j)
                s += ground_state_scaled(6, lams[j], g.r[i]);
            gu[i] = state.u[i] - s;
        }
        FieldPair res(gu, std::vector<double>(g.n, 0.0));
        return energy_norm_sq(g, res) + std::pow(lams[0] / lams[1], 2.0);
    };
    const double base = objective(ms.lambdas);
    for (double f1 : {0.99, 1.01}) {
        for (double f2 : {0.99, 1.01}) {
            if (f1 == 1.0 && f2 == 1.0) continue;
            CHECK(objective({ms.lambdas[0] * f1, ms.lambdas[1] * f2}) > base);
        }
    }
}

TEST_CASE("refined parameters", "[modulation]") {
    RadialGrid g = make_uniform_grid(6, 2048, 100.0);
    TruncatedQ q = TruncatedQ::build(0.25, 8.0, g);
    // g_t = 0 -> beta = 0
    FieldPair res(g.n);
    for (std::size_t i = 0; i < g.n; ++i) res.u[i] = 0.01 * std::exp(-sq((g.r[i] - 2.0)));
    RefinedParams rp = refined_params(g, res, {1}, {1.0}, q);
    CHECK(rp.beta[0] == 0.0);
    // D = 6 correction: |xi/lambda - 1| <= C (log L)^{2/3} |g|_E, linear in |g|
    auto xi_dev = [&](double amp) {
        FieldPair r2(g.n);
        for (std::size_t i = 0; i < g.n; ++i) r2.u[i] = amp * std::exp(-sq((g.r[i] - 2.0)));
        RefinedParams p = refined_params(g, r2, {1}, {1.0}, q, 32.0);
        return std::abs(p.xi[0] - 1.0);
    };
    const double d1 = xi_dev(1e-3), d2 = xi_dev(1e-2);
    CHECK(d2 / d1 == Catch::Approx(10.0).epsilon(1e-6));  // exactly linear in g
    const double gn = energy_norm(g, FieldPair(std::vector<double>(g.n, 0.0),
                                               std::vector<double>(g.n, 0.0)));
    (void)gn;
    FieldPair probe(g.n);
    for (std::size_t i = 0; i < g.n; ++i) probe.u[i] = 1e-2 * std::exp(-sq((g.r[i] - 2.0)));
    CHECK(d2 <= 2.0 * std::pow(std::log(32.0), 2.0 / 3.0) * energy_norm(g, probe));

    // D = 7: xi == lambda exactly
    RadialGrid g7 = make_uniform_grid(7, 2048, 100.0);
    TruncatedQ q7 = TruncatedQ::build(0.25, 8.0, g7);
    FieldPair res7(g7.n);
    for (std::size_t i = 0; i < g7.n; ++i) {
        res7.u[i] = 0.01 * std::exp(-sq((g7.r[i] - 2.0)));
        res7.v[i] = 0.01 * std::exp(-sq((g7.r[i] - 3.0)));
    }
    RefinedParams rp7 = refined_params(g7, res7, {1}, {1.5}, q7);
    CHECK(rp7.xi[0] == 1.5);
    CHECK(rp7.beta[0] != 0.0);

    // unsupported dimension
    RadialGrid g5 = make_uniform_grid(5, 2048, 100.0);
    FieldPair res5(g5.n);
    CHECK_THROWS_AS(refined_params(g5, res5, {1}, {1.0}, q), std::invalid_argument);
}

TEST_CASE("tracking a stationary run", "[modulation]") {
    RadialGrid g = make_uniform_grid(6, 4096, 200.0);
    FieldPair w = multibubble(g, {6, {1}, {1.0}});
    IntegratorOptions opt;
    opt.alpha = 0.5;
    opt.dt = 0.4 * g.h;
    opt.t_end = 2.0;
    opt.snapshot_cadence = 0.25;
    Trajectory tr = integrate(g, w, opt);
    ModulationTrack mt = track(g, tr, pack6());
    REQUIRE(mt.bubble_count == 1);
    for (const auto& s : mt.samples) {
        REQUIRE(s.fit_ok);
        // scale pinned to 1 and d at the O(h^2) defect floor
        CHECK(std::abs(s.state.lambdas[0] - 1.0) < 1e-3);
        CHECK(s.state.d_value < 5e-3);
    }
}

TEST_CASE("tracked unstable mode grows at mu+", "[modulation][slow]") {
    RadialGrid g = make_uniform_grid(6, 2048, 64.0);
    const SpectralPack& pack = pack6();
    const double alpha = 1.0;
    const double kap = pack.kappa();
    const double mu_plus = 0.5 * (-alpha + std::sqrt(alpha * alpha + 4.0 * kap * kap));
    const double eps = 1e-3;
    FieldPair seeded = multibubble(g, {6, {1}, {1.0}});
    for (std::size_t i = 0; i < g.n; ++i) {
        const double y = pack.y_at(g.r[i]);
        seeded.u[i] += eps * y;
        seeded.v[i] += eps * mu_plus * y;
    }
    IntegratorOptions opt;
    opt.alpha = alpha;
    opt.dt = 0.4 * g.h;
    opt.t_end = 1.0 / mu_plus;
    opt.snapshot_cadence = 0.2;
    Trajectory tr = integrate(g, seeded, opt);
    ModulationTrack mt = track(g, tr, pack);
    REQUIRE(mt.bubble_count == 1);
    // reference track of the unseeded run removes the a+ component of the
    // O(h^2) equilibrium drift, which is comparable to the seed amplitude
    FieldPair base = multibubble(g, {6, {1}, {1.0}});
    IntegratorOptions opt0 = opt;
    opt0.trace_override = tr.boundary_trace;
    Trajectory tr0 = integrate(g, base, opt0);
    ModulationTrack mt0 = track(g, tr0, pack);
    REQUIRE(mt0.bubble_count == 1);
    REQUIRE(mt0.samples.size() == mt.samples.size());
    std::vector<double> ts, la;
    for (std::size_t s = 0; s < mt.samples.size(); ++s) {
        REQUIRE(mt.samples[s].fit_ok);
        ts.push_back(mt.samples[s].t);
        la.push_back(std::log(
            std::abs(mt.samples[s].state.a_plus[0] - mt0.samples[s].state.a_plus[0])));
    }
    LinearFit fit = linear_fit(ts, la);
    INFO("rate " << fit.slope << " vs " << mu_plus);
    CHECK(std::abs(fit.slope - mu_plus) / mu_plus < 0.10);
}

TEST_CASE("lambda velocity is controlled by the kinetic residual", "[modulation][slow]") {
    // |lambda'| <= C |g_t|_{L^2} along a gently excited single-bubble run
    RadialGrid g = make_uniform_grid(6, 2048, 64.0);
    FieldPair state = multibubble(g, {6, {1}, {1.0}});
    for (std::size_t i = 0; i < g.n; ++i)
        state.v[i] += 0.02 * std::exp(-sq((g.r[i] - 3.0) / 1.5));
    IntegratorOptions opt;
    opt.alpha = 0.5;
    opt.dt = 0.4 * g.h;
    opt.t_end = 3.0;
    opt.snapshot_cadence = 0.1;
    Trajectory tr = integrate(g, state, opt);
    ModulationTrack mt = track(g, tr, pack6());
    REQUIRE(mt.bubble_count == 1);
    for (std::size_t s = 1; s + 1 < mt.samples.size(); ++s) {
        REQUIRE(mt.samples[s].fit_ok);
        const double dl = (mt.samples[s + 1].state.lambdas[0] -
                           mt.samples[s - 1].state.lambdas[0]) /
                          (mt.samples[s + 1].t - mt.samples[s - 1].t);
        std::vector<double> k(g.n);
        const FieldPair& gres = mt.samples[s].state.g;
        for (std::size_t i = 0; i < g.n; ++i) k[i] = gres.v[i] * gres.v[i];
        const double gdot = std::sqrt(g.integrate(k));
        CHECK(std::abs(dl) <= 5.0 * gdot + 1e-6);
    }
}

TEST_CASE("d-equivalence band along a run", "[modulation][slow]") {
    // (|g|_E + sum ratio^{(D-2)/4}) / d stays within a fixed band
    RadialGrid g = make_uniform_grid(6, 2048, 200.0);
    FieldPair state = multibubble(g, {6, {1, 1}, {1.0, 16.0}});
    for (std::size_t i = 0; i < g.n; ++i)
        state.u[i] += 5e-3 * std::exp(-sq((g.r[i] - 3.0) / 1.5));
    IntegratorOptions opt;
    opt.alpha = 0.3;
    opt.dt = 0.4 * g.h;
    opt.t_end = 3.0;
    opt.snapshot_cadence = 0.5;
    Trajectory tr = integrate(g, state, opt);
    ModulationTrack mt = track(g, tr, pack6());
    REQUIRE(mt.bubble_count == 2);
    for (const auto& s : mt.samples) {
        REQUIRE(s.fit_ok);
        const double num = s.state.g_norm +
                           std::pow(s.state.lambdas[0] / s.state.lambdas[1], 1.0);  // (D-2)/4 = 1
        const double ratio = num / s.state.d_value;
        CHECK(ratio > 0.3);
        CHECK(ratio < 3.0);
    }
}

TEST_CASE("two same-sign bubbles attract: beta trend", "[modulation][slow]") {
    // sign of the beta_1 drift matches the +omega^2 coefficient for
    // iota_j iota_{j+1} = +1
    RadialGrid g = make_uniform_grid(6, 2048, 200.0);
    FieldPair state = multibubble(g, {6, {1, 1}, {1.0, 16.0}});
    IntegratorOptions opt;
    opt.alpha = 0.3;
    opt.dt = 0.4 * g.h;
    opt.t_end = 6.0;
    opt.snapshot_cadence = 0.5;
    Trajectory tr = integrate(g, state, opt);
    TrackSettings ts;
    ts.q_c = 0.25;
    ts.q_R = 8.0;
    ModulationTrack mt = track(g, tr, pack6(), ts);
    REQUIRE(mt.bubble_count == 2);
    std::vector<double> tts, betas;
    for (const auto& s : mt.samples) {
        REQUIRE(s.fit_ok);
        tts.push_back(s.t);
        betas.push_back(s.state.beta[0]);
    }
    LinearFit fit = linear_fit(tts, betas);
    CHECK(fit.slope > 0.0);
}
