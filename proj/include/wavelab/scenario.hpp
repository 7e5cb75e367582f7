#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavelab/bubbles.hpp"
#include "wavelab/field.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/integrate.hpp"
#include "wavelab/modulation.hpp"
#include "wavelab/report.hpp"
#include "wavelab/spectral.hpp"
#include "wavelab/trapping.hpp"
#include "wavelab/virial.hpp"

namespace wavelab {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Scenario configuration (strict JSON schema, unknown keys rejected)
// ---------------------------------------------------------------------------

struct PerturbationSpec {
    std::string kind;       // "unstable_mode" | "gaussian" | "y_profile"
    double eps = 0.0;
    double center = 0.0;    // gaussian only
    double width = 1.0;
};

struct InitialDataSpec {
    std::string type;               // "multibubble" | "gaussian" | "custom"
    std::vector<int> iotas;
    std::vector<double> lambdas;
    double amplitude = 1.0;
    double center = 0.0, width = 1.0;  // gaussian
    std::vector<double> u, v;       // custom samples
    std::optional<PerturbationSpec> perturbation;
};

struct DiagnosticsSpec {
    bool modulation = false;
    std::size_t max_bubbles = 3;
    bool virial = false;
    double virial_rho = 50.0;
    double virial_rho_slope = 0.0;
    bool exterior = false;
    double exterior_rho = 0.0;      // 0: use rho = t/2
    bool trapping = false;
    bool refined = false;           // beta/xi via the truncated potential
    double q_c = 0.25, q_R = 8.0, xi_L = 32.0;
};

struct Scenario {
    std::string name;
    int dim = 6;
    double alpha = 0.0;
    std::size_t grid_n = 0;
    double r_max = 0.0;
    InitialDataSpec data;
    double t_end = 0.0;
    double dt_factor = 0.4;         // dt = dt_factor * h
    double cadence = 0.1;
    DiagnosticsSpec diagnostics;
    std::optional<std::string> spectral_cache;
};

namespace detail {

inline void require_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ScenarioError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
T get_required(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ScenarioError("missing key '" + key + "' in " + where);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ScenarioError("bad value for '" + key + "' in " + where);
    }
}

}  // namespace detail

inline Scenario parse_scenario(const json& j) {
    detail::require_keys(j,
                         {"schema_version", "name", "dim", "alpha", "grid", "initial_data", "t_end",
                          "dt_factor", "cadence", "diagnostics", "spectral_cache"},
                         "scenario");
    if (detail::get_required<int>(j, "schema_version", "scenario") != kSchemaVersion)
        throw ScenarioError("unsupported schema_version");
    Scenario sc;
    sc.name = detail::get_required<std::string>(j, "name", "scenario");
    sc.dim = detail::get_required<int>(j, "dim", "scenario");
    sc.alpha = detail::get_required<double>(j, "alpha", "scenario");
    const json& jg = j.at("grid");
    detail::require_keys(jg, {"n", "r_max"}, "grid");
    sc.grid_n = detail::get_required<std::size_t>(jg, "n", "grid");
    sc.r_max = detail::get_required<double>(jg, "r_max", "grid");
    sc.t_end = detail::get_required<double>(j, "t_end", "scenario");
    if (j.contains("dt_factor")) sc.dt_factor = j.at("dt_factor").get<double>();
    if (j.contains("cadence")) sc.cadence = j.at("cadence").get<double>();
    if (j.contains("spectral_cache")) sc.spectral_cache = j.at("spectral_cache").get<std::string>();

    const json& jd = j.at("initial_data");
    detail::require_keys(jd,
                         {"type", "iotas", "lambdas", "amplitude", "center", "width", "u", "v",
                          "perturbation"},
                         "initial_data");
    sc.data.type = detail::get_required<std::string>(jd, "type", "initial_data");
    if (jd.contains("iotas")) sc.data.iotas = jd.at("iotas").get<std::vector<int>>();
    if (jd.contains("lambdas")) sc.data.lambdas = jd.at("lambdas").get<std::vector<double>>();
    if (jd.contains("amplitude")) sc.data.amplitude = jd.at("amplitude").get<double>();
    if (jd.contains("center")) sc.data.center = jd.at("center").get<double>();
    if (jd.contains("width")) sc.data.width = jd.at("width").get<double>();
    if (jd.contains("u")) sc.data.u = jd.at("u").get<std::vector<double>>();
    if (jd.contains("v")) sc.data.v = jd.at("v").get<std::vector<double>>();
    if (jd.contains("perturbation")) {
        const json& jp = jd.at("perturbation");
        detail::require_keys(jp, {"kind", "eps", "center", "width"}, "perturbation");
        PerturbationSpec p;
        p.kind = detail::get_required<std::string>(jp, "kind", "perturbation");
        p.eps = detail::get_required<double>(jp, "eps", "perturbation");
        if (jp.contains("center")) p.center = jp.at("center").get<double>();
        if (jp.contains("width")) p.width = jp.at("width").get<double>();
        sc.data.perturbation = p;
    }
    if (j.contains("diagnostics")) {
        const json& jx = j.at("diagnostics");
        detail::require_keys(jx,
                             {"modulation", "max_bubbles", "virial", "virial_rho",
                              "virial_rho_slope", "exterior", "exterior_rho", "trapping", "refined",
                              "q_c", "q_R", "xi_L"},
                             "diagnostics");
        auto& d = sc.diagnostics;
        if (jx.contains("modulation")) d.modulation = jx.at("modulation").get<bool>();
        if (jx.contains("max_bubbles")) d.max_bubbles = jx.at("max_bubbles").get<std::size_t>();
        if (jx.contains("virial")) d.virial = jx.at("virial").get<bool>();
        if (jx.contains("virial_rho")) d.virial_rho = jx.at("virial_rho").get<double>();
        if (jx.contains("virial_rho_slope")) d.virial_rho_slope = jx.at("virial_rho_slope").get<double>();
        if (jx.contains("exterior")) d.exterior = jx.at("exterior").get<bool>();
        if (jx.contains("exterior_rho")) d.exterior_rho = jx.at("exterior_rho").get<double>();
        if (jx.contains("trapping")) d.trapping = jx.at("trapping").get<bool>();
        if (jx.contains("refined")) d.refined = jx.at("refined").get<bool>();
        if (jx.contains("q_c")) d.q_c = jx.at("q_c").get<double>();
        if (jx.contains("q_R")) d.q_R = jx.at("q_R").get<double>();
        if (jx.contains("xi_L")) d.xi_L = jx.at("xi_L").get<double>();
    }
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ScenarioError("cannot open config " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ScenarioError("config parse error in " + path + ": " + e.what());
    }
    return parse_scenario(j);
}

// ---------------------------------------------------------------------------
// Initial data assembly
// ---------------------------------------------------------------------------

inline FieldPair build_initial_data(const RadialGrid& g, const Scenario& sc,
                                    const SpectralPack* pack) {
    const InitialDataSpec& d = sc.data;
    FieldPair f(g.n);
    if (d.type == "multibubble") {
        BubbleFamily fam;
        fam.dim = g.dim;
        fam.iotas = d.iotas;
        fam.lambdas = d.lambdas;
        f = multibubble(g, fam);
        if (d.amplitude != 1.0)
            for (auto& x : f.u) x *= d.amplitude;
    } else if (d.type == "gaussian") {
        for (std::size_t i = 0; i < g.n; ++i)
            f.u[i] = d.amplitude * std::exp(-sq((g.r[i] - d.center) / d.width));
    } else if (d.type == "custom") {
        if (d.u.size() != g.n || (!d.v.empty() && d.v.size() != g.n))
            throw ScenarioError("custom samples do not match the grid");
        f.u = d.u;
        if (!d.v.empty()) f.v = d.v;
    } else {
        throw ScenarioError("unknown initial_data.type '" + d.type + "'");
    }
    if (d.perturbation) {
        const PerturbationSpec& p = *d.perturbation;
        if (p.kind == "unstable_mode" || p.kind == "y_profile") {
            if (!pack) throw ScenarioError("perturbation '" + p.kind + "' needs the spectral pack");
            const double kap = pack->kappa();
            const double mu_plus = 0.5 * (-sc.alpha + std::sqrt(sc.alpha * sc.alpha + 4.0 * kap * kap));
            for (std::size_t i = 0; i < g.n; ++i) {
                const double y = pack->y_at(g.r[i]);
                f.u[i] += p.eps * y;
                if (p.kind == "unstable_mode") f.v[i] += p.eps * mu_plus * y;
            }
        } else if (p.kind == "gaussian") {
            for (std::size_t i = 0; i < g.n; ++i)
                f.u[i] += p.eps * std::exp(-sq((g.r[i] - p.center) / p.width));
        } else {
            throw ScenarioError("unknown perturbation kind '" + p.kind + "'");
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Scenario validation against the integrator invariants
// ---------------------------------------------------------------------------

inline void validate_scenario(const Scenario& sc) {
    if (sc.name.empty()) throw ScenarioError("scenario name must not be empty");
    if (sc.dim < 3) throw ScenarioError("dim must be >= 3");
    if (sc.alpha < 0.0) throw ScenarioError("alpha must be >= 0");
    if (sc.grid_n < 8) throw ScenarioError("grid.n must be >= 8");
    if (!(sc.r_max > 0.0)) throw ScenarioError("grid.r_max must be > 0");
    if (!(sc.t_end > 0.0)) throw ScenarioError("t_end must be > 0");
    if (!(sc.dt_factor > 0.0) || sc.dt_factor > 0.5)
        throw ScenarioError("dt_factor must satisfy 0 < dt_factor <= 0.5 (CFL)");
    if (!(sc.cadence > 0.0)) throw ScenarioError("cadence must be > 0");
}

/// Finite-speed safety: compactly supported data must not reach r_max within
/// t_end. Slowly decaying tails (multibubble) are validated separately by the
/// held-trace closure.
inline void check_finite_speed(const RadialGrid& g, const FieldPair& f, double t_end) {
    double support = 0.0;
    double peak = 0.0;
    for (std::size_t i = 0; i < g.n; ++i)
        peak = std::max({peak, std::abs(f.u[i]), std::abs(f.v[i])});
    if (peak <= 0.0) return;
    for (std::size_t i = g.n; i-- > 0;)
        if (std::abs(f.u[i]) > 1e-8 * peak || std::abs(f.v[i]) > 1e-8 * peak) {
            support = g.r[i];
            break;
        }
    if (support + t_end >= g.r_max && support < 0.9 * g.r_max)
        throw ScenarioError("finite-speed margin violated: support " + format_g17(support) +
                            " + t_end reaches r_max");
}

// ---------------------------------------------------------------------------
// Run orchestration
// ---------------------------------------------------------------------------

struct RunArtifacts {
    std::map<std::string, std::string> files;  // name -> content
    RunStatus status = RunStatus::completed;
    json manifest;
};

inline std::map<std::string, std::string> render_run_plots(
    const std::map<std::string, std::string>& files);

inline FieldPair checkpoint_state(const json& j) {
    FieldPair f(j.at("u").get<std::vector<double>>(), j.at("v").get<std::vector<double>>());
    return f;
}

/// Runs a scenario entirely in memory; the CLI persists the artifact map.
inline RunArtifacts run_scenario(const Scenario& sc) {
    validate_scenario(sc);
    RadialGrid g = make_uniform_grid(sc.dim, sc.grid_n, sc.r_max);

    std::optional<SpectralPack> pack;
    const bool needs_pack = sc.diagnostics.modulation ||
                            (sc.data.perturbation && sc.data.perturbation->kind != "gaussian");
    if (needs_pack) {
        if (sc.spectral_cache && std::filesystem::exists(*sc.spectral_cache)) {
            std::ifstream is(*sc.spectral_cache);
            json jc;
            is >> jc;
            pack = SpectralPack::from_json(jc);
            if (pack->dim() != sc.dim) pack.reset();
        }
        if (!pack) pack = SpectralPack::build(sc.dim);
    }

    FieldPair initial = build_initial_data(g, sc, pack ? &*pack : nullptr);
    if (sc.data.type == "gaussian" || sc.data.type == "custom")
        check_finite_speed(g, initial, sc.t_end);

    IntegratorOptions opt;
    opt.alpha = sc.alpha;
    opt.dt = sc.dt_factor * g.h;
    opt.t_end = sc.t_end;
    opt.snapshot_cadence = sc.cadence;
    Trajectory traj = integrate(g, initial, opt);

    RunArtifacts out;
    out.status = traj.status;

    // -- energy diagnostics (always on) -------------------------------------
    CsvTable energy({"t", "E", "damping_integral", "audit_residual", "enorm", "kinetic_l2"});
    const double E0 = nonlinear_energy(g, traj.states.front());
    for (std::size_t s = 0; s < traj.times.size(); ++s) {
        const FieldPair& f = traj.states[s];
        const double E = nonlinear_energy(g, f);
        std::vector<double> k2(g.n);
        for (std::size_t i = 0; i < g.n; ++i) k2[i] = f.v[i] * f.v[i];
        energy.add_row({traj.times[s], E, traj.damping_integral[s],
                        E - E0 + sc.alpha * traj.damping_integral[s], energy_norm(g, f),
                        std::sqrt(g.integrate(k2))});
    }
    out.files["energy.csv"] = energy.serialize();

    // -- modulation track -----------------------------------------------------
    if (sc.diagnostics.modulation && pack) {
        TrackSettings ts;
        ts.max_bubbles = sc.diagnostics.max_bubbles;
        if (sc.diagnostics.refined) {
            ts.q_c = sc.diagnostics.q_c;
            ts.q_R = sc.diagnostics.q_R;
            ts.xi_L = sc.diagnostics.xi_L;
        }
        ModulationTrack tr = track(g, traj, *pack, ts);
        const std::size_t M = tr.bubble_count;
        std::vector<std::string> cols{"t"};
        for (std::size_t j = 0; j < M; ++j) cols.push_back("lambda_" + std::to_string(j + 1));
        for (std::size_t j = 0; j < M; ++j) {
            cols.push_back("a_minus_" + std::to_string(j + 1));
            cols.push_back("a_plus_" + std::to_string(j + 1));
        }
        for (std::size_t j = 0; j < M; ++j) cols.push_back("beta_" + std::to_string(j + 1));
        for (std::size_t j = 0; j < M; ++j) cols.push_back("xi_" + std::to_string(j + 1));
        cols.push_back("g_norm");
        cols.push_back("d");
        cols.push_back("fit_status");
        CsvTable mod(cols);
        for (const auto& s : tr.samples) {
            if (s.state.lambdas.size() != M) continue;
            std::vector<double> row{s.t};
            for (double l : s.state.lambdas) row.push_back(l);
            for (std::size_t j = 0; j < M; ++j) {
                row.push_back(s.state.a_minus[j]);
                row.push_back(s.state.a_plus[j]);
            }
            for (std::size_t j = 0; j < M; ++j)
                row.push_back(j < s.state.beta.size() ? s.state.beta[j] : 0.0);
            for (std::size_t j = 0; j < M; ++j)
                row.push_back(j < s.state.xi.size() ? s.state.xi[j] : s.state.lambdas[j]);
            row.push_back(s.state.g_norm);
            row.push_back(s.state.d_value);
            row.push_back(s.fit_ok ? 1.0 : 0.0);
            mod.add_row(row);
        }
        out.files["modulation.csv"] = mod.serialize();
    }

    // -- virial diagnostics ---------------------------------------------------
    if (sc.diagnostics.virial) {
        CsvTable vir({"t", "rho", "V_h1", "rhs_h1", "V_l2", "rhs_l2", "omega1", "omega2"});
        for (std::size_t s = 0; s < traj.times.size(); ++s) {
            const double t = traj.times[s];
            const double rho = sc.diagnostics.virial_rho + sc.diagnostics.virial_rho_slope * t;
            Cutoff cut(rho);
            const FieldPair& f = traj.states[s];
            OmegaErrors om = omega_errors(g, f, cut, sc.diagnostics.virial_rho_slope);
            vir.add_row({t, rho, virial_identity_lhs(g, f, cut, VirialIdentity::h1_combined),
                         virial_identity_rhs(g, f, cut, sc.diagnostics.virial_rho_slope, sc.alpha,
                                             VirialIdentity::h1_combined),
                         virial_identity_lhs(g, f, cut, VirialIdentity::l2_combined),
                         virial_identity_rhs(g, f, cut, sc.diagnostics.virial_rho_slope, sc.alpha,
                                             VirialIdentity::l2_combined),
                         om.omega1, om.omega2});
        }
        out.files["virial.csv"] = vir.serialize();
    }

    // -- exterior energy -------------------------------------------------------
    if (sc.diagnostics.exterior) {
        CsvTable ext({"t", "rho", "exterior_energy"});
        for (std::size_t s = 0; s < traj.times.size(); ++s) {
            const double t = traj.times[s];
            double rho = sc.diagnostics.exterior_rho > 0.0 ? sc.diagnostics.exterior_rho : 0.5 * t;
            if (!(rho > 0.0)) rho = g.r[0];
            if (rho >= g.r_max) continue;
            ext.add_row({t, rho, exterior_energy(g, traj.states[s], rho)});
        }
        out.files["exterior.csv"] = ext.serialize();
    }

    // -- trapping functionals ---------------------------------------------------
    if (sc.diagnostics.trapping) {
        CsvTable trap({"t", "K", "J", "Z", "Etilde", "inside_trap"});
        for (std::size_t s = 0; s < traj.times.size(); ++s) {
            const FieldPair& f = traj.states[s];
            TrapReport rep = trap_check(g, f, sc.alpha);
            trap.add_row({traj.times[s], rep.K_value, rep.J_value, z_functional(g, f, sc.alpha),
                          rep.Etilde_value, rep.inside_trap ? 1.0 : 0.0});
        }
        out.files["trapping.csv"] = trap.serialize();
    }

    // -- checkpoint --------------------------------------------------------------
    {
        json ck;
        ck["schema_version"] = kSchemaVersion;
        ck["t"] = traj.t_reached;
        ck["dim"] = sc.dim;
        ck["grid"] = {{"n", sc.grid_n}, {"r_max", sc.r_max}};
        ck["u"] = traj.states.back().u;
        ck["v"] = traj.states.back().v;
        out.files["checkpoint.json"] = ck.dump(0);
    }

    // -- plots ---------------------------------------------------------------------
    for (auto& [name, content] : render_run_plots(out.files)) out.files[name] = content;

    // -- manifest ---------------------------------------------------------------
    json man;
    man["schema_version"] = kSchemaVersion;
    man["scenario"] = sc.name;
    man["status"] = traj.status == RunStatus::completed        ? "completed"
                    : traj.status == RunStatus::blowup_candidate ? "blowup-candidate"
                                                                 : "nan-detected";
    man["t_reached"] = traj.t_reached;
    man["sup_growth"] = traj.sup_growth;
    json arts = json::object();
    for (const auto& [name, content] : out.files)
        arts[name] = format_g17(static_cast<double>(fnv1a64({content.data(), content.size()})));
    man["artifacts"] = arts;
    out.manifest = man;
    out.files["manifest.json"] = man.dump(2) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Plot generation from CSV content (idempotent, deterministic)
// ---------------------------------------------------------------------------

inline std::vector<std::vector<double>> parse_csv_columns(const std::string& content,
                                                          std::vector<std::string>& names) {
    std::istringstream is(content);
    std::string line;
    if (!std::getline(is, line)) return {};
    names.clear();
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) names.push_back(cell);
    std::vector<std::vector<double>> cols(names.size());
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::size_t c = 0;
        while (std::getline(ls, cell, ',') && c < cols.size()) cols[c++].push_back(std::strtod(cell.c_str(), nullptr));
    }
    return cols;
}

inline std::map<std::string, std::string> render_run_plots(
    const std::map<std::string, std::string>& files) {
    std::map<std::string, std::string> plots;
    auto series_from = [&](const std::string& csv, const std::string& xcol,
                           const std::vector<std::string>& ycols, bool prefix_match) {
        std::vector<SvgSeries> out;
        auto it = files.find(csv);
        if (it == files.end()) return out;
        std::vector<std::string> names;
        auto cols = parse_csv_columns(it->second, names);
        std::ptrdiff_t xi = -1;
        for (std::size_t c = 0; c < names.size(); ++c)
            if (names[c] == xcol) xi = static_cast<std::ptrdiff_t>(c);
        if (xi < 0) return out;
        for (std::size_t c = 0; c < names.size(); ++c) {
            bool want = false;
            for (const auto& y : ycols)
                if ((prefix_match && names[c].rfind(y, 0) == 0) || names[c] == y) want = true;
            if (!want) continue;
            SvgSeries s;
            s.label = names[c];
            s.x = cols[static_cast<std::size_t>(xi)];
            s.y = cols[c];
            out.push_back(std::move(s));
        }
        return out;
    };
    if (files.count("energy.csv")) {
        auto s = series_from("energy.csv", "t", {"E", "enorm", "kinetic_l2"}, false);
        if (!s.empty()) plots["energy.svg"] = render_svg("energy vs t", s);
    }
    if (files.count("modulation.csv")) {
        auto sl = series_from("modulation.csv", "t", {"lambda_"}, true);
        if (!sl.empty()) plots["lambda.svg"] = render_svg("bubble scales", sl);
        auto sd = series_from("modulation.csv", "t", {"d", "g_norm"}, false);
        if (!sd.empty()) plots["d.svg"] = render_svg("proximity d(t)", sd, true);
        auto sa = series_from("modulation.csv", "t", {"a_minus_", "a_plus_"}, true);
        if (!sa.empty()) plots["a_pm.svg"] = render_svg("stable/unstable components", sa);
    }
    if (files.count("virial.csv")) {
        auto sv = series_from("virial.csv", "t", {"V_h1", "rhs_h1", "omega1", "omega2"}, false);
        if (!sv.empty()) plots["virial.svg"] = render_svg("virial functional", sv);
    }
    if (files.count("trapping.csv")) {
        auto st = series_from("trapping.csv", "t", {"K", "Etilde"}, false);
        if (!st.empty()) plots["trapping.svg"] = render_svg("trapping functionals", st);
    }
    return plots;
}

}  // namespace wavelab
