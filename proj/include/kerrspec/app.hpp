// app.hpp - command dispatch for the kerrspec tool: configuration, sweeps, CSV/SVG output
// and the run manifest.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <gsl/gsl_version.h>

#include "json.hpp"
#include "kerrspec/circuit.hpp"
#include "kerrspec/config.hpp"
#include "kerrspec/csv.hpp"
#include "kerrspec/fitting.hpp"
#include "kerrspec/semiclassical.hpp"
#include "kerrspec/spectrum.hpp"
#include "kerrspec/svg.hpp"

namespace kerrspec::app {

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"one-tone", "two-tone", "duffing", "kpo", "flux-map", "fit", "lock"};
    return c;
}

struct Request {
    std::string command;                // empty: taken from the config
    std::optional<std::string> config_path;
    std::optional<std::string> preset;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<bool> svg;
};

struct Outcome {
    int exit_code{0};
    std::vector<std::string> files;
    std::vector<std::string> warnings;
    nlohmann::ordered_json manifest;
};

namespace detail {

using config::Axis;
using config::Resolver;
using json = nlohmann::ordered_json;

struct Context {
    Resolver& r;
    std::filesystem::path out;
    bool svg{true};
    unsigned threads{1};
    std::uint64_t seed{0};
    Outcome& outcome;
    json solver = json::object();

    void emit(const std::string& name, const std::string& content) {
        const auto path = (out / name).string();
        csv::write_file(path, content);
        outcome.files.push_back(path);
    }
    void warn(const std::string& w) { outcome.warnings.push_back(w); }
};

inline DeviceParams resolve_device(Resolver& r) {
    if (r.config().find("device.flux")) r.number("device.flux");
    const double f_ghz = r.number("device.omega_r_ghz");
    const double kerr_mhz = r.number("device.kerr_mhz");
    const double ke_mhz = r.number("device.kappa_e_mhz");
    const double ki_mhz = r.number("device.kappa_i_mhz");
    auto d = DeviceParams::from_lab(f_ghz, kerr_mhz, ke_mhz, ki_mhz);
    d.validate();
    return d;
}

inline Axis default_detuning_axis(const DeviceParams& d) {
    const double k = to_mhz(d.kappa_tot());
    const double kerr = to_mhz(d.kerr);
    const double lo = std::min(-3.0 * k, 1.7 * kerr - 1.5 * k);
    const double hi = std::max(2.0 * k, 1.7 * kerr + 1.5 * k);
    return {lo, hi, 150};
}

inline std::vector<double> mhz_axis(const Axis& a) {
    auto v = a.values();
    for (double& x : v) x = mhz(x);
    return v;
}

inline ConvergenceOptions resolve_convergence(Resolver& r) {
    ConvergenceOptions c;
    c.tol = r.number("solver.tol", c.tol);
    c.n_start = static_cast<int>(r.integer("solver.n_start", c.n_start));
    c.n_cap = static_cast<int>(r.integer("solver.n_cap", c.n_cap));
    if (!(c.tol > 0.0) || c.n_start < 1 || c.n_cap < c.n_start)
        throw config::ConfigError("solver: need tol > 0 and 1 <= n_start <= n_cap");
    return c;
}

inline Method parse_method(const std::string& s) {
    for (Method m : {Method::Auto, Method::Linear, Method::Moments, Method::Semiclassical})
        if (s == to_string(m)) return m;
    throw config::ConfigError("solver.method: unknown method '" + s + "' (auto, linear, moments, semiclassical)");
}

inline BranchRule parse_branch(const std::string& s) {
    for (BranchRule b : {BranchRule::Low, BranchRule::High, BranchRule::SweepUp, BranchRule::SweepDown})
        if (s == to_string(b)) return b;
    throw config::ConfigError("solver.branch: unknown rule '" + s + "' (low, high, sweep-up, sweep-down)");
}

inline void finish_spectrum(Context& ctx, const SpectrumGrid& g, const std::string& name, const std::string& title) {
    ctx.emit(name + ".csv", csv::spectrum_to_string(g));
    if (ctx.svg) ctx.emit(name + ".svg", svg::heatmap(g, title));
    int max_order = 0;
    for (int o : g.order) max_order = std::max(max_order, o);
    ctx.solver["method"] = g.method;
    ctx.solver["max_truncation_order"] = max_order;
    ctx.solver["points"] = g.gamma.size();
    ctx.solver["failed_points"] = g.failed_points();
    std::size_t shown = 0;
    for (std::size_t k = 0; k < g.gamma.size(); ++k) {
        if (g.converged[k]) continue;
        if (shown++ < 10) {
            const std::size_t id = k % g.n_det(), ip = k / g.n_det();
            ctx.warn("point (detuning " + csv::format_number(to_mhz(g.detunings[id])) + " MHz, power " +
                     csv::format_number(g.powers[ip]) + " dBm) " +
                     (g.error[k].empty() ? std::string("did not converge") : "failed: " + g.error[k]));
        }
    }
    if (shown > 10) ctx.warn(std::to_string(shown - 10) + " further points flagged (see converged column)");
}

inline void run_one_tone(Context& ctx, bool duffing) {
    auto& r = ctx.r;
    const DeviceParams d = resolve_device(r);
    const auto det = mhz_axis(r.axis("axes.detuning_mhz", default_detuning_axis(d)));
    const auto pow = r.axis("axes.power_dbm", Axis{-150.0, -120.0, 40}).values();
    SweepOptions opt;
    opt.method = duffing ? Method::Semiclassical : parse_method(r.text("solver.method", "auto"));
    const Method resolved = resolve_method(d, opt.method);
    if (resolved == Method::Moments) opt.convergence = resolve_convergence(r);
    if (resolved == Method::Semiclassical) opt.branch = parse_branch(r.text("solver.branch", "sweep-down"));
    opt.threads = ctx.threads;
    r.reject_unused();
    const auto g = sweep_spectrum(d, det, pow, opt);
    const std::string name = duffing ? "duffing" : "one-tone";
    finish_spectrum(ctx, g, name, name + " |Gamma|");
}

inline void run_two_tone(Context& ctx) {
    auto& r = ctx.r;
    const DeviceParams d = resolve_device(r);
    const auto det = mhz_axis(r.axis("axes.detuning_mhz", default_detuning_axis(d)));
    const auto pow = r.axis("axes.drive_power_dbm", Axis{-140.0, -126.0, 15}).values();
    SweepOptions opt;
    opt.method = Method::TwoTone;
    opt.drive_detuning = mhz(r.number("two_tone.drive_detuning_mhz", 0.0));
    opt.probe_power_dbm = r.number("two_tone.probe_power_dbm", -145.0);
    opt.convergence = resolve_convergence(r);
    opt.threads = ctx.threads;
    r.reject_unused();
    const auto g = sweep_spectrum(d, det, pow, opt);
    finish_spectrum(ctx, g, "two-tone", "two-tone |Gamma| (probe) vs drive power");
}

inline double threshold_beta(const DeviceParams& d, double det) {
    return std::sqrt(det * det + 0.25 * d.kappa_tot() * d.kappa_tot());
}

inline void run_kpo(Context& ctx) {
    auto& r = ctx.r;
    const DeviceParams d = resolve_device(r);
    const double det = mhz(r.number("kpo.pump_detuning_mhz", -120.0));
    const double th = to_mhz(threshold_beta(d, det));
    const auto betas = r.axis("kpo.beta_mhz", Axis{0.0, 2.0 * th, 101}).values();
    r.reject_unused();
    csv::Table t("beta_hz,state,re_alpha,im_alpha,photons,stable");
    for (double b : betas) {
        const auto states = kpo_steady_states(d, PumpSpec{det, mhz(b), std::nullopt});
        for (std::size_t i = 0; i < states.size(); ++i) {
            const cplx a = states[i].amplitude;
            t.add_row({b * 1e6, static_cast<double>(i), a.real(), a.imag(), std::norm(a), states[i].stable ? 1.0 : 0.0});
        }
    }
    ctx.solver["threshold_beta_hz"] = th * 1e6;
    ctx.emit("kpo.csv", t.str());
}

inline void run_lock(Context& ctx) {
    auto& r = ctx.r;
    const DeviceParams d = resolve_device(r);
    const double det = mhz(r.number("kpo.pump_detuning_mhz", -120.0));
    const double th = to_mhz(threshold_beta(d, det));
    const double beta = mhz(r.number("kpo.beta_mhz", 1.01 * th));
    const double p_s = r.number("lock.power_dbm", -89.0);
    const double phase0 = r.number("lock.phase_rad", 0.0);
    const auto phases_deg = r.axis("lock.phase_deg", Axis{0.0, 360.0, 13}).values();
    const long trials = r.integer("lock.trials", 1000);
    LockingOptions o;
    o.ramp_time = 1e-6 * r.number("lock.ramp_us", 1e6 * 0.25 / d.kappa_tot());
    o.hold_time = 1e-6 * r.number("lock.hold_us", 1e6 * 3.0 / d.kappa_tot());
    o.dt = 1e-9 * r.number("lock.dt_ns", 0.0);
    o.noise = r.number("lock.noise", -1.0);
    o.classify_fraction = r.number("lock.classify_fraction", 0.5);
    o.threads = ctx.threads;
    r.reject_unused();
    if (trials < 1) throw config::ConfigError("lock.trials must be at least 1");

    const double e_s = std::abs(tone_amplitude(ToneSpec{d.omega_r + det, p_s, 0.0}));
    PumpSpec pump{det, beta, LockingTone{e_s, phase0}};
    std::vector<double> phases(phases_deg.size());
    for (std::size_t i = 0; i < phases.size(); ++i) phases[i] = phases_deg[i] * std::numbers::pi / 180.0;
    const auto pts = simulate_locking(d, pump, phases, ctx.seed, static_cast<int>(trials), o);
    csv::Table t("phase_rad,n_zero,n_pi,n_unclassified,p_pi");
    for (const auto& p : pts)
        t.add_row({p.phase, static_cast<double>(p.n_zero), static_cast<double>(p.n_pi),
                   static_cast<double>(p.n_unclassified), p.p_pi()});
    ctx.solver["integrator"] = o.noise == 0.0 ? "dopri5 (deterministic)" : "stochastic Heun, additive noise";
    ctx.solver["noise_sigma"] = o.noise < 0.0 ? default_locking_noise(d) : o.noise;
    ctx.solver["rng"] = "mt19937_64 per trial, seed_seq(seed lo, seed hi, phase index, trial index)";
    ctx.emit("lock.csv", t.str());
}

inline CircuitParams resolve_circuit(Resolver& r) {
    CircuitParams cp;
    cp.length = 1e-3 * r.number("circuit.length_mm", cp.length * 1e3);
    cp.phase_velocity = constants::c_light * r.number("circuit.phase_velocity_c", cp.phase_velocity / constants::c_light);
    cp.z0 = r.number("circuit.z0_ohm", cp.z0);
    cp.c_in = 1e-15 * r.number("circuit.c_in_ff", cp.c_in * 1e15);
    cp.c_shunt = 1e-15 * r.number("circuit.c_shunt_ff", cp.c_shunt * 1e15);
    cp.i_c = 1e-6 * r.number("circuit.i_c_ua", cp.i_c * 1e6);
    cp.c_j = 1e-15 * r.number("circuit.c_j_ff", cp.c_j * 1e15);
    cp.squid_position = r.number("circuit.squid_position", cp.squid_position);
    cp.validate();
    return cp;
}

inline void run_flux_map(Context& ctx) {
    auto& r = ctx.r;
    const CircuitParams cp = resolve_circuit(r);
    const auto flux = r.axis("axes.flux", Axis{0.0, 0.45, 46}).values();
    const bool with_kerr = r.flag("circuit.with_kerr", true);
    r.reject_unused();
    FluxCurve c;
    for (double f : flux) {
        try {
            const double w = resonance_frequency(cp, FluxBias{f});
            c.f.push_back(f);
            c.omega_r.push_back(w);
            c.kerr.push_back(with_kerr ? kerr_coefficient(cp, FluxBias{f}) : 0.0);
        } catch (const ModelFailure& e) {
            ctx.warn("f = " + csv::format_number(f) + ": " + e.what());
        }
    }
    if (c.f.empty()) throw ModelFailure("no flux point produced a mode");
    ctx.emit("flux-map.csv", csv::flux_to_string(c));
}

inline json fit_json(const FitResult& f) {
    json out = json::object();
    json params = json::object();
    for (const auto& p : f.params) params[p.name] = {{"value", p.value}, {"sigma", p.sigma}};
    out["params"] = params;
    out["residual_rms"] = f.residual_rms;
    out["converged"] = f.converged;
    if (!f.note.empty()) out["note"] = f.note;
    return out;
}

inline void run_fit(Context& ctx) {
    auto& r = ctx.r;
    const std::string kind = r.text("fit.kind");
    const std::string input = r.text("fit.input");
    json result = json::object();
    result["kind"] = kind;

    if (kind == "linear") {
        r.reject_unused();
        const auto fit = fit_linear_resonance(csv::read_trace(input));
        result["fit"] = fit_json(fit);
    } else if (kind == "kerr-power") {
        const DeviceParams d = resolve_device(r);
        KerrPowerOptions o;
        const std::string model = r.text("fit.model", "moments");
        if (model == "moments") o.model = Method::Moments;
        else if (model == "semiclassical") o.model = Method::Semiclassical;
        else throw config::ConfigError("fit.model: expected moments or semiclassical");
        if (o.model == Method::Moments) o.convergence = resolve_convergence(r);
        else o.branch = parse_branch(r.text("solver.branch", "sweep-down"));
        o.offset_guess_db = r.number("fit.offset_guess_db", 0.0);
        o.threads = ctx.threads;
        r.reject_unused();
        const auto fit = fit_kerr_and_power(csv::read_spectrum(input), d, o);
        result["fit"] = fit_json(fit);
    } else if (kind == "two-photon" || kind == "transition-12") {
        const DeviceParams d = resolve_device(r);
        const double noise = r.number("fit.noise", 0.0);
        const auto g = csv::read_spectrum(input);
        std::optional<std::size_t> col;
        if (r.config().find("fit.column_power_dbm")) {
            const double p = r.number("fit.column_power_dbm");
            std::size_t best = 0;
            for (std::size_t i = 1; i < g.n_pow(); ++i)
                if (std::abs(g.powers[i] - p) < std::abs(g.powers[best] - p)) best = i;
            col = best;
        } else {
            col = first_secondary_dominant_column(g, d.kappa_tot());
        }
        r.reject_unused();
        if (!col) throw NotFound("no column where the secondary feature dominates");
        const auto tr = column_trace(g, *col, d.omega_r);
        const double k = kind == "two-photon" ? kerr_from_two_photon_dip(tr, d.omega_r, noise)
                                              : kerr_from_12_transition(tr, d.omega_r, d.kappa_tot(), noise);
        result["column_power_dbm"] = g.powers[*col];
        result["kerr_hz"] = to_hz(k);
    } else if (kind == "critical-current") {
        const CircuitParams cp = resolve_circuit(r);
        const bool fit_cj = r.flag("fit.fit_c_j", false);
        r.reject_unused();
        const auto fit = fit_critical_current(csv::read_flux(input), cp, fit_cj);
        result["fit"] = fit_json(fit.fit);
    } else {
        throw config::ConfigError("fit.kind: expected linear, kerr-power, two-photon, transition-12 or critical-current");
    }
    ctx.emit("fit.json", result.dump(2) + "\n");
}

inline void check_writable(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    const auto probe = dir / ".kerrspec_write_test";
    {
        std::ofstream f(probe);
        if (!f) throw IoError("output directory " + dir.string() + " is not writable");
    }
    std::filesystem::remove(probe, ec);
}

inline json provenance() {
    json p = json::object();
    p["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    p["gsl"] = GSL_VERSION;
    p["boost"] = std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000);
    p["csv_format"] = csv::version_line;
    return p;
}

} // namespace detail

/// Runs one command. Configuration errors return exit code 2, solver and I/O errors 1.
inline Outcome run(const Request& req, std::ostream& log = std::cerr) {
    Outcome outcome;
    try {
        config::Config cfg = req.config_path ? config::Config::parse(csv::read_file(*req.config_path), *req.config_path)
                                             : config::Config{};
        if (!req.command.empty()) cfg.set("command", req.command, "cli");
        if (req.preset) cfg.set("preset", *req.preset, "cli");
        if (req.out_dir) cfg.set("output.dir", *req.out_dir, "cli");
        if (req.seed) cfg.set("output.seed", std::to_string(*req.seed), "cli");
        if (req.threads) cfg.set("output.threads", std::to_string(*req.threads), "cli");
        if (req.svg) cfg.set("output.svg", *req.svg ? "true" : "false", "cli");
        if (const char* env = std::getenv("KERRSPEC_THREADS")) cfg.set_default("output.threads", env, "env");
        if (const auto* p = cfg.find("preset")) config::apply_preset(cfg, p->value);

        config::Resolver r(cfg);
        const std::string command = r.text("command");
        if (std::find(commands().begin(), commands().end(), command) == commands().end())
            throw config::ConfigError("unknown command '" + command + "'");
        if (cfg.find("preset")) r.text("preset");
        const std::filesystem::path out = r.text("output.dir", "out");
        const long threads = r.integer("output.threads", 1);
        if (threads < 1 || threads > 1024) throw config::ConfigError("output.threads must lie in [1, 1024]");
        const long seed = r.integer("output.seed", 1);
        if (seed < 0) throw config::ConfigError("output.seed must be non-negative");
        const bool svg_default = command == "one-tone" || command == "two-tone" || command == "duffing";
        const bool want_svg = r.flag("output.svg", svg_default);
        detail::check_writable(out);

        detail::Context ctx{r, out, want_svg, static_cast<unsigned>(threads), static_cast<std::uint64_t>(seed), outcome};
        if (command == "one-tone") detail::run_one_tone(ctx, false);
        else if (command == "duffing") detail::run_one_tone(ctx, true);
        else if (command == "two-tone") detail::run_two_tone(ctx);
        else if (command == "kpo") detail::run_kpo(ctx);
        else if (command == "lock") detail::run_lock(ctx);
        else if (command == "flux-map") detail::run_flux_map(ctx);
        else detail::run_fit(ctx);

        nlohmann::ordered_json m = nlohmann::ordered_json::object();
        m["tool"] = "kerrspec";
        m["command"] = command;
        m["parameters"] = r.manifest();
        m["solver"] = ctx.solver;
        m["provenance"] = detail::provenance();
        m["outputs"] = outcome.files;
        m["warnings"] = outcome.warnings;
        outcome.manifest = m;
        const auto path = (out / "manifest.json").string();
        csv::write_file(path, m.dump(2) + "\n");
        outcome.files.push_back(path);
        for (const auto& w : outcome.warnings) log << "warning: " << w << "\n";
    } catch (const config::ConfigError& e) {
        log << "error: " << e.what() << "\n";
        outcome.exit_code = 2;
    } catch (const InvalidParameter& e) {
        log << "error: " << e.what() << "\n";
        outcome.exit_code = 2;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        outcome.exit_code = 1;
    }
    return outcome;
}

} // namespace kerrspec::app
