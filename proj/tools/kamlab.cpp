// Command-line driver: deformation experiments on quantized near-integrable
// torus Hamiltonians. Subcommands mirror the library pipelines; all output is
// CSV/JSON under --out.

#include <CLI11.hpp>

#include "kamlab/config.hpp"
#include "kamlab/decay.hpp"
#include "kamlab/report.hpp"

using namespace kamlab;

namespace {

struct cli_state {
    std::string config_path;
    std::string out_dir = "out";
    uint64_t seed = 0;  // 0 = take from config
    bool assert_mode = false;

    experiment_config load() const {
        experiment_config cfg;
        if (!config_path.empty())
            cfg = load_config(config_path);
        else
            cfg.make_default_t_grid();
        if (seed) cfg.seed = seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        cfg.validate();
        return cfg;
    }
};

std::string outpath(const experiment_config& cfg, const std::string& name) {
    return cfg.out_dir + "/" + name;
}

int run_diophantine(const cli_state& st) {
    auto cfg = st.load();
    csv_writer csv(outpath(cfg, "diophantine.csv"),
                   {"kappa", "tau", "k_max", "measure_estimate", "std_err"});
    rng_stream rng(cfg.seed);
    bool monotone_ok = true;
    double prev = -1;
    double tau = cfg.dio.tau;
    if (!(tau > double(cfg.model.dim()))) {
        // the measure estimate needs a summable strip family; the membership
        // tau from the config can be as low as n-1
        tau = double(cfg.model.dim()) + 0.5;
        std::printf("diophantine: config tau=%g <= n, using tau=%g for the measure sweep\n",
                    cfg.dio.tau, tau);
    }
    for (double kappa = 8 * cfg.dio.kappa; kappa >= cfg.dio.kappa / 2; kappa *= 0.5) {
        diophantine_params p = cfg.dio;
        p.kappa = kappa;
        p.tau = tau;
        auto est = complement_measure_estimate(cfg.omega_domain, p, 20000,
                                               rng.fork(rng_stream::hash_doubles(1, {kappa})));
        csv.row({kappa, p.tau, double(p.k_max), est.measure, est.std_err});
        if (prev >= 0 && est.measure > prev + 2 * est.std_err) monotone_ok = false;
        prev = est.measure;
    }
    std::printf("diophantine: wrote %s\n", outpath(cfg, "diophantine.csv").c_str());
    if (st.assert_mode && !monotone_ok) {
        std::fprintf(stderr, "assert: complement measure not monotone in kappa\n");
        return 1;
    }
    return 0;
}

int run_kam(const cli_state& st, const std::vector<double>& eps_grid, int steps) {
    auto cfg = st.load();
    int exit_code = 0;
    if (!eps_grid.empty()) {
        // single-frequency rotor sweep in the coupling epsilon
        csv_writer csv(outpath(cfg, "kam_eps.csv"),
                       {"eps", "remainder_norm", "fitted_exponent"});
        std::vector<double> rem;
        for (double e : eps_grid) {
            auto H = make_pendulum(e);
            auto r = kam_step(H, 0.0, cfg.kam);
            rem.push_back(r.diagnostics.norm_after);
        }
        double expo = fit_loglog(eps_grid, rem).slope;
        for (size_t i = 0; i < eps_grid.size(); ++i) csv.row({eps_grid[i], rem[i], expo});
        std::printf("kam: eps sweep fitted exponent %.3f\n", expo);
        if (st.assert_mode && !(expo >= 1.4)) exit_code = 1;
    }
    {
        auto boxed = cfg.model.with_domain(cfg.kam_box);
        auto bnf = bnf_leading(boxed, cfg.bnf_t0, cfg.bnf_levels, cfg.kam, cfg.kam_steps);
        csv_writer csv(outpath(cfg, "kam_t.csv"), {"t", "remainder_norm", "fitted_exponent"});
        for (size_t i = 0; i < bnf.ts.size(); ++i)
            csv.row({bnf.ts[i], bnf.remainder_norm[i], bnf.fitted_exponent});
        auto step = kam_step(boxed.freeze_t(cfg.bnf_t0), 0.0, cfg.kam);
        write_json(outpath(cfg, "kam_step.json"), to_json(step));
        std::printf("kam: t sweep fitted exponent %.3f (superlinear=%d)\n", bnf.fitted_exponent,
                    int(bnf.superlinear));
        if (st.assert_mode && !bnf.superlinear) exit_code = 1;
    }
    return exit_code;
}

int run_spectrum(const cli_state& st, double h_arg) {
    auto cfg = st.load();
    double h = h_arg > 0 ? h_arg : cfg.h_list.front();
    mode_window win{cfg.band, (cfg.model.k_max() + cfg.L) * h};
    auto traj = track_flow(cfg.model, h, cfg.maslov, cfg.t_grid, win);
    csv_writer csv(outpath(cfg, "spectrum.csv"),
                   {"t", "j", "E", "speed", "hadamard", "crossing_flag"});
    for (const auto& p : traj.points)
        for (size_t c = 0; c < p.band_cols.size(); ++c)
            csv.row({p.t, double(p.track[c]), p.evals[size_t(p.band_cols[c])],
                     p.speed[c], p.hadamard[c], double(p.crossing[c])});

    // quasi-eigenvalues and normal-form residuals along the grid
    auto boxed = cfg.model.with_domain(cfg.kam_box);
    kam_options ko = cfg.kam;
    ko.auto_floor_digits = cfg.flow_digits;
    rng_stream rng(cfg.seed);
    auto w0 = sample_nonresonant(cfg.omega_domain, cfg.dio, &cfg.search_center, cfg.search_radius,
                                 rng);
    auto fc = cfg.family_config();
    auto freqs = family_frequencies(w0, fc, cfg.dio, cfg.omega_domain, rng.fork(7));
    csv_writer csv2(outpath(cfg, "quasi.csv"), {"t", "m1", "m2", "mu", "residual"});
    bool speeds_ok = true;
    for (double t : cfg.t_grid) {
        auto it = kam_iterate(boxed, t, cfg.kam_steps, ko);
        auto S = family_actions(cfg.model, freqs, t);
        auto fam = quasi_eigenvalues(
            [&](const std::vector<double>& I, double) { return it.k0.eval_real(I, 0.0); }, h,
            cfg.maslov, S, cfg.L, t);
        mode_window nfwin{cfg.band, (cfg.model.k_max() + cfg.L) * h};
        auto nf_op = quantize(it.h_final.with_domain(cfg.model.domain()), h, cfg.maslov, nfwin, 0.0);
        auto res = quasimode_residual(nf_op, fam);
        for (size_t i = 0; i < fam.members.size(); ++i) {
            std::vector<double> row{t};
            for (int q = 0; q < cfg.model.dim(); ++q) row.push_back(double(fam.members[i][size_t(q)]));
            row.push_back(fam.mu[i]);
            row.push_back(res[i]);
            csv2.row(row);
        }
    }
    // tracked speeds must respect the quantized speed bound
    for (const auto& p : traj.points)
        for (size_t c = 0; c < p.speed.size(); ++c)
            if (std::isfinite(p.speed[c]) && std::abs(p.speed[c]) > traj.speed_bound)
                speeds_ok = false;
    std::printf("spectrum: h=%.4g, %zu grid points, %d tracks, %d crossings, bound %.4g\n", h,
                traj.points.size(), traj.n_tracks, traj.flagged_crossings, traj.speed_bound);
    if (st.assert_mode && !speeds_ok) {
        std::fprintf(stderr, "assert: tracked speed exceeded the symbol bound\n");
        return 1;
    }
    return 0;
}

int run_qe_stat(const cli_state& st) {
    auto cfg = st.load();
    // observable with symbol I_1
    fourier_hamiltonian A(cfg.model.dim(), cfg.model.k_max(), cfg.model.domain());
    {
        std::vector<int> e(size_t(cfg.model.dim()), 0);
        e[0] = 1;
        A.set_mode(kvec(size_t(cfg.model.dim()), 0), poly::monomial(cfg.model.dim(), e, 0, 1.0));
    }
    double t = 0.0;
    rng_stream rng(cfg.seed);
    surface_average_cache cache(cfg.model, A, cfg.band, t, cfg.surface.n_bins,
                                cfg.surface.mc_samples, rng.fork(11),
                                cfg.surface.shell_frac * (cfg.band.b - cfg.band.a));
    csv_writer csv(outpath(cfg, "qe_stat.csv"), {"h", "statistic", "n_eigen"});
    double first = -1;
    bool nonvanishing = true;
    for (double h : cfg.h_list) {
        mode_window win{cfg.band, (cfg.model.k_max() + cfg.L) * h};
        auto modes = lattice_modes(cfg.model, h, cfg.maslov, win, t);
        auto op = quantize_on(modes, cfg.model, h, cfg.maslov, t);
        auto opA = quantize_on(modes, A, h, cfg.maslov, t);
        auto qe = qe_statistic_frame(op, opA, cfg.band, [&](double E) { return cache(E); });
        csv.row({h, qe.statistic, double(qe.n_eigen)});
        std::printf("qe-stat: h=%.4g statistic=%.6g over %d eigenpairs\n", h, qe.statistic,
                    qe.n_eigen);
        if (first < 0)
            first = qe.statistic;
        else if (qe.statistic < 0.5 * first)
            nonvanishing = false;
    }
    if (st.assert_mode && !nonvanishing) {
        std::fprintf(stderr, "assert: statistic fell below half its first-h value\n");
        return 1;
    }
    return 0;
}

experiment_report run_flow_pipeline(const experiment_config& cfg, bool with_covering,
                                    bool with_gram) {
    experiment_report rep;
    auto scanres = non_concentration_scan(cfg.model, cfg.scan());
    rep.speeds = scanres.speeds;
    rep.scan_rows = scanres.rows;
    rep.flagged_fraction = scanres.flagged_fraction;
    rep.t_star_found = scanres.t_star_found;
    rep.t_star = scanres.t_star;
    rep.h_star = scanres.h_star;

    double h = cfg.h_list.back();
    auto fc = cfg.family_config();
    rng_stream rng(cfg.seed);
    auto boxed = cfg.model.with_domain(cfg.kam_box);
    kam_options ko = fc.kam;
    std::vector<poly> k0s(cfg.t_grid.size());
    par_for(cfg.t_grid.size(), [&](size_t i) {
        k0s[i] = kam_iterate(boxed, cfg.t_grid[i], cfg.kam_steps, ko).k0;
    });
    auto freqs = family_frequencies(rep.speeds.slow_omega, fc, cfg.dio, cfg.omega_domain,
                                    rng.fork(7));
    std::vector<quasi_eigen_family> fams;
    for (size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
        auto S = family_actions(cfg.model, freqs, cfg.t_grid[ti]);
        fams.push_back(quasi_eigenvalues(
            [&](const std::vector<double>& I, double) { return k0s[ti].eval_real(I, 0.0); }, h,
            cfg.maslov, S, cfg.L, cfg.t_grid[ti]));
    }

    if (with_covering) {
        mode_window win{cfg.band, (cfg.model.k_max() + cfg.L) * h};
        track_options topt;
        topt.band_pad = 0.02;
        topt.max_bisect = 3;
        auto traj = track_flow(cfg.model, h, cfg.maslov, cfg.t_grid, win, topt);
        auto tab = build_mu_table(fams, k0s);
        std::vector<double> grid_ts;
        for (const auto& p : traj.points) grid_ts.push_back(p.t);
        // mu values on the refined grid: reuse nearest coarse index
        mu_table tab_refined = tab;
        if (grid_ts.size() != cfg.t_grid.size()) {
            for (auto& per_m : tab_refined.mu) {
                std::vector<double> vals(grid_ts.size());
                for (size_t gi = 0; gi < grid_ts.size(); ++gi) {
                    size_t nearest = 0;
                    for (size_t ci = 0; ci < cfg.t_grid.size(); ++ci)
                        if (std::abs(cfg.t_grid[ci] - grid_ts[gi]) <
                            std::abs(cfg.t_grid[nearest] - grid_ts[gi]))
                            nearest = ci;
                    vals[gi] = per_m[nearest];
                }
                per_m = vals;
            }
            for (auto& per_m : tab_refined.member) {
                std::vector<char> vals(grid_ts.size());
                for (size_t gi = 0; gi < grid_ts.size(); ++gi) {
                    size_t nearest = 0;
                    for (size_t ci = 0; ci < cfg.t_grid.size(); ++ci)
                        if (std::abs(cfg.t_grid[ci] - grid_ts[gi]) <
                            std::abs(cfg.t_grid[nearest] - grid_ts[gi]))
                            nearest = ci;
                    vals[gi] = per_m[nearest];
                }
                per_m = vals;
            }
        }
        for (int tr = 0; tr < traj.n_tracks; ++tr) {
            auto series = traj.track_series(tr);
            auto entry = covering_intervals(grid_ts, series, tab_refined, cfg.band);
            entry.track = tr;
            if (!entry.intervals.empty() || entry.m_Aj > 0) rep.coverings.push_back(entry);
        }
    }

    if (with_gram) {
        double t_star = rep.t_star_found ? rep.t_star : cfg.t_grid[cfg.t_grid.size() / 2];
        size_t ti = 0;
        for (size_t i = 0; i < cfg.t_grid.size(); ++i)
            if (std::abs(cfg.t_grid[i] - t_star) < std::abs(cfg.t_grid[ti] - t_star)) ti = i;
        mode_window win{cfg.band, (cfg.model.k_max() + cfg.L) * h};
        auto op = quantize(cfg.model, h, cfg.maslov, win, cfg.t_grid[ti]);
        auto ws = windows(fams[ti]);
        rep.gram = gram_test(op, fams[ti], ws);
        rep.gram_ran = true;
    }

    for (double hh : cfg.h_list) {
        rep.weyl[hh] = weyl_counts(cfg.model, hh, cfg.maslov, cfg.band,
                                   cfg.t_grid.back() - cfg.t_grid.front(), 1.0, 0.0,
                                   rng.fork(rng_stream::hash_doubles(2, {hh})));
    }
    return rep;
}

int run_flow(const cli_state& st, bool full) {
    auto cfg = st.load();
    auto rep = run_flow_pipeline(cfg, full, full);
    csv_writer csv(outpath(cfg, "flow.csv"),
                   {"h", "t", "N", "m_count", "ratio", "flagged", "z_fraction"});
    for (const auto& r : rep.scan_rows)
        csv.row({r.h, r.t, double(r.N), double(r.m_count), r.ratio, double(r.flagged),
                 r.z_fraction});
    if (full) {
        csv_writer csv2(outpath(cfg, "covering.csv"), {"j", "m_Cj", "m_Aj", "n_intervals"});
        for (const auto& c : rep.coverings)
            csv2.row({double(c.track), c.m_Cj, c.m_Aj, double(c.intervals.size())});
    }
    write_json(outpath(cfg, "report.json"), rep.to_json_full());
    std::printf("flow: %zu scan rows; t* %s\n", rep.scan_rows.size(),
                rep.t_star_found ? "found" : "not found (expected: the window count stays at or "
                                             "above the index-set size for this family)");
    if (st.assert_mode) {
        // certification and internal consistency, not the exploratory t* flag
        if (!rep.speeds.certified) return 1;
        for (const auto& r : rep.scan_rows)
            if (r.N > r.band_count + r.m_count) return 1;
    }
    return 0;
}

int run_covering(const cli_state& st) {
    auto cfg = st.load();
    auto rep = run_flow_pipeline(cfg, true, false);
    csv_writer csv(outpath(cfg, "covering.csv"), {"j", "m_Cj", "m_Aj", "n_intervals"});
    for (const auto& c : rep.coverings)
        csv.row({double(c.track), c.m_Cj, c.m_Aj, double(c.intervals.size())});
    write_json(outpath(cfg, "report.json"), rep.to_json_full());
    std::printf("covering: %zu tracked eigenvalues reported\n", rep.coverings.size());
    return 0;
}

int run_report(const cli_state& st) {
    auto cfg = st.load();
    auto rep = run_flow_pipeline(cfg, true, true);

    // attach the leading normal-form data
    auto boxed = cfg.model.with_domain(cfg.kam_box);
    auto bnf = bnf_leading(boxed, cfg.bnf_t0, cfg.bnf_levels, cfg.kam, cfg.kam_steps);
    rep.bnf_exponent = bnf.fitted_exponent;
    rep.dk0_dt0 = bnf.dk0_dt0;

    write_json(outpath(cfg, "report.json"), rep.to_json_full());
    csv_writer csv(outpath(cfg, "flow.csv"),
                   {"h", "t", "N", "m_count", "ratio", "flagged", "z_fraction"});
    for (const auto& r : rep.scan_rows)
        csv.row({r.h, r.t, double(r.N), double(r.m_count), r.ratio, double(r.flagged),
                 r.z_fraction});
    csv_writer csv2(outpath(cfg, "covering.csv"), {"j", "m_Cj", "m_Aj", "n_intervals"});
    for (const auto& c : rep.coverings)
        csv2.row({double(c.track), c.m_Cj, c.m_Aj, double(c.intervals.size())});
    {
        std::vector<std::string> head{"mu_speed"};
        for (int q = cfg.model.dim(); q >= 1; --q) head.insert(head.begin(), "m" + std::to_string(q));
        csv_writer csv3(outpath(cfg, "mu_speeds.csv"), head);
        for (const auto& [m, sp] : rep.speeds.mu_speeds) {
            std::vector<double> row;
            for (int v : m) row.push_back(double(v));
            row.push_back(sp);
            csv3.row(row);
        }
    }
    std::printf("report: wrote %s\n", outpath(cfg, "report.json").c_str());
    if (st.assert_mode && !rep.speeds.certified) return 1;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for deformed integrable torus Hamiltonians"};
    app.set_help_flag("--help", "print usage");
    app.require_subcommand(1);
    app.fallthrough();
    cli_state st;
    app.add_option("--config", st.config_path, "JSON experiment configuration");
    app.add_option("--seed", st.seed, "override the configured rng seed");
    app.add_option("--out", st.out_dir, "output directory");
    app.add_flag("--assert", st.assert_mode, "exit nonzero unless the built-in checks pass");

    auto* dio = app.add_subcommand("diophantine", "nonresonant-set measure estimates");
    dio->fallthrough();
    auto* kam = app.add_subcommand("kam", "normal-form step sweeps");
    kam->fallthrough();
    std::vector<double> eps_grid{1e-3, 1e-4, 1e-5};
    int steps = 2;
    kam->add_option("--eps-grid", eps_grid, "rotor coupling sweep");
    kam->add_option("--steps", steps, "iterated steps per parameter value");
    auto* spec = app.add_subcommand("spectrum", "eigenvalue flow and quasi-eigenvalues");
    spec->fallthrough();
    spec->set_help_flag("--help", "print usage");
    double h_arg = 0;
    spec->add_option("--h", h_arg, "semiclassical parameter (default: first of h_list)");
    auto* qe = app.add_subcommand("qe-stat", "ergodicity statistic over the h list");
    qe->fallthrough();
    auto* flow = app.add_subcommand("flow", "window counting scan");
    flow->fallthrough();
    auto* cov = app.add_subcommand("covering", "covering intervals per tracked eigenvalue");
    cov->fallthrough();
    auto* repc = app.add_subcommand("report", "flow + covering + gram + counts");
    repc->fallthrough();
    auto* fullc = app.add_subcommand("full", "everything the report subcommand runs");
    fullc->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (dio->parsed()) return run_diophantine(st);
        if (kam->parsed()) return run_kam(st, eps_grid, steps);
        if (spec->parsed()) return run_spectrum(st, h_arg);
        if (qe->parsed()) return run_qe_stat(st);
        if (flow->parsed()) return run_flow(st, false);
        if (cov->parsed()) return run_covering(st);
        if (repc->parsed() || fullc->parsed()) return run_report(st);
    } catch (const validation_error& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const error& e) {
        std::fprintf(stderr, "pipeline error: %s\n", e.what());
        return 3;
    }
    return 0;
}
