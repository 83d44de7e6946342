#pragma once

#include "kamlab/diophantine.hpp"
#include "kamlab/kam.hpp"
#include "kamlab/quantum.hpp"

namespace kamlab {

// ---------------------------------------------------------------------------
// quasi-eigenvalue window sets

struct window_set {
    double t = 0.0;
    double halfwidth = 0.0;                          // exactly h^{n+1}
    std::vector<std::pair<double, double>> raw;      // one interval per index-set member
    std::vector<std::pair<double, double>> merged;   // disjoint, same union

    double total_measure() const {
        double s = 0;
        for (const auto& [a, b] : merged) s += b - a;
        return s;
    }
    bool contains(double E) const {
        for (const auto& [a, b] : merged)
            if (E >= a && E <= b) return true;
        return false;
    }
};

inline window_set windows(const quasi_eigen_family& fam) {
    window_set w;
    w.t = fam.t;
    w.halfwidth = fam.window_halfwidth;
    for (double mu : fam.mu) w.raw.emplace_back(mu - w.halfwidth, mu + w.halfwidth);
    auto sorted = w.raw;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& iv : sorted) {
        if (!w.merged.empty() && iv.first <= w.merged.back().second)
            w.merged.back().second = std::max(w.merged.back().second, iv.second);
        else
            w.merged.push_back(iv);
    }
    return w;
}

inline int count_in_windows(const std::vector<double>& evals_sorted, const window_set& w) {
    int count = 0;
    for (const auto& [a, b] : w.merged) {
        auto lo = std::lower_bound(evals_sorted.begin(), evals_sorted.end(), a);
        auto hi = std::upper_bound(evals_sorted.begin(), evals_sorted.end(), b);
        count += int(hi - lo);
    }
    return count;
}

// ---------------------------------------------------------------------------
// quantum-ergodicity statistic

struct qe_result {
    double statistic = 0.0;
    int n_eigen = 0;
};

// h^n sum over band eigenpairs of |<A u_j, u_j> - surface_avg(sigma(A), E_j)|^2,
// with surface averages supplied per energy (use surface_average_cache)
template <class SurfAvg>
qe_result qe_statistic_frame(const lattice_operator& op, const lattice_operator& opA,
                             const energy_band& band, SurfAvg&& surf_avg) {
    auto sp = spectrum_full(op);
    qe_result out;
    double acc = 0;
    for (size_t j = 0; j < sp.evals.size(); ++j) {
        double E = sp.evals[j];
        if (E < band.a || E > band.b) continue;
        ++out.n_eigen;
        cplx me = (sp.vectors.col(long(j)).adjoint() * (opA.mat * sp.vectors.col(long(j))))(0);
        double d = me.real() - surf_avg(E);
        acc += d * d;
    }
    if (out.n_eigen == 0) throw domain_error("qe_statistic: empty band");
    out.statistic = std::pow(op.h, op.n) * acc;
    return out;
}

// ---------------------------------------------------------------------------
// slow-torus detection and speed bounds

struct slow_family_config {
    std::vector<double> search_center;  // frequency-ball centre for the torus search
    double search_radius = 0.05;
    double family_radius = 0.05;  // ball around the certified frequency defining the family
    int family_samples = 200;
    action_domain kam_box;        // working box for the normal-form iteration
    kam_options kam;
    kvec maslov;
    double L = 2.0;
    int gamma = 4;                // quasimode order bookkeeping, reported only
};

struct speed_bounds_result {
    double q_minus = 0, q_plus = 0;
    double B = 0;
    double c = 0;
    double eps = 0;    // measured band spread Q_+ - Q_-
    double delta = 0;  // length of the parameter interval examined
    bool certified = false;
    std::string failure;
    std::vector<double> slow_omega;
    double slow_speed = 0;                // torus average of dtH at the slow torus
    double max_mu_speed = -1e300;         // max dt mu_m over members and grid
    std::vector<std::pair<kvec, double>> mu_speeds;  // per member, all h and grid t
};

// frequency cloud of the torus family: ball around omega0 intersected with
// the nonresonant set
inline std::vector<std::vector<double>> family_frequencies(const std::vector<double>& omega0,
                                                           const slow_family_config& cfg,
                                                           const diophantine_params& dio,
                                                           const frequency_domain& Omega,
                                                           rng_stream rng) {
    std::vector<std::vector<double>> out;
    int tries = 0;
    while (int(out.size()) < cfg.family_samples && tries < cfg.family_samples * 200) {
        ++tries;
        auto w = frequency_domain::make_ball(omega0, cfg.family_radius).sample(rng);
        if (is_in_omega_kappa(w, dio, Omega).in_set) out.push_back(w);
    }
    if (out.empty()) throw sampling_failure_error("family_frequencies: no nonresonant points");
    return out;
}

// action set S(t) of the family under the t-dependent frequency map
inline std::vector<std::vector<double>> family_actions(const fourier_hamiltonian& model,
                                                       const std::vector<std::vector<double>>& ws,
                                                       double t) {
    std::vector<std::vector<double>> out;
    out.reserve(ws.size());
    for (const auto& w : ws) out.push_back(model.legendre_inverse(w, t));
    return out;
}

struct surface_grid_config {
    int n_bins = 16;
    int n_t = 5;
    size_t mc_samples = 6000;
    double shell_frac = 5e-3;  // shell halfwidth = shell_frac * (b - a)
};

// Q+- over an (E, t) grid of normalized surface averages of dtP0
inline std::pair<double, double> surface_speed_range(const fourier_hamiltonian& model,
                                                     const energy_band& band, double t_lo,
                                                     double t_hi, const surface_grid_config& sg,
                                                     rng_stream rng) {
    auto dtH = model.partial_t();
    double shell = sg.shell_frac * (band.b - band.a);
    std::vector<double> vals(size_t(sg.n_bins) * size_t(sg.n_t));
    par_for(vals.size(), [&](size_t idx) {
        int bi = int(idx) % sg.n_bins, ti = int(idx) / sg.n_bins;
        double E = band.a + (band.b - band.a) * double(bi) / double(sg.n_bins - 1);
        double t = t_lo + (t_hi - t_lo) * double(ti) / double(sg.n_t - 1);
        auto stream = rng.fork(rng_stream::hash_doubles(0, {E, t}));
        vals[idx] = energy_surface_average(model, dtH, E, t, sg.mc_samples, stream, shell).value;
    });
    auto [mn, mx] = std::minmax_element(vals.begin(), vals.end());
    return {*mn, *mx};
}

// Certify a slow torus and the quasi-eigenvalue speed bound B:
// searches the nonresonant set near the configured centre for omega0 whose
// torus-averaged dtH sits below Q_- - 3c, then bounds the measured
// quasi-eigenvalue speeds between max dt mu_m and Q_- - c.
inline speed_bounds_result speed_bounds(const fourier_hamiltonian& model, const energy_band& band,
                                        const std::vector<double>& t_grid,
                                        const diophantine_params& dio,
                                        const frequency_domain& Omega,
                                        const slow_family_config& cfg, double c_target,
                                        const std::vector<double>& h_list,
                                        const surface_grid_config& sg, rng_stream rng,
                                        const std::vector<poly>* k0_per_t = nullptr) {
    speed_bounds_result out;
    out.c = c_target;
    out.delta = t_grid.back() - t_grid.front();

    auto [qm, qp] = surface_speed_range(model, band, t_grid.front(), t_grid.back(), sg, rng);
    out.q_minus = qm;
    out.q_plus = qp;
    out.eps = qp - qm;

    // slow-torus search
    auto dtH = model.partial_t();
    bool found = false;
    rng_stream search = rng.fork(101);
    for (int attempt = 0; attempt < 400 && !found; ++attempt) {
        std::vector<double> w0;
        try {
            w0 = sample_nonresonant(Omega, dio, &cfg.search_center, cfg.search_radius, search,
                                    4000);
        } catch (const sampling_failure_error&) {
            break;
        }
        std::vector<double> I0;
        try {
            I0 = model.legendre_inverse(w0, 0.0);
        } catch (const error&) {
            continue;
        }
        double E0 = model.torus_average(I0, 0.0);
        if (E0 < band.a || E0 > band.b) continue;
        double speed = dtH.torus_average(I0, 0.0);
        if (speed < out.q_minus - 3.0 * c_target) {
            out.slow_omega = w0;
            out.slow_speed = speed;
            found = true;
        }
    }
    if (!found) {
        out.failure = "no slow torus: no nonresonant frequency in the search region has "
                      "torus-averaged dtH below Q_- - 3c";
        return out;
    }

    // quasi-eigenvalue speeds from the integrable-part fits along the grid
    std::vector<poly> k0s;
    if (k0_per_t) {
        k0s = *k0_per_t;
    } else {
        auto boxed = model.with_domain(cfg.kam_box);
        k0s.resize(t_grid.size());
        std::vector<std::string> errs(t_grid.size());
        par_for(t_grid.size(), [&](size_t i) {
            try {
                k0s[i] = kam_iterate(boxed, t_grid[i], 2, cfg.kam).k0;
            } catch (const error& e) {
                errs[i] = e.what();
            }
        });
        for (auto& e : errs)
            if (!e.empty()) throw step_failure_error("speed_bounds: " + e);
    }

    auto freqs = family_frequencies(out.slow_omega, cfg, dio, Omega, rng.fork(7));
    for (double h : h_list) {
        for (size_t ti = 0; ti < t_grid.size(); ++ti) {
            auto S = family_actions(model, freqs, t_grid[ti]);
            auto fam = quasi_eigenvalues(
                [&](const std::vector<double>& I, double) { return k0s[ti].eval_real(I, 0.0); }, h,
                cfg.maslov, S, cfg.L, t_grid[ti]);
            size_t lo = ti > 0 ? ti - 1 : ti, hi = ti + 1 < t_grid.size() ? ti + 1 : ti;
            double dt = t_grid[hi] - t_grid[lo];
            for (size_t mi = 0; mi < fam.actions.size(); ++mi) {
                const auto& I = fam.actions[mi];
                double sp = (k0s[hi].eval_real(I, 0.0) - k0s[lo].eval_real(I, 0.0)) / dt;
                out.max_mu_speed = std::max(out.max_mu_speed, sp);
                out.mu_speeds.emplace_back(fam.members[mi], sp);
            }
        }
    }

    if (!(out.max_mu_speed < out.q_minus - c_target)) {
        out.failure = "speed gap failed: max dt mu_m = " + std::to_string(out.max_mu_speed) +
                      " not below Q_- - c = " + std::to_string(out.q_minus - c_target);
        return out;
    }
    out.B = 0.5 * (out.max_mu_speed + out.q_minus - c_target);
    out.certified = true;
    return out;
}

// ---------------------------------------------------------------------------
// covering intervals for one tracked eigenvalue

struct covering_entry {
    int track = -1;
    std::vector<std::pair<double, double>> intervals;  // [s_j, s_j']
    std::vector<size_t> chosen_m;                      // member index per interval
    double m_Cj = 0;  // grid measure of {t : E(t) in W(t;h)}
    double m_Aj = 0;  // grid measure of {t : E(t) in [a,b]}
};

// per-(m, grid point) quasi-eigenvalue table; mu is tracked for every m even
// while it is outside the index set, membership is flagged separately
struct mu_table {
    std::vector<kvec> ms;
    std::vector<std::vector<double>> mu;          // [m][ti]
    std::vector<std::vector<char>> member;        // [m][ti]
    std::map<kvec, size_t> index;
    double halfwidth = 0;
};

inline mu_table build_mu_table(const std::vector<quasi_eigen_family>& fams,
                               const std::vector<poly>& k0s) {
    mu_table tab;
    tab.halfwidth = fams.front().window_halfwidth;
    size_t nt = fams.size();
    for (const auto& f : fams)
        for (const auto& m : f.members)
            if (!tab.index.count(m)) {
                tab.index[m] = tab.ms.size();
                tab.ms.push_back(m);
            }
    tab.mu.assign(tab.ms.size(), std::vector<double>(nt, 0.0));
    tab.member.assign(tab.ms.size(), std::vector<char>(nt, 0));
    for (size_t mi = 0; mi < tab.ms.size(); ++mi) {
        const kvec& m = tab.ms[mi];
        std::vector<double> I(m.size());
        for (size_t j = 0; j < m.size(); ++j)
            I[j] = fams.front().h * (double(m[j]) + 0.25 * double(fams.front().maslov[j]));
        for (size_t ti = 0; ti < nt; ++ti) tab.mu[mi][ti] = k0s[ti].eval_real(I, 0.0);
    }
    for (size_t ti = 0; ti < nt; ++ti)
        for (const auto& m : fams[ti].members) tab.member[tab.index.at(m)][ti] = 1;
    return tab;
}

inline covering_entry covering_intervals(const std::vector<double>& t_grid,
                                         const std::vector<double>& E_series,
                                         const mu_table& tab, const energy_band& band) {
    size_t nt = t_grid.size();
    covering_entry out;
    auto dt_at = [&](size_t i) {
        return i + 1 < nt ? t_grid[i + 1] - t_grid[i] : t_grid[i] - t_grid[i - 1];
    };
    auto in_tube = [&](size_t mi, size_t ti) {
        double E = E_series[ti];
        return std::isfinite(E) && std::abs(E - tab.mu[mi][ti]) <= tab.halfwidth;
    };
    auto in_W = [&](size_t ti, const std::vector<char>& used) -> int {
        // member windows only; returns an eligible m index or -1
        double E = E_series[ti];
        if (!std::isfinite(E)) return -1;
        int best = -1;
        double bestd = 1e300;
        for (size_t mi = 0; mi < tab.ms.size(); ++mi) {
            if (used[mi] || !tab.member[mi][ti] || !in_tube(mi, ti)) continue;
            // prefer a window that persists into the next grid step
            double d = std::abs(E - tab.mu[mi][ti]);
            bool persists = ti + 1 < nt && tab.member[mi][ti + 1] && in_tube(mi, ti + 1);
            double score = d + (persists ? 0.0 : 1e6);
            if (score < bestd) {
                bestd = score;
                best = int(mi);
            }
        }
        return best;
    };

    for (size_t ti = 0; ti < nt; ++ti) {
        double E = E_series[ti];
        if (std::isfinite(E) && E >= band.a && E <= band.b) out.m_Aj += dt_at(ti);
        if (!std::isfinite(E)) continue;
        for (size_t mi = 0; mi < tab.ms.size(); ++mi)
            if (tab.member[mi][ti] && in_tube(mi, ti)) {
                out.m_Cj += dt_at(ti);
                break;
            }
    }

    std::vector<char> used(tab.ms.size(), 0);
    size_t ti = 0;
    while (ti < nt) {
        int mi = in_W(ti, used);
        if (mi < 0) {
            ++ti;
            continue;
        }
        // s_j at this grid point; s_j' is the last grid time in this window's tube
        size_t last = ti;
        for (size_t tj = ti; tj < nt; ++tj)
            if (in_tube(size_t(mi), tj)) last = tj;
        out.intervals.emplace_back(t_grid[ti], t_grid[last]);
        out.chosen_m.push_back(size_t(mi));
        used[size_t(mi)] = 1;
        // next interval may start at s_j' (endpoint overlap is the only kind)
        ti = last;
        if (in_W(ti, used) < 0) ++ti;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gram test of projected quasimodes against the span of window eigenvectors

struct gram_result {
    int dim_U = 0;
    int m_count = 0;
    double hs_norm = 0.0;          // ||M - I||_HS
    bool invertible = false;       // Neumann criterion ||M - I|| < 1
    bool contradiction = false;    // dim U < #M with the family nonempty
    std::vector<double> perp_norm;  // ||pi_{U perp} e_m|| per member
    std::vector<double> residual;   // ||(P - mu_m) e_m|| per member
};

inline gram_result gram_test(const lattice_operator& op, const quasi_eigen_family& fam,
                             const window_set& ws) {
    auto sp = spectrum_full(op);
    std::vector<int> ucols;
    for (int j = 0; j < int(sp.evals.size()); ++j)
        if (ws.contains(sp.evals[size_t(j)])) ucols.push_back(j);
    gram_result out;
    out.dim_U = int(ucols.size());
    out.m_count = int(fam.members.size());
    out.contradiction = out.dim_U < out.m_count;
    out.residual = quasimode_residual(op, fam);

    // rows of the eigenvector matrix at the quasimode lattice positions
    Eigen::MatrixXcd B(out.m_count, out.dim_U);
    for (int mi = 0; mi < out.m_count; ++mi) {
        auto it = op.index.find(fam.members[size_t(mi)]);
        if (it == op.index.end())
            throw precondition_error("gram_test: quasimode outside the operator mode set");
        for (int c = 0; c < out.dim_U; ++c) B(mi, c) = sp.vectors(it->second, ucols[size_t(c)]);
    }
    Eigen::MatrixXcd M = B * B.adjoint();
    Eigen::MatrixXcd D = M - Eigen::MatrixXcd::Identity(out.m_count, out.m_count);
    out.hs_norm = D.norm();
    out.invertible = out.hs_norm < 1.0;
    for (int mi = 0; mi < out.m_count; ++mi) {
        double p2 = 1.0 - M(mi, mi).real();
        out.perp_norm.push_back(std::sqrt(std::max(p2, 0.0)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// lattice counts against volume predictions

struct weyl_result {
    int count_band = 0;       // lattice energies in [a,b]
    int count_fattened = 0;   // in [a - M delta, b + M delta]
    int count_shrunk = 0;     // in [a + M delta, b - M delta]
    double predicted_band = 0, predicted_fattened = 0;
    double ratio_persistent = 0;  // count_shrunk / count_fattened
};

inline weyl_result weyl_counts(const fourier_hamiltonian& model, double h, const kvec& maslov,
                               const energy_band& band, double delta, double speed_bound, double t,
                               rng_stream rng, size_t vol_samples = 400000) {
    weyl_result out;
    double pad = speed_bound * delta;
    int n = model.dim();
    std::vector<int> lo((size_t(n))), hi((size_t(n)));
    for (int j = 0; j < n; ++j) {
        lo[size_t(j)] = int(std::floor(model.domain().lo[size_t(j)] / h)) - 1;
        hi[size_t(j)] = int(std::ceil(model.domain().hi[size_t(j)] / h)) + 1;
    }
    kvec m(lo.begin(), lo.end());
    while (true) {
        std::vector<double> I((size_t(n)));
        for (int j = 0; j < n; ++j)
            I[size_t(j)] = h * (double(m[size_t(j)]) + 0.25 * double(maslov[size_t(j)]));
        if (model.domain().contains(I)) {
            double e = model.torus_average(I, t);
            if (e >= band.a && e <= band.b) ++out.count_band;
            if (e >= band.a - pad && e <= band.b + pad) ++out.count_fattened;
            if (e >= band.a + pad && e <= band.b - pad) ++out.count_shrunk;
        }
        int j = n - 1;
        while (j >= 0 && ++m[size_t(j)] > hi[size_t(j)]) m[size_t(j)] = lo[size_t(j)], --j;
        if (j < 0) break;
    }
    // phase-volume prediction by Monte Carlo over the action domain
    size_t in_band = 0, in_fat = 0;
    for (size_t s = 0; s < vol_samples; ++s) {
        auto I = model.domain().sample(rng);
        double e = model.torus_average(I, t);
        if (e >= band.a && e <= band.b) ++in_band;
        if (e >= band.a - pad && e <= band.b + pad) ++in_fat;
    }
    double volfrac = model.domain().volume() / double(vol_samples);
    out.predicted_band = double(in_band) * volfrac / std::pow(h, n);
    out.predicted_fattened = double(in_fat) * volfrac / std::pow(h, n);
    out.ratio_persistent =
        out.count_fattened > 0 ? double(out.count_shrunk) / double(out.count_fattened) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// the full non-concentration scan

struct scan_row {
    double h = 0, t = 0;
    int N = 0;        // eigenvalues inside the window union
    int m_count = 0;  // index-set size
    double ratio = 0;
    bool flagged = false;         // ratio < 1/2
    double window_measure = 0;
    int band_count = 0;
    double z_fraction = 0;  // band eigenpairs with Hadamard speed in [Q_- - eps, Q_+ + eps]
};

struct scan_result {
    std::vector<scan_row> rows;
    std::map<double, double> flagged_fraction;  // per h
    bool t_star_found = false;
    double t_star = 0, h_star = 0;
    speed_bounds_result speeds;
};

struct scan_config {
    energy_band band;
    std::vector<double> h_list;
    std::vector<double> t_grid;
    diophantine_params dio;
    frequency_domain Omega;
    slow_family_config family;
    double c_target = 0.05;
    surface_grid_config surface;
    double mode_pad_factor = 2.0;  // pad = (model k_max + L) h * factor/2... see below
    uint64_t seed = 1;
    unsigned threads = 0;
};

inline scan_result non_concentration_scan(const fourier_hamiltonian& model,
                                          const scan_config& cfg) {
    rng_stream rng(cfg.seed);
    scan_result out;

    // integrable-part fits along the grid (h independent)
    auto boxed = model.with_domain(cfg.family.kam_box);
    std::vector<poly> k0s(cfg.t_grid.size());
    {
        std::vector<std::string> errs(cfg.t_grid.size());
        par_for(cfg.t_grid.size(), [&](size_t i) {
            try {
                k0s[i] = kam_iterate(boxed, cfg.t_grid[i], 2, cfg.family.kam).k0;
            } catch (const error& e) {
                errs[i] = e.what();
            }
        }, cfg.threads);
        for (auto& e : errs)
            if (!e.empty()) throw step_failure_error("non_concentration_scan: " + e);
    }

    out.speeds = speed_bounds(model, cfg.band, cfg.t_grid, cfg.dio, cfg.Omega, cfg.family,
                              cfg.c_target, cfg.h_list, cfg.surface, rng.fork(3), &k0s);
    if (!out.speeds.certified)
        throw precondition_error("non_concentration_scan: speed bounds not certified: " +
                                 out.speeds.failure);

    auto freqs = family_frequencies(out.speeds.slow_omega, cfg.family, cfg.dio, cfg.Omega,
                                    rng.fork(7));

    for (double h : cfg.h_list) {
        mode_window win{cfg.band, (model.k_max() + cfg.family.L) * h};
        auto modes = lattice_modes(model, h, cfg.family.maslov, win, cfg.t_grid.front());
        int flagged = 0;
        std::vector<scan_row> rows(cfg.t_grid.size());
        std::vector<std::string> errs(cfg.t_grid.size());
        auto dtH = model.partial_t();
        par_for(cfg.t_grid.size(), [&](size_t ti) {
            try {
                double t = cfg.t_grid[ti];
                auto op = quantize_on(modes, model, h, cfg.family.maslov, t);
                auto full = spectrum_full(op);
                auto opdt = quantize_on(modes, dtH, h, cfg.family.maslov, t);
                auto S = family_actions(model, freqs, t);
                auto fam = quasi_eigenvalues(
                    [&](const std::vector<double>& I, double) { return k0s[ti].eval_real(I, 0.0); },
                    h, cfg.family.maslov, S, cfg.family.L, t);
                auto ws = windows(fam);
                scan_row row;
                row.h = h;
                row.t = t;
                row.N = count_in_windows(full.evals, ws);
                row.m_count = int(fam.members.size());
                row.ratio = row.m_count ? double(row.N) / double(row.m_count) : 0.0;
                row.flagged = row.m_count > 0 && row.ratio < 0.5;
                row.window_measure = ws.total_measure();
                // how many band eigenpairs obey the ergodic speed window: the
                // measured stand-in for the Z(t,h) bookkeeping
                int z_count = 0;
                double zl = out.speeds.q_minus - out.speeds.eps;
                double zh = out.speeds.q_plus + out.speeds.eps;
                for (size_t j = 0; j < full.evals.size(); ++j) {
                    double e = full.evals[j];
                    if (e < cfg.band.a || e > cfg.band.b) continue;
                    ++row.band_count;
                    cplx hv = (full.vectors.col(long(j)).adjoint() *
                               (opdt.mat * full.vectors.col(long(j))))(0);
                    if (hv.real() >= zl && hv.real() <= zh) ++z_count;
                }
                row.z_fraction = row.band_count ? double(z_count) / row.band_count : 0.0;
                rows[ti] = row;
            } catch (const error& e) {
                errs[ti] = e.what();
            }
        }, cfg.threads);
        for (auto& e : errs)
            if (!e.empty()) throw step_failure_error("non_concentration_scan: " + e);
        for (auto& row : rows) {
            if (row.flagged) {
                ++flagged;
                // report t* at the smallest h that exhibits one (first t wins)
                if (!out.t_star_found || h < out.h_star) {
                    out.t_star_found = true;
                    out.t_star = row.t;
                    out.h_star = h;
                }
            }
            out.rows.push_back(row);
        }
        out.flagged_fraction[h] = double(flagged) / double(cfg.t_grid.size());
    }
    return out;
}

}  // namespace kamlab
