#pragma once

#include <Eigen/Dense>

#include "kamlab/surface.hpp"

namespace kamlab {

// ---------------------------------------------------------------------------
// momentum-lattice quantization with Maslov shift: basis e_m ~ exp(i<m + theta/4, x>),
// matrix entries by symmetric midpoint evaluation of the symbol coefficients

struct mode_window {
    energy_band band;
    double pad_actions = 0.0;  // action-space fattening of the band shell
};

struct lattice_operator {
    int n = 0;
    double h = 0.0;
    kvec maslov;  // theta, integer class; lattice shift is theta/4
    double t = 0.0;
    std::vector<kvec> modes;
    std::map<kvec, int> index;
    Eigen::MatrixXcd mat;
    bool real_symmetric = true;

    std::vector<double> action_of(const kvec& m) const {
        std::vector<double> I((size_t(n)));
        for (int j = 0; j < n; ++j)
            I[size_t(j)] = h * (double(m[size_t(j)]) + 0.25 * double(maslov[size_t(j)]));
        return I;
    }

    int dim() const { return int(modes.size()); }

    double max_abs_row_sum() const {
        double m = 0;
        for (int r = 0; r < mat.rows(); ++r) {
            double s = 0;
            for (int c = 0; c < mat.cols(); ++c) s += std::abs(mat(r, c));
            m = std::max(m, s);
        }
        return m;
    }
};

namespace detail {

// keep m when the zero-mode energy at its action sits within the band
// fattened (to first order) by pad_actions in action distance
inline bool in_window(const fourier_hamiltonian& H, const std::vector<double>& I, double t,
                      const mode_window& w) {
    if (!H.domain().contains(I)) return false;
    double e = H.torus_average(I, t);
    if (e >= w.band.a && e <= w.band.b) return true;
    double g = action_domain::norm(H.frequency(I, t));
    if (g < 1e-9) return false;
    double de = e < w.band.a ? w.band.a - e : e - w.band.b;
    return de / g <= w.pad_actions;
}

}  // namespace detail

inline std::vector<kvec> lattice_modes(const fourier_hamiltonian& H, double h, const kvec& maslov,
                                       const mode_window& window, double t) {
    int n = H.dim();
    std::vector<kvec> out;
    // scan the lattice over the domain bounding box
    std::vector<int> lo((size_t(n))), hi((size_t(n)));
    for (int j = 0; j < n; ++j) {
        lo[size_t(j)] = int(std::floor(H.domain().lo[size_t(j)] / h)) - 1;
        hi[size_t(j)] = int(std::ceil(H.domain().hi[size_t(j)] / h)) + 1;
    }
    kvec m = lo;
    while (true) {
        std::vector<double> I((size_t(n)));
        for (int j = 0; j < n; ++j)
            I[size_t(j)] = h * (double(m[size_t(j)]) + 0.25 * double(maslov[size_t(j)]));
        if (detail::in_window(H, I, t, window)) out.push_back(m);
        int j = n - 1;
        while (j >= 0 && ++m[size_t(j)] > hi[size_t(j)]) m[size_t(j)] = lo[size_t(j)], --j;
        if (j < 0) break;
    }
    if (out.empty()) throw domain_error("quantize: empty mode set for the requested window");
    return out;
}

inline lattice_operator quantize_on(std::vector<kvec> modes, const fourier_hamiltonian& H,
                                    double h, const kvec& maslov, double t) {
    if (!H.reality_holds(1e-11)) throw precondition_error("quantize: reality condition violated");
    lattice_operator op;
    op.n = H.dim();
    op.h = h;
    op.maslov = maslov;
    op.t = t;
    op.modes = std::move(modes);
    for (size_t i = 0; i < op.modes.size(); ++i) op.index[op.modes[i]] = int(i);
    int N = op.dim();
    op.mat = Eigen::MatrixXcd::Zero(N, N);
    for (int col = 0; col < N; ++col) {
        const kvec& m = op.modes[size_t(col)];
        for (const auto& [k, c] : H.modes()) {
            kvec mp(size_t(op.n));
            for (int j = 0; j < op.n; ++j) mp[size_t(j)] = m[size_t(j)] + k[size_t(j)];
            auto it = op.index.find(mp);
            if (it == op.index.end()) continue;
            int row = it->second;
            if (row < col) continue;  // fill lower triangle + mirror for exact Hermiticity
            std::vector<double> mid(size_t(op.n));
            for (int j = 0; j < op.n; ++j)
                mid[size_t(j)] = h * (double(m[size_t(j)]) + 0.5 * double(k[size_t(j)]) +
                                      0.25 * double(op.maslov[size_t(j)]));
            cplx v = c.eval(mid, t);
            if (row == col) {
                if (std::abs(v.imag()) > 1e-12 * std::max(1.0, std::abs(v.real())))
                    throw error("quantize: non-real diagonal entry");
                op.mat(row, col) += cplx(v.real(), 0.0);
            } else {
                op.mat(row, col) += v;
                op.mat(col, row) += std::conj(v);
            }
        }
    }
    op.real_symmetric = true;
    for (int r = 0; r < N && op.real_symmetric; ++r)
        for (int c = 0; c < N; ++c)
            if (op.mat(r, c).imag() != 0.0) {
                op.real_symmetric = false;
                break;
            }
    return op;
}

inline lattice_operator quantize(const fourier_hamiltonian& H, double h, const kvec& maslov,
                                 const mode_window& window, double t) {
    return quantize_on(lattice_modes(H, h, maslov, window, t), H, h, maslov, t);
}

// ---------------------------------------------------------------------------
// dense Hermitian eigensolve

struct eigen_frame {
    std::vector<double> evals;  // ascending, all modes
    Eigen::MatrixXcd vectors;   // all eigenvectors (columns aligned with evals)
};

inline eigen_frame spectrum_full(const lattice_operator& op) {
    eigen_frame f;
    int N = op.dim();
    bool diagonal = true;
    for (int r = 0; r < N && diagonal; ++r)
        for (int c = 0; c < N; ++c)
            if (r != c && op.mat(r, c) != cplx(0.0)) {
                diagonal = false;
                break;
            }
    if (diagonal) {
        std::vector<int> ord((size_t(N)));
        for (int i = 0; i < N; ++i) ord[size_t(i)] = i;
        std::sort(ord.begin(), ord.end(), [&](int a, int b) {
            return op.mat(a, a).real() < op.mat(b, b).real();
        });
        f.evals.resize((size_t(N)));
        f.vectors = Eigen::MatrixXcd::Zero(N, N);
        for (int i = 0; i < N; ++i) {
            f.evals[size_t(i)] = op.mat(ord[size_t(i)], ord[size_t(i)]).real();
            f.vectors(ord[size_t(i)], i) = 1.0;
        }
        return f;
    }
    if (op.real_symmetric) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.mat.real());
        if (es.info() != Eigen::Success) throw error("spectrum: real eigensolver failed");
        f.evals.assign(es.eigenvalues().data(), es.eigenvalues().data() + N);
        f.vectors = es.eigenvectors().cast<cplx>();
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(op.mat);
        if (es.info() != Eigen::Success) throw error("spectrum: eigensolver failed");
        f.evals.assign(es.eigenvalues().data(), es.eigenvalues().data() + N);
        f.vectors = es.eigenvectors();
    }
    // residual spot check against the operator scale
    double scale = std::abs(f.evals.front());
    for (double e : f.evals) scale = std::max(scale, std::abs(e));
    rng_stream rng(777);
    for (int probe = 0; probe < std::min(16, N); ++probe) {
        int j = int(rng.next() % uint64_t(N));
        double res = (op.mat * f.vectors.col(j) - f.evals[size_t(j)] * f.vectors.col(j)).norm();
        if (res > 1e-10 * std::max(scale, 1.0))
            throw error("spectrum: eigenpair residual " + std::to_string(res));
    }
    return f;
}

struct eigenpairs_in_band {
    std::vector<double> evals;
    Eigen::MatrixXcd vectors;
    std::vector<int> global_index;
};

inline eigenpairs_in_band spectrum(const lattice_operator& op, const energy_band& band) {
    auto f = spectrum_full(op);
    eigenpairs_in_band out;
    std::vector<int> cols;
    for (int i = 0; i < int(f.evals.size()); ++i)
        if (f.evals[size_t(i)] >= band.a && f.evals[size_t(i)] <= band.b) cols.push_back(i);
    out.vectors = Eigen::MatrixXcd(op.dim(), int(cols.size()));
    for (size_t c = 0; c < cols.size(); ++c) {
        out.evals.push_back(f.evals[size_t(cols[c])]);
        out.vectors.col(long(c)) = f.vectors.col(cols[c]);
        out.global_index.push_back(cols[c]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// eigenvalue flow across the deformation parameter

struct trajectory_point {
    double t = 0.0;
    std::vector<double> evals;       // all eigenvalues, ascending
    std::vector<int> band_cols;      // columns inside the tracking band
    std::vector<int> track;          // per band column: persistent track id
    std::vector<double> hadamard;    // per band column: <dtP u, u>
    std::vector<char> crossing;      // per band column: matching flagged a crossing
    std::vector<double> speed;       // per band column: (E(t_i) - E(t_{i-1}))/dt for its track
};

struct spectrum_trajectory {
    std::vector<trajectory_point> points;
    int n_tracks = 0;
    double speed_bound = 0.0;  // max row sum of |dtP| over the grid + tolerance
    int bisections = 0;
    int flagged_crossings = 0;

    // eigenvalue series of one track (nan when absent)
    std::vector<double> track_series(int id) const {
        std::vector<double> s(points.size(), std::numeric_limits<double>::quiet_NaN());
        for (size_t i = 0; i < points.size(); ++i)
            for (size_t c = 0; c < points[i].track.size(); ++c)
                if (points[i].track[c] == id)
                    s[i] = points[i].evals[size_t(points[i].band_cols[c])];
        return s;
    }
};

struct track_options {
    double overlap_threshold = 0.5;
    int max_bisect = 6;
    double band_pad = 0.0;  // widen the tracked energy range beyond [a,b]
    unsigned threads = 0;
};

namespace detail {

struct flow_frame {
    double t;
    std::vector<double> evals;
    std::vector<int> band_cols;
    Eigen::MatrixXcd vec_band;       // eigenvectors for band columns
    std::vector<double> hadamard;
};

inline flow_frame make_frame(const fourier_hamiltonian& model, const fourier_hamiltonian& dtH,
                             double h, const kvec& maslov, const std::vector<kvec>& modes,
                             const energy_band& band, double pad, double t) {
    flow_frame fr;
    fr.t = t;
    auto op = quantize_on(modes, model, h, maslov, t);
    auto full = spectrum_full(op);
    fr.evals = full.evals;
    for (int i = 0; i < int(full.evals.size()); ++i)
        if (full.evals[size_t(i)] >= band.a - pad && full.evals[size_t(i)] <= band.b + pad)
            fr.band_cols.push_back(i);
    fr.vec_band = Eigen::MatrixXcd(op.dim(), int(fr.band_cols.size()));
    for (size_t c = 0; c < fr.band_cols.size(); ++c)
        fr.vec_band.col(long(c)) = full.vectors.col(fr.band_cols[c]);
    auto opdt = quantize_on(modes, dtH, h, maslov, t);
    for (size_t c = 0; c < fr.band_cols.size(); ++c) {
        cplx v = (fr.vec_band.col(long(c)).adjoint() * (opdt.mat * fr.vec_band.col(long(c))))(0);
        fr.hadamard.push_back(v.real());
    }
    return fr;
}

struct match_result {
    std::vector<int> assign;     // col index in frame b per col of frame a (-1 none)
    std::vector<double> overlap;
    double min_overlap = 1.0;
};

inline match_result match_frames(const flow_frame& a, const flow_frame& b) {
    Eigen::MatrixXcd O = a.vec_band.adjoint() * b.vec_band;
    int na = int(a.band_cols.size()), nb = int(b.band_cols.size());
    std::vector<std::tuple<double, int, int>> cand;
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j) {
            double v = std::abs(O(i, j));
            if (v > 0.05) cand.emplace_back(v, i, j);
        }
    std::sort(cand.begin(), cand.end(), [](auto& x, auto& y) { return std::get<0>(x) > std::get<0>(y); });
    match_result r;
    r.assign.assign(size_t(na), -1);
    r.overlap.assign(size_t(na), 0.0);
    std::vector<char> used(size_t(nb), 0);
    for (auto& [v, i, j] : cand) {
        if (r.assign[size_t(i)] != -1 || used[size_t(j)]) continue;
        r.assign[size_t(i)] = j;
        r.overlap[size_t(i)] = v;
        used[size_t(j)] = 1;
    }
    r.min_overlap = 1.0;
    for (int i = 0; i < na; ++i)
        if (r.assign[size_t(i)] >= 0) r.min_overlap = std::min(r.min_overlap, r.overlap[size_t(i)]);
        else r.min_overlap = 0.0;
    return r;
}

}  // namespace detail

// Track eigenpairs of the quantized family across the parameter grid by
// maximal-overlap assignment, bisecting steps whose matching is ambiguous
// (up to max_bisect times), then flagging residual ambiguity as crossings.
inline spectrum_trajectory track_flow(const fourier_hamiltonian& model, double h,
                                      const kvec& maslov, const std::vector<double>& t_grid,
                                      const mode_window& window, const track_options& topts = {}) {
    if (t_grid.size() < 2) throw validation_error("t_grid", "need >= 2 points");
    for (size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1]))
            throw validation_error("t_grid", "must be strictly increasing");

    // one mode set across the grid keeps frames comparable
    auto modes = lattice_modes(model, h, maslov, window, t_grid.front());
    auto dtH = model.partial_t();

    spectrum_trajectory out;

    // speed bound: max row sum of the quantized dt symbol over grid ends
    {
        auto o1 = quantize_on(modes, dtH, h, maslov, t_grid.front());
        auto o2 = quantize_on(modes, dtH, h, maslov, t_grid.back());
        out.speed_bound = std::max(o1.max_abs_row_sum(), o2.max_abs_row_sum()) + 1e-6;
    }

    std::vector<detail::flow_frame> frames(t_grid.size());
    par_for(t_grid.size(), [&](size_t i) {
        frames[i] = detail::make_frame(model, dtH, h, maslov, modes, window.band, topts.band_pad,
                                       t_grid[i]);
    }, topts.threads);

    // sequential reduction with bisection refinement
    std::vector<detail::flow_frame> chain;
    std::vector<detail::match_result> links;
    std::function<void(const detail::flow_frame&, const detail::flow_frame&, int)> process =
        [&](const detail::flow_frame& a, const detail::flow_frame& b, int depth) {
            auto m = detail::match_frames(a, b);
            if (m.min_overlap < topts.overlap_threshold && depth < topts.max_bisect) {
                ++out.bisections;
                double tm = 0.5 * (a.t + b.t);
                auto mid = detail::make_frame(model, dtH, h, maslov, modes, window.band,
                                              topts.band_pad, tm);
                process(a, mid, depth + 1);
                process(chain.back(), b, depth + 1);
                return;
            }
            links.push_back(std::move(m));
            chain.push_back(b);
        };

    chain.push_back(frames[0]);
    for (size_t i = 1; i < frames.size(); ++i) process(chain.back(), frames[i], 0);

    // assemble track ids
    out.points.resize(chain.size());
    int next_track = 0;
    std::vector<int> cur_tracks(chain[0].band_cols.size());
    for (auto& tid : cur_tracks) tid = next_track++;
    auto fill_point = [&](trajectory_point& p, const detail::flow_frame& f,
                          const std::vector<int>& tracks) {
        p.t = f.t;
        p.evals = f.evals;
        p.band_cols = f.band_cols;
        p.track = tracks;
        p.hadamard = f.hadamard;
        p.crossing.assign(f.band_cols.size(), 0);
        p.speed.assign(f.band_cols.size(), std::numeric_limits<double>::quiet_NaN());
    };
    fill_point(out.points[0], chain[0], cur_tracks);
    for (size_t li = 0; li < links.size(); ++li) {
        const auto& m = links[li];
        const auto& fa = chain[li];
        const auto& fb = chain[li + 1];
        std::vector<int> nxt(fb.band_cols.size(), -1);
        std::vector<char> crossing(fb.band_cols.size(), 0);
        std::vector<double> speed(fb.band_cols.size(), std::numeric_limits<double>::quiet_NaN());
        double dt = fb.t - fa.t;
        for (size_t i = 0; i < m.assign.size(); ++i) {
            int j = m.assign[i];
            if (j < 0) continue;
            nxt[size_t(j)] = cur_tracks[i];
            if (m.overlap[i] < topts.overlap_threshold) {
                crossing[size_t(j)] = 1;
                ++out.flagged_crossings;
            }
            double Ea = fa.evals[size_t(fa.band_cols[i])];
            double Eb = fb.evals[size_t(fb.band_cols[size_t(j)])];
            speed[size_t(j)] = (Eb - Ea) / dt;
        }
        for (auto& tid : nxt)
            if (tid < 0) tid = next_track++;
        fill_point(out.points[li + 1], fb, nxt);
        out.points[li + 1].crossing = crossing;
        out.points[li + 1].speed = speed;
        cur_tracks = nxt;
    }
    out.n_tracks = next_track;
    return out;
}

// ---------------------------------------------------------------------------
// quasi-eigenvalue families attached to a nonresonant action set

struct quasi_eigen_family {
    int n = 0;
    double h = 0.0;
    kvec maslov;
    double t = 0.0;
    double L = 2.0;
    std::vector<kvec> members;                 // index set
    std::vector<std::vector<double>> actions;  // h(m + theta/4) per member
    std::vector<double> mu;                    // quasi-eigenvalues
    double window_halfwidth = 0.0;             // h^{n+1}
    double predicted_count = 0.0;              // (2 pi h)^{-n} mu(T^n x S fattened)
};

// K0: callable (action vector, t) -> double
template <class K0>
quasi_eigen_family quasi_eigenvalues(K0&& k0, double h, const kvec& maslov,
                                     const std::vector<std::vector<double>>& S_points, double L,
                                     double t) {
    if (S_points.empty()) throw domain_error("quasi_eigenvalues: empty action set");
    int n = int(S_points.front().size());
    quasi_eigen_family fam;
    fam.n = n;
    fam.h = h;
    fam.maslov = maslov;
    fam.t = t;
    fam.L = L;
    fam.window_halfwidth = std::pow(h, n + 1);

    auto dist_to_S = [&](const std::vector<double>& I) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : S_points) {
            double s = 0;
            for (int j = 0; j < n; ++j) s += (I[size_t(j)] - p[size_t(j)]) * (I[size_t(j)] - p[size_t(j)]);
            best = std::min(best, std::sqrt(s));
        }
        return best;
    };

    std::vector<double> lo(size_t(n), 1e300), hi(size_t(n), -1e300);
    for (const auto& p : S_points)
        for (int j = 0; j < n; ++j) {
            lo[size_t(j)] = std::min(lo[size_t(j)], p[size_t(j)]);
            hi[size_t(j)] = std::max(hi[size_t(j)], p[size_t(j)]);
        }

    std::vector<int> mlo((size_t(n))), mhi((size_t(n)));
    for (int j = 0; j < n; ++j) {
        mlo[size_t(j)] = int(std::floor((lo[size_t(j)] - L * h) / h)) - 1;
        mhi[size_t(j)] = int(std::ceil((hi[size_t(j)] + L * h) / h)) + 1;
    }
    kvec m = mlo;
    while (true) {
        std::vector<double> I((size_t(n)));
        for (int j = 0; j < n; ++j)
            I[size_t(j)] = h * (double(m[size_t(j)]) + 0.25 * double(maslov[size_t(j)]));
        if (dist_to_S(I) < L * h) {
            fam.members.push_back(m);
            fam.actions.push_back(I);
            fam.mu.push_back(k0(I, t));
        }
        int j = n - 1;
        while (j >= 0 && ++m[size_t(j)] > mhi[size_t(j)]) m[size_t(j)] = mlo[size_t(j)], --j;
        if (j < 0) break;
    }

    // volume prediction over the L h fattening of S, by subgrid counting
    {
        int G = 96;
        double cell = 1.0;
        std::vector<double> glo((size_t(n))), ghi((size_t(n)));
        for (int j = 0; j < n; ++j) {
            glo[size_t(j)] = lo[size_t(j)] - (L + 1) * h;
            ghi[size_t(j)] = hi[size_t(j)] + (L + 1) * h;
            cell *= (ghi[size_t(j)] - glo[size_t(j)]) / G;
        }
        size_t count = 0;
        std::vector<int> idx(size_t(n), 0);
        while (true) {
            std::vector<double> I((size_t(n)));
            for (int j = 0; j < n; ++j)
                I[size_t(j)] = glo[size_t(j)] +
                               (ghi[size_t(j)] - glo[size_t(j)]) * (idx[size_t(j)] + 0.5) / G;
            if (dist_to_S(I) < L * h) ++count;
            int j = n - 1;
            while (j >= 0 && ++idx[size_t(j)] == G) idx[size_t(j)] = 0, --j;
            if (j < 0) break;
        }
        double vol = double(count) * cell;
        fam.predicted_count = vol / std::pow(h, n);
    }
    return fam;
}

// residual norms ||(P - mu_m) e_m|| for the lattice basis quasimodes of a
// normal-form-side operator
inline std::vector<double> quasimode_residual(const lattice_operator& op,
                                              const quasi_eigen_family& fam) {
    std::vector<double> out(fam.members.size(), 0.0);
    for (size_t i = 0; i < fam.members.size(); ++i) {
        auto it = op.index.find(fam.members[i]);
        if (it == op.index.end()) {
            out[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        int col = it->second;
        double s = 0;
        for (int r = 0; r < op.dim(); ++r) {
            cplx v = op.mat(r, col);
            if (r == col) v -= fam.mu[i];
            s += std::norm(v);
        }
        out[i] = std::sqrt(s);
    }
    return out;
}

}  // namespace kamlab
