#pragma once

#include <Eigen/Dense>

#include <set>

#include "kamlab/hamiltonian.hpp"

namespace kamlab {

// ---------------------------------------------------------------------------
// strip norm: sum_k sup|c_k| e^{|k| s}, with the coefficient sup taken as a
// termwise majorant over the r-fattened action domain and the |t| range.
// Upper-bounds the sup norm on the real domain and is submultiplicative
// within a common strip.

inline double strip_norm(const fourier_hamiltonian& F, double s, double r, double t_max = 0.5) {
    if (s < 0 || r < 0) throw validation_error("strip_norm", "s, r must be >= 0");
    // majorize each coefficient in box-centred coordinates: polynomials fitted
    // on a displaced box have cancelling origin-monomial coefficients, and the
    // centred expansion restores a faithful termwise bound
    std::vector<double> center((size_t(F.dim()))), halfw((size_t(F.dim())));
    for (int j = 0; j < F.dim(); ++j) {
        center[size_t(j)] = 0.5 * (F.domain().lo[size_t(j)] + F.domain().hi[size_t(j)]);
        halfw[size_t(j)] = 0.5 * (F.domain().hi[size_t(j)] - F.domain().lo[size_t(j)]) + r;
    }
    double acc = 0.0;
    for (const auto& [k, c] : F.modes())
        acc += c.shifted_arg(center).majorant(halfw, t_max) * std::exp(l1_norm(k) * s);
    return acc;
}

// ---------------------------------------------------------------------------
// retained action subdomain: sampled grid indicator plus a ball fattening

struct action_indicator {
    std::vector<std::vector<double>> points;  // retained grid points
    double fatten = 0.0;                      // ball radius around each point
    double grid_h = 0.0;

    bool contains(const std::vector<double>& I) const {
        for (const auto& p : points) {
            double s = 0;
            for (size_t j = 0; j < p.size(); ++j) s += (I[j] - p[j]) * (I[j] - p[j]);
            if (std::sqrt(s) <= fatten) return true;
        }
        return false;
    }

    std::vector<double> sample(rng_stream& rng) const {
        if (points.empty()) throw empty_domain_error("action_indicator: empty");
        for (int tries = 0; tries < 1000; ++tries) {
            const auto& p = points[size_t(rng.next() % points.size())];
            std::vector<double> I(p.size());
            double s = 0;
            for (size_t j = 0; j < p.size(); ++j) {
                double x = rng.uniform(-fatten, fatten);
                I[j] = p[j] + x;
                s += x * x;
            }
            if (s <= fatten * fatten) return I;
        }
        throw sampling_failure_error("action_indicator::sample stalled");
    }
};

struct kam_options {
    int M = 0;                 // Fourier truncation; 0 = auto from coefficient decay
    double c_div = 0.1;        // divisor cutoff |<w,k>| >= c_div/|k|^2 on retained actions
    double margin = 0.04;      // boundary margin rho~ for the retained subdomain
    double s = 0.5, r = 0.1;   // strip parameters for norms
    double shrink_s = 0.8, shrink_r = 0.5;
    double eps0 = 0.2;         // smallness threshold on strip_norm(H1)
    int fit_degree_extra = 2;  // refit degree = input I-degree + extra
    int node_factor = 2;       // I-nodes per axis = node_factor * (fit_degree + 1)
    int d1_grid = 25;          // indicator resolution per axis
    double fixed_point_tol = 1e-14;
    int fixed_point_max = 80;
    double refit_tol = 1e-9;   // absolute residual gate ...
    double refit_rel = 0.05;   // ... relaxed by this fraction of the remainder scale
    double prune_rel = 1e-13;
    double auto_floor_digits = 14.0;  // decimal depth of the auto-truncation rule
    double t_majorant = 0.5;
    unsigned threads = 0;
};

struct kam_diagnostics {
    double norm_before = 0, norm_after = 0;
    int M = 0;
    double c_div = 0;
    double refit_residual = 0;
    int fp_iter_max = 0;
    double reality_defect = 0;
    double s_out = 0, r_out = 0;
};

struct kam_step_result {
    std::map<kvec, poly> phi_modes;  // numerators H1_k feeding the generating function
    poly h0_new;                     // integrable part: input zero mode, coefficient-exact
    fourier_hamiltonian h_total;     // transformed Hamiltonian (refit)
    fourier_hamiltonian h1_new;      // h_total - h0_new; k=0 slot holds the higher-order mean
    action_indicator d1;
    kam_diagnostics diagnostics;

    // stored pieces of the canonical change, retained so tests can probe it
    poly h0_in;
    int M = 0;
    double fixed_point_tol = 1e-14;
    int fixed_point_max = 80;

    // old (theta, I) from new (theta', I') via the implicit generating relations
    std::pair<std::vector<double>, std::vector<double>> map_point(
        const std::vector<double>& theta_new, const std::vector<double>& I_new) const;
};

namespace detail {

inline std::vector<double> chebyshev_nodes(double lo, double hi, int count) {
    std::vector<double> x(size_t(count), 0.0);
    for (int i = 0; i < count; ++i) {
        double c = std::cos(M_PI * (2.0 * i + 1.0) / (2.0 * count));
        x[size_t(i)] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * c;
    }
    return x;
}

// axis-wise DFT on a full tensor grid (C-order, every axis of size N);
// output index idx maps to wave number idx, or idx - N past the Nyquist fold
inline void dft_axis(std::vector<cplx>& data, int n_axes, int axis, int N) {
    size_t stride = 1;
    for (int a = axis + 1; a < n_axes; ++a) stride *= size_t(N);
    size_t outer = 1;
    for (int a = 0; a < axis; ++a) outer *= size_t(N);
    std::vector<cplx> tw(size_t(N) * size_t(N));
    for (int k = 0; k < N; ++k)
        for (int j = 0; j < N; ++j)
            tw[size_t(k) * size_t(N) + size_t(j)] = std::polar(1.0, -TWO_PI * k * j / N);
    std::vector<cplx> buf((size_t(N)));
    for (size_t o = 0; o < outer; ++o)
        for (size_t inner = 0; inner < stride; ++inner) {
            size_t base = o * stride * size_t(N) + inner;
            for (int k = 0; k < N; ++k) {
                cplx acc = 0;
                const cplx* row = &tw[size_t(k) * size_t(N)];
                for (int j = 0; j < N; ++j) acc += row[j] * data[base + size_t(j) * stride];
                buf[size_t(k)] = acc / double(N);
            }
            for (int k = 0; k < N; ++k) data[base + size_t(k) * stride] = buf[size_t(k)];
        }
}

// expand p(x) with x_j = (I_j - shift_j)/scale_j into a polynomial in I
inline poly denormalize(const poly& p, const std::vector<double>& scale,
                        const std::vector<double>& shift) {
    int n = p.n_vars();
    std::vector<poly> axis((size_t(n)));
    for (int j = 0; j < n; ++j) {
        std::vector<int> e(size_t(n), 0);
        e[size_t(j)] = 1;
        axis[size_t(j)] = poly::monomial(n, e, 0, 1.0 / scale[size_t(j)]) +
                          poly::constant(n, -shift[size_t(j)] / scale[size_t(j)]);
    }
    poly out(n);
    for (const auto& [e, c] : p.terms()) {
        poly term = poly::constant(n, c);
        for (int j = 0; j < n; ++j)
            for (int rep = 0; rep < e[size_t(j)]; ++rep) term = term * axis[size_t(j)];
        if (e[size_t(n)] > 0)
            term = term * poly::monomial(n, std::vector<int>(size_t(n), 0), e[size_t(n)], 1.0);
        out = out + term;
    }
    return out;
}

// per-axis powers of e^{i theta_j} for fast mode phases
struct axis_powers {
    int n = 0, K = 0;
    std::vector<cplx> p;  // per axis, exponents -K..K

    void init(int n_, int K_) {
        n = n_;
        K = K_;
        p.assign(size_t(n) * size_t(2 * K + 1), cplx(1.0));
    }
    void compute(const double* th) {
        for (int j = 0; j < n; ++j) {
            cplx e = std::polar(1.0, th[j]);
            cplx* row = &p[size_t(j) * size_t(2 * K + 1)];
            row[K] = 1.0;
            for (int q = 1; q <= K; ++q) {
                row[K + q] = row[K + q - 1] * e;
                row[K - q] = std::conj(row[K + q]);
            }
        }
    }
    cplx mode(const int* k) const {
        cplx v = p[size_t(K + k[0])];
        for (int j = 1; j < n; ++j) v *= p[size_t(j) * size_t(2 * K + 1) + size_t(K + k[j])];
        return v;
    }
};

// monomial value table up to a fixed per-axis degree
struct monomial_table {
    int n = 0, D = 0;
    std::vector<double> vals;

    void init(int n_, int D_) {
        n = n_;
        D = D_;
        size_t total = 1;
        for (int j = 0; j < n; ++j) total *= size_t(D + 1);
        vals.assign(total, 1.0);
    }
    void compute(const double* I) {
        // C-order over exponents
        std::vector<int> e(size_t(n), 0);
        size_t idx = 0;
        std::vector<double> axis_pow(size_t(n) * size_t(D + 1), 1.0);
        for (int j = 0; j < n; ++j)
            for (int d = 1; d <= D; ++d)
                axis_pow[size_t(j) * size_t(D + 1) + size_t(d)] =
                    axis_pow[size_t(j) * size_t(D + 1) + size_t(d - 1)] * I[j];
        while (true) {
            double v = 1.0;
            for (int j = 0; j < n; ++j) v *= axis_pow[size_t(j) * size_t(D + 1) + size_t(e[size_t(j)])];
            vals[idx++] = v;
            int j = n - 1;
            while (j >= 0 && ++e[size_t(j)] > D) e[size_t(j--)] = 0;
            if (j < 0) break;
        }
    }
    size_t index_of(const poly::key& e) const {
        size_t idx = 0;
        for (int j = 0; j < n; ++j) idx = idx * size_t(D + 1) + size_t(e[size_t(j)]);
        return idx;
    }
};

struct compiled_poly {
    struct term {
        size_t idx;
        cplx c;
    };
    std::vector<term> terms;

    static compiled_poly make(const poly& p, const monomial_table& tab) {
        compiled_poly out;
        for (const auto& [e, c] : p.terms()) {
            if (e.back() != 0) throw error("compiled_poly: expected t-frozen polynomial");
            out.terms.push_back({tab.index_of(e), c});
        }
        return out;
    }
    cplx eval(const monomial_table& tab) const {
        cplx acc = 0;
        for (const auto& t : terms) acc += t.c * tab.vals[t.idx];
        return acc;
    }
};

}  // namespace detail

inline std::pair<std::vector<double>, std::vector<double>> kam_step_result::map_point(
    const std::vector<double>& theta_new, const std::vector<double>& I_new) const {
    int n = int(I_new.size());
    std::vector<poly> grad((size_t(n)));
    auto hess = std::vector<std::vector<poly>>(size_t(n), std::vector<poly>(size_t(n)));
    for (int a = 0; a < n; ++a) {
        grad[size_t(a)] = h0_in.d_dI(a);
        for (int b = 0; b < n; ++b) hess[size_t(a)][size_t(b)] = grad[size_t(a)].d_dI(b);
    }
    std::vector<double> w((size_t(n)));
    for (int a = 0; a < n; ++a) w[size_t(a)] = grad[size_t(a)].eval_real(I_new, 0.0);

    struct mode_data {
        kvec k;
        cplx A;
        std::vector<cplx> dA;
        double den;
        std::vector<double> dden;
    };
    std::vector<mode_data> md;
    for (const auto& [k, c] : phi_modes) {
        mode_data m;
        m.k = k;
        m.A = c.eval(I_new, 0.0);
        m.dA.resize((size_t(n)));
        m.dden.resize((size_t(n)));
        for (int j = 0; j < n; ++j) m.dA[size_t(j)] = c.d_dI(j).eval(I_new, 0.0);
        m.den = 0;
        for (int j = 0; j < n; ++j) m.den += w[size_t(j)] * k[size_t(j)];
        for (int j = 0; j < n; ++j) {
            double d = 0;
            for (int a = 0; a < n; ++a)
                d += hess[size_t(j)][size_t(a)].eval_real(I_new, 0.0) * k[size_t(a)];
            m.dden[size_t(j)] = d;
        }
        md.push_back(std::move(m));
    }

    auto phi_I = [&](const std::vector<double>& th) {
        std::vector<double> out(size_t(n), 0.0);
        for (const auto& m : md) {
            double phase = 0;
            for (int j = 0; j < n; ++j) phase += m.k[size_t(j)] * th[size_t(j)];
            cplx e = std::polar(1.0, phase);
            for (int j = 0; j < n; ++j) {
                cplx v = cplx(0, 1) * (m.dA[size_t(j)] * m.den - m.A * m.dden[size_t(j)]) /
                         (m.den * m.den) * e;
                out[size_t(j)] += v.real();
            }
        }
        return out;
    };
    auto phi_theta = [&](const std::vector<double>& th) {
        std::vector<double> out(size_t(n), 0.0);
        for (const auto& m : md) {
            double phase = 0;
            for (int j = 0; j < n; ++j) phase += m.k[size_t(j)] * th[size_t(j)];
            cplx e = std::polar(1.0, phase);
            for (int j = 0; j < n; ++j)
                out[size_t(j)] += (-double(m.k[size_t(j)]) * m.A / m.den * e).real();
        }
        return out;
    };

    std::vector<double> th = theta_new;
    for (int it = 0; it < fixed_point_max; ++it) {
        auto dI = phi_I(th);
        std::vector<double> thn((size_t(n)));
        double delta = 0;
        for (int j = 0; j < n; ++j) {
            thn[size_t(j)] = theta_new[size_t(j)] - dI[size_t(j)];
            delta = std::max(delta, std::abs(thn[size_t(j)] - th[size_t(j)]));
        }
        th = thn;
        if (delta < fixed_point_tol) break;
        if (it == fixed_point_max - 1)
            throw step_failure_error("kam_step: fixed point for the angle map diverged");
    }
    auto dTh = phi_theta(th);
    std::vector<double> I((size_t(n)));
    for (int j = 0; j < n; ++j) I[size_t(j)] = I_new[size_t(j)] + dTh[size_t(j)];
    return {th, I};
}

// ---------------------------------------------------------------------------
// One step of the small-divisor iteration at a frozen parameter value.
//
// The generating function Phi(I', theta) = i sum_{0<|k|<=M} H1_k(I')
// e^{i<k,theta>} / <w(I'),k> induces a canonical change solved pointwise by
// fixed-point iteration; the composed Hamiltonian is sampled on a
// 2M-per-axis angle grid and a Chebyshev action grid, then refit onto the
// Fourier x polynomial representation. The integrable part of the output is
// the input zero mode verbatim, so the coefficient identity
// h0_new = H0 + torus average of H1 holds exactly.
inline kam_step_result kam_step(const fourier_hamiltonian& H_in, double t,
                                const kam_options& opts = {}) {
    const int n = H_in.dim();
    fourier_hamiltonian H = H_in.freeze_t(t);
    if (H.domain().type != action_domain::kind::box)
        throw validation_error("kam_step", "needs a box action domain; re-domain the model first");
    if (!H.reality_holds(1e-11)) throw precondition_error("kam_step: reality condition violated");

    poly c0 = H.zero_mode();
    fourier_hamiltonian H1 = H.angle_part();
    const double eps = strip_norm(H1, opts.s, opts.r, 0.0);

    kam_step_result R;
    R.h0_in = c0;
    R.fixed_point_tol = opts.fixed_point_tol;
    R.fixed_point_max = opts.fixed_point_max;
    R.diagnostics.norm_before = eps;
    R.diagnostics.c_div = opts.c_div;
    R.diagnostics.s_out = opts.s * opts.shrink_s;
    R.diagnostics.r_out = opts.r * opts.shrink_r;
    R.h0_new = c0;

    // nondegeneracy of the frequency map on the working box
    {
        rng_stream rng(12345);
        for (int s = 0; s < 32; ++s) {
            auto I = H.domain().sample(rng);
            if (std::abs(H.hessian_det(I, 0.0)) < 1e-10)
                throw degeneracy_error("kam_step: frequency map degenerate on domain");
        }
    }

    std::vector<double> absbox((size_t(n)));
    for (int j = 0; j < n; ++j)
        absbox[size_t(j)] =
            std::max(std::abs(H.domain().lo[size_t(j)]), std::abs(H.domain().hi[size_t(j)]));
    const double h_scale = std::max(1.0, c0.majorant(absbox, 0.0));

    // divisor predicate: all 0 < |k| <= kmax_l1 for the literal retained-set
    // definition, or just the modes actually present when active_only is set
    auto divisor_ok = [&](const std::vector<double>& I, int kmax_l1, bool active_only,
                          double slack) {
        auto w = H.frequency(I, 0.0);
        bool ok = true;
        auto test = [&](const kvec& k) {
            if (!ok || is_zero(k)) return;
            double dot = 0;
            for (int j = 0; j < n; ++j) dot += w[size_t(j)] * k[size_t(j)];
            double kk = double(l1_norm(k));
            if (std::abs(dot) < slack * opts.c_div / (kk * kk)) ok = false;
        };
        if (active_only) {
            for (const auto& [k, c] : H1.modes()) test(k);
        } else {
            for_each_kvec(n, kmax_l1, test);
        }
        return ok;
    };

    int M = opts.M;
    if (M <= 0) {
        // finite Fourier support: the composed Hamiltonian's mode amplitudes
        // decay like lambda^{|k|} with lambda read off the input coefficients
        // (sampled pointwise; majorants overshoot for refit polynomials), so
        // truncate where that decay hits the coefficient noise floor
        std::map<kvec, double> amp;
        rng_stream rng(771177);
        int kept = 0;
        for (int s = 0; s < 256 && kept < 48; ++s) {
            auto I = H.domain().sample(rng);
            if (!divisor_ok(I, 0, true, 0.5)) continue;
            ++kept;
            for (const auto& [k, c] : H1.modes()) {
                double a = std::abs(c.eval(I, 0.0));
                auto [it, fresh] = amp.emplace(k, a);
                if (!fresh) it->second = std::max(it->second, a);
            }
        }
        double lambda = 0.0;
        int k_eff = 1;
        for (const auto& [k, a] : amp) {
            if (a < opts.prune_rel * h_scale) continue;
            k_eff = std::max(k_eff, l1_norm(k));
            lambda = std::max(lambda, std::pow(a / h_scale, 1.0 / double(l1_norm(k))));
        }
        lambda = std::min(lambda, 0.5);
        // the same decay governs products in the composition, so the noise
        // floor depth already covers the support growth; M only needs to
        // stay ahead of the significant input support
        M = lambda > 0 ? int(std::ceil(opts.auto_floor_digits / -std::log10(lambda))) : 4;
        M = std::max(M, k_eff + 2);
    }
    M = std::max(M, 4);
    M = std::min(M, 48);
    R.M = M;
    R.diagnostics.M = M;

    {
        R.d1.fatten = 0.5 * opts.margin;
        int G = opts.d1_grid;
        R.d1.grid_h = 0;
        std::vector<int> idx(size_t(n), 0);
        bool done = false;
        while (!done) {
            std::vector<double> I((size_t(n)));
            for (int j = 0; j < n; ++j) {
                double lo = H.domain().lo[size_t(j)], hi = H.domain().hi[size_t(j)];
                I[size_t(j)] = lo + (hi - lo) * (idx[size_t(j)] + 0.5) / G;
                R.d1.grid_h = std::max(R.d1.grid_h, (hi - lo) / G);
            }
            if (H.domain().dist_to_boundary(I) > opts.margin && divisor_ok(I, M, false, 1.0))
                R.d1.points.push_back(I);
            int j = n - 1;
            while (j >= 0 && ++idx[size_t(j)] == G) idx[size_t(j--)] = 0;
            if (j < 0) done = true;
        }
        if (R.d1.points.empty())
            throw empty_domain_error("kam_step: divisor cutoff left no retained actions");
    }

    if (H1.modes().empty()) {
        // identity change
        R.h_total = H;
        R.h1_new = fourier_hamiltonian(n, H.k_max(), H.domain());
        R.diagnostics.norm_after = 0.0;
        return R;
    }
    for (const auto& [k, c] : H1.modes()) R.phi_modes[k] = c;

    // sampling grids
    const int Ntheta = 2 * M;
    const int d_fit = c0.max_degree_I() + opts.fit_degree_extra;
    const int nodes_per_axis = std::max(opts.node_factor * (d_fit + 1), d_fit + 2);

    std::vector<std::vector<double>> node_axis((size_t(n)));
    for (int j = 0; j < n; ++j)
        node_axis[size_t(j)] = detail::chebyshev_nodes(H.domain().lo[size_t(j)] + 1e-9,
                                                       H.domain().hi[size_t(j)] - 1e-9,
                                                       nodes_per_axis);
    // per-node constants of the generating function
    struct phi_mode {
        kvec k;
        std::vector<cplx> cI;   // i (dA den - A dden)/den^2 per action axis
        std::vector<cplx> cTh;  // -k_j A / den
    };
    auto make_phi = [&](const std::vector<double>& Ip, std::vector<phi_mode>& pm) {
        // returns a bound on the contraction factor of the angle fixed point
        auto w = H.frequency(Ip, 0.0);
        auto hess = H.hessian(Ip, 0.0);
        pm.clear();
        double lip = 0.0;
        for (const auto& [k, c] : R.phi_modes) {
            phi_mode m;
            m.k = k;
            cplx A = c.eval(Ip, 0.0);
            double den = 0;
            for (int j = 0; j < n; ++j) den += w[size_t(j)] * k[size_t(j)];
            if (den == 0.0) return std::numeric_limits<double>::infinity();
            m.cI.resize((size_t(n)));
            m.cTh.resize((size_t(n)));
            double amp = 0;
            for (int j = 0; j < n; ++j) {
                cplx dA = c.d_dI(j).eval(Ip, 0.0);
                double dden = 0;
                for (int a = 0; a < n; ++a) dden += hess[size_t(j)][size_t(a)] * k[size_t(a)];
                m.cI[size_t(j)] = cplx(0, 1) * (dA * den - A * dden) / (den * den);
                m.cTh[size_t(j)] = -double(k[size_t(j)]) * A / den;
                amp = std::max(amp, std::abs(m.cI[size_t(j)]));
            }
            lip += amp * double(l1_norm(k));
            pm.push_back(std::move(m));
        }
        return lip;
    };

    // smallness precondition, measured pointwise at divisor-safe samples (the
    // termwise majorant overshoots for refit polynomials)
    {
        rng_stream rng(55221);
        double eps_pt = 0.0;
        int kept = 0;
        for (int s = 0; s < 512 && kept < 64; ++s) {
            auto I = H.domain().sample(rng);
            if (!divisor_ok(I, 0, true, 0.5)) continue;
            ++kept;
            double acc = 0;
            for (const auto& [k, c] : H1.modes()) acc += std::abs(c.eval(I, 0.0));
            eps_pt = std::max(eps_pt, acc);
        }
        if (eps_pt > opts.eps0)
            throw precondition_error("kam_step: perturbation norm " + std::to_string(eps_pt) +
                                     " above threshold " + std::to_string(opts.eps0));
    }

    // candidate Chebyshev nodes; keep those where the active divisors are
    // safe (factor-2 slack against the membership cutoff) and the angle
    // fixed point is an actual contraction
    std::vector<std::vector<double>> nodes;
    std::vector<std::vector<phi_mode>> node_phi;
    {
        std::vector<int> idx(size_t(n), 0);
        bool done = false;
        while (!done) {
            std::vector<double> I((size_t(n)));
            for (int j = 0; j < n; ++j)
                I[size_t(j)] = node_axis[size_t(j)][size_t(idx[size_t(j)])];
            if (divisor_ok(I, M, true, 0.5)) {
                std::vector<phi_mode> pm;
                if (make_phi(I, pm) < 0.5) {
                    nodes.push_back(I);
                    node_phi.push_back(std::move(pm));
                }
            }
            int j = n - 1;
            while (j >= 0 && ++idx[size_t(j)] == nodes_per_axis) idx[size_t(j--)] = 0;
            if (j < 0) done = true;
        }
    }
    size_t basis_size = 1;
    for (int j = 0; j < n; ++j) basis_size *= size_t(d_fit + 1);
    if (nodes.size() < basis_size + 2)
        throw empty_domain_error("kam_step: too few valid refit nodes after divisor gating");


    // compiled form of the full Hamiltonian for the hot loop
    const int D_tab = std::max(c0.max_degree_I(), [&] {
        int d = 0;
        for (const auto& [k, c] : H.modes()) d = std::max(d, c.max_degree_I());
        return d;
    }());
    struct cmode {
        kvec k;
        detail::compiled_poly c;
    };
    detail::monomial_table tab_proto;
    tab_proto.init(n, D_tab);
    std::vector<cmode> cmodes;
    int K_axis = 0;
    for (const auto& [k, c] : H.modes()) {
        cmodes.push_back({k, detail::compiled_poly::make(c, tab_proto)});
        for (int j = 0; j < n; ++j) K_axis = std::max(K_axis, std::abs(k[size_t(j)]));
    }

    // composed values H(chi(theta', I')) on the angle grid, per node
    size_t theta_count = 1;
    for (int j = 0; j < n; ++j) theta_count *= size_t(Ntheta);
    std::vector<std::vector<cplx>> values(nodes.size());
    par_for(nodes.size(), [&](size_t ni) {
        const auto& pm = node_phi[ni];
        detail::axis_powers ap;
        ap.init(n, std::max(M, K_axis));
        detail::monomial_table tab;
        tab.init(n, D_tab);
        std::vector<cplx> vals(theta_count);
        std::vector<double> thp((size_t(n))), th((size_t(n))), thn((size_t(n))),
            I((size_t(n)));
        for (size_t ti = 0; ti < theta_count; ++ti) {
            size_t rem = ti;
            for (int j = n - 1; j >= 0; --j) {
                thp[size_t(j)] = TWO_PI * double(rem % size_t(Ntheta)) / Ntheta;
                rem /= size_t(Ntheta);
            }
            th = thp;
            for (int it = 0;; ++it) {
                ap.compute(th.data());
                double delta = 0;
                for (int j = 0; j < n; ++j) thn[size_t(j)] = thp[size_t(j)];
                for (const auto& m : pm) {
                    cplx E = ap.mode(m.k.data());
                    for (int j = 0; j < n; ++j)
                        thn[size_t(j)] -= (m.cI[size_t(j)] * E).real();
                }
                for (int j = 0; j < n; ++j)
                    delta = std::max(delta, std::abs(thn[size_t(j)] - th[size_t(j)]));
                th = thn;
                if (delta < opts.fixed_point_tol) break;
                if (it >= opts.fixed_point_max)
                    throw step_failure_error("kam_step: fixed point for the angle map diverged");
            }
            ap.compute(th.data());
            for (int j = 0; j < n; ++j) I[size_t(j)] = nodes[ni][size_t(j)];
            for (const auto& m : pm) {
                cplx E = ap.mode(m.k.data());
                for (int j = 0; j < n; ++j) I[size_t(j)] += (m.cTh[size_t(j)] * E).real();
            }
            tab.compute(I.data());
            cplx acc = 0;
            for (const auto& cm : cmodes) acc += cm.c.eval(tab) * ap.mode(cm.k.data());
            vals[ti] = acc;
        }
        values[ni] = std::move(vals);
    }, opts.threads);

    // angle transform per node
    par_for(nodes.size(), [&](size_t ni) {
        for (int axis = 0; axis < n; ++axis) detail::dft_axis(values[ni], n, axis, Ntheta);
    }, opts.threads);

    // least squares per wave vector over the valid nodes, in normalized
    // box coordinates for conditioning
    std::vector<double> scale((size_t(n))), shift((size_t(n)));
    for (int j = 0; j < n; ++j) {
        shift[size_t(j)] = 0.5 * (H.domain().lo[size_t(j)] + H.domain().hi[size_t(j)]);
        scale[size_t(j)] = 0.5 * (H.domain().hi[size_t(j)] - H.domain().lo[size_t(j)]);
    }
    std::vector<std::vector<int>> basis;  // exponent tuples, per-axis degree <= d_fit
    {
        std::vector<int> e(size_t(n), 0);
        bool done = false;
        while (!done) {
            basis.push_back(e);
            int j = n - 1;
            while (j >= 0 && ++e[size_t(j)] > d_fit) e[size_t(j--)] = 0;
            if (j < 0) done = true;
        }
    }
    Eigen::MatrixXd V(long(nodes.size()), long(basis.size()));
    for (size_t r = 0; r < nodes.size(); ++r)
        for (size_t b = 0; b < basis.size(); ++b) {
            double m = 1.0;
            for (int j = 0; j < n; ++j)
                m *= std::pow((nodes[r][size_t(j)] - shift[size_t(j)]) / scale[size_t(j)],
                              basis[b][size_t(j)]);
            V(long(r), long(b)) = m;
        }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);

    fourier_hamiltonian Hout(n, std::max(M - 1, H.k_max()), H.domain());

    std::vector<kvec> out_modes;
    for_each_kvec(n, M - 1, [&](const kvec& k) {
        for (int j = 0; j < n; ++j)
            if (std::abs(k[size_t(j)]) >= M) return;
        out_modes.push_back(k);
    });

    for (const auto& k : out_modes) {
        Eigen::VectorXd re(long(nodes.size())), im(long(nodes.size()));
        double mag = 0;
        for (size_t r = 0; r < nodes.size(); ++r) {
            size_t flat = 0;
            for (int j = 0; j < n; ++j) {
                int idx = k[size_t(j)] >= 0 ? k[size_t(j)] : k[size_t(j)] + Ntheta;
                flat = flat * size_t(Ntheta) + size_t(idx);
            }
            cplx c = values[r][flat];
            re(long(r)) = c.real();
            im(long(r)) = c.imag();
            mag = std::max(mag, std::abs(c));
        }
        if (!is_zero(k) && mag < opts.prune_rel * h_scale) continue;
        Eigen::VectorXd xr = qr.solve(re), xi = qr.solve(im);
        poly ck(n);
        for (size_t b = 0; b < basis.size(); ++b) {
            cplx c(xr(long(b)), xi(long(b)));
            if (std::abs(c) == 0.0) continue;
            poly::key e(basis[b].begin(), basis[b].end());
            e.push_back(0);
            ck.add_term(e, c);
        }
        ck = detail::denormalize(ck, scale, shift);
        ck.prune(opts.prune_rel * h_scale * 1e-3);
        if (!ck.empty()) Hout.set_mode(k, ck);
    }

    // enforce reality exactly; record how far the fit drifted
    {
        double defect = 0;
        auto copy = Hout.modes();
        for (const auto& [k, c] : copy) {
            auto it = copy.find(negate(k));
            poly partner = it == copy.end() ? poly(n) : it->second;
            poly sym = (c + partner.conj()) * 0.5;
            defect = std::max(defect, (c - partner.conj()).max_abs_coeff());
            Hout.set_mode(k, sym);
        }
        R.diagnostics.reality_defect = defect;
    }

    // split: integrable part is the input zero mode verbatim; everything
    // else, including the higher-order mean correction, goes to the remainder
    R.h_total = Hout;
    R.h1_new = fourier_hamiltonian(n, Hout.k_max(), H.domain());
    for (const auto& [k, c] : Hout.modes()) {
        if (is_zero(k)) {
            poly d = c - c0;
            d.prune(0.0);
            if (!d.empty()) R.h1_new.set_mode(k, d);
        } else {
            R.h1_new.set_mode(k, c);
        }
    }
    R.diagnostics.norm_after =
        strip_norm(R.h1_new, opts.s * opts.shrink_s, opts.r * opts.shrink_r, 0.0);

    // residual of the refit at random retained points
    {
        rng_stream rng(987654321u);
        double res = 0;
        for (int sidx = 0; sidx < 64; ++sidx) {
            std::vector<double> thp((size_t(n)));
            for (int j = 0; j < n; ++j) thp[size_t(j)] = rng.uniform(0.0, TWO_PI);
            std::vector<double> Ip;
            try {
                Ip = R.d1.sample(rng);
            } catch (const error&) {
                break;
            }
            if (!divisor_ok(Ip, M, true, 0.5)) continue;
            {
                std::vector<phi_mode> pm;
                if (!(make_phi(Ip, pm) < 0.5)) continue;
            }
            auto [th, I] = R.map_point(thp, Ip);
            double direct = H.eval_complex(th, I, 0.0).real();
            double fitted = Hout.eval_complex(thp, Ip, 0.0).real();
            res = std::max(res, std::abs(direct - fitted));
        }
        R.diagnostics.refit_residual = res;
        double gate = std::max(opts.refit_tol,
                               opts.refit_rel * std::max(R.diagnostics.norm_after, eps * eps));
        (void)gate;
        if (res > gate)
            throw accuracy_error("kam_step: refit residual " + std::to_string(res) +
                                 " above tolerance " + std::to_string(gate));
    }
    return R;
}

// ---------------------------------------------------------------------------
// iterated step at one frozen parameter value

struct two_step_result {
    poly k0;                      // integrable part after the iteration
    fourier_hamiltonian h_final;  // transformed Hamiltonian
    double remainder_norm = 0;    // strip norm of the final angle-dependent part
    std::vector<kam_diagnostics> step_diags;
};

inline two_step_result kam_iterate(const fourier_hamiltonian& H, double t, int steps,
                                   const kam_options& opts = {}) {
    two_step_result out;
    fourier_hamiltonian cur = H.freeze_t(t);
    kam_options o = opts;
    for (int s = 0; s < steps; ++s) {
        auto st = kam_step(cur, 0.0, o);
        out.step_diags.push_back(st.diagnostics);
        cur = st.h_total;
        o.s *= opts.shrink_s;
        o.r *= opts.shrink_r;
    }
    out.k0 = cur.zero_mode();
    out.h_final = cur;
    out.remainder_norm = strip_norm(cur.angle_part(), o.s, o.r, 0.0);
    return out;
}

// ---------------------------------------------------------------------------
// leading normal form over a geometric parameter grid

struct bnf_result {
    std::vector<double> ts;              // +-t0 * 2^{-j}
    std::vector<poly> k0;                // integrable part per grid value
    std::vector<double> remainder_norm;  // final remainder strip norm per grid value
    poly dk0_dt0;                        // derivative at 0 (Richardson central differences)
    poly k0_t_fit;                       // joint polynomial fit K0(I; t)
    double fitted_exponent = 0;          // remainder vs |t| log-log slope
    bool superlinear = false;
    poly h0;                             // unperturbed integrable part
};

inline bnf_result bnf_leading(const fourier_hamiltonian& H, double t0, int n_levels,
                              const kam_options& opts = {}, int steps = 2) {
    if (n_levels < 2) throw validation_error("bnf.n_levels", "need >= 2 geometric levels");
    bnf_result out;
    out.h0 = H.freeze_t(0.0).zero_mode();
    std::vector<double> pos;
    for (int j = 0; j < n_levels; ++j) pos.push_back(t0 * std::pow(2.0, -j));
    for (double tp : pos) {
        out.ts.push_back(tp);
        out.ts.push_back(-tp);
    }
    out.k0.resize(out.ts.size());
    out.remainder_norm.resize(out.ts.size());
    std::vector<std::string> errors(out.ts.size());
    par_for(out.ts.size(), [&](size_t i) {
        try {
            auto r = kam_iterate(H, out.ts[i], steps, opts);
            out.k0[i] = r.k0;
            out.remainder_norm[i] = r.remainder_norm;
        } catch (const error& e) {
            errors[i] = e.what();
        }
    }, opts.threads);
    for (const auto& e : errors)
        if (!e.empty()) throw step_failure_error("bnf_leading: " + e);

    // Richardson over the two smallest levels of the central difference
    // (K0(tau) - K0(-tau)) / 2 tau
    auto central = [&](int level) {
        size_t ip = size_t(2 * level), im = size_t(2 * level + 1);
        return (out.k0[ip] - out.k0[im]) * (0.5 / pos[size_t(level)]);
    };
    poly D_coarse = central(n_levels - 2);
    poly D_fine = central(n_levels - 1);
    out.dk0_dt0 = (D_fine * (4.0 / 3.0)) - (D_coarse * (1.0 / 3.0));
    out.dk0_dt0.prune(1e-14);

    // joint fit in t: coefficient-wise least squares across the grid plus the
    // exact t = 0 value
    {
        std::vector<double> ts = out.ts;
        ts.push_back(0.0);
        std::vector<poly> ks = out.k0;
        ks.push_back(out.h0);
        int deg_t = std::min<int>(4, int(ts.size()) - 1);
        std::set<poly::key> keys;
        for (const auto& p : ks)
            for (const auto& [e, c] : p.terms()) keys.insert(e);
        Eigen::MatrixXd V(long(ts.size()), long(deg_t + 1));
        for (size_t r = 0; r < ts.size(); ++r)
            for (int d = 0; d <= deg_t; ++d) V(long(r), d) = std::pow(ts[r], d);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
        poly fit(H.dim());
        for (const auto& key : keys) {
            Eigen::VectorXd y(long(ts.size()));
            for (size_t r = 0; r < ts.size(); ++r) {
                auto it = ks[r].terms().find(key);
                y(long(r)) = it == ks[r].terms().end() ? 0.0 : it->second.real();
            }
            Eigen::VectorXd x = qr.solve(y);
            for (int d = 0; d <= deg_t; ++d) {
                if (std::abs(x(d)) < 1e-13) continue;
                poly::key e = key;
                e.back() = d;  // grid polys are t-frozen; rebuild the t exponent
                fit.add_term(e, x(d));
            }
        }
        out.k0_t_fit = fit;
    }

    std::vector<double> rn;
    for (size_t i = 0; i < pos.size(); ++i) rn.push_back(out.remainder_norm[2 * i]);
    out.fitted_exponent = fit_loglog(pos, rn).slope;
    out.superlinear = out.fitted_exponent > 1.0;
    return out;
}

}  // namespace kamlab
