#pragma once

#include <map>

#include "kamlab/core.hpp"

namespace kamlab {

// Function on the torus at fixed (I, t), stored as Fourier coefficients
// f_k over a finite support. Reality means f_{-k} = conj(f_k).
struct torus_function {
    int n = 0;
    std::map<kvec, cplx> coef;

    static torus_function zero(int n) { return torus_function{n, {}}; }

    void set(const kvec& k, cplx c) {
        if (int(k.size()) != n) throw error("torus_function: arity mismatch");
        if (c == cplx(0.0))
            coef.erase(k);
        else
            coef[k] = c;
    }

    cplx get(const kvec& k) const {
        auto it = coef.find(k);
        return it == coef.end() ? cplx(0.0) : it->second;
    }

    cplx mean() const { return get(kvec(size_t(n), 0)); }

    cplx eval(const std::vector<double>& theta) const {
        cplx acc = 0;
        for (const auto& [k, c] : coef) {
            double phase = 0;
            for (int j = 0; j < n; ++j) phase += k[size_t(j)] * theta[size_t(j)];
            acc += c * std::polar(1.0, phase);
        }
        return acc;
    }

    double coeff_norm() const {
        double s = 0;
        for (const auto& [k, c] : coef) s += std::abs(c);
        return s;
    }

    bool reality_holds(double tol = 1e-12) const {
        for (const auto& [k, c] : coef)
            if (std::abs(get(negate(k)) - std::conj(c)) > tol) return false;
        return true;
    }

    torus_function operator+(const torus_function& o) const {
        torus_function r = *this;
        for (const auto& [k, c] : o.coef) {
            auto cur = r.get(k) + c;
            r.set(k, cur);
        }
        return r;
    }

    torus_function operator*(cplx s) const {
        torus_function r = *this;
        for (auto& [k, c] : r.coef) c *= s;
        return r;
    }
};

// L_omega u = <omega, d/dtheta> u: multiplies the k-th coefficient by i<omega,k>
inline torus_function apply_Lomega(const torus_function& u, const std::vector<double>& omega) {
    torus_function r = torus_function::zero(u.n);
    for (const auto& [k, c] : u.coef) {
        if (is_zero(k)) continue;  // constants are in the kernel
        double dot = 0;
        for (int j = 0; j < u.n; ++j) dot += omega[size_t(j)] * k[size_t(j)];
        r.set(k, c * cplx(0.0, dot));
    }
    return r;
}

// Solve L_omega u = f for mean-free f, normalized by u(0) = 0:
// u_k = f_k / (i<omega,k>) for k != 0, and the constant term is chosen so
// the value at theta = 0 vanishes. Refuses on divisors below tolerance
// rather than amplifying.
inline torus_function solve_homological(const torus_function& f, const std::vector<double>& omega,
                                        double min_divisor_tol = 1e-10) {
    if (std::abs(f.mean()) >= 1e-14)
        throw precondition_error("solve_homological: input has nonzero mean " +
                                 std::to_string(std::abs(f.mean())));
    torus_function u = torus_function::zero(f.n);
    cplx sum_at_zero = 0;
    for (const auto& [k, c] : f.coef) {
        if (is_zero(k)) continue;
        double dot = 0;
        for (int j = 0; j < f.n; ++j) dot += omega[size_t(j)] * k[size_t(j)];
        if (std::abs(dot) < min_divisor_tol)
            throw small_divisor_error(
                "solve_homological: divisor " + std::to_string(dot) + " below tolerance at k=" +
                    kamlab::to_string(k),
                k);
        cplx uk = c / cplx(0.0, dot);
        u.set(k, uk);
        sum_at_zero += uk;
    }
    u.set(kvec(size_t(f.n), 0), -sum_at_zero);
    return u;
}

// removes (and returns) the mean of f; the residue is mean-free
struct mean_split {
    cplx mean;
    torus_function mean_free;
};

inline mean_split homological_check_inputs(const torus_function& f) {
    mean_split out{f.mean(), f};
    out.mean_free.set(kvec(size_t(f.n), 0), 0.0);
    return out;
}

}  // namespace kamlab
