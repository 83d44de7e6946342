#pragma once

#include <map>
#include <utility>

#include "kamlab/core.hpp"

namespace kamlab {

// Polynomial in the action variables I in R^n and the deformation parameter t,
// with complex coefficients. Derivatives are taken symbolically on the
// coefficient arrays.
class poly {
public:
    // exponent key: [i_deg..., t_deg]
    using key = std::vector<int>;

    poly() : n_(0) {}
    explicit poly(int n) : n_(n) {}

    static poly constant(int n, cplx c) {
        poly p(n);
        p.add_term(key(size_t(n) + 1, 0), c);
        return p;
    }

    // monomial c * I^ideg * t^tdeg
    static poly monomial(int n, const std::vector<int>& ideg, int tdeg, cplx c) {
        if (int(ideg.size()) != n) throw error("poly: bad exponent arity");
        poly p(n);
        key e(ideg.begin(), ideg.end());
        e.push_back(tdeg);
        p.add_term(e, c);
        return p;
    }

    int n_vars() const { return n_; }
    bool empty() const { return terms_.empty(); }
    size_t n_terms() const { return terms_.size(); }
    const std::map<key, cplx>& terms() const { return terms_; }

    void add_term(const key& e, cplx c) {
        if (int(e.size()) != n_ + 1) throw error("poly: bad exponent arity");
        auto [it, fresh] = terms_.emplace(e, c);
        if (!fresh) it->second += c;
    }

    cplx eval(const std::vector<double>& I, double t) const {
        if (int(I.size()) != n_) throw error("poly::eval: bad point arity");
        cplx acc = 0.0;
        for (const auto& [e, c] : terms_) {
            double m = 1.0;
            for (int j = 0; j < n_; ++j) m *= ipow(I[j], e[size_t(j)]);
            m *= ipow(t, e[size_t(n_)]);
            acc += c * m;
        }
        return acc;
    }

    double eval_real(const std::vector<double>& I, double t) const { return eval(I, t).real(); }

    poly operator+(const poly& o) const {
        check_same(o);
        poly r = *this;
        for (const auto& [e, c] : o.terms_) r.add_term(e, c);
        return r;
    }
    poly operator-(const poly& o) const {
        check_same(o);
        poly r = *this;
        for (const auto& [e, c] : o.terms_) r.add_term(e, -c);
        return r;
    }
    poly operator*(cplx s) const {
        poly r = *this;
        for (auto& [e, c] : r.terms_) c *= s;
        return r;
    }
    poly operator*(const poly& o) const {
        check_same(o);
        poly r(n_);
        for (const auto& [ea, ca] : terms_)
            for (const auto& [eb, cb] : o.terms_) {
                key e(ea.size());
                for (size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
                r.add_term(e, ca * cb);
            }
        return r;
    }

    poly d_dI(int j) const {
        poly r(n_);
        for (const auto& [e, c] : terms_)
            if (e[size_t(j)] > 0) {
                key f = e;
                --f[size_t(j)];
                r.add_term(f, c * double(e[size_t(j)]));
            }
        return r;
    }

    poly d_dt() const {
        poly r(n_);
        for (const auto& [e, c] : terms_)
            if (e[size_t(n_)] > 0) {
                key f = e;
                --f[size_t(n_)];
                r.add_term(f, c * double(e[size_t(n_)]));
            }
        return r;
    }

    // substitute a numeric t, folding all t powers into the coefficients
    poly freeze_t(double t) const {
        poly r(n_);
        for (const auto& [e, c] : terms_) {
            key f = e;
            f[size_t(n_)] = 0;
            r.add_term(f, c * ipow(t, e[size_t(n_)]));
        }
        r.prune(0.0);
        return r;
    }

    poly conj() const {
        poly r = *this;
        for (auto& [e, c] : r.terms_) c = std::conj(c);
        return r;
    }

    void prune(double tol) {
        for (auto it = terms_.begin(); it != terms_.end();)
            it = (std::abs(it->second) <= tol) ? terms_.erase(it) : std::next(it);
    }

    bool is_real(double tol = 0.0) const {
        for (const auto& [e, c] : terms_)
            if (std::abs(c.imag()) > tol) return false;
        return true;
    }

    int max_degree_I() const {
        int d = 0;
        for (const auto& [e, c] : terms_)
            for (int j = 0; j < n_; ++j) d = std::max(d, e[size_t(j)]);
        return d;
    }

    int max_degree_t() const {
        int d = 0;
        for (const auto& [e, c] : terms_) d = std::max(d, e[size_t(n_)]);
        return d;
    }

    // p(y + center) as a polynomial in y; exact binomial expansion
    poly shifted_arg(const std::vector<double>& center) const {
        if (int(center.size()) != n_) throw error("poly::shifted_arg: bad center arity");
        poly out(n_);
        for (const auto& [e, c] : terms_) {
            // expand each axis factor (y_j + c_j)^{e_j} binomially
            key a(e.size(), 0);
            a[size_t(n_)] = e[size_t(n_)];
            std::function<void(int, cplx)> rec = [&](int j, cplx acc) {
                if (j == n_) {
                    out.add_term(a, acc);
                    return;
                }
                int ej = e[size_t(j)];
                double cj = center[size_t(j)];
                std::vector<double> cp(size_t(ej) + 1, 1.0);
                for (int q = 1; q <= ej; ++q) cp[size_t(q)] = cp[size_t(q - 1)] * cj;
                double binom = 1.0;
                for (int aj = ej; aj >= 0; --aj) {
                    a[size_t(j)] = aj;
                    rec(j + 1, acc * binom * cp[size_t(ej - aj)]);
                    if (aj > 0) binom = binom * double(aj) / double(ej - aj + 1);
                }
                a[size_t(j)] = 0;
            };
            rec(0, c);
        }
        out.prune(0.0);
        return out;
    }

    // sum of |coeff| * max|I_j|^deg over the box, * tmax^tdeg; an upper bound
    // for the sup norm on box x [-tmax, tmax]
    double majorant(const std::vector<double>& abs_I_max, double tmax) const {
        double s = 0.0;
        for (const auto& [e, c] : terms_) {
            double m = std::abs(c);
            for (int j = 0; j < n_; ++j) m *= ipow(abs_I_max[size_t(j)], e[size_t(j)]);
            m *= ipow(std::abs(tmax), e[size_t(n_)]);
            s += m;
        }
        return s;
    }

    double max_abs_coeff() const {
        double m = 0.0;
        for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
        return m;
    }

private:
    static double ipow(double x, int p) {
        double r = 1.0;
        for (int i = 0; i < p; ++i) r *= x;
        return r;
    }
    void check_same(const poly& o) const {
        if (o.n_ != n_) throw error("poly: arity mismatch");
    }

    int n_;
    std::map<key, cplx> terms_;
};

}  // namespace kamlab
