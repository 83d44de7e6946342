#pragma once

#include <map>

#include "kamlab/domain.hpp"
#include "kamlab/poly.hpp"

namespace kamlab {

// One-parameter family H(theta, I; t) = sum_k c_k(I;t) e^{i<k,theta>} with
// finitely many angle modes (|k|_1 <= k_max) and polynomial coefficients in
// (I, t). Immutable in spirit: operations return new objects.
class fourier_hamiltonian {
public:
    fourier_hamiltonian() = default;
    fourier_hamiltonian(int n, int k_max, action_domain dom)
        : n_(n), k_max_(k_max), domain_(std::move(dom)) {
        if (n < 1) throw validation_error("n", "dimension must be >= 1");
        if (domain_.n != n) throw validation_error("action_domain", "dimension mismatch");
    }

    int dim() const { return n_; }
    int k_max() const { return k_max_; }
    const action_domain& domain() const { return domain_; }
    const std::map<kvec, poly>& modes() const { return modes_; }

    void set_mode(const kvec& k, poly c) {
        if (int(k.size()) != n_) throw validation_error("mode.k", "arity mismatch");
        if (l1_norm(k) > k_max_) throw validation_error("mode.k", "|k| exceeds k_max");
        if (c.n_vars() != n_) throw validation_error("mode.poly", "arity mismatch");
        c.prune(0.0);
        if (c.empty())
            modes_.erase(k);
        else
            modes_[k] = std::move(c);
    }

    void add_mode(const kvec& k, const poly& c) {
        auto it = modes_.find(k);
        if (it == modes_.end())
            set_mode(k, c);
        else
            set_mode(k, it->second + c);
    }

    const poly* mode(const kvec& k) const {
        auto it = modes_.find(k);
        return it == modes_.end() ? nullptr : &it->second;
    }

    poly zero_mode() const {
        kvec k0(size_t(n_), 0);
        auto it = modes_.find(k0);
        return it == modes_.end() ? poly(n_) : it->second;
    }

    // reality: c_{-k} = conj(c_k) termwise, up to tol on coefficients
    bool reality_holds(double tol = 1e-12) const {
        for (const auto& [k, c] : modes_) {
            auto it = modes_.find(negate(k));
            if (it == modes_.end()) {
                if (c.max_abs_coeff() > tol) return false;
                continue;
            }
            poly d = it->second - c.conj();
            if (d.max_abs_coeff() > tol) return false;
        }
        return true;
    }

    // complex-valued evaluation kept private in use; callers get the real value
    cplx eval_complex(const std::vector<double>& theta, const std::vector<double>& I,
                      double t) const {
        cplx acc = 0.0;
        for (const auto& [k, c] : modes_) {
            double phase = 0.0;
            for (int j = 0; j < n_; ++j) phase += k[size_t(j)] * theta[size_t(j)];
            acc += c.eval(I, t) * std::polar(1.0, phase);
        }
        return acc;
    }

    double eval(const std::vector<double>& theta, const std::vector<double>& I, double t,
                bool check_domain = true) const {
        if (check_domain && !domain_.contains(I, -1e-12))
            throw domain_error("eval: action outside domain");
        cplx v = eval_complex(theta, I, t);
        if (std::abs(v.imag()) > 1e-13 * std::max(1.0, std::abs(v.real())))
            throw error("eval: reality violated, imag " + std::to_string(v.imag()));
        return v.real();
    }

    // gradient of the angle-average part at (I, t)
    std::vector<double> frequency(const std::vector<double>& I, double t) const {
        poly c0 = zero_mode();
        std::vector<double> w((size_t(n_)));
        for (int j = 0; j < n_; ++j) w[size_t(j)] = c0.d_dI(j).eval_real(I, t);
        return w;
    }

    std::vector<std::vector<double>> hessian(const std::vector<double>& I, double t) const {
        poly c0 = zero_mode();
        auto H = std::vector<std::vector<double>>(size_t(n_), std::vector<double>(size_t(n_), 0.0));
        for (int a = 0; a < n_; ++a) {
            poly da = c0.d_dI(a);
            for (int b = 0; b < n_; ++b) H[size_t(a)][size_t(b)] = da.d_dI(b).eval_real(I, t);
        }
        return H;
    }

    double hessian_det(const std::vector<double>& I, double t) const {
        return det(hessian(I, t));
    }

    // Invert the frequency map: find I with frequency(I, t) = omega.
    // Damped Newton with step halving; 50 iterations; starts at the domain
    // representative (or `start` when provided).
    std::vector<double> legendre_inverse(const std::vector<double>& omega, double t,
                                         const std::vector<double>* start = nullptr,
                                         double tol = 1e-13) const {
        std::vector<double> I = start ? *start : domain_.representative(&omega);
        double res = residual(I, omega, t);
        for (int iter = 0; iter < 50; ++iter) {
            if (res <= tol) return I;
            auto H = hessian(I, t);
            double d = det(H);
            if (std::abs(d) < 1e-14)
                throw degeneracy_error("legendre_inverse: singular frequency Jacobian");
            auto w = frequency(I, t);
            std::vector<double> rhs((size_t(n_)));
            for (int j = 0; j < n_; ++j) rhs[size_t(j)] = omega[size_t(j)] - w[size_t(j)];
            std::vector<double> step = solve(H, rhs);
            double lambda = 1.0;
            for (int halvings = 0; halvings < 30; ++halvings) {
                std::vector<double> In((size_t(n_)));
                for (int j = 0; j < n_; ++j) In[size_t(j)] = I[size_t(j)] + lambda * step[size_t(j)];
                double rn = residual(In, omega, t);
                if (rn < res) {
                    I = In;
                    res = rn;
                    break;
                }
                lambda *= 0.5;
                if (halvings == 29)
                    throw no_solution_error("legendre_inverse: step halving stalled");
            }
        }
        if (res <= tol) return I;
        throw no_solution_error("legendre_inverse: no convergence in 50 iterations");
    }

    enum class operand { value, dt };

    // k = 0 Fourier coefficient of the operand at (I, t): the exact torus
    // average (2pi)^{-n} int over T^n
    double torus_average(const std::vector<double>& I, double t,
                         operand which = operand::value) const {
        poly c0 = zero_mode();
        if (which == operand::dt) c0 = c0.d_dt();
        cplx v = c0.eval(I, t);
        return v.real();
    }

    fourier_hamiltonian partial_t() const {
        fourier_hamiltonian r(n_, k_max_, domain_);
        for (const auto& [k, c] : modes_) {
            poly d = c.d_dt();
            if (!d.empty()) r.set_mode(k, d);
        }
        return r;
    }

    fourier_hamiltonian freeze_t(double t) const {
        fourier_hamiltonian r(n_, k_max_, domain_);
        for (const auto& [k, c] : modes_) {
            poly f = c.freeze_t(t);
            if (!f.empty()) r.set_mode(k, f);
        }
        return r;
    }

    // angle-dependent part only (k != 0 modes)
    fourier_hamiltonian angle_part() const {
        fourier_hamiltonian r(n_, k_max_, domain_);
        for (const auto& [k, c] : modes_)
            if (!is_zero(k)) r.set_mode(k, c);
        return r;
    }

    fourier_hamiltonian integrable_part() const {
        fourier_hamiltonian r(n_, k_max_, domain_);
        kvec k0(size_t(n_), 0);
        if (auto* c = mode(k0)) r.set_mode(k0, *c);
        return r;
    }

    // same modes over a different action domain (e.g. a working box inside an
    // annulus for the normal-form iteration)
    fourier_hamiltonian with_domain(action_domain dom) const {
        fourier_hamiltonian r(n_, k_max_, std::move(dom));
        r.modes_ = modes_;
        return r;
    }

    fourier_hamiltonian shifted_by_constant(double c) const {
        fourier_hamiltonian r = *this;
        kvec k0(size_t(n_), 0);
        r.add_mode(k0, poly::constant(n_, c));
        return r;
    }

    double max_grad_h0(rng_stream rng, double t_max, int samples = 512) const {
        double g = 0.0;
        for (int s = 0; s < samples; ++s) {
            auto I = domain_.sample(rng);
            auto w = frequency(I, rng.uniform(-t_max, t_max));
            g = std::max(g, action_domain::norm(w));
        }
        return g;
    }

    // --- small dense linear algebra (n is tiny) ---
    static double det(const std::vector<std::vector<double>>& A) {
        size_t n = A.size();
        auto M = A;
        double d = 1.0;
        for (size_t c = 0; c < n; ++c) {
            size_t p = c;
            for (size_t r = c + 1; r < n; ++r)
                if (std::abs(M[r][c]) > std::abs(M[p][c])) p = r;
            if (std::abs(M[p][c]) < 1e-300) return 0.0;
            if (p != c) {
                std::swap(M[p], M[c]);
                d = -d;
            }
            d *= M[c][c];
            for (size_t r = c + 1; r < n; ++r) {
                double f = M[r][c] / M[c][c];
                for (size_t cc = c; cc < n; ++cc) M[r][cc] -= f * M[c][cc];
            }
        }
        return d;
    }

    static std::vector<double> solve(std::vector<std::vector<double>> A, std::vector<double> b) {
        size_t n = A.size();
        for (size_t c = 0; c < n; ++c) {
            size_t p = c;
            for (size_t r = c + 1; r < n; ++r)
                if (std::abs(A[r][c]) > std::abs(A[p][c])) p = r;
            if (std::abs(A[p][c]) < 1e-300) throw degeneracy_error("solve: singular matrix");
            std::swap(A[p], A[c]);
            std::swap(b[p], b[c]);
            for (size_t r = c + 1; r < n; ++r) {
                double f = A[r][c] / A[c][c];
                for (size_t cc = c; cc < n; ++cc) A[r][cc] -= f * A[c][cc];
                b[r] -= f * b[c];
            }
        }
        std::vector<double> x(n);
        for (size_t r = n; r-- > 0;) {
            double s = b[r];
            for (size_t c = r + 1; c < n; ++c) s -= A[r][c] * x[c];
            x[r] = s / A[r][r];
        }
        return x;
    }

private:
    double residual(const std::vector<double>& I, const std::vector<double>& omega,
                    double t) const {
        auto w = frequency(I, t);
        double s = 0;
        for (int j = 0; j < n_; ++j) s += (w[size_t(j)] - omega[size_t(j)]) * (w[size_t(j)] - omega[size_t(j)]);
        return std::sqrt(s);
    }

    int n_ = 0;
    int k_max_ = 0;
    action_domain domain_;
    std::map<kvec, poly> modes_;
};

}  // namespace kamlab
