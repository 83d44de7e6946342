#pragma once

#include "kamlab/hamiltonian.hpp"

namespace kamlab {

// Diagnostic fit of Fourier-coefficient decay. Bucketed by |k|_1: the bucket
// magnitude is the max coefficient majorant at that |k|. Fits
//   log m(|k|) ~ offset - rate * |k|^{1/rho_prime}
// (rho_prime = 1 gives a plain exponential fit). No pass/fail semantics.
struct decay_fit {
    bool flat = false;        // all buckets identically zero
    double rate = 0.0;        // fitted decay rate c
    double offset = 0.0;      // fitted log-amplitude
    double residual = 0.0;    // rms residual of the fit
    std::vector<double> bucket_k;      // |k| values with nonzero magnitude
    std::vector<double> bucket_mag;    // magnitudes per bucket
};

inline std::vector<double> coefficient_buckets(const fourier_hamiltonian& H, double tmax) {
    std::vector<double> mag(size_t(H.k_max()) + 1, 0.0);
    std::vector<double> center((size_t(H.dim()))), halfw((size_t(H.dim())));
    for (int j = 0; j < H.dim(); ++j) {
        center[size_t(j)] = 0.5 * (H.domain().lo[size_t(j)] + H.domain().hi[size_t(j)]);
        halfw[size_t(j)] = 0.5 * (H.domain().hi[size_t(j)] - H.domain().lo[size_t(j)]);
    }
    for (const auto& [k, c] : H.modes()) {
        int a = l1_norm(k);
        mag[size_t(a)] = std::max(mag[size_t(a)], c.shifted_arg(center).majorant(halfw, tmax));
    }
    return mag;
}

inline decay_fit gevrey_decay_check(const fourier_hamiltonian& H, double rho_prime = 1.0,
                                    double tmax = 0.5) {
    auto mag = coefficient_buckets(H, tmax);
    decay_fit out;
    for (size_t a = 1; a < mag.size(); ++a)
        if (mag[a] > 0) {
            out.bucket_k.push_back(double(a));
            out.bucket_mag.push_back(mag[a]);
        }
    if (out.bucket_k.empty()) {
        out.flat = true;
        return out;
    }
    size_t nonzero = 0;
    for (const auto& [k, c] : H.modes())
        if (!is_zero(k) && c.max_abs_coeff() > 0) ++nonzero;
    if (nonzero < 8)
        throw diagnostic_unavailable_error("gevrey_decay_check: needs >= 8 nonzero magnitudes");

    std::vector<double> x, y;
    for (size_t i = 0; i < out.bucket_k.size(); ++i) {
        x.push_back(std::pow(out.bucket_k[i], 1.0 / rho_prime));
        y.push_back(std::log(out.bucket_mag[i]));
    }
    auto lf = fit_line(x, y);
    out.rate = -lf.slope;
    out.offset = lf.intercept;
    out.residual = lf.residual;
    return out;
}

// remainder-vs-distance smallness fit: log r(d) ~ offset - c * d^{-1/(rho-1)}
inline line_fit flatness_fit(const std::vector<double>& dist, const std::vector<double>& rem,
                             double rho) {
    std::vector<double> x, y;
    for (size_t i = 0; i < dist.size(); ++i)
        if (dist[i] > 0 && rem[i] > 0) {
            x.push_back(std::pow(dist[i], -1.0 / (rho - 1.0)));
            y.push_back(std::log(rem[i]));
        }
    return fit_line(x, y);
}

}  // namespace kamlab
