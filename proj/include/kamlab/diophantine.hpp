#pragma once

#include <optional>

#include "kamlab/domain.hpp"

namespace kamlab {

struct diophantine_params {
    double kappa = 0.01;         // smallness in |<w,k>| >= kappa/|k|^tau
    double tau = 1.2;            // exponent, requires tau > n-1
    int k_max = 50;              // l1 truncation radius of the certification
    double boundary_margin = 0.0;  // required distance to the frequency-domain boundary

    void validate(int n) const {
        if (!(kappa > 0)) throw validation_error("diophantine.kappa", "must be > 0");
        if (!(tau > double(n - 1))) throw validation_error("diophantine.tau", "requires tau > n-1");
        if (k_max < 1) throw validation_error("diophantine.k_max", "must be >= 1");
    }
};

struct small_divisor_result {
    double value = 0.0;  // min over 0<|k|<=K of |<w,k>| |k|^tau
    kvec k;              // lexicographically smallest minimizer
};

inline small_divisor_result min_small_divisor(const std::vector<double>& omega, double tau,
                                              int k_max) {
    for (double w : omega)
        if (!std::isfinite(w)) throw domain_error("min_small_divisor: non-finite frequency");
    int n = int(omega.size());
    small_divisor_result best;
    best.value = std::numeric_limits<double>::infinity();
    for_each_kvec(n, k_max, [&](const kvec& k) {
        if (is_zero(k)) return;
        double dot = 0;
        for (int j = 0; j < n; ++j) dot += omega[size_t(j)] * k[size_t(j)];
        double v = std::abs(dot) * std::pow(double(l1_norm(k)), tau);
        if (best.k.empty() || v < best.value) {
            best.value = v;
            best.k = k;
        }
        // exact ties (k vs -k, or whole resonance lines) break to the
        // simplest wave vector: smallest |k|, then lexicographic
        else if (v == best.value) {
            int la = l1_norm(k), lb = l1_norm(best.k);
            if (la < lb || (la == lb && k < best.k)) best.k = k;
        }
    });
    return best;
}

struct membership_verdict {
    bool in_set = false;
    int certified_k_max = 0;   // membership is certified only up to this truncation
    double min_divisor = 0.0;  // min |<w,k>| |k|^tau over the truncation
    std::optional<kvec> witness;  // failing k, when divisor condition fails
    bool boundary_failed = false;
    double boundary_dist = 0.0;
};

// frequency domain for the nonresonant sets: a box or ball in omega-space
struct frequency_domain {
    enum class kind { box, ball };
    kind type = kind::box;
    std::vector<double> lo, hi;      // box
    std::vector<double> center;     // ball
    double radius = 0.0;

    static frequency_domain make_box(std::vector<double> lo_, std::vector<double> hi_) {
        frequency_domain d;
        d.type = kind::box;
        d.lo = std::move(lo_);
        d.hi = std::move(hi_);
        for (size_t i = 0; i < d.lo.size(); ++i)
            if (!(d.lo[i] < d.hi[i])) throw validation_error("omega_domain", "empty box axis");
        return d;
    }
    static frequency_domain make_ball(std::vector<double> c, double r) {
        if (!(r > 0)) throw validation_error("omega_domain.radius", "must be > 0");
        frequency_domain d;
        d.type = kind::ball;
        d.center = std::move(c);
        d.radius = r;
        return d;
    }

    int dim() const { return type == kind::box ? int(lo.size()) : int(center.size()); }

    double dist_to_boundary(const std::vector<double>& w) const {
        if (type == kind::box) {
            double d = std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < lo.size(); ++j) {
                d = std::min(d, w[j] - lo[j]);
                d = std::min(d, hi[j] - w[j]);
            }
            return d;
        }
        double s = 0;
        for (size_t j = 0; j < center.size(); ++j) s += (w[j] - center[j]) * (w[j] - center[j]);
        return radius - std::sqrt(s);
    }

    double volume() const {
        if (type == kind::box) {
            double v = 1;
            for (size_t j = 0; j < lo.size(); ++j) v *= hi[j] - lo[j];
            return v;
        }
        return action_domain::ball_volume(dim(), radius);
    }

    std::vector<double> sample(rng_stream& rng) const {
        if (type == kind::box) {
            std::vector<double> w(lo.size());
            for (size_t j = 0; j < lo.size(); ++j) w[j] = rng.uniform(lo[j], hi[j]);
            return w;
        }
        for (int tries = 0; tries < 10000; ++tries) {
            std::vector<double> w(center.size());
            double s = 0;
            for (size_t j = 0; j < center.size(); ++j) {
                double x = rng.uniform(-radius, radius);
                w[j] = center[j] + x;
                s += x * x;
            }
            if (s <= radius * radius) return w;
        }
        throw sampling_failure_error("frequency_domain::sample stalled");
    }
};

inline membership_verdict is_in_omega_kappa(const std::vector<double>& omega,
                                            const diophantine_params& p,
                                            const frequency_domain& Omega) {
    p.validate(int(omega.size()));
    membership_verdict v;
    v.certified_k_max = p.k_max;
    v.boundary_dist = Omega.dist_to_boundary(omega);
    if (v.boundary_dist < p.boundary_margin) {
        v.boundary_failed = true;
        v.in_set = false;
        auto sd = min_small_divisor(omega, p.tau, p.k_max);
        v.min_divisor = sd.value;
        return v;
    }
    auto sd = min_small_divisor(omega, p.tau, p.k_max);
    v.min_divisor = sd.value;
    if (sd.value < p.kappa) {
        v.in_set = false;
        v.witness = sd.k;
        return v;
    }
    v.in_set = true;
    return v;
}

struct measure_estimate {
    double measure = 0.0;
    double std_err = 0.0;
    size_t n_samples = 0;
};

// Monte-Carlo measure of Omega \ Omega_kappa: fraction of uniform samples
// failing membership, times vol(Omega). kappa = 0 is allowed here (nothing
// excluded beyond the boundary margin).
inline measure_estimate complement_measure_estimate(const frequency_domain& Omega,
                                                    const diophantine_params& p, size_t n_samples,
                                                    rng_stream rng) {
    int n = Omega.dim();
    if (!(p.tau > double(n))) throw precondition_error("complement_measure: requires tau > n");
    if (n_samples < 10000) throw precondition_error("complement_measure: requires >= 1e4 samples");
    size_t fails = 0;
    for (size_t s = 0; s < n_samples; ++s) {
        auto w = Omega.sample(rng);
        bool member = Omega.dist_to_boundary(w) >= p.boundary_margin &&
                      (p.kappa == 0.0 || min_small_divisor(w, p.tau, p.k_max).value >= p.kappa);
        if (!member) ++fails;
    }
    double frac = double(fails) / double(n_samples);
    measure_estimate out;
    out.n_samples = n_samples;
    out.measure = frac * Omega.volume();
    out.std_err = Omega.volume() * std::sqrt(std::max(frac * (1 - frac), 0.0) / double(n_samples));
    return out;
}

// sample omega in Omega_kappa, optionally within |omega - near| < r
inline std::vector<double> sample_nonresonant(const frequency_domain& Omega,
                                              const diophantine_params& p,
                                              const std::vector<double>* near_center, double r,
                                              rng_stream rng, int max_rejections = 20000) {
    for (int tries = 0; tries < max_rejections; ++tries) {
        std::vector<double> w;
        if (near_center) {
            if (!(r > 0))
                throw sampling_failure_error("sample_nonresonant: empty ball around center");
            w = frequency_domain::make_ball(*near_center, r).sample(rng);
        } else {
            w = Omega.sample(rng);
        }
        if (is_in_omega_kappa(w, p, Omega).in_set) return w;
    }
    throw sampling_failure_error(
        "sample_nonresonant: max rejections exceeded (kappa too large or radius too small)");
}

}  // namespace kamlab
