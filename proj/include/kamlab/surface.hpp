#pragma once

#include <optional>

#include "kamlab/hamiltonian.hpp"

namespace kamlab {

struct energy_band {
    double a = 0.0, b = 0.0;  // band endpoints
    double E = 0.0;           // reference regular energy
    double lambda = 0.1;      // dimensionless band-width parameter

    void validate() const {
        if (!(a < b)) throw validation_error("band", "requires a < b");
        if (!(a < E && E < b)) throw validation_error("band.E", "reference energy outside band");
    }

    // no critical values of the angle-average part on the band: |grad H0|
    // bounded below on sampled shell points
    double min_grad_on_band(const fourier_hamiltonian& H, double t, rng_stream rng,
                            int samples = 2000) const {
        double g = std::numeric_limits<double>::infinity();
        int found = 0;
        for (int s = 0; s < samples; ++s) {
            auto I = H.domain().sample(rng);
            double e = H.torus_average(I, t);
            if (e < a || e > b) continue;
            ++found;
            g = std::min(g, action_domain::norm(H.frequency(I, t)));
        }
        if (!found) throw domain_error("band: no sampled action has energy in [a,b]");
        return g;
    }
};

struct surface_average {
    double value = 0.0;
    double std_err = 0.0;
    size_t n_accepted = 0;
};

namespace detail {

// radial bracket of the energy surface P0(.,.;t) = E inside an annulus
// domain, used as the proposal region for shell rejection
struct radial_bracket {
    double r_lo, r_hi;
};

inline std::optional<radial_bracket> find_radial_bracket(const fourier_hamiltonian& H, double E,
                                                         double t, double shell, rng_stream rng) {
    if (H.domain().type != action_domain::kind::annulus || H.dim() < 2) return std::nullopt;
    int n = H.dim();
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, gmin = 1e300;
    int hits = 0;
    for (int s = 0; s < 256; ++s) {
        std::vector<double> theta((size_t(n))), u((size_t(n)));
        for (int j = 0; j < n; ++j) theta[size_t(j)] = rng.uniform(0.0, TWO_PI);
        // random unit direction
        double nn = 0;
        for (int j = 0; j < n; ++j) {
            u[size_t(j)] = rng.normal();
            nn += u[size_t(j)] * u[size_t(j)];
        }
        nn = std::sqrt(nn);
        for (int j = 0; j < n; ++j) u[size_t(j)] /= nn;
        // Newton in the radius
        double r = 0.5 * (H.domain().r0 + H.domain().r1);
        bool ok = false;
        for (int it = 0; it < 40; ++it) {
            std::vector<double> I((size_t(n)));
            for (int j = 0; j < n; ++j) I[size_t(j)] = r * u[size_t(j)];
            double f = H.eval(theta, I, t, false) - E;
            if (std::abs(f) < 1e-12) {
                ok = true;
                break;
            }
            // d/dr along the ray uses the full action gradient of the symbol
            double df = 0.0;
            for (int j = 0; j < n; ++j) {
                double gj = 0.0;
                for (const auto& [k, c] : H.modes()) {
                    double phase = 0.0;
                    for (int jj = 0; jj < n; ++jj) phase += k[size_t(jj)] * theta[size_t(jj)];
                    gj += (c.d_dI(j).eval(I, t) * std::polar(1.0, phase)).real();
                }
                df += gj * u[size_t(j)];
            }
            if (std::abs(df) < 1e-10) break;
            double rn = r - f / df;
            if (rn < 0.25 * H.domain().r0 || rn > 4.0 * H.domain().r1) break;
            r = rn;
        }
        if (!ok) continue;
        if (r < H.domain().r0 || r > H.domain().r1) continue;
        ++hits;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
        // |d/dr| at solution, crude lower bound for widening the bracket
        std::vector<double> I((size_t(n)));
        for (int j = 0; j < n; ++j) I[size_t(j)] = r * u[size_t(j)];
        double df = std::abs([&] {
            double acc = 0;
            auto w = H.frequency(I, t);
            for (int j = 0; j < n; ++j) acc += w[size_t(j)] * u[size_t(j)];
            return acc;
        }());
        if (df > 1e-8) gmin = std::min(gmin, df);
    }
    if (hits < 64) return std::nullopt;
    double widen = 8.0 * shell / std::max(gmin, 1e-8) + 1e-6;
    radial_bracket br{std::max(H.domain().r0, lo - widen), std::min(H.domain().r1, hi + widen)};
    if (!(br.r_lo < br.r_hi)) return std::nullopt;
    return br;
}

}  // namespace detail

// Monte-Carlo estimate of the normalized energy-surface average
//   (1 / mu_E(Sigma_E)) int_{Sigma_E} f dmu_E
// where dmu_E is the Liouville surface measure, |dmu_E ^ dE| = |dxi ^ dx|.
// Realized by rejection from the thin shell |H - E| < shell: by the coarea
// formula, uniform samples in the shell carry the 1/|grad P0| surface weight
// of dmu_E intrinsically, so the plain ratio estimator is consistent as
// shell -> 0.
template <class Obs>
surface_average energy_surface_average_fn(const fourier_hamiltonian& H, Obs&& observable, double E,
                                          double t, size_t n_samples, rng_stream rng,
                                          double shell_halfwidth) {
    int n = H.dim();
    auto bracket = detail::find_radial_bracket(H, E, t, shell_halfwidth, rng.fork(17));

    std::vector<double> accepted;
    std::vector<double> weights;
    size_t proposals_cap = n_samples * 40000ULL;
    size_t proposals = 0;
    std::vector<double> theta((size_t(n))), I((size_t(n)));
    while (accepted.size() < n_samples && proposals < proposals_cap) {
        ++proposals;
        for (int j = 0; j < n; ++j) theta[size_t(j)] = rng.uniform(0.0, TWO_PI);
        double w = 1.0;
        if (bracket) {
            // polar proposal: uniform direction x uniform radius; the polar
            // Jacobian r^{n-1} enters as an importance weight
            double nn = 0;
            for (int j = 0; j < n; ++j) {
                I[size_t(j)] = rng.normal();
                nn += I[size_t(j)] * I[size_t(j)];
            }
            nn = std::sqrt(nn);
            double r = rng.uniform(bracket->r_lo, bracket->r_hi);
            for (int j = 0; j < n; ++j) I[size_t(j)] *= r / nn;
            w = std::pow(r, n - 1);
        } else {
            I = H.domain().sample(rng);
        }
        double val = H.eval(theta, I, t, false);
        if (std::abs(val - E) >= shell_halfwidth) continue;
        if (!H.domain().contains(I)) continue;
        accepted.push_back(observable(theta, I, t));
        weights.push_back(w);
    }
    if (accepted.empty()) throw domain_error("energy_surface_average: empty sample set");

    double sw = 0, swf = 0;
    for (size_t i = 0; i < accepted.size(); ++i) {
        sw += weights[i];
        swf += weights[i] * accepted[i];
    }
    surface_average out;
    out.n_accepted = accepted.size();
    out.value = swf / sw;
    // weighted ratio-estimator standard error
    double var = 0;
    for (size_t i = 0; i < accepted.size(); ++i) {
        double d = weights[i] * (accepted[i] - out.value);
        var += d * d;
    }
    out.std_err = std::sqrt(var) / sw;
    return out;
}

inline surface_average energy_surface_average(const fourier_hamiltonian& H,
                                              const fourier_hamiltonian& observable, double E,
                                              double t, size_t n_samples, rng_stream rng,
                                              double shell_halfwidth) {
    return energy_surface_average_fn(
        H,
        [&](const std::vector<double>& th, const std::vector<double>& I, double tt) {
            return observable.eval(th, I, tt, false);
        },
        E, t, n_samples, rng, shell_halfwidth);
}

// Per-band cache of surface averages on an energy-bin grid with linear
// interpolation between bins.
class surface_average_cache {
public:
    surface_average_cache(const fourier_hamiltonian& H, const fourier_hamiltonian& observable,
                          const energy_band& band, double t, int n_bins, size_t n_samples,
                          rng_stream rng, double shell_halfwidth)
        : a_(band.a), b_(band.b) {
        if (n_bins < 2) throw validation_error("n_bins", "need >= 2");
        values_.resize((size_t(n_bins)));
        std::vector<double> Es((size_t(n_bins)));
        for (int i = 0; i < n_bins; ++i)
            Es[size_t(i)] = a_ + (b_ - a_) * double(i) / double(n_bins - 1);
        par_for(size_t(n_bins), [&](size_t i) {
            auto stream = rng.fork(rng_stream::hash_doubles(0, {Es[i], t}));
            values_[i] =
                energy_surface_average(H, observable, Es[i], t, n_samples, stream, shell_halfwidth)
                    .value;
        });
    }

    double operator()(double E) const {
        double x = (E - a_) / (b_ - a_) * double(values_.size() - 1);
        if (x <= 0) return values_.front();
        if (x >= double(values_.size() - 1)) return values_.back();
        size_t i = size_t(x);
        double f = x - double(i);
        return values_[i] * (1 - f) + values_[i + 1] * f;
    }

private:
    double a_, b_;
    std::vector<double> values_;
};

}  // namespace kamlab
