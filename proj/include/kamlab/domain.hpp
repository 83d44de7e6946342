#pragma once

#include <limits>

#include "kamlab/core.hpp"

namespace kamlab {

// Action domain D: axis-aligned box, or an origin-centred annulus r0 <= |I| <= r1.
struct action_domain {
    enum class kind { box, annulus };

    kind type = kind::box;
    std::vector<double> lo, hi;  // box bounds
    double r0 = 0.0, r1 = 0.0;   // annulus radii
    int n = 0;

    static action_domain make_box(std::vector<double> lo_, std::vector<double> hi_) {
        action_domain d;
        d.type = kind::box;
        d.n = int(lo_.size());
        if (lo_.size() != hi_.size()) throw validation_error("action_domain", "lo/hi mismatch");
        for (size_t i = 0; i < lo_.size(); ++i)
            if (!(lo_[i] < hi_[i])) throw validation_error("action_domain", "empty box axis");
        d.lo = std::move(lo_);
        d.hi = std::move(hi_);
        return d;
    }

    static action_domain make_annulus(int n, double r0_, double r1_) {
        if (!(0.0 <= r0_ && r0_ < r1_)) throw validation_error("action_domain", "bad radii");
        action_domain d;
        d.type = kind::annulus;
        d.n = n;
        d.r0 = r0_;
        d.r1 = r1_;
        d.lo.assign(size_t(n), -r1_);
        d.hi.assign(size_t(n), r1_);
        return d;
    }

    bool contains(const std::vector<double>& I, double margin = 0.0) const {
        if (int(I.size()) != n) return false;
        if (type == kind::box) {
            for (int j = 0; j < n; ++j)
                if (I[size_t(j)] < lo[size_t(j)] + margin || I[size_t(j)] > hi[size_t(j)] - margin)
                    return false;
            return true;
        }
        double r = norm(I);
        return r >= r0 + margin && r <= r1 - margin;
    }

    double dist_to_boundary(const std::vector<double>& I) const {
        if (type == kind::box) {
            double d = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
                d = std::min(d, I[size_t(j)] - lo[size_t(j)]);
                d = std::min(d, hi[size_t(j)] - I[size_t(j)]);
            }
            return d;  // negative outside
        }
        double r = norm(I);
        return std::min(r - r0, r1 - r);
    }

    double volume() const {
        if (type == kind::box) {
            double v = 1.0;
            for (int j = 0; j < n; ++j) v *= hi[size_t(j)] - lo[size_t(j)];
            return v;
        }
        return ball_volume(n, r1) - ball_volume(n, r0);
    }

    // uniform sample (annulus: rejection from the bounding box)
    std::vector<double> sample(rng_stream& rng) const {
        for (int tries = 0; tries < 10000; ++tries) {
            std::vector<double> I((size_t(n)));
            for (int j = 0; j < n; ++j) I[size_t(j)] = rng.uniform(lo[size_t(j)], hi[size_t(j)]);
            if (contains(I)) return I;
        }
        throw sampling_failure_error("action_domain::sample: rejection stalled");
    }

    // interior point, used as a default start for Newton iterations; for an
    // annulus the box centre lies outside, so take a point at mid-radius in
    // the given direction (or along e_1)
    std::vector<double> representative(const std::vector<double>* direction = nullptr) const {
        if (type == kind::box) {
            std::vector<double> c((size_t(n)));
            for (int j = 0; j < n; ++j) c[size_t(j)] = 0.5 * (lo[size_t(j)] + hi[size_t(j)]);
            return c;
        }
        double rm = 0.5 * (r0 + r1);
        std::vector<double> c(size_t(n), 0.0);
        if (direction && norm(*direction) > 1e-12) {
            double s = rm / norm(*direction);
            for (int j = 0; j < n; ++j) c[size_t(j)] = (*direction)[size_t(j)] * s;
        } else {
            c[0] = rm;
        }
        return c;
    }

    static double norm(const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }

    static double ball_volume(int n, double r) {
        // unit-ball volumes up to n=4 cover the artifact's range
        double u;
        switch (n) {
            case 1: u = 2.0; break;
            case 2: u = M_PI; break;
            case 3: u = 4.0 * M_PI / 3.0; break;
            case 4: u = M_PI * M_PI / 2.0; break;
            default: {
                u = std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
            }
        }
        return u * std::pow(r, n);
    }
};

}  // namespace kamlab
