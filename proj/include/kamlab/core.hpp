#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <functional>
#include <future>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace kamlab {

using cplx = std::complex<double>;
using kvec = std::vector<int>;  // angle wave vector, compared lexicographically

constexpr double TWO_PI = 6.283185307179586476925286766559;

// ---------------------------------------------------------------------------
// error types

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct domain_error : error {
    using error::error;
};
struct degeneracy_error : error {
    using error::error;
};
struct no_solution_error : error {
    using error::error;
};
struct small_divisor_error : error {
    kvec k;
    small_divisor_error(const std::string& msg, kvec kk) : error(msg), k(std::move(kk)) {}
};
struct precondition_error : error {
    using error::error;
};
struct empty_domain_error : error {
    using error::error;
};
struct step_failure_error : error {
    using error::error;
};
struct accuracy_error : error {
    using error::error;
};
struct sampling_failure_error : error {
    using error::error;
};
struct validation_error : error {
    std::string field;
    validation_error(const std::string& f, const std::string& msg)
        : error(f + ": " + msg), field(f) {}
};
struct diagnostic_unavailable_error : error {
    using error::error;
};

// ---------------------------------------------------------------------------
// wave-vector helpers

inline int l1_norm(const kvec& k) {
    int s = 0;
    for (int v : k) s += std::abs(v);
    return s;
}

inline kvec negate(const kvec& k) {
    kvec m(k.size());
    for (size_t i = 0; i < k.size(); ++i) m[i] = -k[i];
    return m;
}

inline bool is_zero(const kvec& k) {
    return std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
}

inline std::string to_string(const kvec& k) {
    std::string s = "(";
    for (size_t i = 0; i < k.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(k[i]);
    }
    return s + ")";
}

template <class F>
void for_each_kvec(int n, int k_max_l1, F&& f) {
    // enumerate all k in Z^n with |k|_1 <= k_max_l1, lexicographic order
    kvec k(n, -k_max_l1);
    while (true) {
        if (l1_norm(k) <= k_max_l1) f(k);
        int i = n - 1;
        while (i >= 0 && k[i] == k_max_l1) k[i--] = -k_max_l1;
        if (i < 0) break;
        ++k[i];
    }
}

// ---------------------------------------------------------------------------
// deterministic rng stream
//
// Sampling routines take an explicit stream per call; streams can be forked
// by label so concurrent runs stay reproducible under a fixed root seed.

class rng_stream {
public:
    explicit rng_stream(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {
        next();
        next();
    }

    uint64_t next() {
        // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        // Box-Muller, one value per call
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(TWO_PI * u2);
    }

    rng_stream fork(uint64_t label) const {
        rng_stream s(state_ ^ (label * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
        return s;
    }

    static uint64_t hash_doubles(uint64_t seed, std::initializer_list<double> xs) {
        uint64_t h = seed ^ 0x51'7c'c1'b7'27'22'0a'95ULL;
        for (double x : xs) {
            uint64_t b;
            static_assert(sizeof(b) == sizeof(x));
            std::memcpy(&b, &x, sizeof(b));
            h ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    }

private:
    uint64_t state_;
};

// ---------------------------------------------------------------------------
// parallel map over an index range (results deterministic: workers write
// disjoint slots)

template <class F>
void par_for(size_t count, F&& f, unsigned max_threads = 0) {
    unsigned n_threads = max_threads ? max_threads : std::thread::hardware_concurrency();
    if (n_threads <= 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::vector<std::future<void>> futs;
    std::atomic<size_t> cursor{0};
    for (unsigned w = 0; w < std::min<size_t>(n_threads, count); ++w) {
        futs.push_back(std::async(std::launch::async, [&]() {
            for (size_t i = cursor.fetch_add(1); i < count; i = cursor.fetch_add(1)) f(i);
        }));
    }
    for (auto& fu : futs) fu.get();
}

// ---------------------------------------------------------------------------
// small statistics helpers

struct line_fit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // rms of fit residuals
};

inline line_fit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw error("fit_line: need >= 2 points");
    double n = double(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-300) throw degeneracy_error("fit_line: degenerate abscissae");
    line_fit r;
    r.slope = (n * sxy - sx * sy) / det;
    r.intercept = (sy * sxx - sx * sxy) / det;
    double ss = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double e = y[i] - (r.slope * x[i] + r.intercept);
        ss += e * e;
    }
    r.residual = std::sqrt(ss / n);
    return r;
}

// log-log slope of y against x (both positive); zero y entries are skipped
inline line_fit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0 && y[i] > 0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    return fit_line(lx, ly);
}

struct mean_se {
    double mean = 0.0;
    double se = 0.0;
    size_t n = 0;
};

inline mean_se running_mean_se(const std::vector<double>& v) {
    mean_se r;
    r.n = v.size();
    if (v.empty()) return r;
    double s = 0;
    for (double x : v) s += x;
    r.mean = s / double(v.size());
    double ss = 0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.se = v.size() > 1 ? std::sqrt(ss / (double(v.size()) * double(v.size() - 1))) : 0.0;
    return r;
}

}  // namespace kamlab
