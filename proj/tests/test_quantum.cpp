#include <catch2/catch_amalgamated.hpp>

#include "kamlab/kam.hpp"
#include "kamlab/models.hpp"
#include "kamlab/quantum.hpp"

using namespace kamlab;

namespace {

fourier_hamiltonian quadratic_2d() {
    fourier_hamiltonian H(2, 2, action_domain::make_annulus(2, 0.3, 1.6));
    poly c0(2);
    c0.add_term({2, 0, 0}, 0.5);
    c0.add_term({0, 2, 0}, 0.5);
    H.set_mode({0, 0}, c0);
    return H;
}

}  // namespace

TEST_CASE("integrable quantization is diagonal with exact symbol values") {
    auto H = quadratic_2d();
    energy_band band{0.45, 0.55, 0.5, 0.1};
    for (double h : {0.1, 0.05}) {
        auto op = quantize(H, h, {0, 0}, {band, 4 * h}, 0.0);
        for (int c = 0; c < op.dim(); ++c) {
            for (int r = 0; r < op.dim(); ++r)
                if (r != c) CHECK(op.mat(r, c) == cplx(0.0));
            auto I = op.action_of(op.modes[size_t(c)]);
            CHECK(op.mat(c, c).real() == 0.5 * (I[0] * I[0] + I[1] * I[1]));
        }
    }
}

TEST_CASE("one-dimensional couplings quantize to the expected band structure") {
    SECTION("pure cosine gives half on the off-diagonals") {
        fourier_hamiltonian H(1, 1, action_domain::make_box({-2.0}, {2.0}));
        poly c0(1);
        c0.add_term({2, 0}, 0.5);
        H.set_mode({0}, c0);
        H.set_mode({1}, poly::constant(1, 0.5));
        H.set_mode({-1}, poly::constant(1, 0.5));
        energy_band band{0.0, 1.9, 0.5, 0.1};
        auto op = quantize(H, 0.25, {0}, {band, 2.0}, 0.0);
        for (int c = 0; c + 1 < op.dim(); ++c) {
            CHECK(op.mat(c + 1, c) == cplx(0.5));
            CHECK(op.mat(c, c + 1) == cplx(0.5));
        }
    }
    SECTION("action-weighted cosine evaluates at the midpoint") {
        for (int theta1 : {0, 1, 2}) {
            fourier_hamiltonian H(1, 1, action_domain::make_box({-2.0}, {2.0}));
            poly c0(1);
            c0.add_term({2, 0}, 0.5);
            H.set_mode({0}, c0);
            H.set_mode({1}, poly::monomial(1, {1}, 0, 0.5));
            H.set_mode({-1}, poly::monomial(1, {1}, 0, 0.5));
            energy_band band{0.0, 1.9, 0.5, 0.1};
            double h = 0.25;
            kvec mas{theta1};
            auto op = quantize(H, h, mas, {band, 2.0}, 0.0);
            for (int c = 0; c + 1 < op.dim(); ++c) {
                double m = double(op.modes[size_t(c)][0]);
                double expect = 0.5 * h * (m + 0.5 + 0.25 * theta1);
                auto it = op.index.find({op.modes[size_t(c)][0] + 1});
                REQUIRE(it != op.index.end());
                CHECK(op.mat(it->second, c).real() == Catch::Approx(expect).margin(1e-15));
            }
        }
    }
}

TEST_CASE("quantization is Hermitian and bandwidth-limited") {
    auto H = make_ref2();
    energy_band band{0.45, 0.55, 0.5, 0.1};
    for (double h : {0.1, 0.05}) {
        auto op = quantize(H, h, {0, 0}, {band, 4 * h}, 0.07);
        for (int r = 0; r < op.dim(); ++r)
            for (int c = 0; c < op.dim(); ++c) {
                CHECK(op.mat(r, c) == std::conj(op.mat(c, r)));
                if (op.mat(r, c) != cplx(0.0)) {
                    kvec d(2);
                    d[0] = op.modes[size_t(r)][0] - op.modes[size_t(c)][0];
                    d[1] = op.modes[size_t(r)][1] - op.modes[size_t(c)][1];
                    CHECK(l1_norm(d) <= H.k_max());
                }
            }
    }
}

TEST_CASE("spectrum of explicit matrices") {
    SECTION("diagonal operator returns its sorted diagonal") {
        auto H = quadratic_2d();
        energy_band band{0.4, 0.6, 0.5, 0.1};
        auto op = quantize(H, 0.1, {0, 0}, {band, 0.3}, 0.0);
        auto f = spectrum_full(op);
        for (size_t i = 1; i < f.evals.size(); ++i) CHECK(f.evals[i] >= f.evals[i - 1]);
        auto sp = spectrum(op, band);
        for (double e : sp.evals) {
            CHECK(e >= band.a);
            CHECK(e <= band.b);
        }
    }
    SECTION("two-level closed form") {
        lattice_operator op;
        op.n = 1;
        op.h = 1;
        op.maslov = {0};
        op.modes = {{0}, {1}};
        op.index[{0}] = 0;
        op.index[{1}] = 1;
        op.mat = Eigen::MatrixXcd::Zero(2, 2);
        double e = 0.37;
        op.mat(0, 1) = e;
        op.mat(1, 0) = e;
        op.real_symmetric = true;
        auto f = spectrum_full(op);
        CHECK(f.evals[0] == Catch::Approx(-e));
        CHECK(f.evals[1] == Catch::Approx(e));
    }
    SECTION("random Hermitian matches the conjugation-invariance oracle") {
        rng_stream rng(79);
        int N = 50;
        Eigen::MatrixXcd A(N, N);
        for (int r = 0; r < N; ++r)
            for (int c = 0; c <= r; ++c) {
                cplx v(rng.uniform(-1, 1), r == c ? 0.0 : rng.uniform(-1, 1));
                A(r, c) = v;
                A(c, r) = std::conj(v);
            }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> direct(A);
        // conjugate by a random unitary (QR of a random complex matrix)
        Eigen::MatrixXcd G(N, N);
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c) G(r, c) = cplx(rng.normal(), rng.normal());
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(G);
        Eigen::MatrixXcd Q = qr.householderQ();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> conj(Q.adjoint() * A * Q);
        for (int i = 0; i < N; ++i)
            CHECK(std::abs(direct.eigenvalues()(i) - conj.eigenvalues()(i)) < 1e-10);
    }
}

TEST_CASE("trace invariance and frame unitarity") {
    auto H = make_ref2();
    energy_band band{0.45, 0.55, 0.5, 0.1};
    auto op = quantize(H, 0.1, {0, 0}, {band, 0.4}, 0.05);
    auto f = spectrum_full(op);
    double tr = 0, sum = 0;
    for (int i = 0; i < op.dim(); ++i) {
        tr += op.mat(i, i).real();
        sum += f.evals[size_t(i)];
    }
    CHECK(std::abs(tr - sum) <= 1e-9 * std::max(1.0, std::abs(tr)));
    Eigen::MatrixXcd G = f.vectors.adjoint() * f.vectors;
    double worst = 0;
    for (int r = 0; r < op.dim(); ++r)
        for (int c = 0; c < op.dim(); ++c)
            worst = std::max(worst, std::abs(G(r, c) - (r == c ? 1.0 : 0.0)));
    CHECK(worst < 1e-10);
}

TEST_CASE("eigenvalue flow tracking") {
    energy_band band{0.45, 0.55, 0.5, 0.1};
    SECTION("angle-independent family moves exactly with the symbol") {
        fourier_hamiltonian H(2, 0, action_domain::make_annulus(2, 0.3, 1.6));
        poly c0(2);
        c0.add_term({2, 0, 0}, 0.5);
        c0.add_term({0, 2, 0}, 0.5);
        c0.add_term({1, 0, 1}, 1.0);
        H.set_mode({0, 0}, c0);
        std::vector<double> tg{0.0, 0.01, 0.02, 0.03};
        auto traj = track_flow(H, 0.1, {0, 0}, tg, {band, 0.3});
        // every tracked eigenvalue follows H(h m; t) for its mode
        auto op0 = quantize(H, 0.1, {0, 0}, {band, 0.3}, 0.0);
        for (const auto& p : traj.points)
            for (size_t c = 0; c < p.band_cols.size(); ++c) {
                double E = p.evals[size_t(p.band_cols[c])];
                bool matched = false;
                for (const auto& m : op0.modes) {
                    auto I = op0.action_of(m);
                    double predict = 0.5 * (I[0] * I[0] + I[1] * I[1]) + p.t * I[0];
                    if (std::abs(E - predict) < 1e-12) matched = true;
                }
                CHECK(matched);
                if (!std::isnan(p.speed[c])) CHECK(std::abs(p.speed[c]) <= traj.speed_bound);
            }
    }
    SECTION("first-order speeds at t=0 are the lattice actions") {
        auto H = make_ref2();
        std::vector<double> tg{0.0, 1e-4};
        auto traj = track_flow(H, 0.1, {0, 0}, tg, {band, 0.4});
        auto op = quantize(H, 0.1, {0, 0}, {band, 0.4}, 0.0);
        const auto& p0 = traj.points.front();
        for (size_t c = 0; c < p0.band_cols.size(); ++c) {
            // at t=0 eigenvectors are lattice basis vectors: the Hadamard
            // element is the diagonal of the dt symbol, h m_1, for one of the
            // modes in the eigenvalue's degeneracy class
            double E = p0.evals[size_t(p0.band_cols[c])];
            bool matched = false;
            for (const auto& m : op.modes) {
                auto I = op.action_of(m);
                if (std::abs(0.5 * (I[0] * I[0] + I[1] * I[1]) - E) > 1e-12) continue;
                if (std::abs(p0.hadamard[c] - I[0]) < 1e-10) matched = true;
            }
            CHECK(matched);
        }
    }
    SECTION("matched overlaps are high away from flagged crossings") {
        auto H = make_ref2();
        std::vector<double> tg{0.01, 0.0125, 0.015};
        auto traj = track_flow(H, 0.1, {0, 0}, tg, {band, 0.4});
        int finite_speeds = 0;
        for (const auto& p : traj.points)
            for (size_t c = 0; c < p.speed.size(); ++c)
                if (std::isfinite(p.speed[c])) {
                    ++finite_speeds;
                    CHECK(std::abs(p.speed[c]) <= traj.speed_bound);
                }
        CHECK(finite_speeds > 0);
    }
}

TEST_CASE("quasi-eigenvalue families") {
    SECTION("unperturbed family evaluates the quadratic symbol") {
        std::vector<std::vector<double>> S{{0.9, 0.3}};
        auto fam = quasi_eigenvalues(
            [](const std::vector<double>& I, double) {
                return 0.5 * (I[0] * I[0] + I[1] * I[1]);
            },
            0.05, {0, 0}, S, 2.0, 0.0);
        for (size_t i = 0; i < fam.members.size(); ++i) {
            auto& I = fam.actions[i];
            CHECK(fam.mu[i] == 0.5 * (I[0] * I[0] + I[1] * I[1]));
        }
        CHECK(fam.window_halfwidth == Catch::Approx(std::pow(0.05, 3)));
    }
    SECTION("single-action membership equals the brute-force scan") {
        std::vector<std::vector<double>> S{{0.9, 0.3}};
        double h = 0.05, L = 2.0;
        auto fam = quasi_eigenvalues(
            [](const std::vector<double>&, double) { return 0.0; }, h, {0, 0}, S, L, 0.0);
        std::set<kvec> got(fam.members.begin(), fam.members.end());
        std::set<kvec> oracle;
        for (int m1 = 0; m1 <= 40; ++m1)
            for (int m2 = -20; m2 <= 30; ++m2) {
                double d = std::hypot(h * m1 - 0.9, h * m2 - 0.3);
                if (d < L * h) oracle.insert({m1, m2});
            }
        CHECK(got == oracle);
    }
    SECTION("count approaches the volume prediction for an annular set") {
        std::vector<std::vector<double>> S;
        for (int i = 0; i < 720; ++i) {
            double phi = TWO_PI * i / 720.0;
            S.push_back({std::cos(phi), std::sin(phi)});
        }
        auto fam = quasi_eigenvalues(
            [](const std::vector<double>&, double) { return 0.0; }, 0.02, {0, 0}, S, 2.0, 0.0);
        CHECK(double(fam.members.size()) ==
              Catch::Approx(fam.predicted_count).epsilon(0.10));
    }
    SECTION("maslov shift moves the lattice") {
        std::vector<std::vector<double>> S{{0.9, 0.3}};
        auto fam = quasi_eigenvalues(
            [](const std::vector<double>& I, double) { return I[0]; }, 0.05, {1, 2}, S, 2.0, 0.0);
        for (size_t i = 0; i < fam.members.size(); ++i)
            CHECK(fam.actions[i][0] ==
                  Catch::Approx(0.05 * (fam.members[i][0] + 0.25)).margin(1e-15));
    }
}

TEST_CASE("quasimode residuals on the normal-form side") {
    auto box = action_domain::make_box({-1.26, -0.02}, {-0.66, 0.58});
    auto H = make_ref2().with_domain(box);
    energy_band band{0.45, 0.55, 0.5, 0.1};
    double h = 0.1;

    SECTION("integrable case has zero residual") {
        auto G = quadratic_2d();
        auto op = quantize(G, h, {0, 0}, {band, 0.3}, 0.0);
        quasi_eigen_family fam;
        fam.n = 2;
        fam.h = h;
        fam.maslov = {0, 0};
        fam.window_halfwidth = std::pow(h, 3);
        for (int i = 0; i < std::min(5, op.dim()); ++i) {
            fam.members.push_back(op.modes[size_t(i)]);
            fam.actions.push_back(op.action_of(op.modes[size_t(i)]));
            auto& I = fam.actions.back();
            fam.mu.push_back(0.5 * (I[0] * I[0] + I[1] * I[1]));
        }
        auto res = quasimode_residual(op, fam);
        for (double r : res) CHECK(r == 0.0);
    }

    SECTION("one step shrinks residuals by at least a factor of three") {
        double t = 1e-3;
        auto step = kam_step(H, t, {});
        // families on the lattice near the working box centre
        std::vector<std::vector<double>> S{{-0.9, 0.25}};
        auto k0 = step.h0_new;
        auto fam = quasi_eigenvalues(
            [&](const std::vector<double>& I, double) { return k0.eval_real(I, 0.0); }, h, {0, 0},
            S, 2.0, t);
        mode_window win{band, 0.45};
        auto before_op = quantize(make_ref2(), h, {0, 0}, win, t);
        auto after_op = quantize(step.h_total.with_domain(make_ref2().domain()), h, {0, 0}, win,
                                 0.0);
        // residuals against each operator's own diagonal as the reference
        auto fam_before = fam;
        for (size_t i = 0; i < fam.members.size(); ++i) {
            auto it = before_op.index.find(fam.members[i]);
            REQUIRE(it != before_op.index.end());
            fam_before.mu[i] = before_op.mat(it->second, it->second).real();
        }
        auto rb = quasimode_residual(before_op, fam_before);
        auto ra = quasimode_residual(after_op, fam);
        double mb = 0, ma = 0;
        for (size_t i = 0; i < rb.size(); ++i) {
            if (std::isfinite(rb[i])) mb = std::max(mb, rb[i]);
            if (std::isfinite(ra[i])) ma = std::max(ma, ra[i]);
        }
        CHECK(mb >= 3.0 * ma);
    }

    SECTION("residuals shrink superlinearly in the parameter") {
        std::vector<double> ts{1e-2, 1e-3, 1e-4}, res;
        std::vector<std::vector<double>> S{{-0.9, 0.25}};
        for (double t : ts) {
            auto step = kam_step(H, t, {});
            auto k0 = step.h0_new;
            auto fam = quasi_eigenvalues(
                [&](const std::vector<double>& I, double) { return k0.eval_real(I, 0.0); }, h,
                {0, 0}, S, 2.0, t);
            auto op = quantize(step.h_total.with_domain(make_ref2().domain()), h, {0, 0},
                               {band, 0.45}, 0.0);
            auto r = quasimode_residual(op, fam);
            double m = 0;
            for (double v : r)
                if (std::isfinite(v)) m = std::max(m, v);
            res.push_back(m);
        }
        CHECK(fit_loglog(ts, res).slope >= 1.4);
    }
}
