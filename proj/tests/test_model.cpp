#include <catch2/catch_amalgamated.hpp>

#include "kamlab/decay.hpp"
#include "kamlab/models.hpp"
#include "kamlab/surface.hpp"

using namespace kamlab;

namespace {

// independent term-by-term oracle: cos/sin accumulation instead of the
// library's complex phase sum
double eval_oracle(const fourier_hamiltonian& H, const std::vector<double>& th,
                   const std::vector<double>& I, double t) {
    double acc = 0;
    for (const auto& [k, c] : H.modes()) {
        double phase = 0;
        for (int j = 0; j < H.dim(); ++j) phase += k[size_t(j)] * th[size_t(j)];
        cplx v = c.eval(I, t);
        acc += v.real() * std::cos(phase) - v.imag() * std::sin(phase);
    }
    return acc;
}

}  // namespace

TEST_CASE("eval on the reference model") {
    auto H = make_ref2();
    CHECK(H.eval({0, 0}, {1, 0}, 0.1) == Catch::Approx(0.63).margin(1e-15));
    CHECK(H.eval({2.17, -0.4}, {1, 0}, 0.0) == Catch::Approx(0.5).margin(1e-15));

    rng_stream rng(21);
    for (int s = 0; s < 200; ++s) {
        std::vector<double> th{rng.uniform(0, TWO_PI), rng.uniform(0, TWO_PI)};
        auto I = H.domain().sample(rng);
        double t = rng.uniform(-0.3, 0.3);
        double a = H.eval(th, I, t), b = eval_oracle(H, th, I, t);
        CHECK(std::abs(a - b) <= 1e-14 * std::max(1.0, std::abs(b)));
    }
    CHECK_THROWS_AS(H.eval({0, 0}, {5, 5}, 0.0), domain_error);
}

TEST_CASE("frequency map and Hessian") {
    auto H = make_ref2();
    auto w = H.frequency({0.6, 0.8}, 0.0);
    CHECK(w[0] == Catch::Approx(0.6).margin(1e-15));
    CHECK(w[1] == Catch::Approx(0.8).margin(1e-15));
    auto w2 = H.frequency({0.6, 0.8}, 0.1);
    CHECK(w2[0] == Catch::Approx(0.7).margin(1e-15));
    CHECK(w2[1] == Catch::Approx(0.8).margin(1e-15));

    rng_stream rng(5);
    for (int s = 0; s < 20; ++s)
        CHECK(H.hessian_det(H.domain().sample(rng), rng.uniform(-0.2, 0.2)) ==
              Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("frequency equals the finite-difference gradient of the torus average") {
    auto H = make_ref2();
    rng_stream rng(7);
    double step = 1e-5;
    for (int s = 0; s < 30; ++s) {
        auto I = H.domain().sample(rng);
        if (!H.domain().contains(I, 2 * step)) continue;
        double t = rng.uniform(-0.2, 0.2);
        auto w = H.frequency(I, t);
        for (int j = 0; j < 2; ++j) {
            auto Ip = I, Im = I;
            Ip[size_t(j)] += step;
            Im[size_t(j)] -= step;
            double fd = (H.torus_average(Ip, t) - H.torus_average(Im, t)) / (2 * step);
            CHECK(std::abs(fd - w[size_t(j)]) < 1e-8);
        }
    }
}

TEST_CASE("legendre inverse: self-inverse quadratic") {
    auto H = make_ref2();
    auto I = H.legendre_inverse({-0.7, 0.7141}, 0.0);
    CHECK(I[0] == Catch::Approx(-0.7).margin(1e-12));
    CHECK(I[1] == Catch::Approx(0.7141).margin(1e-12));
}

TEST_CASE("legendre inverse: general quadratic matches the linear-system oracle") {
    // H0 = (I1^2 + I2^2)/2 + 0.25 I1 I2 has Hessian [[1,0.25],[0.25,1]]
    fourier_hamiltonian H(2, 1, action_domain::make_box({-2, -2}, {2, 2}));
    poly c0(2);
    c0.add_term({2, 0, 0}, 0.5);
    c0.add_term({0, 2, 0}, 0.5);
    c0.add_term({1, 1, 0}, 0.25);
    H.set_mode({0, 0}, c0);

    rng_stream rng(3);
    for (int s = 0; s < 50; ++s) {
        std::vector<double> w{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        auto I = H.legendre_inverse(w, 0.0);
        // oracle: solve [[1,.25],[.25,1]] I = w directly
        double det = 1.0 - 0.0625;
        double i1 = (w[0] - 0.25 * w[1]) / det;
        double i2 = (w[1] - 0.25 * w[0]) / det;
        CHECK(std::abs(I[0] - i1) < 1e-10);
        CHECK(std::abs(I[1] - i2) < 1e-10);
    }
}

TEST_CASE("legendre inverse: cubic correction converges to tight residual") {
    fourier_hamiltonian H(2, 1, action_domain::make_box({-2, -2}, {2, 2}));
    poly c0(2);
    c0.add_term({2, 0, 0}, 0.5);
    c0.add_term({0, 2, 0}, 0.5);
    c0.add_term({3, 0, 0}, 0.1);
    H.set_mode({0, 0}, c0);
    rng_stream rng(11);
    for (int s = 0; s < 100; ++s) {
        std::vector<double> w{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
        auto I = H.legendre_inverse(w, 0.0);
        auto back = H.frequency(I, 0.0);
        double res = std::hypot(back[0] - w[0], back[1] - w[1]);
        CHECK(res < 1e-12);
    }
}

TEST_CASE("legendre of frequency is the identity") {
    auto H = make_ref2();
    rng_stream rng(13);
    for (int s = 0; s < 60; ++s) {
        auto I = H.domain().sample(rng);
        double t = rng.uniform(-0.2, 0.2);
        auto w = H.frequency(I, t);
        auto I2 = H.legendre_inverse(w, t, &I);
        CHECK(std::abs(I2[0] - I[0]) < 1e-10);
        CHECK(std::abs(I2[1] - I[1]) < 1e-10);
    }
}

TEST_CASE("torus average") {
    auto H = make_ref2();
    rng_stream rng(17);
    SECTION("dt operand picks the I1 coefficient") {
        for (int s = 0; s < 20; ++s) {
            auto I = H.domain().sample(rng);
            CHECK(H.torus_average(I, 0.0, fourier_hamiltonian::operand::dt) ==
                  Catch::Approx(I[0]).margin(1e-14));
        }
    }
    SECTION("no zero-mode perturbation means the average is the integrable part") {
        fourier_hamiltonian G(2, 1, H.domain());
        poly c0(2);
        c0.add_term({2, 0, 0}, 0.5);
        c0.add_term({0, 2, 0}, 0.5);
        G.set_mode({0, 0}, c0);
        G.set_mode({1, 0}, poly::constant(2, 0.05));
        G.set_mode({-1, 0}, poly::constant(2, 0.05));
        auto I = G.domain().sample(rng);
        CHECK(G.torus_average(I, 0.0) == Catch::Approx(0.5 * (I[0] * I[0] + I[1] * I[1])));
    }
    SECTION("agrees with trapezoidal quadrature on a 64x64 angle grid") {
        for (int s = 0; s < 5; ++s) {
            auto I = H.domain().sample(rng);
            double t = rng.uniform(-0.2, 0.2);
            double quad = 0;
            for (int a = 0; a < 64; ++a)
                for (int b = 0; b < 64; ++b)
                    quad += H.eval({TWO_PI * a / 64.0, TWO_PI * b / 64.0}, I, t);
            quad /= 64.0 * 64.0;
            CHECK(std::abs(quad - H.torus_average(I, t)) < 1e-13);
        }
    }
    SECTION("linearity in the operand") {
        auto I = H.domain().sample(rng);
        double a = H.torus_average(I, 0.1);
        double b = H.partial_t().torus_average(I, 0.1);
        fourier_hamiltonian sum = H;
        auto dt = H.partial_t();
        for (const auto& [k, c] : dt.modes()) sum.add_mode(k, c);
        CHECK(sum.torus_average(I, 0.1) == Catch::Approx(a + b).margin(1e-14));
    }
}

TEST_CASE("energy surface averages") {
    auto H = make_ref2();
    rng_stream rng(19);
    SECTION("unit observable is exactly one") {
        auto one = fourier_hamiltonian(2, 0, H.domain());
        one.set_mode({0, 0}, poly::constant(2, 1.0));
        auto est = energy_surface_average(H, one, 0.5, 0.05, 2000, rng, 5e-4);
        CHECK(est.value == 1.0);
        CHECK(est.std_err == 0.0);
    }
    SECTION("dt symbol averages to zero at t=0 by symmetry") {
        auto est = energy_surface_average(H, H.partial_t(), 0.5, 0.0, 20000, rng, 5e-4);
        CHECK(std::abs(est.value) <= 3 * est.std_err + 1e-3);
    }
    SECTION("I1^2 on the unperturbed circle averages to E") {
        fourier_hamiltonian A(2, 0, H.domain());
        A.set_mode({0, 0}, poly::monomial(2, {2, 0}, 0, 1.0));
        double E = 0.5;
        auto est = energy_surface_average(H, A, E, 0.0, 20000, rng, 5e-4);
        CHECK(std::abs(est.value - E) <= 3 * est.std_err + 2e-3);
    }
    SECTION("empty sample set raises a domain error") {
        auto one = fourier_hamiltonian(2, 0, H.domain());
        one.set_mode({0, 0}, poly::constant(2, 1.0));
        CHECK_THROWS_AS(energy_surface_average(H, one, 50.0, 0.0, 100, rng, 1e-6), domain_error);
    }
}

TEST_CASE("coefficient decay diagnostics") {
    SECTION("zero perturbation reports flat") {
        fourier_hamiltonian H(2, 4, action_domain::make_box({-1, -1}, {1, 1}));
        H.set_mode({0, 0}, poly::constant(2, 1.0));
        auto fit = gevrey_decay_check(H);
        CHECK(fit.flat);
    }
    SECTION("synthetic exponential coefficients fit rate 1") {
        fourier_hamiltonian H(1, 12, action_domain::make_box({-1}, {1}));
        for (int k = 1; k <= 12; ++k) {
            H.set_mode({k}, poly::constant(1, std::exp(-double(k))));
            H.set_mode({-k}, poly::constant(1, std::exp(-double(k))));
        }
        auto fit = gevrey_decay_check(H);
        CHECK(fit.rate == Catch::Approx(1.0).margin(0.05));
    }
    SECTION("too little data is flagged as unavailable") {
        fourier_hamiltonian H(1, 3, action_domain::make_box({-1}, {1}));
        H.set_mode({1}, poly::constant(1, 0.5));
        H.set_mode({-1}, poly::constant(1, 0.5));
        CHECK_THROWS_AS(gevrey_decay_check(H), diagnostic_unavailable_error);
    }
}

TEST_CASE("model JSON round trip and reality enforcement") {
    auto H = make_ref2();
    auto j = hamiltonian_to_json(H);
    auto H2 = hamiltonian_from_json(j);
    rng_stream rng(23);
    for (int s = 0; s < 40; ++s) {
        std::vector<double> th{rng.uniform(0, TWO_PI), rng.uniform(0, TWO_PI)};
        auto I = H.domain().sample(rng);
        double t = rng.uniform(-0.3, 0.3);
        CHECK(H.eval(th, I, t) == Catch::Approx(H2.eval(th, I, t)).margin(1e-15));
    }
    // one-sided modes are mirrored by the loader
    nlohmann::json one;
    one["n"] = 2;
    one["k_max"] = 1;
    one["action_domain"] = {{"type", "box"}, {"lo", {-1.0, -1.0}}, {"hi", {1.0, 1.0}}};
    one["modes"] = nlohmann::json::array(
        {{{"k", {1, 0}}, {"poly", nlohmann::json::array({{{"i_deg", {0, 0}},
                                                          {"t_deg", 0},
                                                          {"coeff", 0.5}}})}}});
    auto G = hamiltonian_from_json(one);
    CHECK(G.reality_holds());
    CHECK(G.eval({0, 0}, {0, 0}, 0.0) == Catch::Approx(1.0));  // 0.5 e^{i th} + mirror = cos
}

TEST_CASE("evaluation stays real to relative 1e-14") {
    auto H = make_ref2();
    rng_stream rng(127);
    for (int s = 0; s < 300; ++s) {
        std::vector<double> th{rng.uniform(0, TWO_PI), rng.uniform(0, TWO_PI)};
        auto I = H.domain().sample(rng);
        cplx v = H.eval_complex(th, I, rng.uniform(-0.3, 0.3));
        CHECK(std::abs(v.imag()) <= 1e-14 * std::max(1.0, std::abs(v)));
    }
}

TEST_CASE("band regularity check bounds the gradient below") {
    auto H = make_ref2();
    energy_band band{0.45, 0.55, 0.5, 0.1};
    band.validate();
    double g = band.min_grad_on_band(H, 0.0, rng_stream(131));
    CHECK(g > 0.9);  // |grad| = |I| ~ sqrt(2E) on the shell
    energy_band bad{0.44, 0.46, 0.45, 0.1};
    CHECK_THROWS_AS((energy_band{0.6, 0.5, 0.55, 0.1}).validate(), validation_error);
    (void)bad;
}
