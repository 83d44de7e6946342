#pragma once

#include <json.hpp>

#include "kamlab/hamiltonian.hpp"

namespace kamlab {

// n=2 reference model: H = (I1^2 + I2^2)/2 + t*(I1 + 0.2 cos th1 + 0.1 cos(th1+th2))
inline fourier_hamiltonian make_ref2() {
    fourier_hamiltonian H(2, 2, action_domain::make_annulus(2, 0.3, 1.6));
    poly c0(2);
    c0.add_term({2, 0, 0}, 0.5);
    c0.add_term({0, 2, 0}, 0.5);
    c0.add_term({1, 0, 1}, 1.0);  // t * I1
    H.set_mode({0, 0}, c0);
    H.set_mode({1, 0}, poly::monomial(2, {0, 0}, 1, 0.1));
    H.set_mode({-1, 0}, poly::monomial(2, {0, 0}, 1, 0.1));
    H.set_mode({1, 1}, poly::monomial(2, {0, 0}, 1, 0.05));
    H.set_mode({-1, -1}, poly::monomial(2, {0, 0}, 1, 0.05));
    return H;
}

// n=1 rotor with a single cosine coupling: H = I^2/2 + eps * cos theta
inline fourier_hamiltonian make_pendulum(double eps, double lo = 0.8, double hi = 1.2) {
    fourier_hamiltonian H(1, 1, action_domain::make_box({lo}, {hi}));
    poly c0(1);
    c0.add_term({2, 0}, 0.5);
    H.set_mode({0}, c0);
    H.set_mode({1}, poly::constant(1, 0.5 * eps));
    H.set_mode({-1}, poly::constant(1, 0.5 * eps));
    return H;
}

inline fourier_hamiltonian hamiltonian_from_json(const nlohmann::json& j) {
    int n = j.at("n").get<int>();
    int k_max = j.at("k_max").get<int>();
    const auto& jd = j.at("action_domain");
    action_domain dom;
    std::string type = jd.at("type").get<std::string>();
    if (type == "box")
        dom = action_domain::make_box(jd.at("lo").get<std::vector<double>>(),
                                      jd.at("hi").get<std::vector<double>>());
    else if (type == "annulus")
        dom = action_domain::make_annulus(n, jd.at("r0").get<double>(), jd.at("r1").get<double>());
    else
        throw validation_error("action_domain.type", "expected box|annulus");

    fourier_hamiltonian H(n, k_max, dom);
    for (const auto& jm : j.at("modes")) {
        kvec k = jm.at("k").get<std::vector<int>>();
        poly c(n);
        for (const auto& jt : jm.at("poly")) {
            std::vector<int> ideg = jt.at("i_deg").get<std::vector<int>>();
            int tdeg = jt.at("t_deg").get<int>();
            double coeff = jt.at("coeff").get<double>();
            c.add_term([&] {
                poly::key e(ideg.begin(), ideg.end());
                e.push_back(tdeg);
                return e;
            }(), coeff);
        }
        H.add_mode(k, c);
    }
    // coefficients in the file are real; mirror any missing -k partner so the
    // assembled Hamiltonian is real-valued
    auto modes_copy = H.modes();
    for (const auto& [k, c] : modes_copy) {
        if (is_zero(k)) continue;
        if (!H.mode(negate(k))) H.set_mode(negate(k), c.conj());
    }
    if (!H.reality_holds())
        throw validation_error("modes", "reality condition c_{-k} = conj(c_k) violated");
    return H;
}

inline nlohmann::json hamiltonian_to_json(const fourier_hamiltonian& H) {
    nlohmann::json j;
    j["n"] = H.dim();
    j["k_max"] = H.k_max();
    if (H.domain().type == action_domain::kind::box)
        j["action_domain"] = {{"type", "box"}, {"lo", H.domain().lo}, {"hi", H.domain().hi}};
    else
        j["action_domain"] = {{"type", "annulus"}, {"r0", H.domain().r0}, {"r1", H.domain().r1}};
    nlohmann::json jm = nlohmann::json::array();
    for (const auto& [k, c] : H.modes()) {
        nlohmann::json one;
        one["k"] = k;
        nlohmann::json jp = nlohmann::json::array();
        for (const auto& [e, coeff] : c.terms()) {
            std::vector<int> ideg(e.begin(), e.end() - 1);
            nlohmann::json t = {{"i_deg", ideg}, {"t_deg", e.back()}, {"coeff", coeff.real()}};
            if (std::abs(coeff.imag()) > 0) t["coeff_imag"] = coeff.imag();
            jp.push_back(t);
        }
        one["poly"] = jp;
        jm.push_back(one);
    }
    j["modes"] = jm;
    return j;
}

// named built-ins; "REF2" is the reference model used across the test suites
inline fourier_hamiltonian named_model(const std::string& name) {
    if (name == "REF2") return make_ref2();
    if (name.rfind("pendulum", 0) == 0) {
        double eps = 1e-3;
        if (auto pos = name.find(':'); pos != std::string::npos)
            eps = std::stod(name.substr(pos + 1));
        return make_pendulum(eps);
    }
    throw validation_error("model", "unknown named model '" + name + "'");
}

}  // namespace kamlab
