#pragma once

#include <fstream>

#include <json.hpp>

#include "kamlab/flow.hpp"
#include "kamlab/models.hpp"

namespace kamlab {

// All tunables whose values the underlying construction leaves open live
// here with documented defaults; a single JSON file overrides any subset.
struct experiment_config {
    fourier_hamiltonian model = make_ref2();
    std::string model_name = "REF2";
    uint64_t seed = 1;
    energy_band band{0.45, 0.55, 0.5, 0.1};
    std::vector<double> h_list{0.1, 0.07, 0.05};
    std::vector<double> t_grid;

    diophantine_params dio{0.01, 1.2, 50, 0.01};
    frequency_domain omega_domain = frequency_domain::make_box({-1.4, -0.1}, {-0.4, 0.75});

    kam_options kam;
    action_domain kam_box = action_domain::make_box({-1.26, -0.02}, {-0.66, 0.58});
    double bnf_t0 = 1e-3;
    int bnf_levels = 4;
    int kam_steps = 2;

    // quasimode family: frequency ball and index-set constants
    std::vector<double> search_center{-0.96, 0.28};
    double search_radius = 0.05;
    double family_radius = 0.05;
    int family_samples = 150;
    double L = 2.0;
    kvec maslov{0, 0};
    int gamma = 4;  // ceil(3n/2)+1 at n=2

    // flow experiment
    double c_target = 0.05;
    surface_grid_config surface;
    double flow_digits = 8.0;  // truncation depth of the per-grid-t normal form

    std::string out_dir = "out";

    void make_default_t_grid() {
        t_grid.clear();
        const double golden = 0.6180339887498949;
        for (int i = 0; i <= 20; ++i) t_grid.push_back(0.01 + 0.005 * golden * i);
    }

    slow_family_config family_config() const {
        slow_family_config f;
        f.search_center = search_center;
        f.search_radius = search_radius;
        f.family_radius = family_radius;
        f.family_samples = family_samples;
        f.kam_box = kam_box;
        f.kam = kam;
        f.kam.auto_floor_digits = flow_digits;
        f.maslov = maslov;
        f.L = L;
        f.gamma = gamma;
        return f;
    }

    scan_config scan() const {
        scan_config c;
        c.band = band;
        c.h_list = h_list;
        c.t_grid = t_grid;
        c.dio = dio;
        c.Omega = omega_domain;
        c.family = family_config();
        c.c_target = c_target;
        c.surface = surface;
        c.seed = seed;
        return c;
    }

    void validate() const {
        band.validate();
        for (double h : h_list)
            if (!(h > 0)) throw validation_error("h_list", "entries must be > 0");
        if (h_list.empty()) throw validation_error("h_list", "must be nonempty");
        for (size_t i = 1; i < t_grid.size(); ++i)
            if (!(t_grid[i] > t_grid[i - 1]))
                throw validation_error("t_grid", "must be strictly increasing");
        dio.validate(model.dim());
        if (int(search_center.size()) != model.dim())
            throw validation_error("quasi.search_center", "dimension mismatch");
        if (int(maslov.size()) != model.dim())
            throw validation_error("quasi.maslov", "dimension mismatch");
        if (!(L > 1.0)) throw validation_error("quasi.L", "requires L > 1");
        if (!(c_target > 0)) throw validation_error("flow.c_target", "must be > 0");
        if (!model.reality_holds()) throw validation_error("model", "reality condition violated");
    }
};

namespace detail {
template <class T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}
}  // namespace detail

inline experiment_config config_from_json(const nlohmann::json& j) {
    experiment_config c;
    if (j.contains("model")) {
        if (j.at("model").is_string()) {
            c.model_name = j.at("model").get<std::string>();
            c.model = named_model(c.model_name);
        } else {
            c.model = hamiltonian_from_json(j.at("model"));
            c.model_name = "inline";
        }
    }
    detail::maybe(j, "seed", c.seed);
    if (j.contains("band")) {
        const auto& b = j.at("band");
        detail::maybe(b, "a", c.band.a);
        detail::maybe(b, "b", c.band.b);
        c.band.E = 0.5 * (c.band.a + c.band.b);
        detail::maybe(b, "E", c.band.E);
        detail::maybe(b, "lambda", c.band.lambda);
    }
    detail::maybe(j, "h_list", c.h_list);
    if (j.contains("t_grid")) {
        const auto& g = j.at("t_grid");
        if (g.is_array()) {
            c.t_grid = g.get<std::vector<double>>();
        } else {
            double lo = g.at("lo").get<double>(), hi = g.at("hi").get<double>();
            int n = g.at("n").get<int>();
            bool golden = true;
            detail::maybe(g, "golden_spacing", golden);
            if (n < 2) throw validation_error("t_grid.n", "need >= 2");
            double step = (hi - lo) / (n - 1);
            if (golden) step *= 0.9180339887498949;  // incommensurate with h^2 lattices
            for (int i = 0; i < n; ++i) c.t_grid.push_back(lo + step * i);
        }
    } else {
        c.make_default_t_grid();
    }
    if (j.contains("diophantine")) {
        const auto& d = j.at("diophantine");
        detail::maybe(d, "kappa", c.dio.kappa);
        detail::maybe(d, "tau", c.dio.tau);
        detail::maybe(d, "k_max", c.dio.k_max);
        detail::maybe(d, "boundary_margin", c.dio.boundary_margin);
        if (d.contains("omega_domain")) {
            const auto& o = d.at("omega_domain");
            std::string type = o.value("type", "box");
            if (type == "box")
                c.omega_domain = frequency_domain::make_box(o.at("lo").get<std::vector<double>>(),
                                                            o.at("hi").get<std::vector<double>>());
            else
                c.omega_domain = frequency_domain::make_ball(
                    o.at("center").get<std::vector<double>>(), o.at("radius").get<double>());
        }
    }
    if (j.contains("kam")) {
        const auto& k = j.at("kam");
        detail::maybe(k, "M", c.kam.M);
        detail::maybe(k, "c_div", c.kam.c_div);
        detail::maybe(k, "margin", c.kam.margin);
        detail::maybe(k, "s", c.kam.s);
        detail::maybe(k, "r", c.kam.r);
        detail::maybe(k, "shrink_s", c.kam.shrink_s);
        detail::maybe(k, "shrink_r", c.kam.shrink_r);
        detail::maybe(k, "eps0", c.kam.eps0);
        detail::maybe(k, "fit_degree_extra", c.kam.fit_degree_extra);
        detail::maybe(k, "node_factor", c.kam.node_factor);
        detail::maybe(k, "d1_grid", c.kam.d1_grid);
        detail::maybe(k, "fixed_point_tol", c.kam.fixed_point_tol);
        detail::maybe(k, "refit_tol", c.kam.refit_tol);
        detail::maybe(k, "refit_rel", c.kam.refit_rel);
        detail::maybe(k, "prune_rel", c.kam.prune_rel);
        detail::maybe(k, "auto_floor_digits", c.kam.auto_floor_digits);
        detail::maybe(k, "bnf_t0", c.bnf_t0);
        detail::maybe(k, "bnf_levels", c.bnf_levels);
        detail::maybe(k, "steps", c.kam_steps);
        if (k.contains("box"))
            c.kam_box = action_domain::make_box(k.at("box").at("lo").get<std::vector<double>>(),
                                                k.at("box").at("hi").get<std::vector<double>>());
    }
    if (j.contains("quasi")) {
        const auto& q = j.at("quasi");
        detail::maybe(q, "search_center", c.search_center);
        detail::maybe(q, "search_radius", c.search_radius);
        detail::maybe(q, "family_radius", c.family_radius);
        detail::maybe(q, "family_samples", c.family_samples);
        detail::maybe(q, "L", c.L);
        detail::maybe(q, "maslov", c.maslov);
        detail::maybe(q, "gamma", c.gamma);
    }
    if (j.contains("flow")) {
        const auto& f = j.at("flow");
        detail::maybe(f, "c_target", c.c_target);
        detail::maybe(f, "surface_bins", c.surface.n_bins);
        detail::maybe(f, "surface_t", c.surface.n_t);
        detail::maybe(f, "mc_samples", c.surface.mc_samples);
        detail::maybe(f, "shell_frac", c.surface.shell_frac);
        detail::maybe(f, "flow_digits", c.flow_digits);
    }
    detail::maybe(j, "out_dir", c.out_dir);
    c.validate();
    return c;
}

inline experiment_config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("config", "cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    return config_from_json(j);
}

}  // namespace kamlab
