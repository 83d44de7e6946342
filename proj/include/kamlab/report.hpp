#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "kamlab/flow.hpp"

namespace kamlab {

// CSV with a fixed header; numbers printed with %.12g so identical inputs
// give byte-identical files
class csv_writer {
public:
    csv_writer(const std::string& path, const std::vector<std::string>& header) {
        std::filesystem::path p(path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        out_.open(path);
        if (!out_) throw error("csv_writer: cannot open " + path);
        for (size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << "\n";
        cols_ = header.size();
    }

    void row(const std::vector<double>& vals) {
        if (vals.size() != cols_) throw error("csv_writer: column count mismatch");
        char buf[64];
        for (size_t i = 0; i < vals.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.12g", vals[i]);
            out_ << (i ? "," : "") << buf;
        }
        out_ << "\n";
    }

private:
    std::ofstream out_;
    size_t cols_ = 0;
};

inline nlohmann::json to_json(const speed_bounds_result& s) {
    return {{"q_minus", s.q_minus},
            {"q_plus", s.q_plus},
            {"B", s.B},
            {"c", s.c},
            {"eps", s.eps},
            {"delta", s.delta},
            {"certified", s.certified},
            {"failure", s.failure},
            {"slow_omega", s.slow_omega},
            {"slow_speed", s.slow_speed},
            {"max_mu_speed", s.max_mu_speed}};
}

inline nlohmann::json to_json(const scan_row& r) {
    return {{"h", r.h},           {"t", r.t},
            {"N", r.N},           {"m_count", r.m_count},
            {"ratio", r.ratio},   {"flagged", r.flagged},
            {"window_measure", r.window_measure},
            {"band_count", r.band_count},
            {"z_fraction", r.z_fraction}};
}

inline nlohmann::json to_json(const gram_result& g) {
    return {{"dim_U", g.dim_U},
            {"m_count", g.m_count},
            {"hs_norm", g.hs_norm},
            {"invertible", g.invertible},
            {"contradiction", g.contradiction},
            {"perp_norm", g.perp_norm},
            {"residual", g.residual}};
}

inline nlohmann::json to_json(const covering_entry& c) {
    nlohmann::json iv = nlohmann::json::array();
    for (auto& [a, b] : c.intervals) iv.push_back({a, b});
    return {{"track", c.track},
            {"intervals", iv},
            {"chosen_m", c.chosen_m},
            {"m_Cj", c.m_Cj},
            {"m_Aj", c.m_Aj}};
}

inline nlohmann::json to_json(const weyl_result& w) {
    return {{"count_band", w.count_band},
            {"count_fattened", w.count_fattened},
            {"count_shrunk", w.count_shrunk},
            {"predicted_band", w.predicted_band},
            {"predicted_fattened", w.predicted_fattened},
            {"ratio_persistent", w.ratio_persistent}};
}

inline nlohmann::json to_json(const kam_diagnostics& d) {
    return {{"norm_before", d.norm_before},
            {"norm_after", d.norm_after},
            {"M", d.M},
            {"c_div", d.c_div},
            {"refit_residual", d.refit_residual},
            {"reality_defect", d.reality_defect},
            {"s_out", d.s_out},
            {"r_out", d.r_out}};
}

inline nlohmann::json to_json(const kam_step_result& r) {
    nlohmann::json phi = nlohmann::json::array();
    for (const auto& [k, c] : r.phi_modes) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& [e, coeff] : c.terms()) {
            std::vector<int> ideg(e.begin(), e.end() - 1);
            terms.push_back({{"i_deg", ideg},
                             {"t_deg", e.back()},
                             {"re", coeff.real()},
                             {"im", coeff.imag()}});
        }
        phi.push_back({{"k", k}, {"numerator", terms}});
    }
    return {{"phi_modes", phi},
            {"M", r.M},
            {"d1_points", r.d1.points.size()},
            {"d1_fatten", r.d1.fatten},
            {"diagnostics", to_json(r.diagnostics)}};
}

// aggregate emitted by the `full` pipeline
struct experiment_report {
    speed_bounds_result speeds;
    std::vector<scan_row> scan_rows;
    std::map<double, double> flagged_fraction;
    bool t_star_found = false;
    double t_star = 0, h_star = 0;
    std::vector<covering_entry> coverings;
    gram_result gram;
    bool gram_ran = false;
    std::map<double, weyl_result> weyl;  // per h
    std::map<double, double> qe_stat;    // per h
    double bnf_exponent = 0;
    poly dk0_dt0;

    nlohmann::json to_json_full() const {
        nlohmann::json j;
        j["speed_bounds"] = to_json(speeds);
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : scan_rows) rows.push_back(to_json(r));
        j["scan"] = rows;
        nlohmann::json ff = nlohmann::json::object();
        for (auto& [h, f] : flagged_fraction) ff[std::to_string(h)] = f;
        j["flagged_fraction"] = ff;
        j["t_star_found"] = t_star_found;
        if (t_star_found) {
            j["t_star"] = t_star;
            j["h_star"] = h_star;
        }
        nlohmann::json cov = nlohmann::json::array();
        for (const auto& c : coverings) cov.push_back(to_json(c));
        j["coverings"] = cov;
        if (gram_ran) j["gram"] = to_json(gram);
        nlohmann::json wy = nlohmann::json::object();
        for (auto& [h, w] : weyl) wy[std::to_string(h)] = to_json(w);
        j["weyl"] = wy;
        nlohmann::json qs = nlohmann::json::object();
        for (auto& [h, v] : qe_stat) qs[std::to_string(h)] = v;
        j["qe_statistic"] = qs;
        j["bnf_exponent"] = bnf_exponent;
        return j;
    }
};

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw error("write_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace kamlab
