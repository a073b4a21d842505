/**
 * @file curves_io.hpp
 * @brief JSON/CSV forms of fitted curves, clusterings and depth reports
 */

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "../functional_cluster.hpp"
#include "../functional_stats.hpp"
#include "../monotone_fit.hpp"
#include "csv.hpp"
#include "schema.hpp"

namespace discfda::pipeline {

/// One respondent's fitted discount curve plus the metadata used for grouping.
struct CurveRecord {
    std::string respondent_id;
    std::string temperament;
    bool temperament_tie = false;
    std::string gender;
    DiscountSamples samples;
    FittedCurve curve;
    FitDiagnostics diagnostics;

    GridCurve grid_curve() const { return GridCurve::from_fitted(curve); }

    /// Grouping key: "temperament", "gender" or "none".
    std::string group_key(const std::string& by) const {
        if (by == "temperament") return temperament;
        if (by == "gender") return gender.empty() ? "unknown" : gender;
        if (by == "none") return "all";
        throw Error(ErrorCode::InvalidArgument, "unknown group-by '" + by + "'");
    }
};

inline json curve_to_json(const CurveRecord& r) {
    json j;
    j["respondent_id"] = r.respondent_id;
    j["temperament"] = r.temperament;
    j["temperament_tie"] = r.temperament_tie;
    j["gender"] = r.gender;
    j["samples"] = {{"t", r.samples.grid.horizons()}, {"values", r.samples.values}, {"degenerate", r.samples.degenerate}};
    j["basis"] = {{"order", r.curve.basis.order}, {"knots", r.curve.basis.knots}};
    j["coeffs"] = r.curve.coeffs;
    j["b0"] = r.curve.b0;
    j["gamma"] = r.curve.gamma;
    j["near_constant"] = r.curve.near_constant;
    j["grid"] = {{"t_max", r.curve.grid.t_max()}, {"points", r.curve.grid.size()}};
    j["values"] = r.curve.values;
    j["deriv1"] = r.curve.deriv1;
    j["deriv2"] = r.curve.deriv2;
    const auto& d = r.diagnostics;
    j["diagnostics"] = {{"residuals", d.residuals}, {"rmse", d.rmse},           {"max_abs_residual", d.max_abs_residual},
                        {"iterations", d.iterations}, {"converged", d.converged}, {"objective", d.objective},
                        {"degenerate_flat", d.degenerate_flat}};
    return j;
}

/// Rebuilds the curve from its basis, coefficients and gamma; cached values
/// in the file are not trusted.
inline CurveRecord curve_from_json(const json& j) {
    try {
        CurveRecord r;
        r.respondent_id = j.at("respondent_id").get<std::string>();
        r.temperament = j.value("temperament", std::string(kUnassigned));
        r.temperament_tie = j.value("temperament_tie", false);
        r.gender = j.value("gender", std::string());
        r.samples.grid = TimeGrid(j.at("samples").at("t").get<std::vector<double>>());
        r.samples.values = j.at("samples").at("values").get<std::vector<double>>();
        r.samples.degenerate = j.at("samples").value("degenerate", false);
        BasisSpec basis;
        basis.order = j.at("basis").at("order").get<int>();
        basis.knots = j.at("basis").at("knots").get<std::vector<double>>();
        basis.size = static_cast<int>(basis.knots.size()) - basis.order;
        r.curve = make_curve(basis, j.at("coeffs").get<std::vector<double>>(), j.at("gamma").get<double>(),
                             j.at("grid").at("points").get<std::size_t>());
        r.curve.near_constant = j.value("near_constant", false);
        if (auto it = j.find("diagnostics"); it != j.end()) {
            auto& d = r.diagnostics;
            d.residuals = it->value("residuals", std::vector<double>{});
            d.rmse = it->value("rmse", 0.0);
            d.max_abs_residual = it->value("max_abs_residual", 0.0);
            d.iterations = it->value("iterations", 0);
            d.converged = it->value("converged", false);
            d.objective = it->value("objective", 0.0);
            d.degenerate_flat = it->value("degenerate_flat", false);
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("curve record: ") + e.what());
    }
}

inline json curves_to_json(std::span<const CurveRecord> records) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["curves"] = json::array();
    for (const auto& r : records) j["curves"].push_back(curve_to_json(r));
    return j;
}

inline std::vector<CurveRecord> load_curves(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("curves")) throw Error(ErrorCode::ParseError, path + ": expected an object with 'curves'");
    if (j.value("schema_version", std::string()) != kSchemaVersion)
        throw Error(ErrorCode::SchemaVersionUnsupported, path + ": schema_version '" + j.value("schema_version", std::string()) + "'");
    std::vector<CurveRecord> out;
    for (const auto& c : j["curves"]) out.push_back(curve_from_json(c));
    return out;
}

/// Long-format CSV: t,<label column>,value.
inline void append_long(CsvWriter& w, const std::string& label, const GridCurve& c, int channel = 0) {
    const auto& v = c.channel(channel);
    for (std::size_t i = 0; i < v.size(); ++i) w.row(c.grid.nodes()[i], label, v[i]);
}

inline json clustering_to_json(const ClusteringResult& r, std::span<const std::string> ids) {
    json j;
    j["G"] = r.centroids.size();
    j["wcss"] = r.wcss;
    j["wcss_trace"] = r.wcss_trace;
    j["iterations"] = r.iterations;
    j["seed_used"] = r.seed_used;
    j["restart_used"] = r.restart_used;
    json assign = json::array();
    for (std::size_t i = 0; i < r.assignments.size(); ++i) assign.push_back({{"id", ids[i]}, {"cluster", r.assignments[i]}});
    j["assignments"] = assign;
    json sizes = json::array();
    for (std::size_t g = 0; g < r.centroids.size(); ++g)
        sizes.push_back(std::count(r.assignments.begin(), r.assignments.end(), static_cast<int>(g)));
    j["cluster_sizes"] = sizes;
    return j;
}

inline json silhouette_to_json(const SilhouetteReport& s, std::span<const std::string> ids) {
    json j;
    j["mode"] = silhouette_mode_name(s.mode);
    j["average"] = s.average;
    json per = json::array();
    for (std::size_t i = 0; i < s.s.size(); ++i) per.push_back({{"id", ids[i]}, {"s", s.s[i]}, {"a", s.a[i]}, {"b", s.b[i]}});
    j["per_curve"] = per;
    return j;
}

inline json depth_to_json(const DepthReport& d, std::span<const std::string> ids) {
    json j;
    j["central_fraction"] = d.central_fraction;
    j["fence_factor"] = d.fence_factor;
    json depths = json::array();
    for (std::size_t i = 0; i < d.depths.size(); ++i) depths.push_back({{"id", ids[i]}, {"mbd", d.depths[i]}});
    j["depths"] = depths;
    json central = json::array(), outliers = json::array();
    for (auto k : d.central_set) central.push_back(ids[k]);
    for (auto k : d.outliers) outliers.push_back(ids[k]);
    j["central_set"] = central;
    j["outliers"] = outliers;
    return j;
}

inline json elbow_to_json(const ElbowResult& e) { return {{"wcss", e.wcss}, {"suggested_g", e.suggested_g}}; }

}  // namespace discfda::pipeline
