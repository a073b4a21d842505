/**
 * @file report.hpp
 * @brief End-to-end analysis: points -> curves -> screening -> statistics ->
 *        baselines -> hyperbolic medians -> conditioned and global clustering
 */

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "../basis_quad.hpp"
#include "../discount_core.hpp"
#include "../functional_cluster.hpp"
#include "../functional_stats.hpp"
#include "../monotone_fit.hpp"
#include "csv.hpp"
#include "curves_io.hpp"
#include "ingest.hpp"
#include "schema.hpp"

namespace discfda::pipeline {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct ReportConfig {
    FitConfig fit;
    int basis_order = 4;
    ClusteringConfig clustering;  // G is chosen per run
    int g_max = 6;
    std::optional<int> global_g;
    std::map<std::string, int> per_class_g;
    double central_fraction = 0.30;
    double fence_factor = 3.0;
    std::string group_by = "temperament";

    json to_json() const {
        json j;
        j["fit"] = {{"lambda", fit.lambda},           {"max_iters", fit.max_iters}, {"rel_tol", fit.rel_tol},
                    {"gamma_floor", fit.gamma_floor}, {"grid_points", fit.grid_points}, {"order", basis_order}};
        j["clustering"] = {{"metric", metric_name(clustering.metric)},
                           {"max_iters", clustering.max_iters},
                           {"restarts", clustering.restarts},
                           {"seed", clustering.seed},
                           {"silhouette_mode", silhouette_mode_name(clustering.silhouette_mode)},
                           {"g_max", g_max},
                           {"global_g", global_g ? json(*global_g) : json(nullptr)},
                           {"per_class_g", per_class_g}};
        j["outliers"] = {{"central_fraction", central_fraction}, {"fence_factor", fence_factor}};
        j["group_by"] = group_by;
        return j;
    }

    /// Accepts a config object or a run manifest (which embeds one under "config").
    static ReportConfig from_json(const json& in) {
        const json& j = in.contains("config") && in.contains("manifest_version") ? in.at("config") : in;
        ReportConfig c;
        try {
            if (auto f = j.find("fit"); f != j.end()) {
                c.fit.lambda = f->value("lambda", c.fit.lambda);
                c.fit.max_iters = f->value("max_iters", c.fit.max_iters);
                c.fit.rel_tol = f->value("rel_tol", c.fit.rel_tol);
                c.fit.gamma_floor = f->value("gamma_floor", c.fit.gamma_floor);
                c.fit.grid_points = f->value("grid_points", c.fit.grid_points);
                c.basis_order = f->value("order", c.basis_order);
            }
            if (auto k = j.find("clustering"); k != j.end()) {
                if (auto m = k->find("metric"); m != k->end()) {
                    auto parsed = parse_metric(m->get<std::string>());
                    if (!parsed) throw Error(ErrorCode::InvalidArgument, "unknown metric '" + m->get<std::string>() + "'");
                    c.clustering.metric = *parsed;
                }
                c.clustering.max_iters = k->value("max_iters", c.clustering.max_iters);
                c.clustering.restarts = k->value("restarts", c.clustering.restarts);
                c.clustering.seed = k->value("seed", c.clustering.seed);
                if (auto m = k->find("silhouette_mode"); m != k->end()) {
                    auto parsed = parse_silhouette_mode(m->get<std::string>());
                    if (!parsed) throw Error(ErrorCode::InvalidArgument, "unknown silhouette mode '" + m->get<std::string>() + "'");
                    c.clustering.silhouette_mode = *parsed;
                }
                c.g_max = k->value("g_max", c.g_max);
                if (auto g = k->find("global_g"); g != k->end() && !g->is_null()) c.global_g = g->get<int>();
                if (auto p = k->find("per_class_g"); p != k->end()) c.per_class_g = p->get<std::map<std::string, int>>();
            }
            if (auto o = j.find("outliers"); o != j.end()) {
                c.central_fraction = o->value("central_fraction", c.central_fraction);
                c.fence_factor = o->value("fence_factor", c.fence_factor);
            }
            c.group_by = j.value("group_by", c.group_by);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
        }
        return c;
    }
};

struct InputInfo {
    std::string path;
    std::string fnv1a64;  // of the raw input bytes
    std::size_t records = 0;
    std::size_t excluded = 0;
};

inline std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct ReportBundle {
    std::vector<CurveRecord> curves;
    std::map<std::string, std::vector<std::size_t>> groups;     // label -> curve indices
    std::map<std::string, std::vector<std::size_t>> screened;   // after outlier removal
    std::map<std::string, DepthReport> outliers;
    std::map<std::string, std::array<GridCurve, 3>> means;
    std::map<std::string, std::array<GridCurve, 3>> within;
    std::optional<std::array<GridCurve, 3>> between;
    std::map<std::string, double> group_rates;
    std::map<std::string, GridCurve> aversion;
    MedianTable medians;
    std::map<std::string, ElbowResult> class_elbows;
    std::map<std::string, ConditionedCluster> conditioned;
    std::map<std::string, SilhouetteReport> conditioned_silhouettes;
    ElbowResult global_elbow;
    ClusteringResult global;
    std::vector<std::size_t> global_members;
    std::optional<SilhouetteReport> global_silhouette;
    json manifest;
    std::map<std::string, std::string> artifacts;  // file name -> bytes
};

namespace detail {

template <class F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.code(), std::string("stage ") + name + ": " + e.detail());
    }
}

}  // namespace detail

/// Validates, builds discount points and fits one curve per submission.
inline std::vector<CurveRecord> fit_dataset(const Dataset& ds, const FitConfig& fit, int order = 4) {
    auto basis = make_basis_for_horizons(ds.grid.horizons(), order);
    std::vector<CurveRecord> out;
    out.reserve(ds.submissions.size());
    for (const auto& s : ds.submissions) {
        auto outcome = validate_submission(s, ds.grid);
        if (!outcome.accepted) {
            const auto& v = outcome.violations.front();
            throw Error(v.code, s.respondent_id + ": " + v.detail);
        }
        CurveRecord r;
        r.respondent_id = s.respondent_id;
        auto temp = primary_temperament(s.part3_tallies);
        r.temperament = temp.label;
        r.temperament_tie = temp.tie;
        r.gender = s.gender;
        r.samples = build_discount_points(outcome.amounts, UtilitySpec::identity(), ds.grid);
        try {
            auto fitted = fit_monotone_discount(r.samples, basis, fit);
            r.curve = std::move(fitted.curve);
            r.diagnostics = std::move(fitted.diagnostics);
        } catch (const Error& e) {
            throw Error(e.code(), s.respondent_id + ": " + e.detail());
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<GridCurve> grid_curves(const std::vector<CurveRecord>& curves, const std::vector<std::size_t>& idx) {
    std::vector<GridCurve> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(curves[i].grid_curve());
    return out;
}

inline std::vector<std::string> ids_of(const std::vector<CurveRecord>& curves, const std::vector<std::size_t>& idx) {
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(curves[i].respondent_id);
    return out;
}

/// Runs the full analysis. All artifacts are produced in memory; write_bundle
/// puts them on disk.
inline ReportBundle run_report(const Dataset& ds, const ReportConfig& cfg, const InputInfo& input = {}) {
    ReportBundle b;
    if (ds.submissions.size() < 4) throw Error(ErrorCode::TooFewCurves, "report needs at least 4 accepted submissions");

    b.curves = detail::stage("fit", [&] { return fit_dataset(ds, cfg.fit, cfg.basis_order); });
    for (std::size_t i = 0; i < b.curves.size(); ++i) b.groups[b.curves[i].group_key(cfg.group_by)].push_back(i);

    detail::stage("outliers", [&] {
        for (const auto& [label, idx] : b.groups) {
            if (idx.size() < 4) {
                b.screened[label] = idx;
                continue;
            }
            auto gc = grid_curves(b.curves, idx);
            auto rep = mbd_outliers(gc, cfg.central_fraction, cfg.fence_factor);
            std::vector<bool> drop(idx.size(), false);
            for (auto k : rep.outliers) drop[k] = true;
            for (std::size_t k = 0; k < idx.size(); ++k)
                if (!drop[k]) b.screened[label].push_back(idx[k]);
            b.outliers.emplace(label, std::move(rep));
        }
        return 0;
    });

    std::vector<CurveGroup> groups;
    detail::stage("group_stats", [&] {
        for (const auto& [label, idx] : b.screened) groups.push_back({label, grid_curves(b.curves, idx)});
        for (const auto& g : groups) {
            auto mean = functional_mean(g);
            b.means[g.label] = {GridCurve{mean.grid, mean.values, {}, {}}, GridCurve{mean.grid, mean.channel(1), {}, {}},
                                GridCurve{mean.grid, mean.channel(2), {}, {}}};
            b.within[g.label] = {within_variance(g, 0), within_variance(g, 1), within_variance(g, 2)};
        }
        if (groups.size() >= 2) b.between = std::array<GridCurve, 3>{between_variance(groups, 0), between_variance(groups, 1), between_variance(groups, 2)};
        return 0;
    });

    detail::stage("baselines", [&] {
        for (const auto& [label, idx] : b.screened) {
            DiscountSamples avg{ds.grid, std::vector<double>(ds.grid.size(), 0.0), {}, false};
            for (auto i : idx)
                for (std::size_t h = 0; h < ds.grid.size(); ++h) avg.values[h] += b.curves[i].samples.values[h];
            for (double& v : avg.values) v /= static_cast<double>(idx.size());
            double k = fit_exponential(avg, b.means[label][0].grid).rate;
            b.group_rates[label] = k;
            b.aversion[label] = uncertainty_aversion(b.means[label][0], k);
        }
        return 0;
    });

    detail::stage("hyperbolic", [&] {
        std::map<std::string, std::vector<AnomalyResponse>> by_group;
        std::map<std::string, const RespondentSubmission*> by_id;
        for (const auto& s : ds.submissions) by_id[s.respondent_id] = &s;
        for (const auto& [label, idx] : b.groups)
            for (auto i : idx) {
                const auto& answers = by_id.at(b.curves[i].respondent_id)->part2_answers;
                by_group[label].insert(by_group[label].end(), answers.begin(), answers.end());
            }
        for (auto it = by_group.begin(); it != by_group.end();) it = it->second.empty() ? by_group.erase(it) : std::next(it);
        b.medians = group_median_factors(by_group);
        return 0;
    });

    std::vector<std::size_t> all_screened;
    for (const auto& [label, idx] : b.screened) all_screened.insert(all_screened.end(), idx.begin(), idx.end());
    std::sort(all_screened.begin(), all_screened.end());
    auto all_curves = grid_curves(b.curves, all_screened);
    std::vector<std::string> all_labels;
    for (auto i : all_screened) all_labels.push_back(b.curves[i].group_key(cfg.group_by));

    std::map<std::string, int> class_g;
    detail::stage("conditioned_elbow", [&] {
        for (const auto& [label, idx] : b.screened) {
            auto gc = grid_curves(b.curves, idx);
            int gmax = std::min<int>(cfg.g_max, static_cast<int>(gc.size()));
            auto e = elbow_scan(gc, gmax, cfg.clustering);
            class_g[label] = e.suggested_g;
            b.class_elbows.emplace(label, std::move(e));
        }
        for (const auto& [label, g] : cfg.per_class_g) class_g[label] = g;
        return 0;
    });
    detail::stage("conditioned_kmeans", [&] {
        b.conditioned = conditioned_kmeans(all_curves, all_labels, class_g, cfg.clustering);
        for (const auto& [label, cc] : b.conditioned) {
            if (cc.result.centroids.size() < 2) continue;
            std::vector<GridCurve> sub;
            for (auto m : cc.members) sub.push_back(all_curves[m]);
            b.conditioned_silhouettes.emplace(label, silhouette(sub, cc.result, cfg.clustering.metric, cfg.clustering.silhouette_mode));
        }
        return 0;
    });
    detail::stage("global_elbow", [&] {
        int gmax = std::min<int>(cfg.g_max, static_cast<int>(all_curves.size()));
        b.global_elbow = elbow_scan(all_curves, gmax, cfg.clustering);
        return 0;
    });
    detail::stage("global_kmeans", [&] {
        ClusteringConfig c = cfg.clustering;
        c.G = cfg.global_g.value_or(b.global_elbow.suggested_g);
        b.global = kmeans(all_curves, c);
        b.global_members = all_screened;
        if (c.G >= 2) b.global_silhouette = silhouette(all_curves, b.global, c.metric, c.silhouette_mode);
        return 0;
    });

    // artifacts
    auto& art = b.artifacts;
    {
        CsvWriter pts({"respondent_id", "group", "t", "value", "amount"});
        CsvWriter curves({"t", "label", "value"});
        CsvWriter diag({"respondent_id", "group", "rmse", "max_abs_residual", "iterations", "converged", "near_constant", "exp_rate"});
        for (const auto& r : b.curves) {
            for (std::size_t h = 0; h < r.samples.values.size(); ++h)
                pts.row(r.respondent_id, r.group_key(cfg.group_by), r.samples.grid[h], r.samples.values[h], r.samples.source_amounts[h]);
            append_long(curves, r.respondent_id, r.grid_curve());
            double k = fit_exponential(r.samples, r.curve.grid).rate;
            diag.row(r.respondent_id, r.group_key(cfg.group_by), r.diagnostics.rmse, r.diagnostics.max_abs_residual, r.diagnostics.iterations,
                     r.diagnostics.converged ? "true" : "false", r.curve.near_constant ? "true" : "false", k);
        }
        art["discount_points.csv"] = pts.str();
        art["fitted_curves.csv"] = curves.str();
        art["fit_diagnostics.csv"] = diag.str();
        art["fitted_curves.json"] = curves_to_json(b.curves).dump(1) + "\n";
    }
    for (int r = 0; r < 3; ++r) {
        std::string sfx = "_d" + std::to_string(r) + ".csv";
        CsvWriter m({"t", "label", "value"}), w({"t", "label", "value"});
        for (const auto& [label, arr] : b.means) append_long(m, label, arr[static_cast<std::size_t>(r)]);
        for (const auto& [label, arr] : b.within) append_long(w, label, arr[static_cast<std::size_t>(r)]);
        art["group_means" + sfx] = m.str();
        art["within_variance" + sfx] = w.str();
    }
    if (b.between) {
        CsvWriter w({"t", "label", "value"});
        for (int r = 0; r < 3; ++r) append_long(w, "d" + std::to_string(r), (*b.between)[static_cast<std::size_t>(r)]);
        art["between_variance.csv"] = w.str();
    }
    {
        CsvWriter d({"label_a", "label_b", "order", "distance"});
        for (const auto& [la, ma] : b.means)
            for (const auto& [lb, mb] : b.means) {
                if (!(la < lb)) continue;
                for (int r = 0; r < 3; ++r)
                    d.row(la, lb, r, std::sqrt(discfda::detail::mean_sq_diff(ma[static_cast<std::size_t>(r)], mb[static_cast<std::size_t>(r)], 0)));
            }
        art["group_mean_distances.csv"] = d.str();
    }
    {
        CsvWriter rates({"label", "rate"});
        for (const auto& [label, k] : b.group_rates) rates.row(label, k);
        art["exponential_rates.csv"] = rates.str();
        CsvWriter av({"t", "label", "value"});
        for (const auto& [label, c] : b.aversion) append_long(av, label, c);
        art["uncertainty_aversion.csv"] = av.str();
    }
    {
        CsvWriter h({"label", "scenario", "median"});
        for (const auto& [label, row] : b.medians)
            for (const auto& [sc, m] : row) h.row(label, scenario_name(sc), m);
        art["hyperbolic_medians.csv"] = h.str();
    }
    {
        json o = json::object();
        for (const auto& [label, rep] : b.outliers) o[label] = depth_to_json(rep, ids_of(b.curves, b.groups.at(label)));
        json skipped = json::array();
        for (const auto& [label, idx] : b.groups)
            if (!b.outliers.count(label)) skipped.push_back(label);
        art["outliers.json"] = json{{"groups", o}, {"skipped_too_small", skipped}}.dump(1) + "\n";
    }
    {
        CsvWriter e({"label", "g", "wcss"});
        json ej = json::object();
        for (const auto& [label, el] : b.class_elbows) {
            for (std::size_t g = 0; g < el.wcss.size(); ++g) e.row(label, g + 1, el.wcss[g]);
            ej[label] = elbow_to_json(el);
        }
        for (std::size_t g = 0; g < b.global_elbow.wcss.size(); ++g) e.row(std::string("global"), g + 1, b.global_elbow.wcss[g]);
        ej["global"] = elbow_to_json(b.global_elbow);
        art["elbow.csv"] = e.str();
        art["elbow.json"] = ej.dump(1) + "\n";
    }
    {
        json cj = json::object();
        CsvWriter cc({"t", "cluster", "value"});
        for (const auto& [label, res] : b.conditioned) {
            std::vector<std::string> ids;
            for (auto m : res.members) ids.push_back(b.curves[all_screened[m]].respondent_id);
            json j = clustering_to_json(res.result, ids);
            j["seed_used"] = res.result.seed_used;
            if (auto it = b.conditioned_silhouettes.find(label); it != b.conditioned_silhouettes.end())
                j["silhouette"] = silhouette_to_json(it->second, ids);
            cj[label] = j;
            for (std::size_t g = 0; g < res.result.centroids.size(); ++g) append_long(cc, label + "/" + std::to_string(g), res.result.centroids[g]);
        }
        art["clustering_conditioned.json"] = cj.dump(1) + "\n";
        art["centroids_conditioned.csv"] = cc.str();

        auto ids = ids_of(b.curves, all_screened);
        json gj = clustering_to_json(b.global, ids);
        if (b.global_silhouette) gj["silhouette"] = silhouette_to_json(*b.global_silhouette, ids);
        art["clustering_global.json"] = gj.dump(1) + "\n";
        CsvWriter gc({"t", "cluster", "value"});
        for (std::size_t g = 0; g < b.global.centroids.size(); ++g) append_long(gc, std::to_string(g), b.global.centroids[g]);
        art["centroids_global.csv"] = gc.str();
    }

    json manifest;
    manifest["manifest_version"] = 1;
    manifest["tool"] = "discfda";
    manifest["version"] = kToolVersion;
    manifest["schema_version"] = ds.schema_version;
    manifest["input"] = {{"path", input.path}, {"fnv1a64", input.fnv1a64}, {"records", input.records}, {"excluded", input.excluded}};
    manifest["accepted"] = ds.submissions.size();
    manifest["grid"] = ds.grid.horizons();
    manifest["seed"] = cfg.clustering.seed;
    manifest["config"] = cfg.to_json();
    json hashes = json::object();
    for (const auto& [name, bytes] : art) hashes[name] = fnv1a64_hex(bytes);
    manifest["artifacts"] = hashes;
    b.manifest = manifest;
    art["manifest.json"] = manifest.dump(1) + "\n";
    return b;
}

inline void write_bundle(const ReportBundle& b, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
    for (const auto& [name, bytes] : b.artifacts) write_file((std::filesystem::path(dir) / name).string(), bytes);
}

}  // namespace discfda::pipeline
