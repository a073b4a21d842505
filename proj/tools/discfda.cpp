// Command-line front end: validate, fit, stats, hyperbolic, outliers,
// cluster, elbow, report, serve.
//
// Exit codes: 0 success, 1 data rejected, 2 internal error.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <iostream>

#include "discfda/pipeline/report.hpp"
#include "discfda/pipeline/serve.hpp"

using namespace discfda;
using namespace discfda::pipeline;

namespace {

bool is_data_rejection(ErrorCode c) {
    switch (c) {
        case ErrorCode::ParseError:
        case ErrorCode::SchemaVersionUnsupported:
        case ErrorCode::DuplicateRespondent:
        case ErrorCode::MissingAnswer:
        case ErrorCode::NonPositiveAmount:
        case ErrorCode::DiscountAboveOne:
        case ErrorCode::TimerInvalidated:
            return true;
        default:
            return false;
    }
}

void emit(const std::string& out, const std::string& bytes) {
    if (out.empty() || out == "-")
        std::cout << bytes;
    else
        write_file(out, bytes);
}

std::map<std::string, std::vector<std::size_t>> group_indices(const std::vector<CurveRecord>& curves, const std::string& by) {
    std::map<std::string, std::vector<std::size_t>> g;
    for (std::size_t i = 0; i < curves.size(); ++i) g[curves[i].group_key(by)].push_back(i);
    return g;
}

Metric metric_or_throw(const std::string& s) {
    auto m = parse_metric(s);
    if (!m) throw Error(ErrorCode::InvalidArgument, "unknown metric '" + s + "'");
    return *m;
}

SilhouetteMode mode_or_throw(const std::string& s) {
    auto m = parse_silhouette_mode(s);
    if (!m) throw Error(ErrorCode::InvalidArgument, "unknown silhouette mode '" + s + "'");
    return *m;
}

IngestionServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Functional analysis of elicited discount curves"};
    app.require_subcommand(1);

    // validate
    std::string v_in;
    auto* validate = app.add_subcommand("validate", "Check a dataset and list excluded records");
    validate->add_option("in", v_in, "JSON Lines or CSV dataset")->required();

    // fit
    std::string f_in, f_out = "fitted_curves.json";
    FitConfig fit_cfg;
    int f_order = 4;
    auto* fit = app.add_subcommand("fit", "Fit monotone discount curves");
    fit->add_option("in", f_in, "dataset")->required();
    fit->add_option("--lambda", fit_cfg.lambda, "roughness penalty weight");
    fit->add_option("--grid-points", fit_cfg.grid_points, "quadrature nodes on [0, T]");
    fit->add_option("--max-iters", fit_cfg.max_iters);
    fit->add_option("--order", f_order, "B-spline order");
    fit->add_option("--out", f_out, "curves JSON ('-' for stdout)");

    // stats
    std::string s_curves, s_group_by = "temperament", s_out = ".";
    auto* stats = app.add_subcommand("stats", "Group means, variances and distances for orders 0-2");
    stats->add_option("--curves", s_curves)->required();
    stats->add_option("--group-by", s_group_by)->check(CLI::IsMember({"temperament", "gender", "none"}));
    stats->add_option("--out", s_out, "output directory");

    // hyperbolic
    std::string h_in, h_out = "-", h_group_by = "temperament";
    auto* hyper = app.add_subcommand("hyperbolic", "Median hyperbolic factors per group and scenario");
    hyper->add_option("in", h_in)->required();
    hyper->add_option("--group-by", h_group_by)->check(CLI::IsMember({"temperament", "gender", "none"}));
    hyper->add_option("--out", h_out);

    // outliers
    std::string o_curves, o_group_by = "none", o_out = "-";
    double o_fraction = 0.30, o_fence = 3.0;
    auto* outliers = app.add_subcommand("outliers", "Band-depth ranking and outlier flags");
    outliers->add_option("--curves", o_curves)->required();
    outliers->add_option("--central-fraction", o_fraction);
    outliers->add_option("--fence-factor", o_fence, "envelope inflation; 0 = strict envelope");
    outliers->add_option("--group-by", o_group_by)->check(CLI::IsMember({"temperament", "gender", "none"}));
    outliers->add_option("--out", o_out);

    // cluster
    std::string c_curves, c_metric = "l2", c_mode = "global", c_sil = "standard", c_out = "-", c_group_by = "temperament";
    int c_g = 2, c_restarts = 20, c_iters = 100;
    std::uint64_t c_seed = 0;
    auto* cluster = app.add_subcommand("cluster", "Functional k-means");
    cluster->add_option("--curves", c_curves)->required();
    cluster->add_option("--g", c_g, "clusters (per class in conditioned mode)")->required();
    cluster->add_option("--metric", c_metric)->check(CLI::IsMember({"l2", "d1", "d2"}));
    cluster->add_option("--mode", c_mode)->check(CLI::IsMember({"global", "conditioned"}));
    cluster->add_option("--silhouette", c_sil)->check(CLI::IsMember({"standard", "literal"}));
    cluster->add_option("--seed", c_seed);
    cluster->add_option("--restarts", c_restarts);
    cluster->add_option("--max-iters", c_iters);
    cluster->add_option("--group-by", c_group_by)->check(CLI::IsMember({"temperament", "gender", "none"}));
    cluster->add_option("--out", c_out);

    // elbow
    std::string e_curves, e_metric = "l2", e_out = "-";
    int e_gmax = 8, e_restarts = 20;
    std::uint64_t e_seed = 0;
    auto* elbow = app.add_subcommand("elbow", "WCSS for G = 1..gmax and the suggested G");
    elbow->add_option("--curves", e_curves)->required();
    elbow->add_option("--gmax", e_gmax);
    elbow->add_option("--metric", e_metric)->check(CLI::IsMember({"l2", "d1", "d2"}));
    elbow->add_option("--seed", e_seed);
    elbow->add_option("--restarts", e_restarts);
    elbow->add_option("--out", e_out);

    // report
    std::string r_in, r_config, r_out = "report";
    auto* report = app.add_subcommand("report", "Run the full analysis and write all artifacts");
    report->add_option("in", r_in)->required();
    report->add_option("--config", r_config, "config JSON or a previous manifest.json");
    report->add_option("--out-dir", r_out);

    // serve
    std::string v_addr = "127.0.0.1:8080", v_store = "submissions.jsonl";
    auto* serve = app.add_subcommand("serve", "HTTP ingestion endpoint");
    serve->add_option("--addr", v_addr, "host:port");
    serve->add_option("--store", v_store, "JSON Lines store");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*validate) {
            auto rep = ingest(v_in);
            json j;
            j["records"] = rep.records;
            j["accepted"] = rep.accepted();
            json ex = json::array();
            for (const auto& e : rep.excluded) {
                json reasons = json::array();
                for (const auto& v : e.violations) reasons.push_back({{"code", code_name(v.code)}, {"detail", v.detail}});
                ex.push_back({{"respondent_id", e.respondent_id}, {"line", e.line}, {"reasons", reasons}});
            }
            j["excluded"] = ex;
            json q = json::array();
            for (const auto& l : rep.quarantined) q.push_back({{"line", l.line}, {"reason", l.reason}});
            j["quarantined"] = q;
            std::cout << j.dump(1) << "\n";
            return rep.excluded.empty() && rep.quarantined.empty() ? 0 : 1;
        }
        if (*fit) {
            fit_cfg.check();
            auto rep = ingest(f_in);
            for (const auto& e : rep.excluded)
                std::cerr << "excluded " << e.respondent_id << ": " << code_name(e.violations.front().code) << "\n";
            auto curves = fit_dataset(rep.dataset, fit_cfg, f_order);
            emit(f_out, curves_to_json(curves).dump(1) + "\n");
            return 0;
        }
        if (*stats) {
            auto curves = load_curves(s_curves);
            std::vector<CurveGroup> groups;
            for (const auto& [label, idx] : group_indices(curves, s_group_by)) groups.push_back({label, grid_curves(curves, idx)});
            std::filesystem::create_directories(s_out);
            for (int r = 0; r < 3; ++r) {
                CsvWriter m({"t", "label", "value"}), w({"t", "label", "value"});
                for (const auto& g : groups) {
                    auto mean = functional_mean(g);
                    append_long(m, g.label, mean, r);
                    append_long(w, g.label, within_variance(g, r));
                }
                std::string sfx = "_d" + std::to_string(r) + ".csv";
                write_file(s_out + "/group_means" + sfx, m.str());
                write_file(s_out + "/within_variance" + sfx, w.str());
            }
            if (groups.size() >= 2) {
                CsvWriter b({"t", "label", "value"});
                for (int r = 0; r < 3; ++r) append_long(b, "d" + std::to_string(r), between_variance(groups, r));
                write_file(s_out + "/between_variance.csv", b.str());
                CsvWriter d({"label_a", "label_b", "order", "distance"});
                for (std::size_t a = 0; a < groups.size(); ++a)
                    for (std::size_t c = a + 1; c < groups.size(); ++c)
                        for (int r = 0; r < 3; ++r) d.row(groups[a].label, groups[c].label, r, group_mean_distance(groups[a], groups[c], r));
                write_file(s_out + "/group_mean_distances.csv", d.str());
            }
            return 0;
        }
        if (*hyper) {
            auto rep = ingest(h_in);
            std::map<std::string, std::vector<AnomalyResponse>> by_group;
            for (const auto& s : rep.dataset.submissions) {
                if (s.part2_answers.empty()) continue;
                std::string label = h_group_by == "temperament" ? primary_temperament(s.part3_tallies).label
                                    : h_group_by == "gender"    ? (s.gender.empty() ? "unknown" : s.gender)
                                                                : "all";
                auto& v = by_group[label];
                v.insert(v.end(), s.part2_answers.begin(), s.part2_answers.end());
            }
            CsvWriter h({"label", "scenario", "median"});
            for (const auto& [label, row] : group_median_factors(by_group))
                for (const auto& [sc, m] : row) h.row(label, scenario_name(sc), m);
            emit(h_out, h.str());
            return 0;
        }
        if (*outliers) {
            auto curves = load_curves(o_curves);
            json out = json::object();
            for (const auto& [label, idx] : group_indices(curves, o_group_by)) {
                auto rep = mbd_outliers(grid_curves(curves, idx), o_fraction, o_fence);
                out[label] = depth_to_json(rep, ids_of(curves, idx));
            }
            emit(o_out, out.dump(1) + "\n");
            return 0;
        }
        if (*cluster) {
            auto curves = load_curves(c_curves);
            ClusteringConfig cfg;
            cfg.G = c_g;
            cfg.metric = metric_or_throw(c_metric);
            cfg.silhouette_mode = mode_or_throw(c_sil);
            cfg.seed = c_seed;
            cfg.restarts = c_restarts;
            cfg.max_iters = c_iters;
            std::vector<std::size_t> all(curves.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            auto gc = grid_curves(curves, all);
            auto ids = ids_of(curves, all);
            json out;
            if (c_mode == "global") {
                auto res = kmeans(gc, cfg);
                out = clustering_to_json(res, ids);
                if (c_g >= 2) out["silhouette"] = silhouette_to_json(silhouette(gc, res, cfg.metric, cfg.silhouette_mode), ids);
            } else {
                std::vector<std::string> labels;
                std::map<std::string, int> per_class;
                for (const auto& r : curves) {
                    labels.push_back(r.group_key(c_group_by));
                    per_class[labels.back()] = c_g;
                }
                out = json::object();
                for (const auto& [label, cc] : conditioned_kmeans(gc, labels, per_class, cfg)) {
                    std::vector<std::string> sub_ids;
                    std::vector<GridCurve> sub;
                    for (auto m : cc.members) {
                        sub_ids.push_back(ids[m]);
                        sub.push_back(gc[m]);
                    }
                    json j = clustering_to_json(cc.result, sub_ids);
                    if (c_g >= 2) j["silhouette"] = silhouette_to_json(silhouette(sub, cc.result, cfg.metric, cfg.silhouette_mode), sub_ids);
                    out[label] = j;
                }
            }
            emit(c_out, out.dump(1) + "\n");
            return 0;
        }
        if (*elbow) {
            auto curves = load_curves(e_curves);
            std::vector<std::size_t> all(curves.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            ClusteringConfig cfg;
            cfg.metric = metric_or_throw(e_metric);
            cfg.seed = e_seed;
            cfg.restarts = e_restarts;
            auto e = elbow_scan(grid_curves(curves, all), std::min<int>(e_gmax, static_cast<int>(curves.size())), cfg);
            emit(e_out, elbow_to_json(e).dump(1) + "\n");
            return 0;
        }
        if (*report) {
            ReportConfig cfg;
            if (!r_config.empty()) {
                try {
                    cfg = ReportConfig::from_json(json::parse(read_file(r_config)));
                } catch (const json::parse_error& e) {
                    throw Error(ErrorCode::ParseError, r_config + ": " + e.what());
                }
            }
            std::string raw = read_file(r_in);
            auto rep = looks_like_csv(r_in) ? ingest_csv(raw) : ingest_jsonl(raw);
            InputInfo info{std::filesystem::path(r_in).filename().string(), fnv1a64_hex(raw), rep.records, rep.excluded.size()};
            auto bundle = run_report(rep.dataset, cfg, info);
            write_bundle(bundle, r_out);
            std::cerr << "accepted " << rep.accepted() << " of " << rep.records << "; wrote " << bundle.artifacts.size() << " artifacts to "
                      << r_out << "\n";
            return 0;
        }
        if (*serve) {
            auto [host, port] = parse_address(v_addr);
            IngestionServer server(v_store);
            int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, [](int) {
                if (g_server) g_server->stop();
            });
            std::signal(SIGTERM, [](int) {
                if (g_server) g_server->stop();
            });
            std::cerr << "listening on " << host << ":" << bound << ", store " << v_store << "\n";
            server.listen();
            g_server = nullptr;
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_data_rejection(e.code()) ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
