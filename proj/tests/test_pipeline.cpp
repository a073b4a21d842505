#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "discfda/pipeline/report.hpp"
#include "support.hpp"

using namespace discfda;
using namespace discfda::pipeline;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidArgument;
}

std::string error_text(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("discfda_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RespondentSubmission simple(const std::string& id, double rate = 0.02) {
    testing_support::PopulationSpec spec;
    spec.respondents = 1;
    spec.rates = {rate, rate, rate, rate};
    auto s = testing_support::synthetic_population(spec).front();
    s.respondent_id = id;
    return s;
}

ReportConfig fast_config() {
    ReportConfig c;
    c.clustering.restarts = 5;
    c.g_max = 4;
    return c;
}

}  // namespace

TEST(Schema, RoundTrip) {
    for (const auto& s : testing_support::synthetic_population({.respondents = 8})) {
        auto back = submission_from_json(json::parse(submission_to_json(s).dump()));
        EXPECT_EQ(back, s);
    }
}

TEST(Schema, ErrorsNameTheField) {
    auto j = submission_to_json(simple("a"));
    j["part1"][3]["amount"] = json::array();
    auto msg = error_text([&] { submission_from_json(j); });
    EXPECT_NE(msg.find("part1[3].amount"), std::string::npos) << msg;

    auto k = submission_to_json(simple("a"));
    k.erase("respondent_id");
    EXPECT_EQ(code_of([&] { submission_from_json(k); }), ErrorCode::ParseError);

    auto v = submission_to_json(simple("a"));
    v["schema_version"] = "2.0";
    EXPECT_EQ(code_of([&] { submission_from_json(v); }), ErrorCode::SchemaVersionUnsupported);
}

TEST(Schema, AmountsAcceptDecimalStringsAndNumbers) {
    auto j = submission_to_json(simple("a"));
    j["part1"][1]["amount"] = "1000.10";
    j["part1"][2]["amount"] = 1005;
    auto s = submission_from_json(j);
    EXPECT_EQ(s.part1_answers[1].amount, Decimal::parse("1000.1"));
    EXPECT_EQ(s.part1_answers[2].amount, Decimal::from_integer(1005));
}

TEST(Temperament, ArgmaxWithFlaggedTies) {
    auto t = primary_temperament({{"Artisan", 3}, {"Guardian", 9}, {"Idealist", 1}, {"Rational", 2}});
    EXPECT_EQ(t.label, "Guardian");
    EXPECT_FALSE(t.tie);
    auto tie = primary_temperament({{"Rational", 5}, {"Idealist", 5}, {"Artisan", 1}});
    EXPECT_EQ(tie.label, "Idealist");
    EXPECT_TRUE(tie.tie);
    EXPECT_EQ(primary_temperament({}).label, "Unassigned");
}

TEST(Csv, FormattingRules) {
    CsvWriter w({"name", "value"});
    w.row(std::string("a,b"), 0.1);
    w.row("say \"hi\"", 1.0 / 3.0);
    EXPECT_EQ(w.str(), "name,value\n\"a,b\",0.10000000000000001\n\"say \"\"hi\"\"\",0.33333333333333331\n");
    EXPECT_EQ(split_csv_line("\"a,b\",\"x\"\"y\",3"), (std::vector<std::string>{"a,b", "x\"y", "3"}));
    EXPECT_EQ(std::stod(fmt17(0.1)), 0.1);
}

TEST(Ingest, EmptyFile) {
    auto rep = ingest_jsonl("");
    EXPECT_EQ(rep.records, 0u);
    EXPECT_EQ(rep.accepted(), 0u);
    EXPECT_TRUE(rep.excluded.empty());
}

TEST(Ingest, ExcludesDiscountAboveOne) {
    auto good = simple("good");
    auto bad = simple("bad");
    bad.part1_answers[1].amount = Decimal::parse("900");  // below x(0) = 1000
    auto rep = ingest_jsonl(testing_support::population_jsonl({good, bad}));
    EXPECT_EQ(rep.accepted(), 1u);
    ASSERT_EQ(rep.excluded.size(), 1u);
    EXPECT_EQ(rep.excluded[0].respondent_id, "bad");
    EXPECT_EQ(rep.excluded[0].line, 2u);
    EXPECT_EQ(rep.excluded[0].violations[0].code, ErrorCode::DiscountAboveOne);
}

TEST(Ingest, DuplicateIdNamed) {
    auto text = testing_support::population_jsonl({simple("dup"), simple("dup")});
    EXPECT_EQ(code_of([&] { ingest_jsonl(text); }), ErrorCode::DuplicateRespondent);
    EXPECT_NE(error_text([&] { ingest_jsonl(text); }).find("dup"), std::string::npos);
}

TEST(Ingest, TornFinalLineQuarantined) {
    auto text = testing_support::population_jsonl({simple("a"), simple("b")});
    auto torn = text + submission_to_json(simple("c")).dump().substr(0, 40);
    auto rep = ingest_jsonl(torn);
    EXPECT_EQ(rep.accepted(), 2u);
    ASSERT_EQ(rep.quarantined.size(), 1u);
    EXPECT_EQ(rep.quarantined[0].line, 3u);
    // the same damage mid-file is a hard error with its line number
    auto mid = submission_to_json(simple("c")).dump().substr(0, 40) + "\n" + text;
    EXPECT_EQ(code_of([&] { ingest_jsonl(mid); }), ErrorCode::ParseError);
    EXPECT_NE(error_text([&] { ingest_jsonl(mid); }).find("line 1"), std::string::npos);
}

TEST(Ingest, RoundTripThroughJsonLines) {
    auto first = ingest_jsonl(testing_support::population_jsonl(testing_support::synthetic_population({.respondents = 12})));
    auto second = ingest_jsonl(dataset_to_jsonl(first.dataset));
    EXPECT_EQ(first.dataset, second.dataset);
}

TEST(Ingest, CsvLayout) {
    std::string csv =
        "id,gender,age,amount_0,amount_2,amount_4\n"
        "p1,F,30,100,110,125\n"
        "p2,M,41,100,90,120\n"
        "p3,M,,100,,120\n";
    auto rep = ingest_csv(csv);
    EXPECT_EQ(rep.records, 3u);
    ASSERT_EQ(rep.accepted(), 1u);
    EXPECT_EQ(rep.dataset.grid.horizons(), (std::vector<double>{0, 2, 4}));
    EXPECT_EQ(rep.dataset.submissions[0].age, 30);
    ASSERT_EQ(rep.excluded.size(), 2u);
    EXPECT_EQ(rep.excluded[0].violations[0].code, ErrorCode::DiscountAboveOne);
    EXPECT_EQ(rep.excluded[1].violations[0].code, ErrorCode::MissingAnswer);
    EXPECT_EQ(code_of([] { ingest_csv("name,x\n"); }), ErrorCode::ParseError);
}

TEST(Curves, JsonRoundTripRebuildsIdenticalCurves) {
    Dataset ds;
    ds.submissions = testing_support::synthetic_population({.respondents = 4});
    auto curves = fit_dataset(ds, FitConfig{});
    auto dir = scratch("curves");
    write_file((dir / "c.json").string(), curves_to_json(curves).dump());
    auto back = load_curves((dir / "c.json").string());
    ASSERT_EQ(back.size(), curves.size());
    for (std::size_t i = 0; i < curves.size(); ++i) {
        EXPECT_EQ(back[i].respondent_id, curves[i].respondent_id);
        EXPECT_EQ(back[i].curve.values, curves[i].curve.values);
        EXPECT_EQ(back[i].curve.deriv2, curves[i].curve.deriv2);
    }
}

TEST(Report, ConfigRoundTripAndManifestForm) {
    auto c = fast_config();
    c.global_g = 3;
    c.per_class_g = {{"Artisan", 2}};
    c.clustering.metric = Metric::Deriv1;
    auto back = ReportConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    json manifest{{"manifest_version", 1}, {"config", c.to_json()}};
    EXPECT_EQ(ReportConfig::from_json(manifest).to_json(), c.to_json());
    EXPECT_EQ(code_of([] { ReportConfig::from_json(json{{"clustering", {{"metric", "l7"}}}}); }), ErrorCode::InvalidArgument);
}

TEST(Report, FullRunIsDeterministicAndReproducibleFromManifest) {
    auto subs = testing_support::synthetic_population({.respondents = 48});
    auto raw = testing_support::population_jsonl(subs);
    auto rep = ingest_jsonl(raw);
    InputInfo info{"people.jsonl", fnv1a64_hex(raw), rep.records, rep.excluded.size()};
    auto cfg = fast_config();
    auto a = run_report(rep.dataset, cfg, info);
    EXPECT_EQ(a.conditioned.size(), 4u);
    EXPECT_FALSE(a.global.assignments.empty());
    EXPECT_EQ(a.curves.size(), 48u);
    for (const char* name : {"manifest.json", "fitted_curves.json", "fitted_curves.csv", "discount_points.csv", "fit_diagnostics.csv",
                             "outliers.json", "group_means_d0.csv", "group_means_d1.csv", "group_means_d2.csv", "within_variance_d0.csv",
                             "between_variance.csv", "group_mean_distances.csv", "exponential_rates.csv", "uncertainty_aversion.csv",
                             "hyperbolic_medians.csv", "elbow.csv", "elbow.json", "clustering_conditioned.json", "clustering_global.json",
                             "centroids_conditioned.csv", "centroids_global.csv"})
        EXPECT_TRUE(a.artifacts.count(name)) << name;

    auto again = run_report(rep.dataset, ReportConfig::from_json(a.manifest), info);
    EXPECT_EQ(again.artifacts, a.artifacts);

    auto dir = scratch("report");
    write_bundle(a, dir.string());
    EXPECT_EQ(read_file((dir / "clustering_global.json").string()), a.artifacts.at("clustering_global.json"));
}

TEST(Report, PlantedGroupsSeparateInTheMeans) {
    auto rep = ingest_jsonl(testing_support::population_jsonl(testing_support::synthetic_population({.respondents = 40})));
    auto b = run_report(rep.dataset, fast_config());
    // planted rates increase Artisan -> Rational, so the fitted group means order the same way at t = 30
    std::size_t node = *QuadratureGrid{}.node_index(30.0);
    EXPECT_GT(b.means.at("Artisan")[0].values[node], b.means.at("Guardian")[0].values[node]);
    EXPECT_GT(b.means.at("Guardian")[0].values[node], b.means.at("Idealist")[0].values[node]);
    EXPECT_GT(b.means.at("Idealist")[0].values[node], b.means.at("Rational")[0].values[node]);
    EXPECT_LT(b.group_rates.at("Artisan"), b.group_rates.at("Rational"));
    EXPECT_EQ(b.medians.size(), 4u);
}

TEST(Report, SmallClassIsStageTagged) {
    std::vector<RespondentSubmission> subs;
    for (int i = 0; i < 8; ++i) {
        auto s = simple("p" + std::to_string(i), 0.01 + 0.01 * i);
        s.part3_tallies = {{i < 2 ? "Idealist" : "Guardian", 10}};
        subs.push_back(s);
    }
    Dataset ds;
    ds.submissions = subs;
    auto cfg = fast_config();
    cfg.per_class_g = {{"Idealist", 4}};
    try {
        run_report(ds, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ClassTooSmall);
        EXPECT_NE(std::string(e.what()).find("stage conditioned_kmeans"), std::string::npos) << e.what();
    }
}

TEST(Report, IdenticalRespondentsHaveNoSpread) {
    Dataset ds;
    for (int i = 0; i < 6; ++i) ds.submissions.push_back(simple("same" + std::to_string(i)));
    auto b = run_report(ds, fast_config());
    for (const auto& [label, arr] : b.within)
        for (const auto& v : arr)
            for (double x : v.values) EXPECT_EQ(x, 0.0);
    for (const auto& [label, rep] : b.outliers) EXPECT_TRUE(rep.outliers.empty());
    EXPECT_EQ(b.global_elbow.suggested_g, 1);
}

TEST(Report, TooFewSubmissions) {
    Dataset ds;
    ds.submissions = {simple("a"), simple("b")};
    EXPECT_EQ(code_of([&] { run_report(ds, fast_config()); }), ErrorCode::TooFewCurves);
}

#ifdef DISCFDA_CLI
TEST(Cli, ExitCodes) {
    auto dir = scratch("cli");
    auto good = (dir / "good.jsonl").string(), bad = (dir / "bad.jsonl").string(), broken = (dir / "broken.jsonl").string();
    write_file(good, testing_support::population_jsonl(testing_support::synthetic_population({.respondents = 12})));
    auto b = simple("bad");
    b.part1_answers[4].amount = Decimal::parse("-1");
    write_file(bad, testing_support::population_jsonl({simple("ok"), b}));
    write_file(broken, "{not json\n{}\n");
    auto run = [&](const std::string& args) {
        int rc = std::system((std::string(DISCFDA_CLI) + " " + args + " > " + (dir / "out.txt").string() + " 2>&1").c_str());
        return WEXITSTATUS(rc);
    };
    EXPECT_EQ(run("validate " + good), 0);
    EXPECT_EQ(run("validate " + bad), 1);
    EXPECT_EQ(run("validate " + broken), 1);
    EXPECT_EQ(run("fit " + good + " --out " + (dir / "curves.json").string()), 0);
    EXPECT_EQ(run("cluster --curves " + (dir / "curves.json").string() + " --g 5 --mode conditioned --restarts 3"), 2);
    EXPECT_EQ(run("cluster --curves " + (dir / "curves.json").string() + " --g 2 --metric d2 --silhouette literal --restarts 3"), 0);
    EXPECT_EQ(run("elbow --curves " + (dir / "curves.json").string() + " --gmax 4 --restarts 3"), 0);
    EXPECT_EQ(run("outliers --curves " + (dir / "curves.json").string()), 0);
    EXPECT_EQ(run("stats --curves " + (dir / "curves.json").string() + " --out " + (dir / "stats").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "stats" / "between_variance.csv"));
    EXPECT_EQ(run("hyperbolic " + good), 0);
    EXPECT_EQ(run("report " + good + " --out-dir " + (dir / "r1").string()), 0);
    EXPECT_EQ(run("report " + good + " --config " + (dir / "r1" / "manifest.json").string() + " --out-dir " + (dir / "r2").string()), 0);
    for (const auto& e : fs::directory_iterator(dir / "r1"))
        EXPECT_EQ(read_file(e.path().string()), read_file((dir / "r2" / e.path().filename()).string())) << e.path();
    EXPECT_EQ(run("report " + (dir / "missing.jsonl").string()), 2);
    EXPECT_EQ(run("frobnicate"), 2);
}
#endif
