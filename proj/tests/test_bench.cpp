#include "doctest.h"
#include "support.hpp"

#include "idsbench/bench.hpp"
#include "idsbench/superlearner.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace ids;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    testing::TempDir dir{"bench"};
    fs::path data = dir.path() / "synthetic.csv";
    fs::path schema = dir.path() / "schema.json";

    explicit Fixture(std::size_t rows = 500) {
        testing::write_file(data, testing::synthetic_csv(rows, 77));
        testing::write_file(schema, testing::kSyntheticSchema);
    }

    ScenarioConfig config(const std::string& out) const {
        ScenarioConfig c;
        c.scenario = "synthetic";
        c.data = data;
        c.schema = schema;
        c.out = dir.path() / out;
        return c;
    }
};

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    for (std::string t; is >> t;) out.push_back(t);
    return out;
}

} // namespace

TEST_CASE("config defaults, overrides and validation") {
    Fixture fx(50);
    const json file = {{"scenario", "synthetic"}, {"data", fx.data.string()}, {"schema", fx.schema.string()},
                       {"seed", 7}, {"learners", {{"gbm", {{"rounds", 30}, {"max_depth", 4}}}}}};
    const json flags = {{"seed", 9}, {"learners", {{"gbm", {{"rounds", 40}}}}}};
    const auto cfg = resolve_config(file, flags);
    CHECK(cfg.seed == 9);
    CHECK(cfg.learners["gbm"]["rounds"] == 40);
    CHECK(cfg.learners["gbm"]["max_depth"] == 4);
    CHECK(cfg.test_fraction == 0.2);
    CHECK(cfg.k == 5);

    const auto defaults = resolve_config(json{{"scenario", "network"}, {"data", "x.csv"}}, nullptr);
    CHECK(defaults.seed == 42);

    auto kind_of = [](const json& doc) {
        try {
            config_from_json(doc);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Config);
            return e.kind();
        }
        return std::string();
    };
    CHECK(kind_of({{"scenario", "network"}, {"data", "x"}, {"sed", 1}}) == "InvalidConfig");
    CHECK(kind_of({{"scenario", "network"}, {"data", "x"}, {"test_fraction", 1.5}}) == "InvalidConfig");
    CHECK(kind_of({{"scenario", "network"}, {"data", "x"}, {"seed", -1}}) == "InvalidConfig");
    CHECK(kind_of({{"scenario", "network"}, {"data", "x"}, {"k", 1}}) == "InvalidConfig");
    CHECK(kind_of({{"scenario", "mars"}, {"data", "x"}}) == "UnknownScenario");
    CHECK(kind_of({{"scenario", "x"}, {"data", "x"}, {"schema", "/no/such/schema.json"}}) == "MissingSchema");
    CHECK(kind_of({{"scenario", "network"}, {"data", "x"}, {"learners", {{"svm", json::object()}}}}) == "InvalidConfig");
    CHECK(kind_of({{"scenario", "network"}, {"data", "x"}, {"learners", {{"gbm", {{"rounds", "many"}}}}}}) ==
          "InvalidHyperparameters");

    // round trip through JSON
    CHECK(config_to_json(config_from_json(config_to_json(cfg))) == config_to_json(cfg));
}

TEST_CASE("dry run writes only the manifest") {
    Fixture fx(50);
    auto cfg = fx.config("dry");
    cfg.dry_run = true;
    const auto out = run_scenario(cfg);
    CHECK(out.table.rows.empty());
    CHECK(fs::exists(cfg.out / "manifest.json"));
    CHECK_FALSE(fs::exists(cfg.out / "results.json"));
    CHECK_FALSE(fs::exists(cfg.out / "models"));
    const auto m = json::parse(read_text_file(cfg.out / "manifest.json"));
    CHECK(m["config"]["seed"] == 42);
    CHECK(m["learners"]["lr"]["hyperparameters"]["iterations"] == 500);
    CHECK(m["learners"]["sl1"]["meta"]["hyperparameters"]["hidden"] == json::array({16}));
    CHECK(m["learners"]["sl2"]["meta"]["hyperparameters"]["rounds"] == 50);
    CHECK(m["dataset_digest"].get<std::string>().size() == 64);
    CHECK(m["failed_stage"].is_null());
}

TEST_CASE("end-to-end run: layout, determinism and exported files") {
    Fixture fx;
    const auto a = run_scenario(fx.config("w1"), 1);
    const auto b = run_scenario(fx.config("w4"), 4);
    const auto c = run_scenario(fx.config("again"), 1);

    const std::string ra = read_text_file(fx.dir.path() / "w1" / "results.json");
    CHECK(ra == read_text_file(fx.dir.path() / "w4" / "results.json"));
    CHECK(ra == read_text_file(fx.dir.path() / "again" / "results.json"));
    for (const char* m : {"LR", "RF", "GBM", "DL", "SL1", "SL2"}) {
        const std::string name = std::string("models/") + m + ".json";
        CHECK(read_text_file(fx.dir.path() / "w1" / name) == read_text_file(fx.dir.path() / "w4" / name));
    }

    // six rows in the fixed order, stacked rows annotated
    REQUIRE(a.table.rows.size() == 6);
    const std::vector<std::string> order = {"LR", "RF", "GBM", "DL", "SL1", "SL2"};
    for (std::size_t i = 0; i < 6; ++i) CHECK(a.table.rows[i].model == order[i]);
    CHECK(a.table.rows[4].label == "SL1: DL");
    CHECK(a.table.rows[5].label == "SL2: GBM");
    CHECK(a.table.rows[4].candidates == "RF, DL, GBM");
    CHECK(a.table.rows[5].candidates == "RF, DL, GBM");
    CHECK(a.table.rows[0].candidates.empty());
    for (const auto& r : a.table.rows) {
        CHECK(r.report.auc > 0.8);
        CHECK((r.report.accuracy >= 0.0 && r.report.accuracy <= 1.0));
    }

    // results.json reconstructs every value exactly
    const auto parsed = results_from_json(json::parse(ra));
    REQUIRE(parsed.rows.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(parsed.rows[i].report.auc == a.table.rows[i].report.auc);
        CHECK(parsed.rows[i].report.accuracy == a.table.rows[i].report.accuracy);
        CHECK(parsed.rows[i].report.f_score == a.table.rows[i].report.f_score);
        CHECK(parsed.rows[i].report.confusion == a.table.rows[i].report.confusion);
    }

    // table.txt numbers are the results.json values rendered half-up to 4 decimals
    std::istringstream table(read_text_file(fx.dir.path() / "w1" / "table.txt"));
    std::string line;
    std::getline(table, line);
    CHECK(line == "Scenario: synthetic");
    std::getline(table, line);
    std::getline(table, line);
    for (std::size_t i = 0; i < 6; ++i) {
        REQUIRE(std::getline(table, line));
        const auto tok = split_ws(line);
        REQUIRE(tok.size() >= 4);
        const auto& rep = parsed.rows[i].report;
        CHECK(tok[tok.size() - 3] == format_fixed4(rep.auc));
        CHECK(tok[tok.size() - 2] == format_fixed4(rep.accuracy));
        CHECK(tok[tok.size() - 1] == format_fixed4(rep.f_score));
        CHECK(line.find(parsed.rows[i].label) == 0);
    }

    // ROC CSV re-integration reproduces the reported AUC
    for (const auto& r : parsed.rows) {
        const auto curve = roc_from_csv(read_text_file(fx.dir.path() / "w1" / ("roc_" + r.model + ".csv")));
        CHECK(std::abs(curve.area() - r.report.auc) <= 1e-9);
    }

    // manifest content
    const auto m = json::parse(read_text_file(fx.dir.path() / "w1" / "manifest.json"));
    CHECK(m["workers"] == 1);
    CHECK(m["dataset_digest"] == json::parse(read_text_file(fx.dir.path() / "w4" / "manifest.json"))["dataset_digest"]);
    CHECK(m["seeds"]["base"] == 42);
    CHECK(m["seeds"]["split"] == derive_seed(42, "split"));
    CHECK(m["stage_seconds"].size() >= 10);
    CHECK(m["counts"]["n_train"].get<std::size_t>() + m["counts"]["n_test"].get<std::size_t>() ==
          2 * m["counts"]["balanced_per_class"].get<std::size_t>());

    // stored models reload and score like the originals
    const auto sl = super_from_json(json::parse(read_text_file(fx.dir.path() / "w1" / "models" / "SL2.json")));
    CHECK(sl.candidate_order == std::vector<std::string>{"RF", "GBM", "DL"});
    CHECK(b.table.rows[5].report.auc == a.table.rows[5].report.auc);
    CHECK(c.curves.size() == 6);
}

TEST_CASE("export twice gives byte-identical files and plot re-renders the same svg") {
    Fixture fx(300);
    const auto run = run_scenario(fx.config("src"), 1);
    const fs::path x = fx.dir.path() / "x", y = fx.dir.path() / "y";
    export_report(run.table, run.curves, run.manifest, x);
    export_report(run.table, run.curves, run.manifest, y);
    for (const auto& entry : fs::directory_iterator(x))
        CHECK(read_text_file(entry.path()) == read_text_file(y / entry.path().filename()));

    const std::string svg = read_text_file(x / "roc_all.svg");
    fs::remove(x / "roc_all.svg");
    plot(x);
    CHECK(read_text_file(x / "roc_all.svg") == svg);
    CHECK(svg.find("SL2: GBM (AUC = " + format_fixed4(run.table.rows[5].report.auc) + ")") != std::string::npos);

    fs::remove(x / "roc_GBM.csv");
    CHECK_THROWS_AS(plot(x), Error);
}

TEST_CASE("stage failures name the stage and scenario and leave a manifest") {
    Fixture fx(40);
    auto cfg = fx.config("broken");
    cfg.data = fx.dir.path() / "missing.csv";
    try {
        run_scenario(cfg);
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Data);
        const std::string msg = e.what();
        CHECK(msg.find("stage 'load'") != std::string::npos);
        CHECK(msg.find("synthetic") != std::string::npos);
    }
    const auto m = json::parse(read_text_file(cfg.out / "manifest.json"));
    CHECK(m["failed_stage"] == "load");

    // a single-class file fails while balancing
    testing::write_file(fx.dir.path() / "one.csv", "num_a,num_b,flag,proto,label\n1,2,0,tcp,normal\n2,3,1,udp,normal\n");
    cfg.data = fx.dir.path() / "one.csv";
    try {
        run_scenario(cfg);
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("stage 'balance'") != std::string::npos);
    }
}

TEST_CASE("inspect_data with expected counts") {
    Fixture fx(200);
    auto schema = schema_from_json(json::parse(testing::kSyntheticSchema));
    const auto plain = inspect_data(fx.data, schema, false);
    CHECK(plain.ok());
    CHECK(plain.summary.n_rows == 200);
    CHECK(plain.balanced_per_class == std::min(plain.summary.count_y0, plain.summary.count_y1));

    schema.expected.n_rows = 200;
    schema.expected.n_features = 4;
    schema.expected.count_y0 = plain.summary.count_y0;
    schema.expected.count_y1 = plain.summary.count_y1;
    schema.expected.balanced_per_class = plain.balanced_per_class;
    CHECK(inspect_data(fx.data, schema, true).ok());

    // truncated file: the diff names every count that moved
    const std::string text = read_text_file(fx.data);
    testing::write_file(fx.dir.path() / "short.csv", text.substr(0, text.size() / 2));
    std::string head = read_text_file(fx.dir.path() / "short.csv");
    head = head.substr(0, head.rfind('\n') + 1);
    testing::write_file(fx.dir.path() / "short.csv", head);
    const auto r = inspect_data(fx.dir.path() / "short.csv", schema, true);
    CHECK_FALSE(r.ok());
    REQUIRE_FALSE(r.mismatches.empty());
    CHECK(r.mismatches[0].find("n_rows: expected 200") == 0);
    CHECK(r.text.find("MISMATCH") != std::string::npos);
}

TEST_CASE("built-in scenario schemas carry the expected counts") {
    const auto net = builtin_schema("network");
    CHECK(net.expected.n_rows == 25192u);
    CHECK(net.expected.n_features == 41u);
    CHECK(net.expected.count_y0 == 13449u);
    CHECK(net.expected.count_y1 == 11743u);
    CHECK(net.expected.balanced_per_class == 11743u);
    const auto android = builtin_schema("android");
    CHECK(android.expected.n_rows == 15036u);
    CHECK(android.expected.n_features == 215u);
    CHECK(android.expected.count_y0 == 9476u);
    CHECK(android.expected.count_y1 == 5560u);
    const auto iot = builtin_schema("iot");
    CHECK(iot.expected.n_rows == 157800u);
    CHECK(iot.expected.count_y0 == 24301u);
    CHECK(iot.expected.count_y1 == 133499u);
    CHECK(iot.expected.balanced_per_class == 24301u);
    CHECK(iot.level_guard_fraction == 0.5);
}
