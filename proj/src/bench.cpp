#include "idsbench/bench.hpp"

#include "idsbench/digest.hpp"
#include "idsbench/error.hpp"
#include "idsbench/learners.hpp"
#include "idsbench/preprocess.hpp"
#include "idsbench/rng.hpp"
#include "idsbench/superlearner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#ifndef IDSBENCH_VERSION
#define IDSBENCH_VERSION "0.0.0"
#endif

namespace ids {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCandidateAnnotation = "RF, DL, GBM";
const std::set<std::string> kConfigKeys = {"scenario", "data", "schema", "seed", "test_fraction",
                                           "k",        "learners", "out", "dry_run"};
const std::set<std::string> kLearnerKeys = {"glm", "random_forest", "gbm", "mlp", "meta_mlp", "meta_gbm"};

[[noreturn]] void bad_config(const std::string& msg) { fail(ErrorCode::Config, "InvalidConfig", msg); }

json overrides_for(const ScenarioConfig& cfg, const char* key) {
    return cfg.learners.contains(key) ? cfg.learners.at(key) : json::object();
}

LearnerSpec meta_mlp_defaults() {
    MlpParams p;
    p.hidden = {16};
    return {p, 0};
}

LearnerSpec meta_gbm_defaults() {
    GbmParams p;
    p.rounds = 50;
    p.max_depth = 3;
    return {p, 0};
}

struct ResolvedLearners {
    LearnerSpec lr;
    SuperLearnerSpec sl1; // MLP meta
    SuperLearnerSpec sl2; // GBM meta
};

// RF, GBM and DL share one stacking spec, so their standalone rows are the
// super learners' refit bases.
ResolvedLearners resolve_learners(const ScenarioConfig& cfg) {
    ResolvedLearners r;
    r.lr = apply_overrides(LearnerSpec::defaults(Family::Glm, derive_seed(cfg.seed, "glm")), overrides_for(cfg, "glm"));
    SuperLearnerSpec base;
    base.k = cfg.k;
    base.seed = derive_seed(cfg.seed, "super-learner");
    base.candidates = {
        apply_overrides(LearnerSpec::defaults(Family::RandomForest), overrides_for(cfg, "random_forest")),
        apply_overrides(LearnerSpec::defaults(Family::Gbm), overrides_for(cfg, "gbm")),
        apply_overrides(LearnerSpec::defaults(Family::Mlp), overrides_for(cfg, "mlp")),
    };
    r.sl1 = base;
    r.sl1.meta = apply_overrides(meta_mlp_defaults(), overrides_for(cfg, "meta_mlp"));
    r.sl2 = base;
    r.sl2.meta = apply_overrides(meta_gbm_defaults(), overrides_for(cfg, "meta_gbm"));
    validate(r.sl1);
    validate(r.sl2);
    return r;
}

json seeds_json(const ScenarioConfig& cfg, const ResolvedLearners& l) {
    json refit = json::array();
    for (std::size_t j = 0; j < l.sl1.candidates.size(); ++j) refit.push_back(l.sl1.refit_spec(j).seed);
    return {
        {"base", cfg.seed},
        {"undersample", derive_seed(cfg.seed, "undersample")},
        {"split", derive_seed(cfg.seed, "split")},
        {"glm", l.lr.seed},
        {"super_learner", l.sl1.seed},
        {"sl_kfold", l.sl1.fold_seed()},
        {"sl_refit", refit},
        {"sl_meta", l.sl1.meta_spec().seed},
        {"derivations",
         {{"undersample", "derive_seed(base, \"undersample\")"},
          {"split", "derive_seed(base, \"split\")"},
          {"glm", "derive_seed(base, \"glm\")"},
          {"super_learner", "derive_seed(base, \"super-learner\")"},
          {"sl_kfold", "derive_seed(super_learner, \"sl-kfold\")"},
          {"sl_fold", "derive_seed(super_learner, \"sl-fold\", candidate, fold)"},
          {"sl_refit", "derive_seed(super_learner, \"sl-refit\", candidate)"},
          {"sl_meta", "derive_seed(super_learner, \"sl-meta\")"},
          {"forest_tree", "derive_seed(model_seed, \"forest-tree\", tree)"},
          {"mlp_init", "derive_seed(model_seed, \"mlp-init\")"},
          {"mlp_epoch", "derive_seed(model_seed, \"mlp-epoch\", epoch)"}}},
    };
}

std::string row_label(const std::string& model) {
    if (model == "SL1") return "SL1: DL";
    if (model == "SL2") return "SL2: GBM";
    return model;
}

std::string svg_title(const std::string& scenario) { return "ROC curves, scenario " + scenario; }

std::string render_svg(const ResultsTable& table, const std::vector<std::pair<std::string, RocCurve>>& curves) {
    std::vector<std::pair<std::string, RocCurve>> named;
    for (const auto& [model, curve] : curves) named.emplace_back(row_label(model), curve);
    return render_roc_svg(named, svg_title(table.scenario));
}

std::string with_thousands(std::size_t v) {
    std::string s = std::to_string(v);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
    return s;
}

} // namespace

std::string_view version() { return IDSBENCH_VERSION; }

void write_text_file(const fs::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "WriteFailed", "cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) fail(ErrorCode::Io, "WriteFailed", "short write to " + path.string());
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "ReadFailed", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ScenarioConfig config_from_json(const json& input) {
    const json& doc = input.is_object() && input.contains("config") && input.contains("dataset_digest")
                          ? input.at("config")
                          : input;
    if (!doc.is_object()) bad_config("config must be a JSON object");
    for (const auto& [key, value] : doc.items())
        if (!kConfigKeys.count(key)) bad_config("unknown config key '" + key + "'");
    ScenarioConfig cfg;
    auto str = [&](const char* key) -> std::optional<std::string> {
        if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
        if (!doc[key].is_string()) bad_config(std::string(key) + " must be a string");
        return doc[key].get<std::string>();
    };
    auto uint = [&](const char* key) -> std::optional<std::uint64_t> {
        if (!doc.contains(key)) return std::nullopt;
        if (!doc[key].is_number_integer() || doc[key].get<std::int64_t>() < 0) bad_config(std::string(key) + " must be a non-negative integer");
        return doc[key].get<std::uint64_t>();
    };
    if (auto v = str("scenario")) cfg.scenario = *v;
    if (auto v = str("data")) cfg.data = *v;
    if (auto v = str("schema")) cfg.schema = *v;
    if (auto v = str("out")) cfg.out = *v;
    if (auto v = uint("seed")) cfg.seed = *v;
    if (auto v = uint("k")) cfg.k = static_cast<std::size_t>(*v);
    if (doc.contains("test_fraction")) {
        if (!doc["test_fraction"].is_number()) bad_config("test_fraction must be a number");
        cfg.test_fraction = doc["test_fraction"].get<double>();
    }
    if (doc.contains("dry_run")) {
        if (!doc["dry_run"].is_boolean()) bad_config("dry_run must be a boolean");
        cfg.dry_run = doc["dry_run"].get<bool>();
    }
    if (doc.contains("learners")) cfg.learners = doc["learners"];
    validate(cfg);
    return cfg;
}

json config_to_json(const ScenarioConfig& cfg) {
    json j = {{"scenario", cfg.scenario},
              {"data", cfg.data.generic_string()},
              {"seed", cfg.seed},
              {"test_fraction", cfg.test_fraction},
              {"k", cfg.k},
              {"learners", cfg.learners},
              {"out", cfg.out.generic_string()},
              {"dry_run", cfg.dry_run}};
    if (!cfg.schema.empty()) j["schema"] = cfg.schema.generic_string();
    return j;
}

void validate(const ScenarioConfig& cfg) {
    if (cfg.scenario.empty()) bad_config("scenario is required");
    if (cfg.schema.empty()) {
        builtin_schema(cfg.scenario);
    } else if (!fs::exists(cfg.schema)) {
        fail(ErrorCode::Config, "MissingSchema", "schema file not found: " + cfg.schema.string());
    }
    if (cfg.data.empty()) bad_config("data path is required");
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) bad_config("test_fraction must lie in (0, 1)");
    if (cfg.k < 2) bad_config("k must be at least 2");
    if (cfg.out.empty()) bad_config("out must not be empty");
    if (!cfg.learners.is_object()) bad_config("learners must be an object");
    for (const auto& [key, value] : cfg.learners.items()) {
        if (!kLearnerKeys.count(key)) bad_config("unknown learner '" + key + "'");
        if (!value.is_object()) bad_config("overrides for '" + key + "' must be an object");
    }
    resolve_learners(cfg);
}

ScenarioConfig resolve_config(const json& file, const json& flags) {
    json merged = json::object();
    if (!file.is_null()) {
        if (!file.is_object()) bad_config("config file must hold a JSON object");
        merged = file.contains("config") && file.contains("dataset_digest") ? file.at("config") : file;
    }
    if (!flags.is_null()) {
        for (const auto& [key, value] : flags.items()) {
            if (key == "learners" && merged.contains("learners") && merged["learners"].is_object() && value.is_object()) {
                for (const auto& [name, ov] : value.items()) {
                    if (merged["learners"].contains(name) && merged["learners"][name].is_object() && ov.is_object())
                        merged["learners"][name].update(ov);
                    else
                        merged["learners"][name] = ov;
                }
            } else {
                merged[key] = value;
            }
        }
    }
    return config_from_json(merged);
}

ScenarioSchema resolve_schema(const ScenarioConfig& cfg) {
    if (cfg.schema.empty()) return builtin_schema(cfg.scenario);
    ScenarioSchema s = read_schema_file(cfg.schema);
    if (s.id.empty()) s.id = cfg.scenario;
    return s;
}

json results_to_json(const ResultsTable& table) {
    json rows = json::array();
    for (const auto& r : table.rows)
        rows.push_back({{"model", r.model}, {"label", r.label}, {"candidates", r.candidates}, {"report", report_to_json(r.report)}});
    return {{"format", "idsbench.results"}, {"version", 1}, {"scenario", table.scenario}, {"rows", rows}};
}

ResultsTable results_from_json(const json& doc) {
    try {
        if (doc.at("format") != "idsbench.results") fail(ErrorCode::Data, "InvalidResults", "not an idsbench.results document");
        ResultsTable t;
        t.scenario = doc.at("scenario").get<std::string>();
        for (const auto& r : doc.at("rows"))
            t.rows.push_back({r.at("model").get<std::string>(), r.at("label").get<std::string>(),
                              r.at("candidates").get<std::string>(), report_from_json(r.at("report"))});
        return t;
    } catch (const json::exception& e) {
        fail(ErrorCode::Data, "InvalidResults", e.what());
    }
}

std::string format_table(const ResultsTable& table) {
    std::string out = "Scenario: " + table.scenario + "\n";
    char line[256];
    auto emit = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                    const std::string& e) {
        std::snprintf(line, sizeof line, "%-10s  %-11s  %-6s  %-8s  %s\n", a.c_str(), b.c_str(), c.c_str(), d.c_str(),
                      e.c_str());
        out += line;
    };
    emit("Classifier", "Candidate", "AUC", "Accuracy", "F-score");
    emit("----------", "-----------", "------", "--------", "-------");
    for (const auto& r : table.rows)
        emit(r.label, r.candidates.empty() ? "-" : r.candidates, format_fixed4(r.report.auc),
             format_fixed4(r.report.accuracy), format_fixed4(r.report.f_score));
    return out;
}

json manifest_to_json(const RunManifest& m) {
    json stages = json::array();
    for (const auto& [name, secs] : m.stage_seconds) stages.push_back({{"stage", name}, {"seconds", secs}});
    json j = {{"format", "idsbench.manifest"},
              {"config", m.config},
              {"learners", m.learners},
              {"seeds", m.seeds},
              {"dataset_digest", m.dataset_digest},
              {"version", m.version},
              {"workers", m.workers},
              {"stage_seconds", stages},
              {"counts", m.counts}};
    j["failed_stage"] = m.failed_stage ? json(*m.failed_stage) : json(nullptr);
    return j;
}

void export_report(const ResultsTable& table, const std::vector<std::pair<std::string, RocCurve>>& curves,
                   const RunManifest& manifest, const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) fail(ErrorCode::Io, "WriteFailed", "cannot create " + out.string() + ": " + ec.message());
    write_text_file(out / "results.json", results_to_json(table).dump(2) + "\n");
    write_text_file(out / "table.txt", format_table(table));
    for (const auto& [model, curve] : curves) write_text_file(out / ("roc_" + model + ".csv"), roc_to_csv(curve));
    write_text_file(out / "roc_all.svg", render_svg(table, curves));
    write_text_file(out / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

RunOutcome run_scenario(const ScenarioConfig& cfg, std::size_t workers) {
    validate(cfg);
    workers = std::max<std::size_t>(workers, 1);
    RunOutcome outcome;
    RunManifest& m = outcome.manifest;
    m.config = config_to_json(cfg);
    m.version = std::string(version());
    m.workers = workers;
    const ResolvedLearners learners = resolve_learners(cfg);
    m.learners = {{"lr", spec_to_json(learners.lr)},
                  {"sl1", super_spec_to_json(learners.sl1)},
                  {"sl2", super_spec_to_json(learners.sl2)}};
    m.seeds = seeds_json(cfg, learners);

    std::string stage = "prepare";
    auto timed = [&](const char* name, auto&& fn) {
        stage = name;
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        m.stage_seconds.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    };
    auto write_manifest = [&] {
        std::error_code ec;
        fs::create_directories(cfg.out, ec);
        if (ec) fail(ErrorCode::Io, "WriteFailed", "cannot create " + cfg.out.string() + ": " + ec.message());
        write_text_file(cfg.out / "manifest.json", manifest_to_json(m).dump(2) + "\n");
    };

    try {
        const ScenarioSchema schema = resolve_schema(cfg);
        if (cfg.dry_run) {
            stage = "dry_run";
            if (fs::is_regular_file(cfg.data)) m.dataset_digest = sha256_hex(read_text_file(cfg.data));
            write_manifest();
            outcome.table.scenario = cfg.scenario;
            return outcome;
        }

        TabularDataset ds;
        timed("load", [&] {
            ds = load_csv(cfg.data, schema);
            m.dataset_digest = ds.provenance.digest;
        });

        std::vector<std::size_t> kept;
        timed("balance", [&] { kept = undersample(ds.labels, {derive_seed(cfg.seed, "undersample")}); });

        std::vector<std::size_t> train_rows, test_rows;
        timed("split", [&] {
            const Labels balanced = select(ds.labels, kept);
            const SplitPlan plan = stratified_split(balanced, cfg.test_fraction, derive_seed(cfg.seed, "split"));
            for (auto i : plan.train_idx) train_rows.push_back(kept[i]);
            for (auto i : plan.test_idx) test_rows.push_back(kept[i]);
        });

        EncoderState encoder;
        EncodedMatrix train_set, test_set;
        timed("encode", [&] {
            encoder = fit_encoder(ds, train_rows);
            train_set = encode(encoder, ds, train_rows);
            test_set = encode(encoder, ds, test_rows);
        });
        m.counts = {{"n_rows", ds.n_rows},
                    {"balanced_per_class", kept.size() / 2},
                    {"n_train", train_rows.size()},
                    {"n_test", test_rows.size()},
                    {"encoded_width", encoder.width()}};

        TrainedModel lr;
        timed("train_lr", [&] { lr = train(learners.lr, train_set.x, train_set.y, workers); });

        MetaFeatures meta_features;
        timed("meta_features",
              [&] { meta_features = build_meta_features(train_set.x, train_set.y, learners.sl1, workers); });

        std::vector<TrainedModel> bases(learners.sl1.candidates.size());
        timed("refit_bases", [&] {
            for (std::size_t j = 0; j < bases.size(); ++j)
                bases[j] = train(learners.sl1.refit_spec(j), train_set.x, train_set.y, workers);
        });

        SuperLearnerModel sl1, sl2;
        timed("train_sl1", [&] { sl1 = fit_super_learner(meta_features, train_set.y, bases, learners.sl1); });
        timed("train_sl2", [&] { sl2 = fit_super_learner(meta_features, train_set.y, bases, learners.sl2); });

        timed("evaluate", [&] {
            outcome.table.scenario = cfg.scenario;
            auto add = [&](const std::string& model, const std::vector<double>& scores, bool stacked) {
                outcome.table.rows.push_back(
                    {model, row_label(model), stacked ? kCandidateAnnotation : "", evaluate(scores, test_set.y, model)});
                outcome.curves.emplace_back(model, roc_points(scores, test_set.y));
            };
            // bases are in candidate order RF, GBM, DL
            add("LR", predict_proba(lr, test_set.x), false);
            add("RF", predict_proba(bases[0], test_set.x), false);
            add("GBM", predict_proba(bases[1], test_set.x), false);
            add("DL", predict_proba(bases[2], test_set.x), false);
            add("SL1", predict_super(sl1, test_set.x), true);
            add("SL2", predict_super(sl2, test_set.x), true);
        });

        timed("export", [&] {
            const fs::path models = cfg.out / "models";
            std::error_code ec;
            fs::create_directories(models, ec);
            if (ec) fail(ErrorCode::Io, "WriteFailed", "cannot create " + models.string() + ": " + ec.message());
            write_text_file(cfg.out / "encoder.json", encoder_to_json(encoder).dump(2) + "\n");
            write_text_file(models / "LR.json", model_to_json(lr).dump() + "\n");
            write_text_file(models / "RF.json", model_to_json(bases[0]).dump() + "\n");
            write_text_file(models / "GBM.json", model_to_json(bases[1]).dump() + "\n");
            write_text_file(models / "DL.json", model_to_json(bases[2]).dump() + "\n");
            write_text_file(models / "SL1.json", super_to_json(sl1).dump() + "\n");
            write_text_file(models / "SL2.json", super_to_json(sl2).dump() + "\n");
            export_report(outcome.table, outcome.curves, m, cfg.out);
        });
        // Rewrite so the manifest includes the export timing itself.
        write_manifest();
        return outcome;
    } catch (const Error& e) {
        m.failed_stage = stage;
        try {
            write_manifest();
        } catch (const Error&) {
        }
        throw Error(e.code(), e.kind(), "stage '" + stage + "' of scenario '" + cfg.scenario + "': " + e.detail());
    } catch (const std::exception& e) {
        m.failed_stage = stage;
        try {
            write_manifest();
        } catch (const Error&) {
        }
        throw Error(ErrorCode::Training, "Internal", "stage '" + stage + "' of scenario '" + cfg.scenario + "': " + e.what());
    }
}

InspectReport inspect_data(const fs::path& data, const ScenarioSchema& schema, bool expect_paper_counts) {
    const TabularDataset ds = load_csv(data, schema);
    InspectReport r;
    r.summary = summarize(ds);
    if (r.summary.count_y0 > 0 && r.summary.count_y1 > 0) r.balanced_per_class = undersample(ds.labels, {}).size() / 2;

    std::ostringstream os;
    os << format_summary(r.summary, "Dataset " + data.filename().string() + " (scenario " + schema.id + ")");
    os << "  Balanced per class " << with_thousands(r.balanced_per_class) << "\n";
    if (expect_paper_counts) {
        const ExpectedCounts& e = schema.expected;
        auto check = [&](const char* name, const std::optional<std::size_t>& want, std::size_t got) {
            if (!want) return;
            const bool ok = *want == got;
            os << "  expect " << name << " " << with_thousands(*want) << ": "
               << (ok ? "ok" : "MISMATCH (got " + with_thousands(got) + ")") << "\n";
            if (!ok)
                r.mismatches.push_back(std::string(name) + ": expected " + std::to_string(*want) + ", got " +
                                       std::to_string(got));
        };
        check("n_rows", e.n_rows, r.summary.n_rows);
        check("n_features", e.n_features, r.summary.n_features);
        check("count_y0", e.count_y0, r.summary.count_y0);
        check("count_y1", e.count_y1, r.summary.count_y1);
        check("balanced_per_class", e.balanced_per_class, r.balanced_per_class);
        if (!e.n_rows && !e.n_features && !e.count_y0 && !e.count_y1 && !e.balanced_per_class)
            os << "  schema declares no expected counts\n";
    }
    r.text = os.str();
    return r;
}

void plot(const fs::path& in_dir) {
    const fs::path results = in_dir / "results.json";
    json doc;
    try {
        doc = json::parse(read_text_file(results));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::Data, "InvalidResults", results.string() + ": " + e.what());
    }
    const ResultsTable table = results_from_json(doc);
    std::vector<std::pair<std::string, RocCurve>> curves;
    for (const auto& row : table.rows) {
        const fs::path csv = in_dir / ("roc_" + row.model + ".csv");
        if (!fs::exists(csv)) fail(ErrorCode::Data, "MissingFile", "ROC file not found: " + csv.string());
        curves.emplace_back(row.model, roc_from_csv(read_text_file(csv)));
    }
    write_text_file(in_dir / "roc_all.svg", render_svg(table, curves));
}

} // namespace ids
