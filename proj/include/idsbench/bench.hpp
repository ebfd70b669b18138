#pragma once

#include "idsbench/dataset.hpp"
#include "idsbench/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace ids {

std::string_view version();

std::vector<std::string> builtin_scenarios();
// Throws Config/UnknownScenario.
ScenarioSchema builtin_schema(std::string_view scenario);

struct ScenarioConfig {
    std::string scenario;
    std::filesystem::path data;
    std::filesystem::path schema; // empty: built-in schema of `scenario`
    std::uint64_t seed = 42;
    double test_fraction = 0.2;
    std::size_t k = 5;
    // Per-learner hyperparameter overrides keyed by glm, random_forest, gbm,
    // mlp, meta_mlp, meta_gbm.
    nlohmann::json learners = nlohmann::json::object();
    std::filesystem::path out = "idsbench-out";
    bool dry_run = false;
};

// Unknown keys and invalid values are Config errors. A run manifest is also
// accepted, in which case its "config" member is used.
ScenarioConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ScenarioConfig& cfg);
void validate(const ScenarioConfig& cfg);

// Flag values override file values key by key; learner overrides merge per learner.
ScenarioConfig resolve_config(const nlohmann::json& file, const nlohmann::json& flags);
ScenarioSchema resolve_schema(const ScenarioConfig& cfg);

struct ResultsRow {
    std::string model;      // LR, RF, GBM, DL, SL1, SL2
    std::string label;      // display name, e.g. "SL1: DL"
    std::string candidates; // "RF, DL, GBM" for super learners, empty otherwise
    EvalReport report;
};

struct ResultsTable {
    std::string scenario;
    std::vector<ResultsRow> rows;
};

nlohmann::json results_to_json(const ResultsTable& table);
ResultsTable results_from_json(const nlohmann::json& doc);
std::string format_table(const ResultsTable& table);

struct RunManifest {
    nlohmann::json config;      // resolved ScenarioConfig
    nlohmann::json learners;    // every learner spec with defaults materialized
    nlohmann::json seeds;       // substream derivations
    std::string dataset_digest;
    std::string version;
    std::size_t workers = 1;
    std::vector<std::pair<std::string, double>> stage_seconds;
    std::optional<std::string> failed_stage;
    nlohmann::json counts = nlohmann::json::object();
};

nlohmann::json manifest_to_json(const RunManifest& m);

struct RunOutcome {
    ResultsTable table;
    RunManifest manifest;
    std::vector<std::pair<std::string, RocCurve>> curves; // keyed by model id, table order
};

/// Full pipeline; writes every artifact under cfg.out. Any stage error is
/// rethrown with the stage and scenario in its message after the partial
/// manifest has been written.
RunOutcome run_scenario(const ScenarioConfig& cfg, std::size_t workers = 1);

/// results.json, table.txt, roc_<model>.csv, roc_all.svg, manifest.json.
void export_report(const ResultsTable& table, const std::vector<std::pair<std::string, RocCurve>>& curves,
                   const RunManifest& manifest, const std::filesystem::path& out);

struct InspectReport {
    DatasetSummary summary;
    std::size_t balanced_per_class = 0;
    std::vector<std::string> mismatches; // "n_rows: expected 25192, got 100"
    std::string text;
    bool ok() const { return mismatches.empty(); }
};

InspectReport inspect_data(const std::filesystem::path& data, const ScenarioSchema& schema, bool expect_paper_counts);

// Re-renders roc_all.svg from the stored ROC CSVs in results.json row order.
void plot(const std::filesystem::path& in_dir);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace ids
