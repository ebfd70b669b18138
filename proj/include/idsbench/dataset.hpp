#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ids {

enum class FeatureKind { Numeric, Categorical, Binary };
enum class ColumnRole { Feature, Label, Dropped };

std::string_view to_string(FeatureKind kind);
std::string_view to_string(ColumnRole role);

inline constexpr std::string_view kMissingLevel = "__missing__";

struct ColumnSchema {
    std::string name;
    FeatureKind kind = FeatureKind::Numeric;
    ColumnRole role = ColumnRole::Feature;
    std::vector<std::string> levels; // categorical only: sorted, unique
};

struct LabelSpec {
    enum class Mode { Explicit, Complement };
    std::set<std::string> positive_tokens;
    std::set<std::string> negative_tokens;
    Mode mode = Mode::Explicit;
};

// Column entry of a scenario schema file. `kind` may be left unset, in which
// case the kind is inferred from the column's tokens at load time.
struct ColumnRule {
    std::string name;
    std::optional<FeatureKind> kind;
    ColumnRole role = ColumnRole::Feature;
};

struct ExpectedCounts {
    std::optional<std::size_t> n_rows;
    std::optional<std::size_t> n_features;
    std::optional<std::size_t> count_y0;
    std::optional<std::size_t> count_y1;
    std::optional<std::size_t> balanced_per_class;
};

struct ScenarioSchema {
    std::string id;
    std::vector<ColumnRule> columns;
    bool header = true;
    LabelSpec label_spec;
    // Rule for header columns not listed in `columns`; absent means such
    // columns are a HeaderMismatch.
    std::optional<ColumnRule> other_columns;
    // Categorical columns with more levels than fraction * n_rows are dropped.
    std::optional<double> level_guard_fraction;
    ExpectedCounts expected;
};

ScenarioSchema schema_from_json(const nlohmann::json& doc);
nlohmann::json schema_to_json(const ScenarioSchema& schema);
ScenarioSchema read_schema_file(const std::filesystem::path& path);

struct Column {
    ColumnSchema schema;
    std::vector<double> values;       // numeric/binary; NaN marks missing
    std::vector<std::int32_t> codes;  // categorical; index into schema.levels
    std::size_t missing = 0;
    bool auto_dropped = false;        // dropped by the level-count guard

    bool is_feature() const { return schema.role == ColumnRole::Feature; }
    // Raw token of a categorical cell.
    const std::string& level_of(std::size_t row) const { return schema.levels[static_cast<std::size_t>(codes[row])]; }
};

struct Provenance {
    std::string source;
    std::string digest; // sha256 of file bytes
};

/// Column-major typed table. Label and dropped columns keep their schema but
/// carry no cell data.
struct TabularDataset {
    std::vector<Column> columns;
    std::vector<std::uint8_t> labels;
    std::size_t n_rows = 0;
    Provenance provenance;

    std::size_t n_features() const;
    std::vector<ColumnSchema> schema() const;
};

struct DatasetSummary {
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::size_t count_y0 = 0;
    std::size_t count_y1 = 0;
    std::map<std::string, std::size_t> missing;
    std::map<std::string, std::map<std::string, std::size_t>> level_counts;
    std::vector<std::string> auto_dropped;
};

TabularDataset load_csv(const std::filesystem::path& path, const ScenarioSchema& schema);

// Parses CSV text already in memory; `source` only labels provenance.
TabularDataset load_csv_text(std::string_view text, const ScenarioSchema& schema, std::string source = "<memory>");

std::vector<std::uint8_t> binarize_labels(std::span<const std::string_view> tokens, const LabelSpec& spec);
std::vector<std::uint8_t> binarize_labels(std::span<const std::string> tokens, const LabelSpec& spec);

DatasetSummary summarize(const TabularDataset& dataset);
std::string format_summary(const DatasetSummary& summary, std::string_view title = {});
nlohmann::json summary_to_json(const DatasetSummary& summary);

/// Kind inference over sample rows (row-major tokens, empty token = missing).
/// All-{0,1} columns are binary, all-numeric columns numeric, anything else
/// categorical with sorted distinct levels. Overrides win.
std::vector<ColumnSchema> infer_feature_kinds(std::span<const std::string> names,
                                              const std::vector<std::vector<std::string>>& rows,
                                              const std::map<std::string, FeatureKind>& overrides);

FeatureKind infer_kind(std::span<const std::string_view> tokens);

// Strict numeric token parse: finite values only.
std::optional<double> parse_number(std::string_view token);

} // namespace ids
