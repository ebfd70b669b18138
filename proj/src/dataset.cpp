#include "idsbench/dataset.hpp"

#include "idsbench/digest.hpp"
#include "idsbench/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace ids {

namespace {

using nlohmann::json;

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Comma-separated records with optional double-quote quoting ("" escapes a
// quote). Quoted fields containing escapes are materialized in `arena`, which
// must outlive the returned views.
class CsvReader {
public:
    explicit CsvReader(std::string_view text) : text_(text) {
        if (text_.size() >= 3 && text_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
    }

    bool next(std::vector<std::string_view>& fields, std::deque<std::string>& arena) {
        fields.clear();
        // Skip blank lines.
        while (pos_ < text_.size() && (text_[pos_] == '\n' || text_[pos_] == '\r')) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
        if (pos_ >= text_.size()) return false;
        ++line_;
        record_line_ = line_;
        while (true) {
            if (pos_ < text_.size() && text_[pos_] == '"') {
                fields.push_back(read_quoted(arena));
            } else {
                const std::size_t start = pos_;
                while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '\n' && text_[pos_] != '\r') ++pos_;
                fields.push_back(trim(text_.substr(start, pos_ - start)));
            }
            if (pos_ >= text_.size()) return true;
            const char c = text_[pos_];
            if (c == ',') {
                ++pos_;
                continue;
            }
            if (c == '\r') ++pos_;
            if (pos_ < text_.size() && text_[pos_] == '\n') ++pos_;
            return true;
        }
    }

    std::size_t record_line() const { return record_line_; }

private:
    std::string_view read_quoted(std::deque<std::string>& arena) {
        ++pos_; // opening quote
        const std::size_t start = pos_;
        bool escaped = false;
        while (pos_ < text_.size()) {
            if (text_[pos_] == '"') {
                if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '"') {
                    escaped = true;
                    pos_ += 2;
                    continue;
                }
                break;
            }
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
        if (pos_ >= text_.size())
            fail(ErrorCode::Data, "CsvSyntax", "unterminated quoted field starting on line " + std::to_string(record_line_));
        std::string_view body = text_.substr(start, pos_ - start);
        ++pos_; // closing quote
        // Tolerate whitespace between the closing quote and the separator.
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
        if (!escaped) return body;
        std::string& owned = arena.emplace_back();
        owned.reserve(body.size());
        for (std::size_t i = 0; i < body.size(); ++i) {
            owned.push_back(body[i]);
            if (body[i] == '"') ++i;
        }
        return owned;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 0;
    std::size_t record_line_ = 0;
};

FeatureKind kind_from_string(const std::string& s) {
    if (s == "numeric") return FeatureKind::Numeric;
    if (s == "categorical") return FeatureKind::Categorical;
    if (s == "binary") return FeatureKind::Binary;
    fail(ErrorCode::Config, "InvalidSchema", "unknown column kind '" + s + "'");
}

ColumnRole role_from_string(const std::string& s) {
    if (s == "feature") return ColumnRole::Feature;
    if (s == "label") return ColumnRole::Label;
    if (s == "dropped") return ColumnRole::Dropped;
    fail(ErrorCode::Config, "InvalidSchema", "unknown column role '" + s + "'");
}

ColumnRule rule_from_json(const json& j) {
    ColumnRule rule;
    rule.name = j.value("name", std::string{});
    const std::string kind = j.value("kind", std::string{"infer"});
    if (kind != "infer") rule.kind = kind_from_string(kind);
    rule.role = role_from_string(j.value("role", std::string{"feature"}));
    return rule;
}

json rule_to_json(const ColumnRule& rule) {
    json j;
    if (!rule.name.empty()) j["name"] = rule.name;
    j["kind"] = rule.kind ? std::string(to_string(*rule.kind)) : std::string("infer");
    j["role"] = std::string(to_string(rule.role));
    return j;
}

void validate_schema(const ScenarioSchema& schema) {
    std::size_t labels = 0;
    std::set<std::string> seen;
    for (const auto& c : schema.columns) {
        if (c.name.empty()) fail(ErrorCode::Config, "InvalidSchema", "column without a name");
        if (!seen.insert(c.name).second) fail(ErrorCode::Config, "InvalidSchema", "duplicate column '" + c.name + "'");
        if (c.role == ColumnRole::Label) ++labels;
    }
    if (labels != 1)
        fail(ErrorCode::Config, "InvalidSchema",
             "schema must declare exactly one label column, found " + std::to_string(labels));
    if (schema.other_columns && schema.other_columns->role == ColumnRole::Label)
        fail(ErrorCode::Config, "InvalidSchema", "other_columns cannot carry the label role");
    for (const auto& t : schema.label_spec.positive_tokens)
        if (schema.label_spec.negative_tokens.count(t))
            fail(ErrorCode::Config, "InvalidLabelSpec", "token '" + t + "' is both positive and negative");
    if (schema.level_guard_fraction && !(*schema.level_guard_fraction > 0.0))
        fail(ErrorCode::Config, "InvalidSchema", "level_guard_fraction must be positive");
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += ", ";
        out += s;
    }
    return out;
}

std::string with_thousands(std::size_t n) {
    std::string digits = std::to_string(n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i != 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
        out.push_back(digits[i]);
    }
    return out;
}

double binary_value(std::string_view token) {
    const auto v = parse_number(token);
    if (v && (*v == 0.0 || *v == 1.0)) return *v;
    return kMissing;
}

void validate_label_spec(const LabelSpec& spec) {
    for (const auto& t : spec.positive_tokens)
        if (spec.negative_tokens.count(t))
            fail(ErrorCode::Config, "InvalidLabelSpec", "token '" + t + "' is both positive and negative");
}

template <typename Token>
std::vector<std::uint8_t> binarize_impl(std::span<const Token> tokens, const LabelSpec& spec) {
    validate_label_spec(spec);
    std::vector<std::uint8_t> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string_view raw = trim(std::string_view(tokens[i]));
        const std::string token(raw);
        if (spec.negative_tokens.count(token)) {
            out.push_back(0);
        } else if (spec.positive_tokens.count(token) || spec.mode == LabelSpec::Mode::Complement) {
            out.push_back(1);
        } else {
            fail(ErrorCode::Data, "UnmappedToken",
                 "label token '" + token + "' first seen at row " + std::to_string(i));
        }
    }
    return out;
}

} // namespace

std::string_view to_string(FeatureKind kind) {
    switch (kind) {
    case FeatureKind::Numeric: return "numeric";
    case FeatureKind::Categorical: return "categorical";
    case FeatureKind::Binary: return "binary";
    }
    return "numeric";
}

std::string_view to_string(ColumnRole role) {
    switch (role) {
    case ColumnRole::Feature: return "feature";
    case ColumnRole::Label: return "label";
    case ColumnRole::Dropped: return "dropped";
    }
    return "feature";
}

std::optional<double> parse_number(std::string_view token) {
    token = trim(token);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    if (token.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

ScenarioSchema schema_from_json(const json& doc) {
    try {
        ScenarioSchema s;
        s.id = doc.value("id", std::string{});
        s.header = doc.value("header", true);
        for (const auto& c : doc.at("columns")) s.columns.push_back(rule_from_json(c));
        const auto& ls = doc.at("label_spec");
        for (const auto& t : ls.value("positive_tokens", json::array())) s.label_spec.positive_tokens.insert(t.get<std::string>());
        for (const auto& t : ls.value("negative_tokens", json::array())) s.label_spec.negative_tokens.insert(t.get<std::string>());
        const std::string mode = ls.value("mode", std::string{"explicit"});
        if (mode == "explicit") s.label_spec.mode = LabelSpec::Mode::Explicit;
        else if (mode == "complement") s.label_spec.mode = LabelSpec::Mode::Complement;
        else fail(ErrorCode::Config, "InvalidSchema", "unknown label mode '" + mode + "'");
        if (doc.contains("other_columns")) s.other_columns = rule_from_json(doc["other_columns"]);
        if (doc.contains("level_guard_fraction")) s.level_guard_fraction = doc["level_guard_fraction"].get<double>();
        if (doc.contains("expected")) {
            const auto& e = doc["expected"];
            auto opt = [&](const char* key, std::optional<std::size_t>& out) {
                if (e.contains(key)) out = e[key].get<std::size_t>();
            };
            opt("n_rows", s.expected.n_rows);
            opt("n_features", s.expected.n_features);
            opt("count_y0", s.expected.count_y0);
            opt("count_y1", s.expected.count_y1);
            opt("balanced_per_class", s.expected.balanced_per_class);
        }
        validate_schema(s);
        return s;
    } catch (const json::exception& e) {
        fail(ErrorCode::Config, "InvalidSchema", e.what());
    }
}

json schema_to_json(const ScenarioSchema& schema) {
    json doc;
    doc["id"] = schema.id;
    doc["header"] = schema.header;
    doc["columns"] = json::array();
    for (const auto& c : schema.columns) doc["columns"].push_back(rule_to_json(c));
    doc["label_spec"] = {
        {"positive_tokens", schema.label_spec.positive_tokens},
        {"negative_tokens", schema.label_spec.negative_tokens},
        {"mode", schema.label_spec.mode == LabelSpec::Mode::Explicit ? "explicit" : "complement"},
    };
    if (schema.other_columns) {
        json other = rule_to_json(*schema.other_columns);
        other.erase("name");
        doc["other_columns"] = other;
    }
    if (schema.level_guard_fraction) doc["level_guard_fraction"] = *schema.level_guard_fraction;
    json expected = json::object();
    auto put = [&](const char* key, const std::optional<std::size_t>& v) {
        if (v) expected[key] = *v;
    };
    put("n_rows", schema.expected.n_rows);
    put("n_features", schema.expected.n_features);
    put("count_y0", schema.expected.count_y0);
    put("count_y1", schema.expected.count_y1);
    put("balanced_per_class", schema.expected.balanced_per_class);
    if (!expected.empty()) doc["expected"] = expected;
    return doc;
}

ScenarioSchema read_schema_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Config, "MissingFile", "cannot open schema " + path.string());
    try {
        return schema_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::Config, "InvalidSchema", path.string() + ": " + e.what());
    }
}

std::size_t TabularDataset::n_features() const {
    return static_cast<std::size_t>(std::count_if(columns.begin(), columns.end(), [](const Column& c) { return c.is_feature(); }));
}

std::vector<ColumnSchema> TabularDataset::schema() const {
    std::vector<ColumnSchema> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.schema);
    return out;
}

FeatureKind infer_kind(std::span<const std::string_view> tokens) {
    bool any = false;
    bool all_binary = true;
    for (const auto raw : tokens) {
        const auto token = trim(raw);
        if (token.empty()) continue;
        any = true;
        const auto v = parse_number(token);
        if (!v) return FeatureKind::Categorical;
        if (*v != 0.0 && *v != 1.0) all_binary = false;
    }
    if (!any) return FeatureKind::Numeric;
    return all_binary ? FeatureKind::Binary : FeatureKind::Numeric;
}

std::vector<ColumnSchema> infer_feature_kinds(std::span<const std::string> names,
                                              const std::vector<std::vector<std::string>>& rows,
                                              const std::map<std::string, FeatureKind>& overrides) {
    if (rows.empty()) {
        for (const auto& n : names)
            if (!overrides.count(n))
                fail(ErrorCode::Data, "EmptySampleWithoutOverrides", "no sample rows to infer the kind of column '" + n + "'");
    }
    std::vector<ColumnSchema> out;
    out.reserve(names.size());
    std::vector<std::string_view> tokens(rows.size());
    for (std::size_t c = 0; c < names.size(); ++c) {
        ColumnSchema col;
        col.name = names[c];
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != names.size())
                fail(ErrorCode::Data, "RowWidthMismatch", "sample row " + std::to_string(r) + " has " +
                                                              std::to_string(rows[r].size()) + " fields");
            tokens[r] = rows[r][c];
        }
        if (auto it = overrides.find(col.name); it != overrides.end()) col.kind = it->second;
        else col.kind = infer_kind(tokens);
        if (col.kind == FeatureKind::Categorical) {
            std::set<std::string> levels;
            for (const auto t : tokens) {
                const auto tt = trim(t);
                levels.insert(tt.empty() ? std::string(kMissingLevel) : std::string(tt));
            }
            col.levels.assign(levels.begin(), levels.end());
        }
        out.push_back(std::move(col));
    }
    return out;
}

std::vector<std::uint8_t> binarize_labels(std::span<const std::string_view> tokens, const LabelSpec& spec) {
    return binarize_impl(tokens, spec);
}

std::vector<std::uint8_t> binarize_labels(std::span<const std::string> tokens, const LabelSpec& spec) {
    return binarize_impl(tokens, spec);
}

TabularDataset load_csv(const std::filesystem::path& path, const ScenarioSchema& schema) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec))
        fail(ErrorCode::Data, "MissingFile", "data file not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Data, "MissingFile", "cannot open data file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_csv_text(text, schema, path.string());
}

TabularDataset load_csv_text(std::string_view text, const ScenarioSchema& schema, std::string source) {
    validate_schema(schema);

    CsvReader reader(text);
    std::deque<std::string> arena;
    std::vector<std::string_view> fields;

    // Column rules in file order.
    std::vector<ColumnRule> layout;
    bool have_first_record = false;
    if (schema.header) {
        if (!reader.next(fields, arena)) fields.clear();
        std::map<std::string, const ColumnRule*> by_name;
        for (const auto& c : schema.columns) by_name[c.name] = &c;
        std::set<std::string> present;
        std::vector<std::string> unexpected;
        std::vector<std::string> duplicated;
        for (const auto f : fields) {
            std::string name(f);
            if (!present.insert(name).second) {
                duplicated.push_back(name);
                continue;
            }
            if (auto it = by_name.find(name); it != by_name.end()) {
                layout.push_back(*it->second);
            } else if (schema.other_columns) {
                ColumnRule rule = *schema.other_columns;
                rule.name = name;
                layout.push_back(rule);
            } else {
                unexpected.push_back(name);
            }
        }
        std::vector<std::string> absent;
        for (const auto& c : schema.columns)
            if (!present.count(c.name)) absent.push_back(c.name);
        if (!unexpected.empty() || !absent.empty() || !duplicated.empty()) {
            std::string msg;
            if (!unexpected.empty()) msg += "unexpected columns [" + join(unexpected) + "]";
            if (!absent.empty()) msg += std::string(msg.empty() ? "" : "; ") + "absent columns [" + join(absent) + "]";
            if (!duplicated.empty()) msg += std::string(msg.empty() ? "" : "; ") + "duplicated columns [" + join(duplicated) + "]";
            fail(ErrorCode::Data, "HeaderMismatch", msg);
        }
    } else {
        layout = schema.columns;
        have_first_record = reader.next(fields, arena);
        if (have_first_record && fields.size() != layout.size())
            fail(ErrorCode::Data, "HeaderMismatch",
                 "headerless file has " + std::to_string(fields.size()) + " columns, schema declares " +
                     std::to_string(layout.size()));
    }

    const std::size_t width = layout.size();
    std::size_t label_pos = width;
    for (std::size_t i = 0; i < width; ++i)
        if (layout[i].role == ColumnRole::Label) label_pos = i;

    // Per-position raw storage.
    std::vector<std::vector<double>> numbers(width);
    std::vector<std::vector<std::string_view>> tokens(width);
    std::vector<std::size_t> missing(width, 0);
    auto stores_tokens = [&](std::size_t i) {
        const auto& r = layout[i];
        return i == label_pos || (r.role == ColumnRole::Feature && (!r.kind || *r.kind == FeatureKind::Categorical));
    };

    std::size_t n_rows = 0;
    auto consume = [&]() {
        if (fields.size() != width)
            fail(ErrorCode::Data, "RowWidthMismatch",
                 "row " + std::to_string(n_rows) + " (line " + std::to_string(reader.record_line()) + ") has " +
                     std::to_string(fields.size()) + " fields, expected " + std::to_string(width));
        for (std::size_t i = 0; i < width; ++i) {
            if (stores_tokens(i)) {
                tokens[i].push_back(fields[i]);
            } else if (layout[i].role == ColumnRole::Feature) {
                double v = *layout[i].kind == FeatureKind::Binary ? binary_value(fields[i])
                                                                  : parse_number(fields[i]).value_or(kMissing);
                if (std::isnan(v)) ++missing[i];
                numbers[i].push_back(v);
            }
        }
        ++n_rows;
    };
    if (have_first_record) consume();
    while (reader.next(fields, arena)) consume();

    TabularDataset ds;
    ds.n_rows = n_rows;
    ds.provenance.source = std::move(source);
    ds.provenance.digest = sha256_hex(text);

    try {
        ds.labels = binarize_labels(std::span<const std::string_view>(tokens[label_pos]), schema.label_spec);
    } catch (const Error& e) {
        if (e.kind() != "UnmappedToken") throw;
        const LabelSpec& spec = schema.label_spec;
        for (std::size_t r = 0; r < tokens[label_pos].size(); ++r) {
            const std::string t(trim(tokens[label_pos][r]));
            if (!spec.negative_tokens.count(t) && !spec.positive_tokens.count(t))
                fail(ErrorCode::Data, "LabelParseFailure", "row " + std::to_string(r) + ": label token '" + t + "'");
        }
        throw;
    }

    for (std::size_t i = 0; i < width; ++i) {
        Column col;
        col.schema.name = layout[i].name;
        col.schema.role = layout[i].role;
        col.schema.kind = layout[i].kind.value_or(FeatureKind::Numeric);
        if (col.schema.role != ColumnRole::Feature) {
            ds.columns.push_back(std::move(col));
            continue;
        }
        if (!layout[i].kind) col.schema.kind = n_rows == 0 ? FeatureKind::Numeric : infer_kind(tokens[i]);

        if (!stores_tokens(i)) {
            col.values = std::move(numbers[i]);
            col.missing = missing[i];
        } else if (col.schema.kind != FeatureKind::Categorical) {
            col.values.reserve(n_rows);
            for (const auto t : tokens[i]) {
                const double v = col.schema.kind == FeatureKind::Binary ? binary_value(t) : parse_number(t).value_or(kMissing);
                if (std::isnan(v)) ++col.missing;
                col.values.push_back(v);
            }
        } else {
            std::unordered_map<std::string_view, std::int32_t> index;
            std::vector<std::string_view> levels;
            col.codes.reserve(n_rows);
            for (auto t : tokens[i]) {
                t = trim(t);
                if (t.empty()) {
                    t = kMissingLevel;
                    ++col.missing;
                }
                auto [it, inserted] = index.try_emplace(t, static_cast<std::int32_t>(levels.size()));
                if (inserted) levels.push_back(t);
                col.codes.push_back(it->second);
            }
            std::vector<std::int32_t> order(levels.size());
            for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<std::int32_t>(k);
            std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) { return levels[a] < levels[b]; });
            std::vector<std::int32_t> remap(levels.size());
            for (std::size_t k = 0; k < order.size(); ++k) {
                remap[order[k]] = static_cast<std::int32_t>(k);
                col.schema.levels.emplace_back(levels[order[k]]);
            }
            for (auto& code : col.codes) code = remap[code];

            if (schema.level_guard_fraction &&
                static_cast<double>(col.schema.levels.size()) > *schema.level_guard_fraction * static_cast<double>(n_rows)) {
                col.schema.role = ColumnRole::Dropped;
                col.auto_dropped = true;
                col.codes.clear();
                col.codes.shrink_to_fit();
            }
        }
        ds.columns.push_back(std::move(col));
    }
    return ds;
}

DatasetSummary summarize(const TabularDataset& dataset) {
    DatasetSummary s;
    s.n_rows = dataset.n_rows;
    s.n_features = dataset.n_features();
    for (auto y : dataset.labels) (y ? s.count_y1 : s.count_y0)++;
    for (const auto& c : dataset.columns) {
        if (c.auto_dropped) s.auto_dropped.push_back(c.schema.name);
        if (!c.is_feature()) continue;
        s.missing[c.schema.name] = c.missing;
        if (c.schema.kind == FeatureKind::Categorical) {
            std::vector<std::size_t> counts(c.schema.levels.size(), 0);
            for (auto code : c.codes) ++counts[static_cast<std::size_t>(code)];
            auto& out = s.level_counts[c.schema.name];
            for (std::size_t k = 0; k < counts.size(); ++k) out[c.schema.levels[k]] = counts[k];
        }
    }
    return s;
}

std::string format_summary(const DatasetSummary& summary, std::string_view title) {
    std::ostringstream os;
    if (!title.empty()) os << title << "\n";
    os << "  Observations  " << with_thousands(summary.n_rows) << "\n";
    os << "  y = 0         " << with_thousands(summary.count_y0) << "\n";
    os << "  y = 1         " << with_thousands(summary.count_y1) << "\n";
    os << "  Features      " << summary.n_features << "\n";
    std::size_t total_missing = 0;
    for (const auto& [name, n] : summary.missing) total_missing += n;
    os << "  Missing cells " << with_thousands(total_missing) << "\n";
    for (const auto& [name, n] : summary.missing)
        if (n > 0) os << "    " << name << ": " << n << "\n";
    for (const auto& [name, levels] : summary.level_counts)
        os << "  Levels        " << name << ": " << levels.size() << "\n";
    if (!summary.auto_dropped.empty()) os << "  Auto-dropped  " << join(summary.auto_dropped) << "\n";
    return os.str();
}

json summary_to_json(const DatasetSummary& summary) {
    json j;
    j["n_rows"] = summary.n_rows;
    j["n_features"] = summary.n_features;
    j["count_y0"] = summary.count_y0;
    j["count_y1"] = summary.count_y1;
    j["missing"] = summary.missing;
    j["level_counts"] = summary.level_counts;
    j["auto_dropped"] = summary.auto_dropped;
    return j;
}

} // namespace ids
