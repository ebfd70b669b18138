#include "idsbench/preprocess.hpp"

#include "idsbench/digest.hpp"
#include "idsbench/error.hpp"
#include "idsbench/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace ids {

namespace {

using nlohmann::json;

std::array<std::vector<std::size_t>, 2> split_by_class(std::span<const std::uint8_t> labels) {
    std::array<std::vector<std::size_t>, 2> out;
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i] ? 1 : 0].push_back(i);
    return out;
}

const Column& find_column(const TabularDataset& ds, const std::string& name) {
    for (const auto& c : ds.columns)
        if (c.schema.name == name) return c;
    fail(ErrorCode::Data, "SchemaMismatch", "column '" + name + "' is not present in the dataset");
}

double raw_value(const Column& c, std::size_t row) {
    const double v = c.values[row];
    return std::isnan(v) ? 0.0 : v; // missing numeric/binary imputes 0
}

} // namespace

std::vector<std::size_t> undersample(std::span<const std::uint8_t> labels, const SamplerConfig& cfg) {
    auto by_class = split_by_class(labels);
    if (by_class[0].empty() || by_class[1].empty())
        fail(ErrorCode::Data, "SingleClassInput", "under-sampling needs both classes present");
    const std::size_t minority = by_class[0].size() <= by_class[1].size() ? 0 : 1;
    auto& keep = by_class[minority];
    auto& pool = by_class[1 - minority];
    const std::size_t m = keep.size();

    Rng rng(cfg.seed);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> out(keep);
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(out.begin(), out.end());
    return out;
}

SplitPlan stratified_split(std::span<const std::uint8_t> labels, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        fail(ErrorCode::Config, "InvalidArgument", "test_fraction must lie in (0, 1)");
    auto by_class = split_by_class(labels);
    const double n = static_cast<double>(labels.size());
    const auto total_test = static_cast<std::size_t>(std::floor(test_fraction * n + 0.5));

    std::array<std::size_t, 2> take{};
    std::array<double, 2> frac{};
    for (std::size_t c = 0; c < 2; ++c) {
        const double exact = test_fraction * static_cast<double>(by_class[c].size());
        take[c] = static_cast<std::size_t>(std::floor(exact));
        frac[c] = exact - std::floor(exact);
    }
    Rng rng(seed);
    std::size_t remaining = total_test > take[0] + take[1] ? total_test - take[0] - take[1] : 0;
    std::array<std::size_t, 2> order{0, 1};
    if (frac[1] > frac[0] || (frac[1] == frac[0] && rng.below(2) == 1)) order = {1, 0};
    for (std::size_t c : order) {
        if (remaining == 0) break;
        if (take[c] < by_class[c].size()) {
            ++take[c];
            --remaining;
        }
    }

    SplitPlan plan;
    plan.test_fraction = test_fraction;
    plan.seed = seed;
    for (std::size_t c = 0; c < 2; ++c) {
        if (take[c] == 0 || take[c] >= by_class[c].size())
            fail(ErrorCode::Data, "DegenerateSplit",
                 "class " + std::to_string(c) + " with " + std::to_string(by_class[c].size()) + " rows would get " +
                     std::to_string(take[c]) + " test rows");
        auto& idx = by_class[c];
        rng.shuffle(std::span<std::size_t>(idx));
        plan.test_idx.insert(plan.test_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]));
        plan.train_idx.insert(plan.train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]), idx.end());
    }
    std::sort(plan.train_idx.begin(), plan.train_idx.end());
    std::sort(plan.test_idx.begin(), plan.test_idx.end());
    return plan;
}

bool EncoderState::operator==(const EncoderState& o) const {
    if (layout != o.layout || fitted_on != o.fitted_on || columns.size() != o.columns.size()) return false;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        const auto& a = columns[i];
        const auto& b = o.columns[i];
        if (a.source != b.source || a.kind != b.kind || a.mean != b.mean || a.sd != b.sd || a.levels != b.levels ||
            a.first_slot != b.first_slot)
            return false;
    }
    return true;
}

EncoderState fit_encoder(const TabularDataset& dataset, std::span<const std::size_t> train_rows) {
    if (train_rows.empty()) fail(ErrorCode::Data, "EmptyTrainingSet", "cannot fit an encoder on zero rows");
    EncoderState state;
    std::size_t slot = 0;
    for (const auto& col : dataset.columns) {
        if (!col.is_feature()) continue;
        EncodedColumn enc;
        enc.source = col.schema.name;
        enc.kind = col.schema.kind;
        enc.first_slot = slot;
        switch (col.schema.kind) {
        case FeatureKind::Numeric: {
            double sum = 0.0;
            double lo = raw_value(col, train_rows[0]);
            double hi = lo;
            for (auto r : train_rows) {
                const double v = raw_value(col, r);
                sum += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            const double n = static_cast<double>(train_rows.size());
            enc.mean = sum / n;
            if (lo != hi) {
                double ss = 0.0;
                for (auto r : train_rows) {
                    const double d = raw_value(col, r) - enc.mean;
                    ss += d * d;
                }
                enc.sd = std::sqrt(ss / n);
            }
            state.layout.push_back(enc.source);
            break;
        }
        case FeatureKind::Binary:
            state.layout.push_back(enc.source);
            break;
        case FeatureKind::Categorical: {
            std::vector<bool> seen(col.schema.levels.size(), false);
            for (auto r : train_rows) seen[static_cast<std::size_t>(col.codes[r])] = true;
            for (std::size_t k = 0; k < seen.size(); ++k)
                if (seen[k]) enc.levels.push_back(col.schema.levels[k]);
            for (const auto& level : enc.levels) state.layout.push_back(enc.source + "=" + level);
            break;
        }
        }
        slot += enc.width();
        state.columns.push_back(std::move(enc));
    }
    Sha256 h;
    h.update(dataset.provenance.digest);
    h.update_span(train_rows);
    state.fitted_on = h.hex();
    return state;
}

EncodedMatrix encode(const EncoderState& state, const TabularDataset& dataset, std::span<const std::size_t> rows) {
    EncodedMatrix out;
    out.x = Matrix(rows.size(), state.width());
    out.y.reserve(rows.size());
    for (auto r : rows) {
        if (r >= dataset.n_rows) fail(ErrorCode::InvalidArgument, "RowOutOfRange", "row " + std::to_string(r));
        out.y.push_back(dataset.labels[r]);
    }
    for (const auto& enc : state.columns) {
        const Column& col = find_column(dataset, enc.source);
        if (!col.is_feature() || col.schema.kind != enc.kind)
            fail(ErrorCode::Data, "SchemaMismatch", "column '" + enc.source + "' changed kind or role since fitting");
        switch (enc.kind) {
        case FeatureKind::Numeric:
            for (std::size_t i = 0; i < rows.size(); ++i)
                out.x(i, enc.first_slot) = enc.sd > 0.0 ? (raw_value(col, rows[i]) - enc.mean) / enc.sd : 0.0;
            break;
        case FeatureKind::Binary:
            for (std::size_t i = 0; i < rows.size(); ++i) out.x(i, enc.first_slot) = raw_value(col, rows[i]);
            break;
        case FeatureKind::Categorical: {
            // dataset level code -> output slot offset, or -1 when unseen in training
            std::vector<std::ptrdiff_t> slot_of(col.schema.levels.size(), -1);
            for (std::size_t k = 0; k < col.schema.levels.size(); ++k) {
                auto it = std::lower_bound(enc.levels.begin(), enc.levels.end(), col.schema.levels[k]);
                if (it != enc.levels.end() && *it == col.schema.levels[k]) slot_of[k] = it - enc.levels.begin();
            }
            std::size_t unseen = 0;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto s = slot_of[static_cast<std::size_t>(col.codes[rows[i]])];
                if (s < 0) ++unseen;
                else out.x(i, enc.first_slot + static_cast<std::size_t>(s)) = 1.0;
            }
            if (unseen) out.unseen_levels[enc.source] = unseen;
            break;
        }
        }
    }
    return out;
}

json encoder_to_json(const EncoderState& state) {
    json cols = json::array();
    for (const auto& c : state.columns) {
        json j{{"source", c.source}, {"kind", std::string(to_string(c.kind))}, {"first_slot", c.first_slot}};
        if (c.kind == FeatureKind::Numeric) {
            j["mean"] = c.mean;
            j["sd"] = c.sd;
        }
        if (c.kind == FeatureKind::Categorical) j["levels"] = c.levels;
        cols.push_back(std::move(j));
    }
    return {{"format", "idsbench.encoder"}, {"version", 1}, {"columns", cols}, {"layout", state.layout},
            {"fitted_on", state.fitted_on}};
}

EncoderState encoder_from_json(const json& doc) {
    try {
        EncoderState s;
        for (const auto& j : doc.at("columns")) {
            EncodedColumn c;
            c.source = j.at("source").get<std::string>();
            const auto kind = j.at("kind").get<std::string>();
            c.kind = kind == "categorical" ? FeatureKind::Categorical
                     : kind == "binary"    ? FeatureKind::Binary
                                           : FeatureKind::Numeric;
            c.first_slot = j.at("first_slot").get<std::size_t>();
            c.mean = j.value("mean", 0.0);
            c.sd = j.value("sd", 0.0);
            if (j.contains("levels")) c.levels = j["levels"].get<std::vector<std::string>>();
            s.columns.push_back(std::move(c));
        }
        s.layout = doc.at("layout").get<std::vector<std::string>>();
        s.fitted_on = doc.value("fitted_on", std::string{});
        return s;
    } catch (const json::exception& e) {
        fail(ErrorCode::Config, "InvalidEncoder", e.what());
    }
}

std::vector<std::size_t> FoldAssignment::members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::complement(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold) out.push_back(i);
    return out;
}

FoldAssignment kfold(std::span<const std::uint8_t> labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) fail(ErrorCode::Config, "InvalidArgument", "k must be at least 2");
    auto by_class = split_by_class(labels);
    for (std::size_t c = 0; c < 2; ++c)
        if (by_class[c].size() < k)
            fail(ErrorCode::Data, "TooFewRowsPerClass",
                 "class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) + " rows, k = " + std::to_string(k));
    FoldAssignment fa;
    fa.k = k;
    fa.seed = seed;
    fa.fold_of.assign(labels.size(), 0);
    Rng rng(seed);
    std::size_t offset = 0;
    for (auto& idx : by_class) {
        rng.shuffle(std::span<std::size_t>(idx));
        for (std::size_t t = 0; t < idx.size(); ++t) fa.fold_of[idx[t]] = (offset + t) % k;
        offset += idx.size();
    }
    return fa;
}

} // namespace ids
