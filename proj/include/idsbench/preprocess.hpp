#pragma once

#include "idsbench/dataset.hpp"
#include "idsbench/matrix.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ids {

struct SamplerConfig {
    std::uint64_t seed = 42;
};

/// Random under-sampling: every minority-class index plus an equal-size,
/// seeded, without-replacement subset of the majority class. Returned indices
/// are ascending.
std::vector<std::size_t> undersample(std::span<const std::uint8_t> labels, const SamplerConfig& cfg);

struct SplitPlan {
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
    std::vector<std::size_t> train_idx; // ascending positions into the label vector
    std::vector<std::size_t> test_idx;
};

/// Per-class shuffled split. The test set holds round(f * n) rows; per-class
/// shares are floor(f * n_c) plus a largest-remainder top-up whose ties are
/// broken by a seeded coin.
SplitPlan stratified_split(std::span<const std::uint8_t> labels, double test_fraction, std::uint64_t seed);

struct EncodedColumn {
    std::string source;
    FeatureKind kind = FeatureKind::Numeric;
    double mean = 0.0;
    double sd = 0.0; // 0 => constant column, encoded as 0
    std::vector<std::string> levels;
    std::size_t first_slot = 0;

    std::size_t width() const { return kind == FeatureKind::Categorical ? levels.size() : 1; }
};

struct EncoderState {
    std::vector<EncodedColumn> columns;
    std::vector<std::string> layout; // output column names
    std::string fitted_on;           // digest of (dataset digest, training row indices)

    std::size_t width() const { return layout.size(); }
    bool operator==(const EncoderState& o) const;
};

struct EncodedMatrix {
    Matrix x;
    Labels y;
    std::map<std::string, std::size_t> unseen_levels; // per categorical column
};

EncoderState fit_encoder(const TabularDataset& dataset, std::span<const std::size_t> train_rows);
EncodedMatrix encode(const EncoderState& state, const TabularDataset& dataset, std::span<const std::size_t> rows);

nlohmann::json encoder_to_json(const EncoderState& state);
EncoderState encoder_from_json(const nlohmann::json& doc);

struct FoldAssignment {
    std::size_t k = 0;
    std::vector<std::size_t> fold_of;
    std::uint64_t seed = 0;

    std::vector<std::size_t> members(std::size_t fold) const;
    std::vector<std::size_t> complement(std::size_t fold) const;
};

/// Stratified k-fold: each class is shuffled and dealt round-robin, with the
/// deal continuing across classes so fold sizes stay within one of each other.
FoldAssignment kfold(std::span<const std::uint8_t> labels, std::size_t k, std::uint64_t seed);

} // namespace ids
