#pragma once

#include "idsbench/learners.hpp"
#include "idsbench/preprocess.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace ids {

/// Candidates are scored out-of-fold to build the meta-learner's inputs; the
/// candidate order fixes the meta-feature column order.
///
/// Seed substreams, all from `seed`:
///   folds            derive_seed(seed, "sl-kfold")
///   fold model j,f   derive_seed(seed, "sl-fold", j, f)
///   refit model j    derive_seed(seed, "sl-refit", j)
///   meta model       derive_seed(seed, "sl-meta")
struct SuperLearnerSpec {
    std::vector<LearnerSpec> candidates;
    LearnerSpec meta;
    std::size_t k = 5;
    std::uint64_t seed = 42;

    LearnerSpec fold_spec(std::size_t candidate, std::size_t fold) const;
    LearnerSpec refit_spec(std::size_t candidate) const;
    LearnerSpec meta_spec() const;
    std::uint64_t fold_seed() const;
};

// Candidates non-empty, no GLM; meta is an MLP or a GBM.
void validate(const SuperLearnerSpec& spec);

struct MetaFeatures {
    Matrix z;              // n_train x |candidates| out-of-fold probabilities
    FoldAssignment folds;  // z(i, j) came from a model trained without fold folds.fold_of[i]
};

MetaFeatures build_meta_features(const Matrix& x, std::span<const std::uint8_t> y, const SuperLearnerSpec& spec,
                                 std::size_t workers = 1);
// Same, with an explicit fold assignment (e.g. leave-one-out).
MetaFeatures build_meta_features(const Matrix& x, std::span<const std::uint8_t> y, const SuperLearnerSpec& spec,
                                 const FoldAssignment& folds, std::size_t workers = 1);

struct SuperLearnerModel {
    std::vector<TrainedModel> bases; // refit on all training rows, candidate order
    TrainedModel meta;
    std::vector<std::string> candidate_order;
    SuperLearnerSpec spec;
};

SuperLearnerModel train_super_learner(const Matrix& x, std::span<const std::uint8_t> y, const SuperLearnerSpec& spec,
                                      std::size_t workers = 1);

/// Second stage only: fits the meta model on precomputed meta-features and
/// pairs it with already refit bases (which must come from spec.refit_spec).
SuperLearnerModel fit_super_learner(const MetaFeatures& meta_features, std::span<const std::uint8_t> y,
                                    std::vector<TrainedModel> refit_bases, const SuperLearnerSpec& spec);

std::vector<double> predict_super(const SuperLearnerModel& model, const Matrix& x);

nlohmann::json super_spec_to_json(const SuperLearnerSpec& spec);
SuperLearnerSpec super_spec_from_json(const nlohmann::json& doc);
nlohmann::json super_to_json(const SuperLearnerModel& model);
SuperLearnerModel super_from_json(const nlohmann::json& doc);

} // namespace ids
