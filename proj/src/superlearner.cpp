#include "idsbench/superlearner.hpp"

#include "idsbench/error.hpp"
#include "idsbench/parallel.hpp"
#include "idsbench/rng.hpp"

namespace ids {

namespace {

using nlohmann::json;

std::string short_name(Family f) {
    switch (f) {
    case Family::Glm: return "LR";
    case Family::RandomForest: return "RF";
    case Family::Gbm: return "GBM";
    case Family::Mlp: return "DL";
    }
    return "?";
}

[[noreturn]] void rethrow_annotated(const Error& e, const std::string& where) {
    throw Error(e.code(), e.kind(), where + ": " + e.detail());
}

} // namespace

LearnerSpec SuperLearnerSpec::fold_spec(std::size_t candidate, std::size_t fold) const {
    LearnerSpec s = candidates.at(candidate);
    s.seed = derive_seed(seed, "sl-fold", candidate, fold);
    return s;
}

LearnerSpec SuperLearnerSpec::refit_spec(std::size_t candidate) const {
    LearnerSpec s = candidates.at(candidate);
    s.seed = derive_seed(seed, "sl-refit", candidate);
    return s;
}

LearnerSpec SuperLearnerSpec::meta_spec() const {
    LearnerSpec s = meta;
    s.seed = derive_seed(seed, "sl-meta");
    return s;
}

std::uint64_t SuperLearnerSpec::fold_seed() const { return derive_seed(seed, "sl-kfold"); }

void validate(const SuperLearnerSpec& spec) {
    if (spec.candidates.empty()) fail(ErrorCode::Config, "InvalidSuperLearner", "candidate list is empty");
    for (const auto& c : spec.candidates) {
        if (c.family() == Family::Glm)
            fail(ErrorCode::Config, "InvalidSuperLearner", "the GLM family is not a stacking candidate");
        validate(c);
    }
    if (spec.meta.family() != Family::Mlp && spec.meta.family() != Family::Gbm)
        fail(ErrorCode::Config, "InvalidSuperLearner", "meta learner must be mlp or gbm");
    validate(spec.meta);
    if (spec.k < 2) fail(ErrorCode::Config, "InvalidSuperLearner", "k must be at least 2");
}

MetaFeatures build_meta_features(const Matrix& x, std::span<const std::uint8_t> y, const SuperLearnerSpec& spec,
                                 std::size_t workers) {
    validate(spec);
    return build_meta_features(x, y, spec, kfold(y, spec.k, spec.fold_seed()), workers);
}

MetaFeatures build_meta_features(const Matrix& x, std::span<const std::uint8_t> y, const SuperLearnerSpec& spec,
                                 const FoldAssignment& folds, std::size_t workers) {
    validate(spec);
    if (folds.fold_of.size() != x.rows)
        fail(ErrorCode::InvalidArgument, "FoldMismatch", "fold assignment does not cover the training rows");
    const std::size_t m = spec.candidates.size();
    MetaFeatures out;
    out.folds = folds;
    out.z = Matrix(x.rows, m);

    std::vector<std::vector<std::size_t>> held_out(folds.k), kept(folds.k);
    for (std::size_t f = 0; f < folds.k; ++f) {
        held_out[f] = folds.members(f);
        kept[f] = folds.complement(f);
    }
    // Each (candidate, fold) task writes only the rows of its own fold in its own column.
    parallel_for(m * folds.k, workers, [&](std::size_t task) {
        const std::size_t j = task / folds.k;
        const std::size_t f = task % folds.k;
        if (held_out[f].empty()) return;
        try {
            const Matrix xtr = x.select_rows(kept[f]);
            const Labels ytr = select(y, kept[f]);
            const TrainedModel model = train(spec.fold_spec(j, f), xtr, ytr, 1);
            const auto p = predict_proba(model, x.select_rows(held_out[f]));
            for (std::size_t i = 0; i < held_out[f].size(); ++i) out.z(held_out[f][i], j) = p[i];
        } catch (const Error& e) {
            rethrow_annotated(e, "fold " + std::to_string(f) + ", candidate " + std::to_string(j) + " (" +
                                     std::string(to_string(spec.candidates[j].family())) + ")");
        }
    });
    return out;
}

SuperLearnerModel fit_super_learner(const MetaFeatures& meta_features, std::span<const std::uint8_t> y,
                                    std::vector<TrainedModel> refit_bases, const SuperLearnerSpec& spec) {
    validate(spec);
    if (refit_bases.size() != spec.candidates.size())
        fail(ErrorCode::InvalidArgument, "CandidateMismatch", "one refit base per candidate is required");
    SuperLearnerModel model;
    model.spec = spec;
    model.bases = std::move(refit_bases);
    for (const auto& c : spec.candidates) model.candidate_order.push_back(short_name(c.family()));
    try {
        model.meta = train(spec.meta_spec(), meta_features.z, y, 1);
    } catch (const Error& e) {
        rethrow_annotated(e, "meta learner");
    }
    return model;
}

SuperLearnerModel train_super_learner(const Matrix& x, std::span<const std::uint8_t> y, const SuperLearnerSpec& spec,
                                      std::size_t workers) {
    const MetaFeatures mf = build_meta_features(x, y, spec, workers);
    std::vector<TrainedModel> bases(spec.candidates.size());
    for (std::size_t j = 0; j < spec.candidates.size(); ++j) {
        try {
            bases[j] = train(spec.refit_spec(j), x, y, workers);
        } catch (const Error& e) {
            rethrow_annotated(e, "refit candidate " + std::to_string(j));
        }
    }
    return fit_super_learner(mf, y, std::move(bases), spec);
}

std::vector<double> predict_super(const SuperLearnerModel& model, const Matrix& x) {
    Matrix z(x.rows, model.bases.size());
    for (std::size_t j = 0; j < model.bases.size(); ++j) {
        const auto p = predict_proba(model.bases[j], x);
        for (std::size_t i = 0; i < x.rows; ++i) z(i, j) = p[i];
    }
    return predict_proba(model.meta, z);
}

json super_spec_to_json(const SuperLearnerSpec& spec) {
    json cands = json::array();
    for (const auto& c : spec.candidates) cands.push_back(spec_to_json(c));
    return {{"candidates", cands}, {"meta", spec_to_json(spec.meta)}, {"k", spec.k}, {"seed", spec.seed}};
}

SuperLearnerSpec super_spec_from_json(const json& doc) {
    try {
        SuperLearnerSpec s;
        for (const auto& c : doc.at("candidates")) s.candidates.push_back(spec_from_json(c));
        s.meta = spec_from_json(doc.at("meta"));
        s.k = doc.at("k").get<std::size_t>();
        s.seed = doc.at("seed").get<std::uint64_t>();
        validate(s);
        return s;
    } catch (const json::exception& e) {
        fail(ErrorCode::Config, "InvalidSuperLearner", e.what());
    }
}

json super_to_json(const SuperLearnerModel& model) {
    json bases = json::array();
    for (const auto& b : model.bases) bases.push_back(model_to_json(b));
    return {{"format", "idsbench.superlearner"},
            {"version", 1},
            {"spec", super_spec_to_json(model.spec)},
            {"candidate_order", model.candidate_order},
            {"bases", bases},
            {"meta", model_to_json(model.meta)}};
}

SuperLearnerModel super_from_json(const json& doc) {
    try {
        if (doc.at("format") != "idsbench.superlearner" || doc.at("version") != 1)
            fail(ErrorCode::Config, "InvalidModel", "not an idsbench.superlearner v1 document");
        SuperLearnerModel m;
        m.spec = super_spec_from_json(doc.at("spec"));
        m.candidate_order = doc.at("candidate_order").get<std::vector<std::string>>();
        for (const auto& b : doc.at("bases")) m.bases.push_back(model_from_json(b));
        m.meta = model_from_json(doc.at("meta"));
        if (m.meta.width != m.bases.size())
            fail(ErrorCode::Config, "InvalidModel", "meta model width differs from the candidate count");
        return m;
    } catch (const json::exception& e) {
        fail(ErrorCode::Config, "InvalidModel", e.what());
    }
}

} // namespace ids
