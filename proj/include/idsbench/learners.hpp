#pragma once

#include "idsbench/matrix.hpp"
#include "idsbench/tree.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace ids {

enum class Family { Glm, RandomForest, Gbm, Mlp };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

struct GlmParams {
    double l2 = 1e-4;
    double learning_rate = 0.1;
    std::size_t iterations = 500;
};

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 0; // 0 = unlimited
    std::size_t min_samples_leaf = 1;
    std::size_t min_samples_split = 2;
    std::size_t mtry = 0; // 0 = ceil(sqrt(p))
    bool bootstrap = true;
};

struct GbmParams {
    std::size_t rounds = 100;
    std::size_t max_depth = 5;
    double shrinkage = 0.1;
    std::size_t min_samples_leaf = 10;
    double leaf_l2 = 1.0;
};

struct MlpParams {
    std::vector<std::size_t> hidden{64, 64};
    std::size_t batch_size = 128;
    std::size_t epochs = 20;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double l2 = 1e-5;
};

using LearnerParams = std::variant<GlmParams, ForestParams, GbmParams, MlpParams>;

struct LearnerSpec {
    LearnerParams params;
    std::uint64_t seed = 0;

    Family family() const { return static_cast<Family>(params.index()); }
    static LearnerSpec defaults(Family f, std::uint64_t seed = 0);
};

/// Throws InvalidHyperparameters.
void validate(const LearnerSpec& spec);

nlohmann::json spec_to_json(const LearnerSpec& spec);
LearnerSpec spec_from_json(const nlohmann::json& doc);
// Overlays the keys present in `overrides` onto `base` (same family).
LearnerSpec apply_overrides(const LearnerSpec& base, const nlohmann::json& overrides);

struct GlmModel {
    std::vector<double> weights;
    double bias = 0.0;
    double l2 = 0.0;
};

struct ForestModel {
    std::vector<Tree> trees; // leaf value = positive fraction
    std::vector<std::uint64_t> tree_seeds;
    std::size_t mtry = 0;
};

struct GbmModel {
    double prior = 0.0; // log-odds of the training base rate
    double shrinkage = 0.1;
    std::vector<Tree> trees; // leaf value = additive log-odds step

    double raw_score(std::span<const double> x) const;
};

struct MlpModel {
    // layer l maps sizes[l] -> sizes[l+1]; hidden layers use ReLU, output is logistic
    std::vector<std::size_t> sizes;
    std::vector<Eigen::MatrixXd> weights; // sizes[l] x sizes[l+1]
    std::vector<Eigen::VectorXd> biases;
};

using ModelVariant = std::variant<GlmModel, ForestModel, GbmModel, MlpModel>;

struct TrainedModel {
    ModelVariant model;
    LearnerSpec spec;
    std::size_t width = 0;
    std::string data_digest;
    double wall_seconds = 0.0; // not serialized

    Family family() const { return static_cast<Family>(model.index()); }
};

double sigmoid(double z);

// Loss helpers clamp probabilities to [1e-12, 1 - 1e-12] inside the logs.
double log_loss(std::span<const double> p, std::span<const std::uint8_t> y);

/// Mean logistic loss + l2/2 * |w|^2 and its analytic gradient.
double glm_objective(const GlmModel& model, const Matrix& x, std::span<const std::uint8_t> y, double l2,
                     std::vector<double>* grad_w = nullptr, double* grad_b = nullptr);

struct MlpGradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

/// Mean cross-entropy + l2/2 * sum |W|^2 over the given rows, with gradients
/// by backpropagation.
double mlp_objective(const MlpModel& model, const Matrix& x, std::span<const std::uint8_t> y, double l2,
                     MlpGradient* grad = nullptr);

MlpModel init_mlp(std::size_t inputs, const std::vector<std::size_t>& hidden, std::uint64_t seed);

GlmModel train_glm(const Matrix& x, std::span<const std::uint8_t> y, const GlmParams& params);
ForestModel train_random_forest(const Matrix& x, std::span<const std::uint8_t> y, const ForestParams& params,
                                std::uint64_t seed, std::size_t workers = 1);

// `loss_trace`, when given, receives the training log loss before the first
// round and after every round.
GbmModel train_gbm(const Matrix& x, std::span<const std::uint8_t> y, const GbmParams& params,
                   std::vector<double>* loss_trace = nullptr);
MlpModel train_mlp(const Matrix& x, std::span<const std::uint8_t> y, const MlpParams& params, std::uint64_t seed);

/// Dispatches on spec.params and records training metadata.
TrainedModel train(const LearnerSpec& spec, const Matrix& x, std::span<const std::uint8_t> y, std::size_t workers = 1);

std::vector<double> predict_proba(const TrainedModel& model, const Matrix& x);
std::vector<double> predict_proba(const ModelVariant& model, const Matrix& x);

std::string matrix_digest(const Matrix& x, std::span<const std::uint8_t> y);

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& doc);

} // namespace ids
