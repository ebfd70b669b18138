#include "idsbench/learners.hpp"

#include "idsbench/digest.hpp"
#include "idsbench/error.hpp"
#include "idsbench/parallel.hpp"
#include "idsbench/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace ids {

namespace {

using nlohmann::json;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;

constexpr double kProbFloor = 1e-12;

[[noreturn]] void bad_hyper(const std::string& what) { fail(ErrorCode::Config, "InvalidHyperparameters", what); }

void check_xy(const Matrix& x, std::span<const std::uint8_t> y) {
    if (x.rows != y.size())
        fail(ErrorCode::InvalidArgument, "ShapeMismatch",
             std::to_string(x.rows) + " rows but " + std::to_string(y.size()) + " labels");
}

void check_width(const Matrix& x, std::size_t width) {
    if (x.cols != width)
        fail(ErrorCode::InvalidArgument, "WidthMismatch",
             "model expects " + std::to_string(width) + " columns, got " + std::to_string(x.cols));
}

ConstRowMap as_eigen(const Matrix& x) { return ConstRowMap(x.data.data(), static_cast<Eigen::Index>(x.rows), static_cast<Eigen::Index>(x.cols)); }

double bce(double p, std::uint8_t y) {
    const double q = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    return y ? -std::log(q) : -std::log(1.0 - q);
}

// Forward + optional backward pass of an MLP over one batch.
double mlp_batch(const MlpModel& m, const Eigen::Ref<const RowMat>& xb, std::span<const std::uint8_t> yb, double l2,
                 MlpGradient* grad) {
    const std::size_t layers = m.weights.size();
    const auto b = xb.rows();
    std::vector<Eigen::MatrixXd> acts;   // post-activation, acts[0] = input
    std::vector<Eigen::MatrixXd> pre;    // pre-activation per layer
    acts.reserve(layers + 1);
    pre.reserve(layers);
    acts.emplace_back(xb);
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z = acts.back() * m.weights[l];
        z.rowwise() += m.biases[l].transpose();
        pre.push_back(z);
        if (l + 1 < layers) acts.emplace_back(z.cwiseMax(0.0));
        else acts.emplace_back(z.unaryExpr([](double v) { return sigmoid(v); }));
    }
    const Eigen::MatrixXd& p = acts.back();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) loss += bce(p(i, 0), yb[static_cast<std::size_t>(i)]);
    loss /= static_cast<double>(b);
    double reg = 0.0;
    for (const auto& w : m.weights) reg += w.squaredNorm();
    loss += 0.5 * l2 * reg;
    if (!grad) return loss;

    grad->weights.resize(layers);
    grad->biases.resize(layers);
    Eigen::MatrixXd delta(b, 1);
    for (Eigen::Index i = 0; i < b; ++i)
        delta(i, 0) = (p(i, 0) - static_cast<double>(yb[static_cast<std::size_t>(i)])) / static_cast<double>(b);
    for (std::size_t l = layers; l-- > 0;) {
        grad->weights[l] = acts[l].transpose() * delta + l2 * m.weights[l];
        grad->biases[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd back = delta * m.weights[l].transpose();
            delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return loss;
}

json tree_to_json(const Tree& t) {
    json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
         value = json::array();
    for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

Tree tree_from_json(const json& j, std::size_t width) {
    Tree t;
    const auto feature = j.at("feature").get<std::vector<std::int32_t>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<std::int32_t>>();
    const auto right = j.at("right").get<std::vector<std::int32_t>>();
    const auto value = j.at("value").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || n == 0)
        fail(ErrorCode::Config, "InvalidModel", "tree arrays disagree in length");
    t.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        t.nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i]};
        if (feature[i] >= 0) {
            // children must point forward so every path terminates
            if (static_cast<std::size_t>(feature[i]) >= width || left[i] <= static_cast<std::int32_t>(i) ||
                right[i] <= static_cast<std::int32_t>(i) || static_cast<std::size_t>(left[i]) >= n ||
                static_cast<std::size_t>(right[i]) >= n)
                fail(ErrorCode::Config, "InvalidModel", "malformed tree node " + std::to_string(i));
        }
    }
    return t;
}

json eigen_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    return flat;
}

Eigen::MatrixXd eigen_from_json(const json& j, std::size_t rows, std::size_t cols) {
    const auto flat = j.get<std::vector<double>>();
    if (flat.size() != rows * cols) fail(ErrorCode::Config, "InvalidModel", "weight matrix has wrong size");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * cols + c];
    return m;
}

json params_to_json(const LearnerParams& p) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, GlmParams>) {
                return {{"l2", v.l2}, {"learning_rate", v.learning_rate}, {"iterations", v.iterations}};
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                return {{"n_trees", v.n_trees}, {"max_depth", v.max_depth}, {"min_samples_leaf", v.min_samples_leaf},
                        {"min_samples_split", v.min_samples_split}, {"mtry", v.mtry}, {"bootstrap", v.bootstrap}};
            } else if constexpr (std::is_same_v<T, GbmParams>) {
                return {{"rounds", v.rounds}, {"max_depth", v.max_depth}, {"shrinkage", v.shrinkage},
                        {"min_samples_leaf", v.min_samples_leaf}, {"leaf_l2", v.leaf_l2}};
            } else {
                return {{"hidden", v.hidden}, {"batch_size", v.batch_size}, {"epochs", v.epochs},
                        {"learning_rate", v.learning_rate}, {"momentum", v.momentum}, {"l2", v.l2}};
            }
        },
        p);
}

std::size_t as_count(const json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad_hyper(key + " must be a non-negative integer");
    return v.get<std::size_t>();
}

std::size_t count(const json& j, const std::string& key) { return as_count(j.at(key), key); }

std::vector<std::size_t> counts(const json& j, const std::string& key) {
    const json& v = j.at(key);
    if (!v.is_array()) bad_hyper(key + " must be an array of layer sizes");
    std::vector<std::size_t> out;
    for (const auto& e : v) out.push_back(as_count(e, key));
    return out;
}

LearnerParams params_from_json(Family f, const json& j) {
    switch (f) {
    case Family::Glm:
        return GlmParams{j.at("l2").get<double>(), j.at("learning_rate").get<double>(), count(j, "iterations")};
    case Family::RandomForest:
        return ForestParams{count(j, "n_trees"), count(j, "max_depth"),
                            count(j, "min_samples_leaf"), count(j, "min_samples_split"),
                            count(j, "mtry"), j.at("bootstrap").get<bool>()};
    case Family::Gbm:
        return GbmParams{count(j, "rounds"), count(j, "max_depth"),
                         j.at("shrinkage").get<double>(), count(j, "min_samples_leaf"),
                         j.at("leaf_l2").get<double>()};
    case Family::Mlp:
        return MlpParams{counts(j, "hidden"), count(j, "batch_size"),
                         count(j, "epochs"), j.at("learning_rate").get<double>(),
                         j.at("momentum").get<double>(), j.at("l2").get<double>()};
    }
    bad_hyper("unknown family");
}

} // namespace

std::string_view to_string(Family f) {
    switch (f) {
    case Family::Glm: return "glm";
    case Family::RandomForest: return "random_forest";
    case Family::Gbm: return "gbm";
    case Family::Mlp: return "mlp";
    }
    return "glm";
}

Family family_from_string(std::string_view s) {
    if (s == "glm") return Family::Glm;
    if (s == "random_forest") return Family::RandomForest;
    if (s == "gbm") return Family::Gbm;
    if (s == "mlp") return Family::Mlp;
    fail(ErrorCode::Config, "InvalidHyperparameters", "unknown learner family '" + std::string(s) + "'");
}

LearnerSpec LearnerSpec::defaults(Family f, std::uint64_t seed) {
    LearnerSpec s;
    s.seed = seed;
    switch (f) {
    case Family::Glm: s.params = GlmParams{}; break;
    case Family::RandomForest: s.params = ForestParams{}; break;
    case Family::Gbm: s.params = GbmParams{}; break;
    case Family::Mlp: s.params = MlpParams{}; break;
    }
    return s;
}

void validate(const LearnerSpec& spec) {
    std::visit(
        [](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, GlmParams>) {
                if (!(v.l2 >= 0.0)) bad_hyper("glm l2 must be >= 0");
                if (!(v.learning_rate > 0.0 && v.learning_rate <= 1.0)) bad_hyper("glm learning_rate must lie in (0, 1]");
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                if (v.n_trees < 1) bad_hyper("forest n_trees must be >= 1");
                if (v.min_samples_leaf < 1) bad_hyper("forest min_samples_leaf must be >= 1");
                if (v.min_samples_split < 2) bad_hyper("forest min_samples_split must be >= 2");
            } else if constexpr (std::is_same_v<T, GbmParams>) {
                if (v.max_depth < 1) bad_hyper("gbm max_depth must be >= 1");
                if (!(v.shrinkage >= 0.0 && v.shrinkage <= 1.0)) bad_hyper("gbm shrinkage must lie in [0, 1]");
                if (v.min_samples_leaf < 1) bad_hyper("gbm min_samples_leaf must be >= 1");
                if (!(v.leaf_l2 > 0.0)) bad_hyper("gbm leaf_l2 must be > 0");
            } else {
                if (v.batch_size < 1) bad_hyper("mlp batch_size must be >= 1");
                if (!(v.learning_rate > 0.0 && v.learning_rate <= 1.0)) bad_hyper("mlp learning_rate must lie in (0, 1]");
                if (!(v.momentum >= 0.0 && v.momentum < 1.0)) bad_hyper("mlp momentum must lie in [0, 1)");
                if (!(v.l2 >= 0.0)) bad_hyper("mlp l2 must be >= 0");
                for (auto h : v.hidden)
                    if (h < 1) bad_hyper("mlp hidden layer sizes must be >= 1");
            }
        },
        spec.params);
}

json spec_to_json(const LearnerSpec& spec) {
    return {{"family", std::string(to_string(spec.family()))}, {"seed", spec.seed}, {"hyperparameters", params_to_json(spec.params)}};
}

LearnerSpec spec_from_json(const json& doc) {
    try {
        LearnerSpec s;
        const Family f = family_from_string(doc.at("family").get<std::string>());
        s.seed = doc.value("seed", std::uint64_t{0});
        s = apply_overrides(LearnerSpec::defaults(f, s.seed), doc.value("hyperparameters", json::object()));
        return s;
    } catch (const json::exception& e) {
        bad_hyper(e.what());
    }
}

LearnerSpec apply_overrides(const LearnerSpec& base, const json& overrides) {
    if (!overrides.is_object()) bad_hyper("hyperparameter overrides must be a JSON object");
    json merged = params_to_json(base.params);
    for (const auto& [key, value] : overrides.items()) {
        if (!merged.contains(key))
            bad_hyper("unknown " + std::string(to_string(base.family())) + " hyperparameter '" + key + "'");
        merged[key] = value;
    }
    LearnerSpec out = base;
    try {
        out.params = params_from_json(base.family(), merged);
    } catch (const json::exception& e) {
        bad_hyper(e.what());
    }
    validate(out);
    return out;
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log_loss(std::span<const double> p, std::span<const std::uint8_t> y) {
    if (p.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += bce(p[i], y[i]);
    return s / static_cast<double>(p.size());
}

double glm_objective(const GlmModel& model, const Matrix& x, std::span<const std::uint8_t> y, double l2,
                     std::vector<double>* grad_w, double* grad_b) {
    check_xy(x, y);
    const auto X = as_eigen(x);
    const Eigen::Map<const Eigen::VectorXd> w(model.weights.data(), static_cast<Eigen::Index>(model.weights.size()));
    const double n = static_cast<double>(x.rows);
    Eigen::VectorXd z = X * w;
    Eigen::VectorXd resid(z.size());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double p = sigmoid(z(i) + model.bias);
        const auto yi = y[static_cast<std::size_t>(i)];
        loss += bce(p, yi);
        resid(i) = p - static_cast<double>(yi);
    }
    loss = (x.rows ? loss / n : 0.0) + 0.5 * l2 * w.squaredNorm();
    if (grad_w) {
        Eigen::VectorXd g = x.rows ? Eigen::VectorXd(X.transpose() * resid / n) : Eigen::VectorXd::Zero(w.size());
        g += l2 * w;
        grad_w->assign(g.data(), g.data() + g.size());
    }
    if (grad_b) *grad_b = x.rows ? resid.sum() / n : 0.0;
    return loss;
}

GlmModel train_glm(const Matrix& x, std::span<const std::uint8_t> y, const GlmParams& params) {
    check_xy(x, y);
    GlmModel m;
    m.weights.assign(x.cols, 0.0);
    m.l2 = params.l2;
    std::vector<double> gw;
    double gb = 0.0;
    for (std::size_t it = 0; it < params.iterations; ++it) {
        const double loss = glm_objective(m, x, y, params.l2, &gw, &gb);
        if (!std::isfinite(loss))
            fail(ErrorCode::Training, "NonFiniteLoss", "glm loss diverged at iteration " + std::to_string(it));
        for (std::size_t j = 0; j < gw.size(); ++j) m.weights[j] -= params.learning_rate * gw[j];
        m.bias -= params.learning_rate * gb;
    }
    return m;
}

ForestModel train_random_forest(const Matrix& x, std::span<const std::uint8_t> y, const ForestParams& params,
                                std::uint64_t seed, std::size_t workers) {
    check_xy(x, y);
    ForestModel f;
    const std::size_t p = x.cols;
    f.mtry = params.mtry ? std::min(params.mtry, p) : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
    f.trees.resize(params.n_trees);
    f.tree_seeds.resize(params.n_trees);
    for (std::size_t t = 0; t < params.n_trees; ++t) f.tree_seeds[t] = derive_seed(seed, "forest-tree", t);

    const PresortedData data(x);
    const TreeParams tp{params.max_depth, params.min_samples_split, params.min_samples_leaf, f.mtry};
    parallel_for(params.n_trees, workers, [&](std::size_t t) {
        Rng rng(f.tree_seeds[t]);
        std::vector<double> weight(x.rows, params.bootstrap ? 0.0 : 1.0);
        if (params.bootstrap)
            for (std::size_t i = 0; i < x.rows; ++i) weight[static_cast<std::size_t>(rng.below(x.rows))] += 1.0;
        f.trees[t] = grow_gini_tree(data, GiniCriterion{y, weight}, tp, rng);
    });
    return f;
}

double GbmModel::raw_score(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x);
    return prior + shrinkage * s;
}

GbmModel train_gbm(const Matrix& x, std::span<const std::uint8_t> y, const GbmParams& params,
                   std::vector<double>* loss_trace) {
    check_xy(x, y);
    GbmModel m;
    m.shrinkage = params.shrinkage;
    const std::size_t n = x.rows;
    double pos = 0.0;
    for (auto v : y) pos += v;
    const double base = std::clamp(n ? pos / static_cast<double>(n) : 0.5, kProbFloor, 1.0 - kProbFloor);
    m.prior = std::log(base / (1.0 - base));

    std::vector<double> raw(n, m.prior), prob(n), grad(n), hess(n);
    auto refresh = [&] {
        for (std::size_t i = 0; i < n; ++i) prob[i] = sigmoid(raw[i]);
        if (loss_trace) loss_trace->push_back(log_loss(prob, y));
    };
    refresh();
    if (params.shrinkage == 0.0 || n == 0) return m;

    const PresortedData data(x);
    const TreeParams tp{params.max_depth, 2 * params.min_samples_leaf, params.min_samples_leaf, 0};
    Rng unused(0);
    for (std::size_t round = 0; round < params.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            grad[i] = prob[i] - static_cast<double>(y[i]);
            hess[i] = prob[i] * (1.0 - prob[i]);
        }
        Tree tree = grow_newton_tree(data, NewtonCriterion{grad, hess, params.leaf_l2}, tp, unused);
        for (std::size_t i = 0; i < n; ++i) raw[i] += params.shrinkage * tree.predict(x.row(i));
        m.trees.push_back(std::move(tree));
        refresh();
    }
    return m;
}

MlpModel init_mlp(std::size_t inputs, const std::vector<std::size_t>& hidden, std::uint64_t seed) {
    MlpModel m;
    m.sizes.push_back(inputs);
    m.sizes.insert(m.sizes.end(), hidden.begin(), hidden.end());
    m.sizes.push_back(1);
    Rng rng(derive_seed(seed, "mlp-init"));
    for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(m.sizes[l]);
        const auto out = static_cast<Eigen::Index>(m.sizes[l + 1]);
        const double a = std::sqrt(6.0 / static_cast<double>(std::max<Eigen::Index>(in, 1)));
        Eigen::MatrixXd w(in, out);
        for (Eigen::Index i = 0; i < in; ++i)
            for (Eigen::Index j = 0; j < out; ++j) w(i, j) = rng.uniform(-a, a);
        m.weights.push_back(std::move(w));
        m.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    return m;
}

double mlp_objective(const MlpModel& model, const Matrix& x, std::span<const std::uint8_t> y, double l2, MlpGradient* grad) {
    check_xy(x, y);
    check_width(x, model.sizes.front());
    if (x.rows == 0) fail(ErrorCode::InvalidArgument, "EmptyBatch", "mlp objective needs at least one row");
    return mlp_batch(model, as_eigen(x), y, l2, grad);
}

MlpModel train_mlp(const Matrix& x, std::span<const std::uint8_t> y, const MlpParams& params, std::uint64_t seed) {
    check_xy(x, y);
    MlpModel m = init_mlp(x.cols, params.hidden, seed);
    if (x.rows == 0) return m;
    std::vector<Eigen::MatrixXd> vw;
    std::vector<Eigen::VectorXd> vb;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        vw.push_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
        vb.push_back(Eigen::VectorXd::Zero(m.biases[l].size()));
    }
    const auto X = as_eigen(x);
    std::vector<std::size_t> perm(x.rows);
    RowMat xb;
    std::vector<std::uint8_t> yb;
    MlpGradient g;
    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng(derive_seed(seed, "mlp-epoch", epoch));
        rng.shuffle(std::span<std::size_t>(perm));
        for (std::size_t start = 0; start < x.rows; start += params.batch_size) {
            const std::size_t bsz = std::min(params.batch_size, x.rows - start);
            xb.resize(static_cast<Eigen::Index>(bsz), X.cols());
            yb.resize(bsz);
            for (std::size_t i = 0; i < bsz; ++i) {
                xb.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(perm[start + i]));
                yb[i] = y[perm[start + i]];
            }
            const double loss = mlp_batch(m, xb, yb, params.l2, &g);
            if (!std::isfinite(loss))
                fail(ErrorCode::Training, "NonFiniteLoss", "mlp loss diverged in epoch " + std::to_string(epoch));
            for (std::size_t l = 0; l < m.weights.size(); ++l) {
                vw[l] = params.momentum * vw[l] - params.learning_rate * g.weights[l];
                vb[l] = params.momentum * vb[l] - params.learning_rate * g.biases[l];
                m.weights[l] += vw[l];
                m.biases[l] += vb[l];
            }
        }
    }
    return m;
}

TrainedModel train(const LearnerSpec& spec, const Matrix& x, std::span<const std::uint8_t> y, std::size_t workers) {
    validate(spec);
    check_xy(x, y);
    for (double v : x.data)
        if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "NonFiniteInput", "design matrix contains non-finite values");
    const auto t0 = std::chrono::steady_clock::now();
    TrainedModel out;
    out.spec = spec;
    out.width = x.cols;
    out.data_digest = matrix_digest(x, y);
    switch (spec.family()) {
    case Family::Glm: out.model = train_glm(x, y, std::get<GlmParams>(spec.params)); break;
    case Family::RandomForest:
        out.model = train_random_forest(x, y, std::get<ForestParams>(spec.params), spec.seed, workers);
        break;
    case Family::Gbm: out.model = train_gbm(x, y, std::get<GbmParams>(spec.params)); break;
    case Family::Mlp: out.model = train_mlp(x, y, std::get<MlpParams>(spec.params), spec.seed); break;
    }
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

std::vector<double> predict_proba(const ModelVariant& model, const Matrix& x) {
    std::vector<double> out(x.rows);
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GlmModel>) {
                check_width(x, m.weights.size());
                for (std::size_t i = 0; i < x.rows; ++i) {
                    const auto r = x.row(i);
                    double z = m.bias;
                    for (std::size_t j = 0; j < r.size(); ++j) z += m.weights[j] * r[j];
                    out[i] = sigmoid(z);
                }
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                for (std::size_t i = 0; i < x.rows; ++i) {
                    double s = 0.0;
                    for (const auto& t : m.trees) s += t.predict(x.row(i));
                    out[i] = m.trees.empty() ? 0.0 : s / static_cast<double>(m.trees.size());
                }
            } else if constexpr (std::is_same_v<T, GbmModel>) {
                for (std::size_t i = 0; i < x.rows; ++i) out[i] = sigmoid(m.raw_score(x.row(i)));
            } else {
                check_width(x, m.sizes.front());
                constexpr std::size_t kChunk = 1024;
                for (std::size_t start = 0; start < x.rows; start += kChunk) {
                    const std::size_t b = std::min(kChunk, x.rows - start);
                    ConstRowMap xb(x.data.data() + start * x.cols, static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(x.cols));
                    Eigen::MatrixXd a = xb;
                    for (std::size_t l = 0; l < m.weights.size(); ++l) {
                        Eigen::MatrixXd z = a * m.weights[l];
                        z.rowwise() += m.biases[l].transpose();
                        a = l + 1 < m.weights.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
                    }
                    for (std::size_t i = 0; i < b; ++i) out[start + i] = sigmoid(a(static_cast<Eigen::Index>(i), 0));
                }
            }
        },
        model);
    return out;
}

std::vector<double> predict_proba(const TrainedModel& model, const Matrix& x) {
    check_width(x, model.width);
    return predict_proba(model.model, x);
}

std::string matrix_digest(const Matrix& x, std::span<const std::uint8_t> y) {
    Sha256 h;
    const std::uint64_t shape[2] = {x.rows, x.cols};
    h.update(shape, sizeof shape);
    h.update_span(std::span<const double>(x.data));
    h.update_span(y);
    return h.hex();
}

json model_to_json(const TrainedModel& model) {
    json params = std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GlmModel>) {
                return {{"weights", m.weights}, {"bias", m.bias}, {"l2", m.l2}};
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                json trees = json::array();
                for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
                return {{"mtry", m.mtry}, {"tree_seeds", m.tree_seeds}, {"trees", trees}};
            } else if constexpr (std::is_same_v<T, GbmModel>) {
                json trees = json::array();
                for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
                return {{"prior", m.prior}, {"shrinkage", m.shrinkage}, {"trees", trees}};
            } else {
                json w = json::array(), b = json::array();
                for (const auto& mat : m.weights) w.push_back(eigen_to_json(mat));
                for (const auto& v : m.biases) b.push_back(std::vector<double>(v.data(), v.data() + v.size()));
                return {{"sizes", m.sizes}, {"weights", w}, {"biases", b}};
            }
        },
        model.model);
    return {{"format", "idsbench.model"},
            {"version", 1},
            {"family", std::string(to_string(model.family()))},
            {"spec", spec_to_json(model.spec)},
            {"width", model.width},
            {"data_digest", model.data_digest},
            {"parameters", params}};
}

TrainedModel model_from_json(const json& doc) {
    try {
        if (doc.at("format") != "idsbench.model" || doc.at("version") != 1)
            fail(ErrorCode::Config, "InvalidModel", "not an idsbench.model v1 document");
        TrainedModel out;
        out.spec = spec_from_json(doc.at("spec"));
        out.width = doc.at("width").get<std::size_t>();
        out.data_digest = doc.value("data_digest", std::string{});
        const Family f = family_from_string(doc.at("family").get<std::string>());
        if (f != out.spec.family()) fail(ErrorCode::Config, "InvalidModel", "family tag disagrees with spec");
        const auto& p = doc.at("parameters");
        switch (f) {
        case Family::Glm: {
            GlmModel m{p.at("weights").get<std::vector<double>>(), p.at("bias").get<double>(), p.at("l2").get<double>()};
            if (m.weights.size() != out.width) fail(ErrorCode::Config, "InvalidModel", "glm weight count != width");
            out.model = std::move(m);
            break;
        }
        case Family::RandomForest: {
            ForestModel m;
            m.mtry = p.at("mtry").get<std::size_t>();
            m.tree_seeds = p.at("tree_seeds").get<std::vector<std::uint64_t>>();
            for (const auto& t : p.at("trees")) m.trees.push_back(tree_from_json(t, out.width));
            out.model = std::move(m);
            break;
        }
        case Family::Gbm: {
            GbmModel m;
            m.prior = p.at("prior").get<double>();
            m.shrinkage = p.at("shrinkage").get<double>();
            for (const auto& t : p.at("trees")) m.trees.push_back(tree_from_json(t, out.width));
            out.model = std::move(m);
            break;
        }
        case Family::Mlp: {
            MlpModel m;
            m.sizes = p.at("sizes").get<std::vector<std::size_t>>();
            if (m.sizes.size() < 2 || m.sizes.front() != out.width || m.sizes.back() != 1)
                fail(ErrorCode::Config, "InvalidModel", "mlp layer sizes disagree with width");
            const auto& w = p.at("weights");
            const auto& b = p.at("biases");
            if (w.size() + 1 != m.sizes.size() || b.size() + 1 != m.sizes.size())
                fail(ErrorCode::Config, "InvalidModel", "mlp layer count mismatch");
            for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
                m.weights.push_back(eigen_from_json(w[l], m.sizes[l], m.sizes[l + 1]));
                const auto bv = b[l].get<std::vector<double>>();
                if (bv.size() != m.sizes[l + 1]) fail(ErrorCode::Config, "InvalidModel", "mlp bias size mismatch");
                m.biases.push_back(Eigen::Map<const Eigen::VectorXd>(bv.data(), static_cast<Eigen::Index>(bv.size())));
            }
            out.model = std::move(m);
            break;
        }
        }
        return out;
    } catch (const json::exception& e) {
        fail(ErrorCode::Config, "InvalidModel", e.what());
    }
}

} // namespace ids
