#pragma once

#include "idsbench/matrix.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ids {

class Rng;

/// Internal node routes x[feature] < threshold to `left`, otherwise `right`.
/// Leaves have feature == -1.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    std::size_t leaf_of(std::span<const double> x) const;
    double predict(std::span<const double> x) const { return nodes[leaf_of(x)].value; }
    std::size_t depth() const;
    bool operator==(const Tree&) const = default;
};

struct SplitCandidate {
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

// A split must beat the parent by more than this (scaled by 1 + |parent score|).
inline constexpr double kMinRelativeGain = 1e-12;

/// Midpoint of two consecutive distinct sorted values, nudged to `hi` when
/// the midpoint rounds down onto `lo`.
double split_threshold(double lo, double hi);

// Gini impurity decrease for 0/1 targets with non-negative row weights (empty
// weights = all ones). Scores are the negated weighted impurity 2P(W-P)/W.
struct GiniCriterion {
    std::span<const std::uint8_t> y;
    std::span<const double> weight;

    struct Stats {
        double w = 0.0;
        double pos = 0.0;
        std::size_t n = 0;
    };
    Stats stat(std::size_t row) const {
        const double w = weight.empty() ? 1.0 : weight[row];
        return {w, y[row] ? w : 0.0, 1};
    }
    static void add(Stats& a, const Stats& b) {
        a.w += b.w;
        a.pos += b.pos;
        a.n += b.n;
    }
    static Stats minus(const Stats& a, const Stats& b) { return {a.w - b.w, a.pos - b.pos, a.n - b.n}; }
    double score(const Stats& s) const { return s.w > 0.0 ? -2.0 * s.pos * (s.w - s.pos) / s.w : 0.0; }
    double leaf_value(const Stats& s) const { return s.w > 0.0 ? s.pos / s.w : 0.0; }
    bool pure(const Stats& s) const { return s.pos == 0.0 || s.pos == s.w; }
};

// Second-order (Newton) gain G^2/(H+lambda) for logistic-loss boosting, with
// leaf value -G/(H+lambda). Gradients are p - y, hessians p(1-p).
struct NewtonCriterion {
    std::span<const double> grad;
    std::span<const double> hess;
    double lambda = 1.0;

    struct Stats {
        double g = 0.0;
        double h = 0.0;
        std::size_t n = 0;
    };
    Stats stat(std::size_t row) const { return {grad[row], hess[row], 1}; }
    static void add(Stats& a, const Stats& b) {
        a.g += b.g;
        a.h += b.h;
        a.n += b.n;
    }
    static Stats minus(const Stats& a, const Stats& b) { return {a.g - b.g, a.h - b.h, a.n - b.n}; }
    double score(const Stats& s) const { return s.g * s.g / (s.h + lambda); }
    double leaf_value(const Stats& s) const { return -s.g / (s.h + lambda); }
    bool pure(const Stats&) const { return false; }
};

/// Best (feature, threshold) over all features for the given node rows.
/// Ties go to the lowest feature slot, then the lowest threshold.
std::optional<SplitCandidate> best_split_gini(const Matrix& x, std::span<const std::size_t> rows,
                                              std::span<const std::uint8_t> y, std::span<const double> weight,
                                              std::size_t min_samples_leaf);
std::optional<SplitCandidate> best_split_newton(const Matrix& x, std::span<const std::size_t> rows,
                                                std::span<const double> grad, std::span<const double> hess,
                                                double lambda, std::size_t min_samples_leaf);

struct TreeParams {
    std::size_t max_depth = 0; // 0 = unlimited
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    std::size_t mtry = 0; // 0 = all features, scanned in slot order
};

/// Column-major copy of the training matrix plus, per feature, the row ids
/// sorted by value (stable). Built once per training call and shared by all
/// trees grown from it.
struct PresortedData {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> by_col;                     // cols x rows
    std::vector<std::vector<std::uint32_t>> order;  // per feature

    explicit PresortedData(const Matrix& x);
    double at(std::size_t row, std::size_t feature) const { return by_col[feature * rows + row]; }
};

/// Grows one tree depth-first, children allocated in pre-order. Gini rows
/// with zero weight (out-of-bag) are excluded.
Tree grow_gini_tree(const PresortedData& data, const GiniCriterion& crit, const TreeParams& params, Rng& rng);
Tree grow_newton_tree(const PresortedData& data, const NewtonCriterion& crit, const TreeParams& params, Rng& rng);

} // namespace ids
