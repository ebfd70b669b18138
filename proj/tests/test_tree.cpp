#include "doctest.h"
#include "support.hpp"

#include "idsbench/tree.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

using namespace ids;

namespace {

struct OracleSplit {
    std::size_t feature;
    double threshold;
    double gain;
};

// Weighted Gini impurity W * (1 - p^2 - (1-p)^2), computed directly.
double gini_mass(double w, double pos) {
    if (w <= 0.0) return 0.0;
    const double p = pos / w;
    return w * (1.0 - p * p - (1.0 - p) * (1.0 - p));
}

// Every feature, every midpoint between distinct values; the partition is
// recomputed from scratch for each candidate.
std::vector<OracleSplit> enumerate_gini(const Matrix& x, const Labels& y, const std::vector<double>& w,
                                        std::size_t min_leaf) {
    double W = 0.0, P = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        W += w[i];
        P += y[i] ? w[i] : 0.0;
    }
    const double parent = gini_mass(W, P);
    std::vector<OracleSplit> out;
    for (std::size_t f = 0; f < x.cols; ++f) {
        std::set<double> values;
        for (std::size_t i = 0; i < x.rows; ++i) values.insert(x(i, f));
        for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
            const double t = split_threshold(*it, *std::next(it));
            double wl = 0.0, pl = 0.0;
            std::size_t nl = 0;
            for (std::size_t i = 0; i < x.rows; ++i) {
                if (x(i, f) < t) {
                    wl += w[i];
                    pl += y[i] ? w[i] : 0.0;
                    ++nl;
                }
            }
            if (nl < min_leaf || x.rows - nl < min_leaf) continue;
            const double gain = parent - gini_mass(wl, pl) - gini_mass(W - wl, P - pl);
            out.push_back({f, t, gain});
        }
    }
    return out;
}

std::vector<OracleSplit> enumerate_newton(const Matrix& x, const std::vector<double>& g, const std::vector<double>& h,
                                          double lambda, std::size_t min_leaf) {
    const double G = std::accumulate(g.begin(), g.end(), 0.0);
    const double H = std::accumulate(h.begin(), h.end(), 0.0);
    std::vector<OracleSplit> out;
    for (std::size_t f = 0; f < x.cols; ++f) {
        std::set<double> values;
        for (std::size_t i = 0; i < x.rows; ++i) values.insert(x(i, f));
        for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
            const double t = split_threshold(*it, *std::next(it));
            double gl = 0.0, hl = 0.0;
            std::size_t nl = 0;
            for (std::size_t i = 0; i < x.rows; ++i) {
                if (x(i, f) < t) {
                    gl += g[i];
                    hl += h[i];
                    ++nl;
                }
            }
            if (nl < min_leaf || x.rows - nl < min_leaf) continue;
            const double gain = gl * gl / (hl + lambda) + (G - gl) * (G - gl) / (H - hl + lambda) - G * G / (H + lambda);
            out.push_back({f, t, gain});
        }
    }
    return out;
}

// The implementation must return a split whose oracle gain matches the best
// oracle gain; when the best is unique by a clear margin the exact
// (feature, threshold) must match too.
void check_against_oracle(const std::optional<SplitCandidate>& got, const std::vector<OracleSplit>& all,
                          double parent_scale) {
    const double eps = 1e-9 * (1.0 + parent_scale);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& s : all) best = std::max(best, s.gain);
    if (all.empty() || best <= eps) {
        CHECK_FALSE(got.has_value());
        return;
    }
    REQUIRE(got.has_value());
    CHECK(std::abs(got->gain - best) <= eps);
    const OracleSplit* match = nullptr;
    std::size_t near_best = 0;
    for (const auto& s : all) {
        if (s.gain >= best - eps) ++near_best;
        if (s.feature == got->feature && s.threshold == got->threshold) match = &s;
    }
    REQUIRE(match != nullptr);
    CHECK(match->gain >= best - eps);
    if (near_best == 1) CHECK(match->gain == doctest::Approx(best).epsilon(1e-12));
}

} // namespace

TEST_CASE("split_threshold sits strictly between its neighbours") {
    CHECK(split_threshold(1.0, 2.0) == 1.5);
    const double lo = 1.0;
    const double hi = std::nextafter(1.0, 2.0);
    const double t = split_threshold(lo, hi);
    CHECK(lo < t);
    CHECK(t <= hi);
}

TEST_CASE("best_split_gini matches exhaustive enumeration on 1000 random 8-point problems") {
    Rng rng(2024);
    std::vector<std::size_t> rows(8);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t cols = 1 + rng.below(3);
        Matrix x(8, cols);
        // small integer grids produce ties in values and in gains
        for (auto& v : x.data) v = static_cast<double>(rng.below(5));
        Labels y(8);
        for (auto& v : y) v = static_cast<std::uint8_t>(rng.below(2));
        std::vector<double> w(8, 1.0);
        if (trial % 2) for (auto& v : w) v = static_cast<double>(rng.below(3));
        const std::size_t min_leaf = 1 + rng.below(3);
        const auto got = best_split_gini(x, rows, y, trial % 2 ? std::span<const double>(w) : std::span<const double>(),
                                         min_leaf);
        const double W = std::accumulate(w.begin(), w.end(), 0.0);
        check_against_oracle(got, enumerate_gini(x, y, w, min_leaf), W);
    }
}

TEST_CASE("best_split_newton matches exhaustive enumeration on 1000 random 8-point problems") {
    Rng rng(77);
    std::vector<std::size_t> rows(8);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t cols = 1 + rng.below(3);
        Matrix x(8, cols);
        for (auto& v : x.data) v = trial % 3 ? rng.uniform(-1.0, 1.0) : static_cast<double>(rng.below(4));
        std::vector<double> g(8), h(8);
        for (std::size_t i = 0; i < 8; ++i) {
            const double p = rng.uniform(0.05, 0.95);
            const double yi = static_cast<double>(rng.below(2));
            g[i] = p - yi;
            h[i] = p * (1.0 - p);
        }
        const double lambda = trial % 4 == 0 ? 0.0 : 1.0;
        const std::size_t min_leaf = 1 + rng.below(3);
        const auto got = best_split_newton(x, rows, g, h, lambda, min_leaf);
        const double G = std::accumulate(g.begin(), g.end(), 0.0);
        const double H = std::accumulate(h.begin(), h.end(), 0.0);
        check_against_oracle(got, enumerate_newton(x, g, h, lambda, min_leaf), G * G / (H + lambda));
    }
}

TEST_CASE("exact ties go to the lowest feature, then the lowest threshold") {
    std::vector<std::size_t> rows = {0, 1, 2, 3};
    Matrix dup(4, 2);
    dup.data = {1, 1, 2, 2, 3, 3, 4, 4};
    Labels y = {0, 0, 1, 1};
    auto s = best_split_gini(dup, rows, y, {}, 1);
    REQUIRE(s);
    CHECK(s->feature == 0);
    CHECK(s->threshold == 2.5);

    // mirror-image partitions {1}|{0,0,1} and {1,0,0}|{1} have equal gain
    Matrix x(4, 1);
    x.data = {1, 2, 3, 4};
    Labels mirror = {1, 0, 0, 1};
    s = best_split_gini(x, rows, mirror, {}, 1);
    REQUIRE(s);
    CHECK(s->threshold == 1.5);
}

TEST_CASE("pure or constant nodes have no split") {
    Matrix x(4, 1);
    x.data = {1, 2, 3, 4};
    std::vector<std::size_t> rows = {0, 1, 2, 3};
    Labels pure = {1, 1, 1, 1};
    CHECK_FALSE(best_split_gini(x, rows, pure, {}, 1).has_value());
    Matrix flat(4, 1, 3.0);
    Labels mixed = {0, 1, 0, 1};
    CHECK_FALSE(best_split_gini(flat, rows, mixed, {}, 1).has_value());
}

TEST_CASE("an unlimited gini tree memorizes distinct rows") {
    const Matrix x = testing::random_matrix(200, 4, 3);
    Rng lab(4);
    Labels y(200);
    for (auto& v : y) v = static_cast<std::uint8_t>(lab.below(2));
    const PresortedData data(x);
    Rng rng(1);
    const Tree tree = grow_gini_tree(data, GiniCriterion{y, {}}, TreeParams{}, rng);
    for (std::size_t i = 0; i < x.rows; ++i) REQUIRE(tree.predict(x.row(i)) == static_cast<double>(y[i]));
    CHECK(tree.depth() > 1);

    TreeParams stump;
    stump.max_depth = 1;
    Rng rng2(1);
    const Tree s = grow_gini_tree(data, GiniCriterion{y, {}}, stump, rng2);
    CHECK(s.nodes.size() == 3);
    CHECK(s.depth() == 1);
}

TEST_CASE("tree growth honours min_samples_leaf and zero weights") {
    const Matrix x = testing::random_matrix(100, 3, 8);
    const Labels y = testing::linear_labels(x, 9);
    const PresortedData data(x);
    TreeParams p;
    p.min_samples_leaf = 10;
    Rng rng(2);
    const Tree tree = grow_gini_tree(data, GiniCriterion{y, {}}, p, rng);
    std::vector<std::size_t> per_leaf(tree.nodes.size(), 0);
    for (std::size_t i = 0; i < x.rows; ++i) ++per_leaf[tree.leaf_of(x.row(i))];
    for (std::size_t n = 0; n < tree.nodes.size(); ++n)
        if (tree.nodes[n].is_leaf()) CHECK(per_leaf[n] >= 10);

    // With half the rows weighted out the root value is the in-bag positive fraction.
    std::vector<double> w(100, 0.0);
    double pos = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        w[i] = 1.0;
        pos += y[i];
    }
    TreeParams root_only;
    root_only.max_depth = 0;
    root_only.min_samples_split = 1000;
    Rng rng3(3);
    const Tree r = grow_gini_tree(data, GiniCriterion{y, w}, root_only, rng3);
    REQUIRE(r.nodes.size() == 1);
    CHECK(r.nodes[0].value == doctest::Approx(pos / 50.0));
}
