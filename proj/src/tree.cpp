#include "idsbench/tree.hpp"

#include "idsbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ids {

namespace {

bool better(const SplitCandidate& cand, const std::optional<SplitCandidate>& best) {
    if (!best) return true;
    if (cand.gain > best->gain) return true;
    return cand.gain == best->gain && cand.feature < best->feature;
}

// Scans one feature whose node rows are sorted by value. Candidate thresholds
// sit between consecutive distinct values; each side needs min_leaf rows.
template <class Crit, class ValueAt>
void scan_feature(const Crit& crit, std::size_t feature, std::span<const std::uint32_t> rows, ValueAt value_at,
                  const typename Crit::Stats& total, double parent_score, std::size_t min_leaf, double min_gain,
                  std::optional<SplitCandidate>& best) {
    typename Crit::Stats left{};
    const std::size_t m = rows.size();
    double current = m ? value_at(rows[0]) : 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        Crit::add(left, crit.stat(rows[i]));
        const double next = value_at(rows[i + 1]);
        if (!(current < next)) continue;
        const double lo = current;
        current = next;
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf) continue;
        if (m - n_left < min_leaf) break;
        const auto right = Crit::minus(total, left);
        const double gain = crit.score(left) + crit.score(right) - parent_score;
        if (!(gain > min_gain)) continue;
        SplitCandidate cand{feature, split_threshold(lo, next), gain};
        if (better(cand, best)) best = cand;
    }
}

template <class Crit>
std::optional<SplitCandidate> best_split_dense(const Matrix& x, std::span<const std::size_t> rows, const Crit& crit,
                                               std::size_t min_leaf) {
    typename Crit::Stats total{};
    for (auto r : rows) Crit::add(total, crit.stat(r));
    const double parent = crit.score(total);
    const double min_gain = kMinRelativeGain * (1.0 + std::abs(parent));
    std::optional<SplitCandidate> best;
    std::vector<std::uint32_t> sorted(rows.begin(), rows.end());
    for (std::size_t f = 0; f < x.cols; ++f) {
        auto value_at = [&](std::uint32_t r) { return x(r, f); };
        std::stable_sort(sorted.begin(), sorted.end(), [&](std::uint32_t a, std::uint32_t b) {
            return value_at(a) < value_at(b) || (value_at(a) == value_at(b) && a < b);
        });
        scan_feature(crit, f, sorted, value_at, total, parent, min_leaf, min_gain, best);
    }
    return best;
}

template <class Crit>
class Grower {
public:
    Grower(const PresortedData& data, const Crit& crit, const TreeParams& params, Rng& rng, std::span<const double> weight)
        : data_(data), crit_(crit), params_(params), rng_(rng) {
        seg_.resize(data.cols);
        for (std::size_t f = 0; f < data.cols; ++f) {
            if (weight.empty()) {
                seg_[f] = data.order[f];
            } else {
                seg_[f].reserve(data.rows);
                for (auto r : data.order[f])
                    if (weight[r] > 0.0) seg_[f].push_back(r);
            }
        }
        goes_left_.assign(data.rows, 0);
        features_.resize(data.cols);
    }

    Tree run() {
        Tree tree;
        tree.nodes.emplace_back();
        const std::size_t m = data_.cols ? seg_[0].size() : 0;
        if (m == 0 || data_.cols == 0) {
            // Constant tree: no usable rows or no features.
            typename Crit::Stats total{};
            if (data_.cols == 0)
                for (std::size_t r = 0; r < data_.rows; ++r) Crit::add(total, crit_.stat(r));
            tree.nodes[0].value = crit_.leaf_value(total);
            return tree;
        }
        struct Work {
            std::int32_t node;
            std::size_t begin;
            std::size_t end;
            std::size_t depth;
        };
        std::vector<Work> stack{{0, 0, m, 0}};
        while (!stack.empty()) {
            const Work w = stack.back();
            stack.pop_back();
            typename Crit::Stats total{};
            for (std::size_t i = w.begin; i < w.end; ++i) Crit::add(total, crit_.stat(seg_[0][i]));
            tree.nodes[static_cast<std::size_t>(w.node)].value = crit_.leaf_value(total);

            const std::size_t n = w.end - w.begin;
            if ((params_.max_depth && w.depth >= params_.max_depth) || n < params_.min_samples_split ||
                n < 2 * params_.min_samples_leaf || crit_.pure(total))
                continue;
            const auto split = find_split(w.begin, w.end, total);
            if (!split) continue;

            const std::size_t n_left = partition(w.begin, w.end, *split);
            const auto left_id = static_cast<std::int32_t>(tree.nodes.size());
            auto& node = tree.nodes[static_cast<std::size_t>(w.node)];
            node.feature = static_cast<std::int32_t>(split->feature);
            node.threshold = split->threshold;
            node.left = left_id;
            node.right = left_id + 1;
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            stack.push_back({left_id + 1, w.begin + n_left, w.end, w.depth + 1});
            stack.push_back({left_id, w.begin, w.begin + n_left, w.depth + 1});
        }
        return tree;
    }

private:
    std::optional<SplitCandidate> find_split(std::size_t begin, std::size_t end, const typename Crit::Stats& total) {
        const double parent = crit_.score(total);
        const double min_gain = kMinRelativeGain * (1.0 + std::abs(parent));
        const std::size_t p = data_.cols;
        std::iota(features_.begin(), features_.end(), std::size_t{0});
        const bool sampled = params_.mtry != 0 && params_.mtry < p;
        if (sampled) rng_.shuffle(std::span<std::size_t>(features_));

        std::optional<SplitCandidate> best;
        std::size_t visited = 0;
        for (const std::size_t f : features_) {
            // Keep drawing past mtry only while no valid split has been found.
            if (sampled && visited >= params_.mtry && best) break;
            std::span<const std::uint32_t> rows(seg_[f].data() + begin, end - begin);
            if (data_.at(rows.front(), f) == data_.at(rows.back(), f)) continue; // constant in node
            ++visited;
            const double* col = data_.by_col.data() + f * data_.rows;
            scan_feature(crit_, f, rows, [col](std::uint32_t r) { return col[r]; }, total, parent,
                         params_.min_samples_leaf, min_gain, best);
        }
        return best;
    }

    // Stable partition of every feature's segment; returns the left size.
    std::size_t partition(std::size_t begin, std::size_t end, const SplitCandidate& split) {
        const double* col = data_.by_col.data() + split.feature * data_.rows;
        for (std::size_t i = begin; i < end; ++i) {
            const auto r = seg_[0][i];
            goes_left_[r] = col[r] < split.threshold ? 1 : 0;
        }
        std::size_t n_left = 0;
        for (std::size_t f = 0; f < data_.cols; ++f) {
            auto& s = seg_[f];
            scratch_.clear();
            std::size_t out = begin;
            for (std::size_t i = begin; i < end; ++i) {
                if (goes_left_[s[i]]) s[out++] = s[i];
                else scratch_.push_back(s[i]);
            }
            std::copy(scratch_.begin(), scratch_.end(), s.begin() + static_cast<std::ptrdiff_t>(out));
            n_left = out - begin;
        }
        return n_left;
    }

    const PresortedData& data_;
    const Crit& crit_;
    TreeParams params_;
    Rng& rng_;
    std::vector<std::vector<std::uint32_t>> seg_;
    std::vector<std::uint32_t> scratch_;
    std::vector<std::uint8_t> goes_left_;
    std::vector<std::size_t> features_;
};

} // namespace

double split_threshold(double lo, double hi) {
    const double mid = lo * 0.5 + hi * 0.5;
    return mid > lo ? mid : hi;
}

std::size_t Tree::leaf_of(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
    }
    return i;
}

std::size_t Tree::depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

PresortedData::PresortedData(const Matrix& x) : rows(x.rows), cols(x.cols), by_col(x.rows * x.cols), order(x.cols) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t f = 0; f < cols; ++f) by_col[f * rows + r] = x(r, f);
    for (std::size_t f = 0; f < cols; ++f) {
        auto& o = order[f];
        o.resize(rows);
        std::iota(o.begin(), o.end(), std::uint32_t{0});
        const double* col = by_col.data() + f * rows;
        std::stable_sort(o.begin(), o.end(), [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
}

std::optional<SplitCandidate> best_split_gini(const Matrix& x, std::span<const std::size_t> rows,
                                              std::span<const std::uint8_t> y, std::span<const double> weight,
                                              std::size_t min_samples_leaf) {
    return best_split_dense(x, rows, GiniCriterion{y, weight}, min_samples_leaf);
}

std::optional<SplitCandidate> best_split_newton(const Matrix& x, std::span<const std::size_t> rows,
                                                std::span<const double> grad, std::span<const double> hess,
                                                double lambda, std::size_t min_samples_leaf) {
    return best_split_dense(x, rows, NewtonCriterion{grad, hess, lambda}, min_samples_leaf);
}

Tree grow_gini_tree(const PresortedData& data, const GiniCriterion& crit, const TreeParams& params, Rng& rng) {
    return Grower<GiniCriterion>(data, crit, params, rng, crit.weight).run();
}

Tree grow_newton_tree(const PresortedData& data, const NewtonCriterion& crit, const TreeParams& params, Rng& rng) {
    return Grower<NewtonCriterion>(data, crit, params, rng, {}).run();
}

} // namespace ids
