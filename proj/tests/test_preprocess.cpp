#include "doctest.h"
#include "support.hpp"

#include "idsbench/preprocess.hpp"

#include <cmath>
#include <numeric>
#include <set>

using namespace ids;

namespace {

Labels make_labels(std::size_t n0, std::size_t n1, std::uint64_t seed) {
    Labels y(n0, 0);
    y.insert(y.end(), n1, 1);
    Rng rng(seed);
    rng.shuffle(std::span<std::uint8_t>(y));
    return y;
}

std::size_t positives(const Labels& y, std::span<const std::size_t> idx) {
    std::size_t p = 0;
    for (auto i : idx) p += y[i];
    return p;
}

ScenarioSchema synthetic_schema() { return schema_from_json(nlohmann::json::parse(testing::kSyntheticSchema)); }

void same_parameters(const EncoderState& a, const EncoderState& b) {
    REQUIRE(a.layout == b.layout);
    REQUIRE(a.columns.size() == b.columns.size());
    for (std::size_t i = 0; i < a.columns.size(); ++i) {
        CHECK(a.columns[i].source == b.columns[i].source);
        CHECK(a.columns[i].mean == b.columns[i].mean);
        CHECK(a.columns[i].sd == b.columns[i].sd);
        CHECK(a.columns[i].levels == b.columns[i].levels);
        CHECK(a.columns[i].first_slot == b.columns[i].first_slot);
    }
}

} // namespace

TEST_CASE("undersample balances exactly and keeps the minority") {
    const Labels y = make_labels(133, 41, 1);
    const auto kept = undersample(y, {7});
    CHECK(kept.size() == 82);
    CHECK(std::is_sorted(kept.begin(), kept.end()));
    CHECK(positives(y, kept) == 41);
    std::size_t minority_kept = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] == 1) minority_kept += std::binary_search(kept.begin(), kept.end(), i);
    CHECK(minority_kept == 41);
    CHECK(undersample(y, {7}) == kept);
    CHECK(undersample(y, {8}) != kept);

    SUBCASE("already balanced keeps everything") {
        const Labels b = make_labels(20, 20, 2);
        const auto all = undersample(b, {1});
        CHECK(all.size() == 40);
    }
    SUBCASE("single class is an error") {
        const Labels one(10, 1);
        CHECK_THROWS_AS(undersample(one, {1}), Error);
    }
}

TEST_CASE("stratified split of 100 balanced rows") {
    const Labels y = make_labels(50, 50, 3);
    const auto plan = stratified_split(y, 0.2, 9);
    CHECK(plan.train_idx.size() == 80);
    CHECK(plan.test_idx.size() == 20);
    CHECK(positives(y, plan.test_idx) == 10);
    std::set<std::size_t> all(plan.train_idx.begin(), plan.train_idx.end());
    for (auto i : plan.test_idx) CHECK(all.insert(i).second);
    CHECK(all.size() == 100);

    const auto again = stratified_split(y, 0.2, 9);
    CHECK(again.train_idx == plan.train_idx);
    CHECK(again.test_idx == plan.test_idx);
}

TEST_CASE("split rounding on 11743 + 11743 rows") {
    const Labels y = make_labels(11743, 11743, 4);
    // Oracle: round(0.2 * 23486) = 4697; each class gets floor(2348.6) = 2348
    // and the single leftover row goes to one class.
    std::set<std::size_t> pos_counts;
    for (std::uint64_t seed = 0; seed < 16; ++seed) {
        const auto plan = stratified_split(y, 0.2, seed);
        CHECK(plan.test_idx.size() == 4697);
        const std::size_t p = positives(y, plan.test_idx);
        CHECK((p == 2348 || p == 2349));
        pos_counts.insert(p);
    }
    CHECK(pos_counts.size() == 2); // the coin lands both ways across seeds
}

TEST_CASE("split rejects degenerate inputs") {
    CHECK_THROWS_AS(stratified_split(make_labels(10, 10, 1), 0.0, 1), Error);
    CHECK_THROWS_AS(stratified_split(make_labels(10, 10, 1), 1.0, 1), Error);
    try {
        stratified_split(make_labels(10, 1, 1), 0.2, 1);
        FAIL("expected DegenerateSplit");
    } catch (const Error& e) {
        CHECK(e.kind() == "DegenerateSplit");
    }
}

TEST_CASE("kfold n=10, k=5") {
    const Labels y = make_labels(5, 5, 5);
    const auto folds = kfold(y, 5, 3);
    for (std::size_t f = 0; f < 5; ++f) {
        const auto m = folds.members(f);
        CHECK(m.size() == 2);
        CHECK(positives(y, m) == 1);
    }
}

TEST_CASE("kfold partitions are disjoint, exhaustive and stratified") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + rng.below(9);
        const std::size_t n0 = k + rng.below(60);
        const std::size_t n1 = k + rng.below(60);
        const Labels y = make_labels(n0, n1, rng.next());
        const auto folds = kfold(y, k, rng.next());
        std::vector<int> hits(y.size(), 0);
        std::size_t min_pos = SIZE_MAX, max_pos = 0, min_size = SIZE_MAX, max_size = 0;
        for (std::size_t f = 0; f < k; ++f) {
            const auto m = folds.members(f);
            const auto c = folds.complement(f);
            REQUIRE(m.size() + c.size() == y.size());
            for (auto i : m) ++hits[i];
            const std::size_t p = positives(y, m);
            min_pos = std::min(min_pos, p);
            max_pos = std::max(max_pos, p);
            min_size = std::min(min_size, m.size());
            max_size = std::max(max_size, m.size());
        }
        for (int h : hits) REQUIRE(h == 1);
        CHECK(max_pos - min_pos <= 1);
        CHECK(max_size - min_size <= 1);
    }
    CHECK_THROWS_AS(kfold(make_labels(3, 10, 1), 5, 1), Error);
}

TEST_CASE("encoder moments, one-hot blocks and determinism") {
    const auto ds = load_csv_text(testing::synthetic_csv(400, 21), synthetic_schema());
    std::vector<std::size_t> rows(300);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto state = fit_encoder(ds, rows);
    const auto enc = encode(state, ds, rows);
    REQUIRE(enc.x.rows == 300);
    REQUIRE(enc.x.cols == state.width());

    for (const auto& col : state.columns) {
        if (col.kind == FeatureKind::Numeric) {
            double mean = 0.0, sq = 0.0;
            for (std::size_t i = 0; i < enc.x.rows; ++i) mean += enc.x(i, col.first_slot);
            mean /= static_cast<double>(enc.x.rows);
            for (std::size_t i = 0; i < enc.x.rows; ++i) sq += std::pow(enc.x(i, col.first_slot) - mean, 2);
            CHECK(std::abs(mean) < 1e-9);
            CHECK(std::abs(std::sqrt(sq / static_cast<double>(enc.x.rows)) - 1.0) < 1e-9);
        } else if (col.kind == FeatureKind::Categorical) {
            for (std::size_t i = 0; i < enc.x.rows; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < col.width(); ++j) s += enc.x(i, col.first_slot + j);
                CHECK(s == 1.0);
            }
        }
    }
    CHECK(enc.unseen_levels.empty());
    CHECK(fit_encoder(ds, rows) == state);
    CHECK(encoder_from_json(encoder_to_json(state)) == state);

    // row order is preserved
    std::vector<std::size_t> reversed(rows.rbegin(), rows.rend());
    const auto rev = encode(state, ds, reversed);
    for (std::size_t i = 0; i < 300; ++i)
        for (std::size_t j = 0; j < enc.x.cols; ++j) REQUIRE(rev.x(i, j) == enc.x(299 - i, j));
}

TEST_CASE("constant column encodes to zero; categorical gets k slots") {
    const char* text = "num_a,num_b,flag,proto,label\n"
                       "5,1,0,a,normal\n5,2,1,b,attack\n5,3,0,c,normal\n5,,1,a,attack\n";
    const auto ds = load_csv_text(text, synthetic_schema());
    std::vector<std::size_t> rows = {0, 1, 2, 3};
    const auto state = fit_encoder(ds, rows);
    const auto enc = encode(state, ds, rows);
    for (std::size_t i = 0; i < 4; ++i) CHECK(enc.x(i, 0) == 0.0);
    CHECK(state.columns[3].levels == std::vector<std::string>{"a", "b", "c"});
    CHECK(state.width() == 1 + 1 + 1 + 3);
    // missing numeric imputes raw 0 before standardizing
    const double mean = state.columns[1].mean;
    CHECK(mean == doctest::Approx(1.5));
}

TEST_CASE("unseen test level encodes to a zero block and is counted") {
    const char* text = "num_a,num_b,flag,proto,label\n"
                       "1,1,0,tcp,normal\n2,2,1,udp,attack\n3,3,0,tcp,normal\n4,4,1,icmp,attack\n";
    const auto ds = load_csv_text(text, synthetic_schema());
    std::vector<std::size_t> train = {0, 1, 2}, test = {3};
    const auto state = fit_encoder(ds, train);
    const auto enc = encode(state, ds, test);
    const auto& proto = state.columns[3];
    CHECK(proto.levels == std::vector<std::string>{"tcp", "udp"});
    for (std::size_t j = 0; j < proto.width(); ++j) CHECK(enc.x(0, proto.first_slot + j) == 0.0);
    CHECK(enc.unseen_levels.at("proto") == 1);
}

TEST_CASE("encoder never looks at test rows") {
    const std::string text = testing::synthetic_csv(200, 5);
    const auto ds = load_csv_text(text, synthetic_schema());
    std::vector<std::size_t> train(150);
    std::iota(train.begin(), train.end(), std::size_t{0});

    // Mutate every test row (lines 151..200 of the file) beyond recognition.
    std::string mutated;
    std::size_t line = 0, start = 0;
    while (start < text.size()) {
        const std::size_t end = text.find('\n', start);
        std::string l = text.substr(start, end - start);
        if (line > 150) l = "999,-999,1,zzz," + l.substr(l.rfind(',') + 1);
        mutated += l + "\n";
        start = end + 1;
        ++line;
    }
    const auto ds2 = load_csv_text(mutated, synthetic_schema());
    same_parameters(fit_encoder(ds, train), fit_encoder(ds2, train));
}

TEST_CASE("encoder errors") {
    const auto ds = load_csv_text(testing::synthetic_csv(20, 1), synthetic_schema());
    try {
        fit_encoder(ds, {});
        FAIL("expected EmptyTrainingSet");
    } catch (const Error& e) {
        CHECK(e.kind() == "EmptyTrainingSet");
    }
    std::vector<std::size_t> rows = {0, 1, 2, 3};
    const auto state = fit_encoder(ds, rows);
    auto other = ds;
    other.columns.pop_back();
    other.columns.pop_back();
    try {
        encode(state, other, rows);
        FAIL("expected SchemaMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == "SchemaMismatch");
    }
}

TEST_CASE("composite preprocessing is reproducible") {
    const auto ds = load_csv_text(testing::synthetic_csv(500, 8), synthetic_schema());
    auto run = [&] {
        const auto kept = undersample(ds.labels, {derive_seed(42, "undersample")});
        const Labels bal = select(ds.labels, kept);
        const auto plan = stratified_split(bal, 0.2, derive_seed(42, "split"));
        std::vector<std::size_t> train;
        for (auto i : plan.train_idx) train.push_back(kept[i]);
        const auto state = fit_encoder(ds, train);
        const auto enc = encode(state, ds, train);
        const auto folds = kfold(enc.y, 5, 1);
        return std::make_tuple(enc.x, enc.y, folds.fold_of, state.fitted_on);
    };
    CHECK(run() == run());
}
