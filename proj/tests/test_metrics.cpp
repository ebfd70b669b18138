#include "doctest.h"
#include "support.hpp"

#include "idsbench/metrics.hpp"

#include <cmath>
#include <limits>

using namespace ids;

namespace {

// O(n^2) Mann-Whitney: fraction of (pos, neg) pairs ordered correctly, ties half.
double pairwise_auc(const std::vector<double>& s, const Labels& y) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            pairs += 1.0;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

struct Sample {
    std::vector<double> scores;
    Labels labels;
};

Sample random_sample(Rng& rng) {
    Sample s;
    const std::size_t n = 2 + rng.below(199);
    const bool coarse = rng.below(2) == 0; // coarse grids force many ties
    for (std::size_t i = 0; i < n; ++i) {
        s.labels.push_back(static_cast<std::uint8_t>(rng.below(2)));
        s.scores.push_back(coarse ? static_cast<double>(rng.below(6)) / 5.0 : rng.uniform());
    }
    s.labels[0] = 0;
    s.labels[1] = 1;
    return s;
}

} // namespace

TEST_CASE("auc equals the pairwise oracle, ties included") {
    Rng rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        const auto s = random_sample(rng);
        CHECK(auc(s.scores, s.labels) == doctest::Approx(pairwise_auc(s.scores, s.labels)).epsilon(1e-12));
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = random_sample(rng);
        std::vector<double> t1, t2;
        for (double v : s.scores) {
            t1.push_back(std::exp(3.0 * v) - 7.0);
            t2.push_back(v * v * v + 2.0 * v);
        }
        const double a = auc(s.scores, s.labels);
        CHECK(auc(t1, s.labels) == a);
        CHECK(auc(t2, s.labels) == a);
    }
}

TEST_CASE("flipping labels reflects auc") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = random_sample(rng);
        Labels flipped;
        for (auto v : s.labels) flipped.push_back(1 - v);
        CHECK(auc(s.scores, s.labels) + auc(s.scores, flipped) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("roc area equals auc and the curve is monotone") {
    Rng rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        const auto s = random_sample(rng);
        const auto curve = roc_points(s.scores, s.labels);
        REQUIRE(curve.points.size() >= 2);
        CHECK(std::abs(curve.area() - auc(s.scores, s.labels)) <= 1e-12);
        CHECK(curve.points.front().fpr == 0.0);
        CHECK(curve.points.front().tpr == 0.0);
        CHECK(std::isinf(curve.points.front().threshold));
        CHECK(curve.points.back().fpr == 1.0);
        CHECK(curve.points.back().tpr == 1.0);
        for (std::size_t i = 1; i < curve.points.size(); ++i) {
            CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
            CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
            CHECK(curve.points[i].threshold < curve.points[i - 1].threshold);
        }
    }
}

TEST_CASE("worked examples") {
    CHECK(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, Labels{0, 0, 1, 1}) == 0.75);
    CHECK(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, Labels{0, 0, 1, 1}) == 1.0);
    CHECK(auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, Labels{0, 1, 0, 1}) == 0.5);

    const auto cm = confusion_at(std::vector<double>{0.9, 0.4, 0.6, 0.2}, Labels{1, 1, 0, 0}, 0.5);
    CHECK(cm.tp == 1);
    CHECK(cm.fn == 1);
    CHECK(cm.fp == 1);
    CHECK(cm.tn == 1);
    CHECK(cm.total() == 4);

    const auto perfect = confusion_at(std::vector<double>{0.9, 0.1}, Labels{1, 0});
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);

    // a score of exactly 0.5 counts as positive
    const auto boundary = confusion_at(std::vector<double>{0.5, 0.49}, Labels{1, 0});
    CHECK(boundary.tp == 1);
    CHECK(boundary.tn == 1);

    CHECK(f1(ConfusionMatrix{5, 0, 0, 0, 0.5}) == 1.0);
    CHECK(f1(ConfusionMatrix{0, 3, 2, 1, 0.5}) == 0.0);
    CHECK(f1(ConfusionMatrix{3, 1, 0, 2, 0.5}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("evaluate: perfect and constant scorers") {
    const auto p = evaluate(std::vector<double>{0.1, 0.2, 0.7, 0.95}, Labels{0, 0, 1, 1}, "perfect");
    CHECK(p.auc == 1.0);
    CHECK(p.accuracy == 1.0);
    CHECK(p.f_score == 1.0);

    const auto c = evaluate(std::vector<double>(6, 0.5), Labels{0, 1, 0, 1, 0, 1}, "constant");
    CHECK(c.auc == 0.5);
    CHECK(c.accuracy == 0.5);
    CHECK(c.confusion.fp == 3);
    CHECK(c.accuracy == accuracy(c.confusion));
    CHECK(c.f_score == f1(c.confusion));
}

TEST_CASE("metric errors") {
    const std::vector<double> s = {0.2, 0.3};
    const Labels one = {1, 1};
    try {
        auc(s, one);
        FAIL("expected SingleClassInput");
    } catch (const Error& e) {
        CHECK(e.kind() == "SingleClassInput");
    }
    CHECK_THROWS_AS(roc_points(s, one), Error);
    const std::vector<double> bad = {std::nan(""), 0.3};
    const Labels y = {0, 1};
    CHECK_THROWS_AS(auc(bad, y), Error);
    CHECK_THROWS_AS(confusion_at(s, y, 1.5), Error);
}

TEST_CASE("evaluate and report json round trip") {
    Rng rng(5);
    const auto s = random_sample(rng);
    const auto r = evaluate(s.scores, s.labels, "GBM");
    const auto back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
    CHECK(back.model_id == "GBM");
    CHECK(back.auc == r.auc);
    CHECK(back.accuracy == r.accuracy);
    CHECK(back.f_score == r.f_score);
    CHECK(back.confusion == r.confusion);
    CHECK(back.n_pos + back.n_neg == s.scores.size());
}

TEST_CASE("roc csv round trip is exact") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const auto s = random_sample(rng);
        const auto curve = roc_points(s.scores, s.labels);
        const auto back = roc_from_csv(roc_to_csv(curve));
        REQUIRE(back.points.size() == curve.points.size());
        for (std::size_t i = 0; i < curve.points.size(); ++i) {
            CHECK(back.points[i].threshold == curve.points[i].threshold);
            CHECK(back.points[i].fpr == curve.points[i].fpr);
            CHECK(back.points[i].tpr == curve.points[i].tpr);
        }
        CHECK(std::abs(back.area() - auc(s.scores, s.labels)) <= 1e-9);
    }
    CHECK_THROWS_AS(roc_from_csv("a,b\n1,2\n"), Error);
    CHECK_THROWS_AS(roc_from_csv("threshold,fpr,tpr\n1,x,2\n"), Error);
}

TEST_CASE("format_fixed4 rounds half-up on the exact binary value") {
    CHECK(format_fixed4(0.99655) == "0.9966"); // binary value sits just above ...55
    CHECK(format_fixed4(0.30005) == "0.3000"); // binary value sits just below ...05
    CHECK(format_fixed4(0.5) == "0.5000");
    CHECK(format_fixed4(1.0) == "1.0000");
    CHECK(format_fixed4(0.0) == "0.0000");
    CHECK(format_fixed4(0.99996) == "1.0000");
    CHECK(format_fixed4(0.12345) == "0.1235"); // binary value sits just above ...45
    CHECK(format_fixed4(0.00005) == "0.0001");
    CHECK(format_fixed4(0.000049999) == "0.0000");
    CHECK(format_fixed4(0.8747) == "0.8747");
    CHECK(format_fixed4(0.25) == "0.2500");
    CHECK(format_fixed4(0.03125) == "0.0313"); // exact tie rounds up
    // away from decimal ties printf rounding agrees
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const double v = rng.uniform();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        const double scaled = v * 1e4;
        if (std::abs(scaled - std::floor(scaled) - 0.5) < 1e-6) continue;
        CHECK(format_fixed4(v) == buf);
    }
}

TEST_CASE("svg rendering") {
    const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
    const Labels y = {0, 0, 1, 1};
    const auto curve = roc_points(s, y);
    const std::string svg = render_roc_svg({{"LR", curve}, {"SL1: DL <x>", curve}}, "ROC & more");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("LR (AUC = 0.7500)") != std::string::npos);
    CHECK(svg.find("SL1: DL &lt;x&gt;") != std::string::npos);
    CHECK(svg.find("ROC &amp; more") != std::string::npos);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
    std::size_t polylines = 0;
    for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
    CHECK(polylines == 2);
    CHECK(render_roc_svg({{"LR", curve}}, "t") == render_roc_svg({{"LR", curve}}, "t"));
}
