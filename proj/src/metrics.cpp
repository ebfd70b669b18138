#include "idsbench/metrics.hpp"

#include "idsbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <sstream>

namespace ids {

namespace {

using nlohmann::json;

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size())
        fail(ErrorCode::InvalidArgument, "ShapeMismatch", "scores and labels differ in length");
    for (double s : scores)
        if (!std::isfinite(s)) fail(ErrorCode::InvalidArgument, "NonFiniteScore", "scores must be finite");
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const std::uint8_t> labels) {
    std::size_t pos = 0;
    for (auto y : labels) pos += y ? 1 : 0;
    return {pos, labels.size() - pos};
}

void require_both_classes(std::size_t pos, std::size_t neg) {
    if (pos == 0 || neg == 0) fail(ErrorCode::Data, "SingleClassInput", "both classes must be present");
}

std::string num(double v, int decimals = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

} // namespace

double RocCurve::area() const {
    double a = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        a += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
    return a;
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_inputs(scores, labels);
    const auto [pos, neg] = class_counts(labels);
    require_both_classes(pos, neg);
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    for (std::size_t start = 0; start < idx.size();) {
        std::size_t end = start;
        std::size_t pos_in_group = 0;
        while (end < idx.size() && scores[idx[end]] == scores[idx[start]]) {
            pos_in_group += labels[idx[end]] ? 1 : 0;
            ++end;
        }
        const double midrank = 0.5 * static_cast<double>(start + 1 + end);
        rank_sum += midrank * static_cast<double>(pos_in_group);
        start = end;
    }
    const double p = static_cast<double>(pos);
    const double n = static_cast<double>(neg);
    return (rank_sum - p * (p + 1.0) * 0.5) / (p * n);
}

ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
    check_inputs(scores, labels);
    if (!(threshold >= 0.0 && threshold <= 1.0))
        fail(ErrorCode::InvalidArgument, "InvalidThreshold", "threshold must lie in [0, 1]");
    ConfusionMatrix c;
    c.threshold = threshold;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i]) (predicted ? c.tp : c.fn)++;
        else (predicted ? c.fp : c.tn)++;
    }
    return c;
}

double f1(const ConfusionMatrix& c) {
    if (c.tp == 0) return 0.0;
    const double tp = static_cast<double>(c.tp);
    return 2.0 * tp / (2.0 * tp + static_cast<double>(c.fp) + static_cast<double>(c.fn));
}

double accuracy(const ConfusionMatrix& c) {
    const std::size_t total = c.total();
    return total ? static_cast<double>(c.tp + c.tn) / static_cast<double>(total) : 0.0;
}

RocCurve roc_points(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_inputs(scores, labels);
    const auto [pos, neg] = class_counts(labels);
    require_both_classes(pos, neg);
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t start = 0; start < idx.size();) {
        const double s = scores[idx[start]];
        std::size_t end = start;
        while (end < idx.size() && scores[idx[end]] == s) {
            (labels[idx[end]] ? tp : fp)++;
            ++end;
        }
        curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(neg),
                                static_cast<double>(tp) / static_cast<double>(pos)});
        start = end;
    }
    const auto& last = curve.points.back();
    if (last.fpr != 1.0 || last.tpr != 1.0) curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
    return curve;
}

EvalReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels, std::string model_id) {
    EvalReport r;
    r.model_id = std::move(model_id);
    r.auc = auc(scores, labels);
    r.confusion = confusion_at(scores, labels, kDecisionThreshold);
    r.accuracy = accuracy(r.confusion);
    r.f_score = f1(r.confusion);
    std::tie(r.n_pos, r.n_neg) = class_counts(labels);
    return r;
}

json report_to_json(const EvalReport& r) {
    return {{"model_id", r.model_id},
            {"auc", r.auc},
            {"accuracy", r.accuracy},
            {"f_score", r.f_score},
            {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn},
                           {"threshold", r.confusion.threshold}}},
            {"n_pos", r.n_pos},
            {"n_neg", r.n_neg}};
}

EvalReport report_from_json(const json& j) {
    EvalReport r;
    r.model_id = j.at("model_id").get<std::string>();
    r.auc = j.at("auc").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.f_score = j.at("f_score").get<double>();
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>(),
                   c.at("fn").get<std::size_t>(), c.at("threshold").get<double>()};
    r.n_pos = j.at("n_pos").get<std::size_t>();
    r.n_neg = j.at("n_neg").get<std::size_t>();
    return r;
}

std::string roc_to_csv(const RocCurve& curve) {
    std::string out = "threshold,fpr,tpr\n";
    char buf[128];
    for (const auto& p : curve.points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
        out += buf;
    }
    return out;
}

RocCurve roc_from_csv(std::string_view text) {
    RocCurve curve;
    std::istringstream in{std::string(text)};
    std::string line;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line != "threshold,fpr,tpr") fail(ErrorCode::Data, "InvalidRocCsv", "unexpected header '" + line + "'");
            continue;
        }
        const char* s = line.c_str();
        char* end = nullptr;
        RocPoint p;
        p.threshold = std::strtod(s, &end);
        if (*end != ',') fail(ErrorCode::Data, "InvalidRocCsv", "line " + std::to_string(line_no));
        p.fpr = std::strtod(end + 1, &end);
        if (*end != ',') fail(ErrorCode::Data, "InvalidRocCsv", "line " + std::to_string(line_no));
        p.tpr = std::strtod(end + 1, &end);
        if (*end != '\0') fail(ErrorCode::Data, "InvalidRocCsv", "line " + std::to_string(line_no));
        curve.points.push_back(p);
    }
    return curve;
}

std::string format_fixed4(double value) {
    if (!std::isfinite(value)) return value != value ? "nan" : (value > 0 ? "inf" : "-inf");
    const bool negative = std::signbit(value);
    char buf[512];
    // 70 fractional digits is the exact expansion for every double >= 5e-5;
    // smaller magnitudes round to 0.0000 either way.
    std::snprintf(buf, sizeof buf, "%.70f", std::fabs(value));
    std::string s(buf);
    const std::size_t dot = s.find('.');
    const bool round_up = s[dot + 5] >= '5';
    std::string kept = s.substr(0, dot) + s.substr(dot + 1, 4); // integer digits + 4 decimals
    if (round_up) {
        std::size_t i = kept.size();
        while (i > 0) {
            --i;
            if (kept[i] == '9') {
                kept[i] = '0';
            } else {
                ++kept[i];
                break;
            }
            if (i == 0) kept.insert(kept.begin(), '1');
        }
    }
    std::string out = kept.substr(0, kept.size() - 4) + "." + kept.substr(kept.size() - 4);
    const bool zero = out.find_first_not_of("0.") == std::string::npos;
    return (negative && !zero ? "-" : "") + out;
}

std::string render_roc_svg(const std::vector<std::pair<std::string, RocCurve>>& curves, std::string_view title) {
    static constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    constexpr double kLeft = 70, kTop = 50, kSize = 460, kWidth = 600, kHeight = 590;
    auto px = [&](double fpr) { return kLeft + fpr * kSize; };
    auto py = [&](double tpr) { return kTop + (1.0 - tpr) * kSize; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth, 0) << "\" height=\"" << num(kHeight, 0)
       << "\" viewBox=\"0 0 " << num(kWidth, 0) << " " << num(kHeight, 0) << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth, 0) << "\" height=\"" << num(kHeight, 0) << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(kLeft + kSize / 2) << "\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"16\">"
       << xml_escape(title) << "</text>\n";
    os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(kSize) << "\" height=\"" << num(kSize)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double v = t / 5.0;
        os << "<line x1=\"" << num(px(v)) << "\" y1=\"" << num(kTop + kSize) << "\" x2=\"" << num(px(v)) << "\" y2=\""
           << num(kTop + kSize + 5) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << num(px(v)) << "\" y=\"" << num(kTop + kSize + 20)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << num(v, 1) << "</text>\n";
        os << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(kLeft) << "\" y2=\""
           << num(py(v)) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py(v) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << num(v, 1) << "</text>\n";
    }
    os << "<text x=\"" << num(kLeft + kSize / 2) << "\" y=\"" << num(kTop + kSize + 42)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">False positive rate</text>\n";
    os << "<text x=\"20\" y=\"" << num(kTop + kSize / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"13\" transform=\"rotate(-90 20 "
       << num(kTop + kSize / 2) << ")\">True positive rate</text>\n";
    os << "<line x1=\"" << num(px(0)) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(px(1)) << "\" y2=\"" << num(py(1))
       << "\" stroke=\"#888888\" stroke-dasharray=\"6,4\"/>\n";

    for (std::size_t c = 0; c < curves.size(); ++c) {
        const char* color = kPalette[c % std::size(kPalette)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (const auto& p : curves[c].second.points) {
            os << (first ? "" : " ") << num(px(p.fpr)) << "," << num(py(p.tpr));
            first = false;
        }
        os << "\"/>\n";
    }
    const double legend_h = 22.0 * static_cast<double>(curves.size()) + 10.0;
    const double lx = kLeft + kSize - 230, ly = kTop + kSize - legend_h - 10;
    if (!curves.empty())
        os << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly) << "\" width=\"220\" height=\"" << num(legend_h)
           << "\" fill=\"white\" stroke=\"#444444\"/>\n";
    for (std::size_t c = 0; c < curves.size(); ++c) {
        const char* color = kPalette[c % std::size(kPalette)];
        const double y = ly + 20.0 + 22.0 * static_cast<double>(c);
        os << "<line x1=\"" << num(lx + 10) << "\" y1=\"" << num(y - 4) << "\" x2=\"" << num(lx + 40) << "\" y2=\""
           << num(y - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << num(lx + 48) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"12\">"
           << xml_escape(curves[c].first) << " (AUC = " << format_fixed4(curves[c].second.area()) << ")</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace ids
