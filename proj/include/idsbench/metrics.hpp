#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace ids {

inline constexpr double kDecisionThreshold = 0.5;

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    double threshold = kDecisionThreshold;

    std::size_t total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

struct RocPoint {
    double threshold = 0.0; // +inf for the (0, 0) start
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;

    // Trapezoidal area under the polyline.
    double area() const;
};

struct EvalReport {
    std::string model_id;
    double auc = 0.0;
    double accuracy = 0.0;
    double f_score = 0.0;
    ConfusionMatrix confusion;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

/// Mann-Whitney AUC with midranks: P(score_pos > score_neg) + 0.5 P(tie).
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Predicts positive iff score >= threshold.
ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const std::uint8_t> labels,
                             double threshold = kDecisionThreshold);

// F1 of the positive class; 0 when tp == 0.
double f1(const ConfusionMatrix& c);
double accuracy(const ConfusionMatrix& c);

RocCurve roc_points(std::span<const double> scores, std::span<const std::uint8_t> labels);

EvalReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels, std::string model_id);

nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

// CSV with header "threshold,fpr,tpr"; values printed round-trip exact.
std::string roc_to_csv(const RocCurve& curve);
RocCurve roc_from_csv(std::string_view text);

/// Standalone SVG: unit square axes, dashed chance diagonal, one polyline per
/// curve and a legend "<name> (AUC = x.xxxx)".
std::string render_roc_svg(const std::vector<std::pair<std::string, RocCurve>>& curves, std::string_view title);

/// Fixed 4-decimal rendering, rounding half-up on the exact binary value.
std::string format_fixed4(double value);

} // namespace ids
