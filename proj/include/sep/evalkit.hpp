#pragma once

#include "sep/core.hpp"
#include "sep/errors.hpp"
#include "sep/llmio.hpp"
#include "sep/pipeline.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

// Classification metrics over binary movement truths, the informative-day
// filter, and the ten-metric judge rubric for explanation quality.

namespace sep {

// ---------------------------------------------------------------------------
// Confusion counts
// ---------------------------------------------------------------------------

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Non-decisive predictions (Neutral, Mixed, Malformed) either land in the
// wrong cell for their truth or drop out of the matrix entirely.
enum class NonDecisivePolicy { WrongCell, Exclude };

inline ConfusionCounts confusion(const std::vector<PredictedLabel>& predictions,
                                 const std::vector<MovementLabel>& truths,
                                 NonDecisivePolicy policy = NonDecisivePolicy::WrongCell) {
    if (predictions.size() != truths.size())
        throw ShapeError("confusion needs equal-length predictions and truths, got " +
                         std::to_string(predictions.size()) + " and " +
                         std::to_string(truths.size()));
    if (predictions.empty()) throw ShapeError("confusion needs at least one sample");

    ConfusionCounts counts;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool truth_positive = truths[i] == MovementLabel::Positive;
        switch (predictions[i]) {
            case PredictedLabel::Positive:
                truth_positive ? ++counts.tp : ++counts.fp;
                break;
            case PredictedLabel::Negative:
                truth_positive ? ++counts.fn : ++counts.tn;
                break;
            default:
                if (policy == NonDecisivePolicy::WrongCell)
                    truth_positive ? ++counts.fn : ++counts.fp;
                break;
        }
    }
    return counts;
}

inline double accuracy(const ConfusionCounts& counts) {
    if (counts.total() == 0) throw UndefinedMetric("accuracy of zero scored samples");
    return static_cast<double>(counts.tp + counts.tn) / static_cast<double>(counts.total());
}

// Matthews correlation; any zero marginal makes the denominator degenerate
// and the convention here returns 0.
inline double mcc(const ConfusionCounts& counts) {
    if (counts.total() == 0) throw UndefinedMetric("mcc of zero scored samples");
    const double tp = static_cast<double>(counts.tp);
    const double fp = static_cast<double>(counts.fp);
    const double tn = static_cast<double>(counts.tn);
    const double fn = static_cast<double>(counts.fn);
    const double f1 = tp + fp;
    const double f2 = tp + fn;
    const double f3 = tn + fp;
    const double f4 = tn + fn;
    if (f1 == 0.0 || f2 == 0.0 || f3 == 0.0 || f4 == 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(f1 * f2 * f3 * f4);
}

// ---------------------------------------------------------------------------
// Evaluation samples and the informative filter
// ---------------------------------------------------------------------------

struct EvalSample {
    InputWindow window;
    PredictedLabel prediction = PredictedLabel::Malformed;
    MovementLabel truth = MovementLabel::Positive;
};

inline ConfusionCounts confusion(const std::vector<EvalSample>& samples,
                                 NonDecisivePolicy policy = NonDecisivePolicy::WrongCell) {
    std::vector<PredictedLabel> predictions;
    std::vector<MovementLabel> truths;
    predictions.reserve(samples.size());
    truths.reserve(samples.size());
    for (const EvalSample& s : samples) {
        predictions.push_back(s.prediction);
        truths.push_back(s.truth);
    }
    return confusion(predictions, truths, policy);
}

// Keeps samples whose target-eve summary (the latest day in the window)
// carries facts.
inline std::vector<EvalSample> filter_informative(const std::vector<EvalSample>& samples) {
    std::vector<EvalSample> kept;
    for (const EvalSample& s : samples)
        if (s.window.summaries().back().informative) kept.push_back(s);
    return kept;
}

struct MetricsReport {
    ConfusionCounts counts;
    double accuracy_value = 0.0;
    double mcc_value = 0.0;
    std::size_t n_samples = 0;
    std::string filter;  // "all" or "informative"
};

inline MetricsReport evaluate_samples(const std::vector<EvalSample>& samples,
                                      bool informative_only,
                                      NonDecisivePolicy policy = NonDecisivePolicy::WrongCell) {
    const std::vector<EvalSample> scored =
        informative_only ? filter_informative(samples) : samples;
    MetricsReport report;
    report.filter = informative_only ? "informative" : "all";
    report.n_samples = scored.size();
    report.counts = confusion(scored, policy);
    report.accuracy_value = accuracy(report.counts);
    report.mcc_value = mcc(report.counts);
    return report;
}

// ---------------------------------------------------------------------------
// Judge rubric
// ---------------------------------------------------------------------------

struct RubricMetric {
    std::string name;
    std::vector<std::string> questions;
};

inline const std::vector<RubricMetric>& rubric_metrics() {
    static const std::vector<RubricMetric> metrics = {
        {"Relevance to Stock Movement",
         {"Does the explanation focus on factors directly related to the stock's movement?"}},
        {"Financial Metrics",
         {"Does the explanation include relevant financial metrics (e.g., earnings estimates, "
          "market cap)?",
          "Are these metrics explained in the context of their impact on stock performance?"}},
        {"Global & Industry Factors",
         {"Does the explanation consider broader economic conditions or industry trends that may "
          "impact the stock?",
          "Is there an understanding of how global events could influence the stock's "
          "performance?"}},
        {"Company Developments",
         {"Are specific developments related to the company discussed?",
          "Is there an understanding of how these developments might influence the stock?"}},
        {"Temporal Awareness",
         {"Does the explanation consider the timing of events and developments?",
          "Is there an acknowledgment of the temporal dynamics of the stock market?"}},
        {"Balance of Positive & Negative",
         {"Is there an attempt to balance positive and negative factors?",
          "Does the explanation recognize mitigating factors that could counteract positive or "
          "negative sentiments?"}},
        {"Contextual Understanding",
         {"Does the explanation demonstrate a nuanced understanding of the context in which the "
          "news is presented?",
          "Is there an awareness of the complexities and uncertainties in predicting stock "
          "movements?"}},
        {"Clarity & Coherence",
         {"Is the explanation clear and easy to understand?",
          "Does it present a coherent narrative that connects various factors logically?"}},
        {"Consistency with Information",
         {"Is the information consistent with known facts and events?",
          "Are there any inaccuracies or contradictions in the explanation?"}},
        {"Sensitivity to Updates",
         {"Does the explanation show sensitivity to the possibility of changing circumstances or "
          "new information that could affect the stock?"}}};
    return metrics;
}

inline PromptTemplate judge_template() {
    return PromptTemplate(
        "judge_rubric",
        "You are grading the quality of a stock-movement explanation.\n"
        "Metric: {metric}\n"
        "Consider:\n{questions}\n"
        "The model saw these daily facts:\n{facts}\n"
        "The model's explanation was:\n{explanation}\n"
        "Rate the explanation on this metric from 1 to 7. Reply with the number only.");
}

// One rendered judge prompt per rubric metric, in the fixed rubric order.
inline std::vector<std::string> export_rubric(const PredictionResponse& prediction,
                                              const InputWindow& window) {
    const PromptTemplate judge = judge_template();
    const std::string facts = format_window(window);
    const std::string explanation =
        prediction.explanation.empty() ? "(no explanation given)" : prediction.explanation;

    std::vector<std::string> prompts;
    prompts.reserve(rubric_metrics().size());
    for (const RubricMetric& metric : rubric_metrics()) {
        std::string questions;
        for (const std::string& q : metric.questions) {
            if (!questions.empty()) questions += "\n";
            questions += "- " + q;
        }
        const std::vector<ChatMessage> messages = render(judge, {{"metric", metric.name},
                                                                 {"questions", questions},
                                                                 {"facts", facts},
                                                                 {"explanation", explanation}});
        prompts.push_back(messages.back().content);
    }
    return prompts;
}

} // namespace sep
