#pragma once

#include "sep/core.hpp"
#include "sep/errors.hpp"
#include "sep/llmio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Portfolio extension: buy the positive-predicted names with LLM-chosen
// weights, reflect on realized profit, and backtest the daily series.

namespace sep {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

// Long-only weights for one day; empty means uninvested.
class PortfolioWeights {
  public:
    PortfolioWeights() = default;
    PortfolioWeights(TradingDay day, std::map<StockSymbol, double> weights)
        : day_(day), weights_(std::move(weights)) {
        double sum = 0.0;
        for (const auto& [stock, weight] : weights_) {
            if (!(weight >= 0.0))
                throw std::invalid_argument("no short sales: weight for " + stock.ticker +
                                            " is negative");
            sum += weight;
        }
        if (!weights_.empty() && std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("weights must sum to 1, got " + std::to_string(sum));
    }

    const TradingDay& day() const { return day_; }
    const std::map<StockSymbol, double>& weights() const { return weights_; }
    bool empty() const { return weights_.empty(); }

  private:
    TradingDay day_;
    std::map<StockSymbol, double> weights_;
};

struct BacktestReport {
    double overall = 0.0;     // sum of daily profits
    double cumulative = 0.0;  // compounded, re-investing gains and losses
    double std_dev = 0.0;     // sample standard deviation (n-1)
    double sharpe = 0.0;      // annualized by sqrt(252)
    bool sharpe_defined = true;
};

// ---------------------------------------------------------------------------
// Selection and weight generation
// ---------------------------------------------------------------------------

inline std::vector<StockSymbol> select_positive(
    const std::map<StockSymbol, PredictionResponse>& day_predictions) {
    std::vector<StockSymbol> picked;
    for (const auto& [stock, response] : day_predictions)
        if (response.label == PredictedLabel::Positive) picked.push_back(stock);
    return picked;
}

namespace templates {

inline PromptTemplate portfolio() {
    return PromptTemplate(
        "portfolio",
        "You manage a long-only stock portfolio for {date}.\n"
        "Your outlook for each candidate stock:\n{outlooks}\n"
        "Decide how to split the capital across these stocks.\n"
        "Reply with one line per stock in the form TICKER: weight, using\n"
        "non-negative numbers. Larger numbers mean more conviction.");
}

inline PromptTemplate portfolio_reflect() {
    return PromptTemplate(
        "portfolio_reflect",
        "You allocated a long-only portfolio for {date} as:\n{weights}\n"
        "Your outlook for each stock was:\n{outlooks}\n"
        "The realized profit of that allocation was {profit}.\n"
        "Reflect on the allocation and propose revised weights that would\n"
        "have captured more of the day's moves.\n"
        "Reply with one line per stock in the form TICKER: weight, using\n"
        "non-negative numbers.");
}

} // namespace templates

namespace detail {

// Parses `TICKER: number` lines against a known universe. Unknown tickers and
// unparseable numbers are ignored; negatives clamp to zero.
inline std::map<StockSymbol, double> parse_weight_lines(
    const std::string& reply, const std::map<StockSymbol, std::string>& known) {
    std::map<StockSymbol, double> raw;
    for (const auto& [stock, text] : known) raw[stock] = 0.0;

    std::size_t start = 0;
    while (start <= reply.size()) {
        const std::size_t end = reply.find('\n', start);
        const std::string line =
            reply.substr(start, end == std::string::npos ? std::string::npos : end - start);
        start = end == std::string::npos ? reply.size() + 1 : end + 1;

        const std::size_t colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string ticker = line.substr(0, colon);
        while (!ticker.empty() && std::isspace(static_cast<unsigned char>(ticker.front())))
            ticker.erase(ticker.begin());
        while (!ticker.empty() && std::isspace(static_cast<unsigned char>(ticker.back())))
            ticker.pop_back();
        if (ticker.empty()) continue;
        for (char& c : ticker) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));

        auto hit = raw.end();
        for (auto it = raw.begin(); it != raw.end(); ++it)
            if (it->first.ticker == ticker) hit = it;
        if (hit == raw.end()) continue;

        const std::string value_text = line.substr(colon + 1);
        char* parsed_end = nullptr;
        const double value = std::strtod(value_text.c_str(), &parsed_end);
        if (parsed_end == value_text.c_str() || !std::isfinite(value)) continue;
        hit->second = std::max(0.0, value);
    }
    return raw;
}

inline std::map<StockSymbol, double> normalize_or_equalize(std::map<StockSymbol, double> raw) {
    double sum = 0.0;
    for (const auto& [stock, weight] : raw) sum += weight;
    if (sum > 0.0) {
        for (auto& [stock, weight] : raw) weight /= sum;
    } else {
        const double equal = 1.0 / static_cast<double>(raw.size());
        for (auto& [stock, weight] : raw) weight = equal;
    }
    return raw;
}

inline std::string format_weight_lines(const std::map<StockSymbol, double>& weights) {
    std::string out;
    char buffer[64];
    for (const auto& [stock, weight] : weights) {
        std::snprintf(buffer, sizeof(buffer), "%.6f", weight);
        if (!out.empty()) out += "\n";
        out += stock.ticker + ": " + buffer;
    }
    return out;
}

} // namespace detail

// Asks the backend for an allocation over the explained stocks, then clamps,
// fills gaps with zero, and renormalizes. An all-zero reply falls back to
// equal weights.
inline PortfolioWeights generate_weights(Backend& backend, TradingDay day,
                                         const std::map<StockSymbol, std::string>& explanations,
                                         const RetryPolicy& retry = {},
                                         const Sleeper& sleeper = {}) {
    if (explanations.empty())
        throw std::invalid_argument("generate_weights needs at least one explained stock");

    std::string outlooks;
    for (const auto& [stock, text] : explanations) {
        if (!outlooks.empty()) outlooks += "\n";
        outlooks += stock.ticker + ": " + text;
    }
    const CompletionRequest request = build_request(
        templates::portfolio(), {{"date", day.iso()}, {"outlooks", outlooks}});
    const std::string reply = complete(backend, request, retry, sleeper).front();
    return PortfolioWeights(
        day, detail::normalize_or_equalize(detail::parse_weight_lines(reply, explanations)));
}

// ---------------------------------------------------------------------------
// Profit accounting
// ---------------------------------------------------------------------------

inline double daily_profit(const PortfolioWeights& weights,
                           const std::map<StockSymbol, double>& returns) {
    double profit = 0.0;
    for (const auto& [stock, weight] : weights.weights()) {
        if (weight == 0.0) continue;
        const auto it = returns.find(stock);
        if (it == returns.end())
            throw MissingReturnError("no return for " + stock.ticker + " on " +
                                     weights.day().iso());
        profit += weight * it->second;
    }
    return profit;
}

// A profit-ranked pair of allocations for the same day.
struct WeightsPair {
    PortfolioWeights winner;
    PortfolioWeights loser;
    double winner_profit = 0.0;
    double loser_profit = 0.0;
};

// One reflect-and-revise round; the allocation with strictly higher realized
// profit wins. Equal profits give no pair.
inline std::optional<WeightsPair> profit_reflect_pair(
    Backend& backend, const std::map<StockSymbol, std::string>& explanations,
    const PortfolioWeights& first, const std::map<StockSymbol, double>& realized_returns,
    const RetryPolicy& retry = {}, const Sleeper& sleeper = {}) {
    if (explanations.empty())
        throw std::invalid_argument("profit_reflect_pair needs the explained stocks");

    const double first_profit = daily_profit(first, realized_returns);
    std::string outlooks;
    for (const auto& [stock, text] : explanations) {
        if (!outlooks.empty()) outlooks += "\n";
        outlooks += stock.ticker + ": " + text;
    }
    char profit_text[64];
    std::snprintf(profit_text, sizeof(profit_text), "%.6f", first_profit);
    const CompletionRequest request =
        build_request(templates::portfolio_reflect(),
                      {{"date", first.day().iso()},
                       {"weights", detail::format_weight_lines(first.weights())},
                       {"outlooks", outlooks},
                       {"profit", profit_text}});
    const std::string reply = complete(backend, request, retry, sleeper).front();
    const PortfolioWeights revised(
        first.day(),
        detail::normalize_or_equalize(detail::parse_weight_lines(reply, explanations)));
    const double revised_profit = daily_profit(revised, realized_returns);

    if (revised_profit == first_profit) return std::nullopt;
    WeightsPair pair;
    if (revised_profit > first_profit) {
        pair.winner = revised;
        pair.loser = first;
        pair.winner_profit = revised_profit;
        pair.loser_profit = first_profit;
    } else {
        pair.winner = first;
        pair.loser = revised;
        pair.winner_profit = first_profit;
        pair.loser_profit = revised_profit;
    }
    return pair;
}

// ---------------------------------------------------------------------------
// Backtest
// ---------------------------------------------------------------------------

inline BacktestReport backtest_profits(const std::vector<double>& profits) {
    if (profits.size() < 2)
        throw InsufficientHistory("backtest needs at least 2 days, got " +
                                  std::to_string(profits.size()));
    BacktestReport report;
    double compounded = 1.0;
    for (const double p : profits) {
        report.overall += p;
        compounded *= 1.0 + p;
    }
    report.cumulative = compounded - 1.0;

    const double mean = report.overall / static_cast<double>(profits.size());
    double squares = 0.0;
    for (const double p : profits) squares += (p - mean) * (p - mean);
    report.std_dev = std::sqrt(squares / static_cast<double>(profits.size() - 1));

    if (report.std_dev == 0.0) {
        report.sharpe = 0.0;
        report.sharpe_defined = false;
    } else {
        report.sharpe = mean / report.std_dev * std::sqrt(252.0);
        report.sharpe_defined = true;
    }
    return report;
}

using BacktestDay = std::pair<PortfolioWeights, std::map<StockSymbol, double>>;

inline BacktestReport backtest(const std::vector<BacktestDay>& series) {
    std::vector<double> profits;
    profits.reserve(series.size());
    for (const BacktestDay& day : series)
        profits.push_back(daily_profit(day.first, day.second));
    return backtest_profits(profits);
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

enum class BaselineKind { EqualWeight, PositiveOnly };

inline PortfolioWeights baseline_weights(
    BaselineKind kind, const std::vector<StockSymbol>& universe, TradingDay day,
    const std::map<StockSymbol, PredictionResponse>& day_predictions = {}) {
    if (universe.empty()) throw std::invalid_argument("baseline needs a non-empty universe");

    std::vector<StockSymbol> picked;
    if (kind == BaselineKind::EqualWeight) {
        picked = universe;
    } else {
        for (const StockSymbol& stock : select_positive(day_predictions)) picked.push_back(stock);
    }
    std::map<StockSymbol, double> weights;
    if (!picked.empty()) {
        const double equal = 1.0 / static_cast<double>(picked.size());
        for (const StockSymbol& stock : picked) weights[stock] = equal;
    }
    return PortfolioWeights(day, std::move(weights));
}

} // namespace sep
