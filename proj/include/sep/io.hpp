#pragma once

#include "sep/core.hpp"
#include "sep/errors.hpp"
#include "sep/evalkit.hpp"
#include "sep/folio.hpp"
#include "sep/llmio.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

// JSONL / JSON persistence for every artifact the CLI reads or writes.
// One object per line; all dates ISO-8601; numbers written with nlohmann's
// shortest-round-trip encoding so re-serialization is byte-stable.

namespace sep {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Line-level plumbing
// ---------------------------------------------------------------------------

inline std::vector<Json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<Json> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            rows.push_back(Json::parse(line));
        } catch (const Json::parse_error& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (const Json& row : rows) out << row.dump() << '\n';
}

inline void write_json(const std::filesystem::path& path, const Json& value) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << value.dump(2) << '\n';
}

inline Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

namespace detail {

// Field access that converts schema violations into DataError.
template <typename T>
T field(const Json& row, const char* key) {
    const auto it = row.find(key);
    if (it == row.end()) throw DataError(std::string("missing key '") + key + "'");
    try {
        return it->get<T>();
    } catch (const Json::exception&) {
        throw DataError(std::string("bad value for key '") + key + "'");
    }
}

inline TradingDay day_field(const Json& row, const char* key) {
    try {
        return TradingDay::from_iso(field<std::string>(row, key));
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

} // namespace detail

// Tickers outside the reference universe default to Technology; the files
// carry no sector column.
inline StockSymbol symbol_for(const std::string& ticker) {
    for (const StockSymbol& s : default_universe())
        if (s.ticker == ticker) return s;
    return StockSymbol(ticker, Sector::Technology);
}

inline MovementLabel movement_from_string(const std::string& s) {
    if (s == to_string(MovementLabel::Positive)) return MovementLabel::Positive;
    if (s == to_string(MovementLabel::Negative)) return MovementLabel::Negative;
    throw DataError("unknown movement label: " + s);
}

// ---------------------------------------------------------------------------
// Tweets: {stock, date, id, text, shares[, cluster_id]}
// ---------------------------------------------------------------------------

inline Json to_json(const RawTweet& tweet) {
    return Json{{"stock", tweet.stock.ticker},
                {"date", tweet.day.iso()},
                {"id", tweet.id},
                {"text", tweet.text},
                {"shares", tweet.shares}};
}

inline RawTweet tweet_from_json(const Json& row) {
    try {
        return RawTweet(detail::field<std::string>(row, "id"),
                        symbol_for(detail::field<std::string>(row, "stock")),
                        detail::day_field(row, "date"), detail::field<std::string>(row, "text"),
                        detail::field<std::uint64_t>(row, "shares"));
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

inline std::vector<RawTweet> load_tweets(const std::filesystem::path& path) {
    std::vector<RawTweet> tweets;
    for (const Json& row : read_jsonl(path)) tweets.push_back(tweet_from_json(row));
    return tweets;
}

inline void save_tweets(const std::filesystem::path& path, const std::vector<RawTweet>& tweets,
                        const std::vector<int>* cluster_ids = nullptr) {
    if (cluster_ids && cluster_ids->size() != tweets.size())
        throw ShapeError("cluster ids must parallel the tweet list");
    std::vector<Json> rows;
    rows.reserve(tweets.size());
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        Json row = to_json(tweets[i]);
        if (cluster_ids) row["cluster_id"] = (*cluster_ids)[i];
        rows.push_back(std::move(row));
    }
    write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------
// Prices: {stock, date, open, high, low, close, adj_close, volume}
// ---------------------------------------------------------------------------

inline Json to_json(const PriceBar& bar) {
    return Json{{"stock", bar.stock.ticker}, {"date", bar.day.iso()},
                {"open", bar.open},          {"high", bar.high},
                {"low", bar.low},            {"close", bar.close},
                {"adj_close", bar.adj_close}, {"volume", bar.volume}};
}

inline PriceBar bar_from_json(const Json& row) {
    try {
        return PriceBar(symbol_for(detail::field<std::string>(row, "stock")),
                        detail::day_field(row, "date"), detail::field<double>(row, "open"),
                        detail::field<double>(row, "high"), detail::field<double>(row, "low"),
                        detail::field<double>(row, "close"),
                        detail::field<double>(row, "adj_close"),
                        detail::field<std::uint64_t>(row, "volume"));
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

inline std::vector<PriceBar> load_prices(const std::filesystem::path& path) {
    std::vector<PriceBar> bars;
    for (const Json& row : read_jsonl(path)) bars.push_back(bar_from_json(row));
    return bars;
}

inline void save_prices(const std::filesystem::path& path, const std::vector<PriceBar>& bars) {
    std::vector<Json> rows;
    rows.reserve(bars.size());
    for (const PriceBar& bar : bars) rows.push_back(to_json(bar));
    write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------
// Summaries: {stock, date, facts[], informative}
// ---------------------------------------------------------------------------

inline Json to_json(const FactSummary& summary) {
    return Json{{"stock", summary.stock.ticker},
                {"date", summary.day.iso()},
                {"facts", summary.facts},
                {"informative", summary.informative}};
}

inline FactSummary summary_from_json(const Json& row) {
    FactSummary summary;
    try {
        summary = FactSummary(symbol_for(detail::field<std::string>(row, "stock")),
                              detail::day_field(row, "date"),
                              detail::field<std::vector<std::string>>(row, "facts"));
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    if (detail::field<bool>(row, "informative") != summary.informative)
        throw DataError("informative flag contradicts the fact list for " +
                        summary.stock.ticker + " " + summary.day.iso());
    return summary;
}

inline std::vector<FactSummary> load_summaries(const std::filesystem::path& path) {
    std::vector<FactSummary> summaries;
    for (const Json& row : read_jsonl(path)) summaries.push_back(summary_from_json(row));
    return summaries;
}

inline void save_summaries(const std::filesystem::path& path,
                           const std::vector<FactSummary>& summaries) {
    std::vector<Json> rows;
    rows.reserve(summaries.size());
    for (const FactSummary& s : summaries) rows.push_back(to_json(s));
    write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------
// Windows and responses (embedded in demos / pairs / predictions)
// ---------------------------------------------------------------------------

inline Json to_json(const InputWindow& window) {
    Json summaries = Json::array();
    for (const FactSummary& s : window.summaries())
        summaries.push_back(Json{{"date", s.day.iso()}, {"facts", s.facts}});
    return Json{{"stock", window.stock().ticker},
                {"target", window.target_day().iso()},
                {"summaries", std::move(summaries)}};
}

inline InputWindow window_from_json(const Json& row) {
    const StockSymbol stock = symbol_for(detail::field<std::string>(row, "stock"));
    std::vector<FactSummary> summaries;
    const auto it = row.find("summaries");
    if (it == row.end() || !it->is_array()) throw DataError("window needs a summaries array");
    try {
        for (const Json& s : *it)
            summaries.emplace_back(stock, detail::day_field(s, "date"),
                                   detail::field<std::vector<std::string>>(s, "facts"));
        return InputWindow(stock, detail::day_field(row, "target"), std::move(summaries));
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

inline Json to_json(const PredictionResponse& response) {
    return Json{{"label", to_string(response.label)},
                {"explanation", response.explanation},
                {"raw", response.raw}};
}

inline PredictionResponse response_from_json(const Json& row) {
    PredictionResponse response;
    try {
        response.label = predicted_label_from_string(detail::field<std::string>(row, "label"));
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    response.explanation = detail::field<std::string>(row, "explanation");
    response.raw = detail::field<std::string>(row, "raw");
    return response;
}

// ---------------------------------------------------------------------------
// Demonstrations and comparison pairs
// ---------------------------------------------------------------------------

inline Json to_json(const DemonstrationSample& demo) {
    return Json{{"window", to_json(demo.window())},
                {"response", to_json(demo.response())},
                {"truth", to_string(demo.truth())}};
}

inline DemonstrationSample demo_from_json(const Json& row) {
    try {
        return DemonstrationSample(window_from_json(row.at("window")),
                                   response_from_json(row.at("response")),
                                   movement_from_string(detail::field<std::string>(row, "truth")));
    } catch (const Json::exception&) {
        throw DataError("demonstration row missing window or response");
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

inline std::vector<DemonstrationSample> load_demos(const std::filesystem::path& path) {
    std::vector<DemonstrationSample> demos;
    for (const Json& row : read_jsonl(path)) demos.push_back(demo_from_json(row));
    return demos;
}

inline void save_demos(const std::filesystem::path& path,
                       const std::vector<DemonstrationSample>& demos) {
    std::vector<Json> rows;
    rows.reserve(demos.size());
    for (const DemonstrationSample& d : demos) rows.push_back(to_json(d));
    write_jsonl(path, rows);
}

inline Json to_json(const ComparisonPair& pair) {
    return Json{{"window", to_json(pair.window())},
                {"winner", to_json(pair.winner())},
                {"loser", to_json(pair.loser())},
                {"resolved_iteration", pair.resolved_iteration()},
                {"truth", to_string(pair.truth())}};
}

inline ComparisonPair pair_from_json(const Json& row) {
    try {
        return ComparisonPair(window_from_json(row.at("window")),
                              response_from_json(row.at("winner")),
                              response_from_json(row.at("loser")),
                              detail::field<int>(row, "resolved_iteration"),
                              movement_from_string(detail::field<std::string>(row, "truth")));
    } catch (const Json::exception&) {
        throw DataError("comparison row missing window, winner, or loser");
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

inline std::vector<ComparisonPair> load_pairs(const std::filesystem::path& path) {
    std::vector<ComparisonPair> pairs;
    for (const Json& row : read_jsonl(path)) pairs.push_back(pair_from_json(row));
    return pairs;
}

inline void save_pairs(const std::filesystem::path& path,
                       const std::vector<ComparisonPair>& pairs) {
    std::vector<Json> rows;
    rows.reserve(pairs.size());
    for (const ComparisonPair& p : pairs) rows.push_back(to_json(p));
    write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------
// Predictions: {stock, date, label, explanation, informative, candidates_scored[]}
// ---------------------------------------------------------------------------

struct ScoredCandidate {
    std::string raw;
    double reward = 0.0;
};

struct PredictionRow {
    StockSymbol stock;
    TradingDay day;
    PredictionResponse response;
    bool informative = true;  // the window eve had facts; kept for filtering
    std::vector<ScoredCandidate> candidates_scored;
};

inline Json to_json(const PredictionRow& row) {
    Json candidates = Json::array();
    for (const ScoredCandidate& c : row.candidates_scored)
        candidates.push_back(Json{{"raw", c.raw}, {"reward", c.reward}});
    return Json{{"stock", row.stock.ticker},
                {"date", row.day.iso()},
                {"label", to_string(row.response.label)},
                {"explanation", row.response.explanation},
                {"raw", row.response.raw},
                {"informative", row.informative},
                {"candidates_scored", std::move(candidates)}};
}

inline PredictionRow prediction_from_json(const Json& row) {
    PredictionRow out;
    out.stock = symbol_for(detail::field<std::string>(row, "stock"));
    out.day = detail::day_field(row, "date");
    try {
        out.response.label =
            predicted_label_from_string(detail::field<std::string>(row, "label"));
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    out.response.explanation = detail::field<std::string>(row, "explanation");
    out.response.raw = detail::field<std::string>(row, "raw");
    out.informative = detail::field<bool>(row, "informative");
    const auto it = row.find("candidates_scored");
    if (it != row.end() && it->is_array()) {
        for (const Json& c : *it)
            out.candidates_scored.push_back(
                {detail::field<std::string>(c, "raw"), detail::field<double>(c, "reward")});
    }
    return out;
}

inline std::vector<PredictionRow> load_predictions(const std::filesystem::path& path) {
    std::vector<PredictionRow> rows;
    for (const Json& row : read_jsonl(path)) rows.push_back(prediction_from_json(row));
    return rows;
}

inline void save_predictions(const std::filesystem::path& path,
                             const std::vector<PredictionRow>& predictions) {
    std::vector<Json> rows;
    rows.reserve(predictions.size());
    for (const PredictionRow& p : predictions) rows.push_back(to_json(p));
    write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------
// Portfolio weights: {date, weights{ticker: real}}
// ---------------------------------------------------------------------------

inline Json to_json(const PortfolioWeights& weights) {
    Json map = Json::object();
    for (const auto& [stock, weight] : weights.weights()) map[stock.ticker] = weight;
    return Json{{"date", weights.day().iso()}, {"weights", std::move(map)}};
}

inline PortfolioWeights weights_from_json(const Json& row) {
    const TradingDay day = detail::day_field(row, "date");
    const auto it = row.find("weights");
    if (it == row.end() || !it->is_object()) throw DataError("weights row needs a weights map");
    std::map<StockSymbol, double> weights;
    for (const auto& [ticker, value] : it->items()) {
        if (!value.is_number()) throw DataError("weight for " + ticker + " is not a number");
        weights[symbol_for(ticker)] = value.get<double>();
    }
    try {
        return PortfolioWeights(day, std::move(weights));
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

inline std::vector<PortfolioWeights> load_weights(const std::filesystem::path& path) {
    std::vector<PortfolioWeights> rows;
    for (const Json& row : read_jsonl(path)) rows.push_back(weights_from_json(row));
    return rows;
}

inline void save_weights(const std::filesystem::path& path,
                         const std::vector<PortfolioWeights>& weights) {
    std::vector<Json> rows;
    rows.reserve(weights.size());
    for (const PortfolioWeights& w : weights) rows.push_back(to_json(w));
    write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline Json to_json(const MetricsReport& report) {
    return Json{{"accuracy", report.accuracy_value},
                {"mcc", report.mcc_value},
                {"counts",
                 Json{{"tp", report.counts.tp},
                      {"fp", report.counts.fp},
                      {"tn", report.counts.tn},
                      {"fn", report.counts.fn}}},
                {"n_samples", report.n_samples},
                {"filter", report.filter}};
}

inline void save_report(const std::filesystem::path& path, const MetricsReport& report) {
    write_json(path, to_json(report));
}

inline Json to_json(const BacktestReport& report) {
    return Json{{"overall", report.overall},
                {"cumulative", report.cumulative},
                {"std_dev", report.std_dev},
                {"sharpe", report.sharpe},
                {"sharpe_defined", report.sharpe_defined}};
}

inline void save_backtest_report(const std::filesystem::path& path,
                                 const BacktestReport& report) {
    write_json(path, to_json(report));
}

// ---------------------------------------------------------------------------
// Session journal: {template, request, replies[], timestamp}
// ---------------------------------------------------------------------------

inline Json to_json(const JournalEntry& entry) {
    Json messages = Json::array();
    for (const ChatMessage& m : entry.request.messages)
        messages.push_back(Json{{"role", to_string(m.role)}, {"content", m.content}});
    return Json{{"template", entry.template_name},
                {"request",
                 Json{{"template", entry.request.template_name},
                      {"messages", std::move(messages)},
                      {"temperature", entry.request.temperature},
                      {"n", entry.request.n},
                      {"max_tokens", entry.request.max_tokens}}},
                {"replies", entry.replies},
                {"timestamp", entry.timestamp}};
}

inline JournalEntry journal_entry_from_json(const Json& row) {
    JournalEntry entry;
    entry.template_name = detail::field<std::string>(row, "template");
    const auto it = row.find("request");
    if (it == row.end() || !it->is_object()) throw DataError("journal row needs a request");
    std::vector<ChatMessage> messages;
    const auto msgs = it->find("messages");
    if (msgs == it->end() || !msgs->is_array())
        throw DataError("journal request needs a messages array");
    try {
        for (const Json& m : *msgs)
            messages.emplace_back(chat_role_from_string(detail::field<std::string>(m, "role")),
                                  detail::field<std::string>(m, "content"));
        entry.request = CompletionRequest(
            detail::field<std::string>(*it, "template"), std::move(messages),
            detail::field<double>(*it, "temperature"), detail::field<int>(*it, "n"),
            detail::field<int>(*it, "max_tokens"));
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    entry.replies = detail::field<std::vector<std::string>>(row, "replies");
    entry.timestamp = detail::field<std::string>(row, "timestamp");
    return entry;
}

inline std::vector<JournalEntry> load_journal(const std::filesystem::path& path) {
    std::vector<JournalEntry> entries;
    for (const Json& row : read_jsonl(path)) entries.push_back(journal_entry_from_json(row));
    return entries;
}

inline void save_journal(const std::filesystem::path& path,
                         const std::vector<JournalEntry>& entries) {
    std::vector<Json> rows;
    rows.reserve(entries.size());
    for (const JournalEntry& e : entries) rows.push_back(to_json(e));
    write_jsonl(path, rows);
}

// Script files for the mock backend: {template, replies[]} per line, enqueued
// in file order.
inline void load_script_into(ScriptedBackend& backend, const std::filesystem::path& path) {
    for (const Json& row : read_jsonl(path)) {
        backend.enqueue_all(detail::field<std::string>(row, "template"),
                            detail::field<std::vector<std::string>>(row, "replies"));
    }
}

// ---------------------------------------------------------------------------
// Training traces: {stage, epoch, value}
// ---------------------------------------------------------------------------

inline void save_trace(const std::filesystem::path& path, const std::string& stage,
                       const std::vector<double>& trace) {
    std::vector<Json> rows;
    rows.reserve(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i)
        rows.push_back(Json{{"stage", stage}, {"epoch", i}, {"value", trace[i]}});
    write_jsonl(path, rows);
}

} // namespace sep
