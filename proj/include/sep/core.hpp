#pragma once

#include "sep/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Domain vocabulary shared by every other header: stocks, days, corpora,
// labels, windows, responses, episode memory. All types are immutable values
// once constructed; constructors reject invariant violations.

namespace sep {

// ---------------------------------------------------------------------------
// Sectors and stocks
// ---------------------------------------------------------------------------

enum class Sector {
    BasicMaterials,
    FinancialServices,
    ConsumerDefensive,
    Utilities,
    Energy,
    Technology,
    ConsumerCyclical,
    RealEstate,
    Healthcare,
    CommunicationServices,
    Industrials,
};

inline constexpr std::array<Sector, 11> kAllSectors = {
    Sector::BasicMaterials,    Sector::FinancialServices,
    Sector::ConsumerDefensive, Sector::Utilities,
    Sector::Energy,            Sector::Technology,
    Sector::ConsumerCyclical,  Sector::RealEstate,
    Sector::Healthcare,        Sector::CommunicationServices,
    Sector::Industrials,
};

inline std::string to_string(Sector s) {
    switch (s) {
        case Sector::BasicMaterials: return "Basic Materials";
        case Sector::FinancialServices: return "Financial Services";
        case Sector::ConsumerDefensive: return "Consumer Defensive";
        case Sector::Utilities: return "Utilities";
        case Sector::Energy: return "Energy";
        case Sector::Technology: return "Technology";
        case Sector::ConsumerCyclical: return "Consumer Cyclical";
        case Sector::RealEstate: return "Real Estate";
        case Sector::Healthcare: return "Healthcare";
        case Sector::CommunicationServices: return "Communication Services";
        case Sector::Industrials: return "Industrials";
    }
    throw std::invalid_argument("unknown sector");
}

inline Sector sector_from_string(std::string_view name) {
    for (Sector s : kAllSectors) {
        if (to_string(s) == name) return s;
    }
    throw std::invalid_argument("unknown sector: " + std::string(name));
}

struct StockSymbol {
    std::string ticker;
    Sector industry = Sector::Technology;

    StockSymbol() = default;
    StockSymbol(std::string ticker_, Sector industry_)
        : ticker(std::move(ticker_)), industry(industry_) {
        if (ticker.empty()) throw std::invalid_argument("ticker must be non-empty");
        for (char& c : ticker) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }

    friend bool operator==(const StockSymbol& a, const StockSymbol& b) {
        return a.ticker == b.ticker && a.industry == b.industry;
    }
    friend bool operator<(const StockSymbol& a, const StockSymbol& b) {
        return a.ticker < b.ticker;
    }
};

// ---------------------------------------------------------------------------
// Calendar days
// ---------------------------------------------------------------------------

struct TradingDay {
    int year = 1970;
    int month = 1;
    int day = 1;

    TradingDay() = default;
    TradingDay(int y, int m, int d) : year(y), month(m), day(d) {
        if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m))
            throw std::invalid_argument("invalid calendar date");
    }

    static bool leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

    static int days_in_month(int y, int m) {
        static constexpr int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        if (m == 2 && leap_year(y)) return 29;
        return lengths[m - 1];
    }

    // Strict YYYY-MM-DD.
    static TradingDay from_iso(std::string_view s) {
        int y = 0, m = 0, d = 0;
        char dash1 = 0, dash2 = 0;
        if (s.size() != 10 ||
            std::sscanf(std::string(s).c_str(), "%4d%c%2d%c%2d", &y, &dash1, &m, &dash2, &d) != 5 ||
            dash1 != '-' || dash2 != '-')
            throw std::invalid_argument("expected ISO-8601 date (YYYY-MM-DD): " + std::string(s));
        return TradingDay(y, m, d);
    }

    std::string iso() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    friend auto operator<=>(const TradingDay& a, const TradingDay& b) {
        if (auto c = a.year <=> b.year; c != 0) return c;
        if (auto c = a.month <=> b.month; c != 0) return c;
        return a.day <=> b.day;
    }
    friend bool operator==(const TradingDay&, const TradingDay&) = default;
};

// ---------------------------------------------------------------------------
// Texts and summaries
// ---------------------------------------------------------------------------

struct RawTweet {
    std::string id;
    StockSymbol stock;
    TradingDay day;
    std::string text;
    std::uint64_t shares = 0;

    RawTweet() = default;
    RawTweet(std::string id_, StockSymbol stock_, TradingDay day_, std::string text_,
             std::uint64_t shares_)
        : id(std::move(id_)), stock(std::move(stock_)), day(day_), text(std::move(text_)),
          shares(shares_) {
        if (text.empty()) throw std::invalid_argument("tweet text must be non-empty");
    }
};

struct DailyCorpus {
    StockSymbol stock;
    TradingDay day;
    std::vector<RawTweet> tweets;

    DailyCorpus() = default;
    DailyCorpus(StockSymbol stock_, TradingDay day_, std::vector<RawTweet> tweets_)
        : stock(std::move(stock_)), day(day_), tweets(std::move(tweets_)) {
        for (const RawTweet& t : tweets) {
            if (t.stock.ticker != stock.ticker || t.day != day)
                throw std::invalid_argument("corpus tweet does not match stock/day");
        }
    }

    std::size_t size() const { return tweets.size(); }
};

struct FactSummary {
    StockSymbol stock;
    TradingDay day;
    std::vector<std::string> facts;
    bool informative = false;  // false iff facts is empty

    FactSummary() = default;
    FactSummary(StockSymbol stock_, TradingDay day_, std::vector<std::string> facts_)
        : stock(std::move(stock_)), day(day_), facts(std::move(facts_)),
          informative(!facts.empty()) {
        for (const std::string& f : facts) {
            if (f.empty()) throw std::invalid_argument("facts must be non-empty strings");
        }
    }
};

// A stock plus an ordered run of daily fact summaries, the evidence fed to
// every explain/predict call for the following target day.
class InputWindow {
  public:
    InputWindow() = default;
    InputWindow(StockSymbol stock, TradingDay target_day, std::vector<FactSummary> summaries)
        : stock_(std::move(stock)), target_day_(target_day), summaries_(std::move(summaries)) {
        if (summaries_.empty()) throw std::invalid_argument("window needs at least one summary");
        for (std::size_t i = 0; i < summaries_.size(); ++i) {
            if (summaries_[i].stock.ticker != stock_.ticker)
                throw std::invalid_argument("window summary for a different stock");
            if (i > 0 && !(summaries_[i - 1].day < summaries_[i].day))
                throw std::invalid_argument("window days must be strictly increasing");
        }
        if (!(summaries_.back().day < target_day_))
            throw std::invalid_argument("last summary day must precede target day");
    }

    const StockSymbol& stock() const { return stock_; }
    const TradingDay& target_day() const { return target_day_; }
    const std::vector<FactSummary>& summaries() const { return summaries_; }
    std::size_t span() const { return summaries_.size(); }

  private:
    StockSymbol stock_;
    TradingDay target_day_;
    std::vector<FactSummary> summaries_;
};

// ---------------------------------------------------------------------------
// Labels and responses
// ---------------------------------------------------------------------------

// Ground-truth movement; Positive encodes 1, Negative 0.
enum class MovementLabel : int { Negative = 0, Positive = 1 };

enum class PredictedLabel { Positive, Negative, Neutral, Mixed, Malformed };

inline std::string to_string(MovementLabel label) {
    return label == MovementLabel::Positive ? "Positive" : "Negative";
}

inline std::string to_string(PredictedLabel label) {
    switch (label) {
        case PredictedLabel::Positive: return "Positive";
        case PredictedLabel::Negative: return "Negative";
        case PredictedLabel::Neutral: return "Neutral";
        case PredictedLabel::Mixed: return "Mixed";
        case PredictedLabel::Malformed: return "Malformed";
    }
    throw std::invalid_argument("unknown predicted label");
}

inline PredictedLabel predicted_label_from_string(std::string_view s) {
    if (s == "Positive") return PredictedLabel::Positive;
    if (s == "Negative") return PredictedLabel::Negative;
    if (s == "Neutral") return PredictedLabel::Neutral;
    if (s == "Mixed") return PredictedLabel::Mixed;
    if (s == "Malformed") return PredictedLabel::Malformed;
    throw std::invalid_argument("unknown predicted label: " + std::string(s));
}

// Neutral, Mixed and Malformed never match either ground truth.
inline bool matches(PredictedLabel predicted, MovementLabel truth) {
    if (predicted == PredictedLabel::Positive) return truth == MovementLabel::Positive;
    if (predicted == PredictedLabel::Negative) return truth == MovementLabel::Negative;
    return false;
}

// Parsed movement label plus free-text explanation; raw keeps the backend
// output verbatim so downstream featurizers and journals see exactly what the
// model said.
struct PredictionResponse {
    PredictedLabel label = PredictedLabel::Malformed;
    std::string explanation;
    std::string raw;

    friend bool operator==(const PredictionResponse&, const PredictionResponse&) = default;
};

struct ReflectionRecord {
    int iteration = 0;
    std::string feedback;

    ReflectionRecord() = default;
    ReflectionRecord(int iteration_, std::string feedback_)
        : iteration(iteration_), feedback(std::move(feedback_)) {
        if (iteration < 0) throw std::invalid_argument("iteration must be non-negative");
        if (feedback.empty()) throw std::invalid_argument("feedback must be non-empty");
    }
};

// Short-term memory (the last response) plus long-term memory (every
// reflection so far, contiguous from iteration 0).
class EpisodeMemory {
  public:
    EpisodeMemory() = default;
    EpisodeMemory(InputWindow window, PredictionResponse last_response)
        : window_(std::move(window)), last_response_(std::move(last_response)) {}

    const InputWindow& window() const { return window_; }
    const PredictionResponse& last_response() const { return last_response_; }
    const std::vector<ReflectionRecord>& reflections() const { return reflections_; }

    void set_last_response(PredictionResponse response) { last_response_ = std::move(response); }

    int next_iteration() const { return static_cast<int>(reflections_.size()); }

    void add_reflection(ReflectionRecord record) {
        if (record.iteration != next_iteration())
            throw std::invalid_argument("reflection iterations must be contiguous from 0");
        reflections_.push_back(std::move(record));
    }

  private:
    InputWindow window_;
    PredictionResponse last_response_;
    std::vector<ReflectionRecord> reflections_;
};

// A winning and a losing response for the same input, harvested from a
// successful reflection; the unit of reward-model training data.
class ComparisonPair {
  public:
    ComparisonPair() = default;
    ComparisonPair(InputWindow window, PredictionResponse winner, PredictionResponse loser,
                   int resolved_iteration, MovementLabel truth)
        : window_(std::move(window)), winner_(std::move(winner)), loser_(std::move(loser)),
          resolved_iteration_(resolved_iteration) {
        if (resolved_iteration_ < 1)
            throw std::invalid_argument("resolved_iteration must be >= 1");
        if (!matches(winner_.label, truth))
            throw std::invalid_argument("winner must match ground truth");
        if (matches(loser_.label, truth))
            throw std::invalid_argument("loser must not match ground truth");
    }

    const InputWindow& window() const { return window_; }
    const PredictionResponse& winner() const { return winner_; }
    const PredictionResponse& loser() const { return loser_; }
    int resolved_iteration() const { return resolved_iteration_; }

    // Recoverable because the winner always carries a binary label.
    MovementLabel truth() const {
        return winner_.label == PredictedLabel::Positive ? MovementLabel::Positive
                                                         : MovementLabel::Negative;
    }

  private:
    InputWindow window_;
    PredictionResponse winner_;
    PredictionResponse loser_;
    int resolved_iteration_ = 1;
};

// An initially-correct (input, response) pair used for supervised tuning.
class DemonstrationSample {
  public:
    DemonstrationSample() = default;
    DemonstrationSample(InputWindow window, PredictionResponse response, MovementLabel truth)
        : window_(std::move(window)), response_(std::move(response)) {
        if (!matches(response_.label, truth))
            throw std::invalid_argument("demonstration response must match ground truth");
    }

    const InputWindow& window() const { return window_; }
    const PredictionResponse& response() const { return response_; }

    MovementLabel truth() const {
        return response_.label == PredictedLabel::Positive ? MovementLabel::Positive
                                                           : MovementLabel::Negative;
    }

  private:
    InputWindow window_;
    PredictionResponse response_;
};

// ---------------------------------------------------------------------------
// Prices
// ---------------------------------------------------------------------------

struct PriceBar {
    StockSymbol stock;
    TradingDay day;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double adj_close = 0.0;
    std::uint64_t volume = 0;

    PriceBar() = default;
    PriceBar(StockSymbol stock_, TradingDay day_, double open_, double high_, double low_,
             double close_, double adj_close_, std::uint64_t volume_)
        : stock(std::move(stock_)), day(day_), open(open_), high(high_), low(low_),
          close(close_), adj_close(adj_close_), volume(volume_) {
        if (!(open > 0 && high > 0 && low > 0 && close > 0 && adj_close > 0))
            throw std::invalid_argument("prices must be positive");
        if (low > open || open > high || low > close || close > high)
            throw std::invalid_argument("open/close must lie within [low, high]");
    }
};

// Positive iff the adjusted close strictly rose; zero-return days are Negative.
inline MovementLabel ground_truth_label(const PriceBar& prev_bar, const PriceBar& next_bar) {
    if (prev_bar.stock.ticker != next_bar.stock.ticker)
        throw InvalidBarPair("bars must share a stock: " + prev_bar.stock.ticker + " vs " +
                             next_bar.stock.ticker);
    if (!(prev_bar.day < next_bar.day))
        throw InvalidBarPair("bar days must be strictly increasing");
    return next_bar.adj_close > prev_bar.adj_close ? MovementLabel::Positive
                                                   : MovementLabel::Negative;
}

inline double daily_return(const PriceBar& prev_bar, const PriceBar& next_bar) {
    if (prev_bar.stock.ticker != next_bar.stock.ticker)
        throw InvalidBarPair("bars must share a stock: " + prev_bar.stock.ticker + " vs " +
                             next_bar.stock.ticker);
    if (!(prev_bar.day < next_bar.day))
        throw InvalidBarPair("bar days must be strictly increasing");
    return (next_bar.adj_close - prev_bar.adj_close) / prev_bar.adj_close;
}

// ---------------------------------------------------------------------------
// Text utilities
// ---------------------------------------------------------------------------

// Lowercase, split on non-alphanumerics, drop tokens shorter than 2 chars.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            if (current.size() >= 2) tokens.push_back(current);
            current.clear();
        }
    }
    if (current.size() >= 2) tokens.push_back(current);
    return tokens;
}

// ---------------------------------------------------------------------------
// Reference universe: top 5 stocks in each of the 11 sectors
// ---------------------------------------------------------------------------

inline const std::vector<StockSymbol>& default_universe() {
    static const std::vector<StockSymbol> universe = [] {
        std::vector<StockSymbol> u;
        auto add = [&u](Sector s, std::initializer_list<const char*> tickers) {
            for (const char* t : tickers) u.emplace_back(t, s);
        };
        add(Sector::BasicMaterials, {"BHP", "RIO", "SHW", "VALE", "APD"});
        add(Sector::FinancialServices, {"BRK-A", "V", "JPM", "MA", "BAC"});
        add(Sector::ConsumerDefensive, {"WMT", "PG", "KO", "PEP", "COST"});
        add(Sector::Utilities, {"NEE", "DUK", "SO", "D", "AEP"});
        add(Sector::Energy, {"XOM", "CVX", "SHEL", "TTE", "COP"});
        add(Sector::Technology, {"AAPL", "MSFT", "TSM", "NVDA", "AVGO"});
        add(Sector::ConsumerCyclical, {"AMZN", "TSLA", "HD", "BABA", "TM"});
        add(Sector::RealEstate, {"AMT", "PLD", "CCI", "EQIX", "PSA"});
        add(Sector::Healthcare, {"UNH", "JNJ", "LLY", "PFE", "ABBV"});
        add(Sector::CommunicationServices, {"GOOG", "META", "VZ", "CMCSA", "DIS"});
        add(Sector::Industrials, {"UPS", "UNP", "HON", "LMT", "CAT"});
        return u;
    }();
    return universe;
}

} // namespace sep
