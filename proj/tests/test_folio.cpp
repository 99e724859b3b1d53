#include "sep/folio.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

using namespace sep;

namespace {

StockSymbol sym(const std::string& ticker) { return septest::stock(ticker); }

std::map<StockSymbol, double> wmap(std::vector<std::pair<std::string, double>> entries) {
    std::map<StockSymbol, double> out;
    for (auto& [ticker, weight] : entries) out[sym(ticker)] = weight;
    return out;
}

PortfolioWeights folio_of(int day, std::vector<std::pair<std::string, double>> entries) {
    return PortfolioWeights(septest::day_n(day), wmap(std::move(entries)));
}

std::map<StockSymbol, double> rmap(std::vector<std::pair<std::string, double>> entries) {
    return wmap(std::move(entries));
}

std::map<StockSymbol, std::string> outlooks(std::vector<std::string> tickers) {
    std::map<StockSymbol, std::string> out;
    for (const std::string& t : tickers) out[sym(t)] = "outlook for " + t;
    return out;
}

double weight_of(const PortfolioWeights& w, const std::string& ticker) {
    const auto it = w.weights().find(sym(ticker));
    return it == w.weights().end() ? -1.0 : it->second;
}

} // namespace

// ---------------------------------------------------------------------------
// PortfolioWeights invariants
// ---------------------------------------------------------------------------

TEST(PortfolioWeightsTest, DefaultIsUninvested) {
    PortfolioWeights w;
    EXPECT_TRUE(w.empty());
    EXPECT_TRUE(w.weights().empty());
}

TEST(PortfolioWeightsTest, RejectsNegativeWeight) {
    EXPECT_THROW(folio_of(3, {{"AAPL", 1.5}, {"MSFT", -0.5}}), std::invalid_argument);
}

TEST(PortfolioWeightsTest, RejectsWeightsThatDoNotSumToOne) {
    EXPECT_THROW(folio_of(3, {{"AAPL", 0.5}, {"MSFT", 0.4}}), std::invalid_argument);
    EXPECT_THROW(folio_of(3, {{"AAPL", 1.2}}), std::invalid_argument);
}

TEST(PortfolioWeightsTest, AcceptsTinyRoundingSlack) {
    EXPECT_NO_THROW(folio_of(3, {{"AAPL", 0.5}, {"MSFT", 0.5 + 5e-10}}));
}

TEST(PortfolioWeightsTest, AcceptsZeroEntriesAlongsideInvestedOnes) {
    PortfolioWeights w = folio_of(3, {{"AAPL", 1.0}, {"MSFT", 0.0}});
    EXPECT_DOUBLE_EQ(weight_of(w, "AAPL"), 1.0);
    EXPECT_DOUBLE_EQ(weight_of(w, "MSFT"), 0.0);
}

// ---------------------------------------------------------------------------
// select_positive
// ---------------------------------------------------------------------------

TEST(SelectPositiveTest, AllNegativeGivesEmptySelection) {
    std::map<StockSymbol, PredictionResponse> preds;
    preds[sym("AAPL")] = septest::response(PredictedLabel::Negative);
    preds[sym("XOM")] = septest::response(PredictedLabel::Negative);
    EXPECT_TRUE(select_positive(preds).empty());
}

TEST(SelectPositiveTest, PicksExactlyThePositivesInTickerOrder) {
    std::map<StockSymbol, PredictionResponse> preds;
    preds[sym("ZM")] = septest::response(PredictedLabel::Positive);
    preds[sym("AAPL")] = septest::response(PredictedLabel::Positive);
    preds[sym("MSFT")] = septest::response(PredictedLabel::Negative);
    preds[sym("KO")] = septest::response(PredictedLabel::Neutral);
    preds[sym("BA")] = septest::response(PredictedLabel::Mixed);
    preds[sym("GE")] = septest::response(PredictedLabel::Malformed);

    const std::vector<StockSymbol> picked = select_positive(preds);
    ASSERT_EQ(picked.size(), 2u);
    EXPECT_EQ(picked[0].ticker, "AAPL");
    EXPECT_EQ(picked[1].ticker, "ZM");
}

// ---------------------------------------------------------------------------
// generate_weights
// ---------------------------------------------------------------------------

TEST(GenerateWeightsTest, SingleStockAlwaysGetsFullWeight) {
    ScriptedBackend mock;
    mock.enqueue("portfolio", "AAPL: 7");
    PortfolioWeights w = generate_weights(mock, septest::day_n(6), outlooks({"AAPL"}));
    EXPECT_DOUBLE_EQ(weight_of(w, "AAPL"), 1.0);
    EXPECT_EQ(w.day(), septest::day_n(6));

    // Even a zero-conviction reply invests the lone candidate fully.
    mock.enqueue("portfolio", "AAPL: 0");
    w = generate_weights(mock, septest::day_n(6), outlooks({"AAPL"}));
    EXPECT_DOUBLE_EQ(weight_of(w, "AAPL"), 1.0);
}

TEST(GenerateWeightsTest, EqualConvictionSplitsEvenly) {
    ScriptedBackend mock;
    mock.enqueue("portfolio", "AAPL: 2\nMSFT: 2");
    PortfolioWeights w = generate_weights(mock, septest::day_n(6), outlooks({"AAPL", "MSFT"}));
    EXPECT_DOUBLE_EQ(weight_of(w, "AAPL"), 0.5);
    EXPECT_DOUBLE_EQ(weight_of(w, "MSFT"), 0.5);
}

TEST(GenerateWeightsTest, NormalizesProportionally) {
    ScriptedBackend mock;
    mock.enqueue("portfolio", "AAPL: 3\nMSFT: 1");
    PortfolioWeights w = generate_weights(mock, septest::day_n(6), outlooks({"AAPL", "MSFT"}));
    EXPECT_DOUBLE_EQ(weight_of(w, "AAPL"), 0.75);
    EXPECT_DOUBLE_EQ(weight_of(w, "MSFT"), 0.25);
}

TEST(GenerateWeightsTest, ClampsNegativeConvictionToZero) {
    ScriptedBackend mock;
    mock.enqueue("portfolio", "AAPL: -1\nMSFT: 1");
    PortfolioWeights w = generate_weights(mock, septest::day_n(6), outlooks({"AAPL", "MSFT"}));
    EXPECT_DOUBLE_EQ(weight_of(w, "AAPL"), 0.0);
    EXPECT_DOUBLE_EQ(weight_of(w, "MSFT"), 1.0);
}

TEST(GenerateWeightsTest, UnmentionedTickerGetsZero) {
    ScriptedBackend mock;
    mock.enqueue("portfolio", "AAPL: 4");
    PortfolioWeights w = generate_weights(mock, septest::day_n(6), outlooks({"AAPL", "MSFT"}));
    EXPECT_DOUBLE_EQ(weight_of(w, "AAPL"), 1.0);
    EXPECT_DOUBLE_EQ(weight_of(w, "MSFT"), 0.0);
}

TEST(GenerateWeightsTest, AllZeroReplyFallsBackToEqualWeights) {
    ScriptedBackend mock;
    mock.enqueue("portfolio", "AAPL: 0\nMSFT: 0\nXOM: 0");
    PortfolioWeights w =
        generate_weights(mock, septest::day_n(6), outlooks({"AAPL", "MSFT", "XOM"}));
    EXPECT_DOUBLE_EQ(weight_of(w, "AAPL"), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(weight_of(w, "MSFT"), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(weight_of(w, "XOM"), 1.0 / 3.0);
}

TEST(GenerateWeightsTest, GarbageReplyFallsBackToEqualWeights) {
    ScriptedBackend mock;
    mock.enqueue("portfolio", "no idea, just buy everything you like");
    PortfolioWeights w = generate_weights(mock, septest::day_n(6), outlooks({"AAPL", "MSFT"}));
    EXPECT_DOUBLE_EQ(weight_of(w, "AAPL"), 0.5);
    EXPECT_DOUBLE_EQ(weight_of(w, "MSFT"), 0.5);
}

TEST(GenerateWeightsTest, IgnoresUnknownTickersNoiseAndCase) {
    ScriptedBackend mock;
    mock.enqueue("portfolio",
                 "thinking out loud here\n"
                 "aapl: 2\n"
                 "TSLA: 9\n"
                 "MSFT: 2.0 looks strong\n"
                 "XOM: not sure");
    PortfolioWeights w =
        generate_weights(mock, septest::day_n(6), outlooks({"AAPL", "MSFT", "XOM"}));
    EXPECT_DOUBLE_EQ(weight_of(w, "AAPL"), 0.5);
    EXPECT_DOUBLE_EQ(weight_of(w, "MSFT"), 0.5);
    EXPECT_DOUBLE_EQ(weight_of(w, "XOM"), 0.0);
}

TEST(GenerateWeightsTest, PromptCarriesDateAndOutlooks) {
    ScriptedBackend mock;
    mock.enqueue("portfolio", "AAPL: 1\nXOM: 1");
    JournalingBackend journal(mock);

    std::map<StockSymbol, std::string> views;
    views[sym("AAPL")] = "cloud momentum building";
    views[sym("XOM")] = "crude inventories rising";
    generate_weights(journal, septest::day_n(9), views);

    ASSERT_EQ(journal.entries().size(), 1u);
    const CompletionRequest& request = journal.entries()[0].request;
    EXPECT_EQ(request.template_name, "portfolio");
    EXPECT_EQ(request.n, 1);
    ASSERT_FALSE(request.messages.empty());
    const std::string& prompt = request.messages.back().content;
    EXPECT_NE(prompt.find(septest::day_n(9).iso()), std::string::npos);
    EXPECT_NE(prompt.find("AAPL: cloud momentum building"), std::string::npos);
    EXPECT_NE(prompt.find("XOM: crude inventories rising"), std::string::npos);
}

TEST(GenerateWeightsTest, RejectsEmptyExplanationMap) {
    ScriptedBackend mock;
    EXPECT_THROW(generate_weights(mock, septest::day_n(6), {}), std::invalid_argument);
}

TEST(GenerateWeightsTest, BackendFailurePropagates) {
    ScriptedBackend mock;  // nothing enqueued
    EXPECT_THROW(generate_weights(mock, septest::day_n(6), outlooks({"AAPL"})), ScriptExhausted);
}

TEST(GenerateWeightsTest, FuzzedRepliesAlwaysYieldValidWeights) {
    const std::vector<std::string> pool = {"AAPL", "MSFT", "XOM", "KO", "BA", "GE"};
    std::mt19937_64 rng(20260815);
    std::uniform_real_distribution<double> conviction(-5.0, 5.0);

    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng() % pool.size();
        std::vector<std::string> tickers(pool.begin(), pool.begin() + n);
        std::string reply;
        const std::size_t lines = rng() % 8;
        for (std::size_t i = 0; i < lines; ++i) {
            switch (rng() % 6) {
                case 0: reply += "hold on, let me think\n"; break;
                case 1: reply += pool[rng() % pool.size()] + ": nan\n"; break;
                case 2: reply += pool[rng() % pool.size()] + ": inf\n"; break;
                case 3: reply += "ZZZZ: 3.5\n"; break;
                default: {
                    char buffer[64];
                    std::snprintf(buffer, sizeof(buffer), "%s: %.3f",
                                  pool[rng() % pool.size()].c_str(), conviction(rng));
                    reply += std::string(buffer) + "\n";
                }
            }
        }
        ScriptedBackend mock;
        mock.enqueue("portfolio", reply);

        const PortfolioWeights w = generate_weights(mock, septest::day_n(6), outlooks(tickers));
        double sum = 0.0;
        for (const auto& [stock, weight] : w.weights()) {
            EXPECT_GE(weight, 0.0);
            EXPECT_TRUE(std::isfinite(weight));
            EXPECT_NE(std::find(tickers.begin(), tickers.end(), stock.ticker), tickers.end());
            sum += weight;
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

// ---------------------------------------------------------------------------
// daily_profit
// ---------------------------------------------------------------------------

TEST(DailyProfitTest, UninvestedDayEarnsExactlyZero) {
    EXPECT_EQ(daily_profit(PortfolioWeights{}, rmap({{"AAPL", 0.5}})), 0.0);
}

TEST(DailyProfitTest, HandArithmetic) {
    const PortfolioWeights w = folio_of(6, {{"AAPL", 0.6}, {"MSFT", 0.4}});
    const double profit = daily_profit(w, rmap({{"AAPL", 0.05}, {"MSFT", -0.10}}));
    EXPECT_NEAR(profit, -0.01, 1e-15);
}

TEST(DailyProfitTest, MissingReturnNamesTheTicker) {
    const PortfolioWeights w = folio_of(6, {{"AAPL", 1.0}});
    try {
        daily_profit(w, rmap({{"MSFT", 0.01}}));
        FAIL() << "expected MissingReturnError";
    } catch (const MissingReturnError& e) {
        EXPECT_NE(std::string(e.what()).find("AAPL"), std::string::npos);
    }
}

TEST(DailyProfitTest, ZeroWeightNeedsNoReturn) {
    const PortfolioWeights w = folio_of(6, {{"AAPL", 1.0}, {"MSFT", 0.0}});
    EXPECT_DOUBLE_EQ(daily_profit(w, rmap({{"AAPL", 0.02}})), 0.02);
}

TEST(DailyProfitTest, ExtraReturnsAreIgnored) {
    const PortfolioWeights w = folio_of(6, {{"AAPL", 1.0}});
    EXPECT_DOUBLE_EQ(daily_profit(w, rmap({{"AAPL", 0.03}, {"XOM", -0.5}})), 0.03);
}

// ---------------------------------------------------------------------------
// profit_reflect_pair
// ---------------------------------------------------------------------------

TEST(ProfitReflectPairTest, ImprovingRevisionWins) {
    ScriptedBackend mock;
    mock.enqueue("portfolio_reflect", "XOM: 1");
    const PortfolioWeights first = folio_of(6, {{"AAPL", 1.0}});
    const auto returns = rmap({{"AAPL", -0.02}, {"XOM", 0.03}});

    const auto pair = profit_reflect_pair(mock, outlooks({"AAPL", "XOM"}), first, returns);
    ASSERT_TRUE(pair.has_value());
    EXPECT_DOUBLE_EQ(pair->winner_profit, 0.03);
    EXPECT_DOUBLE_EQ(pair->loser_profit, -0.02);
    EXPECT_DOUBLE_EQ(weight_of(pair->winner, "XOM"), 1.0);
    EXPECT_DOUBLE_EQ(weight_of(pair->loser, "AAPL"), 1.0);
    EXPECT_GT(pair->winner_profit, pair->loser_profit);
}

TEST(ProfitReflectPairTest, WorseRevisionLoses) {
    ScriptedBackend mock;
    mock.enqueue("portfolio_reflect", "AAPL: 1");
    const PortfolioWeights first = folio_of(6, {{"XOM", 1.0}});
    const auto returns = rmap({{"AAPL", -0.02}, {"XOM", 0.03}});

    const auto pair = profit_reflect_pair(mock, outlooks({"AAPL", "XOM"}), first, returns);
    ASSERT_TRUE(pair.has_value());
    EXPECT_DOUBLE_EQ(pair->winner_profit, 0.03);
    EXPECT_DOUBLE_EQ(weight_of(pair->winner, "XOM"), 1.0);
    EXPECT_DOUBLE_EQ(weight_of(pair->loser, "AAPL"), 1.0);
}

TEST(ProfitReflectPairTest, EqualProfitsGiveNoPair) {
    ScriptedBackend mock;
    mock.enqueue("portfolio_reflect", "AAPL: 1\nXOM: 1");
    const PortfolioWeights first = folio_of(6, {{"AAPL", 0.5}, {"XOM", 0.5}});
    const auto returns = rmap({{"AAPL", 0.01}, {"XOM", 0.01}});

    // The revision reproduces the same allocation, so neither side improves.
    EXPECT_FALSE(profit_reflect_pair(mock, outlooks({"AAPL", "XOM"}), first, returns).has_value());
}

TEST(ProfitReflectPairTest, PromptShowsAllocationProfitAndOutlooks) {
    ScriptedBackend mock;
    mock.enqueue("portfolio_reflect", "XOM: 1");
    JournalingBackend journal(mock);

    std::map<StockSymbol, std::string> views;
    views[sym("AAPL")] = "supply chain strain";
    views[sym("XOM")] = "refining margins widen";
    const PortfolioWeights first = folio_of(6, {{"AAPL", 1.0}});
    profit_reflect_pair(journal, views, first, rmap({{"AAPL", -0.02}, {"XOM", 0.03}}));

    ASSERT_EQ(journal.entries().size(), 1u);
    const CompletionRequest& request = journal.entries()[0].request;
    EXPECT_EQ(request.template_name, "portfolio_reflect");
    const std::string& prompt = request.messages.back().content;
    EXPECT_NE(prompt.find("AAPL: 1.000000"), std::string::npos);
    EXPECT_NE(prompt.find("-0.020000"), std::string::npos);
    EXPECT_NE(prompt.find("XOM: refining margins widen"), std::string::npos);
}

TEST(ProfitReflectPairTest, BackendFailurePropagates) {
    ScriptedBackend mock;
    const PortfolioWeights first = folio_of(6, {{"AAPL", 1.0}});
    EXPECT_THROW(
        profit_reflect_pair(mock, outlooks({"AAPL"}), first, rmap({{"AAPL", 0.01}})),
        ScriptExhausted);
}

TEST(ProfitReflectPairTest, FuzzNeverEmitsNonImprovingWinner) {
    const std::vector<std::string> pool = {"AAPL", "MSFT", "XOM", "KO"};
    std::mt19937_64 rng(4711);
    std::uniform_real_distribution<double> ret(-0.1, 0.1);
    std::uniform_real_distribution<double> conviction(0.0, 4.0);

    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 3;
        std::vector<std::string> tickers(pool.begin(), pool.begin() + n);

        std::map<StockSymbol, double> raw;
        double sum = 0.0;
        for (const std::string& t : tickers) {
            const double c = conviction(rng) + 1e-3;
            raw[sym(t)] = c;
            sum += c;
        }
        for (auto& [stock, weight] : raw) weight /= sum;
        const PortfolioWeights first(septest::day_n(6), raw);

        std::map<StockSymbol, double> returns;
        for (const std::string& t : tickers) returns[sym(t)] = ret(rng);

        std::string reply;
        for (const std::string& t : tickers) {
            if (rng() % 3 == 0) continue;
            char buffer[64];
            std::snprintf(buffer, sizeof(buffer), "%s: %.3f", t.c_str(), conviction(rng));
            reply += std::string(buffer) + "\n";
        }
        ScriptedBackend mock;
        mock.enqueue("portfolio_reflect", reply);

        const auto pair = profit_reflect_pair(mock, outlooks(tickers), first, returns);
        if (!pair.has_value()) continue;
        EXPECT_GT(pair->winner_profit, pair->loser_profit);
        EXPECT_DOUBLE_EQ(pair->winner_profit, daily_profit(pair->winner, returns));
        EXPECT_DOUBLE_EQ(pair->loser_profit, daily_profit(pair->loser, returns));
    }
}

// ---------------------------------------------------------------------------
// backtest
// ---------------------------------------------------------------------------

TEST(BacktestTest, TwoDayHandExample) {
    const BacktestReport report = backtest_profits({0.1, -0.05});
    EXPECT_NEAR(report.overall, 0.05, 1e-12);
    EXPECT_NEAR(report.cumulative, 1.1 * 0.95 - 1.0, 1e-12);
    EXPECT_TRUE(report.sharpe_defined);
}

TEST(BacktestTest, ThreeDayStatsMatchHandComputation) {
    const std::vector<double> profits = {0.01, -0.005, 0.02};
    const BacktestReport report = backtest_profits(profits);

    const double mean = (0.01 - 0.005 + 0.02) / 3.0;
    double squares = 0.0;
    for (const double p : profits) squares += (p - mean) * (p - mean);
    const double std_dev = std::sqrt(squares / 2.0);

    EXPECT_NEAR(report.overall, 0.025, 1e-12);
    EXPECT_NEAR(report.cumulative, 1.01 * 0.995 * 1.02 - 1.0, 1e-12);
    EXPECT_NEAR(report.std_dev, std_dev, 1e-15);
    EXPECT_NEAR(report.std_dev, 0.0125831, 1e-6);
    EXPECT_NEAR(report.sharpe, mean / std_dev * std::sqrt(252.0), 1e-12);
    EXPECT_NEAR(report.sharpe, 10.5131, 2e-3);
}

TEST(BacktestTest, ZeroVarianceFlagsSharpeAsUndefined) {
    const BacktestReport report = backtest_profits({0.01, 0.01});
    EXPECT_NEAR(report.overall, 0.02, 1e-15);
    EXPECT_NEAR(report.cumulative, 1.01 * 1.01 - 1.0, 1e-15);
    EXPECT_EQ(report.std_dev, 0.0);
    EXPECT_EQ(report.sharpe, 0.0);
    EXPECT_FALSE(report.sharpe_defined);
}

TEST(BacktestTest, NeedsAtLeastTwoDays) {
    EXPECT_THROW(backtest_profits({}), InsufficientHistory);
    EXPECT_THROW(backtest_profits({0.1}), InsufficientHistory);
    EXPECT_THROW(backtest({}), InsufficientHistory);
    EXPECT_THROW(backtest({{folio_of(6, {{"AAPL", 1.0}}), rmap({{"AAPL", 0.01}})}}),
                 InsufficientHistory);
}

TEST(BacktestTest, SeriesOverloadMatchesProfitOracle) {
    std::vector<BacktestDay> series;
    series.push_back({folio_of(6, {{"AAPL", 0.6}, {"MSFT", 0.4}}),
                      rmap({{"AAPL", 0.05}, {"MSFT", -0.10}})});
    series.push_back({folio_of(7, {{"AAPL", 1.0}}), rmap({{"AAPL", 0.02}})});
    series.push_back({folio_of(8, {{"MSFT", 1.0}}), rmap({{"MSFT", -0.03}})});

    std::vector<double> profits;
    for (const BacktestDay& day : series) profits.push_back(daily_profit(day.first, day.second));

    const BacktestReport a = backtest(series);
    const BacktestReport b = backtest_profits(profits);
    EXPECT_DOUBLE_EQ(a.overall, b.overall);
    EXPECT_DOUBLE_EQ(a.cumulative, b.cumulative);
    EXPECT_DOUBLE_EQ(a.std_dev, b.std_dev);
    EXPECT_DOUBLE_EQ(a.sharpe, b.sharpe);
}

TEST(BacktestTest, UninvestedDaysStayInTheSeries) {
    std::vector<BacktestDay> series;
    series.push_back({folio_of(6, {{"AAPL", 1.0}}), rmap({{"AAPL", 0.02}})});
    series.push_back({PortfolioWeights{}, {}});
    series.push_back({folio_of(8, {{"AAPL", 1.0}}), rmap({{"AAPL", -0.01}})});

    const BacktestReport a = backtest(series);
    const BacktestReport b = backtest_profits({0.02, 0.0, -0.01});
    EXPECT_DOUBLE_EQ(a.overall, b.overall);
    EXPECT_DOUBLE_EQ(a.std_dev, b.std_dev);
    EXPECT_DOUBLE_EQ(a.sharpe, b.sharpe);
}

TEST(BacktestTest, CompoundingStaysWithinSecondOrderOfTheSum) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> profit(-0.01, 0.01);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 9;
        std::vector<double> profits;
        for (std::size_t i = 0; i < n; ++i) profits.push_back(profit(rng));

        double pair_bound = 0.0;
        for (std::size_t t = 0; t + 1 < n; ++t)
            for (std::size_t u = t + 1; u < n; ++u)
                pair_bound += std::abs(profits[t] * profits[u]);

        const BacktestReport report = backtest_profits(profits);
        // Cross terms of the product expansion, with slack for third order.
        EXPECT_LE(std::abs(report.cumulative - report.overall), 1.1 * pair_bound + 1e-12);
    }
}

TEST(BacktestTest, SharpeIsInvariantUnderPositiveScaling) {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> profit(-0.05, 0.05);
    const std::vector<double> scales = {0.1, 3.0, 17.5};

    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng() % 7;
        std::vector<double> profits;
        for (std::size_t i = 0; i < n; ++i) profits.push_back(profit(rng));
        const BacktestReport base = backtest_profits(profits);
        if (!base.sharpe_defined) continue;

        for (const double scale : scales) {
            std::vector<double> scaled;
            for (const double p : profits) scaled.push_back(scale * p);
            const BacktestReport report = backtest_profits(scaled);
            EXPECT_NEAR(report.sharpe, base.sharpe,
                        1e-12 * std::max(1.0, std::abs(base.sharpe)));
        }
    }
}

// ---------------------------------------------------------------------------
// baseline_weights
// ---------------------------------------------------------------------------

TEST(BaselineWeightsTest, EqualWeightSpreadsOneOverN) {
    std::vector<StockSymbol> universe;
    const std::vector<std::string> tickers = {"AAPL", "ABBV", "AMZN", "BA",  "CVX", "GOOG",
                                              "JNJ",  "KO",   "MSFT", "PFE", "XOM"};
    for (const std::string& t : tickers) universe.push_back(sym(t));

    const PortfolioWeights w =
        baseline_weights(BaselineKind::EqualWeight, universe, septest::day_n(6));
    ASSERT_EQ(w.weights().size(), 11u);
    for (const auto& [stock, weight] : w.weights()) EXPECT_NEAR(weight, 1.0 / 11.0, 1e-15);
    EXPECT_EQ(w.day(), septest::day_n(6));
}

TEST(BaselineWeightsTest, PositiveOnlySpreadsOverThePositivePredictions) {
    std::vector<StockSymbol> universe = {sym("AAPL"), sym("BA"), sym("KO"), sym("MSFT"),
                                         sym("XOM"), sym("GE")};
    std::map<StockSymbol, PredictionResponse> preds;
    preds[sym("AAPL")] = septest::response(PredictedLabel::Positive);
    preds[sym("BA")] = septest::response(PredictedLabel::Negative);
    preds[sym("KO")] = septest::response(PredictedLabel::Positive);
    preds[sym("MSFT")] = septest::response(PredictedLabel::Positive);
    preds[sym("XOM")] = septest::response(PredictedLabel::Neutral);
    preds[sym("GE")] = septest::response(PredictedLabel::Positive);

    const PortfolioWeights w =
        baseline_weights(BaselineKind::PositiveOnly, universe, septest::day_n(6), preds);
    ASSERT_EQ(w.weights().size(), 4u);
    EXPECT_DOUBLE_EQ(weight_of(w, "AAPL"), 0.25);
    EXPECT_DOUBLE_EQ(weight_of(w, "KO"), 0.25);
    EXPECT_DOUBLE_EQ(weight_of(w, "MSFT"), 0.25);
    EXPECT_DOUBLE_EQ(weight_of(w, "GE"), 0.25);
    EXPECT_EQ(w.weights().count(sym("BA")), 0u);
}

TEST(BaselineWeightsTest, PositiveOnlyWithNoPositivesStaysUninvested) {
    std::vector<StockSymbol> universe = {sym("AAPL"), sym("MSFT")};
    std::map<StockSymbol, PredictionResponse> preds;
    preds[sym("AAPL")] = septest::response(PredictedLabel::Negative);
    preds[sym("MSFT")] = septest::response(PredictedLabel::Negative);

    const PortfolioWeights w =
        baseline_weights(BaselineKind::PositiveOnly, universe, septest::day_n(6), preds);
    EXPECT_TRUE(w.empty());
    EXPECT_EQ(daily_profit(w, rmap({{"AAPL", 0.05}})), 0.0);
}

TEST(BaselineWeightsTest, RejectsEmptyUniverse) {
    EXPECT_THROW(baseline_weights(BaselineKind::EqualWeight, {}, septest::day_n(6)),
                 std::invalid_argument);
}
