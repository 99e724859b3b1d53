#pragma once

#include "sep/core.hpp"
#include "sep/corpus.hpp"
#include "sep/errors.hpp"
#include "sep/evalkit.hpp"
#include "sep/folio.hpp"
#include "sep/io.hpp"
#include "sep/llmio.hpp"
#include "sep/llmio_http.hpp"
#include "sep/pipeline.hpp"
#include "sep/sampler.hpp"
#include "sep/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

// Command implementations behind the `sep` binary. The binary itself only
// parses flags; everything here is callable from tests.

namespace sep {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    // data inputs
    std::filesystem::path tweets;
    std::filesystem::path prices;
    std::filesystem::path out = ".";

    // per-artifact overrides; empty means <out>/<canonical name>
    std::filesystem::path reduced;
    std::filesystem::path summaries;
    std::filesystem::path demos;
    std::filesystem::path pairs;
    std::filesystem::path predictions;
    std::filesystem::path weights_file;
    std::filesystem::path reward_model;
    std::filesystem::path policy_sft;
    std::filesystem::path policy_ppo;
    std::filesystem::path policy;  // explicit policy for predict; overrides the ppo/sft chain
    std::filesystem::path report;
    std::filesystem::path backtest_report;
    std::filesystem::path sessions;
    std::filesystem::path trace;
    std::filesystem::path script;   // scripted replies for the mock backend
    std::filesystem::path journal;  // recorded session driving `replay`

    int window_span = 5;
    double split_ratio = 0.8;
    double validation_fraction = 0.10;

    std::string backend = "mock";  // mock | http
    std::string baseline;          // portfolio: "" (LLM), "equal", or "positive"
    std::string replay_command;    // subcommand a `replay` run re-executes
    std::uint64_t seed = 0;
    int jobs = 0;  // backend in-flight bound; 0 = logical cores
    int max_iters = 2;

    TrainConfig train;
    SamplerConfig sampler;

    std::string filter = "all";  // all | informative
    std::string stocks;          // comma-separated ticker allowlist; empty = all
    std::string from;            // inclusive ISO date bounds; empty = open
    std::string to;

    void validate() const {
        if (window_span < 1) throw ConfigError("window span must be >= 1");
        if (!(split_ratio > 0.0 && split_ratio < 1.0))
            throw ConfigError("split ratio must lie in (0, 1)");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw ConfigError("validation fraction must lie in (0, 1)");
        if (backend != "mock" && backend != "http")
            throw ConfigError("backend must be mock or http, got '" + backend + "'");
        if (!baseline.empty() && baseline != "equal" && baseline != "positive")
            throw ConfigError("baseline must be equal or positive, got '" + baseline + "'");
        if (filter != "all" && filter != "informative")
            throw ConfigError("filter must be all or informative, got '" + filter + "'");
        if (jobs < 0) throw ConfigError("jobs must be >= 0");
        if (max_iters < 1) throw ConfigError("max-iters must be >= 1");
        try {
            train.validate();
            sampler.validate();
            if (!from.empty()) TradingDay::from_iso(from);
            if (!to.empty()) TradingDay::from_iso(to);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
};

namespace detail {

inline void apply_config_key(RunConfig& config, const std::string& key, const Json& value) {
    auto path = [&] { return std::filesystem::path(value.get<std::string>()); };
    auto str = [&] { return value.get<std::string>(); };
    if (key == "tweets") config.tweets = path();
    else if (key == "prices") config.prices = path();
    else if (key == "out") config.out = path();
    else if (key == "reduced") config.reduced = path();
    else if (key == "summaries") config.summaries = path();
    else if (key == "demos") config.demos = path();
    else if (key == "pairs") config.pairs = path();
    else if (key == "predictions") config.predictions = path();
    else if (key == "weights") config.weights_file = path();
    else if (key == "reward_model") config.reward_model = path();
    else if (key == "policy_sft") config.policy_sft = path();
    else if (key == "policy_ppo") config.policy_ppo = path();
    else if (key == "policy") config.policy = path();
    else if (key == "report") config.report = path();
    else if (key == "backtest_report") config.backtest_report = path();
    else if (key == "sessions") config.sessions = path();
    else if (key == "trace") config.trace = path();
    else if (key == "script") config.script = path();
    else if (key == "journal") config.journal = path();
    else if (key == "window") config.window_span = value.get<int>();
    else if (key == "split_ratio") config.split_ratio = value.get<double>();
    else if (key == "validation_fraction") config.validation_fraction = value.get<double>();
    else if (key == "backend") config.backend = str();
    else if (key == "baseline") config.baseline = str();
    else if (key == "command") config.replay_command = str();
    else if (key == "seed") config.seed = value.get<std::uint64_t>();
    else if (key == "jobs") config.jobs = value.get<int>();
    else if (key == "max_iters") config.max_iters = value.get<int>();
    else if (key == "sft_epochs") config.train.sft_epochs = value.get<int>();
    else if (key == "sft_lr") config.train.sft_lr = value.get<double>();
    else if (key == "reward_epochs") config.train.reward_epochs = value.get<int>();
    else if (key == "reward_lr") config.train.reward_lr = value.get<double>();
    else if (key == "ppo_epochs") config.train.ppo_epochs = value.get<int>();
    else if (key == "ppo_lr") config.train.ppo_lr = value.get<double>();
    else if (key == "ppo_inner_steps") config.train.ppo_inner_steps = value.get<int>();
    else if (key == "beta") config.train.beta = value.get<double>();
    else if (key == "clip_eps") config.train.clip_eps = value.get<double>();
    else if (key == "n") config.sampler.n = value.get<int>();
    else if (key == "temperature") config.sampler.temperature = value.get<double>();
    else if (key == "filter") config.filter = str();
    else if (key == "stocks") config.stocks = str();
    else if (key == "from") config.from = str();
    else if (key == "to") config.to = str();
    else throw ConfigError("unknown config key '" + key + "'");
}

} // namespace detail

// Strict JSON schema: every key must be known; flags override file values.
inline RunConfig config_from_json(const Json& file, RunConfig base = {}) {
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, value] : file.items()) {
        try {
            detail::apply_config_key(base, key, value);
        } catch (const Json::exception&) {
            throw ConfigError("bad value for config key '" + key + "'");
        }
    }
    return base;
}

inline RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {}) {
    try {
        return config_from_json(read_json(path), std::move(base));
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

// ---------------------------------------------------------------------------
// Chronological dataset split
// ---------------------------------------------------------------------------

template <typename T>
struct SplitResult {
    std::vector<T> train;
    std::vector<T> validation;
    std::vector<T> test;
};

// The earliest `ratio` of distinct trading days feeds the train pool, the
// rest the test set; validation takes the last `validation_fraction` of the
// train pool's samples. The seed is accepted for interface stability but the
// split is chronological, so it has no effect.
template <typename T, typename DayOf>
SplitResult<T> split_dataset(std::vector<T> samples, double ratio, double validation_fraction,
                             DayOf&& day_of, std::uint64_t /*seed*/ = 0) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ConfigError("validation fraction must lie in [0, 1)");
    if (samples.empty()) throw InsufficientData("nothing to split");

    std::set<TradingDay> days;
    for (const T& s : samples) days.insert(day_of(s));
    const std::size_t train_days =
        static_cast<std::size_t>(std::floor(static_cast<double>(days.size()) * ratio));
    if (train_days < 1 || train_days >= days.size())
        throw InsufficientData("need at least one train day and one test day, got " +
                               std::to_string(days.size()) + " distinct days");
    auto cutoff_it = days.begin();
    std::advance(cutoff_it, train_days - 1);
    const TradingDay cutoff = *cutoff_it;

    std::stable_sort(samples.begin(), samples.end(),
                     [&](const T& a, const T& b) { return day_of(a) < day_of(b); });

    SplitResult<T> result;
    std::vector<T> pool;
    for (T& s : samples) {
        if (day_of(s) <= cutoff) {
            pool.push_back(std::move(s));
        } else {
            result.test.push_back(std::move(s));
        }
    }
    const std::size_t k = static_cast<std::size_t>(
        std::llround(validation_fraction * static_cast<double>(pool.size())));
    const std::size_t split_at = pool.size() - k;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (i < split_at) {
            result.train.push_back(std::move(pool[i]));
        } else {
            result.validation.push_back(std::move(pool[i]));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Shared command plumbing
// ---------------------------------------------------------------------------

namespace cli {

inline constexpr int kOk = 0;
inline constexpr int kConfigExit = 2;
inline constexpr int kDataExit = 3;
inline constexpr int kBackendExit = 4;
inline constexpr int kDivergenceExit = 5;

inline std::filesystem::path artifact(const RunConfig& config,
                                      const std::filesystem::path& explicit_path,
                                      const char* name) {
    return explicit_path.empty() ? config.out / name : explicit_path;
}

inline std::filesystem::path require_input(const std::filesystem::path& path,
                                           const char* what) {
    if (path.empty()) throw ConfigError(std::string("missing required path: ") + what);
    if (!std::filesystem::exists(path))
        throw DataError(std::string(what) + " not found: " + path.string());
    return path;
}

inline std::set<std::string> ticker_allowlist(const RunConfig& config) {
    std::set<std::string> allow;
    std::string current;
    for (char c : config.stocks + ",") {
        if (c == ',') {
            if (!current.empty()) allow.insert(current);
            current.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            current.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        }
    }
    return allow;
}

inline bool day_in_range(const RunConfig& config, const TradingDay& day) {
    if (!config.from.empty() && day < TradingDay::from_iso(config.from)) return false;
    if (!config.to.empty() && TradingDay::from_iso(config.to) < day) return false;
    return true;
}

inline bool stock_allowed(const std::set<std::string>& allow, const StockSymbol& stock) {
    return allow.empty() || allow.count(stock.ticker) > 0;
}

// Owns whichever backend the run selected plus the journaling wrapper.
struct BackendBundle {
    std::unique_ptr<ScriptedBackend> scripted;
    std::unique_ptr<HttpBackend> http;
    std::unique_ptr<ReplayBackend> replay;
    std::unique_ptr<JournalingBackend> journaling;
    std::vector<JournalEntry> replayed;  // original session, re-emitted verbatim
    Backend* use = nullptr;

    bool replaying() const { return replay != nullptr; }
};

inline BackendBundle make_backend(const RunConfig& config) {
    BackendBundle bundle;
    if (!config.journal.empty()) {
        bundle.replayed = load_journal(require_input(config.journal, "journal"));
        bundle.replay = std::make_unique<ReplayBackend>(bundle.replayed);
        bundle.use = bundle.replay.get();
        return bundle;
    }
    if (config.backend == "mock") {
        bundle.scripted = std::make_unique<ScriptedBackend>();
        load_script_into(*bundle.scripted,
                         require_input(config.script, "mock backend script"));
        bundle.journaling = std::make_unique<JournalingBackend>(*bundle.scripted);
    } else {
        HttpBackend::Options opts = HttpBackend::from_env();
        opts.max_in_flight = config.jobs > 0
                                 ? config.jobs
                                 : std::max(1u, std::thread::hardware_concurrency());
        bundle.http = std::make_unique<HttpBackend>(std::move(opts));
        bundle.journaling = std::make_unique<JournalingBackend>(*bundle.http);
    }
    bundle.use = bundle.journaling.get();
    return bundle;
}

// A replayed session re-emits the recorded journal so the artifact is
// byte-identical; live runs persist what the wrapper captured.
inline void flush_sessions(const RunConfig& config, const BackendBundle& bundle) {
    const std::filesystem::path path = artifact(config, config.sessions, "sessions.jsonl");
    if (bundle.replaying()) {
        save_journal(path, bundle.replayed);
    } else {
        save_journal(path, bundle.journaling->entries());
    }
}

// ---------------------------------------------------------------------------
// Window assembly
// ---------------------------------------------------------------------------

struct LabeledWindow {
    InputWindow window;
    MovementLabel truth = MovementLabel::Negative;
};

// One candidate per (stock, consecutive price-bar pair) whose eve has a full
// span of summarized days; ordered by ticker then target day.
inline std::vector<LabeledWindow> build_labeled_windows(
    const std::vector<FactSummary>& summaries, const std::vector<PriceBar>& bars, int span) {
    if (span < 1) throw ConfigError("window span must be >= 1");

    std::map<std::string, std::vector<FactSummary>> facts_by_stock;
    for (const FactSummary& s : summaries) facts_by_stock[s.stock.ticker].push_back(s);
    for (auto& [ticker, list] : facts_by_stock)
        std::sort(list.begin(), list.end(),
                  [](const FactSummary& a, const FactSummary& b) { return a.day < b.day; });

    std::map<std::string, std::vector<PriceBar>> bars_by_stock;
    for (const PriceBar& b : bars) bars_by_stock[b.stock.ticker].push_back(b);

    std::vector<LabeledWindow> out;
    for (auto& [ticker, stock_bars] : bars_by_stock) {
        std::sort(stock_bars.begin(), stock_bars.end(),
                  [](const PriceBar& a, const PriceBar& b) { return a.day < b.day; });
        const auto facts_it = facts_by_stock.find(ticker);
        if (facts_it == facts_by_stock.end()) continue;
        const std::vector<FactSummary>& facts = facts_it->second;

        for (std::size_t i = 1; i < stock_bars.size(); ++i) {
            const TradingDay target = stock_bars[i].day;
            std::vector<FactSummary> window_facts;
            for (const FactSummary& s : facts)
                if (s.day < target) window_facts.push_back(s);
            if (window_facts.size() < static_cast<std::size_t>(span)) continue;
            window_facts.erase(window_facts.begin(),
                               window_facts.end() - static_cast<std::ptrdiff_t>(span));
            out.push_back({InputWindow(stock_bars[i].stock, target, std::move(window_facts)),
                           ground_truth_label(stock_bars[i - 1], stock_bars[i])});
        }
    }
    return out;
}

inline std::vector<LabeledWindow> filter_windows(std::vector<LabeledWindow> windows,
                                                 const RunConfig& config) {
    const std::set<std::string> allow = ticker_allowlist(config);
    std::vector<LabeledWindow> out;
    for (LabeledWindow& lw : windows) {
        if (!stock_allowed(allow, lw.window.stock())) continue;
        if (!day_in_range(config, lw.window.target_day())) continue;
        out.push_back(std::move(lw));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline void cmd_cluster(const RunConfig& config, std::ostream& out) {
    const std::vector<RawTweet> tweets = load_tweets(require_input(config.tweets, "tweets"));
    const std::set<std::string> allow = ticker_allowlist(config);

    std::map<std::pair<std::string, TradingDay>, std::vector<RawTweet>> groups;
    for (const RawTweet& t : tweets) {
        if (!stock_allowed(allow, t.stock) || !day_in_range(config, t.day)) continue;
        groups[{t.stock.ticker, t.day}].push_back(t);
    }

    const HashingEmbedder embedder(64, config.seed);
    ReduceParams params;
    params.seed = config.seed;

    std::vector<RawTweet> representatives;
    std::vector<int> cluster_ids;
    std::size_t total_in = 0;
    for (auto& [key, group] : groups) {
        total_in += group.size();
        const StockSymbol stock = group.front().stock;
        const DailyCorpus corpus(stock, key.second, std::move(group));
        ReducedDay reduced = reduce_corpus(corpus, embedder, params);
        for (std::size_t i = 0; i < reduced.corpus.tweets.size(); ++i) {
            representatives.push_back(reduced.corpus.tweets[i]);
            cluster_ids.push_back(reduced.cluster_ids[i]);
        }
    }
    save_tweets(artifact(config, config.reduced, "reduced.jsonl"), representatives,
                &cluster_ids);
    out << "cluster: " << groups.size() << " stock-days, " << total_in << " tweets -> "
        << representatives.size() << " representatives\n";
}

inline void cmd_summarize(const RunConfig& config, std::ostream& out) {
    const std::vector<RawTweet> tweets = load_tweets(require_input(config.tweets, "tweets"));
    const std::set<std::string> allow = ticker_allowlist(config);
    BackendBundle backend = make_backend(config);

    std::map<std::pair<std::string, TradingDay>, std::vector<RawTweet>> groups;
    for (const RawTweet& t : tweets) {
        if (!stock_allowed(allow, t.stock) || !day_in_range(config, t.day)) continue;
        groups[{t.stock.ticker, t.day}].push_back(t);
    }

    LoopConfig loop;
    loop.max_iters = config.max_iters;
    std::vector<FactSummary> summaries;
    std::size_t informative = 0;
    for (auto& [key, group] : groups) {
        const StockSymbol stock = group.front().stock;
        const DailyCorpus corpus(stock, key.second, std::move(group));
        FactSummary summary = summarize_day(*backend.use, corpus.stock, corpus, loop);
        informative += summary.informative ? 1 : 0;
        summaries.push_back(std::move(summary));
    }
    save_summaries(artifact(config, config.summaries, "summaries.jsonl"), summaries);
    flush_sessions(config, backend);
    out << "summarize: " << summaries.size() << " stock-days, " << informative
        << " informative\n";
}

inline void cmd_explain(const RunConfig& config, std::ostream& out) {
    const std::vector<FactSummary> summaries =
        load_summaries(require_input(artifact(config, config.summaries, "summaries.jsonl"),
                                     "summaries"));
    const std::vector<PriceBar> bars = load_prices(require_input(config.prices, "prices"));
    BackendBundle backend = make_backend(config);

    std::vector<LabeledWindow> windows =
        filter_windows(build_labeled_windows(summaries, bars, config.window_span), config);
    if (windows.empty()) throw InsufficientData("no explainable windows in range");
    SplitResult<LabeledWindow> split =
        split_dataset(std::move(windows), config.split_ratio, config.validation_fraction,
                      [](const LabeledWindow& lw) { return lw.window.target_day(); });

    LoopConfig loop;
    loop.max_iters = config.max_iters;
    std::vector<DemonstrationSample> demos;
    std::vector<ComparisonPair> pairs;
    std::size_t unresolved = 0;

    // Harvest over the whole train pool; the demo-level validation cut is
    // re-derived at fine-tuning time.
    std::vector<LabeledWindow> pool = std::move(split.train);
    for (LabeledWindow& lw : split.validation) pool.push_back(std::move(lw));
    std::stable_sort(pool.begin(), pool.end(),
                     [](const LabeledWindow& a, const LabeledWindow& b) {
                         return a.window.target_day() < b.window.target_day();
                     });

    for (const LabeledWindow& lw : pool) {
        const LoopOutcome outcome = run_reflection_loop(*backend.use, lw.window, lw.truth, loop);
        switch (outcome.kind()) {
            case LoopOutcome::Kind::InitialCorrect: demos.push_back(outcome.demo()); break;
            case LoopOutcome::Kind::ResolvedPair: pairs.push_back(outcome.pair()); break;
            case LoopOutcome::Kind::Unresolved: ++unresolved; break;
        }
    }
    save_demos(artifact(config, config.demos, "demos.jsonl"), demos);
    save_pairs(artifact(config, config.pairs, "pairs.jsonl"), pairs);
    flush_sessions(config, backend);
    out << "explain: " << pool.size() << " episodes -> " << demos.size() << " demos, "
        << pairs.size() << " pairs, " << unresolved << " unresolved\n";
}

// The global candidate pool: every distinct response seen in the harvested
// artifacts, so the policy can rank right against wrong for any window.
inline std::shared_ptr<FixedCandidates> build_candidate_pool(
    const std::vector<DemonstrationSample>& demos, const std::vector<ComparisonPair>& pairs) {
    std::vector<PredictionResponse> pool;
    std::set<std::string> seen;
    auto add = [&](const PredictionResponse& r) {
        if (seen.insert(r.raw).second) pool.push_back(r);
    };
    for (const DemonstrationSample& d : demos) add(d.response());
    for (const ComparisonPair& p : pairs) {
        add(p.winner());
        add(p.loser());
    }
    if (pool.empty()) throw InsufficientData("no responses to build a candidate pool from");
    return std::make_shared<FixedCandidates>(std::move(pool));
}

inline std::pair<std::vector<DemonstrationSample>, std::vector<ComparisonPair>>
load_harvest(const RunConfig& config, bool need_demos, bool need_pairs) {
    std::vector<DemonstrationSample> demos;
    std::vector<ComparisonPair> pairs;
    const std::filesystem::path demos_path = artifact(config, config.demos, "demos.jsonl");
    const std::filesystem::path pairs_path = artifact(config, config.pairs, "pairs.jsonl");
    if (need_demos || std::filesystem::exists(demos_path))
        demos = load_demos(require_input(demos_path, "demos"));
    if (need_pairs || std::filesystem::exists(pairs_path))
        pairs = load_pairs(require_input(pairs_path, "pairs"));
    return {std::move(demos), std::move(pairs)};
}

inline void cmd_train_sft(const RunConfig& config, std::ostream& out) {
    auto [demos, pairs] = load_harvest(config, true, false);
    if (demos.empty()) throw InsufficientData("no demonstrations to fine-tune on");
    std::stable_sort(demos.begin(), demos.end(),
                     [](const DemonstrationSample& a, const DemonstrationSample& b) {
                         return a.window().target_day() < b.window().target_day();
                     });

    // The candidate pool spans the whole harvest so held-out responses stay
    // scoreable; the validation cut only limits which demos drive updates.
    const auto pool = build_candidate_pool(demos, pairs);

    // Hold out the chronologically last slice of demonstrations.
    const std::size_t held = static_cast<std::size_t>(
        std::llround(config.validation_fraction * static_cast<double>(demos.size())));
    std::vector<DemonstrationSample> validation(demos.end() - static_cast<std::ptrdiff_t>(held),
                                                demos.end());
    demos.resize(demos.size() - held);
    if (demos.empty()) throw InsufficientData("validation cut consumed every demonstration");

    TrainConfig train = config.train;
    train.seed = config.seed;
    const SftTrainResult result = sft_train(demos, pool, train);

    save_policy(result.policy, artifact(config, config.policy_sft, "policy_sft.bin"));
    save_trace(artifact(config, config.trace, "sft_trace.jsonl"), "sft", result.loglik_trace);
    out << "train-sft: " << demos.size() << " demos, mean loglik "
        << result.loglik_trace.back();
    if (!validation.empty())
        out << ", validation " << mean_loglik(result.policy, validation);
    out << "\n";
}

inline void cmd_train_reward(const RunConfig& config, std::ostream& out) {
    auto [demos, pairs] = load_harvest(config, false, true);
    if (pairs.empty()) throw InsufficientData("no comparison pairs to train on");

    TrainConfig train = config.train;
    train.seed = config.seed;
    const RewardTrainResult result = train_reward(pairs, train);

    save_reward_model(result.model, artifact(config, config.reward_model, "reward_model.bin"));
    save_trace(artifact(config, config.trace, "reward_trace.jsonl"), "reward",
               result.loss_trace);
    out << "train-reward: " << pairs.size() << " pairs, loss "
        << result.loss_trace.front() << " -> " << result.loss_trace.back()
        << ", ranking accuracy " << ranking_accuracy(result.model, pairs) << "\n";
}

inline void cmd_train_ppo(const RunConfig& config, std::ostream& out) {
    auto [demos, pairs] = load_harvest(config, true, false);
    if (demos.empty() && pairs.empty())
        throw InsufficientData("no harvested windows to optimize over");
    const auto generator = build_candidate_pool(demos, pairs);

    std::vector<InputWindow> windows;
    for (const DemonstrationSample& d : demos) windows.push_back(d.window());
    for (const ComparisonPair& p : pairs) windows.push_back(p.window());

    const RewardModel reward = load_reward_model(
        require_input(artifact(config, config.reward_model, "reward_model.bin"),
                      "reward model"));
    const Policy sft = load_policy(
        require_input(artifact(config, config.policy_sft, "policy_sft.bin"), "sft policy"),
        generator);

    TrainConfig train = config.train;
    train.seed = config.seed;
    const PpoTrainResult result = train_ppo(sft, windows, reward, train);

    save_policy(result.policy, artifact(config, config.policy_ppo, "policy_ppo.bin"));
    save_trace(artifact(config, config.trace, "ppo_trace.jsonl"), "ppo", result.reward_trace);
    out << "train-ppo: " << windows.size() << " windows, expected reward "
        << result.reward_trace.front() << " -> " << result.reward_trace.back() << "\n";
}

inline void cmd_predict(const RunConfig& config, std::ostream& out) {
    const std::vector<FactSummary> summaries =
        load_summaries(require_input(artifact(config, config.summaries, "summaries.jsonl"),
                                     "summaries"));
    const std::vector<PriceBar> bars = load_prices(require_input(config.prices, "prices"));
    const RewardModel reward = load_reward_model(
        require_input(artifact(config, config.reward_model, "reward_model.bin"),
                      "reward model"));

    std::vector<LabeledWindow> all =
        filter_windows(build_labeled_windows(summaries, bars, config.window_span), config);
    if (all.empty()) throw InsufficientData("no predictable windows in range");
    SplitResult<LabeledWindow> split =
        split_dataset(std::move(all), config.split_ratio, config.validation_fraction,
                      [](const LabeledWindow& lw) { return lw.window.target_day(); });

    // Prefer an explicitly named policy, then the PPO artifact, then SFT;
    // without any policy file the backend itself samples candidates.
    std::filesystem::path policy_path = config.policy;
    if (policy_path.empty()) {
        const auto ppo = artifact(config, config.policy_ppo, "policy_ppo.bin");
        const auto sft = artifact(config, config.policy_sft, "policy_sft.bin");
        if (std::filesystem::exists(ppo)) policy_path = ppo;
        else if (std::filesystem::exists(sft)) policy_path = sft;
    }

    std::optional<Policy> policy;
    BackendBundle backend;
    if (!policy_path.empty()) {
        auto [demos, pairs] = load_harvest(config, false, false);
        policy = load_policy(require_input(policy_path, "policy"),
                             build_candidate_pool(demos, pairs));
    } else {
        backend = make_backend(config);
    }

    std::vector<PredictionRow> rows;
    SamplerConfig sampler = config.sampler;
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        const InputWindow& window = split.test[i].window;
        sampler.seed = config.seed + i;
        const std::vector<PredictionResponse> candidates =
            policy ? generate_candidates(*policy, window, sampler)
                   : generate_candidates(*backend.use, window, sampler);
        const auto [index, chosen] = best_of_n(reward, window, candidates);
        const std::vector<double> scores = score_candidates(reward, window, candidates);

        PredictionRow row;
        row.stock = window.stock();
        row.day = window.target_day();
        row.response = chosen;
        row.informative = window.summaries().back().informative;
        for (std::size_t c = 0; c < candidates.size(); ++c)
            row.candidates_scored.push_back({candidates[c].raw, scores[c]});
        rows.push_back(std::move(row));
    }
    save_predictions(artifact(config, config.predictions, "predictions.jsonl"), rows);
    if (!policy) flush_sessions(config, backend);
    out << "predict: " << rows.size() << " test windows ("
        << (policy ? policy_path.filename().string() : std::string("backend sampling"))
        << ", best of " << config.sampler.n << ")\n";
}

inline void cmd_evaluate(const RunConfig& config, std::ostream& out) {
    const std::vector<PredictionRow> rows = load_predictions(
        require_input(artifact(config, config.predictions, "predictions.jsonl"),
                      "predictions"));
    const std::vector<PriceBar> bars = load_prices(require_input(config.prices, "prices"));

    std::map<std::string, std::map<TradingDay, PriceBar>> by_stock;
    for (const PriceBar& b : bars) by_stock[b.stock.ticker][b.day] = b;

    std::vector<PredictedLabel> preds;
    std::vector<MovementLabel> truths;
    const bool informative_only = config.filter == "informative";
    for (const PredictionRow& row : rows) {
        if (informative_only && !row.informative) continue;
        const auto stock_it = by_stock.find(row.stock.ticker);
        if (stock_it == by_stock.end())
            throw DataError("no price bars for " + row.stock.ticker);
        const auto& days = stock_it->second;
        const auto target_it = days.find(row.day);
        if (target_it == days.end() || target_it == days.begin())
            throw DataError("no consecutive bars around " + row.stock.ticker + " " +
                            row.day.iso());
        preds.push_back(row.response.label);
        truths.push_back(ground_truth_label(std::prev(target_it)->second, target_it->second));
    }
    if (preds.empty()) throw InsufficientData("no predictions to evaluate under this filter");

    MetricsReport metrics;
    metrics.counts = confusion(preds, truths);
    metrics.accuracy_value = accuracy(metrics.counts);
    metrics.mcc_value = mcc(metrics.counts);
    metrics.n_samples = preds.size();
    metrics.filter = config.filter;
    save_report(artifact(config, config.report, "report.json"), metrics);
    out << "evaluate: " << metrics.n_samples << " samples (" << metrics.filter
        << "), accuracy " << metrics.accuracy_value << ", mcc " << metrics.mcc_value << "\n";
}

inline void cmd_portfolio(const RunConfig& config, std::ostream& out) {
    const std::vector<PredictionRow> rows = load_predictions(
        require_input(artifact(config, config.predictions, "predictions.jsonl"),
                      "predictions"));

    std::map<TradingDay, std::map<StockSymbol, PredictionResponse>> by_day;
    for (const PredictionRow& row : rows) by_day[row.day][row.stock] = row.response;

    BackendBundle backend;
    if (config.baseline.empty()) backend = make_backend(config);

    std::vector<PortfolioWeights> weights;
    for (const auto& [day, predictions] : by_day) {
        if (!config.baseline.empty()) {
            std::vector<StockSymbol> universe;
            for (const auto& [stock, response] : predictions) universe.push_back(stock);
            weights.push_back(baseline_weights(config.baseline == "equal"
                                                   ? BaselineKind::EqualWeight
                                                   : BaselineKind::PositiveOnly,
                                               universe, day, predictions));
            continue;
        }
        std::map<StockSymbol, std::string> explanations;
        for (const StockSymbol& stock : select_positive(predictions))
            explanations[stock] = predictions.at(stock).explanation;
        if (explanations.empty()) {
            weights.emplace_back(day, std::map<StockSymbol, double>{});
            continue;
        }
        weights.push_back(generate_weights(*backend.use, day, explanations));
    }
    save_weights(artifact(config, config.weights_file, "weights.jsonl"), weights);
    if (config.baseline.empty()) flush_sessions(config, backend);
    out << "portfolio: " << weights.size() << " days ("
        << (config.baseline.empty() ? "llm weights" : config.baseline + " baseline") << ")\n";
}

inline void cmd_backtest(const RunConfig& config, std::ostream& out) {
    const std::vector<PortfolioWeights> weights = load_weights(
        require_input(artifact(config, config.weights_file, "weights.jsonl"), "weights"));
    const std::vector<PriceBar> bars = load_prices(require_input(config.prices, "prices"));

    std::map<std::string, std::map<TradingDay, PriceBar>> by_stock;
    for (const PriceBar& b : bars) by_stock[b.stock.ticker][b.day] = b;

    std::vector<BacktestDay> series;
    for (const PortfolioWeights& day_weights : weights) {
        std::map<StockSymbol, double> returns;
        for (const auto& [stock, weight] : day_weights.weights()) {
            if (weight == 0.0) continue;
            const auto stock_it = by_stock.find(stock.ticker);
            if (stock_it == by_stock.end()) continue;  // daily_profit reports the gap
            const auto& days = stock_it->second;
            const auto target_it = days.find(day_weights.day());
            if (target_it == days.end() || target_it == days.begin()) continue;
            returns[stock] = daily_return(std::prev(target_it)->second, target_it->second);
        }
        series.push_back({day_weights, std::move(returns)});
    }
    const BacktestReport result = backtest(series);
    save_backtest_report(artifact(config, config.backtest_report, "backtest_report.json"),
                         result);
    out << "backtest: " << series.size() << " days, overall " << result.overall
        << ", cumulative " << result.cumulative << ", sharpe " << result.sharpe << "\n";
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline void dispatch(const std::string& command, const RunConfig& config, std::ostream& out) {
    if (command == "cluster") cmd_cluster(config, out);
    else if (command == "summarize") cmd_summarize(config, out);
    else if (command == "explain") cmd_explain(config, out);
    else if (command == "train-sft") cmd_train_sft(config, out);
    else if (command == "train-reward") cmd_train_reward(config, out);
    else if (command == "train-ppo") cmd_train_ppo(config, out);
    else if (command == "predict") cmd_predict(config, out);
    else if (command == "evaluate") cmd_evaluate(config, out);
    else if (command == "portfolio") cmd_portfolio(config, out);
    else if (command == "backtest") cmd_backtest(config, out);
    else throw ConfigError("unknown command '" + command + "'");
}

inline void emit_error(std::ostream& err, const std::string& category,
                       const std::string& message) {
    err << Json{{"error", Json{{"category", category}, {"message", message}}}}.dump() << "\n";
}

// `replay` re-runs any journaled subcommand against the recorded session.
inline int run_command(const std::string& command, RunConfig config,
                       std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        std::string effective = command;
        if (command == "replay") {
            if (config.journal.empty())
                throw ConfigError("replay needs --journal pointing at a recorded session");
            if (config.replay_command.empty())
                throw ConfigError("replay needs --command naming the subcommand to re-run");
            effective = config.replay_command;
        }
        config.validate();
        if (!config.out.empty()) std::filesystem::create_directories(config.out);
        dispatch(effective, config, out);
        return kOk;
    } catch (const ConfigError& e) {
        emit_error(err, "config", e.what());
        return kConfigExit;
    } catch (const DivergenceError& e) {
        emit_error(err, "divergence", e.what());
        return kDivergenceExit;
    } catch (const EpisodeAborted& e) {
        emit_error(err, "backend", e.what());
        return kBackendExit;
    } catch (const TransientBackendError& e) {
        emit_error(err, "backend", e.what());
        return kBackendExit;
    } catch (const BackendUnavailable& e) {
        emit_error(err, "backend", e.what());
        return kBackendExit;
    } catch (const MalformedBackendReply& e) {
        emit_error(err, "backend", e.what());
        return kBackendExit;
    } catch (const ScriptExhausted& e) {
        emit_error(err, "backend", e.what());
        return kBackendExit;
    } catch (const Error& e) {
        emit_error(err, "data", e.what());
        return kDataExit;
    } catch (const std::invalid_argument& e) {
        emit_error(err, "config", e.what());
        return kConfigExit;
    } catch (const std::exception& e) {
        emit_error(err, "data", e.what());
        return kDataExit;
    }
}

} // namespace cli
} // namespace sep
