#pragma once

#include "sep/core.hpp"
#include "sep/errors.hpp"
#include "sep/llmio.hpp"

#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

// The engine loop: summarize a day's corpus into facts, explain the next-day
// movement, reflect on misses, re-explain with accumulated reflections, and
// harvest demonstration samples and comparison pairs along the way.

namespace sep {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct LoopConfig {
    int max_iters = 3;
    std::string sentinel = "NO INFO";  // reply line meaning "nothing useful today"
    RetryPolicy retry{};
    Sleeper sleeper{};  // empty = real sleep between retries
};

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

inline std::string trim(std::string_view s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return std::string(s.substr(begin, end - begin));
}

inline std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string current;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    lines.push_back(current);
    return lines;
}

inline std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

namespace templates {

inline const PromptTemplate& summarize() {
    static const PromptTemplate tpl(
        "summarize",
        "You are a financial analyst covering {ticker}.\n"
        "Extract the factual information from the tweets below as point-form bullets,\n"
        "keeping only facts that could bear on the price of {ticker} or its industry.\n"
        "If there is no useful factual information, reply with exactly:\n"
        "NO INFO\n"
        "\n"
        "Tweets for {ticker} on {date}:\n"
        "{tweets}\n"
        "\n"
        "Facts:",
        {Exemplar("Tweets for AAPL on 2020-07-30:\n"
                  "- apple google amazon and facebook all smashed earnings expectations today\n"
                  "- big tech carried the whole market again",
                  "- Big Tech stocks, including Apple (AAPL), Google, Amazon, and Facebook, "
                  "beat earnings expectations."),
         Exemplar("Tweets for AAPL on 2020-08-02:\n"
                  "- good morning everyone!!\n"
                  "- giveaway: follow and retweet to win a phone case",
                  "NO INFO")});
    return tpl;
}

inline std::vector<Exemplar> explain_exemplars() {
    return {
        Exemplar("Facts for ACME on 2020-07-28:\n"
                 "- ACME reported record quarterly revenue.\n"
                 "Facts for ACME on 2020-07-29:\n"
                 "- Analysts raised price targets for ACME.\n"
                 "\n"
                 "Will ACME move Positive or Negative on 2020-07-30?",
                 "Prediction: Positive\n"
                 "Explanation: Record revenue and analyst upgrades signal strong demand, so the "
                 "stock is likely to keep climbing."),
        Exemplar("Facts for ACME on 2020-09-01:\n"
                 "- ACME recalled its flagship product over safety concerns.\n"
                 "Facts for ACME on 2020-09-02:\n"
                 "- Regulators opened an inquiry into the recall.\n"
                 "\n"
                 "Will ACME move Positive or Negative on 2020-09-03?",
                 "Prediction: Negative\n"
                 "Explanation: A safety recall plus a regulatory inquiry raises costs and "
                 "uncertainty, which usually pressures the price down."),
    };
}

inline const PromptTemplate& explain() {
    static const PromptTemplate tpl(
        "explain",
        "You are a financial analyst predicting the next-day price movement for {ticker}.\n"
        "Respond in exactly this format:\n"
        "Prediction: Positive or Negative\n"
        "Explanation: your reasoning\n"
        "\n"
        "{window}\n"
        "\n"
        "Will {ticker} move Positive or Negative on {date}?",
        explain_exemplars());
    return tpl;
}

inline const PromptTemplate& reflect() {
    static const PromptTemplate tpl(
        "reflect",
        "You are reviewing a failed next-day prediction for {ticker}.\n"
        "\n"
        "{window}\n"
        "\n"
        "Previous response (iteration {iteration}):\n"
        "{response}\n"
        "\n"
        "The prediction above was wrong. Diagnose where the reasoning failed, then state a\n"
        "concise high-level plan to avoid repeating the failure on the next attempt.\n"
        "Reflection:");
    return tpl;
}

inline const PromptTemplate& explain_reflect() {
    static const PromptTemplate tpl(
        "explain_reflect",
        "You are a financial analyst predicting the next-day price movement for {ticker}.\n"
        "Respond in exactly this format:\n"
        "Prediction: Positive or Negative\n"
        "Explanation: your reasoning\n"
        "\n"
        "{window}\n"
        "\n"
        "Lessons from your previous failed attempts, oldest first:\n"
        "{reflections}\n"
        "\n"
        "Will {ticker} move Positive or Negative on {date}?",
        explain_exemplars());
    return tpl;
}

} // namespace templates

// One block per summary day, oldest first.
inline std::string format_window(const InputWindow& window) {
    std::string out;
    for (const FactSummary& summary : window.summaries()) {
        if (!out.empty()) out += '\n';
        out += "Facts for " + window.stock().ticker + " on " + summary.day.iso() + ":\n";
        if (summary.informative) {
            for (const std::string& fact : summary.facts) out += "- " + fact + "\n";
        } else {
            out += "- (no information)\n";
        }
    }
    if (!out.empty()) out.pop_back();  // drop the trailing newline
    return out;
}

inline std::string format_reflections(const std::vector<ReflectionRecord>& reflections) {
    std::string out;
    for (const ReflectionRecord& r : reflections) {
        if (!out.empty()) out += '\n';
        out += "Reflection " + std::to_string(r.iteration) + ": " + r.feedback + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

// Case-insensitive scan for a `Prediction:` line carrying one of the four
// labels; everything after the first `Explanation:` marker is the
// explanation. Anything else is Malformed with an empty explanation.
inline PredictionResponse parse_prediction(const std::string& raw) {
    PredictionResponse response;
    response.raw = raw;
    response.label = PredictedLabel::Malformed;

    for (const std::string& line : split_lines(raw)) {
        const std::string lowered = to_lower(trim(line));
        constexpr std::string_view kMarker = "prediction:";
        if (lowered.rfind(kMarker, 0) != 0) continue;
        std::string token = trim(lowered.substr(kMarker.size()));
        const std::size_t word_end = token.find_first_not_of("abcdefghijklmnopqrstuvwxyz");
        if (word_end != std::string::npos) token = token.substr(0, word_end);
        if (token == "positive") response.label = PredictedLabel::Positive;
        else if (token == "negative") response.label = PredictedLabel::Negative;
        else if (token == "neutral") response.label = PredictedLabel::Neutral;
        else if (token == "mixed") response.label = PredictedLabel::Mixed;
        else continue;
        break;
    }
    if (response.label == PredictedLabel::Malformed) return response;

    const std::string lowered = to_lower(raw);
    constexpr std::string_view kExplanation = "explanation:";
    const std::size_t at = lowered.find(kExplanation);
    if (at != std::string::npos)
        response.explanation = trim(raw.substr(at + kExplanation.size()));
    return response;
}

// ---------------------------------------------------------------------------
// Summarize
// ---------------------------------------------------------------------------

// Facts from the backend as dash/number-prefixed lines; a sentinel line means
// an uninformative day. A reply with no parseable bullet lines becomes a
// single whole-reply fact, with *fallback set when provided.
inline FactSummary summarize_day(Backend& backend, const StockSymbol& stock,
                                 const DailyCorpus& corpus, const LoopConfig& config = {},
                                 bool* fallback = nullptr) {
    if (fallback) *fallback = false;
    if (corpus.stock.ticker != stock.ticker)
        throw std::invalid_argument("corpus does not belong to " + stock.ticker);
    if (corpus.tweets.empty()) return FactSummary(stock, corpus.day, {});

    std::string tweets;
    for (const RawTweet& t : corpus.tweets) {
        if (!tweets.empty()) tweets += '\n';
        tweets += "- " + t.text;
    }
    const CompletionRequest request = build_request(
        templates::summarize(),
        {{"ticker", stock.ticker}, {"date", corpus.day.iso()}, {"tweets", tweets}});
    const std::string reply =
        complete(backend, request, config.retry, config.sleeper).front();

    std::vector<std::string> facts;
    for (const std::string& line : split_lines(reply)) {
        const std::string content = trim(line);
        if (content == config.sentinel) return FactSummary(stock, corpus.day, {});
        std::size_t offset = 0;
        if (content.size() > 1 && (content[0] == '-' || content[0] == '*')) {
            offset = 1;
        } else {
            while (offset < content.size() &&
                   std::isdigit(static_cast<unsigned char>(content[offset])))
                ++offset;
            if (offset == 0 || offset >= content.size() ||
                (content[offset] != '.' && content[offset] != ')'))
                continue;
            ++offset;
        }
        const std::string fact = trim(content.substr(offset));
        if (!fact.empty()) facts.push_back(fact);
    }
    if (facts.empty()) {
        const std::string whole = trim(reply);
        if (!whole.empty()) {
            if (fallback) *fallback = true;
            facts.push_back(whole);
        }
    }
    return FactSummary(stock, corpus.day, std::move(facts));
}

// ---------------------------------------------------------------------------
// Explain and reflect
// ---------------------------------------------------------------------------

inline PredictionResponse explain_initial(Backend& backend, const InputWindow& window,
                                          const LoopConfig& config = {}) {
    const CompletionRequest request =
        build_request(templates::explain(), {{"ticker", window.stock().ticker},
                                             {"date", window.target_day().iso()},
                                             {"window", format_window(window)}});
    return parse_prediction(complete(backend, request, config.retry, config.sleeper).front());
}

// Verbal feedback on the episode's latest wrong response. The caller is
// responsible for only reflecting on responses that missed the ground truth.
inline ReflectionRecord reflect(Backend& backend, const EpisodeMemory& memory,
                                const LoopConfig& config = {}) {
    const int iteration = memory.next_iteration();
    const CompletionRequest request = build_request(
        templates::reflect(), {{"ticker", memory.window().stock().ticker},
                               {"window", format_window(memory.window())},
                               {"iteration", std::to_string(iteration)},
                               {"response", memory.last_response().raw}});
    const std::string feedback =
        trim(complete(backend, request, config.retry, config.sleeper).front());
    if (feedback.empty())
        throw MalformedBackendReply("backend returned an empty reflection");
    return ReflectionRecord(iteration, feedback);
}

inline PredictionResponse explain_with_reflections(Backend& backend, const InputWindow& window,
                                                   const std::vector<ReflectionRecord>& reflections,
                                                   const LoopConfig& config = {}) {
    if (reflections.empty())
        throw std::invalid_argument("explain_with_reflections needs at least one reflection");
    for (std::size_t i = 1; i < reflections.size(); ++i) {
        if (reflections[i - 1].iteration >= reflections[i].iteration)
            throw std::invalid_argument("reflections must be in increasing iteration order");
    }
    const CompletionRequest request = build_request(
        templates::explain_reflect(), {{"ticker", window.stock().ticker},
                                       {"date", window.target_day().iso()},
                                       {"window", format_window(window)},
                                       {"reflections", format_reflections(reflections)}});
    return parse_prediction(complete(backend, request, config.retry, config.sleeper).front());
}

// ---------------------------------------------------------------------------
// The reflection loop
// ---------------------------------------------------------------------------

// A backend failure mid-episode, carrying whatever memory had accumulated.
struct EpisodeAborted : Error {
    EpisodeAborted(const std::string& msg, EpisodeMemory memory_)
        : Error(msg), memory(std::move(memory_)) {}
    EpisodeMemory memory;
};

// Exactly one of: a demonstration (correct at iteration 0), a comparison pair
// (first correct re-explanation, paired with the attempt just before it), or
// the unresolved episode memory.
class LoopOutcome {
  public:
    enum class Kind { InitialCorrect = 0, ResolvedPair = 1, Unresolved = 2 };

    explicit LoopOutcome(DemonstrationSample demo)
        : payload_(std::move(demo)), iterations_used_(0) {}
    explicit LoopOutcome(ComparisonPair pair)
        : payload_(std::move(pair)),
          iterations_used_(std::get<ComparisonPair>(payload_).resolved_iteration()) {}
    LoopOutcome(EpisodeMemory memory, int iterations_used)
        : payload_(std::move(memory)), iterations_used_(iterations_used) {
        if (iterations_used_ < 1)
            throw std::invalid_argument("unresolved episodes use at least one iteration");
    }

    Kind kind() const { return static_cast<Kind>(payload_.index()); }
    int iterations_used() const { return iterations_used_; }

    const DemonstrationSample& demo() const { return std::get<DemonstrationSample>(payload_); }
    const ComparisonPair& pair() const { return std::get<ComparisonPair>(payload_); }
    const EpisodeMemory& memory() const { return std::get<EpisodeMemory>(payload_); }

  private:
    std::variant<DemonstrationSample, ComparisonPair, EpisodeMemory> payload_;
    int iterations_used_ = 0;
};

// Iteration 0 explains cold; each later iteration reflects on the miss and
// re-explains with every lesson so far. The first correct re-explanation wins
// against the attempt immediately before it.
inline LoopOutcome run_reflection_loop(Backend& backend, const InputWindow& window,
                                       MovementLabel truth, const LoopConfig& config = {}) {
    if (config.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");

    const PredictionResponse initial = explain_initial(backend, window, config);
    if (matches(initial.label, truth))
        return LoopOutcome(DemonstrationSample(window, initial, truth));

    EpisodeMemory memory(window, initial);
    PredictionResponse previous = initial;
    for (int i = 1; i <= config.max_iters; ++i) {
        try {
            memory.add_reflection(reflect(backend, memory, config));
            const PredictionResponse next =
                explain_with_reflections(backend, window, memory.reflections(), config);
            if (matches(next.label, truth))
                return LoopOutcome(ComparisonPair(window, next, previous, i, truth));
            memory.set_last_response(next);
            previous = next;
        } catch (const Error& e) {
            throw EpisodeAborted(std::string("episode aborted at iteration ") +
                                     std::to_string(i) + ": " + e.what(),
                                 std::move(memory));
        }
    }
    return LoopOutcome(std::move(memory), config.max_iters);
}

} // namespace sep
