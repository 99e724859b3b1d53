#include "sep/sampler.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace {

using namespace sep;

PredictionResponse tagged(PredictedLabel label, const std::string& tag) {
    PredictionResponse r;
    r.label = label;
    r.explanation = tag;
    r.raw = "Prediction: " + to_string(label) + "\nExplanation: " + tag;
    return r;
}

// Reward model paying `score` for one unique single-use token, so the total
// equals the target exactly.
RewardModel reward_for(const std::vector<std::pair<std::string, double>>& token_scores) {
    RewardModel model;
    for (const auto& [token, score] : token_scores)
        model.weights[fnv1a64(token) % kHashSpace] = score;
    return model;
}

InputWindow plain_window(int target = 6) {
    std::vector<FactSummary> summaries = {
        FactSummary(septest::stock(), septest::day_n(target - 1), {"quiet tape all day"})};
    return InputWindow(septest::stock(), septest::day_n(target), std::move(summaries));
}

Policy skewed_policy(std::shared_ptr<const CandidateGenerator> generator, double marker_weight) {
    Policy policy;
    policy.generator = std::move(generator);
    policy.weights[fnv1a64("jackpot") % kHashSpace] = marker_weight;
    return policy;
}

struct TwoChoice {
    PredictionResponse marker = tagged(PredictedLabel::Positive, "jackpot run");
    PredictionResponse other = tagged(PredictedLabel::Negative, "fizzle run");
    std::shared_ptr<FixedCandidates> generator = std::make_shared<FixedCandidates>(
        std::vector<PredictionResponse>{marker, other});
};

// ---------------------------------------------------------------------------
// Backend-sourced candidates
// ---------------------------------------------------------------------------

TEST(SamplerBackend, SingleCandidateDegenerateCase) {
    ScriptedBackend mock;
    mock.enqueue("explain", "Prediction: Positive\nExplanation: still rising");
    SamplerConfig config;
    config.n = 1;
    const std::vector<PredictionResponse> out =
        generate_candidates(mock, plain_window(), config);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].label, PredictedLabel::Positive);
    EXPECT_EQ(out[0].explanation, "still rising");
}

TEST(SamplerBackend, FourRepliesComeBackParsedInOrder) {
    ScriptedBackend mock;
    mock.enqueue_all("explain", {"Prediction: Positive\nExplanation: one",
                                 "Prediction: Negative\nExplanation: two",
                                 "Prediction: Neutral\nExplanation: three",
                                 "garbled text with no labels"});
    JournalingBackend journal(mock);
    const std::vector<PredictionResponse> out =
        generate_candidates(journal, plain_window(), SamplerConfig{});
    ASSERT_EQ(out.size(), 4u);
    EXPECT_EQ(out[0].label, PredictedLabel::Positive);
    EXPECT_EQ(out[0].explanation, "one");
    EXPECT_EQ(out[1].label, PredictedLabel::Negative);
    EXPECT_EQ(out[2].label, PredictedLabel::Neutral);
    EXPECT_EQ(out[3].label, PredictedLabel::Malformed);
    EXPECT_EQ(out[3].raw, "garbled text with no labels");

    ASSERT_EQ(journal.entries().size(), 1u);
    const CompletionRequest& request = journal.entries()[0].request;
    EXPECT_EQ(request.template_name, "explain");
    EXPECT_EQ(request.n, 4);
    EXPECT_DOUBLE_EQ(request.temperature, 0.7);
}

TEST(SamplerBackend, BackendErrorsPropagate) {
    ScriptedBackend mock;  // nothing enqueued
    EXPECT_THROW(generate_candidates(mock, plain_window(), SamplerConfig{}), ScriptExhausted);
}

TEST(SamplerBackend, RejectsBadConfig) {
    ScriptedBackend mock;
    SamplerConfig config;
    config.n = 0;
    EXPECT_THROW(generate_candidates(mock, plain_window(), config), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Policy-sourced candidates
// ---------------------------------------------------------------------------

TEST(SamplerPolicy, FixedSeedGivesIdenticalDraws) {
    TwoChoice choice;
    Policy policy = skewed_policy(choice.generator, 0.4);
    SamplerConfig config;
    config.n = 16;
    config.seed = 321;
    const auto a = generate_candidates(policy, plain_window(), config);
    const auto b = generate_candidates(policy, plain_window(), config);
    ASSERT_EQ(a.size(), 16u);
    EXPECT_EQ(a, b);
}

TEST(SamplerPolicy, DrawFrequenciesTrackTheDistribution) {
    TwoChoice choice;
    Policy policy = skewed_policy(choice.generator, 2.0);
    const InputWindow window = plain_window();
    const double p_marker = std::exp(policy_logprob(policy, window, choice.marker));
    ASSERT_GT(p_marker, 0.8);

    SamplerConfig config;
    config.n = 400;
    config.temperature = 1.0;  // sample at the policy's own temperature
    config.seed = 9;
    std::size_t hits = 0;
    for (const PredictionResponse& r : generate_candidates(policy, window, config))
        if (r.raw == choice.marker.raw) ++hits;
    EXPECT_NEAR(static_cast<double>(hits) / 400.0, p_marker, 0.08);
}

TEST(SamplerPolicy, SamplerTemperatureRetempersThePolicy) {
    TwoChoice choice;
    Policy policy = skewed_policy(choice.generator, 1.0);
    const InputWindow window = plain_window();

    const auto marker_rate = [&](double temperature, std::uint64_t seed) {
        SamplerConfig config;
        config.n = 300;
        config.temperature = temperature;
        config.seed = seed;
        std::size_t hits = 0;
        for (const PredictionResponse& r : generate_candidates(policy, window, config))
            if (r.raw == choice.marker.raw) ++hits;
        return static_cast<double>(hits) / 300.0;
    };
    EXPECT_GT(marker_rate(0.2, 5), marker_rate(5.0, 5));
    EXPECT_GT(marker_rate(0.2, 5), 0.95);
}

TEST(SamplerPolicy, RetemperingMatchesDirectScoring) {
    // Sampling at temperature t must follow the same distribution as a policy
    // whose own temperature is t.
    TwoChoice choice;
    Policy warm = skewed_policy(choice.generator, 0.9);
    warm.temperature = 1.3;
    Policy direct = warm;
    direct.temperature = 0.6;
    const InputWindow window = plain_window();

    const double p_direct = std::exp(policy_logprob(direct, window, choice.marker));
    SamplerConfig config;
    config.n = 2000;
    config.temperature = 0.6;
    config.seed = 13;
    std::size_t hits = 0;
    for (const PredictionResponse& r : generate_candidates(warm, window, config))
        if (r.raw == choice.marker.raw) ++hits;
    EXPECT_NEAR(static_cast<double>(hits) / 2000.0, p_direct, 0.03);
}

TEST(SamplerPolicy, RejectsNonPositiveTemperature) {
    TwoChoice choice;
    Policy policy = skewed_policy(choice.generator, 0.4);
    SamplerConfig config;
    config.temperature = 0.0;
    EXPECT_THROW(generate_candidates(policy, plain_window(), config), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Best-of-n selection
// ---------------------------------------------------------------------------

TEST(BestOfN, PicksTheArgmax) {
    const std::vector<PredictionResponse> candidates = {
        tagged(PredictedLabel::Positive, "alpha move"), tagged(PredictedLabel::Positive, "bravo move"),
        tagged(PredictedLabel::Negative, "charlie move"), tagged(PredictedLabel::Negative, "delta move")};
    const RewardModel reward = reward_for(
        {{"alpha", 0.1}, {"bravo", 0.9}, {"charlie", 0.3}, {"delta", 0.2}});
    const auto [index, response] = best_of_n(reward, plain_window(), candidates);
    EXPECT_EQ(index, 1u);
    EXPECT_EQ(response.explanation, "bravo move");
}

TEST(BestOfN, TiesGoToTheLowestIndex) {
    const std::vector<PredictionResponse> candidates = {
        tagged(PredictedLabel::Positive, "alpha move"), tagged(PredictedLabel::Positive, "bravo move")};
    const RewardModel reward = reward_for({{"alpha", 0.9}, {"bravo", 0.9}});
    const auto [index, response] = best_of_n(reward, plain_window(), candidates);
    EXPECT_EQ(index, 0u);
}

TEST(BestOfN, EmptyCandidatesRejected) {
    RewardModel reward;
    EXPECT_THROW(best_of_n(reward, plain_window(), {}), EmptyCandidateError);
}

TEST(BestOfN, MatchesExhaustiveScanOracle) {
    const char* tags[] = {"ember", "frost", "gale", "haze", "iris", "joule", "karst", "lumen"};
    std::mt19937_64 rng(27);
    std::uniform_real_distribution<double> coin(-2.0, 2.0);
    std::uniform_int_distribution<int> n_choices(1, 8);

    for (int trial = 0; trial < 50; ++trial) {
        const int n = n_choices(rng);
        std::vector<PredictionResponse> candidates;
        RewardModel reward;
        for (int i = 0; i < n; ++i) {
            candidates.push_back(tagged(PredictedLabel::Positive, std::string(tags[i]) + " move"));
            reward.weights[fnv1a64(tags[i]) % kHashSpace] = coin(rng);
        }
        const InputWindow window = plain_window(6 + trial % 10);

        std::size_t oracle = 0;
        double oracle_best = reward_score(reward, window, candidates[0]);
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            const double s = reward_score(reward, window, candidates[i]);
            if (s > oracle_best) {
                oracle = i;
                oracle_best = s;
            }
        }
        EXPECT_EQ(best_of_n(reward, window, candidates).first, oracle);
    }
}

TEST(BestOfN, InvariantUnderPositiveAffineRewardTransforms) {
    const std::vector<PredictionResponse> candidates = {
        tagged(PredictedLabel::Positive, "ember move"), tagged(PredictedLabel::Negative, "frost move"),
        tagged(PredictedLabel::Positive, "gale move")};
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> weight(-1.5, 1.5);
    std::uniform_real_distribution<double> scale(0.1, 3.0);
    std::uniform_real_distribution<double> shift(-5.0, 5.0);

    for (int trial = 0; trial < 20; ++trial) {
        RewardModel reward = reward_for(
            {{"ember", weight(rng)}, {"frost", weight(rng)}, {"gale", weight(rng)}});
        RewardModel affine = reward;
        const double a = scale(rng);
        const double b = shift(rng);
        for (double& w : affine.weights) w *= a;
        affine.bias = reward.bias * a + b;

        const InputWindow window = plain_window();
        EXPECT_EQ(best_of_n(reward, window, candidates).first,
                  best_of_n(affine, window, candidates).first);
    }
}

TEST(BestOfN, ScoreListAlignsWithCandidates) {
    const std::vector<PredictionResponse> candidates = {
        tagged(PredictedLabel::Positive, "alpha move"), tagged(PredictedLabel::Negative, "bravo move")};
    const RewardModel reward = reward_for({{"alpha", 0.25}, {"bravo", -0.5}});
    const std::vector<double> scores = score_candidates(reward, plain_window(), candidates);
    ASSERT_EQ(scores.size(), 2u);
    EXPECT_NEAR(scores[0], 0.25, 1e-12);
    EXPECT_NEAR(scores[1], -0.5, 1e-12);
}

// ---------------------------------------------------------------------------
// Best-of-n beats one-shot
// ---------------------------------------------------------------------------

TEST(BestOfN, FourDrawsBeatOneDrawOnAverage) {
    TwoChoice choice;
    Policy policy = skewed_policy(choice.generator, 0.0);  // uniform draws
    const RewardModel reward = reward_for({{"jackpot", 1.0}});
    const InputWindow window = plain_window();

    double total_one = 0.0;
    double total_four = 0.0;
    for (std::uint64_t draw = 0; draw < 1000; ++draw) {
        SamplerConfig config;
        config.seed = draw;
        config.n = 1;
        total_one +=
            reward_score(reward, window,
                         best_of_n(reward, window, generate_candidates(policy, window, config))
                             .second);
        config.n = 4;
        total_four +=
            reward_score(reward, window,
                         best_of_n(reward, window, generate_candidates(policy, window, config))
                             .second);
    }
    const double mean_one = total_one / 1000.0;
    const double mean_four = total_four / 1000.0;
    EXPECT_GT(mean_four, mean_one);
    // Uniform two-candidate task: expectations 0.5 and 1 - (1/2)^4.
    EXPECT_NEAR(mean_one, 0.5, 0.05);
    EXPECT_NEAR(mean_four, 0.9375, 0.03);
}

} // namespace
