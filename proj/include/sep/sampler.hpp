#pragma once

#include "sep/core.hpp"
#include "sep/errors.hpp"
#include "sep/llmio.hpp"
#include "sep/pipeline.hpp"
#include "sep/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

// Test-time inference: draw n candidate responses, then keep the one the
// reward model scores highest.

namespace sep {

struct SamplerConfig {
    int n = 4;
    double temperature = 0.7;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1) throw std::invalid_argument("sampler n must be >= 1");
    }
};

// Backend source: one chat call asking for n completions at the sampler
// temperature, each parsed into a response. Order follows the reply order.
inline std::vector<PredictionResponse> generate_candidates(Backend& backend,
                                                           const InputWindow& window,
                                                           const SamplerConfig& config,
                                                           const RetryPolicy& retry = {},
                                                           const Sleeper& sleeper = {}) {
    config.validate();
    const CompletionRequest request =
        build_request(templates::explain(),
                      {{"ticker", window.stock().ticker},
                       {"window", format_window(window)},
                       {"date", window.target_day().iso()}},
                      config.temperature, config.n);
    std::vector<PredictionResponse> candidates;
    for (const std::string& reply : complete(backend, request, retry, sleeper))
        candidates.push_back(parse_prediction(reply));
    return candidates;
}

// Policy source: n seeded draws (with replacement) from the softmax,
// re-tempered to the sampler temperature. Rescaling the log-probabilities by
// old/new temperature and renormalizing equals scoring at the new one, since
// the shared normalizer shifts every logit by the same constant.
inline std::vector<PredictionResponse> generate_candidates(const Policy& policy,
                                                           const InputWindow& window,
                                                           const SamplerConfig& config) {
    config.validate();
    if (!(config.temperature > 0.0))
        throw std::invalid_argument("policy sampling needs a positive temperature");

    const std::vector<CandidateScore> scored = policy_scores(policy, window);
    const double scale = policy.temperature / config.temperature;
    std::vector<double> logits;
    logits.reserve(scored.size());
    for (const CandidateScore& s : scored) logits.push_back(s.logprob * scale);
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (const double l : logits) sum += std::exp(l - peak);
    const double lse = peak + std::log(sum);

    std::vector<double> probs;
    probs.reserve(logits.size());
    for (const double l : logits) probs.push_back(std::exp(l - lse));

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<PredictionResponse> candidates;
    candidates.reserve(static_cast<std::size_t>(config.n));
    for (int i = 0; i < config.n; ++i) {
        const double u = uniform(rng);
        double acc = 0.0;
        std::size_t picked = probs.size() - 1;
        for (std::size_t c = 0; c < probs.size(); ++c) {
            acc += probs[c];
            if (u < acc) {
                picked = c;
                break;
            }
        }
        candidates.push_back(scored[picked].response);
    }
    return candidates;
}

// Argmax of the reward score; ties go to the lowest index.
inline std::pair<std::size_t, PredictionResponse> best_of_n(
    const RewardModel& reward, const InputWindow& window,
    const std::vector<PredictionResponse>& candidates) {
    if (candidates.empty()) throw EmptyCandidateError("best_of_n needs candidates");
    std::size_t best = 0;
    double best_score = reward_score(reward, window, candidates[0]);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double score = reward_score(reward, window, candidates[i]);
        if (score > best_score) {
            best = i;
            best_score = score;
        }
    }
    return {best, candidates[best]};
}

// Scores aligned with the candidate order, for journaling selections.
inline std::vector<double> score_candidates(const RewardModel& reward, const InputWindow& window,
                                            const std::vector<PredictionResponse>& candidates) {
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const PredictionResponse& c : candidates)
        scores.push_back(reward_score(reward, window, c));
    return scores;
}

} // namespace sep
