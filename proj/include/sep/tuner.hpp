#pragma once

#include "sep/core.hpp"
#include "sep/errors.hpp"
#include "sep/hash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Desk-scale fine-tuning stack: hashed features, a linear reward model, a
// softmax-over-candidates policy, and the three training steps (supervised
// tuning, pairwise reward training, PPO with a KL penalty against the
// supervised policy). Objectives are computed and differentiated exactly.

namespace sep {

inline constexpr std::size_t kHashSpace = std::size_t{1} << 18;

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

struct FeatureVector {
    std::map<std::size_t, double> values;

    void add(std::size_t index, double amount) {
        if (index >= kHashSpace) throw std::invalid_argument("feature index out of hash space");
        values[index] += amount;
    }

    double dot(const std::vector<double>& dense) const {
        double acc = 0.0;
        for (const auto& [index, value] : values) acc += dense[index] * value;
        return acc;
    }

    bool empty() const { return values.empty(); }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Hashed unigram+bigram counts over the window's facts followed by the raw
// response text, one contiguous token stream.
inline FeatureVector featurize(const InputWindow& window, const PredictionResponse& response) {
    std::vector<std::string> stream;
    for (const FactSummary& summary : window.summaries())
        for (const std::string& fact : summary.facts) {
            std::vector<std::string> tokens = tokenize(fact);
            stream.insert(stream.end(), tokens.begin(), tokens.end());
        }
    std::vector<std::string> tokens = tokenize(response.raw);
    stream.insert(stream.end(), tokens.begin(), tokens.end());

    FeatureVector features;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        features.add(fnv1a64(stream[i]) % kHashSpace, 1.0);
        if (i + 1 < stream.size())
            features.add(fnv1a64(stream[i] + " " + stream[i + 1]) % kHashSpace, 1.0);
    }
    return features;
}

// ---------------------------------------------------------------------------
// Reward model
// ---------------------------------------------------------------------------

struct RewardModel {
    std::vector<double> weights = std::vector<double>(kHashSpace, 0.0);
    double bias = 0.0;
};

inline double reward_score(const RewardModel& model, const FeatureVector& features) {
    return features.dot(model.weights) + model.bias;
}

inline double reward_score(const RewardModel& model, const InputWindow& window,
                           const PredictionResponse& response) {
    return reward_score(model, featurize(window, response));
}

// log(1 + e^x) without overflow.
inline double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Pairwise cross-entropy: mean of -log sigmoid(score(winner) - score(loser)),
// evaluated as softplus(-delta). The bias cancels inside delta.
inline double reward_loss(const RewardModel& model, const std::vector<ComparisonPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("reward_loss needs at least one pair");
    double total = 0.0;
    for (const ComparisonPair& pair : pairs) {
        const double delta = reward_score(model, pair.window(), pair.winner()) -
                             reward_score(model, pair.window(), pair.loser());
        total += softplus(-delta);
    }
    return total / static_cast<double>(pairs.size());
}

// Gradient of reward_loss with respect to the weights, restricted to the
// touched indices (all other coordinates are exactly zero; the bias gradient
// is identically zero because delta is bias-free).
inline std::map<std::size_t, double> reward_loss_gradient(const RewardModel& model,
                                                          const std::vector<ComparisonPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("reward_loss needs at least one pair");
    std::map<std::size_t, double> grad;
    for (const ComparisonPair& pair : pairs) {
        const FeatureVector winner = featurize(pair.window(), pair.winner());
        const FeatureVector loser = featurize(pair.window(), pair.loser());
        const double delta = reward_score(model, winner) - reward_score(model, loser);
        const double coeff = sigmoid(delta) - 1.0;  // d softplus(-delta) / d delta
        for (const auto& [index, value] : winner.values) grad[index] += coeff * value;
        for (const auto& [index, value] : loser.values) grad[index] -= coeff * value;
    }
    for (auto& [index, value] : grad) value /= static_cast<double>(pairs.size());
    return grad;
}

inline double ranking_accuracy(const RewardModel& model, const std::vector<ComparisonPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("ranking_accuracy needs at least one pair");
    std::size_t correct = 0;
    for (const ComparisonPair& pair : pairs) {
        if (reward_score(model, pair.window(), pair.winner()) >
            reward_score(model, pair.window(), pair.loser()))
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
    int sft_epochs = 2;
    double sft_lr = 3e-4;
    int reward_epochs = 1;
    double reward_lr = 2e-4;
    int ppo_epochs = 4;
    double ppo_lr = 1.4e-5;
    int ppo_inner_steps = 4;
    double beta = 0.2;      // KL penalty strength; 0 disables the penalty
    double clip_eps = 0.2;  // PPO clipped-surrogate range
    std::uint64_t seed = 0;

    void validate() const {
        if (sft_epochs < 1 || reward_epochs < 1 || ppo_epochs < 1 || ppo_inner_steps < 1)
            throw std::invalid_argument("epoch counts must be >= 1");
        if (!(sft_lr > 0.0) || !(reward_lr > 0.0) || !(ppo_lr > 0.0))
            throw std::invalid_argument("learning rates must be positive");
        if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
        if (!(clip_eps > 0.0)) throw std::invalid_argument("clip_eps must be positive");
    }
};

// ---------------------------------------------------------------------------
// Reward training
// ---------------------------------------------------------------------------

struct RewardTrainResult {
    RewardModel model;
    std::vector<double> loss_trace;  // before training, then after each epoch
};

// Per-pair SGD on the pairwise cross-entropy, shuffled each epoch from the
// config seed.
inline RewardTrainResult train_reward(const std::vector<ComparisonPair>& pairs,
                                      const TrainConfig& config = {}) {
    config.validate();
    if (pairs.empty()) throw std::invalid_argument("train_reward needs at least one pair");

    RewardModel model;
    std::vector<double> trace = {reward_loss(model, pairs)};
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.reward_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (const std::size_t i : order) {
            const ComparisonPair& pair = pairs[i];
            const FeatureVector winner = featurize(pair.window(), pair.winner());
            const FeatureVector loser = featurize(pair.window(), pair.loser());
            const double delta = reward_score(model, winner) - reward_score(model, loser);
            const double coeff = sigmoid(delta) - 1.0;
            for (const auto& [index, value] : winner.values)
                model.weights[index] -= config.reward_lr * coeff * value;
            for (const auto& [index, value] : loser.values)
                model.weights[index] += config.reward_lr * coeff * value;
        }
        const double loss = reward_loss(model, pairs);
        if (!std::isfinite(loss))
            throw DivergenceError("reward training diverged at epoch " + std::to_string(epoch + 1) +
                                  ", loss trace ended " + std::to_string(trace.back()));
        trace.push_back(loss);
    }
    return RewardTrainResult{std::move(model), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

// Finite, non-empty, deterministic candidate set per window.
class CandidateGenerator {
  public:
    virtual ~CandidateGenerator() = default;
    virtual std::vector<PredictionResponse> candidates(const InputWindow& window) const = 0;
};

// The same candidates for every window.
class FixedCandidates final : public CandidateGenerator {
  public:
    explicit FixedCandidates(std::vector<PredictionResponse> candidates)
        : candidates_(std::move(candidates)) {}
    std::vector<PredictionResponse> candidates(const InputWindow&) const override {
        return candidates_;
    }

  private:
    std::vector<PredictionResponse> candidates_;
};

// Candidates harvested per (ticker, target day), deduplicated by raw text.
class DatasetCandidates final : public CandidateGenerator {
  public:
    static std::string key(const InputWindow& window) {
        return window.stock().ticker + "@" + window.target_day().iso();
    }

    void add(const InputWindow& window, const PredictionResponse& response) {
        auto& list = table_[key(window)];
        for (const PredictionResponse& existing : list)
            if (existing.raw == response.raw) return;
        list.push_back(response);
    }

    std::vector<PredictionResponse> candidates(const InputWindow& window) const override {
        const auto it = table_.find(key(window));
        return it == table_.end() ? std::vector<PredictionResponse>{} : it->second;
    }

  private:
    std::map<std::string, std::vector<PredictionResponse>> table_;
};

// Softmax over the candidate set's feature scores, scaled by temperature.
struct Policy {
    std::vector<double> weights = std::vector<double>(kHashSpace, 0.0);
    std::shared_ptr<const CandidateGenerator> generator;
    double temperature = 1.0;
};

struct CandidateScore {
    PredictionResponse response;
    double logprob = 0.0;
};

inline std::vector<CandidateScore> policy_scores(const Policy& policy,
                                                 const InputWindow& window) {
    if (!policy.generator) throw std::invalid_argument("policy has no candidate generator");
    if (!(policy.temperature > 0.0))
        throw std::invalid_argument("policy temperature must be positive");
    const std::vector<PredictionResponse> candidates = policy.generator->candidates(window);
    if (candidates.empty())
        throw EmptyCandidateError("no candidates for " + window.stock().ticker + " on " +
                                  window.target_day().iso());

    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const PredictionResponse& c : candidates)
        scores.push_back(featurize(window, c).dot(policy.weights) / policy.temperature);

    const double peak = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (const double s : scores) sum += std::exp(s - peak);
    const double lse = peak + std::log(sum);

    std::vector<CandidateScore> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        out.push_back(CandidateScore{candidates[i], scores[i] - lse});
    return out;
}

inline double policy_logprob(const Policy& policy, const InputWindow& window,
                             const PredictionResponse& response) {
    for (const CandidateScore& scored : policy_scores(policy, window))
        if (scored.response.raw == response.raw) return scored.logprob;
    throw CandidateCoverageError("response is not a candidate for " + window.stock().ticker +
                                 " on " + window.target_day().iso());
}

// d log p(response | window) / d weights, sparse. Also the SFT ascent
// direction: observed features minus the probability-weighted expectation.
inline std::map<std::size_t, double> policy_logprob_gradient(const Policy& policy,
                                                             const InputWindow& window,
                                                             const PredictionResponse& response) {
    const std::vector<CandidateScore> scored = policy_scores(policy, window);
    const PredictionResponse* found = nullptr;
    for (const CandidateScore& s : scored)
        if (s.response.raw == response.raw) found = &s.response;
    if (!found)
        throw CandidateCoverageError("response is not a candidate for " + window.stock().ticker +
                                     " on " + window.target_day().iso());

    std::map<std::size_t, double> grad;
    const FeatureVector observed = featurize(window, response);
    for (const auto& [index, value] : observed.values)
        grad[index] += value / policy.temperature;
    for (const CandidateScore& s : scored) {
        const double prob = std::exp(s.logprob);
        const FeatureVector features = featurize(window, s.response);
        for (const auto& [index, value] : features.values)
            grad[index] -= prob * value / policy.temperature;
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Supervised fine-tuning
// ---------------------------------------------------------------------------

struct SftTrainResult {
    Policy policy;
    std::vector<double> loglik_trace;  // before training, then after each epoch
};

inline double mean_loglik(const Policy& policy, const std::vector<DemonstrationSample>& demos) {
    double total = 0.0;
    for (const DemonstrationSample& demo : demos)
        total += policy_logprob(policy, demo.window(), demo.response());
    return total / static_cast<double>(demos.size());
}

// Gradient ascent on the mean demo log-likelihood, per-sample SGD with a
// seeded shuffle each epoch.
inline SftTrainResult sft_train(const std::vector<DemonstrationSample>& demos,
                                std::shared_ptr<const CandidateGenerator> generator,
                                const TrainConfig& config = {}) {
    config.validate();
    if (demos.empty()) throw std::invalid_argument("sft_train needs at least one demonstration");
    if (!generator) throw std::invalid_argument("sft_train needs a candidate generator");

    Policy policy;
    policy.generator = std::move(generator);
    std::vector<double> trace = {mean_loglik(policy, demos)};  // also checks coverage

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(demos.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < config.sft_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (const std::size_t i : order) {
            const std::map<std::size_t, double> grad =
                policy_logprob_gradient(policy, demos[i].window(), demos[i].response());
            for (const auto& [index, value] : grad)
                policy.weights[index] += config.sft_lr * value;
        }
        const double loglik = mean_loglik(policy, demos);
        if (!std::isfinite(loglik))
            throw DivergenceError("supervised tuning diverged at epoch " +
                                  std::to_string(epoch + 1));
        trace.push_back(loglik);
    }
    return SftTrainResult{std::move(policy), std::move(trace)};
}

// ---------------------------------------------------------------------------
// PPO
// ---------------------------------------------------------------------------

// Per-sample value of the Eq. 6 loss: -(reward - beta * log-ratio vs the
// supervised policy). The batch objective is the mean of these.
inline double ppo_objective(const Policy& policy, const Policy& sft, const RewardModel& reward,
                            const InputWindow& window, const PredictionResponse& sampled,
                            double beta) {
    const double r = reward_score(reward, window, sampled);
    const double log_ratio =
        policy_logprob(policy, window, sampled) - policy_logprob(sft, window, sampled);
    return -(r - beta * log_ratio);
}

// Gradient of ppo_objective with respect to the policy weights (sparse).
inline std::map<std::size_t, double> ppo_objective_gradient(const Policy& policy,
                                                            const Policy& sft,
                                                            const InputWindow& window,
                                                            const PredictionResponse& sampled,
                                                            double beta) {
    (void)sft;  // the SFT term is constant in the policy weights
    std::map<std::size_t, double> grad = policy_logprob_gradient(policy, window, sampled);
    for (auto& [index, value] : grad) value *= beta;
    return grad;
}

// Exact expected reward of the policy over a window set.
inline double expected_reward(const Policy& policy, const RewardModel& reward,
                              const std::vector<InputWindow>& windows) {
    if (windows.empty()) throw std::invalid_argument("expected_reward needs windows");
    double total = 0.0;
    for (const InputWindow& window : windows) {
        for (const CandidateScore& scored : policy_scores(policy, window))
            total += std::exp(scored.logprob) * reward_score(reward, window, scored.response);
    }
    return total / static_cast<double>(windows.size());
}

struct PpoTrainResult {
    Policy policy;
    std::vector<double> reward_trace;  // expected reward before, then after each epoch
};

// One pass per epoch: sample a response per window from the epoch-start
// policy, shape the reward with the KL penalty against the supervised policy,
// whiten it into advantages, then take clipped-surrogate gradient steps.
inline PpoTrainResult train_ppo(const Policy& init, const std::vector<InputWindow>& dataset,
                                const RewardModel& reward, const TrainConfig& config = {}) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("train_ppo needs at least one window");
    if (!init.generator) throw std::invalid_argument("policy has no candidate generator");

    const Policy& sft = init;
    Policy policy = init;
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> trace = {expected_reward(policy, reward, dataset)};

    struct Sample {
        std::size_t window_index;
        std::size_t candidate_index;
        double logp_old = 0.0;
        double advantage = 0.0;
    };

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.ppo_epochs; ++epoch) {
        const Policy old = policy;
        std::shuffle(order.begin(), order.end(), rng);

        // Candidate features per window, computed once per epoch.
        std::vector<std::vector<FeatureVector>> features(dataset.size());
        std::vector<std::vector<PredictionResponse>> candidates(dataset.size());

        std::vector<Sample> batch;
        std::vector<double> shaped;
        batch.reserve(dataset.size());
        for (const std::size_t w : order) {
            const std::vector<CandidateScore> old_scores = policy_scores(old, dataset[w]);
            if (candidates[w].empty()) {
                for (const CandidateScore& s : old_scores) {
                    candidates[w].push_back(s.response);
                    features[w].push_back(featurize(dataset[w], s.response));
                }
            }
            const double u = uniform(rng);
            double acc = 0.0;
            std::size_t picked = old_scores.size() - 1;
            for (std::size_t c = 0; c < old_scores.size(); ++c) {
                acc += std::exp(old_scores[c].logprob);
                if (u < acc) {
                    picked = c;
                    break;
                }
            }
            const double r = reward_score(reward, features[w][picked]);
            const double logp_sft = policy_logprob(sft, dataset[w], candidates[w][picked]);
            const double shaped_reward =
                r - config.beta * (old_scores[picked].logprob - logp_sft);
            batch.push_back(Sample{w, picked, old_scores[picked].logprob, 0.0});
            shaped.push_back(shaped_reward);
        }

        // Whiten the shaped rewards into advantages.
        const double mean = std::accumulate(shaped.begin(), shaped.end(), 0.0) /
                            static_cast<double>(shaped.size());
        double var = 0.0;
        for (const double r : shaped) var += (r - mean) * (r - mean);
        const double stddev = std::sqrt(var / static_cast<double>(shaped.size()));
        for (std::size_t i = 0; i < batch.size(); ++i)
            batch[i].advantage = (shaped[i] - mean) / (stddev + 1e-8);

        for (int step = 0; step < config.ppo_inner_steps; ++step) {
            std::map<std::size_t, double> grad;
            for (const Sample& sample : batch) {
                const std::vector<FeatureVector>& feats = features[sample.window_index];
                std::vector<double> scores(feats.size());
                for (std::size_t c = 0; c < feats.size(); ++c)
                    scores[c] = feats[c].dot(policy.weights) / policy.temperature;
                const double peak = *std::max_element(scores.begin(), scores.end());
                double sum = 0.0;
                for (const double s : scores) sum += std::exp(s - peak);
                const double lse = peak + std::log(sum);

                const double logp = scores[sample.candidate_index] - lse;
                const double ratio = std::exp(logp - sample.logp_old);
                const double clipped =
                    std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
                // Gradient of -min(ratio*A, clipped*A): zero when the clipped
                // branch is the active minimum.
                if (ratio * sample.advantage > clipped * sample.advantage) continue;
                const double coeff = -sample.advantage * ratio /
                                     (static_cast<double>(batch.size()) * policy.temperature);
                for (const auto& [index, value] : feats[sample.candidate_index].values)
                    grad[index] += coeff * value;
                for (std::size_t c = 0; c < feats.size(); ++c) {
                    const double prob = std::exp(scores[c] - lse);
                    for (const auto& [index, value] : feats[c].values)
                        grad[index] -= coeff * prob * value;
                }
            }
            for (const auto& [index, value] : grad) {
                policy.weights[index] -= config.ppo_lr * value;
                if (!std::isfinite(policy.weights[index]))
                    throw DivergenceError("policy weights diverged at epoch " +
                                          std::to_string(epoch + 1));
            }
        }

        const double mean_reward = expected_reward(policy, reward, dataset);
        if (!std::isfinite(mean_reward))
            throw DivergenceError("expected reward diverged at epoch " +
                                  std::to_string(epoch + 1));
        trace.push_back(mean_reward);
    }
    return PpoTrainResult{std::move(policy), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

// Central finite differences against an analytic gradient, coordinate-wise,
// optionally on a seeded random subset of coordinates. Returns the max
// relative error.
inline double grad_check(const std::function<double(const std::vector<double>&)>& objective,
                         const std::vector<double>& analytic, std::vector<double> params,
                         double epsilon, std::size_t sample_count = 0, std::uint64_t seed = 0) {
    if (analytic.size() != params.size())
        throw std::invalid_argument("analytic gradient and params must have equal size");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");

    std::vector<std::size_t> coords(params.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (sample_count > 0 && sample_count < coords.size()) {
        std::mt19937_64 rng(seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(sample_count);
    }

    double worst = 0.0;
    for (const std::size_t i : coords) {
        const double saved = params[i];
        params[i] = saved + epsilon;
        const double up = objective(params);
        params[i] = saved - epsilon;
        const double down = objective(params);
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1.0});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------
//
// Layout: "SEPM", u32 version (1), u32 kind (1 reward, 2 policy), u64 hash
// space, f64 bias (reward) or temperature (policy), then hash-space f64
// weights. All integers and floats little-endian.

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 4);
}

inline void put_u64(std::ofstream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

inline void put_f64(std::ofstream& out, double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline std::uint32_t get_u32(std::ifstream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::ifstream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

inline double get_f64(std::ifstream& in) {
    const std::uint64_t bits = get_u64(in);
    double v = 0.0;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kKindReward = 1;
inline constexpr std::uint32_t kKindPolicy = 2;

inline void save_model_file(const std::filesystem::path& path, std::uint32_t kind,
                            double scalar, const std::vector<double>& weights) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out.write("SEPM", 4);
    put_u32(out, kFormatVersion);
    put_u32(out, kind);
    put_u64(out, weights.size());
    put_f64(out, scalar);
    for (const double w : weights) put_f64(out, w);
    if (!out) throw DataError("failed writing " + path.string());
}

struct ModelFile {
    std::uint32_t kind = 0;
    double scalar = 0.0;
    std::vector<double> weights;
};

inline ModelFile load_model_file(const std::filesystem::path& path, std::uint32_t expected_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::string_view(magic, 4) != "SEPM")
        throw DataError(path.string() + " is not a model file (bad magic)");
    const std::uint32_t version = get_u32(in);
    if (version != kFormatVersion)
        throw DataError(path.string() + " has unsupported format version " +
                        std::to_string(version));
    ModelFile file;
    file.kind = get_u32(in);
    if (file.kind != expected_kind)
        throw DataError(path.string() + " holds model kind " + std::to_string(file.kind) +
                        ", expected " + std::to_string(expected_kind));
    const std::uint64_t space = get_u64(in);
    if (space != kHashSpace)
        throw DataError(path.string() + " was built for hash space " + std::to_string(space));
    file.scalar = get_f64(in);
    file.weights.resize(space);
    for (std::uint64_t i = 0; i < space; ++i) file.weights[i] = get_f64(in);
    if (!in) throw DataError(path.string() + " is truncated");
    return file;
}

} // namespace detail

inline void save_reward_model(const RewardModel& model, const std::filesystem::path& path) {
    detail::save_model_file(path, detail::kKindReward, model.bias, model.weights);
}

inline RewardModel load_reward_model(const std::filesystem::path& path) {
    detail::ModelFile file = detail::load_model_file(path, detail::kKindReward);
    RewardModel model;
    model.weights = std::move(file.weights);
    model.bias = file.scalar;
    return model;
}

inline void save_policy(const Policy& policy, const std::filesystem::path& path) {
    detail::save_model_file(path, detail::kKindPolicy, policy.temperature, policy.weights);
}

// The candidate generator is not serialized; the caller supplies one.
inline Policy load_policy(const std::filesystem::path& path,
                          std::shared_ptr<const CandidateGenerator> generator) {
    detail::ModelFile file = detail::load_model_file(path, detail::kKindPolicy);
    Policy policy;
    policy.weights = std::move(file.weights);
    policy.temperature = file.scalar;
    policy.generator = std::move(generator);
    return policy;
}

} // namespace sep
