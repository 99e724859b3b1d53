#pragma once

#include "sep/core.hpp"
#include "sep/errors.hpp"
#include "sep/hash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

// Daily corpus reduction: embed tweets, project to a low dimension, cluster by
// density, rank terms per cluster with class-based TF-IDF, keep one
// representative tweet per cluster.

namespace sep {

using Embedding = std::vector<double>;

// ---------------------------------------------------------------------------
// Embedding providers
// ---------------------------------------------------------------------------

class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;
    // One vector of length dim() per input text, deterministic for a fixed
    // input and seed. Implementations must be safe for concurrent calls or
    // document single-flight.
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) const = 0;
};

// Feature-hashing of token unigrams and bigrams with signed buckets, then
// L2-normalized. Deterministic, offline, and safe for concurrent calls.
class HashingEmbedder final : public EmbeddingProvider {
  public:
    explicit HashingEmbedder(std::size_t dim = 64, std::uint64_t seed = 0)
        : dim_(dim), seed_(seed) {
        if (dim_ == 0) throw std::invalid_argument("embedding dim must be positive");
    }

    std::string name() const override {
        return "hashing-ngram/" + std::to_string(dim_) + "#" + std::to_string(seed_);
    }

    std::size_t dim() const override { return dim_; }

    std::vector<Embedding> embed(const std::vector<std::string>& texts) const override {
        std::vector<Embedding> out;
        out.reserve(texts.size());
        for (const std::string& text : texts) {
            Embedding v(dim_, 0.0);
            const std::vector<std::string> tokens = tokenize(text);
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                bump(v, tokens[i]);
                if (i + 1 < tokens.size()) bump(v, tokens[i] + " " + tokens[i + 1]);
            }
            double norm = 0.0;
            for (double x : v) norm += x * x;
            if (norm > 0.0) {
                norm = std::sqrt(norm);
                for (double& x : v) x /= norm;
            }
            out.push_back(std::move(v));
        }
        return out;
    }

  private:
    void bump(Embedding& v, const std::string& feature) const {
        const std::uint64_t h = fnv1a64(feature, seed_);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[h % dim_] += sign;
    }

    std::size_t dim_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Dimensionality reduction
// ---------------------------------------------------------------------------

// Seeded random linear projection (Gaussian entries, 1/sqrt(target_dim)
// scaling). target_dim == input dim returns the input unchanged.
inline std::vector<Embedding> reduce_dims(const std::vector<Embedding>& vectors,
                                          std::size_t target_dim, std::uint64_t seed) {
    if (target_dim == 0) throw std::invalid_argument("target_dim must be positive");
    if (vectors.empty()) return {};
    const std::size_t input_dim = vectors.front().size();
    for (const Embedding& v : vectors) {
        if (v.size() != input_dim)
            throw DimensionError("vectors must share one dimension");
    }
    if (target_dim > input_dim)
        throw DimensionError("target_dim " + std::to_string(target_dim) +
                             " exceeds input dim " + std::to_string(input_dim));
    if (target_dim == input_dim) return vectors;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> projection(target_dim, std::vector<double>(input_dim));
    for (auto& row : projection)
        for (double& cell : row) cell = gauss(rng);

    const double scale = 1.0 / std::sqrt(static_cast<double>(target_dim));
    std::vector<Embedding> out;
    out.reserve(vectors.size());
    for (const Embedding& v : vectors) {
        Embedding reduced(target_dim, 0.0);
        for (std::size_t r = 0; r < target_dim; ++r) {
            double acc = 0.0;
            for (std::size_t j = 0; j < input_dim; ++j) acc += projection[r][j] * v[j];
            reduced[r] = acc * scale;
        }
        out.push_back(std::move(reduced));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Density clustering
// ---------------------------------------------------------------------------

class ClusterAssignment {
  public:
    ClusterAssignment() = default;
    ClusterAssignment(std::vector<int> labels, std::size_t min_cluster_size)
        : labels_(std::move(labels)), min_cluster_size_(min_cluster_size) {
        if (min_cluster_size_ < 2)
            throw std::invalid_argument("min_cluster_size must be >= 2");
        std::map<int, std::size_t> sizes;
        int next_expected = 0;
        for (int label : labels_) {
            if (label < -1) throw std::invalid_argument("labels must be >= -1");
            if (label == -1) continue;
            if (sizes.find(label) == sizes.end()) {
                if (label != next_expected)
                    throw std::invalid_argument("cluster ids must be 0..k-1 by first appearance");
                ++next_expected;
            }
            ++sizes[label];
        }
        for (const auto& [label, size] : sizes) {
            if (size < min_cluster_size_)
                throw std::invalid_argument("cluster " + std::to_string(label) +
                                            " smaller than min_cluster_size");
        }
        cluster_count_ = sizes.size();
    }

    const std::vector<int>& labels() const { return labels_; }
    std::size_t cluster_count() const { return cluster_count_; }
    std::size_t min_cluster_size() const { return min_cluster_size_; }
    std::size_t noise_count() const {
        return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), -1));
    }

  private:
    std::vector<int> labels_;
    std::size_t cluster_count_ = 0;
    std::size_t min_cluster_size_ = 2;
};

inline double euclidean(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size()) throw DimensionError("points must share one dimension");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

// Quantile of the C(n,2) pairwise distances at index floor(q * (count - 1)) of
// the sorted list. Needs at least two points.
inline double pairwise_distance_quantile(const std::vector<Embedding>& points, double q) {
    if (points.size() < 2)
        throw std::invalid_argument("need at least two points for pairwise distances");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile must lie in [0, 1]");
    std::vector<double> dists;
    dists.reserve(points.size() * (points.size() - 1) / 2);
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            dists.push_back(euclidean(points[i], points[j]));
    std::sort(dists.begin(), dists.end());
    const auto idx = static_cast<std::size_t>(q * static_cast<double>(dists.size() - 1));
    return dists[idx];
}

// DBSCAN-style pass: a core point has >= min_cluster_size points (itself
// included) within eps; clusters grow from cores through density-reachable
// points, everything else is noise. Clusters that end up below
// min_cluster_size (possible when cores share border points) are demoted to
// noise so the assignment invariant always holds. Ids run 0..k-1 in order of
// first appearance.
inline ClusterAssignment cluster_density(const std::vector<Embedding>& points,
                                         std::size_t min_cluster_size, double eps) {
    if (min_cluster_size < 2) throw std::invalid_argument("min_cluster_size must be >= 2");
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    const std::size_t n = points.size();

    std::vector<std::vector<std::size_t>> neighbors(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (euclidean(points[i], points[j]) <= eps) {
                neighbors[i].push_back(j);
                neighbors[j].push_back(i);
            }
        }
    }
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) core[i] = neighbors[i].size() + 1 >= min_cluster_size;

    constexpr int kUndefined = -2;
    std::vector<int> labels(n, kUndefined);
    int next_id = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != kUndefined) continue;
        if (!core[i]) {
            labels[i] = -1;
            continue;
        }
        const int id = next_id++;
        labels[i] = id;
        std::vector<std::size_t> frontier = neighbors[i];
        for (std::size_t head = 0; head < frontier.size(); ++head) {
            const std::size_t q = frontier[head];
            if (labels[q] == -1) labels[q] = id;  // border point adopted
            if (labels[q] != kUndefined) continue;
            labels[q] = id;
            if (core[q]) frontier.insert(frontier.end(), neighbors[q].begin(), neighbors[q].end());
        }
    }

    std::map<int, std::size_t> sizes;
    for (int label : labels)
        if (label >= 0) ++sizes[label];
    std::map<int, int> remap;
    int compact = 0;
    for (int& label : labels) {
        if (label < 0) continue;
        if (sizes[label] < min_cluster_size) {
            label = -1;
            continue;
        }
        auto [it, inserted] = remap.emplace(label, compact);
        if (inserted) ++compact;
        label = it->second;
    }
    return ClusterAssignment(std::move(labels), min_cluster_size);
}

// ---------------------------------------------------------------------------
// Class-based TF-IDF
// ---------------------------------------------------------------------------

using TokenCounts = std::map<std::string, std::size_t>;

inline TokenCounts count_tokens(const std::vector<std::string>& tokens) {
    TokenCounts counts;
    for (const std::string& t : tokens) ++counts[t];
    return counts;
}

class TermWeights {
  public:
    TermWeights() = default;
    explicit TermWeights(std::map<int, std::map<std::string, double>> weights)
        : weights_(std::move(weights)) {
        for (const auto& [cluster, terms] : weights_) {
            for (const auto& [term, w] : terms) {
                if (!std::isfinite(w) || w < 0.0)
                    throw std::invalid_argument("term weights must be finite and non-negative");
                if (term.empty()) throw std::invalid_argument("terms must be non-empty");
            }
        }
    }

    double weight(int cluster, const std::string& term) const {
        const auto c = weights_.find(cluster);
        if (c == weights_.end()) return 0.0;
        const auto t = c->second.find(term);
        return t == c->second.end() ? 0.0 : t->second;
    }

    const std::map<int, std::map<std::string, double>>& by_cluster() const { return weights_; }

  private:
    std::map<int, std::map<std::string, double>> weights_;
};

// W(term, cluster) = tf * log(1 + A / f), with tf the term count inside the
// cluster, f the term count across all clusters, and A the mean token count
// per cluster (empty clusters still count toward the mean).
inline TermWeights ctfidf(const std::map<int, TokenCounts>& clusters) {
    if (clusters.empty()) throw std::invalid_argument("need at least one cluster");
    std::map<std::string, std::size_t> cross_class;
    std::size_t total = 0;
    for (const auto& [cluster, counts] : clusters) {
        for (const auto& [term, tf] : counts) {
            cross_class[term] += tf;
            total += tf;
        }
    }
    if (total == 0) throw std::invalid_argument("need at least one token");

    const double mean_tokens = static_cast<double>(total) / static_cast<double>(clusters.size());
    std::map<int, std::map<std::string, double>> weights;
    for (const auto& [cluster, counts] : clusters) {
        auto& out = weights[cluster];
        for (const auto& [term, tf] : counts) {
            if (tf == 0) continue;
            const double f = static_cast<double>(cross_class[term]);
            out[term] = static_cast<double>(tf) * std::log(1.0 + mean_tokens / f);
        }
    }
    return TermWeights(std::move(weights));
}

// ---------------------------------------------------------------------------
// Representative selection
// ---------------------------------------------------------------------------

struct ReduceParams {
    std::size_t target_dim = 15;
    std::size_t min_cluster_size = 10;
    double eps_percentile = 0.10;  // per-day eps = this quantile of pairwise distances
    std::uint64_t seed = 0;
};

struct ReducedDay {
    DailyCorpus corpus;            // representatives, ordered by cluster id
    std::vector<int> cluster_ids;  // parallel to corpus.tweets
    bool clustered = false;        // false when the day bypassed clustering
};

// Sum of the tweet's token occurrences' weights for its cluster.
inline double cluster_score(const TermWeights& weights, int cluster, const std::string& text) {
    double score = 0.0;
    for (const std::string& token : tokenize(text)) score += weights.weight(cluster, token);
    return score;
}

inline ReducedDay reduce_corpus(const DailyCorpus& corpus, const EmbeddingProvider& provider,
                                const ReduceParams& params) {
    if (params.min_cluster_size < 2)
        throw std::invalid_argument("min_cluster_size must be >= 2");
    const std::size_t n = corpus.size();
    if (n == 0) return ReducedDay{corpus, {}, false};

    // Small days would be all-noise under any density rule; pass them through
    // with one singleton group per tweet.
    if (n < params.min_cluster_size) {
        std::vector<int> ids(n);
        for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);
        return ReducedDay{corpus, std::move(ids), false};
    }

    std::vector<std::string> texts;
    texts.reserve(n);
    for (const RawTweet& t : corpus.tweets) texts.push_back(t.text);
    const std::vector<Embedding> raw = provider.embed(texts);
    if (raw.size() != n)
        throw ShapeError("embedding provider returned " + std::to_string(raw.size()) +
                         " vectors for " + std::to_string(n) + " texts");
    for (const Embedding& v : raw) {
        if (v.size() != provider.dim())
            throw ShapeError("embedding provider returned a vector of wrong dimension");
    }

    const std::vector<Embedding> points =
        provider.dim() > params.target_dim ? reduce_dims(raw, params.target_dim, params.seed)
                                           : raw;

    // Duplicate-heavy days can push the quantile to zero; floor it so points
    // at distance zero still cluster.
    const double eps =
        std::max(pairwise_distance_quantile(points, params.eps_percentile), 1e-12);
    const ClusterAssignment assignment = cluster_density(points, params.min_cluster_size, eps);

    std::map<int, TokenCounts> cluster_terms;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = assignment.labels()[i];
        if (label < 0) continue;
        TokenCounts& counts = cluster_terms[label];
        for (const std::string& token : tokenize(corpus.tweets[i].text)) ++counts[token];
    }

    std::size_t total_tokens = 0;
    for (const auto& [cluster, counts] : cluster_terms)
        for (const auto& [term, tf] : counts) total_tokens += tf;
    const TermWeights weights =
        total_tokens > 0 ? ctfidf(cluster_terms) : TermWeights{};

    std::vector<RawTweet> representatives;
    std::vector<int> ids;
    for (std::size_t c = 0; c < assignment.cluster_count(); ++c) {
        const int cluster = static_cast<int>(c);
        const RawTweet* best = nullptr;
        double best_score = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (assignment.labels()[i] != cluster) continue;
            const RawTweet& tweet = corpus.tweets[i];
            const double score = cluster_score(weights, cluster, tweet.text);
            const bool wins =
                best == nullptr || score > best_score ||
                (score == best_score &&
                 (tweet.shares > best->shares ||
                  (tweet.shares == best->shares && tweet.id < best->id)));
            if (wins) {
                best = &tweet;
                best_score = score;
            }
        }
        representatives.push_back(*best);
        ids.push_back(cluster);
    }
    return ReducedDay{DailyCorpus(corpus.stock, corpus.day, std::move(representatives)),
                      std::move(ids), true};
}

inline DailyCorpus representative_tweets(const DailyCorpus& corpus,
                                         const EmbeddingProvider& provider,
                                         const ReduceParams& params) {
    return reduce_corpus(corpus, provider, params).corpus;
}

} // namespace sep
