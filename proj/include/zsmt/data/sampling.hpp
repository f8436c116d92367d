#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "zsmt/data/corpus.hpp"
#include "zsmt/util/rng.hpp"

namespace zsmt {

/// p_d proportional to size_d^(1/tau).
inline std::vector<double> temperature_sample_distribution(std::span<const double> sizes, double tau) {
    if (sizes.empty()) throw std::invalid_argument("temperature sampling: no directions");
    if (!(tau >= 1.0)) throw std::invalid_argument("temperature sampling: tau must be >= 1");
    std::vector<double> p(sizes.size());
    const double mx = *std::max_element(sizes.begin(), sizes.end());
    double z = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!(sizes[i] > 0.0)) throw std::invalid_argument("temperature sampling: sizes must be positive");
        // Normalise by the largest size first so huge corpora do not overflow.
        z += p[i] = std::pow(sizes[i] / mx, 1.0 / tau);
    }
    for (auto& x : p) x /= z;
    return p;
}

/// Target-language groups for one training step.
using BatchGroups = std::map<int, std::vector<const ParallelPair*>>;

/// Online sampler: each draw picks a direction by temperature, then a pair
/// uniformly within it, until the step's target-token budget is reached.
class BatchStream {
   public:
    BatchStream(const Corpus& corpus, double tau, std::size_t batch_tokens, std::uint64_t seed)
        : corpus_(&corpus), batch_tokens_(batch_tokens), rng_(seed) {
        if (corpus.directions.empty()) throw std::invalid_argument("BatchStream: empty corpus");
        if (batch_tokens == 0) throw std::invalid_argument("BatchStream: batch_tokens must be positive");
        std::vector<double> sizes;
        for (const auto& [d, pairs] : corpus.directions) {
            if (pairs.empty()) throw std::invalid_argument("BatchStream: direction " + d.name() + " is empty");
            directions_.push_back(d);
            pools_.push_back(&pairs);
            sizes.push_back(static_cast<double>(pairs.size()));
        }
        probs_ = temperature_sample_distribution(sizes, tau);
        cdf_.resize(probs_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < probs_.size(); ++i) cdf_[i] = acc += probs_[i];
        cdf_.back() = 1.0;
    }

    const std::vector<Direction>& directions() const { return directions_; }
    const std::vector<double>& probabilities() const { return probs_; }

    std::size_t sample_direction() {
        const double u = rng_.uniform01();
        return static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    }

    const ParallelPair* sample_pair() {
        const auto& pool = *pools_[sample_direction()];
        return &pool[rng_.below(pool.size())];
    }

    BatchGroups next() {
        BatchGroups groups;
        std::size_t tokens = 0;
        while (tokens < batch_tokens_) {
            const ParallelPair* p = sample_pair();
            groups[p->tgt_lang].push_back(p);
            tokens += p->tgt.size() + 1;
        }
        return groups;
    }

   private:
    const Corpus* corpus_;
    std::size_t batch_tokens_;
    Rng rng_;
    std::vector<Direction> directions_;
    std::vector<const std::vector<ParallelPair>*> pools_;
    std::vector<double> probs_;
    std::vector<double> cdf_;
};

/// Splits `pairs` into consecutive chunks of at most `max_tokens` target tokens.
inline std::vector<std::vector<const ParallelPair*>> chunk_by_tokens(std::span<const ParallelPair* const> pairs,
                                                                     std::size_t max_tokens) {
    std::vector<std::vector<const ParallelPair*>> out;
    std::size_t tokens = 0;
    for (const ParallelPair* p : pairs) {
        if (out.empty() || tokens >= max_tokens) {
            out.emplace_back();
            tokens = 0;
        }
        out.back().push_back(p);
        tokens += p->tgt.size() + 1;
    }
    return out;
}

}  // namespace zsmt
