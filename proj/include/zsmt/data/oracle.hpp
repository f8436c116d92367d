#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsmt/data/corpus.hpp"
#include "zsmt/util/rng.hpp"

namespace zsmt {

/// Held-out parallel data grouped by target language.
struct OracleSet {
    std::map<int, std::vector<ParallelPair>> by_target;
    std::set<Direction> excluded;
    double split_fraction = 0.8;

    const std::vector<ParallelPair>& at(int lang) const {
        auto it = by_target.find(lang);
        if (it == by_target.end() || it->second.empty()) {
            throw std::invalid_argument("oracle set has no pairs for target language " + std::to_string(lang));
        }
        return it->second;
    }

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& [_, v] : by_target) n += v.size();
        return n;
    }

    /// All oracle pairs concatenated in target-language order.
    std::vector<ParallelPair> concatenated() const {
        std::vector<ParallelPair> out;
        for (const auto& [_, v] : by_target) out.insert(out.end(), v.begin(), v.end());
        return out;
    }
};

struct OracleSplit {
    OracleSet oracle;
    Corpus checkpoint_dev;
};

/// Per direction, a seeded shuffle sends round(n * split_fraction) pairs to the
/// oracle and the rest to checkpoint selection. Every direction uses the same
/// permutation, so multi-way sentences land on the same side everywhere.
/// Excluded directions contribute nothing to the oracle.
inline OracleSplit build_oracle_set(const Corpus& dev, double split_fraction, const std::set<Direction>& excluded,
                                    std::uint64_t seed) {
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
        throw std::invalid_argument("build_oracle_set: split_fraction must lie in (0, 1)");
    }
    OracleSplit out;
    out.oracle.excluded = excluded;
    out.oracle.split_fraction = split_fraction;
    std::set<int> targets;
    for (const auto& [d, pairs] : dev.directions) {
        targets.insert(d.tgt);
        std::vector<std::size_t> order(pairs.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(seed, pairs.size()));
        rng.shuffle(order.begin(), order.end());
        const auto n_oracle = static_cast<std::size_t>(std::llround(static_cast<double>(pairs.size()) * split_fraction));
        auto& ckpt = out.checkpoint_dev.directions[d];
        const bool drop = excluded.count(d) != 0;
        for (std::size_t i = 0; i < order.size(); ++i) {
            const ParallelPair& p = pairs[order[i]];
            if (i >= n_oracle) {
                ckpt.push_back(p);
            } else if (!drop) {
                out.oracle.by_target[d.tgt].push_back(p);
            }
        }
    }
    for (int t : targets) {
        if (out.oracle.by_target[t].empty()) {
            throw std::invalid_argument("build_oracle_set: target language " + std::to_string(t) +
                                        " has no oracle pairs after exclusions");
        }
    }
    return out;
}

}  // namespace zsmt
