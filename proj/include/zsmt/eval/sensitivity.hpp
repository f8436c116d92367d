#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsmt/eval/langid.hpp"
#include "zsmt/util/rng.hpp"

namespace zsmt {

struct SensitivityReference {
    std::vector<int> tokens;
    int lang = 0;
};

struct SensitivityPoint {
    double p = 0.0;
    double rate = 0.0;
};

/// Replaces each content token, with probability p, by a uniform token from one
/// of the other languages, then measures the sentence-level off-target rate.
/// `trials` sentences are sampled per grid point, cycling through `refs`.
inline std::vector<SensitivityPoint> sensitivity_sweep(const Vocab& vocab, const std::vector<SensitivityReference>& refs,
                                                       const std::vector<double>& p_grid, std::size_t trials,
                                                       std::uint64_t seed, double threshold = 0.5) {
    if (refs.empty()) throw std::invalid_argument("sensitivity_sweep: no references");
    if (trials == 0) throw std::invalid_argument("sensitivity_sweep: trials must be positive");
    std::vector<SensitivityPoint> out;
    for (std::size_t gi = 0; gi < p_grid.size(); ++gi) {
        const double p = p_grid[gi];
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sensitivity_sweep: p outside [0, 1]");
        Rng rng(derive_seed(seed, gi));
        std::size_t off = 0;
        std::vector<int> noisy;
        for (std::size_t t = 0; t < trials; ++t) {
            const auto& ref = refs[t % refs.size()];
            noisy = ref.tokens;
            for (auto& tok : noisy) {
                if (!vocab.is_content(tok) || rng.uniform01() >= p) continue;
                int other = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab.num_languages - 1)));
                if (other >= vocab.language_of(tok)) ++other;
                tok = vocab.lo(other) + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab.concepts)));
            }
            off += langid_oracle(vocab, noisy, threshold) != ref.lang;
        }
        out.push_back({p, static_cast<double>(off) / static_cast<double>(trials)});
    }
    return out;
}

}  // namespace zsmt
