#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "zsmt/model/vocab.hpp"

namespace zsmt {

/// Detected-language value for "no language holds the majority".
inline constexpr int kOffLanguage = 0;

/// Exact language identification from disjoint token ranges: the language owning
/// more than `threshold` of the content tokens wins; ties and empty input are OFF.
inline int langid_oracle(const Vocab& vocab, std::span<const int> tokens, double threshold = 0.5) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(vocab.num_languages) + 1, 0);
    std::size_t content = 0;
    for (int t : tokens) {
        const int lang = vocab.language_of(t);
        if (lang == 0) continue;
        ++counts[static_cast<std::size_t>(lang)];
        ++content;
    }
    if (content == 0) return kOffLanguage;
    for (int j = 1; j <= vocab.num_languages; ++j) {
        if (static_cast<double>(counts[static_cast<std::size_t>(j)]) > threshold * static_cast<double>(content)) return j;
    }
    return kOffLanguage;
}

struct TokenCounts {
    std::size_t content = 0;
    std::size_t foreign = 0;
};

inline TokenCounts count_foreign_tokens(const Vocab& vocab, std::span<const int> tokens, int target_lang) {
    TokenCounts c;
    for (int t : tokens) {
        const int lang = vocab.language_of(t);
        if (lang == 0) continue;
        ++c.content;
        if (lang != target_lang) ++c.foreign;
    }
    return c;
}

/// Fraction of hypotheses whose detected language differs from `target_lang`.
inline double off_target_rate(const Vocab& vocab, const std::vector<std::vector<int>>& hyps, int target_lang,
                              double threshold = 0.5) {
    if (hyps.empty()) throw std::invalid_argument("off_target_rate: no hypotheses");
    std::size_t off = 0;
    for (const auto& h : hyps) off += langid_oracle(vocab, h, threshold) != target_lang;
    return static_cast<double>(off) / static_cast<double>(hyps.size());
}

/// Fraction of content tokens outside `target_lang`'s range; 0 when there is no content at all.
inline double token_off_target_rate(const Vocab& vocab, const std::vector<std::vector<int>>& hyps, int target_lang) {
    if (hyps.empty()) throw std::invalid_argument("token_off_target_rate: no hypotheses");
    TokenCounts total;
    for (const auto& h : hyps) {
        const auto c = count_foreign_tokens(vocab, h, target_lang);
        total.content += c.content;
        total.foreign += c.foreign;
    }
    return total.content == 0 ? 0.0 : static_cast<double>(total.foreign) / static_cast<double>(total.content);
}

}  // namespace zsmt
