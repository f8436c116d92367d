#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

namespace zsmt {

inline constexpr int kBleuOrder = 4;

/// Sufficient statistics of corpus BLEU.
struct BleuStats {
    std::array<std::size_t, kBleuOrder> matches{};
    std::array<std::size_t, kBleuOrder> totals{};
    std::size_t hyp_len = 0;
    std::size_t ref_len = 0;

    BleuStats& operator+=(const BleuStats& o) {
        for (int n = 0; n < kBleuOrder; ++n) {
            matches[n] += o.matches[n];
            totals[n] += o.totals[n];
        }
        hyp_len += o.hyp_len;
        ref_len += o.ref_len;
        return *this;
    }
};

inline BleuStats sentence_stats(const std::vector<int>& hyp, const std::vector<int>& ref) {
    BleuStats s;
    s.hyp_len = hyp.size();
    s.ref_len = ref.size();
    for (int n = 1; n <= kBleuOrder; ++n) {
        const auto un = static_cast<std::size_t>(n);
        std::map<std::vector<int>, std::size_t> ref_counts;
        for (std::size_t i = 0; i + un <= ref.size(); ++i) ++ref_counts[{ref.begin() + i, ref.begin() + i + un}];
        std::map<std::vector<int>, std::size_t> hyp_counts;
        for (std::size_t i = 0; i + un <= hyp.size(); ++i) ++hyp_counts[{hyp.begin() + i, hyp.begin() + i + un}];
        for (const auto& [gram, c] : hyp_counts) {
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) s.matches[n - 1] += std::min(c, it->second);
        }
        s.totals[n - 1] = hyp.size() >= un ? hyp.size() - un + 1 : 0;
    }
    return s;
}

/// Corpus BLEU in [0, 100] with brevity penalty and exponential smoothing:
/// the k-th order with zero matches gets precision 1 / (2^k * total).
inline double bleu_from_stats(const BleuStats& s) {
    double log_sum = 0.0;
    double smooth = 1.0;
    for (int n = 0; n < kBleuOrder; ++n) {
        if (s.totals[n] == 0) return 0.0;
        double p;
        if (s.matches[n] == 0) {
            smooth *= 2.0;
            p = 1.0 / (smooth * static_cast<double>(s.totals[n]));
        } else {
            p = static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]);
        }
        log_sum += std::log(p);
    }
    double bp = 1.0;
    if (s.hyp_len < s.ref_len) bp = std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.hyp_len));
    return 100.0 * bp * std::exp(log_sum / kBleuOrder);
}

inline double corpus_bleu(const std::vector<std::vector<int>>& hyps, const std::vector<std::vector<int>>& refs) {
    if (hyps.empty()) throw std::invalid_argument("bleu: empty hypothesis list");
    if (hyps.size() != refs.size()) throw std::invalid_argument("bleu: hypothesis and reference counts differ");
    BleuStats total;
    for (std::size_t i = 0; i < hyps.size(); ++i) total += sentence_stats(hyps[i], refs[i]);
    return bleu_from_stats(total);
}

}  // namespace zsmt
