#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsmt/model/transformer.hpp"

namespace zsmt {

struct BeamConfig {
    int beam_size = 5;
    double length_penalty = 1.0;
    /// Decoder positions per hypothesis, eos included; 0 means the model's max_len.
    int max_len = 0;
    /// Sentences decoded together.
    std::size_t chunk = 256;

    bool operator==(const BeamConfig&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BeamConfig, beam_size, length_penalty, max_len, chunk)

struct Hypothesis {
    std::vector<int> tokens;  // without bos/eos
    double log_prob = 0.0;
    double score = 0.0;       // log_prob / length^penalty, length counting eos when finished
    bool finished = false;    // false: max_len reached without eos
};

inline double length_normalized(double log_prob, std::size_t length, double penalty) {
    return log_prob / std::pow(static_cast<double>(std::max<std::size_t>(length, 1)), penalty);
}

namespace detail {

struct LiveHyp {
    std::vector<int> tokens;
    double log_prob = 0.0;
};

struct Candidate {
    double log_prob;
    int token;
    std::size_t row;
};

}  // namespace detail

/// Batched beam search over tagged sources. Pad, bos and tag tokens are never
/// generated. Among each sentence's candidates (sorted by log-prob, then token
/// id, then parent row), eos candidates ranked below `beam_size` finish; the
/// search for a sentence ends once `beam_size` hypotheses have finished.
inline std::vector<Hypothesis> beam_search(const Model& model, const std::vector<std::vector<int>>& tagged_sources,
                                           const BeamConfig& cfg) {
    if (cfg.beam_size < 1) throw std::invalid_argument("beam_search: beam_size must be >= 1");
    const int model_max = model.config().max_len;
    const int max_len = cfg.max_len > 0 ? std::min(cfg.max_len, model_max) : model_max;
    const auto beam = static_cast<std::size_t>(cfg.beam_size);
    const Vocab vocab = model.vocab();
    const auto v_size = static_cast<std::size_t>(vocab.size());
    std::vector<std::uint8_t> allowed(v_size, 1);
    allowed[Vocab::pad] = allowed[Vocab::bos] = 0;
    for (int j = 1; j <= vocab.num_languages; ++j) allowed[static_cast<std::size_t>(vocab.tag(j))] = 0;

    NoGradScope no_grad;
    std::vector<Hypothesis> results(tagged_sources.size());
    const std::size_t chunk = std::max<std::size_t>(cfg.chunk, 1);
    for (std::size_t base = 0; base < tagged_sources.size(); base += chunk) {
        const std::size_t n = std::min(chunk, tagged_sources.size() - base);
        std::vector<std::vector<int>> sources(tagged_sources.begin() + static_cast<std::ptrdiff_t>(base),
                                              tagged_sources.begin() + static_cast<std::ptrdiff_t>(base + n));
        DecodeState state = model.start_decode(model.encode(make_source_batch(sources)));

        std::vector<std::vector<detail::LiveHyp>> live(n, std::vector<detail::LiveHyp>(1));
        std::vector<std::vector<Hypothesis>> finished(n);
        std::vector<std::uint8_t> done(n, 0);
        // Rows of the decode state, grouped by sentence in order.
        std::vector<std::size_t> row_sentence(n);
        for (std::size_t s = 0; s < n; ++s) row_sentence[s] = s;
        std::vector<int> feed(n, Vocab::bos);

        for (int step = 0; step < max_len && !feed.empty(); ++step) {
            const Tensor logp = model.decode_step(state, feed);
            const auto lp = logp.values();
            std::vector<std::size_t> keep_rows;
            std::vector<int> next_feed;
            std::vector<std::size_t> next_row_sentence;
            std::vector<std::vector<detail::LiveHyp>> next_live(n);
            std::size_t row = 0;
            std::vector<detail::Candidate> cands;
            while (row < row_sentence.size()) {
                const std::size_t s = row_sentence[row];
                const std::size_t first = row;
                while (row < row_sentence.size() && row_sentence[row] == s) ++row;
                cands.clear();
                for (std::size_t r = first; r < row; ++r) {
                    const double base_lp = live[s][r - first].log_prob;
                    for (std::size_t v = 0; v < v_size; ++v) {
                        if (allowed[v]) cands.push_back({base_lp + lp[r * v_size + v], static_cast<int>(v), r});
                    }
                }
                const std::size_t take = std::min(cands.size(), 2 * beam);
                std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(),
                                  [](const detail::Candidate& a, const detail::Candidate& b) {
                                      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                                      if (a.token != b.token) return a.token < b.token;
                                      return a.row < b.row;
                                  });
                for (std::size_t k = 0; k < take; ++k) {
                    const auto& c = cands[k];
                    const auto& parent = live[s][c.row - first];
                    if (c.token == Vocab::eos) {
                        if (k < beam) {
                            Hypothesis h;
                            h.tokens = parent.tokens;
                            h.log_prob = c.log_prob;
                            h.score = length_normalized(c.log_prob, parent.tokens.size() + 1, cfg.length_penalty);
                            h.finished = true;
                            finished[s].push_back(std::move(h));
                        }
                    } else if (next_live[s].size() < beam) {
                        detail::LiveHyp h{parent.tokens, c.log_prob};
                        h.tokens.push_back(c.token);
                        next_live[s].push_back(std::move(h));
                        keep_rows.push_back(c.row);
                        next_feed.push_back(c.token);
                        next_row_sentence.push_back(s);
                    }
                }
                if (finished[s].size() >= beam) done[s] = 1;
            }
            // Drop rows of sentences that just completed.
            std::vector<std::size_t> rows;
            std::vector<int> feed2;
            std::vector<std::size_t> rs2;
            for (std::size_t i = 0; i < keep_rows.size(); ++i) {
                if (done[next_row_sentence[i]]) continue;
                rows.push_back(keep_rows[i]);
                feed2.push_back(next_feed[i]);
                rs2.push_back(next_row_sentence[i]);
            }
            for (std::size_t s = 0; s < n; ++s) {
                if (done[s]) next_live[s].clear();
            }
            live = std::move(next_live);
            feed = std::move(feed2);
            row_sentence = std::move(rs2);
            if (!rows.empty()) Model::reorder(state, rows);
        }

        for (std::size_t s = 0; s < n; ++s) {
            Hypothesis best;
            bool have = false;
            for (auto& h : finished[s]) {
                if (!have || h.score > best.score) {
                    best = h;
                    have = true;
                }
            }
            if (!have) {
                for (auto& h : live[s]) {
                    const double score = length_normalized(h.log_prob, h.tokens.size(), cfg.length_penalty);
                    if (!have || score > best.score) {
                        best.tokens = h.tokens;
                        best.log_prob = h.log_prob;
                        best.score = score;
                        best.finished = false;
                        have = true;
                    }
                }
            }
            results[base + s] = std::move(best);
        }
    }
    return results;
}

/// Argmax rollout (lowest token id on ties), stopping at eos or max_len.
inline Hypothesis greedy_decode(const Model& model, const std::vector<int>& tagged_source, int max_len = 0) {
    NoGradScope no_grad;
    const Vocab vocab = model.vocab();
    const int limit = max_len > 0 ? std::min(max_len, model.config().max_len) : model.config().max_len;
    DecodeState state = model.start_decode(model.encode(tagged_source));
    Hypothesis h;
    int token = Vocab::bos;
    for (int step = 0; step < limit; ++step) {
        const Tensor logp = model.decode_step(state, std::vector<int>{token});
        int best = -1;
        for (int v = 0; v < vocab.size(); ++v) {
            if (v == Vocab::pad || v == Vocab::bos || vocab.tag_language(v) != 0) continue;
            if (best < 0 || logp[static_cast<std::size_t>(v)] > logp[static_cast<std::size_t>(best)]) best = v;
        }
        h.log_prob += logp[static_cast<std::size_t>(best)];
        if (best == Vocab::eos) {
            h.finished = true;
            h.score = length_normalized(h.log_prob, h.tokens.size() + 1, 1.0);
            return h;
        }
        h.tokens.push_back(best);
        token = best;
    }
    h.score = length_normalized(h.log_prob, h.tokens.size(), 1.0);
    return h;
}

/// Source -> hub -> target with the same beam settings on both legs.
inline std::vector<Hypothesis> pivot_translate(const Model& model, const std::vector<std::vector<int>>& sources,
                                               int src_lang, int tgt_lang, const BeamConfig& cfg,
                                               std::vector<Hypothesis>* hub_leg = nullptr) {
    const Vocab vocab = model.vocab();
    vocab.check_lang(src_lang);
    vocab.check_lang(tgt_lang);
    if (src_lang == 1 || tgt_lang == 1) {
        throw std::invalid_argument("pivot_translate: pivoting needs non-hub source and target languages");
    }
    std::vector<std::vector<int>> first;
    for (const auto& s : sources) first.push_back(tagged_source(vocab, s, 1));
    auto hub = beam_search(model, first, cfg);
    std::vector<std::vector<int>> second;
    const auto room = static_cast<std::size_t>(model.config().max_len - 2);
    for (const auto& h : hub) {
        std::vector<int> mid(h.tokens.begin(), h.tokens.begin() + static_cast<std::ptrdiff_t>(std::min(room, h.tokens.size())));
        second.push_back(tagged_source(vocab, mid, tgt_lang));
    }
    if (hub_leg != nullptr) *hub_leg = hub;
    return beam_search(model, second, cfg);
}

}  // namespace zsmt
