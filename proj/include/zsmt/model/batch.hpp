#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsmt/data/types.hpp"
#include "zsmt/model/vocab.hpp"

namespace zsmt {

/// Padded source side: each row is [tag(tgt_lang), tokens..., eos].
struct SourceBatch {
    std::size_t rows = 0;
    std::size_t len = 0;
    std::vector<int> ids;
    std::vector<std::uint8_t> valid;
};

/// Teacher-forcing batch. Decoder input [bos, y...], decoder target [y..., eos].
struct Batch {
    SourceBatch source;
    std::size_t tgt_len = 0;
    std::vector<int> dec_in;
    std::vector<int> dec_out;
    std::vector<std::uint8_t> tgt_valid;
    std::vector<int> tgt_lang;

    std::size_t size() const { return source.rows; }
    std::size_t target_tokens() const {
        return static_cast<std::size_t>(std::count(tgt_valid.begin(), tgt_valid.end(), std::uint8_t{1}));
    }
};

inline std::vector<int> tagged_source(const Vocab& vocab, std::span<const int> src, int tgt_lang) {
    std::vector<int> out;
    out.reserve(src.size() + 2);
    out.push_back(vocab.tag(tgt_lang));
    out.insert(out.end(), src.begin(), src.end());
    out.push_back(Vocab::eos);
    return out;
}

inline SourceBatch make_source_batch(const std::vector<std::vector<int>>& sequences) {
    SourceBatch b;
    b.rows = sequences.size();
    for (const auto& s : sequences) b.len = std::max(b.len, s.size());
    b.ids.assign(b.rows * b.len, Vocab::pad);
    b.valid.assign(b.rows * b.len, 0);
    for (std::size_t r = 0; r < b.rows; ++r) {
        std::copy(sequences[r].begin(), sequences[r].end(), b.ids.begin() + static_cast<std::ptrdiff_t>(r * b.len));
        std::fill_n(b.valid.begin() + static_cast<std::ptrdiff_t>(r * b.len), sequences[r].size(), 1);
    }
    return b;
}

inline Batch make_batch(const Vocab& vocab, std::span<const ParallelPair* const> pairs) {
    if (pairs.empty()) throw std::invalid_argument("make_batch: no pairs");
    Batch b;
    std::vector<std::vector<int>> sources;
    sources.reserve(pairs.size());
    for (const ParallelPair* p : pairs) {
        sources.push_back(tagged_source(vocab, p->src, p->tgt_lang));
        b.tgt_len = std::max(b.tgt_len, p->tgt.size() + 1);
        b.tgt_lang.push_back(p->tgt_lang);
    }
    b.source = make_source_batch(sources);
    const std::size_t n = pairs.size(), t = b.tgt_len;
    b.dec_in.assign(n * t, Vocab::pad);
    b.dec_out.assign(n * t, Vocab::pad);
    b.tgt_valid.assign(n * t, 0);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& y = pairs[r]->tgt;
        b.dec_in[r * t] = Vocab::bos;
        for (std::size_t i = 0; i < y.size(); ++i) {
            b.dec_in[r * t + i + 1] = y[i];
            b.dec_out[r * t + i] = y[i];
        }
        b.dec_out[r * t + y.size()] = Vocab::eos;
        std::fill_n(b.tgt_valid.begin() + static_cast<std::ptrdiff_t>(r * t), y.size() + 1, 1);
    }
    return b;
}

inline Batch make_batch(const Vocab& vocab, const std::vector<ParallelPair>& pairs) {
    std::vector<const ParallelPair*> ptrs;
    ptrs.reserve(pairs.size());
    for (const auto& p : pairs) ptrs.push_back(&p);
    return make_batch(vocab, ptrs);
}

}  // namespace zsmt
