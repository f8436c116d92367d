#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsmt/model/vocab.hpp"
#include "zsmt/util/rng.hpp"

namespace zsmt {

enum class OrderTransform { identity, reverse, rotate_1 };

NLOHMANN_JSON_SERIALIZE_ENUM(OrderTransform, {{OrderTransform::identity, "IDENTITY"},
                                              {OrderTransform::reverse, "REVERSE"},
                                              {OrderTransform::rotate_1, "ROTATE_1"}})

/// One artificial language: a token range, a concept permutation and a word-order rule.
struct SyntheticLanguageSpec {
    int lang_id = 1;
    int lo = 0;
    int hi = 0;
    std::vector<int> permutation;  // concept -> surface index
    OrderTransform order = OrderTransform::identity;

    int concepts() const { return hi - lo; }
    bool owns(int token) const { return token >= lo && token < hi; }
    bool operator==(const SyntheticLanguageSpec&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SyntheticLanguageSpec, lang_id, lo, hi, permutation, order)

/// Language 1 is the hub with identity permutation and order; the others get
/// seeded permutations and alternate REVERSE / ROTATE_1.
inline std::vector<SyntheticLanguageSpec> make_languages(const Vocab& vocab, std::uint64_t seed) {
    std::vector<SyntheticLanguageSpec> out;
    for (int j = 1; j <= vocab.num_languages; ++j) {
        SyntheticLanguageSpec s;
        s.lang_id = j;
        s.lo = vocab.lo(j);
        s.hi = vocab.hi(j);
        s.permutation.resize(static_cast<std::size_t>(vocab.concepts));
        std::iota(s.permutation.begin(), s.permutation.end(), 0);
        if (j > 1) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
            rng.shuffle(s.permutation.begin(), s.permutation.end());
            s.order = j % 2 == 0 ? OrderTransform::reverse : OrderTransform::rotate_1;
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<int> gen_concept_sentence(int length, int concepts, Rng& rng) {
    if (length < 1) throw std::invalid_argument("gen_concept_sentence: length must be >= 1");
    std::vector<int> out(static_cast<std::size_t>(length));
    for (auto& c : out) c = static_cast<int>(rng.below(static_cast<std::uint64_t>(concepts)));
    return out;
}

inline std::vector<int> gen_concept_sentence(int length, int concepts, std::uint64_t seed) {
    Rng rng(seed);
    return gen_concept_sentence(length, concepts, rng);
}

inline std::vector<int> realize(std::span<const int> concepts, const SyntheticLanguageSpec& spec) {
    std::vector<int> out;
    out.reserve(concepts.size());
    for (int c : concepts) {
        if (c < 0 || c >= spec.concepts()) {
            throw std::out_of_range("realize: concept " + std::to_string(c) + " outside 0.." +
                                    std::to_string(spec.concepts() - 1));
        }
        out.push_back(spec.lo + spec.permutation[static_cast<std::size_t>(c)]);
    }
    switch (spec.order) {
        case OrderTransform::identity: break;
        case OrderTransform::reverse: std::reverse(out.begin(), out.end()); break;
        case OrderTransform::rotate_1:
            if (!out.empty()) std::rotate(out.begin(), out.begin() + 1, out.end());
            break;
    }
    return out;
}

inline std::vector<int> unrealize(std::span<const int> tokens, const SyntheticLanguageSpec& spec) {
    std::vector<int> order(tokens.begin(), tokens.end());
    switch (spec.order) {
        case OrderTransform::identity: break;
        case OrderTransform::reverse: std::reverse(order.begin(), order.end()); break;
        case OrderTransform::rotate_1:
            if (!order.empty()) std::rotate(order.begin(), order.end() - 1, order.end());
            break;
    }
    std::vector<int> inverse(spec.permutation.size());
    for (std::size_t c = 0; c < spec.permutation.size(); ++c) inverse[static_cast<std::size_t>(spec.permutation[c])] = static_cast<int>(c);
    for (auto& t : order) {
        if (!spec.owns(t)) {
            throw std::invalid_argument("token " + std::to_string(t) + " is not in language " +
                                        std::to_string(spec.lang_id) + " [" + std::to_string(spec.lo) + ", " +
                                        std::to_string(spec.hi) + ")");
        }
        t = inverse[static_cast<std::size_t>(t - spec.lo)];
    }
    return order;
}

/// Ground-truth translation through the shared concept layer.
inline std::vector<int> oracle_translate(std::span<const int> sentence, const SyntheticLanguageSpec& from,
                                         const SyntheticLanguageSpec& to) {
    return realize(unrealize(sentence, from), to);
}

}  // namespace zsmt
