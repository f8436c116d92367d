#pragma once

#include <stdexcept>
#include <string>

namespace zsmt {

/// Token layout shared by every language:
/// pad, bos, eos, one tag per language, then K disjoint content ranges of C tokens.
struct Vocab {
    int num_languages = 4;
    int concepts = 30;

    static constexpr int pad = 0;
    static constexpr int bos = 1;
    static constexpr int eos = 2;

    int size() const { return 3 + num_languages + num_languages * concepts; }

    int tag(int lang) const {
        check_lang(lang);
        return 2 + lang;
    }

    /// Language requested by a tag token, or 0 if `token` is not a tag.
    int tag_language(int token) const { return token >= 3 && token < 3 + num_languages ? token - 2 : 0; }

    int lo(int lang) const {
        check_lang(lang);
        return 3 + num_languages + (lang - 1) * concepts;
    }
    int hi(int lang) const { return lo(lang) + concepts; }

    bool is_content(int token) const { return token >= 3 + num_languages && token < size(); }

    /// Owning language of a content token, 0 for specials and out-of-range ids.
    int language_of(int token) const {
        if (!is_content(token)) return 0;
        return 1 + (token - 3 - num_languages) / concepts;
    }

    void check_lang(int lang) const {
        if (lang < 1 || lang > num_languages) {
            throw std::out_of_range("language " + std::to_string(lang) + " outside 1.." +
                                    std::to_string(num_languages));
        }
    }
};

}  // namespace zsmt
