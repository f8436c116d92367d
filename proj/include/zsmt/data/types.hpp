#pragma once

#include <compare>
#include <string>
#include <vector>

namespace zsmt {

struct Direction {
    int src = 0;
    int tgt = 0;

    auto operator<=>(const Direction&) const = default;
    std::string name() const { return std::to_string(src) + "-" + std::to_string(tgt); }
};

struct ParallelPair {
    std::vector<int> src;
    std::vector<int> tgt;
    int src_lang = 0;
    int tgt_lang = 0;

    Direction direction() const { return {src_lang, tgt_lang}; }
    bool operator==(const ParallelPair&) const = default;
};

}  // namespace zsmt
