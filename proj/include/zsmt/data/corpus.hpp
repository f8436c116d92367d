#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsmt/data/language.hpp"
#include "zsmt/data/types.hpp"
#include "zsmt/model/vocab.hpp"
#include "zsmt/util/rng.hpp"

namespace zsmt {

struct DataConfig {
    int num_languages = 4;
    int concepts = 30;
    std::uint64_t seed = 7;
    /// Sentences for hub<->j, j = 2..K; the same sentences serve both directions.
    std::vector<int> train_sizes{8000, 4000, 2000};
    int min_len = 4;
    int max_len = 16;
    int dev_size = 500;
    int test_size = 500;

    Vocab vocab() const { return Vocab{num_languages, concepts}; }

    void validate() const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("DataConfig: " + m); };
        if (num_languages < 2) fail("num_languages must be >= 2");
        if (concepts < 1) fail("concepts must be >= 1");
        if (train_sizes.size() != static_cast<std::size_t>(num_languages - 1)) {
            fail("train_sizes needs one entry per non-hub language (" + std::to_string(num_languages - 1) + ")");
        }
        for (int s : train_sizes) {
            if (s < 1) fail("train sizes must be positive");
        }
        if (min_len < 1 || max_len < min_len) fail("sentence length range is empty");
        if (dev_size < 1 || test_size < 1) fail("dev and test sizes must be positive");
    }

    bool operator==(const DataConfig&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DataConfig, num_languages, concepts, seed, train_sizes, min_len,
                                                max_len, dev_size, test_size)

/// Parallel data keyed by direction; iteration order is (src, tgt).
struct Corpus {
    std::map<Direction, std::vector<ParallelPair>> directions;

    const std::vector<ParallelPair>& at(Direction d) const {
        auto it = directions.find(d);
        if (it == directions.end()) throw std::out_of_range("corpus has no direction " + d.name());
        return it->second;
    }

    std::vector<Direction> keys() const {
        std::vector<Direction> out;
        for (const auto& [d, _] : directions) out.push_back(d);
        return out;
    }

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& [_, v] : directions) n += v.size();
        return n;
    }

    bool operator==(const Corpus&) const = default;
};

struct Dataset {
    DataConfig config;
    std::vector<SyntheticLanguageSpec> languages;
    Corpus train;
    Corpus dev;
    Corpus test;

    const SyntheticLanguageSpec& language(int j) const {
        config.vocab().check_lang(j);
        return languages[static_cast<std::size_t>(j - 1)];
    }
};

namespace detail {

inline std::vector<std::vector<int>> concept_sentences(const DataConfig& cfg, int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<int>> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        out.push_back(gen_concept_sentence(rng.between(cfg.min_len, cfg.max_len), cfg.concepts, rng));
    }
    return out;
}

inline ParallelPair make_pair(const std::vector<int>& concepts, const SyntheticLanguageSpec& from,
                              const SyntheticLanguageSpec& to) {
    return ParallelPair{realize(concepts, from), realize(concepts, to), from.lang_id, to.lang_id};
}

}  // namespace detail

/// Hub-centric training data plus multi-way dev and test sets covering every direction.
inline Dataset generate_dataset(const DataConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    ds.languages = make_languages(cfg.vocab(), cfg.seed);
    const auto& hub = ds.languages[0];
    for (int j = 2; j <= cfg.num_languages; ++j) {
        const auto& other = ds.languages[static_cast<std::size_t>(j - 1)];
        const auto sentences = detail::concept_sentences(cfg, cfg.train_sizes[static_cast<std::size_t>(j - 2)],
                                                         derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(j)));
        auto& fwd = ds.train.directions[{1, j}];
        auto& bwd = ds.train.directions[{j, 1}];
        for (const auto& c : sentences) {
            fwd.push_back(detail::make_pair(c, hub, other));
            bwd.push_back(detail::make_pair(c, other, hub));
        }
    }
    auto multiway = [&](Corpus& corpus, int count, std::uint64_t stream) {
        const auto sentences = detail::concept_sentences(cfg, count, derive_seed(cfg.seed, stream));
        for (const auto& from : ds.languages) {
            for (const auto& to : ds.languages) {
                if (from.lang_id == to.lang_id) continue;
                auto& pairs = corpus.directions[{from.lang_id, to.lang_id}];
                for (const auto& c : sentences) pairs.push_back(detail::make_pair(c, from, to));
            }
        }
    };
    multiway(ds.dev, cfg.dev_size, 1000);
    multiway(ds.test, cfg.test_size, 2000);
    return ds;
}

inline std::string join_tokens(const std::vector<int>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(tokens[i]);
    }
    return out;
}

inline std::vector<int> parse_tokens(const std::string& text) {
    std::vector<int> out;
    std::istringstream in(text);
    int t;
    while (in >> t) out.push_back(t);
    if (!in.eof()) throw std::invalid_argument("malformed token list: '" + text + "'");
    return out;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [d, pairs] : corpus.directions) {
        std::ofstream out(dir / (d.name() + ".tsv"), std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / (d.name() + ".tsv")).string());
        for (const auto& p : pairs) {
            out << p.src_lang << '\t' << p.tgt_lang << '\t' << join_tokens(p.src) << '\t' << join_tokens(p.tgt) << '\n';
        }
    }
}

inline std::vector<ParallelPair> read_pairs(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    std::vector<ParallelPair> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
            fields.push_back(line.substr(start, tab - start));
        }
        fields.push_back(line.substr(start));
        if (fields.size() != 4) {
            throw std::invalid_argument(file.string() + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields");
        }
        out.push_back({parse_tokens(fields[2]), parse_tokens(fields[3]), std::stoi(fields[0]), std::stoi(fields[1])});
    }
    return out;
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["config"] = ds.config;
    for (const auto& [split, corpus] : {std::pair<const char*, const Corpus*>{"train", &ds.train},
                                       {"dev", &ds.dev},
                                       {"test", &ds.test}}) {
        write_corpus(*corpus, dir / split);
        nlohmann::json sizes = nlohmann::json::object();
        for (const auto& [d, pairs] : corpus->directions) sizes[d.name()] = pairs.size();
        manifest["splits"][split] = sizes;
    }
    std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
    std::ofstream(dir / "languages.json", std::ios::binary) << nlohmann::json(ds.languages).dump(2) << '\n';
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("no manifest.json in " + dir.string());
    const auto manifest = nlohmann::json::parse(mf);
    Dataset ds;
    ds.config = manifest.at("config").get<DataConfig>();
    ds.languages = nlohmann::json::parse(std::ifstream(dir / "languages.json")).get<std::vector<SyntheticLanguageSpec>>();
    for (const auto& [split, corpus] :
         {std::pair<const char*, Corpus*>{"train", &ds.train}, {"dev", &ds.dev}, {"test", &ds.test}}) {
        for (const auto& [name, size] : manifest.at("splits").at(split).items()) {
            auto pairs = read_pairs(dir / split / (name + ".tsv"));
            if (pairs.size() != size.get<std::size_t>()) {
                throw std::runtime_error(std::string(split) + "/" + name + ".tsv: size differs from manifest");
            }
            if (pairs.empty()) continue;
            corpus->directions[pairs.front().direction()] = std::move(pairs);
        }
    }
    return ds;
}

}  // namespace zsmt
