#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "zsmt/data/oracle.hpp"
#include "zsmt/data/sampling.hpp"

namespace zsmt {
namespace {

DataConfig small_config() {
    DataConfig c;
    c.train_sizes = {80, 40, 20};
    c.dev_size = 50;
    c.test_size = 30;
    return c;
}

TEST(ConceptSentence, DeterministicAndInRange) {
    EXPECT_EQ(gen_concept_sentence(9, 30, 42), gen_concept_sentence(9, 30, 42));
    EXPECT_NE(gen_concept_sentence(9, 30, 42), gen_concept_sentence(9, 30, 43));
    const auto s = gen_concept_sentence(5, 30, 1);
    ASSERT_EQ(s.size(), 5u);
    for (int c : s) {
        EXPECT_GE(c, 0);
        EXPECT_LT(c, 30);
    }
    EXPECT_THROW(gen_concept_sentence(0, 30, 1), std::invalid_argument);
}

TEST(ConceptSentence, FrequenciesWithinThreeSigmaOfUniform) {
    const int concepts = 30, draws = 100000;
    Rng rng(5);
    std::vector<int> counts(concepts, 0);
    for (int c : gen_concept_sentence(draws, concepts, rng)) ++counts[static_cast<std::size_t>(c)];
    const double p = 1.0 / concepts;
    const double mean = draws * p, sigma = std::sqrt(draws * p * (1 - p));
    for (int k = 0; k < concepts; ++k) EXPECT_LE(std::abs(counts[static_cast<std::size_t>(k)] - mean), 3 * sigma) << k;
}

class Languages : public ::testing::Test {
   protected:
    Vocab vocab{4, 30};
    std::vector<SyntheticLanguageSpec> langs = make_languages(vocab, 7);
};

TEST_F(Languages, RangesDisjointAndHubIsIdentity) {
    EXPECT_EQ(langs[0].order, OrderTransform::identity);
    for (int c = 0; c < 30; ++c) EXPECT_EQ(langs[0].permutation[static_cast<std::size_t>(c)], c);
    for (std::size_t i = 0; i < langs.size(); ++i) {
        auto perm = langs[i].permutation;
        std::sort(perm.begin(), perm.end());
        for (int c = 0; c < 30; ++c) EXPECT_EQ(perm[static_cast<std::size_t>(c)], c);
        for (std::size_t j = i + 1; j < langs.size(); ++j) {
            EXPECT_TRUE(langs[i].hi <= langs[j].lo || langs[j].hi <= langs[i].lo);
        }
    }
    for (int t = 0; t < vocab.size(); ++t) {
        int owners = 0;
        for (const auto& l : langs) owners += l.owns(t);
        EXPECT_EQ(owners, vocab.is_content(t) ? 1 : 0) << t;
    }
}

TEST_F(Languages, RealizeExamples) {
    const std::vector<int> c = {3, 0, 7, 29};
    EXPECT_EQ(realize(c, langs[0]), (std::vector<int>{langs[0].lo + 3, langs[0].lo, langs[0].lo + 7, langs[0].lo + 29}));

    SyntheticLanguageSpec rev = langs[0];
    rev.order = OrderTransform::reverse;
    EXPECT_EQ(realize(std::vector<int>{1, 2, 3}, rev), (std::vector<int>{rev.lo + 3, rev.lo + 2, rev.lo + 1}));
    SyntheticLanguageSpec rot = langs[0];
    rot.order = OrderTransform::rotate_1;
    EXPECT_EQ(realize(std::vector<int>{1, 2, 3}, rot), (std::vector<int>{rot.lo + 2, rot.lo + 3, rot.lo + 1}));

    for (const auto& l : langs) EXPECT_EQ(unrealize(realize(c, l), l), c);
    EXPECT_THROW(unrealize(std::vector<int>{langs[1].lo}, langs[0]), std::invalid_argument);
}

TEST_F(Languages, OracleTranslateIsAGroupoidAction) {
    Rng rng(11);
    for (int n = 0; n < 100; ++n) {
        const auto concepts = gen_concept_sentence(static_cast<int>(rng.between(1, 16)), 30, rng);
        for (const auto& a : langs) {
            const auto x = realize(concepts, a);
            EXPECT_EQ(oracle_translate(x, a, a), x);
            for (const auto& b : langs) {
                const auto y = oracle_translate(x, a, b);
                EXPECT_EQ(oracle_translate(y, b, a), x);
                for (const auto& c : langs) EXPECT_EQ(oracle_translate(y, b, c), oracle_translate(x, a, c));
            }
        }
    }
}

TEST(Dataset, HubCentricTrainingAndMultiwayEvaluation) {
    const Dataset ds = generate_dataset(small_config());
    const Vocab v = ds.config.vocab();
    ASSERT_EQ(ds.train.directions.size(), 6u);
    for (const auto& [d, pairs] : ds.train.directions) {
        EXPECT_TRUE(d.src == 1 || d.tgt == 1) << d.name();
        for (const auto& p : pairs) {
            EXPECT_EQ(p.direction(), d);
            for (int t : p.src) EXPECT_EQ(v.language_of(t), d.src);
            for (int t : p.tgt) EXPECT_EQ(v.language_of(t), d.tgt);
            EXPECT_EQ(oracle_translate(p.src, ds.language(d.src), ds.language(d.tgt)), p.tgt);
        }
    }
    EXPECT_EQ(ds.train.at({1, 2}).size(), 80u);
    EXPECT_EQ(ds.train.at({4, 1}).size(), 20u);
    EXPECT_EQ(ds.dev.directions.size(), 12u);
    EXPECT_EQ(ds.test.directions.size(), 12u);
    for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_EQ(unrealize(ds.dev.at({2, 3})[i].src, ds.language(2)), unrealize(ds.dev.at({4, 1})[i].src, ds.language(4)));
    }
}

TEST(Dataset, Deterministic) {
    const Dataset a = generate_dataset(small_config()), b = generate_dataset(small_config());
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.dev, b.dev);
    EXPECT_EQ(a.languages, b.languages);
    DataConfig other = small_config();
    other.seed = 8;
    EXPECT_NE(generate_dataset(other).train, a.train);
}

TEST(Dataset, ConfigValidation) {
    DataConfig c = small_config();
    c.train_sizes = {1, 2};
    EXPECT_THROW(generate_dataset(c), std::invalid_argument);
    c = small_config();
    c.min_len = 5;
    c.max_len = 4;
    EXPECT_THROW(generate_dataset(c), std::invalid_argument);
}

TEST(Dataset, FilesRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "zsmt_data_test";
    std::filesystem::remove_all(dir);
    const Dataset ds = generate_dataset(small_config());
    write_dataset(ds, dir);
    std::ifstream in(dir / "train" / "1-3.tsv");
    std::string line;
    std::getline(in, line);
    std::istringstream fields(line);
    std::string s, t, src, tgt;
    std::getline(fields, s, '\t');
    std::getline(fields, t, '\t');
    std::getline(fields, src, '\t');
    std::getline(fields, tgt, '\t');
    EXPECT_EQ(s, "1");
    EXPECT_EQ(t, "3");
    EXPECT_EQ(parse_tokens(src), ds.train.at({1, 3}).front().src);
    EXPECT_EQ(tgt, join_tokens(ds.train.at({1, 3}).front().tgt));

    const Dataset back = read_dataset(dir);
    EXPECT_EQ(back.config, ds.config);
    EXPECT_EQ(back.languages, ds.languages);
    EXPECT_EQ(back.train, ds.train);
    EXPECT_EQ(back.dev, ds.dev);
    EXPECT_EQ(back.test, ds.test);
    std::filesystem::remove_all(dir);
}

TEST(Temperature, Examples) {
    const std::vector<double> sizes = {10e6, 0.08e6};
    const auto p = temperature_sample_distribution(sizes, 5.0);
    EXPECT_NEAR(p[0] / p[1], std::pow(125.0, 0.2), 1e-12);
    EXPECT_NEAR(p[0] / p[1], 2.6265, 1e-4);

    const std::vector<double> mixed = {1, 10, 1000, 3};
    for (double x : temperature_sample_distribution(mixed, 1e9)) EXPECT_NEAR(x, 0.25, 1e-6);
    const auto raw = temperature_sample_distribution(mixed, 1.0);
    for (std::size_t i = 0; i < mixed.size(); ++i) EXPECT_NEAR(raw[i], mixed[i] / 1014.0, 1e-15);

    EXPECT_THROW(temperature_sample_distribution(std::vector<double>{}, 5), std::invalid_argument);
    EXPECT_THROW(temperature_sample_distribution(mixed, 0.5), std::invalid_argument);
    EXPECT_THROW(temperature_sample_distribution(std::vector<double>{1, 0}, 5), std::invalid_argument);
}

TEST(BatchStream, DirectionFrequenciesMatchTemperature) {
    const Dataset ds = generate_dataset(small_config());
    BatchStream stream(ds.train, 5.0, 100, 3);
    std::vector<double> counts(stream.directions().size(), 0.0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) counts[stream.sample_direction()] += 1.0;
    for (std::size_t i = 0; i < counts.size(); ++i) EXPECT_NEAR(counts[i] / draws, stream.probabilities()[i], 0.01);
}

TEST(BatchStream, GroupsKeyedByTargetLanguage) {
    DataConfig c = small_config();
    c.num_languages = 2;
    c.train_sizes = {50};
    const Dataset ds = generate_dataset(c);
    BatchStream stream(ds.train, 5.0, 200, 1);
    for (int step = 0; step < 50; ++step) {
        std::size_t tokens = 0;
        for (const auto& [lang, pairs] : stream.next()) {
            EXPECT_TRUE(lang == 1 || lang == 2);
            EXPECT_FALSE(pairs.empty());
            for (const auto* p : pairs) {
                EXPECT_EQ(p->tgt_lang, lang);
                tokens += p->tgt.size() + 1;
            }
        }
        EXPECT_GE(tokens, 200u);
    }
}

TEST(BatchStream, DeterministicPerSeed) {
    const Dataset ds = generate_dataset(small_config());
    BatchStream a(ds.train, 5.0, 150, 9), b(ds.train, 5.0, 150, 9);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(ChunkByTokens, CoversInputInOrder) {
    const Dataset ds = generate_dataset(small_config());
    std::vector<const ParallelPair*> ptrs;
    for (const auto& p : ds.train.at({1, 2})) ptrs.push_back(&p);
    const auto chunks = chunk_by_tokens(ptrs, 60);
    std::vector<const ParallelPair*> flat;
    for (const auto& ch : chunks) flat.insert(flat.end(), ch.begin(), ch.end());
    EXPECT_EQ(flat, ptrs);
    EXPECT_GT(chunks.size(), 1u);
}

TEST(OracleSet, SplitSizesAndDisjointCover) {
    DataConfig c = small_config();
    c.dev_size = 1000;
    const Dataset ds = generate_dataset(c);
    const OracleSplit s = build_oracle_set(ds.dev, 0.8, {}, 4);
    for (const auto& [d, pairs] : ds.dev.directions) {
        std::size_t in_oracle = 0;
        for (const auto& p : s.oracle.at(d.tgt)) in_oracle += p.direction() == d;
        EXPECT_EQ(in_oracle, 800u) << d.name();
        EXPECT_EQ(s.checkpoint_dev.at(d).size(), 200u) << d.name();
        std::multiset<std::vector<int>> all, split;
        for (const auto& p : pairs) all.insert(p.src);
        for (const auto& p : s.checkpoint_dev.at(d)) split.insert(p.src);
        for (const auto& p : s.oracle.at(d.tgt)) {
            if (p.direction() == d) split.insert(p.src);
        }
        EXPECT_EQ(all, split);
    }
}

TEST(OracleSet, EveryTargetReceivesAllOtherSources) {
    const Dataset ds = generate_dataset(small_config());
    const OracleSplit s = build_oracle_set(ds.dev, 0.8, {}, 4);
    ASSERT_EQ(s.oracle.by_target.size(), 4u);
    for (const auto& [t, pairs] : s.oracle.by_target) {
        std::set<int> sources;
        for (const auto& p : pairs) {
            EXPECT_EQ(p.tgt_lang, t);
            sources.insert(p.src_lang);
        }
        EXPECT_EQ(sources.size(), 3u);
        EXPECT_EQ(pairs.size(), 3u * 40u);
    }
}

TEST(OracleSet, ExcludedDirectionsAbsentButStillInCheckpointDev) {
    const Dataset ds = generate_dataset(small_config());
    std::set<Direction> zero_shot;
    for (const auto& d : ds.dev.keys()) {
        if (d.src != 1 && d.tgt != 1) zero_shot.insert(d);
    }
    const OracleSplit s = build_oracle_set(ds.dev, 0.8, zero_shot, 4);
    for (const auto& [_, pairs] : s.oracle.by_target) {
        for (const auto& p : pairs) EXPECT_EQ(zero_shot.count(p.direction()), 0u);
    }
    for (const auto& d : zero_shot) EXPECT_EQ(s.checkpoint_dev.at(d).size(), 10u);
}

TEST(OracleSet, ErrorsNameTheStarvedLanguage) {
    const Dataset ds = generate_dataset(small_config());
    const std::set<Direction> all_into_3 = {{1, 3}, {2, 3}, {4, 3}};
    try {
        build_oracle_set(ds.dev, 0.8, all_into_3, 4);
        FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("language 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(build_oracle_set(ds.dev, 1.0, {}, 4), std::invalid_argument);
    EXPECT_THROW(build_oracle_set(ds.dev, 0.0, {}, 4), std::invalid_argument);
}

}  // namespace
}  // namespace zsmt
