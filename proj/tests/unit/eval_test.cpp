#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "zsmt/eval/metrics.hpp"
#include "zsmt/eval/sensitivity.hpp"
#include "zsmt/train/adam.hpp"

namespace zsmt {
namespace {

// Independent n-gram counter: quadratic scan with a used-flag per reference n-gram.
double brute_force_bleu(const std::vector<std::vector<int>>& hyps, const std::vector<std::vector<int>>& refs) {
    double matches[4] = {0, 0, 0, 0}, totals[4] = {0, 0, 0, 0}, h_len = 0, r_len = 0;
    for (std::size_t s = 0; s < hyps.size(); ++s) {
        const auto& h = hyps[s];
        const auto& r = refs[s];
        h_len += static_cast<double>(h.size());
        r_len += static_cast<double>(r.size());
        for (std::size_t n = 1; n <= 4; ++n) {
            if (h.size() < n) continue;
            totals[n - 1] += static_cast<double>(h.size() - n + 1);
            std::vector<bool> used(r.size() >= n ? r.size() - n + 1 : 0, false);
            for (std::size_t i = 0; i + n <= h.size(); ++i) {
                for (std::size_t j = 0; j < used.size(); ++j) {
                    if (used[j] || !std::equal(h.begin() + i, h.begin() + i + n, r.begin() + j)) continue;
                    used[j] = true;
                    matches[n - 1] += 1;
                    break;
                }
            }
        }
    }
    double log_p = 0, k = 1;
    for (int n = 0; n < 4; ++n) {
        if (totals[n] == 0) return 0.0;
        if (matches[n] == 0) {
            k *= 2;
            log_p += std::log(1.0 / (k * totals[n]));
        } else {
            log_p += std::log(matches[n] / totals[n]);
        }
    }
    const double bp = h_len < r_len ? std::exp(1 - r_len / h_len) : 1.0;
    return 100 * bp * std::exp(log_p / 4);
}

TEST(Bleu, WorkedExample) {
    const double expected = 100 * std::pow(0.75 * (2.0 / 3.0) * 0.5 * 0.5, 0.25);
    EXPECT_NEAR(corpus_bleu({{1, 2, 3, 4}}, {{1, 2, 3, 5}}), expected, 1e-9);
    EXPECT_NEAR(corpus_bleu({{1, 2, 3, 4}}, {{1, 2, 3, 5}}), 59.4604, 1e-4);
    EXPECT_NEAR(brute_force_bleu({{1, 2, 3, 4}}, {{1, 2, 3, 5}}), expected, 1e-9);
}

TEST(Bleu, ZeroOverlapFallsToSmoothingFloor) {
    const double floor = 100 * std::pow((1.0 / 8) * (1.0 / 12) * (1.0 / 16) * (1.0 / 16), 0.25);
    EXPECT_NEAR(corpus_bleu({{1, 2, 3, 4}}, {{5, 6, 7, 8}}), floor, 1e-9);
    EXPECT_EQ(corpus_bleu({{1, 2}}, {{1, 2}}), 0.0);
}

TEST(Bleu, MatchesBruteForceOnRandomCorpora) {
    Rng rng(1);
    for (int c = 0; c < 100; ++c) {
        std::vector<std::vector<int>> hyps, refs;
        const auto n = rng.between(1, 8);
        for (int s = 0; s < n; ++s) {
            std::vector<int> r, h;
            for (auto i = rng.between(1, 12); i > 0; --i) r.push_back(static_cast<int>(rng.below(6)));
            for (auto i = rng.between(0, 12); i > 0; --i) h.push_back(static_cast<int>(rng.below(6)));
            refs.push_back(r);
            hyps.push_back(h);
        }
        EXPECT_NEAR(corpus_bleu(hyps, refs), brute_force_bleu(hyps, refs), 1e-6) << "corpus " << c;
    }
}

TEST(Bleu, IdentityOrderInvarianceAndErrors) {
    Rng rng(2);
    std::vector<std::vector<int>> x;
    for (int s = 0; s < 10; ++s) {
        std::vector<int> v;
        for (auto i = rng.between(4, 10); i > 0; --i) v.push_back(static_cast<int>(rng.below(20)));
        x.push_back(v);
    }
    EXPECT_EQ(corpus_bleu(x, x), 100.0);
    auto y = x;
    for (auto& v : y) v.back() = 99;
    const double forward = corpus_bleu(y, x);
    std::reverse(x.begin(), x.end());
    std::reverse(y.begin(), y.end());
    EXPECT_EQ(corpus_bleu(y, x), forward);
    EXPECT_THROW(corpus_bleu({}, {}), std::invalid_argument);
    EXPECT_THROW(corpus_bleu({{1}}, {{1}, {2}}), std::invalid_argument);
}

class LangId : public ::testing::Test {
   protected:
    Vocab v{4, 30};
    std::vector<int> in(int lang, int n) const {
        std::vector<int> out;
        for (int i = 0; i < n; ++i) out.push_back(v.lo(lang) + i % 30);
        return out;
    }
    static std::vector<int> cat(std::vector<int> a, const std::vector<int>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    }
};

TEST_F(LangId, Examples) {
    EXPECT_EQ(langid_oracle(v, in(2, 6)), 2);
    EXPECT_EQ(langid_oracle(v, cat(in(2, 5), in(3, 5))), kOffLanguage);
    EXPECT_EQ(langid_oracle(v, cat(in(3, 7), in(1, 3))), 3);
    EXPECT_EQ(langid_oracle(v, std::vector<int>{}), kOffLanguage);
    EXPECT_EQ(langid_oracle(v, std::vector<int>{Vocab::eos, Vocab::pad, v.tag(2)}), kOffLanguage);
    EXPECT_EQ(langid_oracle(v, cat(in(4, 2), {Vocab::eos, Vocab::bos, Vocab::eos})), 4);
}

TEST_F(LangId, ExactOnReferences) {
    const auto langs = make_languages(v, 3);
    Rng rng(4);
    for (int n = 0; n < 50; ++n) {
        const auto c = gen_concept_sentence(static_cast<int>(rng.between(1, 16)), 30, rng);
        for (const auto& l : langs) EXPECT_EQ(langid_oracle(v, realize(c, l)), l.lang_id);
    }
}

TEST_F(LangId, OffTargetRates) {
    std::vector<std::vector<int>> hyps(12, in(2, 5));
    EXPECT_EQ(off_target_rate(v, hyps, 2), 0.0);
    EXPECT_EQ(off_target_rate(v, hyps, 3), 1.0);
    double last = 0.0;
    for (int i = 0; i < 3; ++i) {
        hyps[static_cast<std::size_t>(i)] = in(1, 5);
        const double r = off_target_rate(v, hyps, 2);
        EXPECT_GE(r, last);
        last = r;
    }
    EXPECT_DOUBLE_EQ(last, 0.25);
    EXPECT_THROW(off_target_rate(v, {}, 2), std::invalid_argument);
}

TEST_F(LangId, TokenOffTargetRate) {
    EXPECT_EQ(token_off_target_rate(v, {in(3, 8)}, 3), 0.0);
    EXPECT_DOUBLE_EQ(token_off_target_rate(v, {cat(in(3, 9), in(1, 1))}, 3), 0.1);
    EXPECT_DOUBLE_EQ(token_off_target_rate(v, {cat(cat(in(3, 9), in(1, 1)), {Vocab::eos, Vocab::pad})}, 3), 0.1);
    EXPECT_EQ(token_off_target_rate(v, {{Vocab::eos}}, 3), 0.0);
    EXPECT_THROW(token_off_target_rate(v, {}, 3), std::invalid_argument);
}

// P[off-target] for a length-n sentence by enumerating every per-token outcome:
// kept (1 - p) or moved to one of the K-1 other languages (p / (K-1) each).
double enumerated_rate(int n, int k, double p) {
    std::vector<int> outcome(static_cast<std::size_t>(n), 0);
    double off = 0.0;
    while (true) {
        double prob = 1.0;
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int o : outcome) {
            prob *= o == 0 ? 1.0 - p : p / (k - 1);
            ++counts[static_cast<std::size_t>(o)];
        }
        if (!(2 * counts[0] > n)) off += prob;
        std::size_t i = 0;
        while (i < outcome.size() && ++outcome[i] == k) outcome[i++] = 0;
        if (i == outcome.size()) break;
    }
    return off;
}

TEST(Sensitivity, MatchesEnumerationAndIsMonotone) {
    const Vocab v{4, 30};
    const auto langs = make_languages(v, 7);
    std::vector<SensitivityReference> refs;
    Rng rng(5);
    for (int i = 0; i < 40; ++i) {
        const auto& l = langs[static_cast<std::size_t>(i % 4)];
        refs.push_back({realize(gen_concept_sentence(9, 30, rng), l), l.lang_id});
    }
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
    const auto curve = sensitivity_sweep(v, refs, grid, 10000, 3);
    ASSERT_EQ(curve.size(), grid.size());
    EXPECT_EQ(curve.front().rate, 0.0);
    EXPECT_EQ(curve.back().rate, 1.0);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        EXPECT_NEAR(curve[i].rate, enumerated_rate(9, 4, grid[i]), 0.02) << "p=" << grid[i];
        if (i > 0) {
            EXPECT_GE(curve[i].rate, curve[i - 1].rate - 0.01);
        }
    }
    EXPECT_NEAR(enumerated_rate(9, 4, 0.5), 0.5, 1e-12);
    EXPECT_THROW(sensitivity_sweep(v, refs, {1.5}, 10, 1), std::invalid_argument);
}

ModelConfig tiny() {
    ModelConfig c;
    c.num_languages = 2;
    c.concepts = 5;
    c.d_model = 16;
    c.n_heads = 2;
    c.enc_layers = 1;
    c.dec_layers = 1;
    c.ffn_dim = 32;
    c.max_len = 10;
    c.tlp_layers = 1;
    return c;
}

std::vector<std::vector<int>> sources(const Vocab& v, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<int>> out;
    for (int i = 0; i < n; ++i) {
        const int s = 1 + i % 2;
        std::vector<int> x;
        for (auto k = rng.between(1, 6); k > 0; --k) x.push_back(v.lo(s) + static_cast<int>(rng.below(5)));
        out.push_back(tagged_source(v, x, 3 - s));
    }
    return out;
}

TEST(BeamSearch, BeamOneEqualsGreedy) {
    for (std::uint64_t seed : {1, 2, 3}) {
        ModelConfig c = tiny();
        c.init_seed = seed;
        Model m(c);
        const auto srcs = sources(m.vocab(), 12, seed);
        const auto beams = beam_search(m, srcs, BeamConfig{1, 1.0, 0, 5});
        for (std::size_t i = 0; i < srcs.size(); ++i) {
            const Hypothesis g = greedy_decode(m, srcs[i]);
            EXPECT_EQ(beams[i].tokens, g.tokens);
            EXPECT_EQ(beams[i].finished, g.finished);
            EXPECT_NEAR(beams[i].log_prob, g.log_prob, 1e-9);
        }
    }
}

TEST(BeamSearch, WiderBeamNeverScoresWorse) {
    for (std::uint64_t seed : {4, 5}) {
        ModelConfig c = tiny();
        c.init_seed = seed;
        Model m(c);
        const auto srcs = sources(m.vocab(), 16, seed);
        const auto b1 = beam_search(m, srcs, BeamConfig{1, 1.0, 0, 256});
        const auto b5 = beam_search(m, srcs, BeamConfig{5, 1.0, 0, 256});
        for (std::size_t i = 0; i < srcs.size(); ++i) {
            if (b1[i].finished) {
                EXPECT_GE(b5[i].score, b1[i].score - 1e-12) << i;
            }
        }
    }
}

TEST(BeamSearch, ChunkingDoesNotChangeResults) {
    Model m(tiny());
    const auto srcs = sources(m.vocab(), 9, 6);
    const auto a = beam_search(m, srcs, BeamConfig{3, 1.0, 0, 2});
    const auto b = beam_search(m, srcs, BeamConfig{3, 1.0, 0, 64});
    for (std::size_t i = 0; i < srcs.size(); ++i) {
        EXPECT_EQ(a[i].tokens, b[i].tokens);
        EXPECT_NEAR(a[i].score, b[i].score, 1e-9);
    }
}

TEST(BeamSearch, ConfidentModelYieldsForcedSequence) {
    Model m(tiny());
    const Vocab v = m.vocab();
    const ParallelPair pair{{v.lo(1), v.lo(1) + 3, v.lo(1) + 1}, {v.lo(2) + 4, v.lo(2) + 2, v.lo(2), v.lo(2) + 2}, 1, 2};
    const Batch b = make_batch(v, std::vector<ParallelPair>{pair});
    Adam adam(AdamConfig{1e-2, 0});
    for (int step = 0; step < 300; ++step) {
        Tape tape;
        TapeScope scope(tape);
        adam.apply(m.params(), backward(tape, m.losses(b, false).total, m.params()));
    }
    const auto src = tagged_source(v, pair.src, 2);
    const Hypothesis g = greedy_decode(m, src);
    ASSERT_GT(std::exp(g.log_prob), 0.99);
    const auto hyps = beam_search(m, {src}, BeamConfig{5, 1.0, 0, 8});
    EXPECT_EQ(hyps[0].tokens, pair.tgt);
    EXPECT_TRUE(hyps[0].finished);
}

TEST(BeamSearch, UnfinishedIsFlagged) {
    Model m(tiny());
    const auto srcs = sources(m.vocab(), 4, 7);
    for (const auto& h : beam_search(m, srcs, BeamConfig{2, 1.0, 1, 8})) {
        if (!h.finished) {
            EXPECT_EQ(h.tokens.size(), 1u);
        }
    }
    EXPECT_THROW(beam_search(m, srcs, BeamConfig{0, 1.0, 0, 8}), std::invalid_argument);
}

TEST(Pivot, RejectsHubEndpoints) {
    ModelConfig c = tiny();
    c.num_languages = 3;
    Model m(c);
    const Vocab v = m.vocab();
    const std::vector<std::vector<int>> src = {{v.lo(2), v.lo(2) + 1}};
    EXPECT_THROW(pivot_translate(m, src, 1, 3, BeamConfig{}), std::invalid_argument);
    EXPECT_THROW(pivot_translate(m, src, 2, 1, BeamConfig{}), std::invalid_argument);
    std::vector<Hypothesis> hub;
    const auto out = pivot_translate(m, src, 2, 3, BeamConfig{2, 1.0, 0, 8}, &hub);
    EXPECT_EQ(out.size(), 1u);
    EXPECT_EQ(hub.size(), 1u);
}

class EvaluateAll : public ::testing::Test {
   protected:
    void SetUp() override {
        DataConfig dc;
        dc.num_languages = 3;
        dc.concepts = 5;
        dc.train_sizes = {5, 5};
        dc.max_len = 6;
        dc.dev_size = 6;
        dc.test_size = 6;
        ds = generate_dataset(dc);
        ModelConfig c = tiny();
        c.num_languages = 3;
        model = std::make_unique<Model>(c);
        cfg.beam = BeamConfig{2, 1.0, 0, 16};
    }
    Dataset ds;
    std::unique_ptr<Model> model;
    EvalConfig cfg;
};

TEST_F(EvaluateAll, SingleDirectionAggregateEqualsDirection) {
    const auto ev = evaluate_all(*model, ds.test, {{2, 3}}, cfg);
    ASSERT_TRUE(ev.report.zero_shot.has_value());
    EXPECT_FALSE(ev.report.from_hub.has_value());
    const auto& d = ev.report.directions.at({2, 3});
    EXPECT_EQ(ev.report.zero_shot->bleu, d.bleu);
    EXPECT_EQ(ev.report.zero_shot->off_target, d.off_target);
    EXPECT_EQ(d.sentences, 6u);
}

TEST_F(EvaluateAll, PermutationInvariantAndDeterministic) {
    auto dirs = ds.test.keys();
    const auto a = evaluate_all(*model, ds.test, dirs, cfg);
    std::reverse(dirs.begin(), dirs.end());
    const auto b = evaluate_all(*model, ds.test, dirs, cfg);
    EXPECT_TRUE(a.report == b.report);
    EXPECT_EQ(metrics_csv(a.report), metrics_csv(b.report));
    const auto c = evaluate_all(*model, ds.test, ds.test.keys(), cfg);
    EXPECT_EQ(to_json(a.report).dump(), to_json(c.report).dump());
}

TEST_F(EvaluateAll, AggregatesAreMeansAndReportRoundTrips) {
    const auto ev = evaluate_all(*model, ds.test, ds.test.keys(), cfg);
    double sum = 0;
    int n = 0;
    for (const auto& [d, m] : ev.report.directions) {
        if (classify(d) == DirectionClass::to_hub) {
            sum += m.bleu;
            ++n;
        }
        EXPECT_GE(m.off_target, 0.0);
        EXPECT_LE(m.off_target, 1.0);
    }
    EXPECT_NEAR(ev.report.to_hub->bleu, sum / n, 1e-12);
    EXPECT_TRUE(report_from_json(to_json(ev.report)) == ev.report);
    for (const auto& [d, rs] : ev.results) {
        EXPECT_TRUE(score_direction(model->vocab(), rs) == ev.report.directions.at(d));
        for (const auto& r : rs) EXPECT_EQ(r.detected_lang, langid_oracle(model->vocab(), r.hypothesis));
    }
    const std::string csv = metrics_csv(ev.report);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    EXPECT_EQ(csv.rfind("direction,bleu,off_target,token_off_target\n", 0), 0u);
}

TEST_F(EvaluateAll, PivotModeAndMissingDirection) {
    EvalConfig pc = cfg;
    pc.pivot = true;
    const auto ev = evaluate_all(*model, ds.test, {{2, 3}, {1, 2}}, pc);
    EXPECT_EQ(ev.report.directions.size(), 2u);
    EXPECT_THROW(evaluate_all(*model, ds.train, {{2, 3}}, cfg), std::invalid_argument);
}

}  // namespace
}  // namespace zsmt
