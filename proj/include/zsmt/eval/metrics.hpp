#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsmt/data/corpus.hpp"
#include "zsmt/eval/beam_search.hpp"
#include "zsmt/eval/bleu.hpp"
#include "zsmt/eval/langid.hpp"

namespace zsmt {

struct TranslationResult {
    std::vector<int> src;
    std::vector<int> hypothesis;
    std::vector<int> reference;
    int src_lang = 0;
    int tgt_lang = 0;
    int detected_lang = kOffLanguage;
    bool finished = true;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TranslationResult, src, hypothesis, reference, src_lang, tgt_lang, detected_lang,
                                   finished)

struct DirectionMetrics {
    double bleu = 0.0;
    double off_target = 0.0;
    double token_off_target = 0.0;
    std::size_t sentences = 0;

    bool operator==(const DirectionMetrics&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DirectionMetrics, bleu, off_target, token_off_target, sentences)

struct AggregateMetrics {
    double bleu = 0.0;
    double off_target = 0.0;
    double token_off_target = 0.0;
    std::size_t directions = 0;

    bool operator==(const AggregateMetrics&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AggregateMetrics, bleu, off_target, token_off_target, directions)

enum class DirectionClass { from_hub, to_hub, zero_shot };

inline DirectionClass classify(Direction d) {
    if (d.src == 1) return DirectionClass::from_hub;
    if (d.tgt == 1) return DirectionClass::to_hub;
    return DirectionClass::zero_shot;
}

struct MetricsReport {
    std::map<Direction, DirectionMetrics> directions;
    std::optional<AggregateMetrics> from_hub;
    std::optional<AggregateMetrics> to_hub;
    std::optional<AggregateMetrics> zero_shot;

    /// Mean over the given directions, which must all be present.
    AggregateMetrics average(const std::vector<Direction>& dirs) const {
        if (dirs.empty()) throw std::invalid_argument("MetricsReport::average: no directions");
        AggregateMetrics a;
        for (const auto& d : dirs) {
            auto it = directions.find(d);
            if (it == directions.end()) throw std::out_of_range("MetricsReport: no direction " + d.name());
            a.bleu += it->second.bleu;
            a.off_target += it->second.off_target;
            a.token_off_target += it->second.token_off_target;
        }
        const double n = static_cast<double>(dirs.size());
        a.bleu /= n;
        a.off_target /= n;
        a.token_off_target /= n;
        a.directions = dirs.size();
        return a;
    }

    void recompute_aggregates() {
        std::map<DirectionClass, std::vector<Direction>> groups;
        for (const auto& [d, _] : directions) groups[classify(d)].push_back(d);
        auto agg = [&](DirectionClass c) -> std::optional<AggregateMetrics> {
            auto it = groups.find(c);
            if (it == groups.end()) return std::nullopt;
            return average(it->second);
        };
        from_hub = agg(DirectionClass::from_hub);
        to_hub = agg(DirectionClass::to_hub);
        zero_shot = agg(DirectionClass::zero_shot);
    }

    bool operator==(const MetricsReport&) const = default;
};

inline nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["directions"] = nlohmann::json::object();
    for (const auto& [d, m] : r.directions) j["directions"][d.name()] = m;
    auto opt = [](const std::optional<AggregateMetrics>& a) { return a ? nlohmann::json(*a) : nlohmann::json(nullptr); };
    j["from_hub"] = opt(r.from_hub);
    j["to_hub"] = opt(r.to_hub);
    j["zero_shot"] = opt(r.zero_shot);
    return j;
}

inline Direction parse_direction(const std::string& name) {
    const auto dash = name.find('-');
    if (dash == std::string::npos) throw std::invalid_argument("bad direction '" + name + "', expected i-j");
    return {std::stoi(name.substr(0, dash)), std::stoi(name.substr(dash + 1))};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
    MetricsReport r;
    for (const auto& [name, m] : j.at("directions").items()) r.directions[parse_direction(name)] = m.get<DirectionMetrics>();
    r.recompute_aggregates();
    return r;
}

inline DirectionMetrics score_direction(const Vocab& vocab, const std::vector<TranslationResult>& results,
                                        double langid_threshold = 0.5) {
    if (results.empty()) throw std::invalid_argument("score_direction: no results");
    std::vector<std::vector<int>> hyps, refs;
    for (const auto& r : results) {
        hyps.push_back(r.hypothesis);
        refs.push_back(r.reference);
    }
    const int tgt = results.front().tgt_lang;
    DirectionMetrics m;
    m.bleu = corpus_bleu(hyps, refs);
    m.off_target = off_target_rate(vocab, hyps, tgt, langid_threshold);
    m.token_off_target = token_off_target_rate(vocab, hyps, tgt);
    m.sentences = results.size();
    return m;
}

struct EvalConfig {
    BeamConfig beam;
    double langid_threshold = 0.5;
    /// 0 evaluates every pair of a direction.
    std::size_t max_sentences = 0;
    /// Decode zero-shot directions through the hub.
    bool pivot = false;

    bool operator==(const EvalConfig&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalConfig, beam, langid_threshold, max_sentences, pivot)

struct Evaluation {
    MetricsReport report;
    std::map<Direction, std::vector<TranslationResult>> results;
};

/// Decodes and scores every requested direction. All directions are decoded in
/// one batched pass so the work per call is independent of direction order.
inline Evaluation evaluate_all(const Model& model, const Corpus& corpus, const std::vector<Direction>& requested,
                               const EvalConfig& cfg) {
    const Vocab vocab = model.vocab();
    std::vector<Direction> dirs = requested;
    std::sort(dirs.begin(), dirs.end());
    dirs.erase(std::unique(dirs.begin(), dirs.end()), dirs.end());
    Evaluation ev;
    std::vector<std::vector<int>> direct_sources;
    std::vector<std::pair<Direction, const ParallelPair*>> direct_items;
    std::vector<std::pair<Direction, const ParallelPair*>> pivot_items;
    for (const auto& d : dirs) {
        auto it = corpus.directions.find(d);
        if (it == corpus.directions.end() || it->second.empty()) {
            throw std::invalid_argument("evaluate_all: no test data for direction " + d.name());
        }
        const std::size_t n = cfg.max_sentences == 0 ? it->second.size() : std::min(cfg.max_sentences, it->second.size());
        for (std::size_t i = 0; i < n; ++i) {
            const ParallelPair* p = &it->second[i];
            if (cfg.pivot && d.src != 1 && d.tgt != 1) {
                pivot_items.emplace_back(d, p);
            } else {
                direct_items.emplace_back(d, p);
                direct_sources.push_back(tagged_source(vocab, p->src, d.tgt));
            }
        }
    }
    auto record = [&](Direction d, const ParallelPair* p, const Hypothesis& h) {
        TranslationResult r;
        r.src = p->src;
        r.hypothesis = h.tokens;
        r.reference = p->tgt;
        r.src_lang = d.src;
        r.tgt_lang = d.tgt;
        r.detected_lang = langid_oracle(vocab, h.tokens, cfg.langid_threshold);
        r.finished = h.finished;
        ev.results[d].push_back(std::move(r));
    };
    if (!direct_sources.empty()) {
        const auto hyps = beam_search(model, direct_sources, cfg.beam);
        for (std::size_t i = 0; i < hyps.size(); ++i) record(direct_items[i].first, direct_items[i].second, hyps[i]);
    }
    std::map<Direction, std::vector<const ParallelPair*>> by_dir;
    for (const auto& [d, p] : pivot_items) by_dir[d].push_back(p);
    for (const auto& [d, ps] : by_dir) {
        std::vector<std::vector<int>> srcs;
        for (const auto* p : ps) srcs.push_back(p->src);
        const auto hyps = pivot_translate(model, srcs, d.src, d.tgt, cfg.beam);
        for (std::size_t i = 0; i < hyps.size(); ++i) record(d, ps[i], hyps[i]);
    }
    for (const auto& [d, rs] : ev.results) ev.report.directions[d] = score_direction(vocab, rs, cfg.langid_threshold);
    ev.report.recompute_aggregates();
    return ev;
}

inline std::string format_number(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string metrics_csv(const MetricsReport& r) {
    std::ostringstream out;
    out << "direction,bleu,off_target,token_off_target\n";
    for (const auto& [d, m] : r.directions) {
        out << d.name() << ',' << format_number(m.bleu) << ',' << format_number(m.off_target) << ','
            << format_number(m.token_off_target) << '\n';
    }
    return out.str();
}

/// Share of pairs whose LangID head, run on teacher-forced decoder states,
/// predicts the pair's target language.
inline double tlp_accuracy(const Model& model, const std::vector<const ParallelPair*>& pairs, std::size_t chunk = 256) {
    if (pairs.empty()) throw std::invalid_argument("tlp_accuracy: no pairs");
    NoGradScope no_grad;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < pairs.size(); begin += chunk) {
        const std::size_t end = std::min(pairs.size(), begin + chunk);
        const std::vector<const ParallelPair*> part(pairs.begin() + static_cast<std::ptrdiff_t>(begin),
                                                    pairs.begin() + static_cast<std::ptrdiff_t>(end));
        const Batch batch = make_batch(model.vocab(), part);
        const Decoded dec = model.decode_teacher_forced(model.encode(batch.source), batch);
        const Tensor logits = model.tlp_logits(dec.states, dec.rows, dec.len, batch.tgt_valid);
        const std::size_t k = logits.dim(1);
        const auto v = logits.values();
        for (std::size_t r = 0; r < part.size(); ++r) {
            const auto row = v.subspan(r * k, k);
            const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
            correct += best + 1 == part[r]->tgt_lang;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

}  // namespace zsmt
