#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsmt/data/oracle.hpp"
#include "zsmt/data/sampling.hpp"
#include "zsmt/model/transformer.hpp"
#include "zsmt/train/adam.hpp"
#include "zsmt/train/projection.hpp"

namespace zsmt {

class DivergenceError : public std::runtime_error {
   public:
    DivergenceError(long step, const std::string& what)
        : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
    long step() const { return step_; }

   private:
    long step_;
};

struct LossValues {
    double total = 0.0;
    double nmt = 0.0;
    double tlp = 0.0;

    LossValues& operator+=(const LossValues& o) {
        total += o.total;
        nmt += o.nmt;
        tlp += o.tlp;
        return *this;
    }
};

/// Gradient of the loss on `pairs`, normalised by externally supplied counts so
/// that per-group gradients of one step add up to the whole-step gradient.
/// NMT token cross-entropy is divided by `token_norm` (mean reduction) and the
/// TLP sentence cross-entropy by `sentence_norm`.
inline GradientMap group_gradient(const Model& model, const std::vector<const ParallelPair*>& pairs, bool with_tlp,
                                  double token_norm, double sentence_norm, LossValues* values = nullptr) {
    const Batch batch = make_batch(model.vocab(), pairs);
    Tape tape;
    TapeScope scope(tape);
    const Encoded enc = model.encode(batch.source);
    const Decoded dec = model.decode_teacher_forced(enc, batch);
    const bool mean = model.config().reduction == ops::Reduction::mean;
    Tensor nmt = ops::cross_entropy(dec.logits, batch.dec_out, batch.tgt_valid, ops::Reduction::sum);
    if (mean) nmt = ops::scale(nmt, 1.0 / token_norm);
    Tensor total = nmt;
    Tensor tlp;
    if (with_tlp) {
        tlp = model.tlp_loss(dec.states, dec.rows, dec.len, batch.tgt_valid, batch.tgt_lang);
        tlp = ops::scale(tlp, static_cast<double>(batch.size()) / sentence_norm);
        total = joint_loss(nmt, tlp, model.config().tlp_alpha);
    }
    if (values != nullptr) {
        values->total = total.item();
        values->nmt = nmt.item();
        values->tlp = with_tlp ? tlp.item() : 0.0;
    }
    return backward(tape, total, model.params());
}

/// Per-target-language gradients of one sampled step, keyed in language order.
inline std::map<int, GradientMap> grouped_gradients(const Model& model, const BatchGroups& groups, bool with_tlp,
                                                    LossValues* values = nullptr) {
    double tokens = 0.0, sentences = 0.0;
    for (const auto& [_, pairs] : groups) {
        for (const auto* p : pairs) tokens += static_cast<double>(p->tgt.size() + 1);
        sentences += static_cast<double>(pairs.size());
    }
    std::map<int, GradientMap> out;
    LossValues sum;
    for (const auto& [lang, pairs] : groups) {
        LossValues v;
        out.emplace(lang, group_gradient(model, pairs, with_tlp, tokens, sentences, &v));
        sum += v;
    }
    if (values != nullptr) *values = sum;
    return out;
}

inline GradientMap sum_gradients(const Model& model, const std::map<int, GradientMap>& grads) {
    GradientMap total = zeros_like(model.params());
    for (const auto& [_, g] : grads) accumulate(total, g);
    return total;
}

struct OracleGradientCache {
    Granularity granularity = Granularity::model_wise;
    std::map<int, UnitGradients> by_lang;
    long computed_at_step = -1;
};

/// g_oracle^i: sum over the language's oracle batches of each batch's mean-loss gradient.
inline OracleGradientCache refresh_oracle_gradients(const Model& model, const OracleSet& oracle, bool with_tlp,
                                                    std::size_t batch_tokens, Granularity granularity, long step) {
    OracleGradientCache cache;
    cache.granularity = granularity;
    cache.computed_at_step = step;
    for (const auto& [lang, pairs] : oracle.by_target) {
        if (pairs.empty()) throw std::invalid_argument("oracle set has no pairs for target language " + std::to_string(lang));
        std::vector<const ParallelPair*> ptrs;
        for (const auto& p : pairs) ptrs.push_back(&p);
        GradientMap total = zeros_like(model.params());
        for (const auto& chunk : chunk_by_tokens(ptrs, batch_tokens)) {
            double tokens = 0.0;
            for (const auto* p : chunk) tokens += static_cast<double>(p->tgt.size() + 1);
            accumulate(total, group_gradient(model, chunk, with_tlp, tokens, static_cast<double>(chunk.size())));
        }
        cache.by_lang.emplace(lang, split_units(total, granularity));
    }
    return cache;
}

struct TgpStepReport {
    /// dot(g_train, g_oracle) per language and unit, before and after projection;
    /// train_norm is taken before projection.
    std::map<int, std::map<std::string, double>> dot_before;
    std::map<int, std::map<std::string, double>> dot_after;
    std::map<int, std::map<std::string, double>> train_norm;
    std::map<int, std::map<std::string, double>> oracle_norm;
    std::size_t projected_units = 0;
    std::size_t total_units = 0;
    GradientMap applied;
};

/// Projects every language's gradient against its cached oracle gradient, unit
/// by unit, and returns the summed update. Does not touch the parameters.
inline TgpStepReport tgp_project(const Model& model, const std::map<int, GradientMap>& grads,
                                 const OracleGradientCache& cache) {
    TgpStepReport report;
    report.applied = zeros_like(model.params());
    for (const auto& [lang, g] : grads) {
        auto it = cache.by_lang.find(lang);
        if (it == cache.by_lang.end()) {
            throw std::invalid_argument("tgp: no oracle gradient for target language " + std::to_string(lang));
        }
        UnitGradients units = split_units(g, cache.granularity);
        for (auto& [unit, vec] : units) {
            const auto& o = it->second.at(unit);
            report.train_norm[lang][unit] = norm(vec);
            const ProjectionOutcome out = project_in_place(vec, o);
            report.dot_before[lang][unit] = out.dot_before;
            report.dot_after[lang][unit] = out.projected ? dot(vec, o) : out.dot_before;
            report.oracle_norm[lang][unit] = norm(o);
            report.projected_units += out.projected;
            ++report.total_units;
        }
        accumulate(report.applied, merge_units(units, g, cache.granularity));
    }
    return report;
}

/// One step of target-gradient projection followed by one optimizer update.
inline TgpStepReport tgp_step(Model& model, const BatchGroups& groups, const OracleGradientCache& cache, bool with_tlp,
                              Adam& adam, LossValues* values = nullptr) {
    LossValues v;
    const auto grads = grouped_gradients(model, groups, with_tlp, &v);
    if (!std::isfinite(v.total)) throw DivergenceError(adam.step() + 1, "non-finite loss");
    TgpStepReport report = tgp_project(model, grads, cache);
    adam.apply(model.params(), report.applied);
    if (values != nullptr) *values = v;
    return report;
}

}  // namespace zsmt
