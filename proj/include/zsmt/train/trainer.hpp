#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsmt/data/oracle.hpp"
#include "zsmt/data/sampling.hpp"
#include "zsmt/eval/metrics.hpp"
#include "zsmt/model/checkpoint.hpp"
#include "zsmt/train/tgp.hpp"

namespace zsmt {

enum class TrainMode { baseline, tlp, tgp, tlp_tgp, finetune };

NLOHMANN_JSON_SERIALIZE_ENUM(TrainMode, {{TrainMode::baseline, "BASELINE"},
                                         {TrainMode::tlp, "TLP"},
                                         {TrainMode::tgp, "TGP"},
                                         {TrainMode::tlp_tgp, "TLP_TGP"},
                                         {TrainMode::finetune, "FINETUNE"}})

inline std::string mode_name(TrainMode m) { return nlohmann::json(m).get<std::string>(); }

inline bool uses_tlp(TrainMode m) { return m == TrainMode::tlp || m == TrainMode::tlp_tgp; }
inline bool uses_tgp(TrainMode m) { return m == TrainMode::tgp || m == TrainMode::tlp_tgp; }
inline bool branches_from_pretrained(TrainMode m) { return uses_tgp(m) || m == TrainMode::finetune; }

struct TrainConfig {
    TrainMode mode = TrainMode::baseline;
    /// From-scratch modes run total_steps; branch modes continue a checkpoint
    /// taken at pretrain_steps_before_tgp up to total_steps.
    int total_steps = 2500;
    int pretrain_steps_before_tgp = 2000;
    AdamConfig adam;
    double tau = 5.0;
    double finetune_tau = 1.0;
    int tgp_update_frequency = 50;
    Granularity tgp_granularity = Granularity::model_wise;
    std::uint64_t seed = 1;
    std::size_t batch_tokens = 400;
    std::size_t oracle_batch_tokens = 4000;
    int eval_interval = 250;
    bool carry_optimizer_state = true;
    bool select_best_checkpoint = true;
    EvalConfig dev_eval{BeamConfig{1, 1.0, 0, 512}, 0.5, 0, false};

    int run_steps() const {
        return branches_from_pretrained(mode) ? total_steps - pretrain_steps_before_tgp : total_steps;
    }

    void validate() const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("TrainConfig: " + m); };
        if (total_steps < 1) fail("total_steps must be >= 1");
        if (pretrain_steps_before_tgp < 0 || pretrain_steps_before_tgp > total_steps) {
            fail("pretrain_steps_before_tgp must lie in [0, total_steps]");
        }
        if (tgp_update_frequency < 1) fail("tgp_update_frequency must be >= 1");
        if (batch_tokens < 1 || oracle_batch_tokens < 1) fail("batch sizes must be positive");
        if (eval_interval < 1) fail("eval_interval must be >= 1");
        if (!(tau >= 1.0) || !(finetune_tau >= 1.0)) fail("temperatures must be >= 1");
    }

    bool operator==(const TrainConfig&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, mode, total_steps, pretrain_steps_before_tgp, adam, tau,
                                                finetune_tau, tgp_update_frequency, tgp_granularity, seed,
                                                batch_tokens, oracle_batch_tokens, eval_interval,
                                                carry_optimizer_state, select_best_checkpoint, dev_eval)

struct LogRecord {
    long step = 0;
    std::string mode;
    double train_loss = 0.0;
    double nmt_loss = 0.0;
    double tlp_loss = 0.0;
    double dev_bleu = 0.0;
    std::map<std::string, double> dev_bleu_by_direction;
    std::map<std::string, double> off_target_rate_by_direction;
    double projected_fraction = 0.0;
    double seconds = 0.0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LogRecord, step, mode, train_loss, nmt_loss, tlp_loss, dev_bleu,
                                   dev_bleu_by_direction, off_target_rate_by_direction, projected_fraction, seconds)

/// Parameters and optimizer state at a given global step.
struct Snapshot {
    long step = 0;
    ParamStore params;
    AdamState optimizer;
};

struct TrainInputs {
    const Corpus* train = nullptr;
    const OracleSet* oracle = nullptr;
    const Corpus* checkpoint_dev = nullptr;
    /// Required for TGP-family and FINETUNE modes.
    const Snapshot* pretrained = nullptr;
};

struct TrainResult {
    std::vector<LogRecord> log;
    long final_step = 0;
    long best_step = 0;
    double best_dev_bleu = -1.0;
    int oracle_refreshes = 0;
    std::size_t projected_units = 0;
    std::size_t total_units = 0;
    AdamState optimizer;
    /// Taken at pretrain_steps_before_tgp in from-scratch modes.
    std::optional<Snapshot> branch_point;
    double seconds = 0.0;
};

namespace detail {

inline Corpus oracle_as_corpus(const OracleSet& oracle) {
    Corpus c;
    for (const auto& [_, pairs] : oracle.by_target) {
        for (const auto& p : pairs) c.directions[p.direction()].push_back(p);
    }
    return c;
}

}  // namespace detail

/// Runs one training mode on `model` in place. On return the model holds the
/// best dev checkpoint (or the last one when selection is off).
inline TrainResult train(Model& model, const TrainConfig& cfg, const TrainInputs& in, std::ostream* log_out = nullptr) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    if (in.train == nullptr || in.checkpoint_dev == nullptr) throw std::invalid_argument("train: missing corpora");
    const bool tgp = uses_tgp(cfg.mode);
    const bool tlp = uses_tlp(cfg.mode);
    if ((tgp || cfg.mode == TrainMode::finetune) && in.oracle == nullptr) {
        throw std::invalid_argument("train: mode " + mode_name(cfg.mode) + " needs an oracle set");
    }

    Adam adam(cfg.adam);
    long step0 = 0;
    if (branches_from_pretrained(cfg.mode)) {
        if (in.pretrained == nullptr) {
            throw std::invalid_argument("train: mode " + mode_name(cfg.mode) + " needs a pretrained checkpoint");
        }
        model.params().assign(in.pretrained->params);
        step0 = in.pretrained->step;
        if (cfg.carry_optimizer_state) adam.state() = in.pretrained->optimizer;
    }

    Corpus finetune_data;
    const Corpus* source = in.train;
    double tau = cfg.tau;
    if (cfg.mode == TrainMode::finetune) {
        finetune_data = detail::oracle_as_corpus(*in.oracle);
        source = &finetune_data;
        tau = cfg.finetune_tau;
    }
    BatchStream stream(*source, tau, cfg.batch_tokens, derive_seed(cfg.seed, static_cast<std::uint64_t>(step0) + 17));

    TrainResult result;
    ParamStore best = model.params().clone();
    std::vector<Direction> dev_dirs = in.checkpoint_dev->keys();
    OracleGradientCache cache;
    LossValues window;
    std::size_t window_steps = 0, window_projected = 0, window_units = 0;
    const int steps = cfg.run_steps();
    if (!branches_from_pretrained(cfg.mode) && cfg.pretrain_steps_before_tgp == 0) {
        result.branch_point = Snapshot{0, model.params().clone(), adam.state()};
    }

    for (int k = 0; k < steps; ++k) {
        const long global = step0 + k + 1;
        if (tgp && k % cfg.tgp_update_frequency == 0) {
            cache = refresh_oracle_gradients(model, *in.oracle, tlp, cfg.oracle_batch_tokens, cfg.tgp_granularity, global - 1);
            ++result.oracle_refreshes;
        }
        const BatchGroups groups = stream.next();
        LossValues v;
        try {
            if (tgp) {
                const TgpStepReport rep = tgp_step(model, groups, cache, tlp, adam, &v);
                window_projected += rep.projected_units;
                window_units += rep.total_units;
                result.projected_units += rep.projected_units;
                result.total_units += rep.total_units;
            } else {
                const auto grads = grouped_gradients(model, groups, tlp, &v);
                if (!std::isfinite(v.total)) throw DivergenceError(global, "non-finite loss");
                adam.apply(model.params(), sum_gradients(model, grads));
            }
        } catch (const NonFiniteGradient& e) {
            throw DivergenceError(global, e.what());
        }
        window += v;
        ++window_steps;

        if (!branches_from_pretrained(cfg.mode) && global == cfg.pretrain_steps_before_tgp) {
            result.branch_point = Snapshot{global, model.params().clone(), adam.state()};
        }
        if (k + 1 == steps || (k + 1) % cfg.eval_interval == 0) {
            const Evaluation ev = evaluate_all(model, *in.checkpoint_dev, dev_dirs, cfg.dev_eval);
            LogRecord rec;
            rec.step = global;
            rec.mode = mode_name(cfg.mode);
            const double w = static_cast<double>(window_steps);
            rec.train_loss = window.total / w;
            rec.nmt_loss = window.nmt / w;
            rec.tlp_loss = window.tlp / w;
            double sum = 0.0;
            for (const auto& [d, m] : ev.report.directions) {
                rec.dev_bleu_by_direction[d.name()] = m.bleu;
                rec.off_target_rate_by_direction[d.name()] = m.off_target;
                sum += m.bleu;
            }
            rec.dev_bleu = sum / static_cast<double>(ev.report.directions.size());
            rec.projected_fraction = window_units ? static_cast<double>(window_projected) / static_cast<double>(window_units) : 0.0;
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (rec.dev_bleu > result.best_dev_bleu) {
                result.best_dev_bleu = rec.dev_bleu;
                result.best_step = global;
                best.assign(model.params());
            }
            if (log_out != nullptr) *log_out << nlohmann::json(rec).dump() << '\n' << std::flush;
            result.log.push_back(std::move(rec));
            window = {};
            window_steps = window_projected = window_units = 0;
        }
    }
    result.final_step = step0 + steps;
    result.optimizer = adam.state();
    if (cfg.select_best_checkpoint) model.params().assign(best);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace zsmt
