#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "zsmt/eval/sensitivity.hpp"
#include "zsmt/harness/experiment.hpp"

namespace zsmt {

struct SweepRow {
    std::string label;
    /// Empty when the run diverged.
    std::optional<MetricsReport> report;
    std::optional<double> langid_accuracy;
};

/// Columns: label, average BLEU over all evaluated directions, hub-centric and
/// zero-shot averages, zero-shot off-target rate.
inline std::vector<std::vector<std::string>> sweep_cells(const std::vector<SweepRow>& rows) {
    std::vector<std::vector<std::string>> cells{
        {"run", "avg_bleu", "hub_bleu", "zero_shot_bleu", "zero_shot_off_target", "langid_accuracy"}};
    for (const auto& r : rows) {
        if (!r.report) {
            cells.push_back({r.label, "Diverged", "Diverged", "Diverged", "Diverged", "Diverged"});
            continue;
        }
        std::vector<Direction> all, hub;
        for (const auto& [d, _] : r.report->directions) {
            all.push_back(d);
            if (classify(d) != DirectionClass::zero_shot) hub.push_back(d);
        }
        auto cell = [](const std::optional<double>& v, int digits) { return v ? format_number(*v, digits) : std::string("-"); };
        std::optional<double> zs_bleu, zs_off;
        if (r.report->zero_shot) {
            zs_bleu = r.report->zero_shot->bleu;
            zs_off = r.report->zero_shot->off_target;
        }
        cells.push_back({r.label, format_number(r.report->average(all).bleu, 2),
                         hub.empty() ? "-" : format_number(r.report->average(hub).bleu, 2), cell(zs_bleu, 2),
                         cell(zs_off, 4), cell(r.langid_accuracy, 4)});
    }
    return cells;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    for (const auto& row : sweep_cells(rows)) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
    return out.str();
}

inline void write_sweep(const Workspace& ws, const std::string& stem, const std::vector<SweepRow>& rows) {
    detail::write_text(ws.layout.reports() / (stem + ".csv"), sweep_csv(rows));
    detail::write_text(ws.layout.reports() / (stem + ".txt"), aligned_text(sweep_cells(rows)));
}

/// TLP from scratch over alpha x pooling mode.
inline std::vector<SweepRow> tlp_sweep(const ExperimentSpec& spec, const std::vector<double>& alphas,
                                       const std::vector<TlpMode>& modes, std::ostream* progress = nullptr) {
    const Workspace ws = prepare_workspace(spec);
    std::vector<SweepRow> rows;
    for (TlpMode tm : modes) {
        for (double a : alphas) {
            ModelConfig mc = spec.model;
            mc.tlp_mode = tm;
            mc.tlp_alpha = a;
            const std::string label = "TLP_" + nlohmann::json(tm).get<std::string>() + "_a" + format_number(a, 2);
            ModeOutcome out = detail::run_stage("sweep " + label, [&] {
                return run_mode(ws, ExperimentMode::tlp, spec.train, mc, nullptr, "", "sweep_" + label, progress);
            });
            rows.push_back({label, out.record.diverged() ? std::nullopt : out.record.report, out.record.langid_accuracy});
        }
    }
    write_sweep(ws, "sweep_tlp", rows);
    return rows;
}

/// Baseline snapshot at the branch point, reused from disk when present.
inline Snapshot pretrained_snapshot(const Workspace& ws, std::string& hash, std::ostream* progress) {
    const auto file = ws.layout.checkpoints() / "pretrained.ckpt";
    if (!std::filesystem::exists(file)) {
        ModeOutcome base = detail::run_stage("train BASELINE", [&] {
            return run_mode(ws, ExperimentMode::baseline, ws.spec.train, ws.spec.model, nullptr, "", "BASELINE", progress);
        });
        if (!base.branch_point) throw std::runtime_error("baseline diverged before the branch point");
        save_checkpoint(file, ws.spec.model, base.branch_point->params, &base.branch_point->optimizer,
                        {{"mode", "BASELINE"}, {"step", base.branch_point->step}});
    }
    hash = git_blob_hash_file(file);
    return load_snapshot(file);
}

/// TGP from the shared baseline snapshot at each projection granularity.
inline std::vector<SweepRow> granularity_sweep(const ExperimentSpec& spec, std::ostream* progress = nullptr) {
    const Workspace ws = prepare_workspace(spec);
    std::string hash;
    const Snapshot pre = pretrained_snapshot(ws, hash, progress);
    std::vector<SweepRow> rows;
    for (Granularity g : {Granularity::model_wise, Granularity::layer_wise, Granularity::matrix_wise}) {
        TrainConfig tc = spec.train;
        tc.tgp_granularity = g;
        const std::string label = "TGP_" + nlohmann::json(g).get<std::string>();
        ModeOutcome out = detail::run_stage("sweep " + label, [&] {
            return run_mode(ws, ExperimentMode::tgp, tc, spec.model, &pre, hash, "sweep_" + label, progress);
        });
        rows.push_back({label, out.record.diverged() ? std::nullopt : out.record.report, std::nullopt});
    }
    write_sweep(ws, "sweep_granularity", rows);
    return rows;
}

/// Off-target rate of test references under random cross-language token noise.
inline std::vector<SensitivityPoint> sensitivity_curve(const ExperimentSpec& spec, const std::vector<double>& grid,
                                                       std::size_t trials, std::uint64_t seed) {
    const Workspace ws = prepare_workspace(spec);
    std::vector<SensitivityReference> refs;
    for (const auto& [d, pairs] : ws.dataset.test.directions) {
        for (const auto& p : pairs) refs.push_back({p.tgt, d.tgt});
    }
    const auto points = sensitivity_sweep(spec.data.vocab(), refs, grid, trials, seed, spec.eval.langid_threshold);
    std::ostringstream csv;
    csv << "p,rate\n";
    for (const auto& pt : points) csv << format_number(pt.p, 4) << ',' << format_number(pt.rate, 6) << '\n';
    detail::write_text(ws.layout.reports() / "sensitivity.csv", csv.str());
    return points;
}

}  // namespace zsmt
