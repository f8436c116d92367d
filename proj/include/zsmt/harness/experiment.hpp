#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsmt/data/oracle.hpp"
#include "zsmt/harness/spec.hpp"
#include "zsmt/harness/tables.hpp"
#include "zsmt/model/checkpoint.hpp"
#include "zsmt/train/trainer.hpp"

namespace zsmt {

struct ModeRecord {
    ExperimentMode mode = ExperimentMode::baseline;
    /// "ok" or "diverged".
    std::string status = "ok";
    std::string error;
    /// Paths are relative to the run root.
    std::string checkpoint;
    std::string checkpoint_hash;
    std::string pretrained_hash;
    std::optional<MetricsReport> report;
    std::optional<double> langid_accuracy;
    long best_step = 0;
    long final_step = 0;
    double best_dev_bleu = 0.0;
    int oracle_refreshes = 0;
    double projected_fraction = 0.0;
    double seconds = 0.0;

    bool diverged() const { return status != "ok"; }
};

inline void to_json(nlohmann::json& j, const ModeRecord& r) {
    j = {{"mode", r.mode},
         {"status", r.status},
         {"error", r.error},
         {"checkpoint", r.checkpoint},
         {"checkpoint_hash", r.checkpoint_hash},
         {"pretrained_hash", r.pretrained_hash},
         {"report", r.report ? to_json(*r.report) : nlohmann::json(nullptr)},
         {"langid_accuracy", r.langid_accuracy ? nlohmann::json(*r.langid_accuracy) : nlohmann::json(nullptr)},
         {"best_step", r.best_step},
         {"final_step", r.final_step},
         {"best_dev_bleu", r.best_dev_bleu},
         {"oracle_refreshes", r.oracle_refreshes},
         {"projected_fraction", r.projected_fraction},
         {"seconds", r.seconds}};
}

inline void from_json(const nlohmann::json& j, ModeRecord& r) {
    r.mode = j.at("mode").get<ExperimentMode>();
    r.status = j.at("status").get<std::string>();
    r.error = j.value("error", "");
    r.checkpoint = j.value("checkpoint", "");
    r.checkpoint_hash = j.value("checkpoint_hash", "");
    r.pretrained_hash = j.value("pretrained_hash", "");
    if (!j.at("report").is_null()) r.report = report_from_json(j["report"]);
    if (j.contains("langid_accuracy") && !j["langid_accuracy"].is_null()) r.langid_accuracy = j["langid_accuracy"].get<double>();
    r.best_step = j.value("best_step", 0L);
    r.final_step = j.value("final_step", 0L);
    r.best_dev_bleu = j.value("best_dev_bleu", 0.0);
    r.oracle_refreshes = j.value("oracle_refreshes", 0);
    r.projected_fraction = j.value("projected_fraction", 0.0);
    r.seconds = j.value("seconds", 0.0);
}

struct RunRecord {
    std::string spec_hash;
    std::string data_hash;
    /// Hash over the spec and the generated data together.
    std::string input_hash;
    std::string root;
    std::string pretrained_checkpoint;
    std::string pretrained_hash;
    std::vector<std::string> directions;
    std::vector<std::string> zero_shot_oracle_excluded;
    std::vector<ModeRecord> modes;
    double seconds = 0.0;

    const ModeRecord& at(ExperimentMode m) const {
        for (const auto& r : modes) {
            if (r.mode == m) return r;
        }
        throw std::out_of_range("run record has no mode " + mode_name(m));
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RunRecord, spec_hash, data_hash, input_hash, root, pretrained_checkpoint,
                                   pretrained_hash, directions, zero_shot_oracle_excluded, modes, seconds)

struct Workspace {
    ExperimentSpec spec;
    OutputLayout layout;
    Dataset dataset;
    OracleSplit full;
    OracleSplit zero_shot;
    std::string data_hash;
};

namespace detail {

template <class F>
auto run_stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw std::runtime_error("stage '" + name + "' failed: " + e.what());
    }
}

inline void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
}

inline void say(std::ostream* out, const std::string& line) {
    if (out != nullptr) *out << line << '\n' << std::flush;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Generates the corpus and both oracle splits and writes them under data/.
inline Workspace prepare_workspace(const ExperimentSpec& spec) {
    spec.validate();
    Workspace ws{spec, OutputLayout::for_spec(spec), {}, {}, {}, {}};
    ws.layout.create();
    detail::run_stage("data", [&] {
        ws.dataset = generate_dataset(spec.data);
        const auto corpus_dir = ws.layout.data() / "corpus";
        std::filesystem::remove_all(corpus_dir);
        write_dataset(ws.dataset, corpus_dir);
        ws.data_hash = tree_hash(corpus_dir);
        for (auto d : spec.directions()) {
            if (!ws.dataset.test.directions.count(d)) throw std::invalid_argument("no test data for " + d.name());
        }
        return 0;
    });
    detail::run_stage("oracle", [&] {
        ws.full = build_oracle_set(ws.dataset.dev, spec.oracle_split_fraction, {}, spec.oracle_seed);
        ws.zero_shot = build_oracle_set(ws.dataset.dev, spec.oracle_split_fraction, spec.zero_shot_excluded(), spec.oracle_seed);
        for (const auto& [_, pairs] : ws.zero_shot.oracle.by_target) {
            for (const auto& p : pairs) {
                if (spec.zero_shot_excluded().count(p.direction())) {
                    throw std::logic_error("zero-shot oracle contains excluded direction " + p.direction().name());
                }
            }
        }
        for (const auto& [name, split] : {std::pair<const char*, const OracleSplit*>{"oracle_full", &ws.full},
                                          {"oracle_zeroshot", &ws.zero_shot}}) {
            std::filesystem::remove_all(ws.layout.data() / name);
            write_corpus(detail::oracle_as_corpus(split->oracle), ws.layout.data() / name);
        }
        write_corpus(ws.full.checkpoint_dev, ws.layout.data() / "checkpoint_dev");
        return 0;
    });
    detail::write_text(ws.layout.root / "spec.json", spec_document(spec).dump(2) + "\n");
    return ws;
}

inline Snapshot load_snapshot(const std::filesystem::path& file) {
    Checkpoint ck = read_checkpoint(file);
    if (!ck.optimizer) throw std::runtime_error(file.string() + " carries no optimizer state");
    return Snapshot{ck.metadata.at("step").get<long>(), std::move(ck.params), std::move(*ck.optimizer)};
}

struct ModeOutcome {
    ModeRecord record;
    std::optional<Snapshot> branch_point;
};

/// Trains one mode, saves its checkpoint and log, evaluates it on the test set.
/// Divergence is recorded rather than thrown.
inline ModeOutcome run_mode(const Workspace& ws, ExperimentMode mode, TrainConfig tc, const ModelConfig& mc,
                            const Snapshot* pretrained, const std::string& pretrained_hash, const std::string& tag,
                            std::ostream* progress) {
    const auto t0 = std::chrono::steady_clock::now();
    ModeOutcome out;
    ModeRecord& rec = out.record;
    rec.mode = mode;
    tc.mode = train_mode(mode);
    if (branches_from_pretrained(tc.mode)) rec.pretrained_hash = pretrained_hash;
    const OracleSet& oracle = uses_zeroshot_oracle(mode) ? ws.zero_shot.oracle : ws.full.oracle;
    Model model(mc);
    std::ofstream log(ws.layout.logs() / (tag + ".jsonl"), std::ios::binary);
    TrainResult tr;
    try {
        tr = train(model, tc, {&ws.dataset.train, &oracle, &ws.full.checkpoint_dev, pretrained}, &log);
    } catch (const DivergenceError& e) {
        rec.status = "diverged";
        rec.error = e.what();
        rec.seconds = detail::seconds_since(t0);
        detail::say(progress, tag + ": Diverged (" + rec.error + ")");
        return out;
    }
    out.branch_point = std::move(tr.branch_point);
    rec.best_step = tr.best_step;
    rec.final_step = tr.final_step;
    rec.best_dev_bleu = tr.best_dev_bleu;
    rec.oracle_refreshes = tr.oracle_refreshes;
    rec.projected_fraction =
        tr.total_units ? static_cast<double>(tr.projected_units) / static_cast<double>(tr.total_units) : 0.0;
    const auto ck = ws.layout.checkpoints() / (tag + ".ckpt");
    save_checkpoint(ck, model, &tr.optimizer,
                    {{"mode", mode_name(mode)}, {"step", tr.best_step}, {"pretrained_hash", rec.pretrained_hash}});
    rec.checkpoint = std::filesystem::relative(ck, ws.layout.root).generic_string();
    rec.checkpoint_hash = git_blob_hash_file(ck);

    const Evaluation ev = evaluate_all(model, ws.dataset.test, ws.spec.directions(), ws.spec.eval);
    rec.report = ev.report;
    std::ofstream results(ws.layout.logs() / (tag + ".results.jsonl"), std::ios::binary);
    for (const auto& [d, rs] : ev.results) {
        for (const auto& r : rs) results << nlohmann::json{{"direction", d.name()}, {"result", r}}.dump() << '\n';
    }
    detail::write_text(ws.layout.reports() / (tag + ".json"), to_json(ev.report).dump(2) + "\n");
    if (uses_tlp(tc.mode)) {
        std::vector<const ParallelPair*> supervised;
        for (const auto& [d, pairs] : ws.dataset.test.directions) {
            if (classify(d) == DirectionClass::zero_shot) continue;
            for (const auto& p : pairs) supervised.push_back(&p);
        }
        rec.langid_accuracy = tlp_accuracy(model, supervised);
    }
    rec.seconds = detail::seconds_since(t0);
    std::string line = tag + ": " + std::to_string(rec.seconds) + "s";
    if (ev.report.zero_shot) line += " zero-shot BLEU " + format_number(ev.report.zero_shot->bleu, 2) +
                                     " off-target " + format_number(ev.report.zero_shot->off_target, 3);
    detail::say(progress, line);
    return out;
}

inline std::vector<TableRow> table_rows(const RunRecord& run) {
    std::vector<TableRow> rows;
    for (const auto& m : run.modes) rows.push_back({mode_name(m.mode), m.diverged() ? std::nullopt : m.report});
    return rows;
}

/// Long-format metrics: one row per (mode, direction).
inline std::string metrics_long_csv(const RunRecord& run) {
    std::ostringstream out;
    out << "mode,direction,bleu,off_target,token_off_target\n";
    for (const auto& m : run.modes) {
        for (const auto& name : run.directions) {
            out << mode_name(m.mode) << ',' << name << ',';
            if (m.diverged() || !m.report) {
                out << "Diverged,Diverged,Diverged\n";
                continue;
            }
            const auto& dm = m.report->directions.at(parse_direction(name));
            out << format_number(dm.bleu, 6) << ',' << format_number(dm.off_target, 6) << ','
                << format_number(dm.token_off_target, 6) << '\n';
        }
    }
    return out.str();
}

/// Writes zero-shot, from-hub and to-hub comparison tables (CSV and aligned
/// text) plus the long metrics CSV; returns the files written.
inline std::vector<std::filesystem::path> emit_comparison_tables(const RunRecord& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::map<DirectionClass, std::vector<Direction>> groups;
    for (const auto& name : run.directions) {
        const Direction d = parse_direction(name);
        groups[classify(d)].push_back(d);
    }
    std::vector<std::filesystem::path> files;
    const auto rows = table_rows(run);
    for (const auto& [cls, stem] : {std::pair{DirectionClass::zero_shot, "zero_shot"},
                                    std::pair{DirectionClass::from_hub, "from_hub"},
                                    std::pair{DirectionClass::to_hub, "to_hub"}}) {
        auto it = groups.find(cls);
        if (it == groups.end()) continue;
        const ComparisonTable t = comparison_table(rows, it->second);
        detail::write_text(dir / (std::string(stem) + ".csv"), table_csv(t));
        detail::write_text(dir / (std::string(stem) + ".txt"), table_text(t));
        files.push_back(dir / (std::string(stem) + ".csv"));
        files.push_back(dir / (std::string(stem) + ".txt"));
    }
    detail::write_text(dir / "metrics.csv", metrics_long_csv(run));
    files.push_back(dir / "metrics.csv");
    return files;
}

/// Trains the baseline (when needed) and every requested mode, branching the
/// TGP family and FINETUNE from one saved baseline snapshot.
inline RunRecord run_experiment(const ExperimentSpec& spec, std::ostream* progress = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    const Workspace ws = prepare_workspace(spec);
    RunRecord run;
    run.spec_hash = spec_hash(spec);
    run.data_hash = ws.data_hash;
    run.input_hash = git_blob_hash(run.spec_hash + "\n" + run.data_hash + "\n");
    run.root = ws.layout.root.string();
    for (auto d : spec.directions()) run.directions.push_back(d.name());
    for (auto d : spec.zero_shot_excluded()) run.zero_shot_oracle_excluded.push_back(d.name());
    detail::say(progress, "output " + run.root);

    auto requested = [&](ExperimentMode m) { return std::find(spec.modes.begin(), spec.modes.end(), m) != spec.modes.end(); };
    bool need_pretrained = false;
    for (auto m : spec.modes) need_pretrained |= branches_from_pretrained(train_mode(m));

    std::map<ExperimentMode, ModeRecord> done;
    std::optional<Snapshot> pretrained;
    if (requested(ExperimentMode::baseline) || need_pretrained) {
        ModeOutcome base = detail::run_stage("train BASELINE", [&] {
            return run_mode(ws, ExperimentMode::baseline, spec.train, spec.model, nullptr, "", "BASELINE", progress);
        });
        if (need_pretrained && base.branch_point) {
            const auto file = ws.layout.checkpoints() / "pretrained.ckpt";
            save_checkpoint(file, spec.model, base.branch_point->params, &base.branch_point->optimizer,
                            {{"mode", "BASELINE"}, {"step", base.branch_point->step}});
            run.pretrained_checkpoint = std::filesystem::relative(file, ws.layout.root).generic_string();
            run.pretrained_hash = git_blob_hash_file(file);
            pretrained = load_snapshot(file);
        }
        done.emplace(ExperimentMode::baseline, std::move(base.record));
    }
    for (auto m : all_modes()) {
        if (m == ExperimentMode::baseline || !requested(m)) continue;
        const bool branch = branches_from_pretrained(train_mode(m));
        if (branch && !pretrained) {
            ModeRecord r;
            r.mode = m;
            r.status = "diverged";
            r.error = "baseline diverged before the branch point";
            done.emplace(m, std::move(r));
            continue;
        }
        ModeOutcome out = detail::run_stage("train " + mode_name(m), [&] {
            return run_mode(ws, m, spec.train, spec.model, branch ? &*pretrained : nullptr, run.pretrained_hash,
                            mode_name(m), progress);
        });
        done.emplace(m, std::move(out.record));
    }
    for (auto m : all_modes()) {
        if (requested(m)) run.modes.push_back(done.at(m));
    }
    run.seconds = detail::seconds_since(t0);
    detail::run_stage("report", [&] {
        emit_comparison_tables(run, ws.layout.reports());
        detail::write_text(ws.layout.reports() / "run_record.json", nlohmann::json(run).dump(2) + "\n");
        return 0;
    });
    return run;
}

inline RunRecord load_run_record(const std::filesystem::path& root) {
    return nlohmann::json::parse(read_file(root / "reports" / "run_record.json")).get<RunRecord>();
}

/// Re-scores every mode from its logged per-sentence results.
inline std::map<ExperimentMode, MetricsReport> rederive_reports(const std::filesystem::path& root, const Vocab& vocab,
                                                                double langid_threshold) {
    const RunRecord run = load_run_record(root);
    std::map<ExperimentMode, MetricsReport> out;
    for (const auto& m : run.modes) {
        if (m.diverged()) continue;
        std::map<Direction, std::vector<TranslationResult>> results;
        std::ifstream in(root / "logs" / (mode_name(m.mode) + ".results.jsonl"));
        if (!in) throw std::runtime_error("no per-sentence results for " + mode_name(m.mode));
        for (std::string line; std::getline(in, line);) {
            const auto j = nlohmann::json::parse(line);
            results[parse_direction(j.at("direction").get<std::string>())].push_back(j.at("result").get<TranslationResult>());
        }
        MetricsReport r;
        for (const auto& [d, rs] : results) r.directions[d] = score_direction(vocab, rs, langid_threshold);
        r.recompute_aggregates();
        out.emplace(m.mode, std::move(r));
    }
    return out;
}

}  // namespace zsmt
