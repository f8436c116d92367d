#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zsmt/harness/experiment.hpp"
#include "zsmt/harness/sweep.hpp"

namespace {

using namespace zsmt;

struct Common {
    std::string config;
    std::string out;
    int steps = 0;
    int pretrain_steps = -1;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "Experiment spec (JSON)")->check(CLI::ExistingFile);
    app->add_option("--out", c.out, "Output root (default $ZSMT_OUTPUT_ROOT or ./zsmt_out)");
    app->add_option("--steps", c.steps, "Override total training steps")->check(CLI::PositiveNumber);
    app->add_option("--pretrain-steps", c.pretrain_steps, "Override the branch point step")->check(CLI::NonNegativeNumber);
    app->add_option("--train-seed", c.seed, "Override the training seed");
}

ExperimentSpec make_spec(const Common& c) {
    ExperimentSpec spec = c.config.empty() ? ExperimentSpec{} : load_spec(c.config);
    if (!c.out.empty()) spec.output_dir = c.out;
    if (c.steps > 0) spec.train.total_steps = c.steps;
    if (c.pretrain_steps >= 0) spec.train.pretrain_steps_before_tgp = c.pretrain_steps;
    if (c.seed != 0) spec.train.seed = c.seed;
    spec.validate();
    return spec;
}

std::string summary(const MetricsReport& r) {
    std::ostringstream s;
    for (const auto& [name, agg] : {std::pair{"from_hub", r.from_hub}, std::pair{"to_hub", r.to_hub},
                                    std::pair{"zero_shot", r.zero_shot}}) {
        if (agg) s << ' ' << name << " bleu=" << format_number(agg->bleu, 2) << " off=" << format_number(agg->off_target, 3);
    }
    return s.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot multilingual translation experiments on synthetic languages"};
    app.require_subcommand(1);

    Common gen_c;
    int langs = 0, concepts = 0;
    std::uint64_t data_seed = 0;
    std::string data_dir;
    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus");
    add_common(gen, gen_c);
    gen->add_option("--langs", langs, "Number of languages K")->check(CLI::Range(2, 64));
    gen->add_option("--concepts", concepts, "Concepts per language C")->check(CLI::PositiveNumber);
    gen->add_option("--seed", data_seed, "Data seed");
    gen->add_option("--data-dir", data_dir, "Write the corpus here instead of the run directory");

    Common train_c;
    std::string mode_s, pretrained;
    auto* trn = app.add_subcommand("train", "Train one mode");
    add_common(trn, train_c);
    trn->add_option("--mode", mode_s, "BASELINE, FINETUNE, TLP, TGP, TLP_TGP, TGP_ZEROSHOT or TLP_TGP_ZEROSHOT")->required();
    trn->add_option("--pretrained", pretrained, "Baseline snapshot for TGP-family and FINETUNE modes")
        ->check(CLI::ExistingFile);

    Common eval_c;
    std::string checkpoint;
    int beam = 0;
    bool pivot = false;
    auto* evl = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test set");
    add_common(evl, eval_c);
    evl->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    evl->add_option("--beam", beam, "Beam size")->check(CLI::PositiveNumber);
    evl->add_flag("--pivot", pivot, "Translate zero-shot directions through the hub");

    Common sweep_c;
    std::string kind;
    std::size_t trials = 10000;
    auto* swp = app.add_subcommand("sweep", "Run a desk-scale sweep");
    add_common(swp, sweep_c);
    swp->add_option("--kind", kind, "tlp, granularity or sensitivity")
        ->required()
        ->check(CLI::IsMember({"tlp", "granularity", "sensitivity"}));
    swp->add_option("--trials", trials, "Sentences per grid point (sensitivity)")->check(CLI::PositiveNumber);

    Common exp_c;
    std::vector<std::string> modes;
    bool dump = false;
    auto* exp = app.add_subcommand("experiment", "Run the full mode grid");
    add_common(exp, exp_c);
    exp->add_option("--modes", modes, "Subset of modes")->delimiter(',');
    exp->add_flag("--dump-config", dump, "Print the effective spec and exit");

    std::string run_dir;
    auto* rep = app.add_subcommand("report", "Rebuild tables of a finished experiment");
    rep->add_option("--run", run_dir, "Run directory (<out>/<hash>)")->required()->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) {
            ExperimentSpec spec = make_spec(gen_c);
            if (langs > 0) spec.data.num_languages = spec.model.num_languages = langs;
            if (concepts > 0) spec.data.concepts = spec.model.concepts = concepts;
            if (data_seed != 0) spec.data.seed = data_seed;
            spec.eval_directions.clear();
            spec.validate();
            const Dataset ds = generate_dataset(spec.data);
            const std::filesystem::path dir =
                data_dir.empty() ? OutputLayout::for_spec(spec).data() / "corpus" : std::filesystem::path(data_dir);
            write_dataset(ds, dir);
            std::size_t pairs = 0;
            for (const auto* c : {&ds.train, &ds.dev, &ds.test}) {
                for (const auto& [_, v] : c->directions) pairs += v.size();
            }
            std::cout << "gen-data: " << pairs << " pairs, K=" << spec.data.num_languages << ", hash " << tree_hash(dir)
                      << " -> " << dir.string() << '\n';
        } else if (trn->parsed()) {
            const ExperimentSpec spec = make_spec(train_c);
            const ExperimentMode mode = parse_mode(mode_s);
            const bool branch = branches_from_pretrained(train_mode(mode));
            if (branch && pretrained.empty()) throw std::invalid_argument("mode " + mode_s + " requires --pretrained");
            if (!branch && !pretrained.empty()) throw std::invalid_argument("mode " + mode_s + " trains from scratch; drop --pretrained");
            const Workspace ws = prepare_workspace(spec);
            std::optional<Snapshot> pre;
            std::string hash;
            if (branch) {
                pre = load_snapshot(pretrained);
                hash = git_blob_hash_file(pretrained);
            }
            ModeOutcome out = run_mode(ws, mode, spec.train, spec.model, pre ? &*pre : nullptr, hash, mode_s, &std::cerr);
            if (out.branch_point && mode == ExperimentMode::baseline) {
                save_checkpoint(ws.layout.checkpoints() / "pretrained.ckpt", spec.model, out.branch_point->params,
                                &out.branch_point->optimizer, {{"mode", "BASELINE"}, {"step", out.branch_point->step}});
            }
            if (out.record.diverged()) {
                std::cout << "train " << mode_s << ": Diverged\n";
                return 2;
            }
            std::cout << "train " << mode_s << ": best step " << out.record.best_step << ", checkpoint "
                      << (ws.layout.root / out.record.checkpoint).string() << summary(*out.record.report) << '\n';
        } else if (evl->parsed()) {
            ExperimentSpec spec = make_spec(eval_c);
            if (beam > 0) spec.eval.beam.beam_size = beam;
            spec.eval.pivot = pivot;
            const Workspace ws = prepare_workspace(spec);
            const Checkpoint ck = read_checkpoint(checkpoint);
            Model model(ck.config);
            model.params().assign(ck.params);
            const Evaluation ev = evaluate_all(model, ws.dataset.test, spec.directions(), spec.eval);
            const std::string stem = "eval_" + std::filesystem::path(checkpoint).stem().string() + (pivot ? "_pivot" : "");
            detail::write_text(ws.layout.reports() / (stem + ".json"), to_json(ev.report).dump(2) + "\n");
            detail::write_text(ws.layout.reports() / (stem + ".csv"), metrics_csv(ev.report));
            std::cout << "evaluate:" << summary(ev.report) << " -> " << (ws.layout.reports() / (stem + ".csv")).string()
                      << '\n';
        } else if (swp->parsed()) {
            const ExperimentSpec spec = make_spec(sweep_c);
            const auto root = OutputLayout::for_spec(spec).reports();
            if (kind == "tlp") {
                const auto rows = tlp_sweep(spec, {0.1, 0.2, 0.3}, {TlpMode::meanpool, TlpMode::cls_token}, &std::cerr);
                std::cout << "sweep tlp: " << rows.size() << " runs -> " << (root / "sweep_tlp.csv").string() << '\n';
            } else if (kind == "granularity") {
                const auto rows = granularity_sweep(spec, &std::cerr);
                std::cout << "sweep granularity: " << rows.size() << " runs -> " << (root / "sweep_granularity.csv").string()
                          << '\n';
            } else {
                std::vector<double> grid;
                for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
                const auto pts = sensitivity_curve(spec, grid, trials, spec.data.seed);
                std::cout << "sweep sensitivity: " << pts.size() << " points -> " << (root / "sensitivity.csv").string()
                          << '\n';
            }
        } else if (exp->parsed()) {
            ExperimentSpec spec = make_spec(exp_c);
            if (!modes.empty()) {
                spec.modes.clear();
                for (const auto& m : modes) spec.modes.push_back(parse_mode(m));
                spec.validate();
            }
            if (dump) {
                std::cout << spec_document(spec).dump(2) << '\n';
                return 0;
            }
            const RunRecord run = run_experiment(spec, &std::cerr);
            std::cout << "experiment: " << run.modes.size() << " modes in " << format_number(run.seconds, 1) << "s -> "
                      << run.root << "/reports\n";
        } else if (rep->parsed()) {
            const RunRecord run = load_run_record(run_dir);
            const ExperimentSpec spec = load_spec(std::filesystem::path(run_dir) / "spec.json");
            const auto derived = rederive_reports(run_dir, spec.data.vocab(), spec.eval.langid_threshold);
            for (const auto& m : run.modes) {
                if (m.diverged()) continue;
                if (!(derived.at(m.mode) == *m.report)) {
                    throw std::runtime_error("report for " + mode_name(m.mode) + " differs from its per-sentence results");
                }
            }
            const auto files = emit_comparison_tables(run, std::filesystem::path(run_dir) / "reports");
            std::cout << metrics_long_csv(run);
            std::cerr << "report: " << run.modes.size() << " modes x " << run.directions.size() << " directions, "
                      << files.size() << " files rewritten\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
