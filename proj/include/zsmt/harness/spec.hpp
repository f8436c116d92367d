#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsmt/data/corpus.hpp"
#include "zsmt/eval/metrics.hpp"
#include "zsmt/model/config.hpp"
#include "zsmt/train/trainer.hpp"
#include "zsmt/util/hash.hpp"

namespace zsmt {

enum class ExperimentMode { baseline, finetune, tlp, tgp, tlp_tgp, tgp_zeroshot, tlp_tgp_zeroshot };

NLOHMANN_JSON_SERIALIZE_ENUM(ExperimentMode, {{ExperimentMode::baseline, "BASELINE"},
                                              {ExperimentMode::finetune, "FINETUNE"},
                                              {ExperimentMode::tlp, "TLP"},
                                              {ExperimentMode::tgp, "TGP"},
                                              {ExperimentMode::tlp_tgp, "TLP_TGP"},
                                              {ExperimentMode::tgp_zeroshot, "TGP_ZEROSHOT"},
                                              {ExperimentMode::tlp_tgp_zeroshot, "TLP_TGP_ZEROSHOT"}})

inline const std::vector<ExperimentMode>& all_modes() {
    static const std::vector<ExperimentMode> modes{ExperimentMode::baseline,     ExperimentMode::finetune,
                                                   ExperimentMode::tlp,          ExperimentMode::tgp,
                                                   ExperimentMode::tlp_tgp,      ExperimentMode::tgp_zeroshot,
                                                   ExperimentMode::tlp_tgp_zeroshot};
    return modes;
}

inline std::string mode_name(ExperimentMode m) { return nlohmann::json(m).get<std::string>(); }

inline ExperimentMode parse_mode(const std::string& name) {
    for (auto m : all_modes()) {
        if (mode_name(m) == name) return m;
    }
    throw std::invalid_argument("unknown mode '" + name + "'");
}

inline TrainMode train_mode(ExperimentMode m) {
    switch (m) {
        case ExperimentMode::baseline: return TrainMode::baseline;
        case ExperimentMode::finetune: return TrainMode::finetune;
        case ExperimentMode::tlp: return TrainMode::tlp;
        case ExperimentMode::tgp:
        case ExperimentMode::tgp_zeroshot: return TrainMode::tgp;
        case ExperimentMode::tlp_tgp:
        case ExperimentMode::tlp_tgp_zeroshot: return TrainMode::tlp_tgp;
    }
    throw std::logic_error("train_mode: bad mode");
}

inline bool uses_zeroshot_oracle(ExperimentMode m) {
    return m == ExperimentMode::tgp_zeroshot || m == ExperimentMode::tlp_tgp_zeroshot;
}

/// Non-hub cycle 2->3->...->K->2: one evaluated zero-shot direction per target language.
inline std::vector<Direction> default_zero_shot_directions(int num_languages) {
    std::vector<Direction> out;
    if (num_languages < 3) return out;
    for (int j = 2; j <= num_languages; ++j) out.push_back({j, j == num_languages ? 2 : j + 1});
    return out;
}

inline std::vector<Direction> default_eval_directions(int num_languages) {
    std::vector<Direction> out;
    for (int j = 2; j <= num_languages; ++j) out.push_back({1, j});
    for (int j = 2; j <= num_languages; ++j) out.push_back({j, 1});
    for (auto d : default_zero_shot_directions(num_languages)) out.push_back(d);
    return out;
}

/// Full-scale values next to the desk-scale ones actually used; informational only.
struct HyperparameterRow {
    std::string name;
    std::string full_scale;
    std::string desk_scale;
};

struct ExperimentSpec {
    DataConfig data;
    ModelConfig model;
    TrainConfig train;
    std::vector<ExperimentMode> modes = all_modes();
    std::vector<std::string> eval_directions;
    double oracle_split_fraction = 0.8;
    std::uint64_t oracle_seed = 11;
    EvalConfig eval{BeamConfig{5, 1.0, 0, 512}, 0.5, 0, false};
    /// Empty: $ZSMT_OUTPUT_ROOT, else "zsmt_out".
    std::string output_dir;

    std::vector<Direction> directions() const {
        if (eval_directions.empty()) return default_eval_directions(data.num_languages);
        std::vector<Direction> out;
        for (const auto& s : eval_directions) out.push_back(parse_direction(s));
        return out;
    }

    /// Directions held out of the zero-shot oracle: every evaluated non-hub pair.
    std::set<Direction> zero_shot_excluded() const {
        std::set<Direction> out;
        for (auto d : directions()) {
            if (classify(d) == DirectionClass::zero_shot) out.insert(d);
        }
        return out;
    }

    void validate() const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("ExperimentSpec: " + m); };
        data.validate();
        model.validate();
        train.validate();
        if (model.num_languages != data.num_languages || model.concepts != data.concepts) {
            fail("model and data disagree on num_languages/concepts");
        }
        if (data.max_len + 2 > model.max_len) fail("model.max_len must be >= data.max_len + 2");
        if (modes.empty()) fail("mode matrix is empty");
        if (std::set<ExperimentMode>(modes.begin(), modes.end()).size() != modes.size()) fail("duplicate modes");
        if (!(oracle_split_fraction > 0.0 && oracle_split_fraction < 1.0)) fail("oracle_split_fraction must lie in (0, 1)");
        const auto dirs = directions();
        if (dirs.empty()) fail("no evaluation directions");
        if (std::set<Direction>(dirs.begin(), dirs.end()).size() != dirs.size()) fail("duplicate evaluation directions");
        for (auto d : dirs) {
            if (d.src == d.tgt || d.src < 1 || d.tgt < 1 || d.src > data.num_languages || d.tgt > data.num_languages) {
                fail("bad evaluation direction " + d.name());
            }
        }
        const bool zs = std::any_of(modes.begin(), modes.end(), uses_zeroshot_oracle);
        if (zs && zero_shot_excluded().empty()) fail("zero-shot oracle modes need at least one evaluated non-hub pair");
    }

    std::vector<HyperparameterRow> hyperparameters() const {
        auto num = [](double v) {
            std::ostringstream s;
            s << v;
            return s.str();
        };
        return {
            {"tlp_alpha", "0.3", num(model.tlp_alpha)},
            {"tlp_mode", "MEANPOOL", nlohmann::json(model.tlp_mode).get<std::string>()},
            {"tau", "5", num(train.tau)},
            {"tgp_update_frequency", "200", std::to_string(train.tgp_update_frequency)},
            {"tgp_granularity", "MODEL_WISE", nlohmann::json(train.tgp_granularity).get<std::string>()},
            {"oracle_split_fraction", "0.8", num(oracle_split_fraction)},
            {"beam", "5", std::to_string(eval.beam.beam_size)},
            {"length_penalty", "1.0", num(eval.beam.length_penalty)},
            {"lr", "0.0005", num(train.adam.lr)},
            {"warmup_steps", "4000", std::to_string(train.adam.warmup_steps)},
            {"pretrain_steps_before_tgp", "40000", std::to_string(train.pretrain_steps_before_tgp)},
            {"tgp_steps", "10000", std::to_string(train.total_steps - train.pretrain_steps_before_tgp)},
            {"batch_tokens", "65536", std::to_string(train.batch_tokens)},
            {"d_model", "1024", std::to_string(model.d_model)},
            {"layers", "6+6", std::to_string(model.enc_layers) + "+" + std::to_string(model.dec_layers)},
            {"tlp_layers", "2", std::to_string(model.tlp_layers)},
        };
    }

    bool operator==(const ExperimentSpec&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentSpec, data, model, train, modes, eval_directions,
                                                oracle_split_fraction, oracle_seed, eval, output_dir)

/// Spec document with a read-only table of full-scale values for reference.
inline nlohmann::json spec_document(const ExperimentSpec& spec) {
    nlohmann::json j = spec;
    for (const auto& row : spec.hyperparameters()) {
        j["reference"][row.name] = {{"full_scale", row.full_scale}, {"desk_scale", row.desk_scale}};
    }
    return j;
}

inline ExperimentSpec parse_spec(const nlohmann::json& j) {
    nlohmann::json body = j;
    body.erase("reference");
    ExperimentSpec spec = body.get<ExperimentSpec>();
    spec.validate();
    return spec;
}

inline ExperimentSpec load_spec(const std::filesystem::path& file) {
    return parse_spec(nlohmann::json::parse(read_file(file)));
}

/// Hash of every field that influences results; the output location is excluded.
inline std::string spec_hash(const ExperimentSpec& spec) {
    nlohmann::json j = spec;
    j.erase("output_dir");
    return git_blob_hash(j.dump());
}

inline std::filesystem::path output_root(const ExperimentSpec& spec) {
    if (!spec.output_dir.empty()) return spec.output_dir;
    if (const char* env = std::getenv("ZSMT_OUTPUT_ROOT"); env != nullptr && *env != '\0') return env;
    return "zsmt_out";
}

struct OutputLayout {
    std::filesystem::path root;

    static OutputLayout for_spec(const ExperimentSpec& spec) {
        return {output_root(spec) / spec_hash(spec).substr(0, 12)};
    }

    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    std::filesystem::path logs() const { return root / "logs"; }
    std::filesystem::path reports() const { return root / "reports"; }

    void create() const {
        for (const auto& d : {data(), checkpoints(), logs(), reports()}) std::filesystem::create_directories(d);
    }
};

/// Git-style tree hash: blob hashes of every regular file, keyed by relative path.
inline std::string tree_hash(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string listing;
    for (const auto& f : files) {
        listing += git_blob_hash_file(f) + ' ' + std::filesystem::relative(f, dir).generic_string() + '\n';
    }
    return git_blob_hash(listing);
}

}  // namespace zsmt
