#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsmt/model/transformer.hpp"
#include "zsmt/train/adam.hpp"

namespace zsmt {

inline constexpr char kCheckpointMagic[8] = {'Z', 'S', 'M', 'T', 'C', 'K', 'P', 'T'};

/// Fields that determine parameter shapes and the forward computation's structure.
inline bool same_architecture(const ModelConfig& a, const ModelConfig& b) {
    return a.num_languages == b.num_languages && a.concepts == b.concepts && a.d_model == b.d_model &&
           a.n_heads == b.n_heads && a.enc_layers == b.enc_layers && a.dec_layers == b.dec_layers &&
           a.ffn_dim == b.ffn_dim && a.max_len == b.max_len && a.tlp_layers == b.tlp_layers &&
           a.tlp_mode == b.tlp_mode && a.activation == b.activation;
}

struct Checkpoint {
    ModelConfig config;
    ParamStore params;
    std::optional<AdamState> optimizer;
    nlohmann::json metadata = nlohmann::json::object();
};

/// Layout: 8-byte magic, u64 header length, JSON header, then raw doubles
/// (parameters in path order, followed by Adam m and v when present).
inline void save_checkpoint(const std::filesystem::path& file, const ModelConfig& config, const ParamStore& params,
                            const AdamState* optimizer = nullptr,
                            const nlohmann::json& metadata = nlohmann::json::object()) {
    nlohmann::json header;
    header["format"] = 1;
    header["config"] = config;
    header["metadata"] = metadata;
    std::vector<double> payload;
    auto entries = nlohmann::json::array();
    for (const auto& [path, t] : params) {
        entries.push_back({{"path", path}, {"shape", t.shape()}, {"offset", payload.size()}});
        payload.insert(payload.end(), t.values().begin(), t.values().end());
    }
    header["params"] = entries;
    if (optimizer != nullptr) {
        header["optimizer"] = {{"step", optimizer->step}, {"moments", !optimizer->m.empty()}};
        if (!optimizer->m.empty()) {
            for (const auto* moments : {&optimizer->m, &optimizer->v}) {
                for (const auto& [path, t] : params) {
                    const auto& mv = moments->at(path);
                    if (mv.size() != t.size()) throw std::invalid_argument("save_checkpoint: moment size differs at " + path);
                    payload.insert(payload.end(), mv.begin(), mv.end());
                }
            }
        }
    }
    const std::string text = header.dump();
    std::filesystem::create_directories(file.parent_path().empty() ? "." : file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + file.string());
    const std::uint64_t len = text.size();
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write to checkpoint " + file.string());
}

inline void save_checkpoint(const std::filesystem::path& file, const Model& model, const AdamState* optimizer = nullptr,
                            const nlohmann::json& metadata = nlohmann::json::object()) {
    save_checkpoint(file, model.config(), model.params(), optimizer, metadata);
}

inline Checkpoint read_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + file.string());
    char magic[8];
    std::uint64_t len = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
        throw std::runtime_error(file.string() + " is not a checkpoint");
    }
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    const auto header = nlohmann::json::parse(text);
    Checkpoint ck;
    ck.config = header.at("config").get<ModelConfig>();
    ck.metadata = header.value("metadata", nlohmann::json::object());
    std::size_t total = 0;
    for (const auto& e : header.at("params")) total += numel(e.at("shape").get<Shape>());
    const bool moments = header.contains("optimizer") && header["optimizer"].value("moments", false);
    std::vector<double> payload(moments ? 3 * total : total);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint " + file.string() + " is truncated");
    for (const auto& e : header.at("params")) {
        const auto shape = e.at("shape").get<Shape>();
        const auto offset = e.at("offset").get<std::size_t>();
        const auto n = numel(shape);
        ck.params.add(e.at("path").get<std::string>(),
                      Tensor(shape, std::vector<double>(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                                                        payload.begin() + static_cast<std::ptrdiff_t>(offset + n))));
    }
    if (header.contains("optimizer")) {
        AdamState st;
        st.step = header["optimizer"].at("step").get<long>();
        if (moments) {
            std::size_t pos = total;
            for (auto* dst : {&st.m, &st.v}) {
                for (const auto& [path, t] : ck.params) {
                    dst->emplace(path, std::vector<double>(payload.begin() + static_cast<std::ptrdiff_t>(pos),
                                                           payload.begin() + static_cast<std::ptrdiff_t>(pos + t.size())));
                    pos += t.size();
                }
            }
        }
        ck.optimizer = std::move(st);
    }
    return ck;
}

/// Copies checkpoint parameters into `model`; the architectures must match.
inline Checkpoint load_checkpoint(const std::filesystem::path& file, Model& model) {
    Checkpoint ck = read_checkpoint(file);
    if (!same_architecture(ck.config, model.config())) {
        throw std::invalid_argument("checkpoint " + file.string() + " was written for a different model config: " +
                                    nlohmann::json(ck.config).dump() + " vs " + nlohmann::json(model.config()).dump());
    }
    model.params().assign(ck.params);
    return ck;
}

}  // namespace zsmt
