#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "zsmt/model/vocab.hpp"
#include "zsmt/tensor/ops.hpp"

namespace zsmt {

enum class TlpMode { meanpool, cls_token };
enum class Activation { gelu, relu };

NLOHMANN_JSON_SERIALIZE_ENUM(TlpMode, {{TlpMode::meanpool, "MEANPOOL"}, {TlpMode::cls_token, "CLS_TOKEN"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Activation, {{Activation::gelu, "GELU"}, {Activation::relu, "RELU"}})

}  // namespace zsmt

namespace zsmt::ops {
NLOHMANN_JSON_SERIALIZE_ENUM(Reduction, {{Reduction::mean, "MEAN"}, {Reduction::sum, "SUM"}})
}

namespace zsmt {

struct ModelConfig {
    int num_languages = 4;
    int concepts = 30;
    int d_model = 64;
    int n_heads = 4;
    int enc_layers = 2;
    int dec_layers = 2;
    int ffn_dim = 128;
    int max_len = 32;
    int tlp_layers = 2;
    TlpMode tlp_mode = TlpMode::meanpool;
    double tlp_alpha = 0.3;
    bool tlp_stop_gradient = false;
    Activation activation = Activation::gelu;
    ops::Reduction reduction = ops::Reduction::mean;
    std::uint64_t init_seed = 1;

    Vocab vocab() const { return Vocab{num_languages, concepts}; }
    int vocab_size() const { return vocab().size(); }

    void validate() const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("ModelConfig: " + m); };
        if (num_languages < 2) fail("num_languages must be >= 2");
        if (concepts < 1) fail("concepts must be >= 1");
        if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
        if (enc_layers < 1 || dec_layers < 1 || tlp_layers < 1) fail("layer counts must be >= 1");
        if (ffn_dim < 1) fail("ffn_dim must be >= 1");
        if (max_len < 3) fail("max_len must be >= 3");
        if (!(tlp_alpha >= 0.0 && tlp_alpha < 1.0)) fail("tlp_alpha must lie in [0, 1)");
    }

    bool operator==(const ModelConfig&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, num_languages, concepts, d_model, n_heads, enc_layers,
                                                dec_layers, ffn_dim, max_len, tlp_layers, tlp_mode, tlp_alpha,
                                                tlp_stop_gradient, activation, reduction, init_seed)

/// L = (1 - alpha) * nmt + alpha * tlp.
inline double joint_loss(double nmt, double tlp, double alpha) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("joint_loss: alpha must lie in [0, 1)");
    return (1.0 - alpha) * nmt + alpha * tlp;
}

inline Tensor joint_loss(const Tensor& nmt, const Tensor& tlp, double alpha) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("joint_loss: alpha must lie in [0, 1)");
    return ops::add(ops::scale(nmt, 1.0 - alpha), ops::scale(tlp, alpha));
}

}  // namespace zsmt
