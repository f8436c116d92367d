#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsmt/model/batch.hpp"
#include "zsmt/model/config.hpp"
#include "zsmt/tensor/ops.hpp"
#include "zsmt/tensor/param_store.hpp"
#include "zsmt/util/rng.hpp"

namespace zsmt {

inline constexpr double kMaskedLogit = -1e9;

namespace nn {

inline void init_linear(ParamStore& p, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                        const std::string& w = "w", const std::string& b = "b") {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> values(in * out);
    for (auto& v : values) v = rng.uniform(-limit, limit);
    p.add(prefix + "/" + w, Tensor({in, out}, std::move(values)));
    p.add(prefix + "/" + b, Tensor::zeros({out}));
}

inline void init_norm(ParamStore& p, const std::string& prefix, std::size_t d) {
    p.add(prefix + "/gamma", Tensor::filled({d}, 1.0));
    p.add(prefix + "/beta", Tensor::zeros({d}));
}

inline void init_attention(ParamStore& p, const std::string& prefix, std::size_t d, Rng& rng) {
    for (const char* m : {"q", "k", "v", "o"}) init_linear(p, prefix, d, d, rng, std::string("w") + m, std::string("b") + m);
}

inline void init_ffn(ParamStore& p, const std::string& prefix, std::size_t d, std::size_t hidden, Rng& rng) {
    init_linear(p, prefix, d, hidden, rng, "w1", "b1");
    init_linear(p, prefix, hidden, d, rng, "w2", "b2");
}

inline Tensor linear(const ParamStore& p, const std::string& w, const std::string& b, const Tensor& x) {
    return ops::add(ops::matmul(x, p.at(w)), p.at(b));
}

inline Tensor norm(const ParamStore& p, const std::string& prefix, const Tensor& x) {
    return ops::layer_norm(x, p.at(prefix + "/gamma"), p.at(prefix + "/beta"));
}

inline Tensor ffn(const ParamStore& p, const std::string& prefix, const Tensor& x, Activation act) {
    Tensor h = linear(p, prefix + "/w1", prefix + "/b1", x);
    h = act == Activation::gelu ? ops::gelu(h) : ops::relu(h);
    return linear(p, prefix + "/w2", prefix + "/b2", h);
}

/// [B*T, d] -> [B, H, T, d/H]
inline Tensor split_heads(const Tensor& x, std::size_t batch, std::size_t len, std::size_t heads) {
    const std::size_t dh = x.dim(1) / heads;
    return ops::transpose(ops::reshape(x, {batch, len, heads, dh}), {0, 2, 1, 3});
}

/// [B, H, T, dh] -> [B*T, H*dh]
inline Tensor merge_heads(const Tensor& x) {
    const std::size_t batch = x.dim(0), heads = x.dim(1), len = x.dim(2), dh = x.dim(3);
    return ops::reshape(ops::transpose(x, {0, 2, 1, 3}), {batch * len, heads * dh});
}

/// Scaled dot-product attention over pre-split heads. `mask` is additive, [B, H, T, S].
inline Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& mask) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(q.dim(3)));
    Tensor scores = ops::scale(ops::matmul(q, ops::transpose(k)), inv);
    if (mask.defined()) scores = ops::add(scores, mask);
    return ops::matmul(ops::softmax(scores), v);
}

inline Tensor attention(const ParamStore& p, const std::string& prefix, const Tensor& query, const Tensor& memory,
                        std::size_t batch, std::size_t tq, std::size_t tk, std::size_t heads, const Tensor& mask) {
    Tensor q = split_heads(linear(p, prefix + "/wq", prefix + "/bq", query), batch, tq, heads);
    Tensor k = split_heads(linear(p, prefix + "/wk", prefix + "/bk", memory), batch, tk, heads);
    Tensor v = split_heads(linear(p, prefix + "/wv", prefix + "/bv", memory), batch, tk, heads);
    return linear(p, prefix + "/wo", prefix + "/bo", merge_heads(attend(q, k, v, mask)));
}

/// Additive mask [B, H, T, S]: key padding from `key_valid` ([B*S]) plus an optional causal constraint.
inline Tensor attention_mask(std::size_t batch, std::size_t heads, std::size_t tq, std::size_t tk,
                             std::span<const std::uint8_t> key_valid, bool causal) {
    std::vector<double> m(batch * heads * tq * tk, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < tq; ++i) {
            double* row = m.data() + (b * heads * tq + i) * tk;
            for (std::size_t j = 0; j < tk; ++j) {
                if (!key_valid[b * tk + j] || (causal && j > i)) row[j] = kMaskedLogit;
            }
            for (std::size_t h = 1; h < heads; ++h) std::copy_n(row, tk, row + h * tq * tk);
        }
    }
    return Tensor({batch, heads, tq, tk}, std::move(m));
}

inline Tensor sinusoidal_table(std::size_t rows, std::size_t d) {
    std::vector<double> pe(rows * d);
    for (std::size_t pos = 0; pos < rows; ++pos) {
        for (std::size_t i = 0; i < d; i += 2) {
            const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            pe[pos * d + i] = std::sin(angle);
            if (i + 1 < d) pe[pos * d + i + 1] = std::cos(angle);
        }
    }
    return Tensor({rows, d}, std::move(pe));
}

/// Pre-norm encoder stack over [B*S, d] rows, with a final layer norm.
inline Tensor encoder_stack(const ParamStore& p, const std::string& prefix, int layers, Tensor x, std::size_t batch,
                            std::size_t len, std::size_t heads, const Tensor& mask, Activation act) {
    for (int l = 0; l < layers; ++l) {
        const std::string base = prefix + "/layer" + std::to_string(l);
        Tensor h = norm(p, base + "/norm1", x);
        x = ops::add(x, attention(p, base + "/self_attn", h, h, batch, len, len, heads, mask));
        x = ops::add(x, ffn(p, base + "/ffn", norm(p, base + "/norm2", x), act));
    }
    return norm(p, prefix + "/final_norm", x);
}

inline void init_encoder_stack(ParamStore& p, const std::string& prefix, int layers, std::size_t d,
                               std::size_t hidden, Rng& rng) {
    for (int l = 0; l < layers; ++l) {
        const std::string base = prefix + "/layer" + std::to_string(l);
        init_norm(p, base + "/norm1", d);
        init_attention(p, base + "/self_attn", d, rng);
        init_norm(p, base + "/norm2", d);
        init_ffn(p, base + "/ffn", d, hidden, rng);
    }
    init_norm(p, prefix + "/final_norm", d);
}

}  // namespace nn

struct Encoded {
    Tensor states;  // [B*S, d]
    std::size_t rows = 0;
    std::size_t len = 0;
    std::vector<std::uint8_t> valid;
};

struct Decoded {
    Tensor logits;  // [B*T, V]
    Tensor states;  // topmost decoder states z, [B*T, d]
    std::size_t rows = 0;
    std::size_t len = 0;
};

struct Losses {
    Tensor total;
    Tensor nmt;
    Tensor tlp;  // undefined when the TLP term is off
};

/// Incremental decoding cache for N parallel hypotheses.
struct DecodeState {
    std::size_t rows = 0;
    std::size_t src_len = 0;
    std::size_t position = 0;
    std::vector<Tensor> self_k, self_v;    // per layer, [N, H, t, dh]
    std::vector<Tensor> cross_k, cross_v;  // per layer, [N, H, S, dh]
    Tensor cross_mask;                     // [N, H, 1, S]
};

/// Tagged encoder-decoder transformer with tied embeddings and a LangID head on
/// the decoder states.
class Model {
   public:
    explicit Model(ModelConfig config) : config_(std::move(config)) {
        config_.validate();
        const auto d = static_cast<std::size_t>(config_.d_model);
        const auto hidden = static_cast<std::size_t>(config_.ffn_dim);
        const auto v = static_cast<std::size_t>(config_.vocab_size());
        Rng rng(config_.init_seed);
        const double emb_limit = std::sqrt(3.0 / static_cast<double>(d));
        std::vector<double> emb(v * d);
        for (auto& x : emb) x = rng.uniform(-emb_limit, emb_limit);
        params_.add("embed/tokens", Tensor({v, d}, std::move(emb)));
        nn::init_encoder_stack(params_, "encoder", config_.enc_layers, d, hidden, rng);
        for (int l = 0; l < config_.dec_layers; ++l) {
            const std::string base = "decoder/layer" + std::to_string(l);
            nn::init_norm(params_, base + "/norm1", d);
            nn::init_attention(params_, base + "/self_attn", d, rng);
            nn::init_norm(params_, base + "/norm2", d);
            nn::init_attention(params_, base + "/cross_attn", d, rng);
            nn::init_norm(params_, base + "/norm3", d);
            nn::init_ffn(params_, base + "/ffn", d, hidden, rng);
        }
        nn::init_norm(params_, "decoder/final_norm", d);
        nn::init_encoder_stack(params_, "langid", config_.tlp_layers, d, hidden, rng);
        if (config_.tlp_mode == TlpMode::cls_token) {
            std::vector<double> cls(d);
            for (auto& x : cls) x = rng.uniform(-emb_limit, emb_limit);
            params_.add("langid/cls", Tensor({1, d}, std::move(cls)));
        }
        nn::init_linear(params_, "langid/classifier", d, static_cast<std::size_t>(config_.num_languages), rng);
        positions_ = nn::sinusoidal_table(static_cast<std::size_t>(config_.max_len) + 1, d);
    }

    const ModelConfig& config() const { return config_; }
    Vocab vocab() const { return config_.vocab(); }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    Encoded encode(const SourceBatch& src) const {
        const Vocab voc = vocab();
        if (src.len > static_cast<std::size_t>(config_.max_len)) {
            throw std::invalid_argument("encode: source length " + std::to_string(src.len) + " exceeds max_len " +
                                        std::to_string(config_.max_len));
        }
        for (std::size_t r = 0; r < src.rows; ++r) {
            if (src.len == 0 || !src.valid[r * src.len] || voc.tag_language(src.ids[r * src.len]) == 0) {
                throw std::invalid_argument("encode: source row " + std::to_string(r) +
                                            " does not begin with a target-language tag");
            }
        }
        const std::size_t b = src.rows, s = src.len, h = heads();
        Tensor x = embed(src.ids, b, s, 0);
        Tensor mask = nn::attention_mask(b, h, s, s, src.valid, false);
        Encoded out;
        out.states = nn::encoder_stack(params_, "encoder", config_.enc_layers, x, b, s, h, mask, config_.activation);
        out.rows = b;
        out.len = s;
        out.valid = src.valid;
        return out;
    }

    /// Single tagged sequence; states are [L, d].
    Encoded encode(std::span<const int> tagged) const {
        return encode(make_source_batch({std::vector<int>(tagged.begin(), tagged.end())}));
    }

    Decoded decode_teacher_forced(const Encoded& enc, std::span<const int> dec_in, std::size_t tgt_len,
                                  std::span<const std::uint8_t> tgt_valid) const {
        if (tgt_len > static_cast<std::size_t>(config_.max_len)) {
            throw std::invalid_argument("decode: target length " + std::to_string(tgt_len) + " exceeds max_len " +
                                        std::to_string(config_.max_len));
        }
        const std::size_t b = enc.rows, t = tgt_len, s = enc.len, h = heads();
        if (dec_in.size() != b * t) throw ShapeError("decode", "decoder input does not match batch x length");
        Tensor x = embed(dec_in, b, t, 0);
        Tensor self_mask = nn::attention_mask(b, h, t, t, tgt_valid, true);
        Tensor cross_mask = cross_attention_mask(enc, t);
        for (int l = 0; l < config_.dec_layers; ++l) {
            const std::string base = "decoder/layer" + std::to_string(l);
            Tensor n1 = nn::norm(params_, base + "/norm1", x);
            x = ops::add(x, nn::attention(params_, base + "/self_attn", n1, n1, b, t, t, h, self_mask));
            Tensor n2 = nn::norm(params_, base + "/norm2", x);
            x = ops::add(x, nn::attention(params_, base + "/cross_attn", n2, enc.states, b, t, s, h, cross_mask));
            x = ops::add(x, nn::ffn(params_, base + "/ffn", nn::norm(params_, base + "/norm3", x), config_.activation));
        }
        Decoded out;
        out.states = nn::norm(params_, "decoder/final_norm", x);
        out.logits = ops::matmul(out.states, ops::transpose(params_.at("embed/tokens")));
        out.rows = b;
        out.len = t;
        return out;
    }

    Decoded decode_teacher_forced(const Encoded& enc, const Batch& batch) const {
        return decode_teacher_forced(enc, batch.dec_in, batch.tgt_len, batch.tgt_valid);
    }

    Tensor nmt_loss(const Decoded& dec, const Batch& batch) const {
        return ops::cross_entropy(dec.logits, batch.dec_out, batch.tgt_valid, config_.reduction);
    }

    /// LangID logits [B, K] from decoder states z ([B*T, d]); `valid` marks real target positions.
    Tensor tlp_logits(const Tensor& z, std::size_t rows, std::size_t len, std::span<const std::uint8_t> valid) const {
        const std::size_t d = static_cast<std::size_t>(config_.d_model), h = heads();
        Tensor states = config_.tlp_stop_gradient ? ops::detach(z) : z;
        states = ops::reshape(states, {rows, len, d});
        std::vector<std::uint8_t> key_valid(valid.begin(), valid.end());
        std::size_t width = len;
        if (config_.tlp_mode == TlpMode::cls_token) {
            Tensor cls = ops::matmul(Tensor::filled({rows, 1}, 1.0), params_.at("langid/cls"));
            states = ops::concat({ops::reshape(cls, {rows, 1, d}), states}, 1);
            width = len + 1;
            key_valid.assign(rows * width, 0);
            for (std::size_t r = 0; r < rows; ++r) {
                key_valid[r * width] = 1;
                std::copy_n(valid.begin() + static_cast<std::ptrdiff_t>(r * len), len,
                            key_valid.begin() + static_cast<std::ptrdiff_t>(r * width + 1));
            }
        }
        if (width > positions_.dim(0)) throw std::invalid_argument("tlp: sequence longer than positional table");
        states = ops::add(states, ops::slice(positions_, 0, 0, width));
        Tensor mask = nn::attention_mask(rows, h, width, width, key_valid, false);
        Tensor top = nn::encoder_stack(params_, "langid", config_.tlp_layers, ops::reshape(states, {rows * width, d}),
                                       rows, width, h, mask, config_.activation);
        Tensor pooled;
        if (config_.tlp_mode == TlpMode::meanpool) {
            std::vector<double> pool(rows * rows * width, 0.0);
            for (std::size_t r = 0; r < rows; ++r) {
                std::size_t count = 0;
                for (std::size_t i = 0; i < width; ++i) count += key_valid[r * width + i];
                if (count == 0) throw std::invalid_argument("tlp: empty decoder state sequence");
                for (std::size_t i = 0; i < width; ++i) {
                    if (key_valid[r * width + i]) pool[r * rows * width + r * width + i] = 1.0 / static_cast<double>(count);
                }
            }
            pooled = ops::matmul(Tensor({rows, rows * width}, std::move(pool)), top);
        } else {
            pooled = ops::reshape(ops::slice(ops::reshape(top, {rows, width, d}), 1, 0, 1), {rows, d});
        }
        return nn::linear(params_, "langid/classifier/w", "langid/classifier/b", pooled);
    }

    /// Cross-entropy of the LangID head against target languages (1-based).
    Tensor tlp_loss(const Tensor& z, std::size_t rows, std::size_t len, std::span<const std::uint8_t> valid,
                    std::span<const int> tgt_lang) const {
        const Vocab voc = vocab();
        std::vector<int> labels(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            voc.check_lang(tgt_lang[r]);
            labels[r] = tgt_lang[r] - 1;
        }
        std::vector<std::uint8_t> all(rows, 1);
        return ops::cross_entropy(tlp_logits(z, rows, len, valid), labels, all, ops::Reduction::mean);
    }

    /// NMT loss, plus the joint loss when `with_tlp` is set.
    Losses losses(const Batch& batch, bool with_tlp) const {
        Encoded enc = encode(batch.source);
        Decoded dec = decode_teacher_forced(enc, batch);
        Losses out;
        out.nmt = nmt_loss(dec, batch);
        out.total = out.nmt;
        if (with_tlp) {
            out.tlp = tlp_loss(dec.states, dec.rows, dec.len, batch.tgt_valid, batch.tgt_lang);
            out.total = joint_loss(out.nmt, out.tlp, config_.tlp_alpha);
        }
        return out;
    }

    DecodeState start_decode(const Encoded& enc) const {
        const std::size_t b = enc.rows, s = enc.len, h = heads();
        DecodeState st;
        st.rows = b;
        st.src_len = s;
        st.cross_mask = cross_attention_mask(enc, 1);
        for (int l = 0; l < config_.dec_layers; ++l) {
            const std::string base = "decoder/layer" + std::to_string(l) + "/cross_attn";
            st.cross_k.push_back(nn::split_heads(nn::linear(params_, base + "/wk", base + "/bk", enc.states), b, s, h));
            st.cross_v.push_back(nn::split_heads(nn::linear(params_, base + "/wv", base + "/bv", enc.states), b, s, h));
            st.self_k.emplace_back();
            st.self_v.emplace_back();
        }
        return st;
    }

    /// Feeds one token per row and returns next-token log-probabilities [N, V].
    Tensor decode_step(DecodeState& st, std::span<const int> tokens) const {
        if (tokens.size() != st.rows) throw ShapeError("decode_step", "one token per hypothesis required");
        if (st.position >= static_cast<std::size_t>(config_.max_len)) {
            throw std::invalid_argument("decode_step: exceeded max_len " + std::to_string(config_.max_len));
        }
        const std::size_t n = st.rows, h = heads();
        Tensor x = ops::reshape(embed(tokens, n, 1, st.position), {n, static_cast<std::size_t>(config_.d_model)});
        for (int l = 0; l < config_.dec_layers; ++l) {
            const auto li = static_cast<std::size_t>(l);
            const std::string base = "decoder/layer" + std::to_string(l);
            Tensor n1 = nn::norm(params_, base + "/norm1", x);
            const std::string sa = base + "/self_attn";
            Tensor q = nn::split_heads(nn::linear(params_, sa + "/wq", sa + "/bq", n1), n, 1, h);
            Tensor k = nn::split_heads(nn::linear(params_, sa + "/wk", sa + "/bk", n1), n, 1, h);
            Tensor v = nn::split_heads(nn::linear(params_, sa + "/wv", sa + "/bv", n1), n, 1, h);
            st.self_k[li] = st.self_k[li].defined() ? ops::concat({st.self_k[li], k}, 2) : k;
            st.self_v[li] = st.self_v[li].defined() ? ops::concat({st.self_v[li], v}, 2) : v;
            Tensor ctx = nn::attend(q, st.self_k[li], st.self_v[li], Tensor());
            x = ops::add(x, nn::linear(params_, sa + "/wo", sa + "/bo", nn::merge_heads(ctx)));
            const std::string ca = base + "/cross_attn";
            Tensor n2 = nn::norm(params_, base + "/norm2", x);
            Tensor cq = nn::split_heads(nn::linear(params_, ca + "/wq", ca + "/bq", n2), n, 1, h);
            Tensor cctx = nn::attend(cq, st.cross_k[li], st.cross_v[li], st.cross_mask);
            x = ops::add(x, nn::linear(params_, ca + "/wo", ca + "/bo", nn::merge_heads(cctx)));
            x = ops::add(x, nn::ffn(params_, base + "/ffn", nn::norm(params_, base + "/norm3", x), config_.activation));
        }
        ++st.position;
        Tensor z = nn::norm(params_, "decoder/final_norm", x);
        return ops::log_softmax(ops::matmul(z, ops::transpose(params_.at("embed/tokens"))));
    }

    /// Keeps the listed rows (in order) of every cache, e.g. after beam pruning.
    static void reorder(DecodeState& st, std::span<const std::size_t> rows) {
        for (auto* group : {&st.self_k, &st.self_v, &st.cross_k, &st.cross_v}) {
            for (auto& t : *group) {
                if (t.defined()) t = ops::gather_rows(t, rows);
            }
        }
        st.cross_mask = ops::gather_rows(st.cross_mask, rows);
        st.rows = rows.size();
    }

   private:
    std::size_t heads() const { return static_cast<std::size_t>(config_.n_heads); }

    /// Scaled token embeddings plus sinusoidal positions starting at `offset`, as [B*L, d].
    Tensor embed(std::span<const int> ids, std::size_t rows, std::size_t len, std::size_t offset) const {
        const std::size_t d = static_cast<std::size_t>(config_.d_model);
        if (offset + len > positions_.dim(0)) throw std::invalid_argument("embed: position beyond table");
        Tensor x = ops::scale(ops::embedding_lookup(params_.at("embed/tokens"), ids), std::sqrt(static_cast<double>(d)));
        x = ops::add(ops::reshape(x, {rows, len, d}), ops::slice(positions_, 0, offset, offset + len));
        return ops::reshape(x, {rows * len, d});
    }

    Tensor cross_attention_mask(const Encoded& enc, std::size_t tq) const {
        return nn::attention_mask(enc.rows, heads(), tq, enc.len, enc.valid, false);
    }

    ModelConfig config_;
    ParamStore params_;
    Tensor positions_;
};

}  // namespace zsmt
