#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zsmt/tensor/tensor.hpp"

namespace zsmt {

enum class OpKind {
    matmul,
    add,
    mul,
    scale,
    concat,
    slice,
    embedding_lookup,
    softmax,
    log_softmax,
    layer_norm,
    gelu,
    relu,
    mean_over_axis,
    transpose,
    reshape,
    sum,
    cross_entropy,
};

inline std::string_view op_name(OpKind kind) {
    switch (kind) {
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::mul: return "mul";
        case OpKind::scale: return "scale";
        case OpKind::concat: return "concat";
        case OpKind::slice: return "slice";
        case OpKind::embedding_lookup: return "embedding_lookup";
        case OpKind::softmax: return "softmax";
        case OpKind::log_softmax: return "log_softmax";
        case OpKind::layer_norm: return "layer_norm";
        case OpKind::gelu: return "gelu";
        case OpKind::relu: return "relu";
        case OpKind::mean_over_axis: return "mean_over_axis";
        case OpKind::transpose: return "transpose";
        case OpKind::reshape: return "reshape";
        case OpKind::sum: return "sum";
        case OpKind::cross_entropy: return "cross_entropy";
    }
    return "unknown";
}

class AutodiffError : public std::logic_error {
   public:
    using std::logic_error::logic_error;
};

/// Ordered record of executed operations. Gradients live in the tape, never in
/// the tensors, so parameters can be shared read-only between tapes.
class Tape {
   public:
    using Backward =
        std::function<void(const detail::TensorImpl& out, const std::vector<double>& out_grad, Tape& tape)>;

    struct Node {
        OpKind kind;
        std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
        std::shared_ptr<detail::TensorImpl> output;
        Backward backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(Node node) { nodes_.push_back(std::move(node)); }

    std::size_t size() const noexcept { return nodes_.size(); }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    /// Gradient accumulator for `t`, zero-initialised on first use.
    std::vector<double>& grad(const detail::TensorImpl* t) {
        auto it = grads_.find(t);
        if (it == grads_.end()) it = grads_.emplace(t, std::vector<double>(t->values.size(), 0.0)).first;
        return it->second;
    }

    std::vector<double>& grad(const Tensor& t) { return grad(t.id()); }

    /// Accumulated gradient of `t`, or zeros when nothing reached it.
    std::vector<double> grad_or_zero(const Tensor& t) const {
        auto it = grads_.find(t.id());
        if (it == grads_.end()) return std::vector<double>(t.size(), 0.0);
        return it->second;
    }

    /// Reverse sweep from a scalar loss. Gradients accumulate until reset().
    void backward(const Tensor& loss) {
        if (!loss.defined() || loss.size() != 1) {
            throw AutodiffError("backward: loss must be a scalar, got shape " +
                                (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
        }
        if (!loss.requires_grad()) {
            throw AutodiffError("backward: loss was not produced by a taped computation");
        }
        grad(loss)[0] += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            auto g = grads_.find(it->output.get());
            if (g == grads_.end()) continue;
            it->backward(*it->output, g->second, *this);
        }
    }

    void reset() {
        nodes_.clear();
        grads_.clear();
    }

    static Tape*& active() {
        thread_local Tape* current = nullptr;
        return current;
    }

   private:
    std::vector<Node> nodes_;
    std::unordered_map<const detail::TensorImpl*, std::vector<double>> grads_;
};

/// Makes `tape` the recording tape of the calling thread for the scope's lifetime.
class TapeScope {
   public:
    explicit TapeScope(Tape& tape) : previous_(Tape::active()) { Tape::active() = &tape; }
    ~TapeScope() { Tape::active() = previous_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

   private:
    Tape* previous_;
};

/// Suspends recording, e.g. for decoding with shared parameters.
class NoGradScope {
   public:
    NoGradScope() : previous_(Tape::active()) { Tape::active() = nullptr; }
    ~NoGradScope() { Tape::active() = previous_; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

   private:
    Tape* previous_;
};

}  // namespace zsmt
