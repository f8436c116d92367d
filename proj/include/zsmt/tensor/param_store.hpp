#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsmt/tensor/tape.hpp"
#include "zsmt/tensor/tensor.hpp"

namespace zsmt {

/// Gradient per parameter path, in path order.
using GradientMap = std::map<std::string, std::vector<double>>;

/// Trainable parameters addressed by hierarchical path ("decoder/layer0/self_attn/wq").
/// Iteration is in lexicographic path order.
class ParamStore {
   public:
    using Map = std::map<std::string, Tensor>;

    Tensor& add(const std::string& path, Tensor value) {
        if (path.empty()) throw std::invalid_argument("ParamStore: empty parameter path");
        if (!value.requires_grad()) value = Tensor(value.shape(), {value.values().begin(), value.values().end()}, true);
        auto [it, inserted] = entries_.emplace(path, std::move(value));
        if (!inserted) throw std::invalid_argument("ParamStore: duplicate parameter path '" + path + "'");
        return it->second;
    }

    bool contains(const std::string& path) const { return entries_.count(path) != 0; }

    const Tensor& at(const std::string& path) const {
        auto it = entries_.find(path);
        if (it == entries_.end()) throw std::out_of_range("ParamStore: no parameter '" + path + "'");
        return it->second;
    }

    Tensor& at(const std::string& path) {
        auto it = entries_.find(path);
        if (it == entries_.end()) throw std::out_of_range("ParamStore: no parameter '" + path + "'");
        return it->second;
    }

    std::size_t size() const noexcept { return entries_.size(); }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& [_, t] : entries_) n += t.size();
        return n;
    }

    Map::const_iterator begin() const { return entries_.begin(); }
    Map::const_iterator end() const { return entries_.end(); }

    std::vector<std::string> paths() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [p, _] : entries_) out.push_back(p);
        return out;
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(total_size());
        for (const auto& [_, t] : entries_) out.insert(out.end(), t.values().begin(), t.values().end());
        return out;
    }

    void unflatten(std::span<const double> flat) {
        if (flat.size() != total_size()) {
            throw std::invalid_argument("ParamStore::unflatten: expected " + std::to_string(total_size()) +
                                        " values, got " + std::to_string(flat.size()));
        }
        std::size_t offset = 0;
        for (auto& [_, t] : entries_) {
            auto dst = t.mutable_values();
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
            offset += dst.size();
        }
    }

    /// Deep copy; the clone shares no storage with this store.
    ParamStore clone() const {
        ParamStore out;
        for (const auto& [p, t] : entries_) out.entries_.emplace(p, t.clone());
        return out;
    }

    /// Overwrites values from `other`, which must hold the same paths and shapes.
    void assign(const ParamStore& other) {
        if (other.size() != size()) throw std::invalid_argument("ParamStore::assign: parameter sets differ");
        for (auto& [p, t] : entries_) {
            const Tensor& src = other.at(p);
            if (src.shape() != t.shape()) {
                throw ShapeError("assign", "parameter '" + p + "' has shape " + to_string(src.shape()) +
                                               ", expected " + to_string(t.shape()));
            }
            std::copy(src.values().begin(), src.values().end(), t.mutable_values().begin());
        }
    }

    bool operator==(const ParamStore& other) const {
        if (size() != other.size()) return false;
        auto a = entries_.begin();
        auto b = other.entries_.begin();
        for (; a != entries_.end(); ++a, ++b) {
            if (a->first != b->first || a->second.shape() != b->second.shape()) return false;
            if (!std::equal(a->second.values().begin(), a->second.values().end(), b->second.values().begin())) {
                return false;
            }
        }
        return true;
    }

   private:
    Map entries_;
};

/// Runs the reverse sweep on the tape that recorded `loss` and collects the
/// gradient of every parameter. The tape is reset afterwards.
inline GradientMap backward(Tape& tape, const Tensor& loss, const ParamStore& params) {
    tape.backward(loss);
    GradientMap grads;
    for (const auto& [path, t] : params) grads.emplace(path, tape.grad_or_zero(t));
    tape.reset();
    return grads;
}

inline std::vector<double> flatten(const GradientMap& grads) {
    std::vector<double> out;
    for (const auto& [_, g] : grads) out.insert(out.end(), g.begin(), g.end());
    return out;
}

inline GradientMap zeros_like(const ParamStore& params) {
    GradientMap out;
    for (const auto& [p, t] : params) out.emplace(p, std::vector<double>(t.size(), 0.0));
    return out;
}

/// dst += scale * src, path by path.
inline void accumulate(GradientMap& dst, const GradientMap& src, double scale = 1.0) {
    for (const auto& [p, g] : src) {
        auto& d = dst.at(p);
        if (d.size() != g.size()) throw std::invalid_argument("accumulate: size mismatch at '" + p + "'");
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += scale * g[i];
    }
}

inline bool all_finite(const GradientMap& grads) {
    for (const auto& [_, g] : grads) {
        for (double v : g) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

}  // namespace zsmt
