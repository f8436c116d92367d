#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "zsmt/tensor/param_store.hpp"

namespace zsmt {

struct AdamConfig {
    double lr = 3e-3;
    int warmup_steps = 200;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;

    bool operator==(const AdamConfig&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AdamConfig, lr, warmup_steps, beta1, beta2, eps)

class NonFiniteGradient : public std::runtime_error {
   public:
    NonFiniteGradient(long step, const std::string& path)
        : std::runtime_error("non-finite gradient at step " + std::to_string(step) + " in '" + path + "'"),
          step_(step) {}
    long step() const { return step_; }

   private:
    long step_;
};

/// Linear warmup, then inverse square root decay; equals `lr` at t = warmup.
inline double scheduled_lr(const AdamConfig& cfg, long step) {
    if (step < 1) throw std::invalid_argument("scheduled_lr: steps are 1-based");
    if (cfg.warmup_steps <= 0) return cfg.lr;
    const double t = static_cast<double>(step), w = static_cast<double>(cfg.warmup_steps);
    return cfg.lr * std::min(t / w, std::sqrt(w / t));
}

struct AdamState {
    GradientMap m;
    GradientMap v;
    long step = 0;

    bool operator==(const AdamState&) const = default;
};

class Adam {
   public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    const AdamState& state() const { return state_; }
    AdamState& state() { return state_; }
    long step() const { return state_.step; }

    void reset() { state_ = AdamState{}; }

    void apply(ParamStore& params, const GradientMap& grads) {
        const long t = state_.step + 1;
        for (const auto& [path, tensor] : params) {
            auto it = grads.find(path);
            if (it == grads.end()) throw std::invalid_argument("Adam: no gradient for '" + path + "'");
            if (it->second.size() != tensor.size()) throw std::invalid_argument("Adam: gradient size differs at '" + path + "'");
            for (double g : it->second) {
                if (!std::isfinite(g)) throw NonFiniteGradient(t, path);
            }
        }
        state_.step = t;
        const double lr = scheduled_lr(cfg_, t);
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
        for (const auto& path : params.paths()) {
            Tensor& tensor = params.at(path);
            const auto& g = grads.at(path);
            auto& m = slot(state_.m, path, g.size());
            auto& v = slot(state_.v, path, g.size());
            auto w = tensor.mutable_values();
            for (std::size_t i = 0; i < g.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                w[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

   private:
    static std::vector<double>& slot(GradientMap& map, const std::string& path, std::size_t n) {
        auto it = map.find(path);
        if (it == map.end()) it = map.emplace(path, std::vector<double>(n, 0.0)).first;
        return it->second;
    }

    AdamConfig cfg_;
    AdamState state_;
};

}  // namespace zsmt
