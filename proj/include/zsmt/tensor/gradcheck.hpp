#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsmt/tensor/param_store.hpp"
#include "zsmt/tensor/tape.hpp"

namespace zsmt {

struct FiniteDifferenceOptions {
    double eps = 1e-5;
    /// Coordinates checked per parameter tensor; 0 checks every coordinate.
    std::size_t samples_per_tensor = 0;
    /// Denominator floor: relative error is |a - n| / max(|a|, |n|, floor).
    double floor = 1e-4;
    std::uint64_t seed = 0;
};

struct FiniteDifferenceResult {
    double max_relative_error = 0.0;
    std::string worst_path;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

/// Compares reverse-mode gradients of `f` with central differences
/// (f(x+eps) - f(x-eps)) / (2 eps) on sampled coordinates.
inline FiniteDifferenceResult finite_difference_check(const std::function<Tensor(const ParamStore&)>& f,
                                                      ParamStore& params, const FiniteDifferenceOptions& opts = {}) {
    if (!(opts.eps > 0.0)) throw std::invalid_argument("finite_difference_check: eps must be positive");
    GradientMap analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = f(params);
        if (!std::isfinite(loss.item())) throw std::domain_error("finite_difference_check: f is not finite");
        analytic = backward(tape, loss, params);
    }
    auto evaluate = [&] {
        NoGradScope no_grad;
        const double v = f(params).item();
        if (!std::isfinite(v)) throw std::domain_error("finite_difference_check: f is not finite");
        return v;
    };

    std::mt19937_64 rng(opts.seed);
    FiniteDifferenceResult result;
    for (const auto& path : params.paths()) {
        Tensor& t = params.at(path);
        auto values = t.mutable_values();
        std::vector<std::size_t> coords(values.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        if (opts.samples_per_tensor != 0 && opts.samples_per_tensor < coords.size()) {
            for (std::size_t i = 0; i < opts.samples_per_tensor; ++i) {
                std::swap(coords[i], coords[i + rng() % (coords.size() - i)]);
            }
            coords.resize(opts.samples_per_tensor);
        }
        for (std::size_t idx : coords) {
            const double saved = values[idx];
            values[idx] = saved + opts.eps;
            const double up = evaluate();
            values[idx] = saved - opts.eps;
            const double down = evaluate();
            values[idx] = saved;
            const double numeric = (up - down) / (2.0 * opts.eps);
            const double a = analytic.at(path)[idx];
            const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.floor});
            ++result.checked;
            if (err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_path = path;
                result.worst_index = idx;
            }
        }
    }
    return result;
}

}  // namespace zsmt
