#pragma once

#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsmt/tensor/param_store.hpp"

namespace zsmt {

enum class Granularity { model_wise, layer_wise, matrix_wise };

NLOHMANN_JSON_SERIALIZE_ENUM(Granularity, {{Granularity::model_wise, "MODEL_WISE"},
                                           {Granularity::layer_wise, "LAYER_WISE"},
                                           {Granularity::matrix_wise, "MATRIX_WISE"}})

/// Projection unit owning a parameter path. Layer units are "<stack>/layerN";
/// parameters outside a numbered layer group by their first two path components.
inline std::string unit_of(const std::string& path, Granularity g) {
    switch (g) {
        case Granularity::model_wise: return "ALL";
        case Granularity::matrix_wise: return path;
        case Granularity::layer_wise: {
            const auto first = path.find('/');
            if (first == std::string::npos) return path;
            const auto second = path.find('/', first + 1);
            if (second == std::string::npos) return path.substr(0, first);
            return path.substr(0, second);
        }
    }
    return path;
}

/// Flattened gradient per unit, members concatenated in path order.
using UnitGradients = std::map<std::string, std::vector<double>>;

inline UnitGradients split_units(const GradientMap& grads, Granularity g) {
    UnitGradients out;
    for (const auto& [path, v] : grads) {
        auto& dst = out[unit_of(path, g)];
        dst.insert(dst.end(), v.begin(), v.end());
    }
    return out;
}

/// Inverse of split_units; `like` supplies paths and sizes.
inline GradientMap merge_units(const UnitGradients& units, const GradientMap& like, Granularity g) {
    GradientMap out;
    std::map<std::string, std::size_t> cursor;
    for (const auto& [path, v] : like) {
        const std::string unit = unit_of(path, g);
        const auto& src = units.at(unit);
        auto& pos = cursor[unit];
        if (pos + v.size() > src.size()) throw std::invalid_argument("merge_units: unit '" + unit + "' too short");
        out.emplace(path, std::vector<double>(src.begin() + static_cast<std::ptrdiff_t>(pos),
                                              src.begin() + static_cast<std::ptrdiff_t>(pos + v.size())));
        pos += v.size();
    }
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: length mismatch (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct ProjectionOutcome {
    double dot_before = 0.0;
    bool projected = false;
};

/// In place: if g conflicts with o (negative dot) and o is nonzero, remove g's
/// component along o.
inline ProjectionOutcome project_in_place(std::span<double> g, std::span<const double> o) {
    ProjectionOutcome out;
    out.dot_before = dot(g, o);
    const double oo = dot(o, o);
    if (out.dot_before >= 0.0 || oo == 0.0) return out;
    const double coef = out.dot_before / oo;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= coef * o[i];
    out.projected = true;
    return out;
}

inline std::vector<double> project_gradient(std::span<const double> g_train, std::span<const double> g_oracle) {
    std::vector<double> out(g_train.begin(), g_train.end());
    project_in_place(out, g_oracle);
    return out;
}

}  // namespace zsmt
