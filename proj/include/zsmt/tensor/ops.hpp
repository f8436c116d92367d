#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "zsmt/tensor/tape.hpp"
#include "zsmt/tensor/tensor.hpp"

namespace zsmt::ops {

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

inline ConstMatMap cmap(const Tensor& t, std::size_t offset, std::size_t rows, std::size_t cols) {
    return ConstMatMap(t.values().data() + offset, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline MatMap gmap(std::vector<double>& g, std::size_t offset, std::size_t rows, std::size_t cols) {
    return MatMap(g.data() + offset, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

/// Builds the op result and, when any input is tracked by the active tape, records it.
template <class Backward>
Tensor emit(OpKind kind, Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs,
            Backward&& backward) {
    Tape* tape = Tape::active();
    bool track = false;
    if (tape != nullptr) {
        for (const auto& in : inputs) track = track || in.requires_grad();
    }
    Tensor out(std::move(shape), std::move(values), track);
    if (track) {
        Tape::Node node{kind, {}, out.impl(), Tape::Backward(std::forward<Backward>(backward))};
        for (const auto& in : inputs) node.inputs.push_back(in.impl());
        tape->record(std::move(node));
    }
    return out;
}

/// Number of times `b` tiles `a` when `b`'s shape is a suffix of `a`'s shape.
inline std::size_t broadcast_repeats(std::string_view op, const Shape& a, const Shape& b) {
    bool ok = b.size() <= a.size();
    for (std::size_t i = 0; ok && i < b.size(); ++i) ok = a[a.size() - b.size() + i] == b[i];
    if (!ok) {
        throw ShapeError(std::string(op), "cannot combine " + to_string(a) + " with " + to_string(b) +
                                              " (only leading-dimension broadcasting is supported)");
    }
    return numel(a) / std::max<std::size_t>(numel(b), 1);
}

struct AxisSplit {
    std::size_t outer, n, inner;
};

inline AxisSplit split_at(std::string_view op, const Shape& s, std::size_t axis) {
    if (axis >= s.size()) {
        throw ShapeError(std::string(op), "axis " + std::to_string(axis) + " out of range for " + to_string(s));
    }
    AxisSplit r{1, s[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

inline void permute_into(std::span<const double> src, const Shape& in_shape, const std::vector<std::size_t>& perm,
                         std::span<double> dst, bool accumulate) {
    const std::size_t rank = in_shape.size();
    std::vector<std::size_t> in_stride(rank, 1);
    for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in_shape[i];
    Shape out_shape(rank);
    std::vector<std::size_t> stride(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        out_shape[i] = in_shape[perm[i]];
        stride[i] = in_stride[perm[i]];
    }
    if (rank == 0) {
        dst[0] = accumulate ? dst[0] + src[0] : src[0];
        return;
    }
    const std::size_t last = out_shape[rank - 1];
    const std::size_t last_stride = stride[rank - 1];
    std::vector<std::size_t> idx(rank, 0);
    std::size_t offset = 0;
    const std::size_t total = numel(out_shape);
    for (std::size_t o = 0; o < total; o += last) {
        const double* s = src.data() + offset;
        double* d = dst.data() + o;
        if (accumulate) {
            for (std::size_t k = 0; k < last; ++k) d[k] += s[k * last_stride];
        } else {
            for (std::size_t k = 0; k < last; ++k) d[k] = s[k * last_stride];
        }
        for (std::size_t ax = rank - 1; ax-- > 0;) {
            ++idx[ax];
            offset += stride[ax];
            if (idx[ax] < out_shape[ax]) break;
            offset -= stride[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
}

}  // namespace detail

/// Matrix product over the last two axes. `b` is either rank 2 (shared across
/// all leading dimensions of `a`) or has the same leading dimensions as `a`.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.size() < 2 || bs.size() < 2) {
        throw ShapeError("matmul", "operands need rank >= 2, got " + to_string(as) + " and " + to_string(bs));
    }
    const std::size_t k = as.back();
    if (bs[bs.size() - 2] != k) {
        throw ShapeError("matmul", "inner dimensions differ: " + to_string(as) + " x " + to_string(bs));
    }
    const std::size_t n = bs.back();
    Shape out_shape = as;
    out_shape.back() = n;

    if (bs.size() == 2) {
        const std::size_t m = a.size() / k;
        std::vector<double> y(m * n);
        detail::gmap(y, 0, m, n).noalias() = detail::cmap(a, 0, m, k) * detail::cmap(b, 0, k, n);
        return detail::emit(OpKind::matmul, std::move(out_shape), std::move(y), {a, b},
                            [a, b, m, k, n](const auto&, const std::vector<double>& g, Tape& tape) {
                                detail::ConstMatMap gm(g.data(), m, n);
                                if (a.requires_grad()) {
                                    detail::gmap(tape.grad(a), 0, m, k).noalias() +=
                                        gm * detail::cmap(b, 0, k, n).transpose();
                                }
                                if (b.requires_grad()) {
                                    detail::gmap(tape.grad(b), 0, k, n).noalias() +=
                                        detail::cmap(a, 0, m, k).transpose() * gm;
                                }
                            });
    }

    if (as.size() != bs.size() || !std::equal(as.begin(), as.end() - 2, bs.begin())) {
        throw ShapeError("matmul", "batch dimensions differ: " + to_string(as) + " x " + to_string(bs));
    }
    const std::size_t m = as[as.size() - 2];
    const std::size_t batch = a.size() / (m * k);
    std::vector<double> y(batch * m * n);
    for (std::size_t i = 0; i < batch; ++i) {
        detail::gmap(y, i * m * n, m, n).noalias() = detail::cmap(a, i * m * k, m, k) * detail::cmap(b, i * k * n, k, n);
    }
    return detail::emit(OpKind::matmul, std::move(out_shape), std::move(y), {a, b},
                        [a, b, batch, m, k, n](const auto&, const std::vector<double>& g, Tape& tape) {
                            for (std::size_t i = 0; i < batch; ++i) {
                                detail::ConstMatMap gm(g.data() + i * m * n, m, n);
                                if (a.requires_grad()) {
                                    detail::gmap(tape.grad(a), i * m * k, m, k).noalias() +=
                                        gm * detail::cmap(b, i * k * n, k, n).transpose();
                                }
                                if (b.requires_grad()) {
                                    detail::gmap(tape.grad(b), i * k * n, k, n).noalias() +=
                                        detail::cmap(a, i * m * k, m, k).transpose() * gm;
                                }
                            }
                        });
}

/// Elementwise sum; `b` may be broadcast over leading dimensions of `a`.
inline Tensor add(const Tensor& a, const Tensor& b) {
    const std::size_t reps = detail::broadcast_repeats("add", a.shape(), b.shape());
    const std::size_t bn = b.size();
    std::vector<double> y(a.values().begin(), a.values().end());
    const auto bv = b.values();
    for (std::size_t r = 0; r < reps; ++r) {
        double* dst = y.data() + r * bn;
        for (std::size_t i = 0; i < bn; ++i) dst[i] += bv[i];
    }
    return detail::emit(OpKind::add, a.shape(), std::move(y), {a, b},
                        [a, b, reps, bn](const auto&, const std::vector<double>& g, Tape& tape) {
                            if (a.requires_grad()) {
                                auto& ga = tape.grad(a);
                                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                            }
                            if (b.requires_grad()) {
                                auto& gb = tape.grad(b);
                                for (std::size_t r = 0; r < reps; ++r) {
                                    const double* src = g.data() + r * bn;
                                    for (std::size_t i = 0; i < bn; ++i) gb[i] += src[i];
                                }
                            }
                        });
}

/// Elementwise product; `b` may be broadcast over leading dimensions of `a`.
inline Tensor mul(const Tensor& a, const Tensor& b) {
    const std::size_t reps = detail::broadcast_repeats("mul", a.shape(), b.shape());
    const std::size_t bn = b.size();
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> y(a.size());
    for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t i = 0; i < bn; ++i) y[r * bn + i] = av[r * bn + i] * bv[i];
    }
    return detail::emit(OpKind::mul, a.shape(), std::move(y), {a, b},
                        [a, b, reps, bn](const auto&, const std::vector<double>& g, Tape& tape) {
                            const auto av = a.values();
                            const auto bv = b.values();
                            if (a.requires_grad()) {
                                auto& ga = tape.grad(a);
                                for (std::size_t r = 0; r < reps; ++r) {
                                    for (std::size_t i = 0; i < bn; ++i) ga[r * bn + i] += g[r * bn + i] * bv[i];
                                }
                            }
                            if (b.requires_grad()) {
                                auto& gb = tape.grad(b);
                                for (std::size_t r = 0; r < reps; ++r) {
                                    for (std::size_t i = 0; i < bn; ++i) gb[i] += g[r * bn + i] * av[r * bn + i];
                                }
                            }
                        });
}

inline Tensor scale(const Tensor& a, double factor) {
    std::vector<double> y(a.values().begin(), a.values().end());
    for (auto& v : y) v *= factor;
    return detail::emit(OpKind::scale, a.shape(), std::move(y), {a},
                        [a, factor](const auto&, const std::vector<double>& g, Tape& tape) {
                            auto& ga = tape.grad(a);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
                        });
}

inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return detail::emit(OpKind::sum, {}, {s}, {a}, [a](const auto&, const std::vector<double>& g, Tape& tape) {
        auto& ga = tape.grad(a);
        for (auto& v : ga) v += g[0];
    });
}

inline Tensor mean_over_axis(const Tensor& a, std::size_t axis) {
    const auto sp = detail::split_at("mean_over_axis", a.shape(), axis);
    if (sp.n == 0) throw ShapeError("mean_over_axis", "cannot average an empty axis");
    Shape out_shape = a.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    const auto av = a.values();
    std::vector<double> y(sp.outer * sp.inner, 0.0);
    const double inv = 1.0 / static_cast<double>(sp.n);
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t k = 0; k < sp.n; ++k) {
            const double* src = av.data() + (o * sp.n + k) * sp.inner;
            double* dst = y.data() + o * sp.inner;
            for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
        }
    }
    for (auto& v : y) v *= inv;
    return detail::emit(OpKind::mean_over_axis, std::move(out_shape), std::move(y), {a},
                        [a, sp, inv](const auto&, const std::vector<double>& g, Tape& tape) {
                            auto& ga = tape.grad(a);
                            for (std::size_t o = 0; o < sp.outer; ++o) {
                                for (std::size_t k = 0; k < sp.n; ++k) {
                                    double* dst = ga.data() + (o * sp.n + k) * sp.inner;
                                    const double* src = g.data() + o * sp.inner;
                                    for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += inv * src[i];
                                }
                            }
                        });
}

inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat", "no operands");
    const Shape& first = parts.front().shape();
    const auto base = detail::split_at("concat", first, axis);
    std::vector<std::size_t> widths;
    std::size_t total_n = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
        if (!ok) {
            throw ShapeError("concat", "operand " + to_string(s) + " does not match " + to_string(first) +
                                           " outside axis " + std::to_string(axis));
        }
        widths.push_back(s[axis] * base.inner);
        total_n += s[axis];
    }
    Shape out_shape = first;
    out_shape[axis] = total_n;
    const std::size_t row = total_n * base.inner;
    std::vector<double> y(base.outer * row);
    std::size_t col = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto v = parts[p].values();
        for (std::size_t o = 0; o < base.outer; ++o) {
            std::copy_n(v.data() + o * widths[p], widths[p], y.data() + o * row + col);
        }
        col += widths[p];
    }

    Tape* tape = Tape::active();
    bool track = false;
    if (tape != nullptr) {
        for (const auto& p : parts) track = track || p.requires_grad();
    }
    Tensor out(std::move(out_shape), std::move(y), track);
    if (track) {
        Tape::Node node{OpKind::concat, {}, out.impl(),
                        [parts, widths, row, outer = base.outer](const auto&, const std::vector<double>& g, Tape& t) {
                            std::size_t c = 0;
                            for (std::size_t p = 0; p < parts.size(); ++p) {
                                if (parts[p].requires_grad()) {
                                    auto& gp = t.grad(parts[p]);
                                    for (std::size_t o = 0; o < outer; ++o) {
                                        const double* src = g.data() + o * row + c;
                                        double* dst = gp.data() + o * widths[p];
                                        for (std::size_t i = 0; i < widths[p]; ++i) dst[i] += src[i];
                                    }
                                }
                                c += widths[p];
                            }
                        }};
        for (const auto& p : parts) node.inputs.push_back(p.impl());
        tape->record(std::move(node));
    }
    return out;
}

/// Half-open range [begin, end) along `axis`.
inline Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
    const auto sp = detail::split_at("slice", a.shape(), axis);
    if (begin > end || end > sp.n) {
        throw ShapeError("slice", "range [" + std::to_string(begin) + "," + std::to_string(end) +
                                      ") invalid for axis of size " + std::to_string(sp.n));
    }
    Shape out_shape = a.shape();
    out_shape[axis] = end - begin;
    const std::size_t width = (end - begin) * sp.inner;
    const std::size_t row = sp.n * sp.inner;
    const std::size_t start = begin * sp.inner;
    const auto av = a.values();
    std::vector<double> y(sp.outer * width);
    for (std::size_t o = 0; o < sp.outer; ++o) std::copy_n(av.data() + o * row + start, width, y.data() + o * width);
    return detail::emit(OpKind::slice, std::move(out_shape), std::move(y), {a},
                        [a, outer = sp.outer, width, row, start](const auto&, const std::vector<double>& g, Tape& tape) {
                            auto& ga = tape.grad(a);
                            for (std::size_t o = 0; o < outer; ++o) {
                                for (std::size_t i = 0; i < width; ++i) ga[o * row + start + i] += g[o * width + i];
                            }
                        });
}

/// Axis permutation: output axis i is input axis perm[i].
inline Tensor transpose(const Tensor& a, const std::vector<std::size_t>& perm) {
    const Shape& s = a.shape();
    std::vector<bool> seen(s.size(), false);
    bool ok = perm.size() == s.size();
    for (std::size_t i = 0; ok && i < perm.size(); ++i) {
        ok = perm[i] < s.size() && !seen[perm[i]];
        if (ok) seen[perm[i]] = true;
    }
    if (!ok) throw ShapeError("transpose", "invalid permutation for " + to_string(s));
    Shape out_shape(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out_shape[i] = s[perm[i]];
    std::vector<double> y(a.size());
    detail::permute_into(a.values(), s, perm, y, false);
    std::vector<std::size_t> inverse(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = i;
    return detail::emit(OpKind::transpose, out_shape, std::move(y), {a},
                        [a, out_shape, inverse](const auto&, const std::vector<double>& g, Tape& tape) {
                            detail::permute_into(g, out_shape, inverse, tape.grad(a), true);
                        });
}

/// Swaps the last two axes.
inline Tensor transpose(const Tensor& a) {
    if (a.rank() < 2) throw ShapeError("transpose", "rank >= 2 required, got " + to_string(a.shape()));
    std::vector<std::size_t> perm(a.rank());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
    return transpose(a, perm);
}

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size()) {
        throw ShapeError("reshape", "cannot view " + to_string(a.shape()) + " as " + to_string(shape));
    }
    std::vector<double> y(a.values().begin(), a.values().end());
    return detail::emit(OpKind::reshape, std::move(shape), std::move(y), {a},
                        [a](const auto&, const std::vector<double>& g, Tape& tape) {
                            auto& ga = tape.grad(a);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                        });
}

/// Rows of `table` ([V, d]) selected by `ids`; result is [ids.size(), d].
inline Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
    if (table.rank() != 2) throw ShapeError("embedding_lookup", "table must be rank 2, got " + to_string(table.shape()));
    const std::size_t vocab = table.dim(0);
    const std::size_t d = table.dim(1);
    std::vector<int> rows(ids.begin(), ids.end());
    std::vector<double> y(rows.size() * d);
    const auto tv = table.values();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= vocab) {
            throw ShapeError("embedding_lookup", "id " + std::to_string(rows[r]) + " outside table of " +
                                                     std::to_string(vocab) + " rows");
        }
        std::copy_n(tv.data() + static_cast<std::size_t>(rows[r]) * d, d, y.data() + r * d);
    }
    Shape shape{rows.size(), d};
    return detail::emit(OpKind::embedding_lookup, std::move(shape), std::move(y), {table},
                        [table, rows = std::move(rows), d](const auto&, const std::vector<double>& g, Tape& tape) {
                            auto& gt = tape.grad(table);
                            for (std::size_t r = 0; r < rows.size(); ++r) {
                                double* dst = gt.data() + static_cast<std::size_t>(rows[r]) * d;
                                for (std::size_t i = 0; i < d; ++i) dst[i] += g[r * d + i];
                            }
                        });
}

/// Softmax over the last axis.
inline Tensor softmax(const Tensor& a) {
    if (a.rank() == 0) throw ShapeError("softmax", "rank >= 1 required");
    const std::size_t n = a.shape().back();
    const std::size_t rows = n == 0 ? 0 : a.size() / n;
    const auto av = a.values();
    std::vector<double> y(a.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = av.data() + r * n;
        double* o = y.data() + r * n;
        const double mx = *std::max_element(x, x + n);
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) z += (o[i] = std::exp(x[i] - mx));
        for (std::size_t i = 0; i < n; ++i) o[i] /= z;
    }
    return detail::emit(OpKind::softmax, a.shape(), std::move(y), {a},
                        [a, n, rows](const zsmt::detail::TensorImpl& out, const std::vector<double>& g, Tape& tape) {
                            auto& ga = tape.grad(a);
                            const auto& yv = out.values;
                            for (std::size_t r = 0; r < rows; ++r) {
                                double dot = 0.0;
                                for (std::size_t i = 0; i < n; ++i) dot += g[r * n + i] * yv[r * n + i];
                                for (std::size_t i = 0; i < n; ++i) ga[r * n + i] += yv[r * n + i] * (g[r * n + i] - dot);
                            }
                        });
}

/// Log-softmax over the last axis.
inline Tensor log_softmax(const Tensor& a) {
    if (a.rank() == 0) throw ShapeError("log_softmax", "rank >= 1 required");
    const std::size_t n = a.shape().back();
    const std::size_t rows = n == 0 ? 0 : a.size() / n;
    const auto av = a.values();
    std::vector<double> y(a.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = av.data() + r * n;
        const double mx = *std::max_element(x, x + n);
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) z += std::exp(x[i] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t i = 0; i < n; ++i) y[r * n + i] = x[i] - lse;
    }
    return detail::emit(OpKind::log_softmax, a.shape(), std::move(y), {a},
                        [a, n, rows](const zsmt::detail::TensorImpl& out, const std::vector<double>& g, Tape& tape) {
                            auto& ga = tape.grad(a);
                            const auto& yv = out.values;
                            for (std::size_t r = 0; r < rows; ++r) {
                                double gs = 0.0;
                                for (std::size_t i = 0; i < n; ++i) gs += g[r * n + i];
                                for (std::size_t i = 0; i < n; ++i) {
                                    ga[r * n + i] += g[r * n + i] - std::exp(yv[r * n + i]) * gs;
                                }
                            }
                        });
}

/// Normalises the last axis, then applies elementwise gain and bias of that width.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
    if (x.rank() == 0) throw ShapeError("layer_norm", "rank >= 1 required");
    const std::size_t d = x.shape().back();
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
        throw ShapeError("layer_norm", "gain/bias " + to_string(gamma.shape()) + "/" + to_string(beta.shape()) +
                                           " do not match feature width " + std::to_string(d));
    }
    const std::size_t rows = x.size() / d;
    const auto xv = x.values();
    const auto gv = gamma.values();
    const auto bv = beta.values();
    std::vector<double> y(x.size());
    std::vector<double> xhat(x.size());
    std::vector<double> rstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * d;
        double mean = 0.0;
        for (std::size_t i = 0; i < d; ++i) mean += xr[i];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
        var /= static_cast<double>(d);
        rstd[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < d; ++i) {
            xhat[r * d + i] = (xr[i] - mean) * rstd[r];
            y[r * d + i] = xhat[r * d + i] * gv[i] + bv[i];
        }
    }
    return detail::emit(
        OpKind::layer_norm, x.shape(), std::move(y), {x, gamma, beta},
        [x, gamma, beta, d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](
            const auto&, const std::vector<double>& g, Tape& tape) {
            const auto gv = gamma.values();
            if (gamma.requires_grad()) {
                auto& gg = tape.grad(gamma);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < d; ++i) gg[i] += g[r * d + i] * xhat[r * d + i];
            }
            if (beta.requires_grad()) {
                auto& gb = tape.grad(beta);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < d; ++i) gb[i] += g[r * d + i];
            }
            if (x.requires_grad()) {
                auto& gx = tape.grad(x);
                const double inv_d = 1.0 / static_cast<double>(d);
                for (std::size_t r = 0; r < rows; ++r) {
                    double mean_dxhat = 0.0;
                    double mean_dxhat_xhat = 0.0;
                    for (std::size_t i = 0; i < d; ++i) {
                        const double dxhat = g[r * d + i] * gv[i];
                        mean_dxhat += dxhat;
                        mean_dxhat_xhat += dxhat * xhat[r * d + i];
                    }
                    mean_dxhat *= inv_d;
                    mean_dxhat_xhat *= inv_d;
                    for (std::size_t i = 0; i < d; ++i) {
                        const double dxhat = g[r * d + i] * gv[i];
                        gx[r * d + i] += rstd[r] * (dxhat - mean_dxhat - xhat[r * d + i] * mean_dxhat_xhat);
                    }
                }
            }
        });
}

/// Exact (erf) GELU.
inline Tensor gelu(const Tensor& a) {
    const auto av = a.values();
    std::vector<double> y(a.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.5 * av[i] * (1.0 + std::erf(av[i] * std::numbers::sqrt2 / 2.0));
    return detail::emit(OpKind::gelu, a.shape(), std::move(y), {a},
                        [a](const auto&, const std::vector<double>& g, Tape& tape) {
                            auto& ga = tape.grad(a);
                            const auto av = a.values();
                            constexpr double inv_sqrt_2pi = 0.3989422804014327;
                            for (std::size_t i = 0; i < g.size(); ++i) {
                                const double x = av[i];
                                const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
                                const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
                                ga[i] += g[i] * (cdf + x * pdf);
                            }
                        });
}

inline Tensor relu(const Tensor& a) {
    const auto av = a.values();
    std::vector<double> y(a.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] > 0.0 ? av[i] : 0.0;
    return detail::emit(OpKind::relu, a.shape(), std::move(y), {a},
                        [a](const auto&, const std::vector<double>& g, Tape& tape) {
                            auto& ga = tape.grad(a);
                            const auto av = a.values();
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += av[i] > 0.0 ? g[i] : 0.0;
                        });
}

enum class Reduction { mean, sum };

/// Token-level negative log-likelihood of `targets` under `logits` ([N, V]),
/// skipping rows whose mask entry is zero.
inline Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, std::span<const std::uint8_t> mask,
                            Reduction reduction = Reduction::mean) {
    if (logits.rank() != 2) throw ShapeError("cross_entropy", "logits must be [N, V], got " + to_string(logits.shape()));
    const std::size_t rows = logits.dim(0);
    const std::size_t vocab = logits.dim(1);
    if (targets.size() != rows || mask.size() != rows) {
        throw ShapeError("cross_entropy", std::to_string(rows) + " logit rows but " + std::to_string(targets.size()) +
                                              " targets and " + std::to_string(mask.size()) + " mask entries");
    }
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (!mask[r]) continue;
        if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= vocab) {
            throw ShapeError("cross_entropy", "target " + std::to_string(targets[r]) + " outside vocabulary of " +
                                                  std::to_string(vocab));
        }
        ++count;
    }
    if (count == 0) throw std::invalid_argument("cross_entropy: every position is padding");

    const auto lv = logits.values();
    std::vector<double> probs(rows * vocab, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (!mask[r]) continue;
        const double* x = lv.data() + r * vocab;
        const double mx = *std::max_element(x, x + vocab);
        double z = 0.0;
        for (std::size_t i = 0; i < vocab; ++i) z += (probs[r * vocab + i] = std::exp(x[i] - mx));
        for (std::size_t i = 0; i < vocab; ++i) probs[r * vocab + i] /= z;
        total += mx + std::log(z) - x[targets[r]];
    }
    const double norm = reduction == Reduction::mean ? 1.0 / static_cast<double>(count) : 1.0;
    std::vector<int> tgt(targets.begin(), targets.end());
    std::vector<std::uint8_t> msk(mask.begin(), mask.end());
    return detail::emit(OpKind::cross_entropy, {}, {total * norm}, {logits},
                        [logits, rows, vocab, norm, probs = std::move(probs), tgt = std::move(tgt),
                         msk = std::move(msk)](const auto&, const std::vector<double>& g, Tape& tape) {
                            auto& gl = tape.grad(logits);
                            const double s = g[0] * norm;
                            for (std::size_t r = 0; r < rows; ++r) {
                                if (!msk[r]) continue;
                                for (std::size_t i = 0; i < vocab; ++i) gl[r * vocab + i] += s * probs[r * vocab + i];
                                gl[r * vocab + static_cast<std::size_t>(tgt[r])] -= s;
                            }
                        });
}

/// Copy that is never tracked, cutting the gradient path.
inline Tensor detach(const Tensor& a) { return Tensor(a.shape(), std::vector<double>(a.values().begin(), a.values().end())); }

/// Rows of `a` along axis 0 picked by `rows`. Untracked; used to reorder decoder caches.
inline Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
    if (a.rank() == 0) throw ShapeError("gather_rows", "rank >= 1 required");
    const std::size_t width = a.size() / std::max<std::size_t>(a.dim(0), 1);
    Shape out_shape = a.shape();
    out_shape[0] = rows.size();
    std::vector<double> y(rows.size() * width);
    const auto av = a.values();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= a.dim(0)) throw ShapeError("gather_rows", "row " + std::to_string(rows[r]) + " out of range");
        std::copy_n(av.data() + rows[r] * width, width, y.data() + r * width);
    }
    return Tensor(std::move(out_shape), std::move(y));
}

}  // namespace zsmt::ops
