#pragma once

// Dense double-precision vectors/matrices and the handful of primitives the
// model is built from. Everything is 64-bit float; values are immutable after
// construction unless the owner mutates them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

#include "poinet/errors.hpp"

namespace poinet {

using Mask = std::vector<std::uint8_t>; // 1 = selected position

struct Vector {
    std::vector<double> data;

    Vector() = default;
    explicit Vector(std::size_t n, double fill = 0.0) : data(n, fill) {}
    Vector(std::initializer_list<double> init) : data(init) {}
    explicit Vector(std::vector<double> values) : data(std::move(values)) {}

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(),
                           [](double v) { return std::isfinite(v); });
    }
};

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row_ptr(std::size_t r) { return data.data() + r * cols; }
    const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }

    Vector row(std::size_t r) const {
        Vector out(cols);
        std::copy(row_ptr(r), row_ptr(r) + cols, out.data.begin());
        return out;
    }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(),
                           [](double v) { return std::isfinite(v); });
    }

    static Matrix from_vector(const Vector& v) {
        Matrix m(v.size(), 1);
        m.data = v.data;
        return m;
    }
};

inline void require_same_length(const Vector& a, const Vector& b, const char* what) {
    if (a.size() != b.size()) {
        throw DimensionError(std::string(what) + ": length mismatch " +
                             std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
}

// (x - mean) / sqrt(var + eps), then gain ⊙ out + bias. Population variance.
inline Vector layer_norm(const Vector& x, const Vector& gain, const Vector& bias, double eps) {
    require_same_length(x, gain, "layer_norm");
    require_same_length(x, bias, "layer_norm");
    if (x.empty()) throw DimensionError("layer_norm: empty input");
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x.data) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = gain[i] * ((x[i] - mean) * inv_std) + bias[i];
    }
    return out;
}

// Returns 0 when either vector has zero norm (neutral score for padding rows).
inline double cosine(const Vector& u, const Vector& v) {
    require_same_length(u, v, "cosine");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

inline double cosine_rows(const Matrix& m, std::size_t r, const Vector& v) {
    double dot = 0.0, nu = 0.0, nv = 0.0;
    const double* p = m.row_ptr(r);
    for (std::size_t i = 0; i < m.cols; ++i) {
        dot += p[i] * v[i];
        nu += p[i] * p[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// (s_i - min) / (max - min); an all-equal vector maps to all ones so a
// degenerate score distribution leaves embeddings unchanged.
inline Vector min_max_scale(const Vector& s) {
    if (s.empty()) throw DimensionError("min_max_scale: empty input");
    const auto [mn_it, mx_it] = std::minmax_element(s.data.begin(), s.data.end());
    const double mn = *mn_it, mx = *mx_it;
    Vector out(s.size());
    if (mx == mn) {
        std::fill(out.data.begin(), out.data.end(), 1.0);
        return out;
    }
    const double range = mx - mn;
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - mn) / range;
    return out;
}

// Column-wise max over rows with mask == 1.
inline Vector max_pool_rows(const Matrix& m, const Mask& mask) {
    if (mask.size() != m.rows) {
        throw DimensionError("max_pool_rows: mask length " + std::to_string(mask.size()) +
                             " vs rows " + std::to_string(m.rows));
    }
    Vector out(m.cols, -std::numeric_limits<double>::infinity());
    bool any = false;
    for (std::size_t r = 0; r < m.rows; ++r) {
        if (!mask[r]) continue;
        any = true;
        const double* p = m.row_ptr(r);
        for (std::size_t c = 0; c < m.cols; ++c) out[c] = std::max(out[c], p[c]);
    }
    if (!any) throw EmptyDomainError("max_pool_rows: all rows masked");
    return out;
}

// Max-subtraction stabilized.
inline Vector softmax(const Vector& x) {
    if (x.empty()) throw DimensionError("softmax: empty input");
    const double mx = *std::max_element(x.data.begin(), x.data.end());
    Vector out(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - mx);
        sum += out[i];
    }
    for (double& v : out.data) v /= sum;
    return out;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw DimensionError("matmul: " + std::to_string(a.cols) + " vs " +
                             std::to_string(b.rows));
    }
    Matrix out(a.rows, b.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ap = a.row_ptr(i);
        double* op = out.row_ptr(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = ap[k];
            if (av == 0.0) continue;
            const double* bp = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols; ++j) op[j] += av * bp[j];
        }
    }
    return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionError("add: shape mismatch");
    Matrix out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

inline Vector add(const Vector& a, const Vector& b) {
    require_same_length(a, b, "add");
    Vector out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

inline Matrix scale(const Matrix& a, double c) {
    Matrix out = a;
    for (double& v : out.data) v *= c;
    return out;
}

inline Vector scale(const Vector& a, double c) {
    Vector out = a;
    for (double& v : out.data) v *= c;
    return out;
}

inline std::size_t count_mask(const Mask& mask) {
    std::size_t n = 0;
    for (auto v : mask) n += (v != 0);
    return n;
}

} // namespace poinet
