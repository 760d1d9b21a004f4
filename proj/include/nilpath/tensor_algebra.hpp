#pragma once

// Truncated tensor algebra T^N(R^d): dense level blocks, the truncated
// tensor product, exp/log, group inverse and dilation.

#include "nilpath/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nilpath {

/// Dimension d and truncation depth N of a tensor. Level i holds d^i
/// coefficients stored row-major; levels are laid out consecutively.
struct TensorShape {
    int dim = 1;
    int depth = 1;

    std::size_t level_size(int i) const {
        std::size_t n = 1;
        for (int k = 0; k < i; ++k) n *= static_cast<std::size_t>(dim);
        return n;
    }
    std::size_t level_offset(int i) const {
        std::size_t off = 0;
        for (int k = 0; k < i; ++k) off += level_size(k);
        return off;
    }
    std::size_t size() const { return level_offset(depth + 1); }

    friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

inline void check_shape(const TensorShape& s) {
    if (s.dim < 1) throw ShapeError("tensor dimension must be positive, got " + std::to_string(s.dim));
    if (s.depth < 1) throw ShapeError("tensor depth must be positive, got " + std::to_string(s.depth));
    if (s.dim > 16 || s.depth > 8 || s.size() > (std::size_t{1} << 20))
        throw ResourceError("tensor shape (d=" + std::to_string(s.dim) + ", N=" + std::to_string(s.depth) +
                            ") exceeds the supported size");
}

inline void require_same_shape(const TensorShape& a, const TensorShape& b, const char* op) {
    if (!(a == b))
        throw ShapeError(std::string(op) + ": shape mismatch (d=" + std::to_string(a.dim) + ", N=" +
                         std::to_string(a.depth) + ") vs (d=" + std::to_string(b.dim) + ", N=" +
                         std::to_string(b.depth) + ")");
}

namespace detail {

// Kernels over raw coefficient spans. `out` must not alias the inputs.

/// out = a (x) b truncated at depth.
inline void mul(std::span<double> out, std::span<const double> a, std::span<const double> b,
                const TensorShape& s) {
    for (int k = 0; k <= s.depth; ++k) {
        double* o = out.data() + s.level_offset(k);
        const std::size_t nk = s.level_size(k);
        for (std::size_t p = 0; p < nk; ++p) o[p] = 0.0;
        for (int i = 0; i <= k; ++i) {
            const int j = k - i;
            const double* ai = a.data() + s.level_offset(i);
            const double* bj = b.data() + s.level_offset(j);
            const std::size_t ni = s.level_size(i), nj = s.level_size(j);
            for (std::size_t p = 0; p < ni; ++p) {
                const double av = ai[p];
                if (av == 0.0) continue;
                double* row = o + p * nj;
                for (std::size_t q = 0; q < nj; ++q) row[q] += av * bj[q];
            }
        }
    }
}

/// out = prev (x) exp(delta), delta a level-one increment of length d.
/// Horner scheme per level; `scratch` needs 2 * d^N entries.
inline void chen_step(std::span<double> out, std::span<const double> prev, std::span<const double> delta,
                      const TensorShape& s, std::span<double> scratch) {
    const std::size_t d = static_cast<std::size_t>(s.dim);
    out[0] = prev[0];
    double* acc = scratch.data();
    double* nxt = scratch.data() + s.level_size(s.depth);
    for (int k = 1; k <= s.depth; ++k) {
        // acc runs over levels j = 0..k-1, then gets promoted by delta/(k-j).
        acc[0] = prev[0];
        std::size_t len = 1;
        for (int j = 1; j <= k; ++j) {
            const double f = 1.0 / static_cast<double>(k - j + 1);
            const double* pj = prev.data() + s.level_offset(j);
            for (std::size_t p = 0; p < len; ++p) {
                const double v = acc[p] * f;
                for (std::size_t q = 0; q < d; ++q) nxt[p * d + q] = v * delta[q] + pj[p * d + q];
            }
            len *= d;
            std::swap(acc, nxt);
        }
        double* o = out.data() + s.level_offset(k);
        for (std::size_t p = 0; p < len; ++p) o[p] = acc[p];
    }
}

/// max_{i=1..N} |level_i|^{1/i} (Euclidean norm of each level block).
inline double homogeneous_norm(std::span<const double> g, const TensorShape& s) {
    double best = 0.0;
    for (int i = 1; i <= s.depth; ++i) {
        const double* li = g.data() + s.level_offset(i);
        double sq = 0.0;
        for (std::size_t p = 0; p < s.level_size(i); ++p) sq += li[p] * li[p];
        const double n = std::sqrt(sq);
        const double v = i == 1 ? n : (i == 2 ? std::sqrt(n) : std::pow(n, 1.0 / i));
        if (v > best) best = v;
    }
    return best;
}

/// out = g^{-1} for a group-like g, solving g (x) out = 1 level by level:
/// out_k = -sum_{i=1..k} g_i (x) out_{k-i}. Allocation free.
inline void inverse(std::span<double> out, std::span<const double> g, const TensorShape& s) {
    out[0] = 1.0;
    for (int k = 1; k <= s.depth; ++k) {
        double* o = out.data() + s.level_offset(k);
        const std::size_t nk = s.level_size(k);
        for (std::size_t p = 0; p < nk; ++p) o[p] = 0.0;
        for (int i = 1; i <= k; ++i) {
            const double* gi = g.data() + s.level_offset(i);
            const double* rj = out.data() + s.level_offset(k - i);
            const std::size_t ni = s.level_size(i), nj = s.level_size(k - i);
            for (std::size_t p = 0; p < ni; ++p) {
                const double gv = gi[p];
                double* row = o + p * nj;
                for (std::size_t q = 0; q < nj; ++q) row[q] -= gv * rj[q];
            }
        }
    }
}

} // namespace detail

/// Element of T^N(R^d). Group-like tensors have scalar part 1,
/// Lie-candidate tensors have scalar part 0; operations that need one of
/// the two check the scalar part.
class TruncatedTensor {
public:
    static constexpr double kScalarTolerance = 1e-12;

    TruncatedTensor() : TruncatedTensor(1, 1) {}

    /// Zero tensor of the given shape.
    TruncatedTensor(int dim, int depth) : shape_{dim, depth} {
        check_shape(shape_);
        data_.assign(shape_.size(), 0.0);
    }

    explicit TruncatedTensor(const TensorShape& shape) : TruncatedTensor(shape.dim, shape.depth) {}

    static TruncatedTensor zero(int dim, int depth) { return TruncatedTensor(dim, depth); }

    static TruncatedTensor unit(int dim, int depth) {
        TruncatedTensor t(dim, depth);
        t.data_[0] = 1.0;
        return t;
    }

    /// Lie-candidate tensor with only level one populated.
    static TruncatedTensor from_increment(std::span<const double> delta, int depth) {
        TruncatedTensor t(static_cast<int>(delta.size()), depth);
        for (std::size_t q = 0; q < delta.size(); ++q) t.data_[1 + q] = delta[q];
        return t;
    }

    static TruncatedTensor from_levels(int dim, int depth, const std::vector<std::vector<double>>& levels) {
        TruncatedTensor t(dim, depth);
        if (static_cast<int>(levels.size()) != depth + 1)
            throw ShapeError("expected " + std::to_string(depth + 1) + " levels, got " +
                             std::to_string(levels.size()));
        for (int i = 0; i <= depth; ++i) {
            if (levels[i].size() != t.shape_.level_size(i))
                throw ShapeError("level " + std::to_string(i) + " must have " +
                                 std::to_string(t.shape_.level_size(i)) + " entries, got " +
                                 std::to_string(levels[i].size()));
            std::copy(levels[i].begin(), levels[i].end(), t.level(i).begin());
        }
        return t;
    }

    static TruncatedTensor from_coefficients(const TensorShape& shape, std::span<const double> coeffs) {
        TruncatedTensor t(shape);
        if (coeffs.size() != t.data_.size()) throw ShapeError("coefficient count does not match shape");
        std::copy(coeffs.begin(), coeffs.end(), t.data_.begin());
        return t;
    }

    int dim() const { return shape_.dim; }
    int depth() const { return shape_.depth; }
    const TensorShape& shape() const { return shape_; }

    double scalar() const { return data_[0]; }

    std::span<const double> level(int i) const {
        check_level(i);
        return {data_.data() + shape_.level_offset(i), shape_.level_size(i)};
    }
    std::span<double> level(int i) {
        check_level(i);
        return {data_.data() + shape_.level_offset(i), shape_.level_size(i)};
    }

    std::span<const double> coefficients() const { return data_; }
    std::span<double> coefficients() { return data_; }

    bool is_group_like() const { return std::abs(data_[0] - 1.0) <= kScalarTolerance; }
    bool is_lie_candidate() const { return std::abs(data_[0]) <= kScalarTolerance; }

    TruncatedTensor& operator+=(const TruncatedTensor& o) {
        require_same_shape(shape_, o.shape_, "tensor addition");
        for (std::size_t p = 0; p < data_.size(); ++p) data_[p] += o.data_[p];
        return *this;
    }
    TruncatedTensor& operator-=(const TruncatedTensor& o) {
        require_same_shape(shape_, o.shape_, "tensor subtraction");
        for (std::size_t p = 0; p < data_.size(); ++p) data_[p] -= o.data_[p];
        return *this;
    }
    TruncatedTensor& operator*=(double c) {
        for (double& v : data_) v *= c;
        return *this;
    }

    friend TruncatedTensor operator+(TruncatedTensor a, const TruncatedTensor& b) { return a += b; }
    friend TruncatedTensor operator-(TruncatedTensor a, const TruncatedTensor& b) { return a -= b; }
    friend TruncatedTensor operator*(double c, TruncatedTensor a) { return a *= c; }
    friend TruncatedTensor operator-(TruncatedTensor a) { return a *= -1.0; }

    friend bool operator==(const TruncatedTensor&, const TruncatedTensor&) = default;

private:
    void check_level(int i) const {
        if (i < 0 || i > shape_.depth)
            throw DomainError("level index " + std::to_string(i) + " outside [0, " +
                              std::to_string(shape_.depth) + "]");
    }

    TensorShape shape_;
    std::vector<double> data_;
};

/// Truncated tensor product.
inline TruncatedTensor tensor_mul(const TruncatedTensor& a, const TruncatedTensor& b) {
    require_same_shape(a.shape(), b.shape(), "tensor_mul");
    TruncatedTensor out(a.shape());
    detail::mul(out.coefficients(), a.coefficients(), b.coefficients(), a.shape());
    return out;
}

inline TruncatedTensor operator*(const TruncatedTensor& a, const TruncatedTensor& b) { return tensor_mul(a, b); }

/// Truncated exponential of a Lie-candidate tensor; the result is group-like.
inline TruncatedTensor tensor_exp(const TruncatedTensor& a) {
    if (!a.is_lie_candidate())
        throw DomainError("tensor_exp needs scalar part 0, got " + std::to_string(a.scalar()));
    TruncatedTensor result = TruncatedTensor::unit(a.dim(), a.depth());
    TruncatedTensor term = result;
    for (int k = 1; k <= a.depth(); ++k) {
        term = tensor_mul(term, a);
        term *= 1.0 / k;
        result += term;
    }
    return result;
}

/// Truncated logarithm of a group-like tensor. The series in (g - 1)
/// terminates at depth N, so this is the exact inverse of tensor_exp.
inline TruncatedTensor tensor_log(const TruncatedTensor& g) {
    if (!g.is_group_like())
        throw DomainError("tensor_log needs scalar part 1, got " + std::to_string(g.scalar()));
    TruncatedTensor x = g;
    x.coefficients()[0] = 0.0;
    TruncatedTensor result = x;
    TruncatedTensor term = x;
    for (int k = 2; k <= g.depth(); ++k) {
        term = tensor_mul(term, x);
        const double sign = (k % 2 == 0) ? -1.0 : 1.0;
        result += (sign / k) * term;
    }
    return result;
}

/// Group inverse as the finite Neumann series sum_{k=0..N} (1 - g)^k.
inline TruncatedTensor group_inverse(const TruncatedTensor& g) {
    if (!g.is_group_like())
        throw DomainError("group_inverse needs a group-like tensor (scalar part 1), got " +
                          std::to_string(g.scalar()));
    TruncatedTensor y = -g;
    y.coefficients()[0] = 0.0;
    TruncatedTensor result = TruncatedTensor::unit(g.dim(), g.depth());
    TruncatedTensor term = result;
    for (int k = 1; k <= g.depth(); ++k) {
        term = tensor_mul(term, y);
        result += term;
    }
    return result;
}

/// delta_lambda: level i scaled by lambda^i. The scalar part is untouched.
inline TruncatedTensor dilate(double lambda, const TruncatedTensor& g) {
    TruncatedTensor out = g;
    double f = 1.0;
    for (int i = 1; i <= g.depth(); ++i) {
        f *= lambda;
        for (double& v : out.level(i)) v *= f;
    }
    return out;
}

/// Canonical projection onto level i.
inline std::vector<double> project(const TruncatedTensor& g, int i) {
    const auto l = g.level(i);
    return {l.begin(), l.end()};
}

/// Largest absolute coefficient difference; shapes must agree.
inline double max_abs_difference(const TruncatedTensor& a, const TruncatedTensor& b) {
    require_same_shape(a.shape(), b.shape(), "max_abs_difference");
    double m = 0.0;
    const auto ca = a.coefficients();
    const auto cb = b.coefficients();
    for (std::size_t p = 0; p < ca.size(); ++p) m = std::max(m, std::abs(ca[p] - cb[p]));
    return m;
}

inline double max_abs_coefficient(const TruncatedTensor& a) {
    double m = 0.0;
    for (double v : a.coefficients()) m = std::max(m, std::abs(v));
    return m;
}

// JSON: {"dim": d, "depth": N, "levels": [[...], ...]}

inline void to_json(nlohmann::json& j, const TruncatedTensor& t) {
    nlohmann::json levels = nlohmann::json::array();
    for (int i = 0; i <= t.depth(); ++i) levels.push_back(project(t, i));
    j = nlohmann::json{{"dim", t.dim()}, {"depth", t.depth()}, {"levels", std::move(levels)}};
}

inline void from_json(const nlohmann::json& j, TruncatedTensor& t) {
    try {
        const int dim = j.at("dim").get<int>();
        const int depth = j.at("depth").get<int>();
        t = TruncatedTensor::from_levels(dim, depth, j.at("levels").get<std::vector<std::vector<double>>>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("tensor JSON: ") + e.what());
    }
}

} // namespace nilpath
