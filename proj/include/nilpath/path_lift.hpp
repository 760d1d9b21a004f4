#pragma once

// Exact step-N lifts of piecewise-linear paths (Chen products of segment
// exponentials) and the dyadic piecewise-linear approximation operator.

#include "nilpath/error.hpp"
#include "nilpath/group_metrics.hpp"
#include "nilpath/tensor_algebra.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nilpath {

/// R^d-valued path sampled on a grid in [0, 1] starting at 0 with value 0.
/// Read as the piecewise-linear interpolant of its knots. Values are
/// row-major: value(k) is the d-vector at times()[k].
class SampledPath {
public:
    SampledPath() = default;

    SampledPath(int dim, std::vector<double> times, std::vector<double> values)
        : dim_(dim), times_(std::move(times)), values_(std::move(values)) {
        if (dim_ < 1) throw ShapeError("path dimension must be positive");
        GroupPath::validate_times(times_);
        if (values_.size() != times_.size() * static_cast<std::size_t>(dim_))
            throw ShapeError("path has " + std::to_string(times_.size()) + " times but " +
                             std::to_string(values_.size()) + " values for dimension " + std::to_string(dim_));
        for (int q = 0; q < dim_; ++q)
            if (values_[q] != 0.0) throw DomainError("path must start at the origin");
    }

    /// Zero path on the grid; fill through mutable_value.
    SampledPath(int dim, std::vector<double> times)
        : SampledPath(dim, times, std::vector<double>(times.size() * static_cast<std::size_t>(dim), 0.0)) {}

    int dim() const { return dim_; }
    std::size_t size() const { return times_.size(); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& values() const { return values_; }

    std::span<const double> value(std::size_t k) const {
        return {values_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    /// Writable access; index 0 must stay at the origin.
    std::span<double> mutable_value(std::size_t k) {
        return {values_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }

    /// Coordinate q as a contiguous copy.
    std::vector<double> coordinate(int q) const {
        std::vector<double> out(size());
        for (std::size_t k = 0; k < size(); ++k) out[k] = values_[k * static_cast<std::size_t>(dim_) + q];
        return out;
    }

    SampledPath scaled(double lambda) const {
        SampledPath out = *this;
        for (double& v : out.values_) v *= lambda;
        return out;
    }

private:
    int dim_ = 1;
    std::vector<double> times_;
    std::vector<double> values_;
};

/// Signature of t -> t * delta on [0, 1]: exp(delta) in T^N.
inline TruncatedTensor segment_signature(std::span<const double> delta, int depth) {
    return tensor_exp(TruncatedTensor::from_increment(delta, depth));
}

/// Writes the lift of `path` into `out`, which must already have the
/// path's grid and the requested shape. Used to reuse storage in loops.
inline void lift_piecewise_linear_into(const SampledPath& path, GroupPath& out) {
    if (out.dim() != path.dim() || out.times() != path.times())
        throw ShapeError("lift target does not match the path's grid or dimension");
    const TensorShape& s = out.shape();
    const std::size_t d = static_cast<std::size_t>(s.dim);
    std::vector<double> delta(d), scratch(2 * s.level_size(s.depth));
    auto first = out.coefficients(0);
    std::fill(first.begin(), first.end(), 0.0);
    first[0] = 1.0;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const auto a = path.value(k);
        const auto b = path.value(k + 1);
        for (std::size_t q = 0; q < d; ++q) delta[q] = b[q] - a[q];
        auto next = out.coefficients(k + 1);
        detail::chen_step(next, out.coefficients(k), delta, s, scratch);
        // level one is the path itself, bit for bit
        for (std::size_t q = 0; q < d; ++q) next[1 + q] = b[q];
    }
}

/// Step-N lift on the path's own grid: points[k] = prod_{j<k} exp(delta_j).
inline GroupPath lift_piecewise_linear(const SampledPath& path, int depth) {
    if (path.size() < 2) throw GridError("lift needs at least one segment");
    GroupPath out(TensorShape{path.dim(), depth}, path.times());
    lift_piecewise_linear_into(path, out);
    return out;
}

/// Knots k / 2^m, k = 0..2^m.
inline std::vector<double> dyadic_grid(int m) {
    if (m < 0 || m > 20) throw GridError("dyadic level must lie in [0, 20], got " + std::to_string(m));
    const std::size_t n = std::size_t{1} << m;
    std::vector<double> t(n + 1);
    for (std::size_t k = 0; k <= n; ++k) t[k] = std::ldexp(static_cast<double>(k), -m);
    return t;
}

/// Phi_m: piecewise-linear path with knots exactly {k / 2^m}, values copied
/// from `path` at those knots. The path's grid must contain every knot.
inline SampledPath dyadic_approximation(const SampledPath& path, int m) {
    const auto knots = dyadic_grid(m);
    const auto& t = path.times();
    const std::size_t d = static_cast<std::size_t>(path.dim());
    std::vector<double> values(knots.size() * d);
    std::size_t j = 0;
    for (std::size_t k = 0; k < knots.size(); ++k) {
        while (j < t.size() && t[j] < knots[k] - 1e-12) ++j;
        if (j == t.size() || std::abs(t[j] - knots[k]) > 1e-12)
            throw GridError("path grid is missing the dyadic knot " + std::to_string(knots[k]) + " of level " +
                            std::to_string(m));
        const auto v = path.value(j);
        std::copy(v.begin(), v.end(), values.begin() + static_cast<std::ptrdiff_t>(k * d));
    }
    return SampledPath(path.dim(), knots, std::move(values));
}

/// S_N o Phi_m, on the level-m dyadic grid.
inline GroupPath lift_dyadic(const SampledPath& path, int m, int depth) {
    return lift_piecewise_linear(dyadic_approximation(path, m), depth);
}

// CSV: header "t,x1,...,xd", one row per knot.

inline SampledPath read_sampled_path_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto split = [](std::string_view s) {
        std::vector<std::string_view> out;
        std::size_t start = 0;
        while (true) {
            const auto pos = s.find(',', start);
            auto field = s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
            while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
            while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
                field.remove_suffix(1);
            out.push_back(field);
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
        return out;
    };

    if (!std::getline(in, line)) throw ParseError("empty input, expected header \"t,x1,...\"", 1);
    ++lineno;
    const auto header = split(line);
    if (header.size() < 2 || header[0] != "t") throw ParseError("header must be \"t,x1,...,xd\"", lineno);
    const int dim = static_cast<int>(header.size()) - 1;
    for (int q = 0; q < dim; ++q)
        if (header[q + 1] != "x" + std::to_string(q + 1))
            throw ParseError("header column " + std::to_string(q + 2) + " must be x" + std::to_string(q + 1), lineno);

    std::vector<double> times, values;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split(line);
        if (static_cast<int>(fields.size()) != dim + 1)
            throw ParseError("expected " + std::to_string(dim + 1) + " fields, got " + std::to_string(fields.size()),
                             lineno);
        for (std::size_t f = 0; f < fields.size(); ++f) {
            double v = 0.0;
            const auto* b = fields[f].data();
            const auto* e = b + fields[f].size();
            const auto [ptr, ec] = std::from_chars(b, e, v);
            if (ec != std::errc{} || ptr != e || fields[f].empty() || !std::isfinite(v))
                throw ParseError("field " + std::to_string(f + 1) + " is not a finite number", lineno);
            (f == 0 ? times : values).push_back(v);
        }
    }
    if (times.empty()) throw ParseError("no data rows", lineno);
    return SampledPath(dim, std::move(times), std::move(values));
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_sampled_path_csv(std::ostream& out, const SampledPath& path) {
    out << "t";
    for (int q = 0; q < path.dim(); ++q) out << ",x" << q + 1;
    out << "\n";
    for (std::size_t k = 0; k < path.size(); ++k) {
        out << format_double(path.times()[k]);
        for (double v : path.value(k)) out << "," << format_double(v);
        out << "\n";
    }
}

} // namespace nilpath
