#pragma once

// Paths in G^N(R^d) and the distances between them: the homogeneous
// max-norm, the left-invariant metric it induces, and the uniform, Holder
// and p-variation path distances, all evaluated as sups over stored grids.

#include "nilpath/error.hpp"
#include "nilpath/tensor_algebra.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nilpath {

/// Time-indexed sequence of group-like tensors on a strictly increasing
/// grid in [0, 1] starting at 0, with the first point the unit element.
/// Points are stored contiguously; `coefficients(k)` exposes point k.
class GroupPath {
public:
    GroupPath() = default;

    /// Constant path at the unit element on the given grid.
    GroupPath(const TensorShape& shape, std::vector<double> times) : shape_(shape), times_(std::move(times)) {
        check_shape(shape_);
        validate_times(times_);
        stride_ = shape_.size();
        data_.assign(times_.size() * stride_, 0.0);
        for (std::size_t k = 0; k < times_.size(); ++k) data_[k * stride_] = 1.0;
    }

    static GroupPath from_points(std::vector<double> times, const std::vector<TruncatedTensor>& points) {
        if (points.empty()) throw GridError("group path needs at least one point");
        if (points.size() != times.size())
            throw GridError("group path has " + std::to_string(times.size()) + " times but " +
                            std::to_string(points.size()) + " points");
        GroupPath path(points.front().shape(), std::move(times));
        for (std::size_t k = 0; k < points.size(); ++k) {
            require_same_shape(path.shape_, points[k].shape(), "GroupPath");
            if (!points[k].is_group_like())
                throw DomainError("group path point " + std::to_string(k) + " is not group-like");
            std::copy(points[k].coefficients().begin(), points[k].coefficients().end(),
                      path.coefficients(k).begin());
        }
        const TruncatedTensor unit = TruncatedTensor::unit(path.shape_.dim, path.shape_.depth);
        if (max_abs_difference(points.front(), unit) > TruncatedTensor::kScalarTolerance)
            throw DomainError("group path must start at the unit element");
        return path;
    }

    const TensorShape& shape() const { return shape_; }
    int dim() const { return shape_.dim; }
    int depth() const { return shape_.depth; }
    std::size_t size() const { return times_.size(); }
    const std::vector<double>& times() const { return times_; }

    std::span<const double> coefficients(std::size_t k) const { return {data_.data() + k * stride_, stride_}; }
    std::span<double> coefficients(std::size_t k) { return {data_.data() + k * stride_, stride_}; }

    TruncatedTensor point(std::size_t k) const { return TruncatedTensor::from_coefficients(shape_, coefficients(k)); }
    TruncatedTensor terminal() const { return point(size() - 1); }

    static void validate_times(const std::vector<double>& t) {
        if (t.empty()) throw GridError("time grid is empty");
        if (t.front() != 0.0) throw GridError("time grid must start at 0");
        for (std::size_t k = 1; k < t.size(); ++k)
            if (!(t[k] > t[k - 1]))
                throw GridError("time grid must be strictly increasing (index " + std::to_string(k) + ")");
        if (t.back() > 1.0 + 1e-12) throw GridError("time grid must lie in [0, 1]");
    }

private:
    TensorShape shape_{};
    std::vector<double> times_;
    std::size_t stride_ = 0;
    std::vector<double> data_;
};

/// max_{i=1..N} |pi_i(g)|^{1/i}, the homogeneous norm used throughout.
inline double homogeneous_norm(const TruncatedTensor& g) {
    if (!g.is_group_like()) throw DomainError("homogeneous_norm needs a group-like tensor");
    return detail::homogeneous_norm(g.coefficients(), g.shape());
}

/// d(g, h) = ||g^{-1} (x) h||.
inline double cc_distance(const TruncatedTensor& g, const TruncatedTensor& h) {
    require_same_shape(g.shape(), h.shape(), "cc_distance");
    if (!g.is_group_like() || !h.is_group_like()) throw DomainError("cc_distance needs group-like tensors");
    const TensorShape& s = g.shape();
    if (g == h) return 0.0; // exact, where rounding under the 1/i roots would not be
    std::vector<double> inv(s.size()), prod(s.size());
    detail::inverse(inv, g.coefficients(), s);
    detail::mul(prod, inv, h.coefficients(), s);
    return detail::homogeneous_norm(prod, s);
}

namespace detail {

/// Inverses of every point of a path, contiguous with the path's stride.
inline std::vector<double> point_inverses(const GroupPath& x) {
    const std::size_t stride = x.shape().size();
    std::vector<double> inv(x.size() * stride);
    for (std::size_t k = 0; k < x.size(); ++k)
        inverse(std::span<double>(inv.data() + k * stride, stride), x.coefficients(k), x.shape());
    return inv;
}

/// Pairwise increment distances d(x_s, x_t) for s < t, evaluated lazily.
class IncrementDistance {
public:
    explicit IncrementDistance(const GroupPath& x)
        : x_(x), stride_(x.shape().size()), inv_(point_inverses(x)), prod_(stride_) {}

    double operator()(std::size_t s, std::size_t t) {
        mul(prod_, std::span<const double>(inv_.data() + s * stride_, stride_), x_.coefficients(t), x_.shape());
        return homogeneous_norm(prod_, x_.shape());
    }

    /// Writes x_s^{-1} (x) x_t into out.
    void increment(std::span<double> out, std::size_t s, std::size_t t) const {
        mul(out, std::span<const double>(inv_.data() + s * stride_, stride_), x_.coefficients(t), x_.shape());
    }

private:
    const GroupPath& x_;
    std::size_t stride_;
    std::vector<double> inv_;
    std::vector<double> prod_;
};

} // namespace detail

/// Sorted union of two grids (exact duplicates merged).
inline std::vector<double> common_refinement(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Evaluates x on a new grid inside [0, times.back()]. Between stored
/// points the path is continued along the group geodesic of its level-one
/// increment, x_t = x_{t_k} (x) exp(theta * pi_1(x_{t_k}^{-1} (x) x_{t_{k+1}})),
/// which is exact when x is the lift of piecewise-linear data on its grid.
inline GroupPath resample(const GroupPath& x, std::vector<double> new_times) {
    GroupPath::validate_times(new_times);
    if (new_times.back() > x.times().back() + 1e-15)
        throw GridError("resample: new grid extends past the end of the path");
    const TensorShape& s = x.shape();
    const std::size_t d = static_cast<std::size_t>(s.dim);
    GroupPath out(s, new_times);
    std::vector<double> delta(d), scratch(2 * s.level_size(s.depth));
    const auto& t = x.times();
    std::size_t k = 0;
    for (std::size_t j = 0; j < new_times.size(); ++j) {
        const double tj = new_times[j];
        while (k + 1 < t.size() && t[k + 1] <= tj) ++k;
        if (t[k] == tj || k + 1 == t.size()) {
            std::copy(x.coefficients(k).begin(), x.coefficients(k).end(), out.coefficients(j).begin());
            continue;
        }
        const double theta = (tj - t[k]) / (t[k + 1] - t[k]);
        const auto a = x.coefficients(k);
        const auto b = x.coefficients(k + 1);
        // level-one increment is b_1 - a_1 for group-like points
        for (std::size_t q = 0; q < d; ++q) delta[q] = theta * (b[1 + q] - a[1 + q]);
        detail::chen_step(out.coefficients(j), a, delta, s, scratch);
    }
    return out;
}

namespace detail {

inline void require_compatible(const GroupPath& x, const GroupPath& y, const char* op) {
    require_same_shape(x.shape(), y.shape(), op);
}

/// Both paths on one grid: returned unchanged when grids agree, otherwise
/// resampled onto their common refinement.
inline std::pair<GroupPath, GroupPath> on_common_grid(const GroupPath& x, const GroupPath& y) {
    if (x.times() == y.times()) return {x, y};
    auto grid = common_refinement(x.times(), y.times());
    const double end = std::min(x.times().back(), y.times().back());
    while (!grid.empty() && grid.back() > end) grid.pop_back();
    return {resample(x, grid), resample(y, grid)};
}

} // namespace detail

/// d_inf(x, y) = max over grid times of d(x_t, y_t).
inline double sup_distance(const GroupPath& x, const GroupPath& y) {
    detail::require_compatible(x, y, "sup_distance");
    if (x.times() != y.times()) {
        const auto [xr, yr] = detail::on_common_grid(x, y);
        return sup_distance(xr, yr);
    }
    const TensorShape& s = x.shape();
    std::vector<double> inv(s.size()), prod(s.size());
    double best = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const auto a = x.coefficients(k), b = y.coefficients(k);
        if (std::equal(a.begin(), a.end(), b.begin())) continue;
        detail::inverse(inv, x.coefficients(k), s);
        detail::mul(prod, inv, y.coefficients(k), s);
        best = std::max(best, detail::homogeneous_norm(prod, s));
    }
    return best;
}

inline void check_holder_exponent(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw DomainError("Holder exponent must lie in [0, 1], got " + std::to_string(alpha));
}

/// Grid sup of d(x_s, x_t) / (t - s)^alpha over pairs s < t.
inline double holder_norm(const GroupPath& x, double alpha) {
    check_holder_exponent(alpha);
    if (x.size() < 2) throw GridError("holder_norm needs at least two grid points");
    detail::IncrementDistance dist(x);
    const auto& t = x.times();
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double v = dist(i, j);
            if (v == 0.0) continue;
            best = std::max(best, alpha == 0.0 ? v : v / std::pow(t[j] - t[i], alpha));
        }
    return best;
}

/// Grid sup of d(x_s^{-1} (x) x_t, y_s^{-1} (x) y_t) / (t - s)^alpha.
inline double holder_distance(const GroupPath& x, const GroupPath& y, double alpha) {
    check_holder_exponent(alpha);
    detail::require_compatible(x, y, "holder_distance");
    if (x.times() != y.times()) {
        const auto [xr, yr] = detail::on_common_grid(x, y);
        return holder_distance(xr, yr, alpha);
    }
    if (x.size() < 2) throw GridError("holder_distance needs at least two grid points");
    const TensorShape& s = x.shape();
    detail::IncrementDistance dx(x), dy(y);
    std::vector<double> ix(s.size()), iy(s.size()), inv(s.size()), prod(s.size());
    const auto& t = x.times();
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            dx.increment(ix, i, j);
            dy.increment(iy, i, j);
            if (ix == iy) continue;
            detail::inverse(inv, ix, s);
            detail::mul(prod, inv, iy, s);
            const double v = detail::homogeneous_norm(prod, s);
            if (v == 0.0) continue;
            best = std::max(best, alpha == 0.0 ? v : v / std::pow(t[j] - t[i], alpha));
        }
    return best;
}

/// Exact p-variation over subsets of the stored grid:
/// best[j] = max_{i<j} best[i] + d(x_i, x_j)^p, result best[n-1]^{1/p}.
inline double p_variation_norm(const GroupPath& x, double p) {
    if (!(p >= 1.0)) throw DomainError("p-variation needs p >= 1, got " + std::to_string(p));
    if (x.size() > (std::size_t{1} << 12) + 1)
        throw ResourceError("p-variation grid is capped at 2^12 + 1 points");
    if (x.size() < 2) return 0.0;
    detail::IncrementDistance dist(x);
    std::vector<double> best(x.size(), 0.0);
    for (std::size_t j = 1; j < x.size(); ++j) {
        double b = 0.0;
        for (std::size_t i = 0; i < j; ++i) {
            const double v = dist(i, j);
            b = std::max(b, best[i] + (p == 1.0 ? v : std::pow(v, p)));
        }
        best[j] = b;
    }
    return std::pow(best.back(), 1.0 / p);
}

// JSON: {"dim", "depth", "times": [...], "points": [tensor, ...]}

inline void to_json(nlohmann::json& j, const GroupPath& x) {
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t k = 0; k < x.size(); ++k) points.push_back(x.point(k));
    j = nlohmann::json{{"dim", x.dim()}, {"depth", x.depth()}, {"times", x.times()}, {"points", std::move(points)}};
}

inline void from_json(const nlohmann::json& j, GroupPath& x) {
    std::vector<TruncatedTensor> points;
    std::vector<double> times;
    try {
        times = j.at("times").get<std::vector<double>>();
        for (const auto& p : j.at("points")) points.push_back(p.get<TruncatedTensor>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("group path JSON: ") + e.what());
    }
    x = GroupPath::from_points(std::move(times), points);
    if (j.contains("dim") && j.at("dim").get<int>() != x.dim()) throw ParseError("group path JSON: dim mismatch");
    if (j.contains("depth") && j.at("depth").get<int>() != x.depth())
        throw ParseError("group path JSON: depth mismatch");
}

} // namespace nilpath
