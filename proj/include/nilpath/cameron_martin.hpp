#pragma once

// Finite kernel expansions in the reproducing kernel Hilbert space of a
// covariance model, the rate function, dyadic quadratic variation and
// embedding diagnostics, and closed-form rate infima for threshold events.

#include "nilpath/error.hpp"
#include "nilpath/gaussian_sim.hpp"
#include "nilpath/group_metrics.hpp"
#include "nilpath/path_lift.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace nilpath {

/// h(t) = sum_i a_i c(t_i, t) with a_i in R^d; coeffs are row-major
/// (knot-major), coeffs[i * dim + q] is coordinate q of a_i.
class CMElement {
public:
    CMElement(CovarianceModel model, int dim, std::vector<double> knots, std::vector<double> coeffs)
        : model_(std::move(model)), dim_(dim), knots_(std::move(knots)), coeffs_(std::move(coeffs)) {
        if (dim_ < 1) throw ShapeError("CM element dimension must be positive");
        if (coeffs_.size() != knots_.size() * static_cast<std::size_t>(dim_))
            throw ShapeError("CM element needs dim coefficients per knot");
        for (double t : knots_)
            if (!(t >= 0.0 && t <= 1.0)) throw DomainError("CM knots must lie in [0, 1]");
    }

    static CMElement zero(CovarianceModel model, int dim) { return CMElement(std::move(model), dim, {}, {}); }

    const CovarianceModel& model() const { return model_; }
    int dim() const { return dim_; }
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& coeffs() const { return coeffs_; }
    double coeff(std::size_t i, int q) const { return coeffs_[i * static_cast<std::size_t>(dim_) + q]; }

    CMElement scaled(double lambda) const {
        CMElement out = *this;
        for (double& a : out.coeffs_) a *= lambda;
        return out;
    }

    /// sum_q a_q^T G a_q over the knots' Gram matrix G.
    double quadratic_form() const {
        const std::size_t n = knots_.size();
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double inner = 0.0;
                for (int q = 0; q < dim_; ++q) inner += coeff(i, q) * coeff(j, q);
                if (inner != 0.0) total += inner * model_(knots_[i], knots_[j]);
            }
        return total;
    }

    /// h(t), written into out (length dim).
    void evaluate(double t, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < knots_.size(); ++i) {
            const double k = model_(knots_[i], t);
            for (int q = 0; q < dim_; ++q) out[q] += coeff(i, q) * k;
        }
    }

private:
    CovarianceModel model_;
    int dim_;
    std::vector<double> knots_;
    std::vector<double> coeffs_;
};

inline double cm_norm(const CMElement& h) {
    const double qf = h.quadratic_form();
    if (qf < -1e-10)
        throw ModelError("negative Cameron-Martin quadratic form " + std::to_string(qf) + " (covariance not PSD)");
    return std::sqrt(std::max(qf, 0.0));
}

/// I(h) = |h|_H^2 / 2.
inline double rate_function(const CMElement& h) {
    const double n = cm_norm(h);
    return 0.5 * n * n;
}

/// h on the grid. The kernel vanishes at time zero, so the path starts at
/// the origin; the first value is pinned to exact zero.
inline SampledPath cm_eval(const CMElement& h, const std::vector<double>& grid) {
    SampledPath out(h.dim(), grid);
    for (std::size_t k = 1; k < grid.size(); ++k) h.evaluate(grid[k], out.mutable_value(k));
    return out;
}

/// Q_n(h) = sum_k |h_{k/2^n, (k+1)/2^n}|^2.
inline double dyadic_q2(const CMElement& h, int n) {
    if (n < 0) throw GridError("dyadic level must be non-negative");
    if (n > 14) throw ResourceError("dyadic_q2 level is capped at 14, got " + std::to_string(n));
    const SampledPath p = cm_eval(h, dyadic_grid(n));
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
        const auto a = p.value(k);
        const auto b = p.value(k + 1);
        for (int q = 0; q < h.dim(); ++q) total += (b[q] - a[q]) * (b[q] - a[q]);
    }
    return total;
}

/// Open interval (max(1, 1/(H + 1/4)), 2) of admissible variation exponents.
inline std::pair<double, double> admissible_q_range(double H) {
    return {std::max(1.0, 1.0 / (H + 0.25)), 2.0};
}

inline void check_admissible_q(double q, double H) {
    const auto [lo, hi] = admissible_q_range(H);
    if (!(q > lo && q < hi))
        throw DomainError("q = " + std::to_string(q) + " outside the admissible range (1 v 1/(H+1/4), 2) = (" +
                          std::to_string(lo) + ", " + std::to_string(hi) + ") for H = " + std::to_string(H));
}

struct EmbeddingReport {
    double exponent = 0.0; // q for variation, H for Holder
    int grid_level = 0;
    double path_norm = 0.0;
    double cm_norm = 0.0;
    double ratio = 0.0;
};

inline void to_json(nlohmann::json& j, const EmbeddingReport& r) {
    j = nlohmann::json{{"exponent", r.exponent},
                       {"grid_level", r.grid_level},
                       {"path_norm", r.path_norm},
                       {"cm_norm", r.cm_norm},
                       {"ratio", r.ratio}};
}

namespace detail {

inline EmbeddingReport finish_report(double exponent, int level, double path_norm, double norm) {
    return EmbeddingReport{exponent, level, path_norm, norm, norm > 0.0 ? path_norm / norm : 0.0};
}

} // namespace detail

/// |h|_{q-var} of the level-one path on the level-`grid_level` dyadic grid
/// against |h|_H.
inline EmbeddingReport q_variation_embedding_report(const CMElement& h, double q, int grid_level = 10) {
    check_admissible_q(q, h.model().H());
    if (grid_level > 12) throw ResourceError("q-variation grid level is capped at 12");
    const GroupPath x = lift_piecewise_linear(cm_eval(h, dyadic_grid(grid_level)), 1);
    return detail::finish_report(q, grid_level, p_variation_norm(x, q), cm_norm(h));
}

/// |h|_{H-Holder} of the level-one path on a dyadic grid against |h|_H.
inline EmbeddingReport holder_embedding_report(const CMElement& h, int grid_level = 10) {
    if (grid_level > 12) throw ResourceError("Holder grid level is capped at 12");
    const double H = h.model().H();
    const GroupPath x = lift_piecewise_linear(cm_eval(h, dyadic_grid(grid_level)), 1);
    return detail::finish_report(H, grid_level, holder_norm(x, H), cm_norm(h));
}

/// Random kernel expansion with `n_knots` uniform knots in (0, 1] and
/// standard normal coefficients, rescaled so that |h|_H = norm.
template <typename Engine>
CMElement random_cm_element(const CovarianceModel& model, int dim, int n_knots, double norm, Engine& rng) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<double> knots(static_cast<std::size_t>(n_knots));
        for (double& t : knots) t = 1.0 - uniform(rng);
        std::vector<double> coeffs(knots.size() * static_cast<std::size_t>(dim));
        for (double& a : coeffs) a = normal(rng);
        CMElement h(model, dim, std::move(knots), std::move(coeffs));
        const double n = cm_norm(h);
        if (n > 1e-8) return h.scaled(norm / n);
    }
    throw ModelError("could not draw a Cameron-Martin element of positive norm");
}

// Threshold events on lifted paths ------------------------------------------

enum class EventKind { sup_abs_level1, sup_level1, terminal_level1, terminal_levy_area };

/// statistic(x) >= threshold, where statistic is one of
///   sup_abs_level1     max_t |x^i_t|
///   sup_level1         max_t x^i_t
///   terminal_level1    |x^i_1|
///   terminal_levy_area |A^{ij}_1|, A the antisymmetric part of level two
/// Coordinates are zero-based. The statistic of delta_eps x is eps^degree
/// times that of x.
struct EventSpec {
    EventKind kind = EventKind::sup_abs_level1;
    int coord = 0;
    int coord2 = 1;
    double threshold = 1.0;

    int degree() const { return kind == EventKind::terminal_levy_area ? 2 : 1; }
    int required_depth() const { return degree(); }
    int required_dim() const { return 1 + std::max(coord, kind == EventKind::terminal_levy_area ? coord2 : 0); }

    static const char* kind_name(EventKind k) {
        switch (k) {
        case EventKind::sup_abs_level1: return "sup_abs_level1";
        case EventKind::sup_level1: return "sup_level1";
        case EventKind::terminal_level1: return "terminal_level1";
        case EventKind::terminal_levy_area: return "terminal_levy_area";
        }
        return "?";
    }
    const char* name() const { return kind_name(kind); }
};

inline void to_json(nlohmann::json& j, const EventSpec& e) {
    nlohmann::json body{{"threshold", e.threshold}};
    if (e.kind == EventKind::terminal_levy_area)
        body["coords"] = {e.coord, e.coord2};
    else
        body["coord"] = e.coord;
    j = nlohmann::json{{e.name(), std::move(body)}};
}

/// {"<kind>": {"coord": i, "threshold": a}} or, for areas,
/// {"terminal_levy_area": {"coords": [i, j], "threshold": a}}.
inline void from_json(const nlohmann::json& j, EventSpec& e) {
    if (!j.is_object() || j.size() != 1) throw ParseError("event must be an object with a single kind key");
    const std::string key = j.begin().key();
    const nlohmann::json& body = j.begin().value();
    static constexpr EventKind kinds[] = {EventKind::sup_abs_level1, EventKind::sup_level1,
                                          EventKind::terminal_level1, EventKind::terminal_levy_area};
    bool found = false;
    for (EventKind k : kinds)
        if (key == EventSpec::kind_name(k)) {
            e.kind = k;
            found = true;
        }
    if (!found) throw UnknownKindError("unknown event kind \"" + key + "\"");
    try {
        e.threshold = body.at("threshold").get<double>();
        if (e.kind == EventKind::terminal_levy_area) {
            const auto c = body.at("coords").get<std::vector<int>>();
            if (c.size() != 2) throw ParseError("terminal_levy_area needs two coords");
            e.coord = c[0];
            e.coord2 = c[1];
            if (e.coord == e.coord2) throw DomainError("terminal_levy_area coords must differ");
        } else {
            e.coord = body.at("coord").get<int>();
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("event: ") + ex.what());
    }
    if (e.coord < 0 || e.coord2 < 0) throw DomainError("event coordinates must be non-negative");
    if (!std::isfinite(e.threshold)) throw DomainError("event threshold must be finite");
}

inline void check_event_fits(const EventSpec& e, int dim, int depth) {
    if (e.required_dim() > dim)
        throw ShapeError(std::string(e.name()) + " needs dimension >= " + std::to_string(e.required_dim()));
    if (e.required_depth() > depth)
        throw ShapeError(std::string(e.name()) + " needs lift depth >= " + std::to_string(e.required_depth()));
}

/// Event statistic of a lifted path.
inline double event_statistic(const EventSpec& e, const GroupPath& x) {
    check_event_fits(e, x.dim(), x.depth());
    const std::size_t d = static_cast<std::size_t>(x.dim());
    switch (e.kind) {
    case EventKind::sup_abs_level1:
    case EventKind::sup_level1: {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double v = x.coefficients(k)[1 + e.coord];
            best = std::max(best, e.kind == EventKind::sup_abs_level1 ? std::abs(v) : v);
        }
        return best;
    }
    case EventKind::terminal_level1: return std::abs(x.coefficients(x.size() - 1)[1 + e.coord]);
    case EventKind::terminal_levy_area: {
        const auto l2 = x.coefficients(x.size() - 1).subspan(x.shape().level_offset(2), d * d);
        const std::size_t i = e.coord, j = e.coord2;
        return std::abs(0.5 * (l2[i * d + j] - l2[j * d + i]));
    }
    }
    return 0.0;
}

/// Same statistic for the lift of the piecewise-linear path through the
/// knots of `path` (the area is the shoelace sum, no lift is built).
inline double event_statistic(const EventSpec& e, const SampledPath& path) {
    check_event_fits(e, path.dim(), e.required_depth());
    const std::size_t n = path.size();
    switch (e.kind) {
    case EventKind::sup_abs_level1:
    case EventKind::sup_level1: {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) {
            const double v = path.value(k)[e.coord];
            best = std::max(best, e.kind == EventKind::sup_abs_level1 ? std::abs(v) : v);
        }
        return best;
    }
    case EventKind::terminal_level1: return std::abs(path.value(n - 1)[e.coord]);
    case EventKind::terminal_levy_area: {
        double area = 0.0;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const auto a = path.value(k);
            const auto b = path.value(k + 1);
            area += a[e.coord] * b[e.coord2] - a[e.coord2] * b[e.coord];
        }
        return std::abs(0.5 * area);
    }
    }
    return 0.0;
}

inline bool event_holds(const EventSpec& e, const GroupPath& x) { return event_statistic(e, x) >= e.threshold; }

struct RateInfimum {
    double value = 0.0;
    CMElement minimizer;
    bool feasible = true;
    double active_time = 1.0;
};

/// inf { I(h) : event holds for the lift of h } over kernel expansions with
/// knots on the positive level-`level` dyadic grid.
///
/// Level-one events reduce to the point constraint |h^i(tau)| = a with the
/// active time tau ranging over the grid; the minimizer is the single kernel
/// section a c(tau, .) / c(tau, tau) with value a^2 / (2 c(tau, tau)).
///
/// For areas, with G = L L^T on the grid and h^i = G alpha, h^j = G beta,
/// the shoelace area of the interpolant is u^T K v / 2 with K = L^T S L,
/// u = L^T alpha, v = L^T beta and S the antisymmetric successor matrix,
/// while I = (|u|^2 + |v|^2) / 2. The top singular pair of K gives the
/// infimum 2a / sigma_max(K).
inline RateInfimum rate_infimum(const EventSpec& e, const CovarianceModel& model, int dim, int level) {
    check_event_fits(e, dim, e.required_depth());
    if (level < 0) throw GridError("rate_infimum level must be non-negative");
    const double a = e.threshold;
    const std::size_t d = static_cast<std::size_t>(dim);
    if (a <= 0.0) return RateInfimum{0.0, CMElement::zero(model, dim), true, 0.0};

    const auto grid = dyadic_grid(level);
    const double inf = std::numeric_limits<double>::infinity();

    if (e.kind != EventKind::terminal_levy_area) {
        double best = inf;
        double tau = 1.0;
        for (std::size_t k = 1; k < grid.size(); ++k) {
            if (e.kind == EventKind::terminal_level1 && k + 1 != grid.size()) continue;
            const double v = model(grid[k], grid[k]);
            if (v <= 0.0) continue;
            const double value = a * a / (2.0 * v);
            if (value < best) {
                best = value;
                tau = grid[k];
            }
        }
        if (best == inf) return RateInfimum{inf, CMElement::zero(model, dim), false, 0.0};
        std::vector<double> coeffs(d, 0.0);
        coeffs[static_cast<std::size_t>(e.coord)] = a / model(tau, tau);
        return RateInfimum{best, CMElement(model, dim, {tau}, std::move(coeffs)), true, tau};
    }

    if (level > 10) throw ResourceError("area rate_infimum level is capped at 10");
    const std::vector<double> positive(grid.begin() + 1, grid.end());
    const auto n = static_cast<Eigen::Index>(positive.size());
    const Eigen::MatrixXd L = cholesky_with_jitter(model.gram(positive));
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        S(k, k + 1) = 1.0;
        S(k + 1, k) = -1.0;
    }
    const Eigen::MatrixXd K = L.transpose() * S * L;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(K, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sigma = svd.singularValues()(0);
    if (!(sigma > 0.0)) return RateInfimum{inf, CMElement::zero(model, dim), false, 1.0};
    const double value = 2.0 * a / sigma;
    // u = sqrt(I) u1, v = sqrt(I) v1 gives area sigma I / 2 = a
    const Eigen::VectorXd u = std::sqrt(value) * svd.matrixU().col(0);
    const Eigen::VectorXd v = std::sqrt(value) * svd.matrixV().col(0);
    const auto Lt = L.transpose().triangularView<Eigen::Upper>();
    const Eigen::VectorXd alpha = Lt.solve(u);
    const Eigen::VectorXd beta = Lt.solve(v);
    std::vector<double> coeffs(static_cast<std::size_t>(n) * d, 0.0);
    for (Eigen::Index k = 0; k < n; ++k) {
        coeffs[static_cast<std::size_t>(k) * d + static_cast<std::size_t>(e.coord)] = alpha(k);
        coeffs[static_cast<std::size_t>(k) * d + static_cast<std::size_t>(e.coord2)] = beta(k);
    }
    return RateInfimum{value, CMElement(model, dim, positive, std::move(coeffs)), true, 1.0};
}

} // namespace nilpath
