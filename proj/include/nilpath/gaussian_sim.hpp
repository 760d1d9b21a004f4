#pragma once

// Zero-mean Gaussian paths with independent coordinates sampled on dyadic
// grids, their covariance models, and numerical checks of the increment
// covariance conditions
//   (c1) E|x_{s,t}|^2 <= c |t-s|^{2H}
//   (c2) |E(x_{s,s+h} x_{t,t+h})| <= c |t-s|^{2H} |h / (t-s)|^2, h < t-s

#include "nilpath/error.hpp"
#include "nilpath/parallel.hpp"
#include "nilpath/path_lift.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace nilpath {

inline constexpr int kMaxSamplingLevel = 12;
inline constexpr int kMaxCheckLevel = 10;
inline constexpr double kGramJitter = 1e-12;

/// Standard fractional Brownian motion covariance
/// (s^{2H} + t^{2H} - |t-s|^{2H}) / 2.
inline double fbm_covariance(double s, double t, double H) {
    if (!(H > 0.0 && H < 1.0)) throw DomainError("Hurst exponent must lie in (0, 1), got " + std::to_string(H));
    const double e = 2.0 * H;
    return 0.5 * (std::pow(std::abs(s), e) + std::pow(std::abs(t), e) - std::pow(std::abs(t - s), e));
}

/// Covariance c(s, t) of one scalar coordinate plus the Hurst-type
/// exponent H the conditions are stated with.
class CovarianceModel {
public:
    using Kernel = std::function<double(double, double)>;

    CovarianceModel(std::string name, double H, Kernel cov, double c_claimed = 1.0)
        : name_(std::move(name)), H_(H), c_claimed_(c_claimed), cov_(std::move(cov)) {
        if (!(H_ > 0.0 && H_ < 1.0)) throw ModelError("model H must lie in (0, 1), got " + std::to_string(H_));
        if (std::abs(cov_(0.0, 0.0)) > 1e-14) throw ModelError("covariance must vanish at (0, 0)");
    }

    static CovarianceModel brownian() {
        return CovarianceModel("bm", 0.5, [](double s, double t) { return std::min(s, t); });
    }

    static CovarianceModel fbm(double H) {
        if (!(H > 0.0 && H < 1.0)) throw ModelError("fbm H must lie in (0, 1), got " + std::to_string(H));
        return CovarianceModel("fbm", H, [H](double s, double t) { return fbm_covariance(s, t, H); });
    }

    /// Tabulated covariance on a grid in [0, 1], bilinearly interpolated
    /// (the covariance of the linearly interpolated process, hence PSD
    /// whenever the table is). The table must be symmetric.
    static CovarianceModel table(std::vector<double> times, std::vector<std::vector<double>> cov, double H,
                                 double c_claimed = 1.0) {
        const std::size_t n = times.size();
        if (n < 2 || times.front() != 0.0 || times.back() != 1.0)
            throw ModelError("covariance table grid must start at 0 and end at 1");
        for (std::size_t i = 1; i < n; ++i)
            if (!(times[i] > times[i - 1])) throw ModelError("covariance table grid must be increasing");
        if (cov.size() != n) throw ModelError("covariance table must be square over its grid");
        for (const auto& row : cov)
            if (row.size() != n) throw ModelError("covariance table must be square over its grid");
        double scale = 0.0;
        for (const auto& row : cov)
            for (double v : row) scale = std::max(scale, std::abs(v));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (std::abs(cov[i][j] - cov[j][i]) > 1e-12 * std::max(1.0, scale))
                    throw ModelError("covariance table is not symmetric at (" + std::to_string(i) + ", " +
                                     std::to_string(j) + ")");
        auto data = std::make_shared<const std::pair<std::vector<double>, std::vector<std::vector<double>>>>(
            std::move(times), std::move(cov));
        auto kernel = [data](double s, double t) {
            const auto& [g, c] = *data;
            auto locate = [&g](double x, std::size_t& i, double& w) {
                x = std::clamp(x, 0.0, 1.0);
                auto it = std::upper_bound(g.begin(), g.end(), x);
                i = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
                if (i + 1 >= g.size()) {
                    i = g.size() - 2;
                    w = 1.0;
                } else {
                    w = (x - g[i]) / (g[i + 1] - g[i]);
                }
            };
            std::size_t i = 0, j = 0;
            double wi = 0.0, wj = 0.0;
            locate(s, i, wi);
            locate(t, j, wj);
            return (1 - wi) * (1 - wj) * c[i][j] + wi * (1 - wj) * c[i + 1][j] + (1 - wi) * wj * c[i][j + 1] +
                   wi * wj * c[i + 1][j + 1];
        };
        return CovarianceModel("table", H, kernel, c_claimed);
    }

    const std::string& name() const { return name_; }
    double H() const { return H_; }
    double c_claimed() const { return c_claimed_; }
    double operator()(double s, double t) const { return cov_(s, t); }

    /// Gram matrix over the given times.
    Eigen::MatrixXd gram(const std::vector<double>& times) const {
        const auto n = static_cast<Eigen::Index>(times.size());
        Eigen::MatrixXd G(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) {
                const double v = cov_(times[i], times[j]);
                G(i, j) = v;
                G(j, i) = v;
            }
        return G;
    }

private:
    std::string name_;
    double H_;
    double c_claimed_;
    Kernel cov_;
};

/// Lower Cholesky factor of G; one retry with kGramJitter * I, then ModelError.
inline Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& G) {
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const Eigen::MatrixXd J = G + kGramJitter * Eigen::MatrixXd::Identity(G.rows(), G.cols());
    llt.compute(J);
    if (llt.info() != Eigen::Success)
        throw ModelError("covariance Gram matrix is not positive semidefinite (factorization failed after jitter)");
    return llt.matrixL();
}

/// Model spec {"name": "bm" | "fbm" | "table", "H": .., "c": ..,
/// "file": path} or, for tables, inline {"times": [..], "cov": [[..]]}.
/// Relative table files resolve against `base_dir`.
inline CovarianceModel model_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    try {
        const std::string name = j.at("name").get<std::string>();
        const double c = j.value("c", 1.0);
        if (name == "bm") return CovarianceModel::brownian();
        if (name == "fbm") {
            const double H = j.at("H").get<double>();
            if (!(H > 0.0 && H < 1.0)) throw ModelError("fbm H must lie in (0, 1), got " + std::to_string(H));
            return CovarianceModel("fbm", H, [H](double s, double t) { return fbm_covariance(s, t, H); }, c);
        }
        if (name == "table") {
            nlohmann::json table = j;
            if (j.contains("file")) {
                auto path = std::filesystem::path(j.at("file").get<std::string>());
                if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
                std::ifstream in(path);
                if (!in) throw ParseError("cannot open covariance table " + path.string());
                try {
                    table = nlohmann::json::parse(in);
                } catch (const nlohmann::json::exception& e) {
                    throw ParseError("covariance table " + path.string() + ": " + e.what());
                }
            }
            return CovarianceModel::table(table.at("times").get<std::vector<double>>(),
                                          table.at("cov").get<std::vector<std::vector<double>>>(),
                                          j.at("H").get<double>(), c);
        }
        throw ParseError("unknown covariance model \"" + name + "\" (expected bm, fbm or table)");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model spec: ") + e.what());
    }
}

/// A sampled path with the provenance needed to regenerate it.
struct GaussianSample {
    SampledPath path;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::string model_name;
    int level = 0;
};

/// Samples d independent coordinates with the model covariance on the
/// dyadic grid of level M by X = L Z, L the Cholesky factor of the Gram
/// matrix over the positive grid times. Sample `stream` of `seed` depends
/// on nothing else: batching never changes a sample.
class GaussianSampler {
public:
    GaussianSampler(CovarianceModel model, int dim, int level)
        : model_(std::move(model)), dim_(dim), level_(level) {
        if (dim_ < 1) throw ShapeError("sampler dimension must be positive");
        if (level_ < 0) throw GridError("sampling level must be non-negative");
        if (level_ > kMaxSamplingLevel)
            throw ResourceError("sampling level " + std::to_string(level_) + " exceeds the cap of " +
                                std::to_string(kMaxSamplingLevel));
        times_ = dyadic_grid(level_);
        const std::vector<double> positive(times_.begin() + 1, times_.end());
        const Eigen::MatrixXd G = model_.gram(positive);
        const auto n = G.rows();
        const Eigen::MatrixXd L = cholesky_with_jitter(G);
        n_ = static_cast<std::size_t>(n);
        factor_.assign(n_ * (n_ + 1) / 2, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j <= i; ++j) factor_[row_start(i) + j] = L(i, j);
    }

    const CovarianceModel& model() const { return model_; }
    int dim() const { return dim_; }
    int level() const { return level_; }
    const std::vector<double>& times() const { return times_; }

    SampledPath sample(std::uint64_t seed, std::uint64_t stream = 0) const {
        std::vector<SampledPath> out;
        sample_batch(seed, stream, 1, out);
        return std::move(out.front());
    }

    /// Samples streams [first_stream, first_stream + count) into `out`.
    void sample_batch(std::uint64_t seed, std::uint64_t first_stream, std::size_t count,
                      std::vector<SampledPath>& out) const {
        out.resize(count);
        const std::size_t d = static_cast<std::size_t>(dim_);
        // z and x are (n x count) row-major per coordinate
        std::vector<double> z(d * n_ * count), x(d * n_ * count);
        for (std::size_t b = 0; b < count; ++b) {
            auto engine = stream_engine(seed, first_stream + b);
            std::normal_distribution<double> normal(0.0, 1.0);
            for (std::size_t q = 0; q < d; ++q)
                for (std::size_t j = 0; j < n_; ++j) z[(q * n_ + j) * count + b] = normal(engine);
        }
        for (std::size_t q = 0; q < d; ++q) {
            const double* zq = z.data() + q * n_ * count;
            double* xq = x.data() + q * n_ * count;
            for (std::size_t i = 0; i < n_; ++i) {
                double* xi = xq + i * count;
                const double* Li = factor_.data() + row_start(i);
                for (std::size_t j = 0; j <= i; ++j) {
                    const double l = Li[j];
                    const double* zj = zq + j * count;
                    for (std::size_t b = 0; b < count; ++b) xi[b] += l * zj[b];
                }
            }
        }
        for (std::size_t b = 0; b < count; ++b) {
            if (out[b].size() != times_.size() || out[b].dim() != dim_) out[b] = SampledPath(dim_, times_);
            for (std::size_t i = 0; i < n_; ++i) {
                auto v = out[b].mutable_value(i + 1);
                for (std::size_t q = 0; q < d; ++q) v[q] = x[(q * n_ + i) * count + b];
            }
        }
    }

private:
    static std::size_t row_start(std::size_t i) { return i * (i + 1) / 2; }

    CovarianceModel model_;
    int dim_;
    int level_;
    std::vector<double> times_;
    std::size_t n_ = 0;
    std::vector<double> factor_; // packed lower triangle
};

inline GaussianSample sample_gaussian_path(const CovarianceModel& model, int dim, int level, std::uint64_t seed,
                                           std::uint64_t stream = 0) {
    GaussianSampler sampler(model, dim, level);
    return GaussianSample{sampler.sample(seed, stream), seed, stream, model.name(), level};
}

/// Grid estimates of the constants c1 and c2 with their argmax.
struct ConditionReport {
    int level = 0;
    double H = 0.0;
    double c1_est = 0.0;
    double c1_s = 0.0, c1_t = 0.0;
    double c2_est = 0.0;
    double c2_s = 0.0, c2_t = 0.0, c2_h = 0.0;
};

/// c1 over all grid pairs s < t; c2 over grid triples with
/// h <= (t - s) / 2 and t + h <= 1.
inline ConditionReport check_covariance_conditions(const CovarianceModel& model, int level) {
    if (level < 1) throw GridError("condition check needs level >= 1");
    if (level > kMaxCheckLevel)
        throw ResourceError("condition check level " + std::to_string(level) + " exceeds the cap of " +
                            std::to_string(kMaxCheckLevel));
    const auto t = dyadic_grid(level);
    const std::size_t n = t.size();
    std::vector<double> C(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double a = model(t[i], t[j]);
            if (std::abs(a - model(t[j], t[i])) > 1e-12) throw ModelError("covariance is not symmetric");
            C[i * n + j] = a;
            C[j * n + i] = a;
        }
    auto c = [&](std::size_t i, std::size_t j) { return C[i * n + j]; };
    const double two_h = 2.0 * model.H();

    ConditionReport r;
    r.level = level;
    r.H = model.H();
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const double var = c(b, b) - 2.0 * c(a, b) + c(a, a);
            const double ratio = var / std::pow(t[b] - t[a], two_h);
            if (ratio > r.c1_est) {
                r.c1_est = ratio;
                r.c1_s = t[a];
                r.c1_t = t[b];
            }
        }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 2; b < n; ++b) {
            const double gap = t[b] - t[a];
            const double scale = std::pow(gap, 2.0 - two_h);
            for (std::size_t k = 1; 2 * k <= b - a && b + k < n; ++k) {
                const double cross = c(a + k, b + k) - c(a + k, b) - c(a, b + k) + c(a, b);
                const double h = t[k];
                const double ratio = std::abs(cross) * scale / (h * h);
                if (ratio > r.c2_est) {
                    r.c2_est = ratio;
                    r.c2_s = t[a];
                    r.c2_t = t[b];
                    r.c2_h = h;
                }
            }
        }
    return r;
}

inline void to_json(nlohmann::json& j, const ConditionReport& r) {
    j = nlohmann::json{{"level", r.level},
                       {"H", r.H},
                       {"c1_est", r.c1_est},
                       {"c1_argmax", {{"s", r.c1_s}, {"t", r.c1_t}}},
                       {"c2_est", r.c2_est},
                       {"c2_argmax", {{"s", r.c2_s}, {"t", r.c2_t}, {"h", r.c2_h}}}};
}

} // namespace nilpath
