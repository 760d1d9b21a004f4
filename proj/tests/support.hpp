#pragma once

#include "nilpath/nilpath.hpp"

#include <random>
#include <vector>

namespace testing_support {

inline nilpath::TruncatedTensor random_tensor(int dim, int depth, std::mt19937_64& rng, double scalar) {
    std::normal_distribution<double> normal(0.0, 1.0);
    nilpath::TruncatedTensor t(dim, depth);
    for (double& v : t.coefficients()) v = normal(rng);
    t.coefficients()[0] = scalar;
    return t;
}

/// Random piecewise-linear path on a random grid of `segments` segments.
inline nilpath::SampledPath random_path(int dim, int segments, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.2, 1.0);
    std::vector<double> times{0.0};
    double total = 0.0;
    std::vector<double> gaps(segments);
    for (double& g : gaps) total += (g = uniform(rng));
    double t = 0.0;
    for (int k = 0; k < segments; ++k) times.push_back(k + 1 == segments ? 1.0 : (t += gaps[k] / total));
    std::vector<double> values(static_cast<std::size_t>(dim), 0.0);
    for (int k = 0; k < segments; ++k)
        for (int q = 0; q < dim; ++q) values.push_back(values[values.size() - dim] + scale * normal(rng));
    return nilpath::SampledPath(dim, times, values);
}

inline nilpath::TruncatedTensor random_signature(int dim, int depth, std::mt19937_64& rng) {
    return nilpath::lift_piecewise_linear(random_path(dim, 4, rng, 0.7), depth).terminal();
}

inline double relative_difference(const nilpath::TruncatedTensor& a, const nilpath::TruncatedTensor& b) {
    return nilpath::max_abs_difference(a, b) / std::max(1.0, nilpath::max_abs_coefficient(a));
}

} // namespace testing_support
