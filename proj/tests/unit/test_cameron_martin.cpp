#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace nilpath;

namespace {

CMElement section(const CovarianceModel& m, double knot = 1.0, double a = 1.0) {
    return CMElement(m, 1, {knot}, {a});
}

double slope_log2(const std::vector<double>& q, int n0) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < q.size(); ++i) {
        x.push_back(n0 + static_cast<double>(i));
        y.push_back(std::log2(q[i]));
    }
    return linear_fit(x, y).slope;
}

double shoelace(const SampledPath& p, int i, int j) {
    double a = 0.0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k)
        a += p.value(k)[i] * p.value(k + 1)[j] - p.value(k)[j] * p.value(k + 1)[i];
    return 0.5 * a;
}

EventSpec event(EventKind kind, double threshold, int c1 = 0, int c2 = 1) {
    EventSpec e;
    e.kind = kind;
    e.threshold = threshold;
    e.coord = c1;
    e.coord2 = c2;
    return e;
}

} // namespace

TEST(CmNormTest, Examples) {
    const auto bm = CovarianceModel::brownian();
    EXPECT_EQ(cm_norm(CMElement::zero(bm, 2)), 0.0);
    EXPECT_EQ(cm_norm(CMElement(bm, 1, {0.3, 0.7}, {0.0, 0.0})), 0.0);
    EXPECT_DOUBLE_EQ(cm_norm(section(bm)), 1.0);
    std::mt19937_64 rng(51);
    const auto h = random_cm_element(CovarianceModel::fbm(0.3), 2, 4, 1.7, rng);
    EXPECT_NEAR(cm_norm(h), 1.7, 1e-12);
    EXPECT_NEAR(cm_norm(h.scaled(-2.5)), 2.5 * 1.7, 1e-12);
}

TEST(CmNormTest, NegativeFormIsModelError) {
    const CovarianceModel bad("bad", 0.5, [](double s, double t) { return s == t && s > 0.0 ? -1.0 : 0.0; });
    EXPECT_THROW(cm_norm(CMElement(bad, 1, {0.5}, {1.0})), ModelError);
}

TEST(CmEvalTest, KernelSections) {
    const auto grid = dyadic_grid(4);
    const auto p = cm_eval(section(CovarianceModel::brownian()), grid);
    for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_DOUBLE_EQ(p.value(k)[0], grid[k]);
    const double H = 0.35;
    const auto f = cm_eval(section(CovarianceModel::fbm(H)), grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        EXPECT_NEAR(f.value(k)[0], 0.5 * (std::pow(t, 2 * H) + 1 - std::pow(1 - t, 2 * H)), 1e-15);
    }
}

TEST(CmEvalTest, LinearityAndReproducingProperty) {
    const auto m = CovarianceModel::fbm(0.6);
    const std::vector<double> knots{0.25, 0.5, 1.0};
    const CMElement a(m, 1, knots, {1.0, -2.0, 0.5});
    const CMElement b(m, 1, knots, {0.3, 0.1, -1.0});
    const CMElement sum(m, 1, knots, {1.3, -1.9, -0.5});
    const auto pb = cm_eval(b, {0.0, 0.25, 0.5, 1.0}), ps = cm_eval(sum, {0.0, 0.25, 0.5, 1.0});
    const auto pa4 = cm_eval(a, {0.0, 0.25, 0.5, 1.0});
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(ps.value(k)[0], pa4.value(k)[0] + pb.value(k)[0], 1e-14);
    for (std::size_t j = 0; j < knots.size(); ++j) {
        double direct = 0.0;
        for (std::size_t i = 0; i < knots.size(); ++i) direct += a.coeff(i, 0) * m(knots[i], knots[j]);
        EXPECT_EQ(pa4.value(j + 1)[0], direct);
    }
}

TEST(RateFunctionTest, Examples) {
    const auto bm = CovarianceModel::brownian();
    EXPECT_EQ(rate_function(CMElement::zero(bm, 1)), 0.0);
    EXPECT_DOUBLE_EQ(rate_function(section(bm)), 0.5);
    std::mt19937_64 rng(52);
    const auto h = random_cm_element(bm, 2, 4, 1.0, rng);
    EXPECT_NEAR(rate_function(h.scaled(3.0)), 9.0 * rate_function(h), 1e-12);
}

TEST(DyadicQ2Test, ExamplesAndDecay) {
    const auto bm = CovarianceModel::brownian();
    for (int n = 0; n <= 8; ++n) EXPECT_NEAR(dyadic_q2(section(bm), n), std::ldexp(1.0, -n), 1e-15);
    EXPECT_EQ(dyadic_q2(CMElement::zero(bm, 2), 5), 0.0);
    EXPECT_THROW(dyadic_q2(section(bm), 15), ResourceError);

    std::vector<double> q;
    for (int n = 4; n <= 10; ++n) q.push_back(dyadic_q2(section(CovarianceModel::fbm(0.4)), n));
    EXPECT_LE(slope_log2(q, 4), -0.2);
}

TEST(DyadicQ2Test, BoundIsUniformInLevel) {
    std::mt19937_64 rng(53);
    for (double H : {0.3, 0.4, 0.5, 0.75}) {
        const auto m = CovarianceModel::fbm(H);
        for (int trial = 0; trial < 5; ++trial) {
            const auto h = random_cm_element(m, 2, 4, 1.0, rng);
            double early = 0.0, late = 0.0;
            for (int n = 0; n <= 12; ++n) {
                const double ratio = dyadic_q2(h, n) / std::pow(2.0, n * (1 - 4 * H) / 2);
                ASSERT_TRUE(std::isfinite(ratio));
                (n <= 6 ? early : late) = std::max(n <= 6 ? early : late, ratio);
            }
            EXPECT_LE(late, 1.05 * early) << "H=" << H;
        }
    }
}

TEST(GaussianProductTest, FourthMomentIdentity) {
    // E(U^2 V^2) = 2 E(UV)^2 + E(U^2) E(V^2) for centered jointly Gaussian U, V
    const auto m = CovarianceModel::fbm(0.7);
    const GaussianSampler sampler(m, 1, 4);
    const int n = 200000;
    std::vector<SampledPath> batch;
    double sum = 0.0, sum2 = 0.0;
    for (int start = 0; start < n; start += 1000) {
        sampler.sample_batch(17, static_cast<std::uint64_t>(start), 1000, batch);
        for (const auto& x : batch) {
            const double u = x.value(6)[0] - x.value(4)[0];
            const double v = x.value(9)[0] - x.value(7)[0];
            sum += u * u * v * v;
            sum2 += u * u * v * v * u * u * v * v;
        }
    }
    const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
    auto inc = [&](double a, double b, double c, double d) { return m(b, d) - m(a, d) - m(b, c) + m(a, c); };
    const double s0 = 0.25, s1 = 0.375, t0 = 0.4375, t1 = 0.5625;
    const double uu = inc(s0, s1, s0, s1), vv = inc(t0, t1, t0, t1), uv = inc(s0, s1, t0, t1);
    EXPECT_NEAR(mean, 2 * uv * uv + uu * vv, 3 * se);
}

TEST(EmbeddingTest, QVariationExamples) {
    const auto bm = CovarianceModel::brownian();
    const auto zero = q_variation_embedding_report(CMElement::zero(bm, 1), 1.5, 6);
    EXPECT_EQ(zero.ratio, 0.0);
    const auto r = q_variation_embedding_report(section(bm), 1.5, 8);
    EXPECT_NEAR(r.path_norm, 1.0, 1e-12);
    EXPECT_NEAR(r.cm_norm, 1.0, 1e-15);
    EXPECT_NEAR(r.ratio, 1.0, 1e-12);
    EXPECT_THROW(q_variation_embedding_report(section(bm), 1.3, 6), DomainError);
    EXPECT_THROW(q_variation_embedding_report(section(bm), 2.0, 6), DomainError);
    EXPECT_THROW(q_variation_embedding_report(section(CovarianceModel::fbm(0.3)), 1.5, 6), DomainError);
    EXPECT_NO_THROW(q_variation_embedding_report(section(CovarianceModel::fbm(0.3)), 1.9, 6));
}

TEST(EmbeddingTest, QVariationBatchStableUnderRefinement) {
    const auto m = CovarianceModel::fbm(0.3);
    std::mt19937_64 rng(54);
    double max9 = 0.0, max10 = 0.0;
    for (int k = 0; k < 10; ++k) {
        const auto h = random_cm_element(m, 1, 4, 1.0, rng);
        max9 = std::max(max9, q_variation_embedding_report(h, 1.9, 9).ratio);
        max10 = std::max(max10, q_variation_embedding_report(h, 1.9, 10).ratio);
    }
    EXPECT_TRUE(std::isfinite(max10));
    EXPECT_NEAR(max10 / max9, 1.0, 0.1);
}

TEST(EmbeddingTest, HolderExamples) {
    const auto bm = CovarianceModel::brownian();
    EXPECT_EQ(holder_embedding_report(CMElement::zero(bm, 1), 6).ratio, 0.0);
    const auto r = holder_embedding_report(section(bm), 8);
    EXPECT_NEAR(r.path_norm, 1.0, 1e-12);
    EXPECT_NEAR(r.ratio, 1.0, 1e-12);
    std::mt19937_64 rng(55);
    const auto h = random_cm_element(CovarianceModel::fbm(0.4), 2, 4, 1.0, rng);
    EXPECT_NEAR(holder_embedding_report(h.scaled(4.0), 7).ratio, holder_embedding_report(h, 7).ratio, 1e-12);
}

TEST(EventSpecTest, JsonAndStatistics) {
    const auto e = nlohmann::json::parse(R"({"terminal_levy_area": {"coords": [0, 1], "threshold": 0.5}})")
                       .get<EventSpec>();
    EXPECT_EQ(e.kind, EventKind::terminal_levy_area);
    EXPECT_EQ(e.degree(), 2);
    EXPECT_EQ(nlohmann::json(e).get<EventSpec>().coord2, 1);
    EXPECT_THROW(nlohmann::json::parse(R"({"sup_norm": {"coord": 0, "threshold": 1}})").get<EventSpec>(),
                 UnknownKindError);
    EXPECT_THROW(nlohmann::json::parse(R"({"sup_level1": {"threshold": 1}})").get<EventSpec>(), ParseError);

    std::mt19937_64 rng(56);
    const auto x = testing_support::random_path(3, 9, rng);
    const auto lift = lift_piecewise_linear(x, 2);
    for (auto kind : {EventKind::sup_abs_level1, EventKind::sup_level1, EventKind::terminal_level1,
                      EventKind::terminal_levy_area}) {
        const auto ev = event(kind, 1.0, 2, 0);
        EXPECT_NEAR(event_statistic(ev, x), event_statistic(ev, lift), 1e-12) << ev.name();
        const auto scaled = lift_piecewise_linear(x.scaled(0.3), 2);
        EXPECT_NEAR(event_statistic(ev, scaled), std::pow(0.3, ev.degree()) * event_statistic(ev, lift), 1e-12);
    }
    EXPECT_THROW(event_statistic(event(EventKind::terminal_levy_area, 1.0), lift_piecewise_linear(x, 1)),
                 ShapeError);
}

TEST(RateInfimumTest, BrownianLevelOneEvents) {
    const auto bm = CovarianceModel::brownian();
    const auto sup = rate_infimum(event(EventKind::sup_abs_level1, 1.0), bm, 2, 9);
    EXPECT_NEAR(sup.value, 0.5, 1e-12);
    EXPECT_EQ(sup.active_time, 1.0);
    const auto h = cm_eval(sup.minimizer, dyadic_grid(6));
    for (std::size_t k = 0; k < h.size(); ++k) {
        EXPECT_NEAR(h.value(k)[0], h.times()[k], 1e-15);
        EXPECT_EQ(h.value(k)[1], 0.0);
    }
    EXPECT_NEAR(rate_function(sup.minimizer), sup.value, 1e-12);
    for (double a : {0.5, 1.0, 3.0}) {
        const auto t = rate_infimum(event(EventKind::terminal_level1, a), bm, 1, 5);
        EXPECT_NEAR(t.value, a * a / 2, 1e-12);
        const auto s = rate_infimum(event(EventKind::sup_level1, 2 * a), bm, 1, 5);
        EXPECT_NEAR(s.value, 4 * t.value, 1e-12);
    }
    EXPECT_EQ(rate_infimum(event(EventKind::sup_abs_level1, 0.0), bm, 1, 5).value, 0.0);
}

TEST(RateInfimumTest, InfeasibleIsInfinite) {
    const CovarianceModel flat("flat", 0.5, [](double, double) { return 0.0; });
    const auto r = rate_infimum(event(EventKind::terminal_level1, 1.0), flat, 1, 4);
    EXPECT_FALSE(r.feasible);
    EXPECT_TRUE(std::isinf(r.value));
}

TEST(RateInfimumTest, NeverAboveHandcraftedFeasibleElements) {
    for (const auto& m : {CovarianceModel::brownian(), CovarianceModel::fbm(0.4)}) {
        const auto sup = rate_infimum(event(EventKind::sup_abs_level1, 1.0), m, 1, 8);
        const auto term = rate_infimum(event(EventKind::terminal_level1, 1.0), m, 1, 8);
        // sections at 1/2, 3/4 and 1 scaled to reach 1 at their knot; the
        // last one also satisfies the terminal event
        for (double tau : {0.5, 0.75, 1.0}) {
            const auto h = section(m, tau, 1.0 / m(tau, tau));
            EXPECT_LE(sup.value, rate_function(h) + 1e-12);
        }
        const auto two = CMElement(m, 1, {0.5, 1.0}, {0.3, 0.0});
        const double v1 = cm_eval(two, {0.0, 1.0}).value(1)[0];
        const auto two_scaled = CMElement(m, 1, {0.5, 1.0}, {0.3, 1.0 - v1}).scaled(1.0);
        EXPECT_NEAR(cm_eval(two_scaled, {0.0, 1.0}).value(1)[0], 0.3 * m(0.5, 1.0) + (1.0 - v1) * m(1.0, 1.0), 1e-14);
        const double hit = std::abs(cm_eval(two_scaled, {0.0, 1.0}).value(1)[0]);
        EXPECT_LE(term.value, rate_function(two_scaled.scaled(1.0 / hit)) + 1e-12);
        EXPECT_LE(term.value, rate_function(section(m, 1.0, 1.0 / m(1.0, 1.0))) + 1e-12);
        EXPECT_LE(term.value, rate_function(CMElement(m, 1, {0.25, 1.0}, {-0.2, 1.0}).scaled(
                                  1.0 / std::abs(cm_eval(CMElement(m, 1, {0.25, 1.0}, {-0.2, 1.0}), {0.0, 1.0})
                                                     .value(1)[0]))) +
                                  1e-12);
    }
}

TEST(RateInfimumTest, BrownianAreaApproachesIsoperimetricValue) {
    const auto bm = CovarianceModel::brownian();
    const double pi = std::acos(-1.0);
    double previous = std::numeric_limits<double>::infinity();
    for (int level = 3; level <= 7; ++level) {
        const auto r = rate_infimum(event(EventKind::terminal_levy_area, 0.5), bm, 2, level);
        // discrete isoperimetry: polygons need at least the semicircle energy
        EXPECT_GE(r.value, pi * 0.5 - 1e-9);
        EXPECT_LE(r.value, previous + 1e-12);
        previous = r.value;
        const auto h = cm_eval(r.minimizer, dyadic_grid(level));
        EXPECT_NEAR(std::abs(shoelace(h, 0, 1)), 0.5, 1e-9);
        EXPECT_NEAR(rate_function(r.minimizer), r.value, 1e-9);
    }
    EXPECT_NEAR(previous, pi * 0.5, 0.01);
    // quadratic scaling in the threshold: J(4a) = 4 J(a) for an area event
    const auto a1 = rate_infimum(event(EventKind::terminal_levy_area, 0.5), bm, 2, 5);
    const auto a4 = rate_infimum(event(EventKind::terminal_levy_area, 2.0), bm, 2, 5);
    EXPECT_NEAR(a4.value, 4 * a1.value, 1e-9);
    // handcrafted feasible element: a square loop scaled to area 1/2
    const auto lift_area = [&](const CMElement& h) { return std::abs(shoelace(cm_eval(h, dyadic_grid(5)), 0, 1)); };
    const CMElement loop(bm, 2, {0.25, 0.5, 0.75, 1.0}, {4, 0, -4, 4, -4, -4, 4, -4});
    EXPECT_LE(a1.value, rate_function(loop.scaled(std::sqrt(0.5 / lift_area(loop)))) + 1e-12);
}
