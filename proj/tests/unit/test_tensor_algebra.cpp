#include "oracles/iterated_integrals.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace nilpath;
using testing_support::random_signature;
using testing_support::random_tensor;
using testing_support::relative_difference;

namespace {

TruncatedTensor exp_of(std::vector<double> delta, int depth) {
    return tensor_exp(TruncatedTensor::from_increment(delta, depth));
}

} // namespace

TEST(TensorShapeTest, LevelSizesAndOffsets) {
    const TensorShape s{3, 3};
    EXPECT_EQ(s.level_size(0), 1u);
    EXPECT_EQ(s.level_size(2), 9u);
    EXPECT_EQ(s.level_offset(2), 4u);
    EXPECT_EQ(s.size(), 1u + 3 + 9 + 27);
}

TEST(TensorShapeTest, RejectsBadShapes) {
    EXPECT_THROW(TruncatedTensor(0, 2), ShapeError);
    EXPECT_THROW(TruncatedTensor(2, 0), ShapeError);
    EXPECT_THROW(TruncatedTensor(17, 2), ResourceError);
}

TEST(TensorMulTest, UnitIsIdentity) {
    std::mt19937_64 rng(1);
    const auto b = random_tensor(2, 3, rng, 0.7);
    EXPECT_EQ(tensor_mul(TruncatedTensor::unit(2, 3), b), b);
    EXPECT_EQ(tensor_mul(b, TruncatedTensor::unit(2, 3)), b);
}

TEST(TensorMulTest, ShapeMismatchThrows) {
    EXPECT_THROW(tensor_mul(TruncatedTensor::unit(2, 2), TruncatedTensor::unit(3, 2)), ShapeError);
    EXPECT_THROW(tensor_mul(TruncatedTensor::unit(2, 2), TruncatedTensor::unit(2, 3)), ShapeError);
}

TEST(TensorMulTest, TwoSegmentProductMatchesIteratedIntegrals) {
    const auto g = tensor_mul(exp_of({1, 0}, 2), exp_of({0, 1}, 2));
    EXPECT_EQ(project(g, 1), (std::vector<double>{1, 1}));
    const std::vector<double> expected{0.5, 1.0, 0.0, 0.5};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g.level(2)[i], expected[i], 1e-15);

    oracle::PolyPath p{{0.0, 0.5, 1.0}, {{0, 0}, {1, 0}, {1, 1}}};
    const auto S = oracle::iterated_integrals(p, 2, 1.0, 1e-4);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g.level(2)[i], S[2][i], 1e-6);
}

TEST(TensorMulTest, OneDimensionalExponentialsAdd) {
    const auto g = tensor_mul(exp_of({1}, 3), exp_of({1}, 3));
    EXPECT_DOUBLE_EQ(g.level(1)[0], 2.0);
    EXPECT_DOUBLE_EQ(g.level(2)[0], 2.0);
    EXPECT_NEAR(g.level(3)[0], 4.0 / 3.0, 1e-15);

    oracle::PolyPath p{{0.0, 0.5, 1.0}, {{0}, {1}, {2}}};
    const auto S = oracle::iterated_integrals(p, 3, 1.0, 1e-4);
    EXPECT_NEAR(g.level(3)[0], S[3][0], 1e-6);
}

TEST(TensorMulTest, Associativity) {
    std::mt19937_64 rng(7);
    for (int d = 1; d <= 3; ++d)
        for (int N = 1; N <= 4; ++N) {
            const auto a = random_tensor(d, N, rng, 1.0);
            const auto b = random_tensor(d, N, rng, 0.3);
            const auto c = random_tensor(d, N, rng, -0.5);
            EXPECT_LE(relative_difference((a * b) * c, a * (b * c)), 1e-12) << "d=" << d << " N=" << N;
        }
}

TEST(TensorMulTest, TruncationConsistency) {
    std::mt19937_64 rng(8);
    const auto a = random_tensor(2, 4, rng, 1.0);
    const auto b = random_tensor(2, 4, rng, 1.0);
    const auto full = a * b;
    auto cut = [](const TruncatedTensor& t) {
        std::vector<std::vector<double>> levels;
        for (int i = 0; i < t.depth(); ++i) levels.push_back(project(t, i));
        return TruncatedTensor::from_levels(t.dim(), t.depth() - 1, levels);
    };
    EXPECT_EQ(cut(full), cut(a) * cut(b));
}

TEST(TensorExpTest, ZeroAndSegment) {
    EXPECT_EQ(tensor_exp(TruncatedTensor::zero(2, 3)), TruncatedTensor::unit(2, 3));
    const auto g = exp_of({1}, 3);
    EXPECT_EQ(project(g, 1)[0], 1.0);
    EXPECT_DOUBLE_EQ(project(g, 2)[0], 0.5);
    EXPECT_DOUBLE_EQ(project(g, 3)[0], 1.0 / 6.0);
}

TEST(TensorExpTest, RejectsNonzeroScalar) {
    EXPECT_THROW(tensor_exp(TruncatedTensor::unit(2, 2)), DomainError);
}

TEST(TensorLogTest, InverseOfExp) {
    EXPECT_EQ(tensor_log(TruncatedTensor::unit(2, 3)), TruncatedTensor::zero(2, 3));
    const auto l = tensor_log(TruncatedTensor::from_levels(1, 2, {{1}, {1}, {0.5}}));
    EXPECT_DOUBLE_EQ(l.level(1)[0], 1.0);
    EXPECT_DOUBLE_EQ(l.level(2)[0], 0.0);

    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_tensor(3, 4, rng, 0.0);
        EXPECT_LE(relative_difference(a, tensor_log(tensor_exp(a))), 1e-12);
        const auto g = random_signature(2, 4, rng);
        EXPECT_LE(relative_difference(g, tensor_exp(tensor_log(g))), 1e-12);
    }
    EXPECT_THROW(tensor_log(TruncatedTensor::zero(2, 2)), DomainError);
}

TEST(GroupInverseTest, UnitAndExponentials) {
    EXPECT_EQ(group_inverse(TruncatedTensor::unit(3, 3)), TruncatedTensor::unit(3, 3));
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_tensor(2, 3, rng, 0.0);
        EXPECT_LE(relative_difference(group_inverse(tensor_exp(a)), tensor_exp(-a)), 1e-12);
        const auto g = random_signature(3, 3, rng);
        EXPECT_LE(max_abs_difference(g * group_inverse(g), TruncatedTensor::unit(3, 3)), 1e-12);
        EXPECT_LE(max_abs_difference(group_inverse(g) * g, TruncatedTensor::unit(3, 3)), 1e-12);
    }
    EXPECT_THROW(group_inverse(TruncatedTensor::zero(2, 2)), DomainError);
}

TEST(GroupInverseTest, RecursionKernelMatchesNeumannSeries) {
    std::mt19937_64 rng(13);
    const auto g = random_tensor(3, 4, rng, 1.0);
    TruncatedTensor viaKernel(g.shape());
    detail::inverse(viaKernel.coefficients(), g.coefficients(), g.shape());
    EXPECT_LE(relative_difference(group_inverse(g), viaKernel), 1e-12);
}

TEST(DilateTest, Properties) {
    std::mt19937_64 rng(14);
    const auto g = random_signature(2, 3, rng);
    EXPECT_EQ(dilate(1.0, g), g);
    EXPECT_EQ(dilate(0.0, g), TruncatedTensor::unit(2, 3));
    EXPECT_LE(relative_difference(dilate(0.5, dilate(2.0, g)), g), 1e-15);
    const auto h = random_signature(2, 3, rng);
    EXPECT_LE(relative_difference(dilate(0.7, g * h), dilate(0.7, g) * dilate(0.7, h)), 1e-12);
}

TEST(ProjectTest, Levels) {
    EXPECT_EQ(project(TruncatedTensor::unit(2, 2), 0), std::vector<double>{1.0});
    const auto g = exp_of({0.3, -2.0}, 2);
    EXPECT_EQ(project(g, 1), (std::vector<double>{0.3, -2.0}));
    const auto l2 = project(g, 2);
    EXPECT_DOUBLE_EQ(l2[1], 0.3 * -2.0 / 2);
    EXPECT_DOUBLE_EQ(l2[3], 2.0);
    EXPECT_THROW(project(g, 3), DomainError);
    EXPECT_THROW(project(g, -1), DomainError);
}

TEST(TensorJsonTest, RoundTrip) {
    std::mt19937_64 rng(15);
    const auto g = random_signature(2, 3, rng);
    const nlohmann::json j = g;
    EXPECT_EQ(j.at("levels").size(), 4u);
    EXPECT_EQ(j.get<TruncatedTensor>(), g);
    EXPECT_THROW((nlohmann::json{{"dim", 2}}.get<TruncatedTensor>()), ParseError);
    EXPECT_THROW((nlohmann::json{{"dim", 2}, {"depth", 1}, {"levels", {{1}, {1, 2, 3}}}}.get<TruncatedTensor>()),
                 ShapeError);
}
