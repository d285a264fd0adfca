#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "hlstm/numerics.hpp"
#include "hlstm/rng.hpp"
#include "hlstm/tensor.hpp"
#include "test_util.hpp"

using namespace hlstm;

TEST(Sigmoid, KnownValues) {
    EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
    EXPECT_NEAR(sigmoid(1.0), 0.7310585786300049, 1e-15);
    for (double x : {-30.0, -2.5, 0.3, 7.0, 40.0}) EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-15);
    EXPECT_GT(sigmoid(-800.0), -1e-300);
    EXPECT_LE(sigmoid(800.0), 1.0);
}

TEST(Softmax, UniformAndShift) {
    const Tensor p = softmax(Tensor::vector({2.0, 2.0, 2.0}));
    for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);

    const Tensor a = softmax(Tensor::vector({0.5, -1.0, 3.0}));
    const Tensor b = softmax(Tensor::vector({100.5, 99.0, 103.0}));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(Softmax, ScalarOracle) {
    const Tensor p = softmax(Tensor::vector({1.0, 2.0, 3.0}));
    EXPECT_NEAR(p[0], 0.09003057317038046, 1e-12);
    EXPECT_NEAR(p[1], 0.24472847105479764, 1e-12);
    EXPECT_NEAR(p[2], 0.6652409557748219, 1e-12);
}

TEST(Softmax, EmptyThrows) { EXPECT_THROW(softmax(Tensor(Shape{0})), std::invalid_argument); }

TEST(Softmax, SumsToOneOverWideRange) {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const Tensor p = softmax(test::random_tensor({1 + rng.below(10)}, rng, -50.0, 50.0));
        EXPECT_NEAR(sum(p), 1.0, 1e-9);
        for (double v : p.data()) EXPECT_GE(v, 0.0);
    }
}

TEST(CrossEntropy, KnownValues) {
    EXPECT_DOUBLE_EQ(cross_entropy(Tensor::vector({0.0, 1.0, 0.0}), 1), 0.0);
    EXPECT_NEAR(cross_entropy(Tensor::vector({1.0 / 3, 1.0 / 3, 1.0 / 3}), 2), std::log(3.0), 1e-15);
    EXPECT_NEAR(cross_entropy(Tensor::vector({0.1, 0.9}), 0), 2.302585092994046, 1e-12);
    EXPECT_NEAR(cross_entropy(Tensor::vector({0.0, 1.0}), 0), -std::log(kProbabilityFloor), 1e-12);
    EXPECT_THROW(cross_entropy(Tensor::vector({0.5, 0.5}), 2), std::out_of_range);
}

TEST(CrossEntropy, SoftmaxGradientMatchesFiniteDifferences) {
    Rng rng(11);
    Tensor logits = test::random_tensor({5}, rng, -3.0, 3.0);
    const Tensor probs = softmax(logits);
    Tensor grad(Shape{5});
    softmax_cross_entropy_grad(probs.data(), 2, 1.0, grad.data());
    test::expect_gradient([&] { return cross_entropy(softmax(logits), 2); }, logits, grad, "softmax cross-entropy");
}

TEST(CrossEntropy, GradientVanishesUnderTheFloor) {
    const Tensor probs = Tensor::vector({1.0, 0.0});
    Tensor grad(Shape{2});
    softmax_cross_entropy_grad(probs.data(), 1, 1.0, grad.data());
    EXPECT_EQ(grad[0], 0.0);
    EXPECT_EQ(grad[1], 0.0);
}

TEST(FiniteDiff, AnalyticOracles) {
    const Tensor g1 = finite_diff_grad([](const Tensor& x) { return x[0] * x[0]; }, Tensor::vector({3.0}), 1e-4);
    EXPECT_NEAR(g1[0], 6.0, 1e-6);
    const Tensor g2 = finite_diff_grad([](const Tensor& x) { return sigmoid(x[0]); }, Tensor::vector({0.0}), 1e-4);
    EXPECT_NEAR(g2[0], 0.25, 1e-6);

    Rng rng(5);
    const Tensor a = test::random_tensor({4, 4}, rng);
    const Tensor x = test::random_tensor({4}, rng);
    auto quad = [&](const Tensor& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) s += v[i] * a.at(i, j) * v[j];
        }
        return s;
    };
    const Tensor g = finite_diff_grad(quad, x, 1e-5);
    for (std::size_t i = 0; i < 4; ++i) {
        double expected = 0.0;
        for (std::size_t j = 0; j < 4; ++j) expected += (a.at(i, j) + a.at(j, i)) * x[j];
        EXPECT_NEAR(g[i], expected, 1e-5);
    }
}

TEST(FiniteDiff, NonFiniteThrows) {
    auto f = [](const Tensor& x) { return x[0] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0; };
    EXPECT_THROW(finite_diff_grad(f, Tensor::vector({0.0}), 1e-3), std::domain_error);
}

TEST(RelativeError, Floor) {
    EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
    EXPECT_NEAR(relative_error(2.0, 1.0), 0.5, 1e-15);
    EXPECT_NEAR(relative_error(1e-9, 0.0), 1e-3, 1e-15);
}

TEST(Matmul, MatchesNaiveProducts) {
    Rng rng(9);
    const Tensor a = test::random_tensor({3, 5}, rng);
    const Tensor b = test::random_tensor({5, 4}, rng);
    const Tensor c = matmul(a, b);
    Tensor tn({5, 4});
    Tensor nt({3, 3});
    matmul_tn_acc(a, c, tn);
    matmul_nt_acc(a, a, nt);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 5; ++k) s += a.at(i, k) * b.at(k, j);
            EXPECT_NEAR(c.at(i, j), s, 1e-14);
        }
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 5; ++k) s += a.at(i, k) * a.at(j, k);
            EXPECT_NEAR(nt.at(i, j), s, 1e-14);
        }
    }
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 3; ++k) s += a.at(k, i) * c.at(k, j);
            EXPECT_NEAR(tn.at(i, j), s, 1e-13);
        }
    }
    EXPECT_THROW(matmul(a, a), std::invalid_argument);
    const Tensor y = matvec(a, Tensor::vector({1, 0, 0, 0, 0}));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y[i], a.at(i, 0));
}

TEST(Tensor, ShapeAndArithmetic) {
    Tensor t({2, 3}, 1.5);
    EXPECT_EQ(t.size(), 6u);
    EXPECT_EQ(t.rank(), 2u);
    EXPECT_THROW(t.dim(2), std::out_of_range);
    EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
    const Tensor r = t.reshaped({3, 2});
    EXPECT_EQ(r.dim(0), 3u);
    EXPECT_THROW(t.reshaped({4, 2}), std::invalid_argument);
    Tensor u = t + t;
    EXPECT_DOUBLE_EQ(u.at(1, 2), 3.0);
    u -= t;
    EXPECT_EQ(u, t);
    EXPECT_THROW(t += r, std::invalid_argument);
    EXPECT_DOUBLE_EQ(dot(t, t), 6 * 2.25);
    EXPECT_TRUE(t.all_finite());
    t[0] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(t.all_finite());
}

TEST(Rng, DeterministicAndInRange) {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
    Rng r(1);
    double mean = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(r.below(7), 7u);
        mean += r.normal();
    }
    EXPECT_NEAR(mean / 20000.0, 0.0, 0.05);
}
