#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mlcd/rng.hpp"
#include "mlcd/tensor.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mlcd;
using doctest::Approx;

TEST_CASE("l2_normalize") {
    const std::vector<float> v{3, 4};
    auto u = l2_normalize(std::span<const float>(v));
    CHECK(u[0] == Approx(0.6));
    CHECK(u[1] == Approx(0.8));

    const std::vector<float> axis{0, 0, 5};
    u = l2_normalize(std::span<const float>(axis));
    CHECK(u == std::vector<float>{0, 0, 1});

    const std::vector<float> zero{0, 0};
    CHECK_CODE(l2_normalize(std::span<const float>(zero)), ErrorCode::ZeroVector);
}

TEST_CASE("l2_normalize gives unit norm parallel output") {
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> v(1 + rng.uniform_below(20));
        for (auto& x : v) x = rng.normal() * 100;
        const auto u = l2_normalize(std::span<const double>(v));
        CHECK(std::abs(l2_norm(std::span<const double>(u)) - 1.0) < 1e-6);
        const double c = dot(std::span<const double>(u), std::span<const double>(v)) / l2_norm(std::span<const double>(v));
        CHECK(c == Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("FeatureMatrix invariants") {
    CHECK_CODE(FeatureMatrix(1, 2, {1.0f, 1.0f}, true), ErrorCode::NotNormalized);
    CHECK_CODE(FeatureMatrix(1, 2, {NAN, 1.0f}, false), ErrorCode::NonFinite);
    CHECK_CODE(FeatureMatrix(1, 2, {INFINITY, 1.0f}, false), ErrorCode::NonFinite);
    CHECK_CODE(FeatureMatrix(2, 2, {1.0f, 0.0f}, false), ErrorCode::DimensionMismatch);
    CHECK_CODE(FeatureMatrix::normalized_rows(Matrix<float>(2, 3)), ErrorCode::ZeroVector);

    Rng rng(1);
    const auto F = oracle::random_features(rng, 300, 12);
    CHECK(F.max_norm_deviation() < 1e-5);
}

TEST_CASE("cosine_scores") {
    const FeatureMatrix E(1, 2, {1, 0}, true);
    const FeatureMatrix W(2, 2, {1, 0, 0, 1}, true);
    const auto S = cosine_scores(E, W);
    CHECK(S(0, 0) == 1.0f);
    CHECK(S(0, 1) == 0.0f);

    const FeatureMatrix E2(1, 2, {0.6f, 0.8f}, true);
    const FeatureMatrix W2(1, 2, {1, 0}, true);
    CHECK(cosine_scores(E2, W2)(0, 0) == Approx(0.6).epsilon(1e-7));

    const FeatureMatrix W3(1, 3, {1, 0, 0}, true);
    CHECK_CODE(cosine_scores(E, W3), ErrorCode::DimensionMismatch);
    CHECK_CODE(cosine_scores(FeatureMatrix(1, 2, {2, 0}, false), W), ErrorCode::NotNormalized);
}

TEST_CASE("cosine_scores of a matrix with itself has unit diagonal") {
    Rng rng(2);
    const auto F = oracle::random_features(rng, 64, 33);
    const auto S = cosine_scores(F, F);
    for (std::size_t i = 0; i < F.rows(); ++i) CHECK(std::abs(S(i, i) - 1.0f) < 1e-5);
    for (float s : S.data()) CHECK(std::abs(s) <= 1.0001f);
}

TEST_CASE("normalize_backward examples") {
    const std::vector<double> x{2, 0};
    auto g = normalize_backward(x, std::vector<double>{0, 1});
    CHECK(g[0] == Approx(0.0));
    CHECK(g[1] == Approx(0.5));
    g = normalize_backward(x, std::vector<double>{1, 0});
    CHECK(g[0] == Approx(0.0));
    CHECK(g[1] == Approx(0.0));
    CHECK_CODE(normalize_backward(std::vector<double>{0, 0}, std::vector<double>{1, 0}), ErrorCode::ZeroVector);
}

TEST_CASE("normalize_backward matches finite differences and is orthogonal to x") {
    Rng rng(3);
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t d = 1 + rng.uniform_below(8);
        std::vector<double> x(d), a(d);
        for (auto& v : x) v = rng.normal();
        for (auto& v : a) v = rng.normal();
        // L(y) = a.y + 0.5 |y|^4 style nonlinearity through sum of cubes
        auto L = [&](const std::vector<double>& v) {
            const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
            double s = 0;
            for (std::size_t i = 0; i < d; ++i) s += a[i] * v[i] / n + std::pow(v[i] / n, 3);
            return s;
        };
        const double n = l2_norm(std::span<const double>(x));
        std::vector<double> gy(d);
        for (std::size_t i = 0; i < d; ++i) gy[i] = a[i] + 3 * std::pow(x[i] / n, 2);
        const auto analytic = normalize_backward(x, gy);
        const auto numeric = oracle::central_difference(x, L, 1e-5);
        for (std::size_t i = 0; i < d; ++i) worst = std::max(worst, oracle::relative_error(analytic[i], numeric[i]));
        const double on = l2_norm(std::span<const double>(analytic));
        CHECK(std::abs(dot(std::span<const double>(analytic), std::span<const double>(x))) <= 1e-6 * std::max(on * n, 1e-30));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("select_rows and to_double") {
    const FeatureMatrix F(3, 2, {1, 0, 0, 1, 0.6f, 0.8f}, true);
    const std::vector<std::size_t> idx{2, 0};
    const auto S = F.select_rows(idx);
    CHECK(S.rows() == 2);
    CHECK(S(0, 1) == 0.8f);
    CHECK(S(1, 0) == 1.0f);
    CHECK(S.normalized());
    CHECK(F.to_double()(2, 0) == static_cast<double>(0.6f));
}
