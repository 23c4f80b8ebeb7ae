#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "mlcd/clustering.hpp"
#include "mlcd/parallel.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mlcd;
using doctest::Approx;

namespace {

CentroidSet centroids_of(std::size_t k, std::size_t d, std::vector<float> data) {
    return CentroidSet{FeatureMatrix(k, d, std::move(data), true), 0, 0, 0.0};
}

std::vector<std::vector<float>> rows_of(const FeatureMatrix& F) {
    std::vector<std::vector<float>> out;
    for (std::size_t i = 0; i < F.rows(); ++i) out.emplace_back(F.row(i).begin(), F.row(i).end());
    return out;
}

}  // namespace

TEST_CASE("kmeans_init with k = n samples a permutation of the rows") {
    Rng rng(1);
    const auto F = oracle::random_features(rng, 12, 4);
    for (auto method : {InitMethod::Random, InitMethod::KMeansPP}) {
        const auto c = kmeans_init(F, 12, 7, method);
        auto got = rows_of(c.centroids);
        auto want = rows_of(F);
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        CHECK(got == want);
    }
}

TEST_CASE("kmeans_init is deterministic and seed dependent") {
    Rng rng(2);
    const auto F = oracle::random_features(rng, 100, 8);
    const auto a = kmeans_init(F, 10, 3);
    const auto b = kmeans_init(F, 10, 3);
    CHECK(a.centroids == b.centroids);
    CHECK_FALSE(kmeans_init(F, 10, 4).centroids == a.centroids);
    CHECK(kmeans_init(F, 10, 3, InitMethod::Random).centroids == kmeans_init(F, 10, 3, InitMethod::Random).centroids);
}

TEST_CASE("kmeans++ picks both antipodal points") {
    const FeatureMatrix F(2, 3, {0, 0, 1, 0, 0, -1}, true);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto c = kmeans_init(F, 2, seed);
        CHECK(c.centroids(0, 2) == -c.centroids(1, 2));
    }
}

TEST_CASE("kmeans++ never duplicates a point while distinct ones remain") {
    // Three copies of one direction and one far point; k=2 must take the far point.
    const FeatureMatrix F(4, 2, {1, 0, 1, 0, 1, 0, 0, 1}, true);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto c = kmeans_init(F, 2, seed);
        std::set<std::vector<float>> distinct;
        for (auto& r : rows_of(c.centroids)) distinct.insert(r);
        CHECK(distinct.size() == 2);
    }
}

TEST_CASE("kmeans_init errors") {
    const FeatureMatrix F(2, 2, {1, 0, 0, 1}, true);
    CHECK_CODE(kmeans_init(F, 3, 0), ErrorCode::TooManyClusters);
    CHECK(parse_init_method("random") == InitMethod::Random);
    CHECK(parse_init_method("kmeanspp") == InitMethod::KMeansPP);
    CHECK_CODE(parse_init_method("forgy"), ErrorCode::InvalidArgument);
}

TEST_CASE("kmeans_assign examples") {
    const auto W = centroids_of(2, 2, {1, 0, 0, 1});
    auto a = kmeans_assign(FeatureMatrix(2, 2, {1, 0, 0, 1}, true), W);
    CHECK(a.labels == std::vector<std::uint32_t>{0, 1});
    CHECK(a.objective == 0.0);

    a = kmeans_assign(FeatureMatrix(1, 2, {0.6f, 0.8f}, true), W);
    CHECK(a.labels == std::vector<std::uint32_t>{1});
    // direct ‖e - w‖² with the float-rounded inputs
    const double dx = static_cast<double>(0.6f), dy = static_cast<double>(0.8f) - 1.0;
    CHECK(a.objective == Approx(dx * dx + dy * dy).epsilon(1e-12));
    CHECK(a.objective == Approx(0.4).epsilon(1e-6));

    const auto same = centroids_of(3, 2, {0, 1, 0, 1, 0, 1});
    Rng rng(4);
    const auto F = oracle::random_features(rng, 30, 2);
    for (auto l : kmeans_assign(F, same).labels) CHECK(l == 0);

    CHECK_CODE(kmeans_assign(FeatureMatrix(1, 3, {1, 0, 0}, true), W), ErrorCode::DimensionMismatch);
}

TEST_CASE("kmeans_update examples") {
    const FeatureMatrix F(2, 2, {1, 0, 0, 1}, true);
    auto u = kmeans_update(F, HardAssignment{{0, 0}, 0}, 1);
    CHECK(u.centroids.centroids(0, 0) == Approx(0.70710678).epsilon(1e-6));
    CHECK(u.centroids.centroids(0, 1) == Approx(0.70710678).epsilon(1e-6));
    CHECK(u.repaired.empty());

    Rng rng(5);
    const auto G = oracle::random_features(rng, 5, 7);
    u = kmeans_update(G, HardAssignment{{0, 1, 1, 1, 1}, 0}, 2);
    for (std::size_t j = 0; j < 7; ++j) CHECK(u.centroids.centroids(0, j) == G(0, j));
}

TEST_CASE("empty cluster repair matches exhaustive farthest-sample scan") {
    Rng rng(6);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 10 + rng.uniform_below(30), d = 2 + rng.uniform_below(6), k = 4;
        const auto F = oracle::random_features(rng, n, d);
        HardAssignment a;
        for (std::size_t i = 0; i < n; ++i) a.labels.push_back(static_cast<std::uint32_t>(rng.uniform_below(3)));
        a.labels[0] = 0;
        a.labels[1] = 1;
        a.labels[2] = 2;  // class 3 is empty
        const auto u = kmeans_update(F, a, k);
        REQUIRE(u.repaired == std::vector<std::uint32_t>{3});

        // oracle: own-centroid = normalized member mean, then max-distance scan
        std::vector<std::vector<double>> mean(3, std::vector<double>(d, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) mean[a.labels[i]][j] += F(i, j);
        for (auto& m : mean) {
            double s = 0;
            for (double v : m) s += v * v;
            for (double& v : m) v /= std::sqrt(s);
        }
        std::size_t far = 0;
        double far_d = -1;
        for (std::size_t i = 0; i < n; ++i) {
            double dist = 0;
            for (std::size_t j = 0; j < d; ++j) dist += std::pow(F(i, j) - mean[a.labels[i]][j], 2);
            if (dist > far_d + 1e-9) {
                far_d = dist;
                far = i;
            }
        }
        for (std::size_t j = 0; j < d; ++j) CHECK(u.centroids.centroids(3, j) == F(far, j));
    }
}

TEST_CASE("kmeans_fit with k = n reaches zero objective after one pass") {
    Rng rng(7);
    const auto F = oracle::random_features(rng, 25, 6);
    const auto r = kmeans_fit(F, KMeansOptions{.k = 25, .max_iters = 10, .seed = 1});
    REQUIRE(r.objective_history.size() >= 2);
    CHECK(r.objective_history[1] == 0.0);
    CHECK(r.assignment.objective == 0.0);
}

TEST_CASE("kmeans_fit max_iters = 1 gives history of length 2") {
    Rng rng(8);
    const auto F = oracle::random_features(rng, 50, 4);
    const auto r = kmeans_fit(F, KMeansOptions{.k = 5, .max_iters = 1, .seed = 2});
    CHECK(r.objective_history.size() == 2);
    CHECK(r.repair_flags.size() == 2);
    CHECK(r.centroids.iterations_run == 1);
    CHECK(r.centroids.final_objective == r.objective_history.back());
}

TEST_CASE("kmeans_fit recovers two separated bundles") {
    Rng rng(9);
    const double angles[2] = {0.3, 2.1};
    std::vector<double> sums[2] = {{0, 0}, {0, 0}};
    MatrixD X(400, 2);
    for (std::size_t i = 0; i < 400; ++i) {
        const int b = static_cast<int>(i % 2);
        const double a = angles[b] + 0.1 * (rng.uniform01() - 0.5);
        X(i, 0) = std::cos(a);
        X(i, 1) = std::sin(a);
    }
    const auto F = FeatureMatrix::normalized_rows(X);
    for (std::size_t i = 0; i < 400; ++i) {
        sums[i % 2][0] += F(i, 0);
        sums[i % 2][1] += F(i, 1);
    }
    const auto r = kmeans_fit(F, KMeansOptions{.k = 2, .seed = 3});
    for (int b = 0; b < 2; ++b) {
        const double target = std::atan2(sums[b][1], sums[b][0]);
        double best = 10;
        for (std::size_t c = 0; c < 2; ++c) {
            const double got = std::atan2(r.centroids.centroids(c, 1), r.centroids.centroids(c, 0));
            best = std::min(best, std::abs(got - target));
        }
        CHECK(best < 1e-3);
    }
}

TEST_CASE("kmeans properties on random instances") {
    Rng rng(10);
    for (int t = 0; t < 60; ++t) {
        const std::size_t n = 5 + rng.uniform_below(150), d = 1 + rng.uniform_below(16);
        const std::size_t k = 1 + rng.uniform_below(std::min<std::size_t>(20, n));
        const auto F = oracle::random_features(rng, n, d);
        const auto method = rng.uniform_below(2) ? InitMethod::Random : InitMethod::KMeansPP;
        const auto r = kmeans_fit(F, KMeansOptions{.k = k, .max_iters = 30, .seed = rng.next_u64(), .method = method});
        for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
            if (!r.repair_flags[i]) CHECK(r.objective_history[i] <= r.objective_history[i - 1]);
        }
        double obj = 0;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(r.assignment.labels[i] == oracle::euclid_argmin(F, i, r.centroids.centroids));
            obj += 2.0 - 2.0 * dot(F.row(i), r.centroids.centroids.row(r.assignment.labels[i]));
        }
        CHECK(std::abs(r.assignment.objective - obj / n) < 1e-6);
        CHECK(r.assignment.objective >= 0.0);
        CHECK(r.assignment.objective <= 4.0);
        CHECK(r.centroids.centroids.max_norm_deviation() < 1e-5);
    }
}

TEST_CASE("kmeans_fit is independent of thread count") {
    Rng rng(11);
    const auto F = oracle::random_features(rng, 3000, 8);
    const KMeansOptions opt{.k = 12, .max_iters = 20, .seed = 5};
    const std::size_t before = num_threads();
    set_num_threads(1);
    const auto a = kmeans_fit(F, opt);
    set_num_threads(8);
    const auto b = kmeans_fit(F, opt);
    set_num_threads(before);
    CHECK(a.centroids.centroids == b.centroids.centroids);
    CHECK(a.assignment.labels == b.assignment.labels);
    CHECK(a.objective_history == b.objective_history);
}
