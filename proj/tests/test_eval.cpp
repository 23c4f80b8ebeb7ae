#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mlcd/eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mlcd;
using doctest::Approx;

namespace {

std::vector<std::uint32_t> random_labels(Rng& rng, std::size_t n, std::uint32_t classes) {
    std::vector<std::uint32_t> y(n);
    for (auto& v : y) v = static_cast<std::uint32_t>(rng.uniform_below(classes));
    return y;
}

// Two bundles around orthogonal axes with a clear angular gap.
std::pair<FeatureMatrix, std::vector<std::uint32_t>> bundles(Rng& rng, std::size_t n, std::size_t d) {
    MatrixD X(n, d, 0.0);
    std::vector<std::uint32_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<std::uint32_t>(rng.uniform_below(2));
        for (std::size_t j = 0; j < d; ++j) X(i, j) = 0.1 * rng.normal();
        X(i, y[i]) += 1.0;
    }
    return {FeatureMatrix::normalized_rows(X), y};
}

MatrixD random_rotation(Rng& rng, std::size_t d) {
    MatrixD Q(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        auto v = oracle::random_unit(rng, d);
        for (std::size_t p = 0; p < i; ++p) {
            double c = 0;
            for (std::size_t t = 0; t < d; ++t) c += v[t] * Q(p, t);
            for (std::size_t t = 0; t < d; ++t) v[t] -= c * Q(p, t);
        }
        const auto u = l2_normalize(std::span<const double>(v));
        std::copy(u.begin(), u.end(), Q.row(i).begin());
    }
    return Q;
}

FeatureMatrix rotate(const FeatureMatrix& F, const MatrixD& Q) {
    MatrixD out(F.rows(), F.cols(), 0.0);
    for (std::size_t r = 0; r < F.rows(); ++r)
        for (std::size_t i = 0; i < F.cols(); ++i)
            for (std::size_t j = 0; j < F.cols(); ++j) out(r, j) += F(r, i) * Q(i, j);
    return FeatureMatrix::normalized_rows(out);
}

// Exhaustive 1-NN by brute-force cosine scan.
double nn_oracle(const FeatureMatrix& tr, const std::vector<std::uint32_t>& ytr, const FeatureMatrix& te,
                 const std::vector<std::uint32_t>& yte) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < te.rows(); ++i) {
        std::size_t best = 0;
        double best_s = -2;
        for (std::size_t j = 0; j < tr.rows(); ++j) {
            double s = 0;
            for (std::size_t t = 0; t < te.cols(); ++t) s += static_cast<double>(te(i, t)) * tr(j, t);
            if (s > best_s) {
                best_s = s;
                best = j;
            }
        }
        hits += ytr[best] == yte[i];
    }
    return static_cast<double>(hits) / te.rows();
}

}  // namespace

TEST_CASE("knn_eval examples") {
    Rng rng(41);
    const auto F = oracle::random_features(rng, 200, 6);
    const auto y = random_labels(rng, 200, 7);
    CHECK(knn_eval(F, y, F, y, 1) == 1.0);

    auto [tr, ytr] = bundles(rng, 300, 8);
    auto [te, yte] = bundles(rng, 300, 8);
    CHECK(nn_oracle(tr, ytr, te, yte) == 1.0);
    CHECK(knn_eval(tr, ytr, te, yte, 1) == 1.0);
    CHECK(knn_eval(tr, ytr, te, yte, 5) == 1.0);

    const auto A = oracle::random_features(rng, 2000, 16);
    const auto B = oracle::random_features(rng, 2000, 16);
    const double acc = knn_eval(A, random_labels(rng, 2000, 10), B, random_labels(rng, 2000, 10), 5);
    CHECK(acc >= 0.05);
    CHECK(acc <= 0.2);

    CHECK_CODE(knn_eval(F, y, oracle::random_features(rng, 3, 5), std::vector<std::uint32_t>{0, 0, 0}, 1),
               ErrorCode::DimensionMismatch);
    CHECK_CODE(knn_eval(F, y, F, y, 0), ErrorCode::InvalidArgument);
}

TEST_CASE("knn vote ties go to the smaller summed distance") {
    // Query at (1,0). Two class-1 neighbors close, two class-0 neighbors farther.
    const float c1 = std::cos(0.1f), s1 = std::sin(0.1f), c2 = std::cos(0.5f), s2 = std::sin(0.5f);
    const FeatureMatrix tr(4, 2, {c2, s2, c2, -s2, c1, s1, c1, -s1}, true);
    const std::vector<std::uint32_t> ytr{0, 0, 1, 1};
    const FeatureMatrix te(1, 2, {1, 0}, true);
    CHECK(knn_eval(tr, ytr, te, std::vector<std::uint32_t>{1}, 4) == 1.0);
    // Equal distances: smaller label wins.
    const FeatureMatrix tr2(2, 2, {c1, s1, c1, -s1}, true);
    CHECK(knn_eval(tr2, std::vector<std::uint32_t>{3, 2}, te, std::vector<std::uint32_t>{2}, 2) == 1.0);
}

TEST_CASE("knn_eval is rotation invariant") {
    Rng rng(42);
    for (int t = 0; t < 5; ++t) {
        const auto tr = oracle::random_features(rng, 300, 8);
        const auto te = oracle::random_features(rng, 100, 8);
        const auto ytr = random_labels(rng, 300, 4), yte = random_labels(rng, 100, 4);
        const auto Q = random_rotation(rng, 8);
        CHECK(knn_eval(rotate(tr, Q), ytr, rotate(te, Q), yte, 5) == knn_eval(tr, ytr, te, yte, 5));
    }
}

TEST_CASE("linear_probe") {
    Rng rng(43);
    auto [tr, ytr] = bundles(rng, 400, 8);
    auto [te, yte] = bundles(rng, 400, 8);
    const auto r = linear_probe(tr, ytr, te, yte);
    CHECK(r.test_accuracy >= 0.99);
    CHECK(r.train_accuracy >= 0.99);
    CHECK(linear_probe(tr, ytr, tr, ytr).test_accuracy >= 0.99);

    const auto Q = random_rotation(rng, 8);
    CHECK(std::abs(linear_probe(rotate(tr, Q), ytr, rotate(te, Q), yte).test_accuracy - r.test_accuracy) <= 0.02);

    const auto A = oracle::random_features(rng, 2000, 16);
    const auto B = oracle::random_features(rng, 2000, 16);
    const double chance = linear_probe(A, random_labels(rng, 2000, 10), B, random_labels(rng, 2000, 10)).test_accuracy;
    CHECK(chance >= 0.05);
    CHECK(chance <= 0.2);

    CHECK_CODE(linear_probe(tr, std::vector<std::uint32_t>(400, 1), te, yte), ErrorCode::DegenerateLabels);
}

TEST_CASE("similarity_stats examples") {
    const FeatureMatrix centers(2, 2, {1, 0, 0, 1}, true);
    const FeatureMatrix E(2, 2, {1, 0, 0, 1}, true);
    const auto s = similarity_stats(E, centers, from_hard_labels(std::vector<std::uint32_t>{0, 1}, 2));
    CHECK(s.mean_si == 1.0);
    CHECK(s.mean_sj == 0.0);
    CHECK(s.positive_pairs == 2);
    CHECK(s.negative_pairs == 2);
    CHECK(s.positive_hist[kHistogramBins - 1] == 2);
    CHECK(s.negative_hist[kHistogramBins / 2] == 2);

    Rng rng(44);
    const auto R = oracle::random_features(rng, 500, 256);
    const auto C = oracle::random_features(rng, 20, 256);
    std::vector<std::uint32_t> y(500);
    for (auto& v : y) v = static_cast<std::uint32_t>(rng.uniform_below(20));
    const auto r = similarity_stats(R, C, from_hard_labels(y, 20));
    CHECK(std::abs(r.mean_si) < 0.1);
    CHECK(std::abs(r.mean_sj) < 0.1);

    LabelAssignment two;
    two.k = 3;
    two.lists = {{0, 1}, {2, 0}};
    const FeatureMatrix C3(3, 2, {1, 0, 0, 1, -1, 0}, true);
    const auto t = similarity_stats(E, C3, two);
    CHECK(t.positive_pairs == 4);
    CHECK(t.negative_pairs == 2);
    CHECK(t.mean_si == Approx((1.0 + 0.0 + 0.0 + 0.0) / 4));

    CHECK(histogram_bin(-1.0) == 0);
    CHECK(histogram_bin(1.0) == kHistogramBins - 1);
    CHECK(histogram_bin(5.0) == kHistogramBins - 1);
    CHECK(histogram_bin(-5.0) == 0);
}

TEST_CASE("similarity_stats matches a brute-force double loop") {
    Rng rng(45);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 1 + rng.uniform_below(100), k = 2 + rng.uniform_below(99), d = 1 + rng.uniform_below(12);
        const auto E = oracle::random_features(rng, n, d);
        const auto C = oracle::random_features(rng, k, d);
        LabelAssignment a;
        a.k = static_cast<std::uint32_t>(k);
        for (std::size_t i = 0; i < n; ++i) {
            const auto rank = oracle::brute_rank(E, i, C);
            a.lists.emplace_back(rank.begin(), rank.begin() + 1 + static_cast<std::ptrdiff_t>(rng.uniform_below(3)));
        }
        double si = 0, sj = 0;
        std::size_t np = 0, nn = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                double s = 0;
                for (std::size_t q = 0; q < d; ++q) s += static_cast<double>(E(i, q)) * C(j, q);
                if (std::find(a.lists[i].begin(), a.lists[i].end(), j) != a.lists[i].end()) {
                    si += s;
                    ++np;
                } else {
                    sj += s;
                    ++nn;
                }
            }
        const auto st = similarity_stats(E, C, a);
        CHECK(std::abs(st.mean_si - si / np) < 1e-6);
        CHECK(std::abs(st.mean_sj - (nn ? sj / nn : 0.0)) < 1e-6);
        CHECK(std::accumulate(st.positive_hist.begin(), st.positive_hist.end(), std::uint64_t{0}) == np);
        CHECK(std::accumulate(st.negative_hist.begin(), st.negative_hist.end(), std::uint64_t{0}) == nn);
    }
}

TEST_CASE("pca_rgb recovers axes of an axis-aligned cloud") {
    Rng rng(46);
    Matrix<float> X(300, 3);
    const double sd[3] = {3.0, 2.0, 1.0};
    for (std::size_t i = 0; i < 300; ++i)
        for (std::size_t j = 0; j < 3; ++j) X(i, j) = static_cast<float>(sd[j] * rng.normal());
    const auto p = pca_rgb(X);
    CHECK(p.rank == 3);
    CHECK_FALSE(p.rank_deficient());
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(std::abs(p.components[c][c]) > 0.98);
        CHECK(p.components[c][c] > 0);  // sign convention
    }
    // monotone mapping of the first coordinate
    std::vector<std::size_t> order(300);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return X(a, 0) < X(b, 0); });
    for (std::size_t i = 1; i < 300; ++i) {
        double ga = 0, gb = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            ga += p.components[0][j] * X(order[i - 1], j);
            gb += p.components[0][j] * X(order[i], j);
        }
        if (gb > ga) CHECK(p.rgb[order[i]][0] >= p.rgb[order[i - 1]][0]);
    }
    CHECK(*std::min_element(p.rgb.begin(), p.rgb.end(), [](auto a, auto b) { return a[0] < b[0]; }) == p.rgb[order[0]]);
    std::size_t fg = 0;
    for (auto f : p.foreground) fg += f;
    CHECK(fg > 100);
    CHECK(fg < 200);
}

TEST_CASE("pca_rgb degenerate and equivariance cases") {
    Matrix<float> same(5, 4);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) same(i, j) = static_cast<float>(j);
    const auto p = pca_rgb(same);
    CHECK(p.rank == 0);
    CHECK(p.rank_deficient());
    for (auto& c : p.rgb) CHECK(c == std::array<std::uint8_t, 3>{128, 128, 128});
    for (auto f : p.foreground) CHECK(f == 0);
    CHECK_CODE(pca_rgb(Matrix<float>(2, 4)), ErrorCode::InvalidArgument);

    Rng rng(47);
    Matrix<float> X(40, 6);
    for (auto& v : X.data()) v = static_cast<float>(rng.normal());
    const auto base = pca_rgb(X);
    Matrix<float> twice(80, 6);
    for (std::size_t i = 0; i < 80; ++i)
        for (std::size_t j = 0; j < 6; ++j) twice(i, j) = X(i % 40, j);
    const auto dup = pca_rgb(twice);
    for (std::size_t i = 0; i < 80; ++i) {
        CHECK(dup.rgb[i] == base.rgb[i % 40]);
        CHECK(dup.foreground[i] == base.foreground[i % 40]);
    }
    std::vector<std::size_t> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 39; i > 0; --i) std::swap(perm[i], perm[rng.uniform_below(i + 1)]);
    Matrix<float> shuffled(40, 6);
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t j = 0; j < 6; ++j) shuffled(i, j) = X(perm[i], j);
    const auto sh = pca_rgb(shuffled);
    for (std::size_t i = 0; i < 40; ++i) CHECK(sh.rgb[i] == base.rgb[perm[i]]);

    // A cloud confined to a plane recovers two components.
    Matrix<float> plane(50, 3);
    for (std::size_t i = 0; i < 50; ++i) {
        plane(i, 0) = static_cast<float>(rng.normal());
        plane(i, 1) = static_cast<float>(rng.normal());
        plane(i, 2) = 0;
    }
    const auto pl = pca_rgb(plane);
    CHECK(pl.rank == 2);
    for (auto& c : pl.rgb) CHECK(c[2] == 128);
}

TEST_CASE("report serialization") {
    EvalReport rep;
    rep.knn_accuracy = 0.75;
    rep.probe_accuracy = 0.5;
    rep.stats.positive_hist[3] = 7;
    rep.stats.negative_hist[3] = 2;
    const auto kv = rep.to_key_values();
    CHECK(kv.at("knn_accuracy") == "0.75");
    const auto csv = rep.histogram_csv();
    CHECK(csv.rfind("bin_low,bin_high,pos_count,neg_count\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(kHistogramBins + 1));
    testing::TempDir dir("report");
    write_report(dir / "r.txt", rep);
    CHECK(std::filesystem::exists(dir / "r.txt"));
    CHECK(std::filesystem::exists(dir / "r.txt.hist.csv"));
}
