#include "mlcd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mlcd/parallel.hpp"

namespace mlcd {

namespace {

template <typename T>
double dot_impl(std::span<const T> a, std::span<const T> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

template <typename Out, typename In>
std::vector<Out> normalize_impl(std::span<const In> v) {
    if (v.empty()) throw Error(ErrorCode::InvalidArgument, "cannot normalize an empty vector");
    const double norm = std::sqrt(dot_impl<In>(v, v));
    if (!(norm >= kZeroNorm)) throw Error(ErrorCode::ZeroVector, "vector norm below 1e-12");
    std::vector<Out> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<Out>(static_cast<double>(v[i]) / norm);
    }
    return out;
}

}  // namespace

FeatureMatrix::FeatureMatrix(Matrix<float> values, bool normalized)
    : values_(std::move(values)), normalized_(normalized) {
    for (float v : values_.data()) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "feature matrix contains NaN or infinity");
    }
    if (normalized_) {
        for (std::size_t r = 0; r < rows(); ++r) {
            const double dev = std::abs(l2_norm(row(r)) - 1.0);
            if (dev > kNormTolerance) {
                throw Error(ErrorCode::NotNormalized,
                            "row " + std::to_string(r) + " deviates from unit norm by " + std::to_string(dev));
            }
        }
    }
}

FeatureMatrix FeatureMatrix::normalized_rows(const Matrix<float>& values) {
    Matrix<float> out(values.rows(), values.cols());
    for (std::size_t r = 0; r < values.rows(); ++r) {
        const auto unit = l2_normalize(values.row(r));
        std::copy(unit.begin(), unit.end(), out.row(r).begin());
    }
    return FeatureMatrix(std::move(out), true);
}

FeatureMatrix FeatureMatrix::normalized_rows(const MatrixD& values) {
    Matrix<float> out(values.rows(), values.cols());
    for (std::size_t r = 0; r < values.rows(); ++r) {
        const auto unit = normalize_impl<float, double>(values.row(r));
        std::copy(unit.begin(), unit.end(), out.row(r).begin());
    }
    return FeatureMatrix(std::move(out), true);
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix<float> out(indices.size(), cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    FeatureMatrix result;
    result.values_ = std::move(out);
    result.normalized_ = normalized_;
    return result;
}

MatrixD FeatureMatrix::to_double() const {
    return MatrixD(rows(), cols(), std::vector<double>(data().begin(), data().end()));
}

double FeatureMatrix::max_norm_deviation() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < rows(); ++r) worst = std::max(worst, std::abs(l2_norm(row(r)) - 1.0));
    return worst;
}

double dot(std::span<const float> a, std::span<const float> b) { return dot_impl(a, b); }
double dot(std::span<const double> a, std::span<const double> b) { return dot_impl(a, b); }
double l2_norm(std::span<const float> v) { return std::sqrt(dot_impl(v, v)); }
double l2_norm(std::span<const double> v) { return std::sqrt(dot_impl(v, v)); }

std::vector<float> l2_normalize(std::span<const float> v) { return normalize_impl<float, float>(v); }
std::vector<double> l2_normalize(std::span<const double> v) { return normalize_impl<double, double>(v); }

void row_similarities(std::span<const float> e, const FeatureMatrix& W, std::span<double> out) {
    const double ne = l2_norm(e);
    for (std::size_t j = 0; j < W.rows(); ++j) {
        const double denom = ne * l2_norm(W.row(j));
        out[j] = denom > 0.0 ? dot(e, W.row(j)) / denom : 0.0;
    }
}

ScoreMatrix cosine_scores(const FeatureMatrix& E, const FeatureMatrix& W) {
    if (E.cols() != W.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "embedding width " + std::to_string(E.cols()) + " vs center width " + std::to_string(W.cols()));
    }
    if (!E.normalized() || !W.normalized()) {
        throw Error(ErrorCode::NotNormalized, "cosine_scores needs normalized inputs");
    }
    ScoreMatrix out(E.rows(), W.rows());
    parallel_for(E.rows(), [&](std::size_t i) {
        for (std::size_t j = 0; j < W.rows(); ++j) out(i, j) = static_cast<float>(dot(E.row(i), W.row(j)));
    });
    return out;
}

std::vector<double> normalize_backward(std::span<const double> x, std::span<const double> g) {
    if (x.size() != g.size()) throw Error(ErrorCode::DimensionMismatch, "normalize_backward: x and g differ in size");
    const double norm = l2_norm(x);
    if (!(norm >= kZeroNorm)) throw Error(ErrorCode::ZeroVector, "vector norm below 1e-12");
    double yg = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) yg += (x[i] / norm) * g[i];
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (g[i] - yg * (x[i] / norm)) / norm;
    return out;
}

}  // namespace mlcd
