#ifndef MLCD_TENSOR_HPP
#define MLCD_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mlcd/error.hpp"

namespace mlcd {

/// Dense row-major matrix.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw Error(ErrorCode::DimensionMismatch, "matrix data length does not equal rows*cols");
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using MatrixD = Matrix<double>;

/// Cosine similarities; entries lie in [-1.0001, 1.0001] before any margin
/// or scale is applied.
using ScoreMatrix = Matrix<float>;

/// n x d embeddings stored as 32-bit floats.
///
/// Construction validates the invariants: every value finite, and when the
/// matrix is flagged normalized, every row has unit L2 norm within 1e-5.
class FeatureMatrix {
public:
    static constexpr double kNormTolerance = 1e-5;

    FeatureMatrix() = default;
    FeatureMatrix(Matrix<float> values, bool normalized);
    FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data, bool normalized)
        : FeatureMatrix(Matrix<float>(rows, cols, std::move(data)), normalized) {}

    /// L2-normalizes every row; throws ZeroVector on a zero row.
    static FeatureMatrix normalized_rows(const Matrix<float>& values);
    static FeatureMatrix normalized_rows(const MatrixD& values);

    std::size_t rows() const { return values_.rows(); }
    std::size_t cols() const { return values_.cols(); }
    bool normalized() const { return normalized_; }
    float operator()(std::size_t r, std::size_t c) const { return values_(r, c); }
    std::span<const float> row(std::size_t r) const { return values_.row(r); }
    const std::vector<float>& data() const { return values_.data(); }
    const Matrix<float>& values() const { return values_; }

    /// Rows copied out in the given order.
    FeatureMatrix select_rows(std::span<const std::size_t> indices) const;

    MatrixD to_double() const;

    /// Largest |‖row‖ - 1| over all rows.
    double max_norm_deviation() const;

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

private:
    Matrix<float> values_;
    bool normalized_ = false;
};

/// Zero-vector cutoff for normalization.
inline constexpr double kZeroNorm = 1e-12;

/// Dot product accumulated in 64-bit.
double dot(std::span<const float> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const float> v);
double l2_norm(std::span<const double> v);

std::vector<float> l2_normalize(std::span<const float> v);
std::vector<double> l2_normalize(std::span<const double> v);

/// out[i][j] = <E_i, W_j>. Both inputs must be normalized with equal width.
ScoreMatrix cosine_scores(const FeatureMatrix& E, const FeatureMatrix& W);

/// Cosines of one embedding against every row of W, in 64-bit and divided by
/// the stored float norms. This is
/// the single path used by hard assignment and label assignment so that the
/// two agree exactly on ties.
void row_similarities(std::span<const float> e, const FeatureMatrix& W, std::span<double> out);

/// Gradient through y = x / ‖x‖: (g - (y·g) y) / ‖x‖.
std::vector<double> normalize_backward(std::span<const double> x, std::span<const double> g);

}  // namespace mlcd

#endif  // MLCD_TENSOR_HPP
