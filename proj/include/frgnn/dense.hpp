#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "frgnn/error.hpp"

namespace frgnn {

/// 64-byte aligned allocator. Fixed alignment keeps vectorized kernels on the
/// same code path from run to run, which keeps results bitwise reproducible.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        if (n == 0) return nullptr;
        const std::size_t bytes = ((n * sizeof(T) + alignment - 1) / alignment) * alignment;
        void* p = std::aligned_alloc(alignment, bytes);
        if (p == nullptr) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

/// Row-major matrix of doubles.
class DenseMatrix {
public:
    using Storage = std::vector<double, AlignedAllocator<double>>;

    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    DenseMatrix(std::size_t rows, std::size_t cols, std::span<const double> values)
        : rows_(rows), cols_(cols), data_(values.begin(), values.end()) {
        detail::require(values.size() == rows * cols, "DenseMatrix: data length != rows*cols");
    }

    /// Literal construction, mostly for tests: {{1, 2}, {3, 4}}.
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            detail::require(r.size() == cols_, "DenseMatrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return {data_.data(), data_.size()}; }
    std::span<const double> values() const { return {data_.data(), data_.size()}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Storage data_;
};

namespace detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMajor> view(const DenseMatrix& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
inline Eigen::Map<RowMajor> view(DenseMatrix& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

// Products with fewer multiply-adds than this run through the plain loops below,
// whose summation order (ascending inner index) is what the oracle tests replicate.
inline constexpr std::size_t kBlockedGemmThreshold = std::size_t{1} << 22;

inline std::string shape_str(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace detail

/// C = A B with rows of A scanned left to right; zero entries of A are skipped.
/// Use for feature matrices: each output row depends only on the same input row.
inline DenseMatrix matmul_sparse_lhs(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.cols() == b.rows(),
                    "matmul: " + detail::shape_str(a) + " * " + detail::shape_str(b));
    DenseMatrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out = c.data() + i * n;
        const double* arow = a.data() + i * a.cols();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b.data() + k * n;
            for (std::size_t j = 0; j < n; ++j) out[j] += av * brow[j];
        }
    }
    return c;
}

/// C = A B.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.cols() == b.rows(),
                    "matmul: " + detail::shape_str(a) + " * " + detail::shape_str(b));
    if (a.rows() * a.cols() * b.cols() < detail::kBlockedGemmThreshold) return matmul_sparse_lhs(a, b);
    DenseMatrix c(a.rows(), b.cols());
    detail::view(c).noalias() = detail::view(a) * detail::view(b);
    return c;
}

/// C = Aᵀ B, accumulating over rows of A in ascending order; zeros of A skipped.
inline DenseMatrix matmul_tn_sparse_lhs(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.rows() == b.rows(),
                    "matmul_tn: " + detail::shape_str(a) + "ᵀ * " + detail::shape_str(b));
    DenseMatrix c(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* arow = a.data() + r * a.cols();
        const double* brow = b.data() + r * n;
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* out = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) out[j] += av * brow[j];
        }
    }
    return c;
}

/// C = Aᵀ B.
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.rows() == b.rows(),
                    "matmul_tn: " + detail::shape_str(a) + "ᵀ * " + detail::shape_str(b));
    if (a.rows() * a.cols() * b.cols() < detail::kBlockedGemmThreshold) return matmul_tn_sparse_lhs(a, b);
    DenseMatrix c(a.cols(), b.cols());
    detail::view(c).noalias() = detail::view(a).transpose() * detail::view(b);
    return c;
}

/// C = A Bᵀ.
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.cols() == b.cols(),
                    "matmul_nt: " + detail::shape_str(a) + " * " + detail::shape_str(b) + "ᵀ");
    DenseMatrix c(a.rows(), b.rows());
    if (a.rows() * a.cols() * b.rows() >= detail::kBlockedGemmThreshold) {
        detail::view(c).noalias() = detail::view(a) * detail::view(b).transpose();
        return c;
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ar = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto br = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < ar.size(); ++k) s += ar[k] * br[k];
            c(i, j) = s;
        }
    }
    return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

/// a += s * b
inline void axpy(DenseMatrix& a, double s, const DenseMatrix& b) {
    detail::require(a.same_shape(b), "axpy: " + detail::shape_str(a) + " vs " + detail::shape_str(b));
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) av[i] += s * bv[i];
}

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c = a;
    axpy(c, 1.0, b);
    return c;
}

inline DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c = a;
    axpy(c, -1.0, b);
    return c;
}

inline DenseMatrix scaled(const DenseMatrix& a, double s) {
    DenseMatrix c = a;
    for (double& v : c.values()) v *= s;
    return c;
}

inline DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.same_shape(b), "hadamard: shape mismatch");
    DenseMatrix c = a;
    auto cv = c.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < cv.size(); ++i) cv[i] *= bv[i];
    return c;
}

inline DenseMatrix relu(const DenseMatrix& a) {
    DenseMatrix c = a;
    for (double& v : c.values()) v = v < 0.0 ? 0.0 : v; // NaN passes through
    return c;
}

/// Gradient through relu: upstream where pre-activation > 0, else 0.
inline DenseMatrix relu_backward(const DenseMatrix& upstream, const DenseMatrix& pre) {
    detail::require(upstream.same_shape(pre), "relu_backward: shape mismatch");
    DenseMatrix g = upstream;
    auto gv = g.values();
    auto pv = pre.values();
    for (std::size_t i = 0; i < gv.size(); ++i)
        if (!(pv[i] > 0.0)) gv[i] = 0.0;
    return g;
}

/// Adds a 1×cols bias row to every row.
inline void add_row_broadcast(DenseMatrix& a, const DenseMatrix& bias) {
    detail::require(bias.rows() == 1 && bias.cols() == a.cols(),
                    "bias: expected 1x" + std::to_string(a.cols()) + ", got " + detail::shape_str(bias));
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias(0, j);
    }
}

/// 1×cols row of column sums, rows accumulated in ascending order.
inline DenseMatrix column_sums(const DenseMatrix& a) {
    DenseMatrix s(1, a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) s(0, j) += r[j];
    }
    return s;
}

inline DenseMatrix gather_rows(const DenseMatrix& a, std::span<const std::size_t> ids) {
    DenseMatrix out(ids.size(), a.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        detail::require(ids[i] < a.rows(), "gather_rows: id out of range");
        std::copy_n(a.row(ids[i]).data(), a.cols(), out.row(i).data());
    }
    return out;
}

/// Row-wise softmax, max-shifted.
inline DenseMatrix softmax_rows(const DenseMatrix& logits) {
    DenseMatrix p = logits;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        auto r = p.row(i);
        if (r.empty()) continue;
        const double mx = *std::max_element(r.begin(), r.end());
        double z = 0.0;
        for (double& v : r) {
            v = std::exp(v - mx);
            z += v;
        }
        for (double& v : r) v /= z;
    }
    return p;
}

/// Index of the row maximum; ties resolve to the lowest index.
inline std::size_t argmax(std::span<const double> r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.size(); ++j)
        if (r[j] > r[best]) best = j;
    return best;
}

inline double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double l2_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double frobenius_norm(const DenseMatrix& a) { return l2_norm(a.values()); }

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.same_shape(b), "max_abs_diff: shape mismatch");
    double m = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
    return m;
}

inline bool all_finite(const DenseMatrix& a) {
    for (double v : a.values())
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace frgnn
