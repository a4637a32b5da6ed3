#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlgn {

using Scalar = double;
using Index = Eigen::Index;

using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

// Row-major map types; Tensor stores its elements row-major.
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;
using VecMap = Eigen::Map<Vector>;
using ConstVecMap = Eigen::Map<const Vector>;
using ArrMap = Eigen::Map<ArrayX>;
using ConstArrMap = Eigen::Map<const ArrayX>;

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<Index>;

inline Index shape_size(const Shape& s) {
    Index n = 1;
    for (Index d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// Dense n-dimensional array of 64-bit floats, row-major.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        check_shape(shape_);
        data_ = ArrayX::Zero(shape_size(shape_));
    }

    Tensor(Shape shape, ArrayX data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape(shape_);
        if (data_.size() != shape_size(shape_))
            throw DimensionError("tensor: element count " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, Scalar v) {
        Tensor t(std::move(shape));
        t.data_.setConstant(v);
        return t;
    }

    static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }

    static Tensor scalar(Scalar v) { return full({1}, v); }

    static Tensor from(Shape shape, std::initializer_list<Scalar> vals) {
        Tensor t(std::move(shape));
        if (static_cast<Index>(vals.size()) != t.size())
            throw DimensionError("tensor: initializer size does not match shape");
        Index i = 0;
        for (Scalar v : vals) t.data_[i++] = v;
        return t;
    }

    static Tensor identity(Index n) {
        Tensor t({n, n});
        for (Index i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
        return t;
    }

    const Shape& shape() const { return shape_; }
    Index size() const { return data_.size(); }
    int rank() const { return static_cast<int>(shape_.size()); }
    Index dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    bool empty() const { return data_.size() == 0; }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }
    ArrayX& array() { return data_; }
    const ArrayX& array() const { return data_; }

    Scalar& operator[](Index i) { return data_[i]; }
    Scalar operator[](Index i) const { return data_[i]; }

    Scalar& at(std::initializer_list<Index> idx) { return data_[flat_index(idx)]; }
    Scalar at(std::initializer_list<Index> idx) const { return data_[flat_index(idx)]; }

    Scalar value() const {
        if (size() != 1) throw ContractError("tensor: value() requires a single element");
        return data_[0];
    }

    /// Rank-2 view, rows = dim(0), cols = dim(1).
    MatMap mat() {
        require_rank(2);
        return MatMap(data_.data(), shape_[0], shape_[1]);
    }
    ConstMatMap mat() const {
        require_rank(2);
        return ConstMatMap(data_.data(), shape_[0], shape_[1]);
    }

    /// View with leading dims collapsed: rows = dim(0), cols = size/dim(0).
    MatMap rows_view() {
        if (rank() < 1) throw DimensionError("tensor: rows_view needs rank >= 1");
        return MatMap(data_.data(), shape_[0], size() / shape_[0]);
    }
    ConstMatMap rows_view() const {
        if (rank() < 1) throw DimensionError("tensor: rows_view needs rank >= 1");
        return ConstMatMap(data_.data(), shape_[0], size() / shape_[0]);
    }

    VecMap vec() { return VecMap(data_.data(), data_.size()); }
    ConstVecMap vec() const { return ConstVecMap(data_.data(), data_.size()); }

    /// Same elements, new shape (sizes must agree).
    Tensor reshaped(Shape shape) const {
        if (shape_size(shape) != size())
            throw DimensionError("tensor: reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                                 " changes element count");
        return Tensor(std::move(shape), data_);
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const { return data_.isFinite().all(); }

private:
    static void check_shape(const Shape& s) {
        for (Index d : s)
            if (d <= 0) throw DimensionError("tensor: shape " + shape_str(s) + " has non-positive dim");
    }

    void require_rank(int r) const {
        if (rank() != r)
            throw DimensionError("tensor: expected rank " + std::to_string(r) + ", got shape " +
                                 shape_str(shape_));
    }

    Index flat_index(std::initializer_list<Index> idx) const {
        if (static_cast<int>(idx.size()) != rank())
            throw DimensionError("tensor: index rank mismatch");
        Index flat = 0;
        int k = 0;
        for (Index i : idx) {
            flat = flat * shape_[static_cast<std::size_t>(k)] + i;
            ++k;
        }
        return flat;
    }

    Shape shape_;
    ArrayX data_;
};

/// Gather records (rows of dim 0) by index, preserving the given order.
Tensor take_rows(const Tensor& t, const std::vector<Index>& rows);

/// Deterministic mt19937_64-backed RNG with portable real distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform in [0, 1) with 53-bit resolution.
    Scalar uniform() { return static_cast<Scalar>(eng_() >> 11) * 0x1.0p-53; }

    Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t integer(std::uint64_t n) {
        // rejection sampling keeps the draw unbiased
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    /// Derive an independent stream for a named stage.
    std::uint64_t fork(std::uint64_t salt) {
        std::uint64_t z = eng_() + 0x9e3779b97f4a7c15ULL + salt;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            std::uint64_t j = integer(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace dlgn
