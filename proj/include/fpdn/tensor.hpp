#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpdn {

using Index = Eigen::Index;

// Dense row-major n-d array over an Eigen storage array. Scalar is float for
// normal compute and double for gradient checking.
template <typename Scalar>
class Tensor {
public:
    using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    using Index = Eigen::Index;

    Tensor() = default;

    explicit Tensor(std::vector<Index> shape) : shape_(std::move(shape)) {
        for (Index d : shape_) {
            if (d < 0) throw std::invalid_argument("Tensor: negative extent " + std::to_string(d));
        }
        data_.setZero(count(shape_));
    }

    Tensor(std::initializer_list<Index> shape) : Tensor(std::vector<Index>(shape)) {}

    static Tensor zeros(std::vector<Index> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<Index> shape, Scalar value) {
        Tensor t(std::move(shape));
        t.data_.setConstant(t.data_.size(), value);
        return t;
    }

    static Tensor from_values(std::vector<Index> shape, const std::vector<Scalar>& values) {
        Tensor t(std::move(shape));
        if (static_cast<size_t>(t.size()) != values.size())
            throw std::invalid_argument("Tensor::from_values: value count does not match shape");
        for (Index i = 0; i < t.size(); ++i) t.data_[i] = values[static_cast<size_t>(i)];
        return t;
    }

    const std::vector<Index>& shape() const { return shape_; }
    Index rank() const { return static_cast<Index>(shape_.size()); }
    Index dim(Index axis) const { return shape_[static_cast<size_t>(axis)]; }
    Index size() const { return data_.size(); }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }

    Storage& array() { return data_; }
    const Storage& array() const { return data_; }

    Scalar& operator[](Index i) { return data_[i]; }
    Scalar operator[](Index i) const { return data_[i]; }

    // 4-d accessors, layout (batch, channels, height, width)
    Scalar& operator()(Index b, Index c, Index h, Index w) { return data_[flat4(b, c, h, w)]; }
    Scalar operator()(Index b, Index c, Index h, Index w) const { return data_[flat4(b, c, h, w)]; }

    Index flat4(Index b, Index c, Index h, Index w) const {
        return ((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const { return data_.isFinite().all(); }

    // Row-major matrix view of the flat storage; rows*cols must equal size().
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    matrix(Index rows, Index cols) {
        if (rows * cols != size())
            throw std::invalid_argument("Tensor::matrix: view extents do not cover the tensor");
        return {data_.data(), rows, cols};
    }

    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    matrix(Index rows, Index cols) const {
        if (rows * cols != size())
            throw std::invalid_argument("Tensor::matrix: view extents do not cover the tensor");
        return {data_.data(), rows, cols};
    }

    template <typename Other>
    Tensor<Other> cast() const {
        Tensor<Other> out(shape_);
        out.array() = data_.template cast<Other>();
        return out;
    }

    static Index count(const std::vector<Index>& shape) {
        Index n = 1;
        for (Index d : shape) n *= d;
        return n;
    }

private:
    std::vector<Index> shape_;
    Storage data_;
};

template <typename Scalar>
std::string shape_string(const Tensor<Scalar>& t) {
    std::ostringstream os;
    os << '(';
    for (Eigen::Index i = 0; i < t.rank(); ++i) {
        if (i) os << ',';
        os << t.dim(i);
    }
    os << ')';
    return os.str();
}

}  // namespace fpdn
