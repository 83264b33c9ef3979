// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The pilotmae authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pilotmae::tc {

/// Raised when an op produces NaN or Inf.
class NonFiniteError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Raised on incompatible operand shapes.
class ShapeError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<int>;

inline std::string shape_str(const Shape &s)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i)
        os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape &s)
{
    std::size_t n = 1;
    for (int e : s)
    {
        if (e <= 0)
            throw ShapeError("tensor extents must be positive, got " + shape_str(s));
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

/// Dense row-major real tensor. Most model math treats it as a rows x cols matrix
/// where cols is the last extent.
template <typename T>
class Tensor
{
public:
    using value_type = T;
    /// Aligned so Eigen's vectorized reductions take the same path on every
    /// allocation; with 16-byte malloc alignment results drift in the last bit.
    using Storage = std::vector<T, Eigen::aligned_allocator<T>>;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0))
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

    Tensor(Shape shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(data.begin(), data.end())
    {
        if (shape_numel(shape_) != data_.size())
            throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
    }

    static Tensor matrix(int rows, int cols, T fill = T(0)) { return Tensor({rows, cols}, fill); }

    const Shape &shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    int cols() const { return shape_.empty() ? 0 : shape_.back(); }
    int rows() const { return shape_.empty() ? 0 : static_cast<int>(data_.size() / static_cast<std::size_t>(shape_.back())); }

    T *data() { return data_.data(); }
    const T *data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    Storage &storage() { return data_; }
    const Storage &storage() const { return data_; }

    T &operator[](std::size_t i) { return data_[i]; }
    const T &operator[](std::size_t i) const { return data_[i]; }

    T &at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
    const T &at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }

    T *row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols(); }
    const T *row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols(); }

    MatMap<T> mat() { return MatMap<T>(data_.data(), rows(), cols()); }
    ConstMatMap<T> mat() const { return ConstMatMap<T>(data_.data(), rows(), cols()); }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const
    {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    template <typename U>
    Tensor<U> cast() const
    {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor &a, const Tensor &b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

private:
    Shape shape_;
    Storage data_;
};

/// Trainable (or frozen) named tensor with its gradient accumulator.
template <typename T>
struct Parameter
{
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape(), T(0)) {}

    void zero_grad() { grad.fill(T(0)); }
    std::size_t numel() const { return value.size(); }
};

} // namespace pilotmae::tc
