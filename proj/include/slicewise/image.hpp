#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "slicewise/errors.hpp"

namespace slicewise {

/// Dense row-major 2D grid. Element (row, col) lives at row * cols + col.
template <typename T>
class Image2D {
public:
    Image2D() = default;
    Image2D(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Image2D(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (data_.size() != rows_ * cols_) {
            throw contract_error("Image2D: data size does not match rows*cols");
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    T& at(std::size_t r, std::size_t c)
    {
        check(r, c);
        return data_[r * cols_ + c];
    }
    const T& at(std::size_t r, std::size_t c) const
    {
        check(r, c);
        return data_[r * cols_ + c];
    }

    bool contains(long long r, long long c) const noexcept
    {
        return r >= 0 && c >= 0 && static_cast<std::size_t>(r) < rows_ &&
               static_cast<std::size_t>(c) < cols_;
    }

    std::span<T> pixels() noexcept { return data_; }
    std::span<const T> pixels() const noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    bool same_shape(const Image2D& other) const noexcept
    {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    friend bool operator==(const Image2D&, const Image2D&) = default;

private:
    void check(std::size_t r, std::size_t c) const
    {
        if (r >= rows_ || c >= cols_) throw bounds_error("Image2D: pixel index out of range");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// 8-bit grayscale frame fed to segmenters and propagators.
using Frame = Image2D<std::uint8_t>;

/// Binary 2D label grid, values 0 or 1.
using MaskSlice = Image2D<std::uint8_t>;

/// Number of nonzero pixels.
std::size_t count_foreground(const MaskSlice& mask);

}  // namespace slicewise
