#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace tseg {

/// Per-axis integer triple (x, y, z). Used for volume extents, patch sizes,
/// strides and voxel coordinates alike.
using Vec3i = std::array<int, 3>;

inline std::size_t voxel_count(const Vec3i& d)
{
    return std::size_t(d[0]) * std::size_t(d[1]) * std::size_t(d[2]);
}

inline std::string to_string(const Vec3i& d)
{
    return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

/// Dense 3D grid, x fastest (same memory order as NIfTI).
template <class T>
class Grid3 {
public:
    Grid3() = default;
    explicit Grid3(const Vec3i& dims, T fill = T{})
        : dims_(dims), data_(voxel_count(dims), fill) {}
    Grid3(const Vec3i& dims, std::vector<T> data)
        : dims_(dims), data_(std::move(data)) {}

    const Vec3i& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(int x, int y, int z) const
    {
        return std::size_t(x) + std::size_t(dims_[0]) * (std::size_t(y) + std::size_t(dims_[1]) * std::size_t(z));
    }
    bool contains(int x, int y, int z) const
    {
        return x >= 0 && y >= 0 && z >= 0 && x < dims_[0] && y < dims_[1] && z < dims_[2];
    }

    T& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
    const T& operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    bool operator==(const Grid3&) const = default;

private:
    Vec3i dims_{0, 0, 0};
    std::vector<T> data_;
};

using MaskGrid = Grid3<std::uint8_t>;

} // namespace tseg
