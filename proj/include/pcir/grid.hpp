#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pcir {

// Row-major 2-D array: pixel (x, y) lives at index y * width + x.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height), data_(checked_extent(width, height), fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(int x, int y) { return data_[index(x, y)]; }
    const T& at(int x, int y) const { return data_[index(x, y)]; }

    template <typename U>
    bool same_shape(const Grid<U>& other) const {
        return width_ == other.width() && height_ == other.height();
    }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
    }

private:
    static std::size_t checked_extent(int width, int height) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("Grid: width and height must be >= 1");
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using IntensityImage = Grid<double>;  // raw pixel intensities (any finite range)
using SourceField    = Grid<double>;  // per-pixel Poisson rates lambda
using CountImage     = Grid<int>;     // observed photon counts
using LogitField     = Grid<double>;  // latent logit-domain field

template <typename T>
T min_value(const Grid<T>& g) {
    return *std::min_element(g.begin(), g.end());
}

template <typename T>
T max_value(const Grid<T>& g) {
    return *std::max_element(g.begin(), g.end());
}

}  // namespace pcir
