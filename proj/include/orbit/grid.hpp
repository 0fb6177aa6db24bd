#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace orbit {

/// Dense row-major H x W grid. Images use double cells in [0,1],
/// segmentation masks use uint8_t class indices.
template <typename T>
struct Grid {
    int h = 0;
    int w = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int height, int width, T fill = T{})
        : h(height), w(width), data(static_cast<size_t>(height) * width, fill) {
        if (height <= 0 || width <= 0) {
            throw std::invalid_argument("grid dimensions must be positive");
        }
    }

    T& at(int r, int c) { return data[static_cast<size_t>(r) * w + c]; }
    const T& at(int r, int c) const { return data[static_cast<size_t>(r) * w + c]; }

    size_t size() const { return data.size(); }
    bool same_shape(const Grid& other) const { return h == other.h && w == other.w; }

    bool operator==(const Grid& other) const = default;
};

using Image = Grid<double>;
using Mask = Grid<uint8_t>;

/// Segmentation classes used by the simulator and the reference model.
enum SceneClass : uint8_t {
    kSoil = 0,
    kBedrock = 1,
    kSand = 2,
    kBigRock = 3,
    kSmallRock = 4,
    kSky = 5,
};

inline constexpr int kNumClasses = 6;

}  // namespace orbit
