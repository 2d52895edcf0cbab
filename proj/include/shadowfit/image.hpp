#pragma once

#include "shadowfit/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace shadowfit {

template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> data;  // row-major, top row first

    Image() = default;
    Image(int w, int h, T fill = T{}) : width(w), height(h) {
        require(w > 0 && h > 0, "image dimensions must be positive");
        data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
    }

    T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }

    bool same_shape(const Image& o) const { return width == o.width && height == o.height; }

    bool operator==(const Image& o) const {
        return width == o.width && height == o.height && data == o.data;
    }
};

// Continuous coverage in [0, 1].
using SoftMask = Image<double>;
// Binary occupancy, values 0 or 1.
using ShadowMask = Image<std::uint8_t>;
// Per-pixel emphasis weights in [0, 1].
using SaliencyMap = Image<double>;

inline void require_same_shape(int wa, int ha, int wb, int hb, const char* what) {
    if (wa != wb || ha != hb)
        throw validation_error(std::string(what) + ": shape mismatch (" + std::to_string(wa) + "x" +
                               std::to_string(ha) + " vs " + std::to_string(wb) + "x" +
                               std::to_string(hb) + ")");
}

// Odd-sized normalized 1D Gaussian taps.
inline std::vector<double> gaussian_kernel(int size, double sigma) {
    require(size > 0 && size % 2 == 1, "gaussian kernel size must be odd and positive");
    require(sigma > 0.0, "gaussian sigma must be positive");
    std::vector<double> k(static_cast<std::size_t>(size));
    const int half = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double x = i - half;
        k[static_cast<std::size_t>(i)] = std::exp(-0.5 * x * x / (sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable blur with replicate borders.
inline Image<double> gaussian_blur(const Image<double>& img, int size, double sigma) {
    const auto k = gaussian_kernel(size, sigma);
    const int half = size / 2;
    Image<double> tmp(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i) {
                const int xx = std::clamp(x + i, 0, img.width - 1);
                acc += k[static_cast<std::size_t>(i + half)] * img.at(xx, y);
            }
            tmp.at(x, y) = acc;
        }
    }
    Image<double> out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i) {
                const int yy = std::clamp(y + i, 0, img.height - 1);
                acc += k[static_cast<std::size_t>(i + half)] * tmp.at(x, yy);
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

}  // namespace shadowfit
