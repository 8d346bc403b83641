#pragma once

// Square images on the integer grid {0..W-1}^2 with a continuous bilinear
// interpolant, and the deformation operator x -> x^tau that resamples the
// image at positions displaced by a vector field.
//
// Conventions used throughout the library:
//   - grid coordinates are pixel units, (s, t) = (row, column), 0-based
//   - intensities are doubles in [0, 1]
//   - storage is row-major with the channel innermost: data[(s*W + t)*c + i]
//   - the interpolant is extended by zero outside the grid hull

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adef/vector_field.hpp"

namespace adef {

class Image {
public:
    Image() = default;

    Image(int width, int channels)
        : width_(width), channels_(channels),
          data_(static_cast<std::size_t>(width) * width * channels, 0.0) {
        check_shape(width, channels);
    }

    Image(int width, int channels, std::vector<double> data)
        : width_(width), channels_(channels), data_(std::move(data)) {
        check_shape(width, channels);
        if (data_.size() != static_cast<std::size_t>(width_) * width_ * channels_)
            throw std::invalid_argument("Image: data size does not match width/channels");
    }

    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }

    double operator()(int s, int t, int i = 0) const {
        return data_[index(s, t, i)];
    }
    double& operator()(int s, int t, int i = 0) {
        return data_[index(s, t, i)];
    }

    // Zero-extended sample access: any (s, t) outside {0..W-1}^2 reads 0.
    double sample(int s, int t, int i) const {
        if (s < 0 || s >= width_ || t < 0 || t >= width_) return 0.0;
        return data_[index(s, t, i)];
    }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    bool same_shape(const Image& other) const {
        return width_ == other.width_ && channels_ == other.channels_;
    }

private:
    static void check_shape(int width, int channels) {
        if (width < 2)
            throw std::invalid_argument("Image: width must be >= 2");
        if (channels != 1 && channels != 3)
            throw std::invalid_argument("Image: channels must be 1 or 3");
    }

    std::size_t index(int s, int t, int i) const {
        return (static_cast<std::size_t>(s) * width_ + t) * channels_ + i;
    }

    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

// Bilinear interpolant of img at the continuous grid point (r, c), writing one
// intensity per channel into out. Samples outside the grid contribute zero, so
// values fade to 0 across the one-pixel band around the hull and are exactly 0
// beyond it.
inline void interpolate(const Image& img, double r, double c, std::span<double> out) {
    const int ch = img.channels();
    for (int i = 0; i < ch; ++i) out[i] = 0.0;

    const double fr = std::floor(r);
    const double fc = std::floor(c);
    const int r0 = static_cast<int>(fr);
    const int c0 = static_cast<int>(fc);
    const double ar = r - fr;
    const double ac = c - fc;

    const double w00 = (1.0 - ar) * (1.0 - ac);
    const double w01 = (1.0 - ar) * ac;
    const double w10 = ar * (1.0 - ac);
    const double w11 = ar * ac;

    for (int i = 0; i < ch; ++i) {
        out[i] = w00 * img.sample(r0, c0, i) + w01 * img.sample(r0, c0 + 1, i) +
                 w10 * img.sample(r0 + 1, c0, i) + w11 * img.sample(r0 + 1, c0 + 1, i);
    }
}

// Single-channel convenience.
inline double interpolate(const Image& img, double r, double c) {
    std::array<double, 3> buf{};
    interpolate(img, r, c, std::span<double>(buf.data(), img.channels()));
    return buf[0];
}

// Discrete deformed image x^tau: output(s,t) = interpolant of img at
// (s,t) + tau(s,t). Bilinear weights are convex and padding is zero, so the
// output stays in [0,1] for any field.
inline Image deform(const Image& img, const VectorField& tau) {
    if (tau.width() != img.width())
        throw std::invalid_argument("deform: image and field widths differ");
    const int W = img.width();
    const int ch = img.channels();
    Image out(W, ch);
    std::array<double, 3> px{};
    for (int s = 0; s < W; ++s) {
        for (int t = 0; t < W; ++t) {
            interpolate(img, s + tau.dr(s, t), t + tau.dc(s, t),
                        std::span<double>(px.data(), ch));
            for (int i = 0; i < ch; ++i) out(s, t, i) = px[i];
        }
    }
    return out;
}

// Per-pixel spatial gradient of an image, W x W x c x 2, in intensity per
// pixel displacement. Axis 0 is the row direction, axis 1 the column
// direction.
class SpatialGradient {
public:
    SpatialGradient(int width, int channels)
        : width_(width), channels_(channels),
          data_(static_cast<std::size_t>(width) * width * channels * 2, 0.0) {}

    int width() const { return width_; }
    int channels() const { return channels_; }

    double operator()(int s, int t, int i, int axis) const {
        return data_[index(s, t, i, axis)];
    }
    double& operator()(int s, int t, int i, int axis) {
        return data_[index(s, t, i, axis)];
    }

private:
    std::size_t index(int s, int t, int i, int axis) const {
        return ((static_cast<std::size_t>(s) * width_ + t) * channels_ + i) * 2 + axis;
    }

    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

// Central differences with zero padding, consistent with the zero extension of
// the interpolant: grad(s,t,i,0) = (x(s+1,t,i) - x(s-1,t,i)) / 2, analogously
// along columns. Exact for images affine in (s,t) at interior pixels.
inline SpatialGradient spatial_gradient(const Image& img) {
    const int W = img.width();
    const int ch = img.channels();
    SpatialGradient grad(W, ch);
    for (int s = 0; s < W; ++s)
        for (int t = 0; t < W; ++t)
            for (int i = 0; i < ch; ++i) {
                grad(s, t, i, 0) = 0.5 * (img.sample(s + 1, t, i) - img.sample(s - 1, t, i));
                grad(s, t, i, 1) = 0.5 * (img.sample(s, t + 1, i) - img.sample(s, t - 1, i));
            }
    return grad;
}

}  // namespace adef
