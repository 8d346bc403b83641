#pragma once

// Discrete vector fields tau: {0..W-1}^2 -> R^2 in pixel-displacement units,
// the T-norm, the admissible set T (fields that keep every displaced grid
// point inside [0, W-1]^2), and componentwise Gaussian smoothing.
//
// Storage: data[(s*W + t)*2 + axis], axis 0 = row displacement (dr),
// axis 1 = column displacement (dc).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace adef {

class VectorField {
public:
    VectorField() = default;

    explicit VectorField(int width)
        : width_(width), data_(static_cast<std::size_t>(width) * width * 2, 0.0) {
        if (width < 1) throw std::invalid_argument("VectorField: width must be >= 1");
    }

    VectorField(int width, std::vector<double> data)
        : width_(width), data_(std::move(data)) {
        if (width < 1) throw std::invalid_argument("VectorField: width must be >= 1");
        if (data_.size() != static_cast<std::size_t>(width_) * width_ * 2)
            throw std::invalid_argument("VectorField: data size does not match width");
    }

    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    double dr(int s, int t) const { return data_[index(s, t, 0)]; }
    double dc(int s, int t) const { return data_[index(s, t, 1)]; }
    double& dr(int s, int t) { return data_[index(s, t, 0)]; }
    double& dc(int s, int t) { return data_[index(s, t, 1)]; }

    double operator()(int s, int t, int axis) const { return data_[index(s, t, axis)]; }
    double& operator()(int s, int t, int axis) { return data_[index(s, t, axis)]; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    VectorField& operator+=(const VectorField& other) {
        require_same_width(other);
        for (std::size_t j = 0; j < data_.size(); ++j) data_[j] += other.data_[j];
        return *this;
    }

    VectorField& operator*=(double lambda) {
        for (double& v : data_) v *= lambda;
        return *this;
    }

private:
    void require_same_width(const VectorField& other) const {
        if (width_ != other.width_)
            throw std::invalid_argument("VectorField: widths differ");
    }

    std::size_t index(int s, int t, int axis) const {
        return (static_cast<std::size_t>(s) * width_ + t) * 2 + axis;
    }

    int width_ = 0;
    std::vector<double> data_;
};

inline VectorField add(const VectorField& a, const VectorField& b) {
    VectorField out = a;
    out += b;
    return out;
}

inline VectorField scale(const VectorField& a, double lambda) {
    VectorField out = a;
    out *= lambda;
    return out;
}

// T-norm: max over pixels of the Euclidean length of tau(s,t).
inline double t_norm(const VectorField& tau) {
    double m = 0.0;
    const int W = tau.width();
    for (int s = 0; s < W; ++s)
        for (int t = 0; t < W; ++t)
            m = std::max(m, std::hypot(tau.dr(s, t), tau.dc(s, t)));
    return m;
}

// l^p norm of a flat array, p in [1, inf].
inline double lp_norm(std::span<const double> x, double p) {
    if (!(p >= 1.0))
        throw std::invalid_argument("lp_norm: p must be >= 1 or infinity");
    if (std::isinf(p)) {
        double m = 0.0;
        for (double v : x) m = std::max(m, std::abs(v));
        return m;
    }
    if (p == 1.0) {
        double acc = 0.0;
        for (double v : x) acc += std::abs(v);
        return acc;
    }
    if (p == 2.0) {
        double acc = 0.0;
        for (double v : x) acc += v * v;
        return std::sqrt(acc);
    }
    double acc = 0.0;
    for (double v : x) acc += std::pow(std::abs(v), p);
    return std::pow(acc, 1.0 / p);
}

// Euclidean inner product of two fields of equal width.
inline double dot(const VectorField& a, const VectorField& b) {
    if (a.width() != b.width())
        throw std::invalid_argument("dot: field widths differ");
    double acc = 0.0;
    auto da = a.data(), db = b.data();
    for (std::size_t j = 0; j < da.size(); ++j) acc += da[j] * db[j];
    return acc;
}

// Componentwise clamp so that (s,t) + tau(s,t) lies in [0, W-1]^2. Fields
// already admissible are returned unchanged; the operation is idempotent.
inline VectorField clip_to_T(const VectorField& tau) {
    const int W = tau.width();
    VectorField out = tau;
    for (int s = 0; s < W; ++s)
        for (int t = 0; t < W; ++t) {
            out.dr(s, t) = std::clamp(out.dr(s, t), -double(s), double(W - 1 - s));
            out.dc(s, t) = std::clamp(out.dc(s, t), -double(t), double(W - 1 - t));
        }
    return out;
}

// Truncated, renormalized 1D Gaussian used separably in both directions.
// sigma = 0 degenerates to the identity kernel [1].
struct SmoothingKernel {
    double sigma = 0.0;
    int radius = 0;                 // taps per side, ceil(3*sigma)
    std::vector<double> weights;    // size 2*radius+1, symmetric, sums to 1

    static SmoothingKernel gaussian(double sigma) {
        if (sigma < 0.0)
            throw std::invalid_argument("SmoothingKernel: sigma must be >= 0");
        SmoothingKernel k;
        k.sigma = sigma;
        if (sigma == 0.0) {
            k.radius = 0;
            k.weights = {1.0};
            return k;
        }
        k.radius = static_cast<int>(std::ceil(3.0 * sigma));
        k.weights.resize(2 * k.radius + 1);
        double sum = 0.0;
        for (int j = -k.radius; j <= k.radius; ++j) {
            double w = std::exp(-0.5 * (j * j) / (sigma * sigma));
            k.weights[j + k.radius] = w;
            sum += w;
        }
        for (double& w : k.weights) w /= sum;
        return k;
    }

    bool is_identity() const { return radius == 0; }
};

namespace detail {

// Separable zero-padded convolution of one scalar plane held strided inside a
// field buffer (stride 2, offset = axis).
inline void smooth_plane(const double* src, double* dst, int W, int stride,
                         const SmoothingKernel& k, std::vector<double>& scratch) {
    const int R = k.radius;
    scratch.resize(static_cast<std::size_t>(W) * W);
    // horizontal pass (along t)
    for (int s = 0; s < W; ++s) {
        for (int t = 0; t < W; ++t) {
            double acc = 0.0;
            const int j0 = std::max(-R, -t), j1 = std::min(R, W - 1 - t);
            for (int j = j0; j <= j1; ++j)
                acc += k.weights[j + R] * src[(static_cast<std::size_t>(s) * W + t + j) * stride];
            scratch[static_cast<std::size_t>(s) * W + t] = acc;
        }
    }
    // vertical pass (along s)
    for (int s = 0; s < W; ++s) {
        for (int t = 0; t < W; ++t) {
            double acc = 0.0;
            const int j0 = std::max(-R, -s), j1 = std::min(R, W - 1 - s);
            for (int j = j0; j <= j1; ++j)
                acc += k.weights[j + R] * scratch[static_cast<std::size_t>(s + j) * W + t];
            dst[(static_cast<std::size_t>(s) * W + t) * stride] = acc;
        }
    }
}

}  // namespace detail

// Componentwise 2D Gaussian smoothing (outer product of the 1D kernel) with
// zero padding. Zero padding plus a symmetric kernel makes the operator
// self-adjoint, which the smoothed attack step relies on.
inline VectorField smooth(const VectorField& tau, const SmoothingKernel& kernel) {
    if (kernel.is_identity()) return tau;
    const int W = tau.width();
    VectorField out(W);
    std::vector<double> scratch;
    for (int axis = 0; axis < 2; ++axis)
        detail::smooth_plane(tau.data().data() + axis, out.data().data() + axis,
                             W, 2, kernel, scratch);
    return out;
}

}  // namespace adef
