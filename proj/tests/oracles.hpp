#pragma once

// Deliberately naive reference implementations used only by the tests.
// These recompute the library's results by the most direct route available
// (per-pixel loops, full 2D convolutions, finite differences) so that the
// two sides share no code beyond the data types.

#include "adef/image.hpp"
#include "adef/vector_field.hpp"

#include <cmath>
#include <vector>

namespace oracles {

using adef::Image;
using adef::SmoothingKernel;
using adef::VectorField;

// Zero-extended pixel lookup, written out longhand.
inline double pixel_or_zero(const Image& img, int s, int t, int i) {
    if (s < 0 || t < 0 || s >= img.width() || t >= img.width()) return 0.0;
    return img(s, t, i);
}

// Bilinear interpolation expanded from the defining convex combination,
// without the library's shortcut for integral coordinates.
inline double bilinear(const Image& img, double r, double c, int i) {
    const double fr = std::floor(r), fc = std::floor(c);
    const int s0 = static_cast<int>(fr), t0 = static_cast<int>(fc);
    const double a = r - fr, b = c - fc;
    return (1.0 - a) * (1.0 - b) * pixel_or_zero(img, s0, t0, i) +
           (1.0 - a) * b * pixel_or_zero(img, s0, t0 + 1, i) +
           a * (1.0 - b) * pixel_or_zero(img, s0 + 1, t0, i) +
           a * b * pixel_or_zero(img, s0 + 1, t0 + 1, i);
}

// Per-pixel resampling: the deformation definition applied literally.
inline Image deform(const Image& img, const VectorField& tau) {
    Image out(img.width(), img.channels());
    for (int s = 0; s < img.width(); ++s)
        for (int t = 0; t < img.width(); ++t)
            for (int i = 0; i < img.channels(); ++i)
                out(s, t, i) = bilinear(img, s + tau.dr(s, t), t + tau.dc(s, t), i);
    return out;
}

// Full (non-separable) 2D convolution of one field component with the outer
// product of the kernel's 1D weights, zero padding outside the grid.
inline VectorField smooth(const VectorField& tau, const SmoothingKernel& k) {
    const int W = tau.width();
    const int R = k.radius;
    VectorField out(W);
    for (int axis = 0; axis < 2; ++axis)
        for (int s = 0; s < W; ++s)
            for (int t = 0; t < W; ++t) {
                double acc = 0.0;
                for (int dy = -R; dy <= R; ++dy)
                    for (int dx = -R; dx <= R; ++dx) {
                        const int ss = s + dy, tt = t + dx;
                        if (ss < 0 || tt < 0 || ss >= W || tt >= W) continue;
                        const double v = axis == 0 ? tau.dr(ss, tt) : tau.dc(ss, tt);
                        acc += k.weights[static_cast<std::size_t>(dy + R)] *
                               k.weights[static_cast<std::size_t>(dx + R)] * v;
                    }
                if (axis == 0)
                    out.dr(s, t) = acc;
                else
                    out.dc(s, t) = acc;
            }
    return out;
}

// Norms recomputed with plain loops.
inline double t_norm(const VectorField& tau) {
    double best = 0.0;
    for (int s = 0; s < tau.width(); ++s)
        for (int t = 0; t < tau.width(); ++t) {
            const double len =
                std::sqrt(tau.dr(s, t) * tau.dr(s, t) + tau.dc(s, t) * tau.dc(s, t));
            if (len > best) best = len;
        }
    return best;
}

inline double lp_norm(const std::vector<double>& v, double p) {
    if (std::isinf(p)) {
        double best = 0.0;
        for (double x : v) best = std::max(best, std::abs(x));
        return best;
    }
    double acc = 0.0;
    for (double x : v) acc += std::pow(std::abs(x), p);
    return std::pow(acc, 1.0 / p);
}

inline double dot(const VectorField& a, const VectorField& b) {
    double acc = 0.0;
    for (int s = 0; s < a.width(); ++s)
        for (int t = 0; t < a.width(); ++t)
            acc += a.dr(s, t) * b.dr(s, t) + a.dc(s, t) * b.dc(s, t);
    return acc;
}

// Central finite difference of the interpolant along rows/columns at
// integer pixels -- the spatial-gradient definition, recomputed through the
// interpolation routine instead of direct pixel arithmetic.
inline double fd_gradient(const Image& img, int s, int t, int i, int axis, double h) {
    const double rp = axis == 0 ? s + h : s, cp = axis == 0 ? t : t + h;
    const double rm = axis == 0 ? s - h : s, cm = axis == 0 ? t : t - h;
    return (bilinear(img, rp, cp, i) - bilinear(img, rm, cm, i)) / (2.0 * h);
}

}  // namespace oracles
