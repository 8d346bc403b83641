#pragma once

// Layers of the small convolutional classifiers: conv (valid padding,
// stride 1), 2x2 max-pooling, ReLU, dense, inverted dropout, flatten.
//
// Activations travel as row-major N x D matrices, one sample per row, feature
// maps flattened [h][w][channel]. Convolutions run as im2col + GEMM.
//
// backward() is pure (computes input cotangents only), so a frozen network
// can serve concurrent gradient queries; accumulate_param_grads() is the
// single-writer training path.

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adef::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

struct Shape {
    int h = 0, w = 0, c = 0;
    bool flat = false;

    Eigen::Index size() const { return static_cast<Eigen::Index>(h) * w * c; }
    static Shape image(int h, int w, int c) { return {h, w, c, false}; }
    static Shape vec(int n) { return {1, 1, n, true}; }
};

enum class LayerKind : std::uint8_t {
    conv = 1,
    maxpool2x2 = 2,
    relu = 3,
    dense = 4,
    dropout = 5,
    flatten = 6,
};

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::maxpool2x2: return "maxpool2x2";
        case LayerKind::relu: return "relu";
        case LayerKind::dense: return "dense";
        case LayerKind::dropout: return "dropout";
        case LayerKind::flatten: return "flatten";
    }
    return "?";
}

// Per-layer forward cache. `a` is layer-defined (im2col patches, masks, ...),
// `idx` holds pooling argmax offsets.
struct LayerCache {
    Mat a;
    std::vector<std::uint8_t> idx;
    int n = 0;
};

class Layer {
public:
    virtual ~Layer() = default;

    virtual LayerKind kind() const = 0;

    // Shape propagation; called once when the network is finalized.
    virtual Shape infer(Shape in) = 0;

    // X: N x in_size -> Y: N x out_size. Dropout draws from rng in train mode.
    virtual void forward(const Mat& X, Mat& Y, LayerCache* cache, bool train,
                         std::mt19937_64* rng) const = 0;

    // dY: M x out_size -> dX: M x in_size. When broadcast_cache is set the
    // cache holds a single sample whose masks/indices apply to every row
    // (multi-cotangent backward through one forward pass); otherwise M must
    // equal cache.n.
    virtual void backward(const Mat& dY, Mat& dX, const LayerCache& cache,
                          bool broadcast_cache) const = 0;

    // Accumulates parameter gradients for a training batch (M == cache.n).
    virtual void accumulate_param_grads(const Mat& /*dY*/, const LayerCache& /*cache*/) {}

    virtual std::span<double> params() { return {}; }
    virtual std::span<double> grads() { return {}; }
    virtual void zero_grads() {
        auto g = grads();
        std::fill(g.begin(), g.end(), 0.0);
    }
    virtual void init_weights(std::mt19937_64& /*rng*/) {}

    // Kind-specific integer/real attributes for the weight-file layer table.
    virtual std::vector<std::int64_t> int_attrs() const { return {}; }
    virtual std::vector<double> real_attrs() const { return {}; }

    Shape in_shape;
    Shape out_shape;
};

namespace detail {

inline void he_uniform(std::span<double> w, int fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : w) v = u(rng);
}

}  // namespace detail

class Conv2d final : public Layer {
public:
    Conv2d(int out_channels, int kernel) : cout_(out_channels), k_(kernel) {
        if (out_channels < 1 || kernel < 1)
            throw std::invalid_argument("Conv2d: bad filter spec");
    }

    LayerKind kind() const override { return LayerKind::conv; }

    Shape infer(Shape in) override {
        if (in.flat) throw std::invalid_argument("Conv2d: needs an image input");
        if (in.h < k_ || in.w < k_)
            throw std::invalid_argument("Conv2d: kernel larger than input");
        in_shape = in;
        out_shape = Shape::image(in.h - k_ + 1, in.w - k_ + 1, cout_);
        K_ = static_cast<Eigen::Index>(k_) * k_ * in.c;
        store_.assign(static_cast<std::size_t>(K_ + 1) * cout_, 0.0);
        grad_.assign(store_.size(), 0.0);
        return out_shape;
    }

    void forward(const Mat& X, Mat& Y, LayerCache* cache, bool /*train*/,
                 std::mt19937_64* /*rng*/) const override {
        const Eigen::Index N = X.rows();
        const Eigen::Index oHW = static_cast<Eigen::Index>(out_shape.h) * out_shape.w;
        Mat local_patches;
        Mat& P = cache ? cache->a : local_patches;
        im2col(X, P);
        if (cache) cache->n = static_cast<int>(N);
        Y.resize(N, oHW * cout_);
        MatMap Yg(Y.data(), N * oHW, cout_);
        Yg.noalias() = P * weight_map();
        Yg.rowwise() += bias_map().transpose();
    }

    void backward(const Mat& dY, Mat& dX, const LayerCache& /*cache*/,
                  bool /*broadcast_cache*/) const override {
        const Eigen::Index M = dY.rows();
        const Eigen::Index oHW = static_cast<Eigen::Index>(out_shape.h) * out_shape.w;
        ConstMatMap dYg(dY.data(), M * oHW, cout_);
        Mat dP(M * oHW, K_);
        dP.noalias() = dYg * weight_map().transpose();
        col2im(dP, dX, M);
    }

    void accumulate_param_grads(const Mat& dY, const LayerCache& cache) override {
        const Eigen::Index M = dY.rows();
        if (M != cache.n) throw std::logic_error("Conv2d: cache/batch mismatch");
        const Eigen::Index oHW = static_cast<Eigen::Index>(out_shape.h) * out_shape.w;
        ConstMatMap dYg(dY.data(), M * oHW, cout_);
        grad_weight_map().noalias() += cache.a.transpose() * dYg;
        grad_bias_map().noalias() += dYg.colwise().sum().transpose();
    }

    std::span<double> params() override { return store_; }
    std::span<double> grads() override { return grad_; }

    void init_weights(std::mt19937_64& rng) override {
        detail::he_uniform(std::span<double>(store_.data(), K_ * cout_),
                           static_cast<int>(K_), rng);
        std::fill(store_.begin() + K_ * cout_, store_.end(), 0.0);
    }

    std::vector<std::int64_t> int_attrs() const override { return {cout_, k_}; }

    int kernel() const { return k_; }
    int out_channels() const { return cout_; }

private:
    Eigen::Map<const Mat> weight_map() const {
        return {store_.data(), K_, cout_};
    }
    Eigen::Map<const Eigen::VectorXd> bias_map() const {
        return {store_.data() + K_ * cout_, cout_};
    }
    MatMap grad_weight_map() { return {grad_.data(), K_, cout_}; }
    Eigen::Map<Eigen::VectorXd> grad_bias_map() {
        return {grad_.data() + K_ * cout_, cout_};
    }

    void im2col(const Mat& X, Mat& P) const {
        const Eigen::Index N = X.rows();
        const int H = in_shape.h, W = in_shape.w, C = in_shape.c;
        const int oH = out_shape.h, oW = out_shape.w;
        P.resize(N * oH * oW, K_);
        for (Eigen::Index n = 0; n < N; ++n) {
            const double* x = X.data() + n * X.cols();
            for (int oy = 0; oy < oH; ++oy)
                for (int ox = 0; ox < oW; ++ox) {
                    double* row = P.data() + (((n * oH) + oy) * oW + ox) * K_;
                    for (int dy = 0; dy < k_; ++dy) {
                        const double* src = x + ((static_cast<std::size_t>(oy + dy) * W) + ox) * C;
                        double* dst = row + static_cast<std::size_t>(dy) * k_ * C;
                        std::copy(src, src + static_cast<std::size_t>(k_) * C, dst);
                    }
                }
        }
    }

    void col2im(const Mat& dP, Mat& dX, Eigen::Index M) const {
        const int H = in_shape.h, W = in_shape.w, C = in_shape.c;
        const int oH = out_shape.h, oW = out_shape.w;
        dX.resize(M, static_cast<Eigen::Index>(H) * W * C);
        dX.setZero();
        for (Eigen::Index m = 0; m < M; ++m) {
            double* x = dX.data() + m * dX.cols();
            for (int oy = 0; oy < oH; ++oy)
                for (int ox = 0; ox < oW; ++ox) {
                    const double* row = dP.data() + (((m * oH) + oy) * oW + ox) * K_;
                    for (int dy = 0; dy < k_; ++dy) {
                        double* dst = x + ((static_cast<std::size_t>(oy + dy) * W) + ox) * C;
                        const double* src = row + static_cast<std::size_t>(dy) * k_ * C;
                        for (std::size_t j = 0; j < static_cast<std::size_t>(k_) * C; ++j)
                            dst[j] += src[j];
                    }
                }
        }
    }

    int cout_;
    int k_;
    Eigen::Index K_ = 0;  // k*k*cin
    std::vector<double> store_;  // weights (K x cout) then bias (cout)
    std::vector<double> grad_;
};

class MaxPool2x2 final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::maxpool2x2; }

    Shape infer(Shape in) override {
        if (in.flat) throw std::invalid_argument("MaxPool2x2: needs an image input");
        if (in.h % 2 != 0 || in.w % 2 != 0)
            throw std::invalid_argument("MaxPool2x2: odd input size");
        in_shape = in;
        out_shape = Shape::image(in.h / 2, in.w / 2, in.c);
        return out_shape;
    }

    void forward(const Mat& X, Mat& Y, LayerCache* cache, bool /*train*/,
                 std::mt19937_64* /*rng*/) const override {
        const Eigen::Index N = X.rows();
        const int W = in_shape.w, C = in_shape.c;
        const int oH = out_shape.h, oW = out_shape.w;
        Y.resize(N, static_cast<Eigen::Index>(oH) * oW * C);
        if (cache) {
            cache->idx.resize(static_cast<std::size_t>(N) * oH * oW * C);
            cache->n = static_cast<int>(N);
        }
        for (Eigen::Index n = 0; n < N; ++n) {
            const double* x = X.data() + n * X.cols();
            double* y = Y.data() + n * Y.cols();
            for (int oy = 0; oy < oH; ++oy)
                for (int ox = 0; ox < oW; ++ox)
                    for (int i = 0; i < C; ++i) {
                        double best = -std::numeric_limits<double>::infinity();
                        std::uint8_t arg = 0;
                        for (std::uint8_t q = 0; q < 4; ++q) {
                            const int sy = 2 * oy + (q >> 1), sx = 2 * ox + (q & 1);
                            const double v = x[(static_cast<std::size_t>(sy) * W + sx) * C + i];
                            if (v > best) { best = v; arg = q; }
                        }
                        const std::size_t o = (static_cast<std::size_t>(oy) * oW + ox) * C + i;
                        y[o] = best;
                        if (cache)
                            cache->idx[static_cast<std::size_t>(n) * oH * oW * C + o] = arg;
                    }
        }
    }

    void backward(const Mat& dY, Mat& dX, const LayerCache& cache,
                  bool broadcast_cache) const override {
        const Eigen::Index M = dY.rows();
        const int W = in_shape.w, C = in_shape.c;
        const int oH = out_shape.h, oW = out_shape.w;
        dX.resize(M, in_shape.size());
        dX.setZero();
        const std::size_t plane = static_cast<std::size_t>(oH) * oW * C;
        for (Eigen::Index m = 0; m < M; ++m) {
            const std::size_t cache_row = broadcast_cache ? 0 : static_cast<std::size_t>(m);
            const double* gy = dY.data() + m * dY.cols();
            double* gx = dX.data() + m * dX.cols();
            const std::uint8_t* arg = cache.idx.data() + cache_row * plane;
            for (int oy = 0; oy < oH; ++oy)
                for (int ox = 0; ox < oW; ++ox)
                    for (int i = 0; i < C; ++i) {
                        const std::size_t o = (static_cast<std::size_t>(oy) * oW + ox) * C + i;
                        const std::uint8_t q = arg[o];
                        const int sy = 2 * oy + (q >> 1), sx = 2 * ox + (q & 1);
                        gx[(static_cast<std::size_t>(sy) * W + sx) * C + i] += gy[o];
                    }
        }
    }
};

class Relu final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::relu; }

    Shape infer(Shape in) override {
        in_shape = in;
        out_shape = in;
        return out_shape;
    }

    void forward(const Mat& X, Mat& Y, LayerCache* cache, bool /*train*/,
                 std::mt19937_64* /*rng*/) const override {
        Y = X.cwiseMax(0.0);
        if (cache) {
            cache->a = Y;  // mask recovered as a > 0
            cache->n = static_cast<int>(X.rows());
        }
    }

    void backward(const Mat& dY, Mat& dX, const LayerCache& cache,
                  bool broadcast_cache) const override {
        const Eigen::Index M = dY.rows();
        dX.resize(M, dY.cols());
        if (broadcast_cache) {
            const auto mask = (cache.a.row(0).array() > 0.0).cast<double>();
            dX = dY.array().rowwise() * mask;
        } else {
            dX = dY.array() * (cache.a.array() > 0.0).cast<double>();
        }
    }
};

class Flatten final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::flatten; }

    Shape infer(Shape in) override {
        in_shape = in;
        out_shape = Shape::vec(static_cast<int>(in.size()));
        return out_shape;
    }

    void forward(const Mat& X, Mat& Y, LayerCache* cache, bool /*train*/,
                 std::mt19937_64* /*rng*/) const override {
        Y = X;
        if (cache) cache->n = static_cast<int>(X.rows());
    }

    void backward(const Mat& dY, Mat& dX, const LayerCache& /*cache*/,
                  bool /*broadcast_cache*/) const override {
        dX = dY;
    }
};

class Dense final : public Layer {
public:
    explicit Dense(int out_dim) : out_dim_(out_dim) {
        if (out_dim < 1) throw std::invalid_argument("Dense: bad output dim");
    }

    LayerKind kind() const override { return LayerKind::dense; }

    Shape infer(Shape in) override {
        if (!in.flat) throw std::invalid_argument("Dense: needs a flat input (add Flatten)");
        in_shape = in;
        out_shape = Shape::vec(out_dim_);
        in_dim_ = in.size();
        store_.assign(static_cast<std::size_t>(in_dim_ + 1) * out_dim_, 0.0);
        grad_.assign(store_.size(), 0.0);
        return out_shape;
    }

    void forward(const Mat& X, Mat& Y, LayerCache* cache, bool /*train*/,
                 std::mt19937_64* /*rng*/) const override {
        Y.resize(X.rows(), out_dim_);
        Y.noalias() = X * weight_map();
        Y.rowwise() += bias_map().transpose();
        if (cache) {
            cache->a = X;
            cache->n = static_cast<int>(X.rows());
        }
    }

    void backward(const Mat& dY, Mat& dX, const LayerCache& /*cache*/,
                  bool /*broadcast_cache*/) const override {
        dX.resize(dY.rows(), in_dim_);
        dX.noalias() = dY * weight_map().transpose();
    }

    void accumulate_param_grads(const Mat& dY, const LayerCache& cache) override {
        if (dY.rows() != cache.n) throw std::logic_error("Dense: cache/batch mismatch");
        grad_weight_map().noalias() += cache.a.transpose() * dY;
        grad_bias_map().noalias() += dY.colwise().sum().transpose();
    }

    std::span<double> params() override { return store_; }
    std::span<double> grads() override { return grad_; }

    void init_weights(std::mt19937_64& rng) override {
        detail::he_uniform(std::span<double>(store_.data(), in_dim_ * out_dim_),
                           static_cast<int>(in_dim_), rng);
        std::fill(store_.begin() + in_dim_ * out_dim_, store_.end(), 0.0);
    }

    std::vector<std::int64_t> int_attrs() const override { return {out_dim_}; }

    int out_dim() const { return out_dim_; }

private:
    Eigen::Map<const Mat> weight_map() const { return {store_.data(), in_dim_, out_dim_}; }
    Eigen::Map<const Eigen::VectorXd> bias_map() const {
        return {store_.data() + in_dim_ * out_dim_, out_dim_};
    }
    MatMap grad_weight_map() { return {grad_.data(), in_dim_, out_dim_}; }
    Eigen::Map<Eigen::VectorXd> grad_bias_map() {
        return {grad_.data() + in_dim_ * out_dim_, out_dim_};
    }

    int out_dim_;
    Eigen::Index in_dim_ = 0;
    std::vector<double> store_;  // weights (in x out) then bias (out)
    std::vector<double> grad_;
};

// Inverted dropout: train-time activations are divided by the keep
// probability so that eval-time forward needs no rescaling.
class Dropout final : public Layer {
public:
    explicit Dropout(double drop_prob) : p_(drop_prob) {
        if (!(p_ >= 0.0 && p_ < 1.0))
            throw std::invalid_argument("Dropout: drop probability must be in [0,1)");
    }

    LayerKind kind() const override { return LayerKind::dropout; }

    Shape infer(Shape in) override {
        in_shape = in;
        out_shape = in;
        return out_shape;
    }

    void forward(const Mat& X, Mat& Y, LayerCache* cache, bool train,
                 std::mt19937_64* rng) const override {
        if (!train) {
            Y = X;
            if (cache) {
                cache->a.resize(0, 0);
                cache->n = static_cast<int>(X.rows());
            }
            return;
        }
        if (!rng) throw std::logic_error("Dropout: training forward needs an rng");
        const double keep = 1.0 - p_;
        std::bernoulli_distribution coin(keep);
        Mat mask(X.rows(), X.cols());
        for (Eigen::Index r = 0; r < mask.rows(); ++r)
            for (Eigen::Index c = 0; c < mask.cols(); ++c)
                mask(r, c) = coin(*rng) ? 1.0 / keep : 0.0;
        Y = X.array() * mask.array();
        if (cache) {
            cache->a = std::move(mask);
            cache->n = static_cast<int>(X.rows());
        }
    }

    void backward(const Mat& dY, Mat& dX, const LayerCache& cache,
                  bool broadcast_cache) const override {
        if (cache.a.size() == 0) {  // eval-mode forward: identity
            dX = dY;
            return;
        }
        if (broadcast_cache)
            dX = dY.array().rowwise() * cache.a.row(0).array();
        else
            dX = dY.array() * cache.a.array();
    }

    std::vector<double> real_attrs() const override { return {p_}; }

    double drop_prob() const { return p_; }

private:
    double p_;
};

}  // namespace adef::nn
