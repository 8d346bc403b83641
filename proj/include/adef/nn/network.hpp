#pragma once

// Feed-forward classifier assembled from layers.hpp, plus the reverse-mode
// queries the deformation attack needs: gradients of logit differences with
// respect to the *input* image.
//
// Weight files are a small self-describing binary format (magic, version,
// input shape, layer table, little-endian f64 blobs) so that a mismatched
// architecture fails loudly instead of silently misreading weights.

#include "adef/image.hpp"
#include "adef/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adef::nn {

// Full per-layer cache of one forward pass; enough to answer any number of
// backward (cotangent) queries without re-running forward.
struct ForwardCache {
    std::vector<LayerCache> layers;
    Mat logits;
};

class Network {
public:
    Network(Shape input, int n_classes) : input_(input), n_classes_(n_classes) {
        if (n_classes < 2) throw std::invalid_argument("Network: need at least 2 classes");
    }

    Network& add(std::unique_ptr<Layer> layer) {
        if (finalized_) throw std::logic_error("Network: add after finalize");
        layers_.push_back(std::move(layer));
        return *this;
    }

    template <typename L, typename... Args>
    Network& emplace(Args&&... args) {
        return add(std::make_unique<L>(std::forward<Args>(args)...));
    }

    // Propagates shapes and allocates parameter storage. The terminal layer
    // must produce exactly n_classes logits.
    void finalize() {
        if (finalized_) return;
        Shape s = input_;
        for (auto& l : layers_) s = l->infer(s);
        if (!s.flat || s.size() != n_classes_)
            throw std::invalid_argument("Network: final layer emits " +
                                        std::to_string(s.size()) + " values, expected " +
                                        std::to_string(n_classes_) + " logits");
        finalized_ = true;
    }

    void init_weights(std::mt19937_64& rng) {
        check_finalized();
        for (auto& l : layers_) l->init_weights(rng);
    }

    Shape input_shape() const { return input_; }
    int n_classes() const { return n_classes_; }
    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
    std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += const_cast<Layer&>(*l).params().size();
        return n;
    }

    // --- forward ---------------------------------------------------------

    // Batch forward. Rows of X are flattened inputs; returns N x n_classes
    // logits. With `cache`, every layer's forward state is kept for backward.
    Mat forward(const Mat& X, ForwardCache* cache = nullptr, bool train = false,
                std::mt19937_64* rng = nullptr) const {
        check_finalized();
        if (X.cols() != input_.size())
            throw std::invalid_argument("Network: input has " + std::to_string(X.cols()) +
                                        " values per row, expected " +
                                        std::to_string(input_.size()));
        if (cache) cache->layers.resize(layers_.size());
        Mat cur = X, next;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->forward(cur, next, cache ? &cache->layers[i] : nullptr, train, rng);
            cur.swap(next);
        }
        if (cache) cache->logits = cur;
        return cur;
    }

    Eigen::VectorXd logits(const Image& img) const {
        return forward(to_row(img)).row(0).transpose();
    }

    int classify(const Image& img) const { return argmax(logits(img)); }

    static int argmax(const Eigen::VectorXd& v) {
        Eigen::Index k = 0;
        v.maxCoeff(&k);
        return static_cast<int>(k);
    }

    // --- reverse mode ----------------------------------------------------

    // Pushes M cotangent rows (one per requested output combination) back
    // through a single cached forward pass. Returns M x input_size.
    Mat backward(const Mat& dLogits, const ForwardCache& cache,
                 bool broadcast_cache = false) const {
        check_finalized();
        Mat cur = dLogits, prev;
        for (std::size_t i = layers_.size(); i-- > 0;) {
            layers_[i]->backward(cur, prev, cache.layers[i], broadcast_cache);
            cur.swap(prev);
        }
        return cur;
    }

    // d(F_k - F_l)/dx at img, as an image-shaped gradient.
    Image input_gradient(const Image& img, int k, int l) const {
        check_labels(k, l);
        ForwardCache cache;
        forward(to_row(img), &cache);
        Mat cot = Mat::Zero(1, n_classes_);
        cot(0, k) += 1.0;
        cot(0, l) -= 1.0;
        Mat g = backward(cot, cache);
        return from_row(g.row(0), img.channels());
    }

    // Jacobian of all logits with respect to the input: n_classes rows of
    // input_size, all pushed through one shared forward cache.
    Mat logit_jacobian(const Image& img, Eigen::VectorXd* logits_out = nullptr) const {
        ForwardCache cache;
        Mat lg = forward(to_row(img), &cache);
        if (logits_out) *logits_out = lg.row(0).transpose();
        Mat cot = Mat::Identity(n_classes_, n_classes_);
        return backward(cot, cache, /*broadcast_cache=*/true);
    }

    // --- loss ------------------------------------------------------------

    // Mean softmax cross-entropy over the batch; fills dLogits with the
    // gradient (softmax - onehot)/N when requested.
    static double cross_entropy(const Mat& logits, const std::vector<int>& labels,
                                Mat* dLogits = nullptr) {
        const Eigen::Index N = logits.rows();
        if (static_cast<std::size_t>(N) != labels.size())
            throw std::invalid_argument("cross_entropy: batch/label size mismatch");
        double loss = 0.0;
        if (dLogits) dLogits->resize(N, logits.cols());
        for (Eigen::Index n = 0; n < N; ++n) {
            const auto row = logits.row(n);
            const double m = row.maxCoeff();
            const Eigen::ArrayXd e = (row.array() - m).exp();
            const double Z = e.sum();
            loss += std::log(Z) + m - row(labels[static_cast<std::size_t>(n)]);
            if (dLogits) {
                dLogits->row(n) = (e / Z).matrix();
                (*dLogits)(n, labels[static_cast<std::size_t>(n)]) -= 1.0;
            }
        }
        loss /= static_cast<double>(N);
        if (dLogits) *dLogits /= static_cast<double>(N);
        return loss;
    }

    // --- conversions ------------------------------------------------------

    Mat to_row(const Image& img) const {
        if (img.width() != input_.h || img.width() != input_.w ||
            img.channels() != input_.c)
            throw std::invalid_argument("Network: image shape does not match input");
        Mat X(1, input_.size());
        std::copy(img.data().begin(), img.data().end(), X.data());
        return X;
    }

    Image from_row(const Eigen::RowVectorXd& row, int channels) const {
        Image out(input_.h, channels);
        std::copy(row.data(), row.data() + row.size(), out.data().begin());
        return out;
    }

    // --- persistence -----------------------------------------------------

    void save(const std::string& path) const {
        check_finalized();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for writing: " + path);
        write_u32(f, kMagic);
        write_u32(f, kVersion);
        write_u32(f, static_cast<std::uint32_t>(input_.h));
        write_u32(f, static_cast<std::uint32_t>(input_.w));
        write_u32(f, static_cast<std::uint32_t>(input_.c));
        write_u32(f, static_cast<std::uint32_t>(n_classes_));
        write_u32(f, static_cast<std::uint32_t>(layers_.size()));
        for (const auto& l : layers_) {
            write_u32(f, static_cast<std::uint32_t>(l->kind()));
            const auto ints = l->int_attrs();
            const auto reals = l->real_attrs();
            write_u32(f, static_cast<std::uint32_t>(ints.size()));
            write_u32(f, static_cast<std::uint32_t>(reals.size()));
            for (auto v : ints) write_i64(f, v);
            for (auto v : reals) write_f64(f, v);
            auto p = const_cast<Layer&>(*l).params();
            write_u64(f, p.size());
            f.write(reinterpret_cast<const char*>(p.data()),
                    static_cast<std::streamsize>(p.size() * sizeof(double)));
        }
        if (!f) throw std::runtime_error("write failed: " + path);
    }

    // Loads weights into this (finalized) network, validating that the file's
    // layer table matches the architecture exactly.
    void load(const std::string& path) {
        check_finalized();
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open: " + path);
        expect(read_u32(f) == kMagic, path, "not a weight file (bad magic)");
        expect(read_u32(f) == kVersion, path, "unsupported weight file version");
        expect(read_u32(f) == static_cast<std::uint32_t>(input_.h) &&
               read_u32(f) == static_cast<std::uint32_t>(input_.w) &&
               read_u32(f) == static_cast<std::uint32_t>(input_.c),
               path, "input shape mismatch");
        expect(read_u32(f) == static_cast<std::uint32_t>(n_classes_), path,
               "class count mismatch");
        expect(read_u32(f) == layers_.size(), path, "layer count mismatch");
        for (auto& l : layers_) {
            expect(read_u32(f) == static_cast<std::uint32_t>(l->kind()), path,
                   std::string("layer kind mismatch (expected ") + to_string(l->kind()) + ")");
            const auto ints = l->int_attrs();
            const auto reals = l->real_attrs();
            expect(read_u32(f) == ints.size(), path, "layer attribute mismatch");
            expect(read_u32(f) == reals.size(), path, "layer attribute mismatch");
            for (auto v : ints)
                expect(read_i64(f) == v, path,
                       std::string("layer shape mismatch in ") + to_string(l->kind()));
            for (auto v : reals)
                expect(read_f64(f) == v, path,
                       std::string("layer parameter mismatch in ") + to_string(l->kind()));
            auto p = l->params();
            expect(read_u64(f) == p.size(), path, "weight blob size mismatch");
            f.read(reinterpret_cast<char*>(p.data()),
                   static_cast<std::streamsize>(p.size() * sizeof(double)));
            expect(static_cast<bool>(f), path, "truncated weight blob");
        }
        // Must now be at end of file.
        f.peek();
        expect(f.eof(), path, "trailing bytes after weights");
    }

private:
    static constexpr std::uint32_t kMagic = 0x4144464eu;   // "ADFN"
    static constexpr std::uint32_t kVersion = 1;

    void check_finalized() const {
        if (!finalized_) throw std::logic_error("Network: finalize() not called");
    }
    void check_labels(int k, int l) const {
        if (k < 0 || k >= n_classes_ || l < 0 || l >= n_classes_)
            throw std::invalid_argument("Network: label out of range");
    }

    static void expect(bool ok, const std::string& path, const std::string& what) {
        if (!ok) throw std::runtime_error(path + ": " + what);
    }
    static void write_u32(std::ostream& f, std::uint32_t v) {
        f.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    static void write_u64(std::ostream& f, std::uint64_t v) {
        f.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    static void write_i64(std::ostream& f, std::int64_t v) {
        f.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    static void write_f64(std::ostream& f, double v) {
        f.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    static std::uint32_t read_u32(std::istream& f) {
        std::uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    }
    static std::uint64_t read_u64(std::istream& f) {
        std::uint64_t v = 0;
        f.read(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    }
    static std::int64_t read_i64(std::istream& f) {
        std::int64_t v = 0;
        f.read(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    }
    static double read_f64(std::istream& f) {
        double v = 0;
        f.read(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    }

    Shape input_;
    int n_classes_;
    std::vector<std::unique_ptr<Layer>> layers_;
    bool finalized_ = false;
};

// The two reference MNIST classifiers.
//
// model_a: conv32(5x5) -> pool -> relu -> conv64(5x5) -> pool -> relu
//          -> fc1024 -> relu -> fc10          (valid padding: 28->24->12->8->4)
// model_b: conv128(3x3) -> relu -> conv64(3x3) -> relu -> dropout(1/4)
//          -> fc128 -> relu -> dropout(1/2) -> fc10
inline Network make_model_a() {
    Network net(Shape::image(28, 28, 1), 10);
    net.emplace<Conv2d>(32, 5)
        .emplace<MaxPool2x2>()
        .emplace<Relu>()
        .emplace<Conv2d>(64, 5)
        .emplace<MaxPool2x2>()
        .emplace<Relu>()
        .emplace<Flatten>()
        .emplace<Dense>(1024)
        .emplace<Relu>()
        .emplace<Dense>(10);
    net.finalize();
    return net;
}

inline Network make_model_b() {
    Network net(Shape::image(28, 28, 1), 10);
    net.emplace<Conv2d>(128, 3)
        .emplace<Relu>()
        .emplace<Conv2d>(64, 3)
        .emplace<Relu>()
        .emplace<Dropout>(0.25)
        .emplace<Flatten>()
        .emplace<Dense>(128)
        .emplace<Relu>()
        .emplace<Dropout>(0.5)
        .emplace<Dense>(10);
    net.finalize();
    return net;
}

inline Network make_model(const std::string& name) {
    if (name == "a" || name == "model_a" || name == "mnist-a") return make_model_a();
    if (name == "b" || name == "model_b" || name == "mnist-b") return make_model_b();
    throw std::invalid_argument("unknown model '" + name + "' (expected: a, b)");
}

}  // namespace adef::nn
