#pragma once

// Reader for the IDX image/label files of the MNIST handwritten-digit set.
// Pixels are scaled to [0,1] doubles; images stay in row-major order.

#include "adef/image.hpp"
#include "adef/nn/layers.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace adef::nn {

struct Dataset {
    Mat images;               // N x (W*W), each row one square image in [0,1]
    std::vector<int> labels;  // N values in 0..9

    Eigen::Index size() const { return images.rows(); }

    int width() const {
        const auto w = static_cast<Eigen::Index>(std::lround(std::sqrt(
            static_cast<double>(images.cols()))));
        if (w * w != images.cols())
            throw std::logic_error("Dataset: rows are not square images");
        return static_cast<int>(w);
    }

    Image image(Eigen::Index i) const {
        Image out(width(), 1);
        const auto row = images.row(i);
        std::copy(row.data(), row.data() + row.size(), out.data().begin());
        return out;
    }
};

// First `n` examples of a dataset (n <= 0: all of them).
inline Dataset head(const Dataset& d, Eigen::Index n) {
    if (n <= 0 || n >= d.size()) return d;
    Dataset s;
    s.images = d.images.topRows(n);
    s.labels.assign(d.labels.begin(), d.labels.begin() + n);
    return s;
}

namespace detail {

inline std::uint32_t read_be32(std::istream& f, const std::string& path) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw std::runtime_error(path + ": truncated header");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
           (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

}  // namespace detail

inline Mat load_idx_images(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    if (detail::read_be32(f, path) != 2051)
        throw std::runtime_error(path + ": not an IDX image file");
    const std::uint32_t n = detail::read_be32(f, path);
    const std::uint32_t rows = detail::read_be32(f, path);
    const std::uint32_t cols = detail::read_be32(f, path);
    if (rows != 28 || cols != 28)
        throw std::runtime_error(path + ": expected 28x28 images");
    std::vector<unsigned char> raw(static_cast<std::size_t>(n) * rows * cols);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw std::runtime_error(path + ": truncated pixel data");
    Mat images(n, static_cast<Eigen::Index>(rows) * cols);
    for (std::size_t i = 0; i < raw.size(); ++i)
        images.data()[i] = static_cast<double>(raw[i]) / 255.0;
    return images;
}

inline std::vector<int> load_idx_labels(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    if (detail::read_be32(f, path) != 2049)
        throw std::runtime_error(path + ": not an IDX label file");
    const std::uint32_t n = detail::read_be32(f, path);
    std::vector<unsigned char> raw(n);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw std::runtime_error(path + ": truncated label data");
    std::vector<int> labels(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (raw[i] > 9) throw std::runtime_error(path + ": label out of range");
        labels[i] = raw[i];
    }
    return labels;
}

// Loads the train or test split from a directory holding the four standard
// IDX files (train-images-idx3-ubyte, t10k-labels-idx1-ubyte, ...).
inline Dataset load_mnist(const std::string& dir, bool train) {
    namespace fs = std::filesystem;
    const std::string stem = train ? "train" : "t10k";
    Dataset d;
    d.images = load_idx_images((fs::path(dir) / (stem + "-images-idx3-ubyte")).string());
    d.labels = load_idx_labels((fs::path(dir) / (stem + "-labels-idx1-ubyte")).string());
    if (d.images.rows() != static_cast<Eigen::Index>(d.labels.size()))
        throw std::runtime_error(dir + ": image/label count mismatch");
    return d;
}

}  // namespace adef::nn
