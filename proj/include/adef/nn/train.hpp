#pragma once

// Minibatch SGD with classical momentum, plus an optional batch-adversary
// hook that lets a caller replace each batch with attacked inputs before the
// gradient step (robust training).
//
// All randomness (shuffling, weight init, dropout) flows through one caller-
// seeded engine, so a given seed reproduces the run bit for bit.

#include "adef/nn/mnist.hpp"
#include "adef/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace adef::nn {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 64;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::uint64_t seed = 1;
    bool init = true;  // false: continue from the network's current weights
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double train_accuracy = 0.0;
};

// Receives the clean batch (rows x input, with labels) and may rewrite the
// rows in place; called before the forward/backward pass of every batch.
using BatchAdversary = std::function<void(Mat& batch, const std::vector<int>& labels)>;

// Fraction of `data` the network labels correctly.
inline double accuracy(const Network& net, const Dataset& data, int batch_size = 256) {
    Eigen::Index correct = 0;
    for (Eigen::Index at = 0; at < data.size(); at += batch_size) {
        const Eigen::Index n = std::min<Eigen::Index>(batch_size, data.size() - at);
        const Mat logits = net.forward(data.images.middleRows(at, n));
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index k = 0;
            logits.row(i).maxCoeff(&k);
            if (static_cast<int>(k) == data.labels[static_cast<std::size_t>(at + i)]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

inline std::vector<EpochStats> train(Network& net, const Dataset& data,
                                     const TrainConfig& cfg,
                                     const BatchAdversary& adversary = nullptr,
                                     const std::function<void(const EpochStats&)>& on_epoch = nullptr) {
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: bad batch size");

    std::mt19937_64 rng(cfg.seed);
    if (cfg.init) net.init_weights(rng);

    // One velocity buffer per parameterized layer.
    std::vector<std::vector<double>> velocity;
    for (auto& l : net.layers()) velocity.emplace_back(l->params().size(), 0.0);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    std::vector<EpochStats> history;
    Mat batch, dLogits;
    ForwardCache cache;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        Eigen::Index correct = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const Eigen::Index n =
                std::min<std::size_t>(cfg.batch_size, order.size() - at);
            batch.resize(n, data.images.cols());
            std::vector<int> labels(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                batch.row(i) = data.images.row(order[at + i]);
                labels[static_cast<std::size_t>(i)] =
                    data.labels[static_cast<std::size_t>(order[at + i])];
            }
            if (adversary) adversary(batch, labels);

            const Mat logits = net.forward(batch, &cache, /*train=*/true, &rng);
            const double loss = Network::cross_entropy(logits, labels, &dLogits);
            if (!std::isfinite(loss))
                throw std::runtime_error(
                    "train: loss diverged (epoch " + std::to_string(epoch + 1) + ", batch at " +
                    std::to_string(at) + "); lower the learning rate");
            loss_sum += loss * static_cast<double>(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                Eigen::Index k = 0;
                logits.row(i).maxCoeff(&k);
                if (static_cast<int>(k) == labels[static_cast<std::size_t>(i)]) ++correct;
            }

            // Backward through the stack, accumulating parameter grads.
            Mat cur = dLogits, prev;
            auto& layers = net.layers();
            for (std::size_t li = layers.size(); li-- > 0;) {
                layers[li]->zero_grads();
                layers[li]->accumulate_param_grads(cur, cache.layers[li]);
                if (li > 0) {  // input cotangent of layer 0 is unused
                    layers[li]->backward(cur, prev, cache.layers[li], false);
                    cur.swap(prev);
                }
            }

            // v <- mu v - lr g;  w <- w + v
            for (std::size_t li = 0; li < layers.size(); ++li) {
                auto p = layers[li]->params();
                auto g = layers[li]->grads();
                auto& v = velocity[li];
                for (std::size_t j = 0; j < p.size(); ++j) {
                    v[j] = cfg.momentum * v[j] - cfg.learning_rate * g[j];
                    p[j] += v[j];
                }
            }
        }
        EpochStats s;
        s.epoch = epoch + 1;
        s.mean_loss = loss_sum / static_cast<double>(data.size());
        s.train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
        history.push_back(s);
        if (on_epoch) on_epoch(s);
    }
    return history;
}

}  // namespace adef::nn
