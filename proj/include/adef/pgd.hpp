#pragma once

// Projected gradient descent in the l-infinity ball: the additive-noise
// baseline the deformation attack is compared against, and the adversary
// used for robust training.

#include "adef/attack.hpp"
#include "adef/image.hpp"
#include "adef/nn/network.hpp"
#include "adef/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>

namespace adef {

struct PgdConfig {
    double epsilon_inf = 0.3;  // radius of the l-infinity ball around the input
    double step = 0.01;        // per-iteration step size
    int iterations = 40;
    bool random_start = false;  // uniform start inside the ball (training-time)

    void validate() const {
        if (iterations < 1) throw std::invalid_argument("pgd: need at least 1 iteration");
        if (epsilon_inf < 0.0) throw std::invalid_argument("pgd: negative ball radius");
        // epsilon_inf = 0 degenerates to the identity attack; any positive
        // step is projected straight back onto the input.
        if (!(step > 0.0) || (epsilon_inf > 0.0 && step > epsilon_inf))
            throw std::invalid_argument("pgd: step must satisfy 0 < step <= epsilon_inf");
    }
};

struct PgdResult {
    Image output;
    bool success = false;  // classify(output) != label
    int final_label = -1;
};

namespace detail {

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Batch PGD on rows of X (shared shape/labels); used by both the per-image
// entry point and the training adversary so the two cannot drift apart.
inline void pgd_rows(const nn::Network& net, const nn::Mat& X,
                     const std::vector<int>& labels, const PgdConfig& cfg,
                     std::mt19937_64* rng, nn::Mat& Y) {
    cfg.validate();
    Y = X;
    if (cfg.random_start) {
        if (!rng) throw std::logic_error("pgd: random_start needs an rng");
        std::uniform_real_distribution<double> u(-cfg.epsilon_inf, cfg.epsilon_inf);
        for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] += u(*rng);
    }
    auto project = [&] {
        for (Eigen::Index i = 0; i < Y.size(); ++i) {
            const double x = X.data()[i];
            double v = std::clamp(Y.data()[i], x - cfg.epsilon_inf, x + cfg.epsilon_inf);
            Y.data()[i] = std::clamp(v, 0.0, 1.0);
        }
    };
    project();
    nn::ForwardCache cache;
    nn::Mat dLogits, dX;
    for (int it = 0; it < cfg.iterations; ++it) {
        const nn::Mat logits = net.forward(Y, &cache);
        nn::Network::cross_entropy(logits, labels, &dLogits);
        dX = net.backward(dLogits, cache);
        for (Eigen::Index i = 0; i < Y.size(); ++i)
            Y.data()[i] += cfg.step * sign0(dX.data()[i]);
        project();
    }
}

}  // namespace detail

// Maximizes the cross-entropy of the true label by signed gradient ascent,
// projecting every iterate onto the epsilon ball around x intersected with
// the valid intensity box [0,1].
inline PgdResult pgd_attack(const nn::Network& net, const Image& x, int label,
                            const PgdConfig& cfg, std::mt19937_64* rng = nullptr) {
    nn::Mat Y;
    detail::pgd_rows(net, net.to_row(x), {label}, cfg, rng, Y);
    PgdResult res;
    res.output = net.from_row(Y.row(0), x.channels());
    res.final_label = net.classify(res.output);
    res.success = res.final_label != label;
    return res;
}

enum class AdversaryKind { pgd, adef };

// Builds a minibatch transformer for nn::train(): every batch is replaced by
// its attacked version against the model's current weights. Rows the attack
// fails to flip pass through unchanged for both adversaries.
inline nn::BatchAdversary adversary_hook(const nn::Network& net, AdversaryKind kind,
                                         const PgdConfig& pgd_cfg, const AdefConfig& adef_cfg,
                                         std::mt19937_64* rng = nullptr) {
    if (kind == AdversaryKind::pgd) {
        return [&net, pgd_cfg, rng](nn::Mat& batch, const std::vector<int>& labels) {
            nn::Mat Y;
            detail::pgd_rows(net, batch, labels, pgd_cfg, rng, Y);
            const nn::Mat logits = net.forward(Y, nullptr);
            for (Eigen::Index i = 0; i < Y.rows(); ++i) {
                Eigen::Index pred;
                logits.row(i).maxCoeff(&pred);
                if (static_cast<int>(pred) == labels[static_cast<std::size_t>(i)])
                    Y.row(i) = batch.row(i);  // attack failed: keep the clean row
            }
            batch = std::move(Y);
        };
    }
    return [&net, adef_cfg](nn::Mat& batch, const std::vector<int>& labels) {
        const int W = static_cast<int>(net.input_shape().h);
        for (Eigen::Index i = 0; i < batch.rows(); ++i) {
            Image img(W, net.input_shape().c);
            std::copy(batch.row(i).data(), batch.row(i).data() + batch.cols(),
                      img.data().begin());
            const int lbl = labels[static_cast<std::size_t>(i)];
            if (net.classify(img) != lbl) continue;  // attack assumes a correct model
            AttackResult r = attack(net, img, lbl, adef_cfg);
            if (r.status == AttackStatus::success)
                std::copy(r.deformed.data().begin(), r.deformed.data().end(),
                          batch.row(i).data());
        }
    };
}

}  // namespace adef
