#include "adef/pgd.hpp"

#include <gtest/gtest.h>

#include <random>

#include "adef/nn/train.hpp"
#include "test_util.hpp"

using adef::Image;
using adef::PgdConfig;
using adef::PgdResult;
using adef::nn::Dataset;
using adef::nn::Mat;
using adef::nn::Network;
using adef::nn::Shape;

namespace {

Network random_net(std::uint64_t seed) {
    Network net(Shape::image(6, 6, 1), 3);
    net.emplace<adef::nn::Conv2d>(3, 3)
        .emplace<adef::nn::Relu>()
        .emplace<adef::nn::Flatten>()
        .emplace<adef::nn::Dense>(3);
    net.finalize();
    std::mt19937_64 rng(seed);
    net.init_weights(rng);
    return net;
}

}  // namespace

TEST(Pgd, SignConventionZeroGradientMeansNoMovement) {
    // All-zero weights: the loss gradient w.r.t. the input is identically 0,
    // so with sign(0) = 0 the iterates never move off the input.
    Network net(Shape::image(6, 6, 1), 3);
    net.emplace<adef::nn::Flatten>().emplace<adef::nn::Dense>(3);
    net.finalize();
    std::mt19937_64 rng(7);
    const Image x = testutil::random_image(6, 1, rng);
    PgdConfig cfg;
    cfg.epsilon_inf = 0.3;
    cfg.step = 0.01;
    cfg.iterations = 5;
    const PgdResult r = adef::pgd_attack(net, x, 0, cfg);
    for (std::size_t j = 0; j < x.size(); ++j)
        EXPECT_EQ(r.output.data()[j], x.data()[j]);
}

TEST(Pgd, ProjectionContractHoldsAtEveryIterate) {
    const Network net = random_net(11);
    std::mt19937_64 rng(13);
    // With random_start off the trajectory is deterministic, so the k-step
    // output IS the k-th iterate of the longer run; checking all k verifies
    // the projection after every iteration.
    for (int trial = 0; trial < 5; ++trial) {
        const Image x = testutil::random_image(6, 1, rng);
        for (int k = 1; k <= 6; ++k) {
            PgdConfig cfg;
            cfg.epsilon_inf = 0.3;
            cfg.step = 0.05;
            cfg.iterations = k;
            const PgdResult r = adef::pgd_attack(net, x, 0, cfg);
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double y = r.output.data()[j];
                EXPECT_LE(std::abs(y - x.data()[j]), cfg.epsilon_inf + 1e-12);
                EXPECT_GE(y, 0.0);
                EXPECT_LE(y, 1.0);
            }
        }
    }
}

TEST(Pgd, DeterministicWithoutRandomStart) {
    const Network net = random_net(17);
    std::mt19937_64 rng(19);
    const Image x = testutil::random_image(6, 1, rng);
    PgdConfig cfg;
    const PgdResult a = adef::pgd_attack(net, x, 1, cfg);
    const PgdResult b = adef::pgd_attack(net, x, 1, cfg);
    for (std::size_t j = 0; j < x.size(); ++j)
        EXPECT_EQ(a.output.data()[j], b.output.data()[j]);
    EXPECT_EQ(a.success, b.success);
}

TEST(Pgd, RandomStartStaysInBallAndNeedsRng) {
    const Network net = random_net(23);
    std::mt19937_64 rng(29);
    const Image x = testutil::random_image(6, 1, rng);
    PgdConfig cfg;
    cfg.random_start = true;
    EXPECT_THROW(adef::pgd_attack(net, x, 0, cfg), std::logic_error);
    std::mt19937_64 start_rng(31);
    const PgdResult r = adef::pgd_attack(net, x, 0, cfg, &start_rng);
    for (std::size_t j = 0; j < x.size(); ++j) {
        EXPECT_LE(std::abs(r.output.data()[j] - x.data()[j]), cfg.epsilon_inf + 1e-12);
        EXPECT_GE(r.output.data()[j], 0.0);
        EXPECT_LE(r.output.data()[j], 1.0);
    }
}

TEST(Pgd, ZeroRadiusIsIdentityAttack) {
    const Network net = random_net(37);
    std::mt19937_64 rng(41);
    const Image x = testutil::random_image(6, 1, rng);
    PgdConfig cfg;
    cfg.epsilon_inf = 0.0;
    cfg.step = 0.01;
    const PgdResult r = adef::pgd_attack(net, x, net.classify(x), cfg);
    for (std::size_t j = 0; j < x.size(); ++j)
        EXPECT_EQ(r.output.data()[j], x.data()[j]);
    EXPECT_FALSE(r.success);
}

TEST(Pgd, ConfigValidation) {
    const Network net = random_net(43);
    const Image x(6, 1);
    PgdConfig bad;
    bad.step = 0.0;
    EXPECT_THROW(adef::pgd_attack(net, x, 0, bad), std::invalid_argument);
    PgdConfig bad2;
    bad2.step = 0.5;
    bad2.epsilon_inf = 0.3;  // step > radius
    EXPECT_THROW(adef::pgd_attack(net, x, 0, bad2), std::invalid_argument);
    PgdConfig bad3;
    bad3.iterations = 0;
    EXPECT_THROW(adef::pgd_attack(net, x, 0, bad3), std::invalid_argument);
}

TEST(Pgd, SuccessFlagMatchesClassifier) {
    const Network net = random_net(47);
    std::mt19937_64 rng(53);
    PgdConfig cfg;
    cfg.epsilon_inf = 0.5;
    cfg.step = 0.05;
    cfg.iterations = 30;
    int flips = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const Image x = testutil::random_image(6, 1, rng);
        const int label = net.classify(x);
        const PgdResult r = adef::pgd_attack(net, x, label, cfg);
        EXPECT_EQ(r.success, net.classify(r.output) != label);
        EXPECT_EQ(r.final_label, net.classify(r.output));
        if (r.success) ++flips;
    }
    EXPECT_GE(flips, 1) << "a wide-radius attack on a random net should flip something";
}

TEST(AdversaryHook, PgdKindKeepsBatchInBall) {
    const Network net = random_net(59);
    adef::PgdConfig pgd_cfg;
    pgd_cfg.epsilon_inf = 0.3;
    pgd_cfg.step = 0.05;
    pgd_cfg.iterations = 8;
    pgd_cfg.random_start = true;
    std::mt19937_64 rng(61);
    auto hook = adef::adversary_hook(net, adef::AdversaryKind::pgd, pgd_cfg, {}, &rng);

    Mat batch(4, 36);
    std::vector<int> labels{0, 1, 2, 0};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = u(rng);
    const Mat before = batch;
    hook(batch, labels);
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        EXPECT_LE(std::abs(batch.data()[i] - before.data()[i]), pgd_cfg.epsilon_inf + 1e-12);
        EXPECT_GE(batch.data()[i], 0.0);
        EXPECT_LE(batch.data()[i], 1.0);
    }
    // Rows the attack failed on pass through unchanged, so a changed row
    // must be a flipped row.
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
        if (batch.row(r) == before.row(r)) continue;
        const Image img = net.from_row(batch.row(r), 1);
        EXPECT_NE(net.classify(img), labels[static_cast<std::size_t>(r)]);
    }
}

TEST(AdversaryHook, AdefKindKeepsBatchValid) {
    const Network net = random_net(67);
    adef::AdefConfig adef_cfg;
    adef_cfg.max_iterations = 10;
    std::mt19937_64 rng(71);
    auto hook = adef::adversary_hook(net, adef::AdversaryKind::adef, {}, adef_cfg);

    Mat batch(4, 36);
    std::vector<int> labels{0, 1, 2, 0};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = u(rng);
    const Mat before = batch;
    hook(batch, labels);
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        EXPECT_GE(batch.data()[i], 0.0);
        EXPECT_LE(batch.data()[i], 1.0);
    }
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
        if (batch.row(r) == before.row(r)) continue;
        const Image img = net.from_row(batch.row(r), 1);
        EXPECT_NE(net.classify(img), labels[static_cast<std::size_t>(r)]);
    }
}
