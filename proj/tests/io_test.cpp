#include "adef/io.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "test_util.hpp"

using adef::Image;
using adef::VectorField;

namespace {

std::filesystem::path tmp(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST(Pnm, GrayscaleRoundTripWithinQuantization) {
    std::mt19937_64 rng(3);
    const Image img = testutil::random_image(9, 1, rng);
    const auto path = tmp("io_gray.pgm");
    adef::io::write_pnm(img, path.string());
    const Image back = adef::io::read_pnm(path.string());
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t j = 0; j < img.size(); ++j)
        EXPECT_NEAR(back.data()[j], img.data()[j], 0.5 / 255.0 + 1e-12);
    // A second round trip through the 8-bit lattice is exact.
    adef::io::write_pnm(back, path.string());
    const Image twice = adef::io::read_pnm(path.string());
    for (std::size_t j = 0; j < back.size(); ++j)
        EXPECT_EQ(twice.data()[j], back.data()[j]);
    std::filesystem::remove(path);
}

TEST(Pnm, ColorUsesP6) {
    std::mt19937_64 rng(5);
    const Image img = testutil::random_image(4, 3, rng);
    const auto path = tmp("io_color.ppm");
    adef::io::write_pnm(img, path.string());
    std::ifstream f(path, std::ios::binary);
    std::string magic;
    f >> magic;
    EXPECT_EQ(magic, "P6");
    const Image back = adef::io::read_pnm(path.string());
    EXPECT_EQ(back.channels(), 3);
    std::filesystem::remove(path);
}

TEST(Pnm, OutOfRangeValuesAreClamped) {
    Image img(4, 1);
    img(0, 0, 0) = -0.7;
    img(1, 1, 0) = 1.9;
    const auto path = tmp("io_clamp.pgm");
    adef::io::write_pnm(img, path.string());
    const Image back = adef::io::read_pnm(path.string());
    EXPECT_EQ(back(0, 0, 0), 0.0);
    EXPECT_EQ(back(1, 1, 0), 1.0);
    std::filesystem::remove(path);
}

TEST(Pnm, RejectsForeignFiles) {
    const auto path = tmp("io_notpnm.pgm");
    std::ofstream f(path);
    f << "JUNK 3 3 255 xxxxxxxxx";
    f.close();
    EXPECT_THROW(adef::io::read_pnm(path.string()), std::runtime_error);
    EXPECT_THROW(adef::io::read_pnm("/nonexistent/file.pgm"), std::runtime_error);
    std::filesystem::remove(path);
}

TEST(RawImage, RoundTripIsBitExact) {
    std::mt19937_64 rng(7);
    Image img = testutil::random_image(6, 1, rng);
    img(2, 2, 0) = -0.123456789123456789;  // raw dumps must keep signs
    const auto path = tmp("io_img.raw");
    adef::io::write_image_raw(img, path.string());
    const Image back = adef::io::read_image_raw(path.string());
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t j = 0; j < img.size(); ++j)
        EXPECT_EQ(back.data()[j], img.data()[j]);
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".json");
}

TEST(RawImage, TruncationAndSidecarMismatchRejected) {
    std::mt19937_64 rng(11);
    const Image img = testutil::random_image(6, 1, rng);
    const auto path = tmp("io_img_bad.raw");
    adef::io::write_image_raw(img, path.string());
    // Truncate the payload.
    std::filesystem::resize_file(path, 100);
    EXPECT_THROW(adef::io::read_image_raw(path.string()), std::runtime_error);
    // Missing sidecar.
    std::filesystem::remove(path.string() + ".json");
    EXPECT_THROW(adef::io::read_image_raw(path.string()), std::runtime_error);
    std::filesystem::remove(path);
}

TEST(RawField, RoundTripIsBitExact) {
    std::mt19937_64 rng(13);
    const VectorField tau = testutil::random_field(7, 2.0, rng);
    const auto path = tmp("io_field.raw");
    adef::io::write_field_raw(tau, path.string());
    const VectorField back = adef::io::read_field_raw(path.string());
    ASSERT_EQ(back.width(), tau.width());
    for (std::size_t j = 0; j < tau.size(); ++j)
        EXPECT_EQ(back.data()[j], tau.data()[j]);
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".json");
}

TEST(FieldCsv, ParsesBackToTheSameValues) {
    std::mt19937_64 rng(17);
    const VectorField tau = testutil::random_field(5, 3.0, rng);
    const auto path = tmp("io_field.csv");
    adef::io::write_field_csv(tau, path.string());

    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(header, "s,t,dr,dc");
    int rows = 0;
    std::string line;
    while (std::getline(f, line)) {
        int s = 0, t = 0;
        double dr = 0.0, dc = 0.0;
        ASSERT_EQ(std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &s, &t, &dr, &dc), 4);
        EXPECT_EQ(dr, tau.dr(s, t));  // 17 significant digits round-trip exactly
        EXPECT_EQ(dc, tau.dc(s, t));
        ++rows;
    }
    EXPECT_EQ(rows, 25);
    std::filesystem::remove(path);
}
