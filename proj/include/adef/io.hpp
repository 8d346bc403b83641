#pragma once

// File formats for inspecting attack artifacts:
//   - images: binary PGM (P5, grayscale) / PPM (P6, color), 8-bit, [0,1]
//     mapped linearly to 0..255, plus lossless raw little-endian f64 dumps
//     with a JSON sidecar describing the layout
//   - vector fields: raw f64 dumps (component-interleaved) with sidecar,
//     and a CSV rendering for plotting
//
// All raw dumps round-trip bit-exactly; the 8-bit formats are for viewing.

#include "adef/image.hpp"
#include "adef/vector_field.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace adef::io {

using json = nlohmann::ordered_json;

namespace detail {

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
    std::ofstream f(path, mode);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    return f;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
    std::ifstream f(path, mode);
    if (!f) throw std::runtime_error("cannot open: " + path);
    return f;
}

inline void check(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw std::runtime_error(path + ": " + what);
}

}  // namespace detail

// --- 8-bit viewing formats -------------------------------------------------

// Writes PGM (1 channel) or PPM (3 channels). Values are clamped to [0,1]
// and quantized to 8 bits, so this is a viewing format, not an archival one.
inline void write_pnm(const Image& img, const std::string& path) {
    auto f = detail::open_out(path, std::ios::binary);
    const int W = img.width();
    f << (img.channels() == 1 ? "P5" : "P6") << "\n" << W << " " << W << "\n255\n";
    std::vector<unsigned char> bytes(img.data().size());
    for (std::size_t j = 0; j < bytes.size(); ++j) {
        const double v = std::clamp(img.data()[j], 0.0, 1.0);
        bytes[j] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    detail::check(static_cast<bool>(f), path, "write failed");
}

inline Image read_pnm(const std::string& path) {
    auto f = detail::open_in(path, std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    detail::check(magic == "P5" || magic == "P6", path, "not a binary PGM/PPM file");
    detail::check(w == h && w >= 2, path, "image is not square");
    detail::check(maxval == 255, path, "expected 8-bit depth");
    f.get();  // the single whitespace byte after the header
    const int ch = magic == "P5" ? 1 : 3;
    std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * ch);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    detail::check(static_cast<bool>(f), path, "truncated pixel data");
    Image img(w, ch);
    for (std::size_t j = 0; j < bytes.size(); ++j)
        img.data()[j] = static_cast<double>(bytes[j]) / 255.0;
    return img;
}

// --- lossless raw dumps ------------------------------------------------------

// Image as raw little-endian f64 values plus a `<path>.json` sidecar.
inline void write_image_raw(const Image& img, const std::string& path) {
    auto f = detail::open_out(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(img.data().data()),
            static_cast<std::streamsize>(img.data().size() * sizeof(double)));
    detail::check(static_cast<bool>(f), path, "write failed");
    json sidecar;
    sidecar["width"] = img.width();
    sidecar["channels"] = img.channels();
    sidecar["dtype"] = "f64-le";
    sidecar["order"] = "row-major s,t,channel";
    auto s = detail::open_out(path + ".json", std::ios::out);
    s << sidecar.dump(2) << "\n";
}

inline Image read_image_raw(const std::string& path) {
    json sidecar;
    {
        auto s = detail::open_in(path + ".json", std::ios::in);
        s >> sidecar;
    }
    const int width = sidecar.at("width").get<int>();
    const int channels = sidecar.at("channels").get<int>();
    detail::check(sidecar.at("dtype").get<std::string>() == "f64-le", path,
                  "unsupported dtype in sidecar");
    Image img(width, channels);
    auto f = detail::open_in(path, std::ios::binary);
    f.read(reinterpret_cast<char*>(img.data().data()),
           static_cast<std::streamsize>(img.data().size() * sizeof(double)));
    detail::check(static_cast<bool>(f), path, "truncated raw image");
    f.peek();
    detail::check(f.eof(), path, "raw image larger than sidecar shape");
    return img;
}

// Vector field as raw f64, row-major, component-interleaved (dr, dc).
inline void write_field_raw(const VectorField& tau, const std::string& path) {
    auto f = detail::open_out(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(tau.data().data()),
            static_cast<std::streamsize>(tau.data().size() * sizeof(double)));
    detail::check(static_cast<bool>(f), path, "write failed");
    json sidecar;
    sidecar["width"] = tau.width();
    sidecar["dtype"] = "f64-le";
    sidecar["order"] = "row-major s,t interleaved (dr,dc)";
    auto s = detail::open_out(path + ".json", std::ios::out);
    s << sidecar.dump(2) << "\n";
}

inline VectorField read_field_raw(const std::string& path) {
    json sidecar;
    {
        auto s = detail::open_in(path + ".json", std::ios::in);
        s >> sidecar;
    }
    VectorField tau(sidecar.at("width").get<int>());
    auto f = detail::open_in(path, std::ios::binary);
    f.read(reinterpret_cast<char*>(tau.data().data()),
           static_cast<std::streamsize>(tau.data().size() * sizeof(double)));
    detail::check(static_cast<bool>(f), path, "truncated raw field");
    f.peek();
    detail::check(f.eof(), path, "raw field larger than sidecar shape");
    return tau;
}

// One row per pixel: s,t,dr,dc — convenient for quiver plots.
inline void write_field_csv(const VectorField& tau, const std::string& path) {
    auto f = detail::open_out(path, std::ios::out);
    f << "s,t,dr,dc\n";
    f.precision(17);
    for (int s = 0; s < tau.width(); ++s)
        for (int t = 0; t < tau.width(); ++t)
            f << s << "," << t << "," << tau.dr(s, t) << "," << tau.dc(s, t) << "\n";
    detail::check(static_cast<bool>(f), path, "write failed");
}

}  // namespace adef::io
