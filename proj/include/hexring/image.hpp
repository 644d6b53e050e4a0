// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hexring/errors.hpp"
#include "hexring/geom.hpp"

// Detector images and their on-disk formats: binary 16-bit PGM (P5, maxval
// 65535, big-endian samples) for data, 8-bit PGM for exclusion masks, and raw
// little-endian 16-bit with a JSON header sidecar as an import path.
namespace hexring::img {

struct DetectorImage {
    int width = 0;
    int height = 0;
    double pixel_pitch = 40e-6;        // m per pixel
    Vec2 origin{0.0, 0.0};             // physical position of pixel (0,0) centre
    std::vector<float> data;           // row-major intensities, 16-bit range
    std::vector<std::uint8_t> mask;    // nonzero = excluded from analysis

    static DetectorImage blank(int width, int height, double pixel_pitch) {
        if (width <= 0 || height <= 0 || !(pixel_pitch > 0))
            throw ConfigError("detector image needs positive dimensions and pixel pitch");
        DetectorImage im;
        im.width = width;
        im.height = height;
        im.pixel_pitch = pixel_pitch;
        im.data.assign(static_cast<std::size_t>(width) * height, 0.0f);
        im.mask.assign(static_cast<std::size_t>(width) * height, 0);
        return im;
    }

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    float& at(int x, int y) { return data[index(x, y)]; }
    float at(int x, int y) const { return data[index(x, y)]; }
    bool excluded(int x, int y) const { return mask[index(x, y)] != 0; }
    bool same_shape(const DetectorImage& o) const { return width == o.width && height == o.height; }

    Vec2 physical(double px, double py) const {
        return {origin.x + px * pixel_pitch, origin.y + py * pixel_pitch};
    }

    // Bilinear sample at fractional pixel coordinates; outside -> 0.
    float sample(double px, double py) const {
        if (px < 0.0 || py < 0.0 || px > width - 1.0 || py > height - 1.0) return 0.0f;
        const int x0 = std::min(static_cast<int>(px), width - 2 >= 0 ? width - 2 : 0);
        const int y0 = std::min(static_cast<int>(py), height - 2 >= 0 ? height - 2 : 0);
        const double fx = px - x0;
        const double fy = py - y0;
        const double v00 = at(x0, y0), v10 = at(x0 + 1, y0), v01 = at(x0, y0 + 1), v11 = at(x0 + 1, y0 + 1);
        return static_cast<float>((1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 +
                                  fx * fy * v11);
    }

    bool mask_nearest(double px, double py) const {
        const int x = static_cast<int>(std::lround(px));
        const int y = static_cast<int>(std::lround(py));
        if (x < 0 || y < 0 || x >= width || y >= height) return true;
        return excluded(x, y);
    }

    // Excluded if any pixel entering a bilinear sample at (px, py) is
    // excluded; keeps mask-boundary blends out of downstream statistics.
    bool mask_bilinear(double px, double py) const {
        if (px < 0.0 || py < 0.0 || px > width - 1.0 || py > height - 1.0) return true;
        const int x0 = std::min(static_cast<int>(px), width - 2 >= 0 ? width - 2 : 0);
        const int y0 = std::min(static_cast<int>(py), height - 2 >= 0 ? height - 2 : 0);
        return excluded(x0, y0) || excluded(x0 + 1, y0) || excluded(x0, y0 + 1) || excluded(x0 + 1, y0 + 1);
    }
};

inline std::string pgm16_bytes(const DetectorImage& im) {
    std::string out = "P5\n" + std::to_string(im.width) + " " + std::to_string(im.height) + "\n65535\n";
    out.reserve(out.size() + im.data.size() * 2);
    for (float v : im.data) {
        const auto s = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0l, 65535l));
        out.push_back(static_cast<char>(s >> 8));
        out.push_back(static_cast<char>(s & 0xff));
    }
    return out;
}

inline std::string mask_pgm_bytes(const DetectorImage& im) {
    std::string out = "P5\n" + std::to_string(im.width) + " " + std::to_string(im.height) + "\n255\n";
    out.reserve(out.size() + im.mask.size());
    for (std::uint8_t m : im.mask) out.push_back(static_cast<char>(m ? 255 : 0));
    return out;
}

namespace detail {

inline void skip_pgm_space(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

}  // namespace detail

// Reads both 16-bit data PGMs and 8-bit mask PGMs (maxval decides).
inline DetectorImage read_pgm(const std::string& path, double pixel_pitch = 40e-6) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open image '" + path + "'");
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ConfigError("'" + path + "' is not a binary PGM (P5)");
    detail::skip_pgm_space(in);
    int w = 0, h = 0;
    long maxval = 0;
    in >> w;
    detail::skip_pgm_space(in);
    in >> h;
    detail::skip_pgm_space(in);
    in >> maxval;
    in.get();  // single whitespace after maxval
    if (w <= 0 || h <= 0 || (maxval != 255 && maxval != 65535))
        throw ConfigError("unsupported PGM header in '" + path + "'");
    DetectorImage im = DetectorImage::blank(w, h, pixel_pitch);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (maxval == 65535) {
        std::vector<std::uint8_t> buf(n * 2);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw ConfigError("short read in '" + path + "'");
        for (std::size_t i = 0; i < n; ++i)
            im.data[i] = static_cast<float>((buf[2 * i] << 8) | buf[2 * i + 1]);
    } else {
        std::vector<std::uint8_t> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw ConfigError("short read in '" + path + "'");
        for (std::size_t i = 0; i < n; ++i) im.data[i] = buf[i];
    }
    return im;
}

inline void load_mask_pgm(DetectorImage& im, const std::string& path) {
    const DetectorImage m = read_pgm(path, im.pixel_pitch);
    if (!im.same_shape(m)) throw ConfigError("mask '" + path + "' does not match the image shape");
    for (std::size_t i = 0; i < im.mask.size(); ++i) im.mask[i] = m.data[i] > 0.0f ? 1 : 0;
}

// Raw import: <path> is little-endian uint16, <path stem>.json must carry
// {"width": W, "height": H, "pixel_pitch_um": P}. Parsed by the caller (cli)
// which owns the JSON dependency; this overload takes the decoded header.
inline DetectorImage read_raw16(const std::string& path, int width, int height, double pixel_pitch_um) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open raw image '" + path + "'");
    DetectorImage im = DetectorImage::blank(width, height, pixel_pitch_um * 1e-6);
    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<std::uint8_t> buf(n * 2);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw ConfigError("short read in '" + path + "'");
    for (std::size_t i = 0; i < n; ++i) im.data[i] = static_cast<float>(buf[2 * i] | (buf[2 * i + 1] << 8));
    return im;
}

}  // namespace hexring::img
