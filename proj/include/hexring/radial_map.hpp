// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>

#include "hexring/errors.hpp"
#include "hexring/image.hpp"

// Radial objective distortion model shared by the forward (synth) and
// correcting (imgproc) resamplers. The polynomial acts on the true radius:
// a feature at true radius r is recorded at measured radius
//   m(r) = r (1 + c1 r + c2 r^2),
// so positive coefficients push features outward. Radii are physical (m),
// measured from the image's geometric centre.
namespace hexring::distortion {

struct RadialPolynomial {
    double c1 = 0.0;  // 1/m
    double c2 = 0.0;  // 1/m^2

    double forward(double r) const { return r * (1.0 + c1 * r + c2 * r * r); }
    double derivative(double r) const { return 1.0 + 2.0 * c1 * r + 3.0 * c2 * r * r; }
    bool identity() const { return c1 == 0.0 && c2 == 0.0; }

    void require_monotone(double r_max) const {
        // derivative is quadratic in r; check endpoints and interior vertex
        double lo = std::min(derivative(0.0), derivative(r_max));
        if (c2 != 0.0) {
            const double r_v = -c1 / (3.0 * c2);
            if (r_v > 0.0 && r_v < r_max) lo = std::min(lo, derivative(r_v));
        }
        if (!(lo > 0.0)) throw NumericalError("radial distortion map is not monotone over the detector");
    }

    // Solve m(r) = measured for r; Newton with bisection fallback.
    double invert(double measured, double tol) const {
        if (measured <= 0.0) return 0.0;
        double r = measured;
        for (int i = 0; i < 40; ++i) {
            const double f = forward(r) - measured;
            if (std::abs(f) < tol) return r;
            const double d = derivative(r);
            if (!(d > 0.0)) break;
            const double step = f / d;
            r -= step;
            if (r < 0.0) r = 0.5 * (r + step);  // fall back toward the origin side
        }
        // bisection on a bracket around the measured radius
        double lo = 0.0, hi = measured;
        while (forward(hi) < measured) hi *= 2.0;
        for (int i = 0; i < 200 && hi - lo > tol; ++i) {
            const double mid = 0.5 * (lo + hi);
            (forward(mid) < measured ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
};

// Resample so that the output pixel at radius rho takes the input sample at
// radius source_radius(rho), same azimuth. The mask travels by nearest
// neighbour; samples pulled from outside the frame come back excluded.
template <typename SourceRadiusFn>
img::DetectorImage radial_resample(const img::DetectorImage& im, SourceRadiusFn source_radius) {
    img::DetectorImage out = im;
    const double cx = 0.5 * im.width;
    const double cy = 0.5 * im.height;
    for (int y = 0; y < im.height; ++y) {
        for (int x = 0; x < im.width; ++x) {
            const double dx = (x - cx) * im.pixel_pitch;
            const double dy = (y - cy) * im.pixel_pitch;
            const double rho = std::hypot(dx, dy);
            const std::size_t i = im.index(x, y);
            if (rho == 0.0) {
                out.data[i] = im.data[i];
                out.mask[i] = im.mask[i];
                continue;
            }
            const double rs = source_radius(rho);
            const double scale = rs / rho;
            const double sx = cx + dx * scale / im.pixel_pitch;
            const double sy = cy + dy * scale / im.pixel_pitch;
            if (sx < 0.0 || sy < 0.0 || sx > im.width - 1.0 || sy > im.height - 1.0) {
                out.data[i] = 0.0f;
                out.mask[i] = 1;
                continue;
            }
            out.data[i] = im.sample(sx, sy);
            out.mask[i] = im.mask_bilinear(sx, sy) ? 1 : 0;
        }
    }
    return out;
}

inline double max_radius(const img::DetectorImage& im) {
    const double cx = 0.5 * im.width * im.pixel_pitch;
    const double cy = 0.5 * im.height * im.pixel_pitch;
    return std::hypot(cx, cy);
}

}  // namespace hexring::distortion
