// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hexring/beamline.hpp"
#include "hexring/constants.hpp"
#include "hexring/errors.hpp"
#include "hexring/geom.hpp"
#include "hexring/image.hpp"
#include "hexring/lattice.hpp"
#include "hexring/radial_map.hpp"
#include "hexring/rng.hpp"

// Synthetic Debye-Scherrer detector images: azimuthally uniform Gaussian
// annuli at the diffraction radii, a Debye-Waller-like exp(-alpha |G|^2)
// order damping, a broad halo plus flat floor background, a residual central
// beam spot, a triangular beam-block shadow, and optional Poisson noise.
namespace hexring::synth {

struct RingRadius {
    std::int64_t loeschian = 0;
    double ratio = 0.0;
    int multiplicity = 0;
    double theta = 0.0;   // rad
    double radius = 0.0;  // m on the detector
};

struct RingRadiiResult {
    std::vector<RingRadius> rings;
    int skipped_non_diffracting = 0;
};

inline RingRadiiResult ring_radii(const beamline::Beam& beam, const lattice::RingSystem& rings,
                                  const lattice::ReciprocalLattice& rl, double detector_distance) {
    if (detector_distance < 0.0) throw ConfigError("detector distance must be non-negative");
    RingRadiiResult out;
    const double k = beamline::wavevector(beam);
    for (const lattice::Ring& ring : rings.rings) {
        const double sin_theta = ring.magnitude_ratio * rl.magnitude / k;
        if (sin_theta >= 1.0) {
            ++out.skipped_non_diffracting;
            continue;
        }
        const double theta = std::asin(sin_theta);
        out.rings.push_back({ring.loeschian, ring.magnitude_ratio, ring.multiplicity, theta,
                             detector_distance * std::tan(theta)});
    }
    return out;
}

struct PatternParams {
    int width = 2048;
    int height = 2048;
    double pixel_pitch = 40e-6;     // m/px; default covers the 75 mm detector with margin
    Vec2 center_px{1024.0, 1024.0};

    double ring_width_sigma = 0.0;  // rad; <= 0 derives collimation/2.3548
    double damping_alpha = 0.0;     // m^2, exponent coefficient on |G|^2
    double amplitude = 3000.0;      // counts at an undamped multiplicity-1 ring crest

    double background_level = 30.0;   // halo amplitude, counts
    double background_sigma = 0.02;   // halo angular sigma, rad
    double background_floor = 20.0;   // counts
    double central_amplitude = 800.0; // residual undiffracted spot, counts

    std::vector<Vec2> beam_block;   // polygon, m in detector coordinates; empty = none
    bool poisson_noise = false;
    std::uint64_t noise_seed = 0;

    // Thorn shadow reaching from below the frame past the pattern centre.
    static std::vector<Vec2> default_beam_block() {
        return {{0.0, 1.5e-3}, {4.5e-3, -41e-3}, {-4.5e-3, -41e-3}};
    }
};

inline img::DetectorImage synthesize(const beamline::Beam& beam, const lattice::RingSystem& rings,
                                     const lattice::ReciprocalLattice& rl, const beamline::BeamlineGeometry& geom,
                                     const PatternParams& params) {
    geom.validate();
    const double sigma_theta = params.ring_width_sigma > 0.0
                                   ? params.ring_width_sigma
                                   : beamline::coherence_budget(beam, geom).collimation / constants::fwhm_over_sigma;
    if (!(sigma_theta > 0.0)) throw ConfigError("ring width sigma must be positive");
    if (params.damping_alpha < 0.0) throw ConfigError("damping alpha must be non-negative");

    const double d = geom.detector_distance;
    const double sigma_r = d * sigma_theta;
    const double sigma_bg = d * std::tan(params.background_sigma);

    img::DetectorImage im = img::DetectorImage::blank(params.width, params.height, params.pixel_pitch);
    im.origin = {-params.center_px.x * params.pixel_pitch, -params.center_px.y * params.pixel_pitch};

    const RingRadiiResult rr = ring_radii(beam, rings, rl, d);
    struct Annulus {
        double radius, amplitude;
    };
    std::vector<Annulus> annuli;
    annuli.reserve(rr.rings.size());
    for (const RingRadius& r : rr.rings) {
        const double g = r.ratio * rl.magnitude;
        annuli.push_back({r.radius, params.amplitude * r.multiplicity * std::exp(-params.damping_alpha * g * g)});
    }

    // radial intensity lookup, sampled at quarter-pixel steps; particle
    // signal (rings, halo, central spot) exists only on the active detector
    // area, the flat floor models camera-wide stray light
    const double corner_x = std::max(params.center_px.x, params.width - params.center_px.x) * params.pixel_pitch;
    const double corner_y = std::max(params.center_px.y, params.height - params.center_px.y) * params.pixel_pitch;
    const double rho_max = std::hypot(corner_x, corner_y) + 4.0 * sigma_r;
    const double active_radius = 0.5 * geom.detector_diameter;
    const double step = params.pixel_pitch / 4.0;
    const auto n_samples = static_cast<std::size_t>(rho_max / step) + 2;
    std::vector<double> lut(n_samples, 0.0);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double rho = static_cast<double>(i) * step;
        double v = params.background_floor;
        if (rho <= active_radius) {
            if (params.background_level > 0.0 && sigma_bg > 0.0)
                v += params.background_level * std::exp(-rho * rho / (2.0 * sigma_bg * sigma_bg));
            if (params.central_amplitude > 0.0)
                v += params.central_amplitude * std::exp(-rho * rho / (2.0 * sigma_r * sigma_r));
            for (const Annulus& an : annuli) {
                const double u = (rho - an.radius) / sigma_r;
                if (std::abs(u) < 8.0) v += an.amplitude * std::exp(-0.5 * u * u);
            }
        }
        lut[i] = v;
    }

    for (int y = 0; y < im.height; ++y) {
        for (int x = 0; x < im.width; ++x) {
            const Vec2 p = im.physical(x, y);
            const double rho = p.norm();
            const double s = rho / step;
            const auto i0 = static_cast<std::size_t>(s);
            const double f = s - static_cast<double>(i0);
            const double v = i0 + 1 < n_samples ? lut[i0] * (1.0 - f) + lut[i0 + 1] * f : lut.back();
            im.at(x, y) = static_cast<float>(v);
        }
    }

    if (params.beam_block.size() >= 3) {
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x)
                if (point_in_polygon(im.physical(x, y), params.beam_block)) {
                    im.at(x, y) = 0.0f;
                    im.mask[im.index(x, y)] = 1;
                }
    }

    if (params.poisson_noise) {
        for (int y = 0; y < im.height; ++y) {
            rng::Stream stream = rng::Stream::substream(params.noise_seed, static_cast<std::uint64_t>(y));
            for (int x = 0; x < im.width; ++x) {
                float& v = im.at(x, y);
                v = static_cast<float>(stream.next_poisson(v));
            }
        }
    }

    for (float& v : im.data) v = std::clamp(v, 0.0f, 65535.0f);
    return im;
}

// Forward distortion: imprints m(r) = r (1 + c1 r + c2 r^2) on the image, so
// a ring at true radius r lands at m(r). Pulling each output pixel from the
// numerically inverted map keeps the resample interpolation-clean.
inline img::DetectorImage apply_distortion(const img::DetectorImage& im, double c1, double c2) {
    const distortion::RadialPolynomial poly{c1, c2};
    if (poly.identity()) return im;
    poly.require_monotone(distortion::max_radius(im));
    const double tol = 1e-3 * im.pixel_pitch;
    return distortion::radial_resample(im, [&](double rho) { return poly.invert(rho, tol); });
}

}  // namespace hexring::synth
