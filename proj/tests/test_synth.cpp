// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hexring/synth.hpp"
#include "test_helpers.hpp"

using namespace hexring;
using namespace hexring::synth;
using hexring::testutil::he706;
using Catch::Approx;

TEST_CASE("ring radii on the detector") {
    const auto rl = testutil::rl();
    const auto rings = lattice::enumerate_rings(rl, 8.0);
    const RingRadiiResult rr = ring_radii(he706(), rings, rl, 0.727);

    REQUIRE(rr.rings.size() == 25);
    CHECK(rr.skipped_non_diffracting == 0);
    // D tan(theta) for rings 1 and 6, frozen from a 30-digit evaluation
    CHECK(rr.rings[0].radius == Approx(1.84398676857031e-3).epsilon(1e-9));
    const auto ratio6 = std::find_if(rr.rings.begin(), rr.rings.end(),
                                     [](const RingRadius& r) { return r.loeschian == 36; });
    REQUIRE(ratio6 != rr.rings.end());
    CHECK(ratio6->radius == Approx(11.0651664656477e-3).epsilon(1e-9));

    SECTION("zero drift collapses all radii") {
        for (const RingRadius& r : ring_radii(he706(), rings, rl, 0.0).rings) CHECK(r.radius == 0.0);
    }

    SECTION("non-diffracting orders are skipped with a count") {
        // at 0.05 eV only ratios below ~3.3 diffract
        const beamline::Beam slow{beamline::Species::helium(), 0.05, 0.0};
        const RingRadiiResult low = ring_radii(slow, rings, rl, 0.727);
        CHECK(low.skipped_non_diffracting > 0);
        CHECK(low.rings.size() + low.skipped_non_diffracting == rings.size());
    }

    SECTION("radii scale as E^(-1/2) in the small-angle regime") {
        const RingRadiiResult quad = ring_radii({beamline::Species::helium(), 4.0 * 706.0, 18.0}, rings, rl, 0.727);
        CHECK(quad.rings[0].radius == Approx(0.5 * rr.rings[0].radius).epsilon(1e-4));
    }
}

TEST_CASE("synthesized pattern structure") {
    const auto rl = testutil::rl();
    const beamline::BeamlineGeometry geom;

    SECTION("no rings, no background: an all-zero image") {
        PatternParams p = testutil::small_frame();
        p.amplitude = 0.0;
        const img::DetectorImage im = synthesize(he706(), lattice::enumerate_rings(rl, 2.0), rl, geom, p);
        for (float v : im.data) CHECK(v == 0.0f);
    }

    SECTION("single annulus is azimuthally uniform with the crest on the ring circle") {
        PatternParams p = testutil::small_frame();
        p.amplitude = 5000.0;
        const auto rings = lattice::enumerate_rings(rl, 1.0);
        const img::DetectorImage im = synthesize(he706(), rings, rl, geom, p);

        const double r_px = ring_radii(he706(), rings, rl, geom.detector_distance).rings[0].radius / p.pixel_pitch;

        // pixel values depend on radius alone: dihedral mirror pixels share an
        // exact radius, so they must agree to rounding
        int compared = 0;
        for (int y = 0; y < im.height; ++y)
            for (int x = 320; x < im.width; ++x) {
                const double rho = std::hypot(x - 320.0, y - 320.0);
                if (std::abs(rho - r_px) > 1.5) continue;
                const float v = im.at(x, y);
                CHECK(im.at(640 - x, y) == Approx(v).epsilon(1e-6));
                CHECK(im.at(x, 640 - y) == Approx(v).epsilon(1e-6));
                ++compared;
            }
        CHECK(compared > 200);

        // interpolated samples along the crest circle stay uniform to the
        // bilinear curvature scale
        double lo = 1e30, hi = -1e30;
        for (int k = 0; k < 720; ++k) {
            const double a = k * std::numbers::pi / 360.0;
            const double v = im.sample(320.0 + r_px * std::cos(a), 320.0 + r_px * std::sin(a));
            lo = std::min(lo, double(v));
            hi = std::max(hi, double(v));
        }
        CHECK((hi - lo) / (p.amplitude * 6.0) < 0.03);

        // radial crest within half a pixel of the predicted radius
        double best_r = 0.0, best_v = -1.0;
        for (double r = r_px - 6.0; r <= r_px + 6.0; r += 0.05) {
            const double v = im.sample(320.0 + r, 320.0);
            if (v > best_v) {
                best_v = v;
                best_r = r;
            }
        }
        CHECK(std::abs(best_r - r_px) < 0.5);
    }

    SECTION("order damping drops crest heights strictly with |G|") {
        PatternParams p = testutil::small_frame();
        p.damping_alpha = 0.8 / (rl.magnitude * rl.magnitude);
        const auto rings = lattice::enumerate_rings(rl, 2.2);  // ratios 1, sqrt3, 2
        const auto rr = ring_radii(he706(), rings, rl, geom.detector_distance);
        const img::DetectorImage im = synthesize(he706(), rings, rl, geom, p);
        double prev = 1e30;
        for (const RingRadius& r : rr.rings) {
            const double crest = im.sample(320.0 + r.radius / p.pixel_pitch, 320.0);
            CHECK(crest < prev);
            prev = crest;
        }
    }

    SECTION("beam block pixels are zeroed and masked") {
        PatternParams p = testutil::small_frame();
        p.background_floor = 50.0;
        p.beam_block = {{0.0, 0.5e-3}, {2e-3, -10e-3}, {-2e-3, -10e-3}};
        const img::DetectorImage im =
            synthesize(he706(), lattice::enumerate_rings(rl, 1.0), rl, geom, p);
        CHECK(im.excluded(320, 320));
        CHECK(im.at(320, 320) == 0.0f);
        CHECK_FALSE(im.excluded(600, 320));
        CHECK(im.at(600, 320) > 0.0f);
    }

    SECTION("particle signal stops at the active detector edge") {
        PatternParams p;  // full frame, default floor and halo
        p.width = 2048;
        p.height = 2048;
        p.beam_block.clear();
        p.background_level = 100.0;
        p.background_sigma = 0.06;
        p.background_floor = 7.0;
        p.amplitude = 0.0;
        p.central_amplitude = 0.0;
        const img::DetectorImage im = synthesize(he706(), lattice::enumerate_rings(rl, 1.0), rl, geom, p);
        const double edge_px = 0.5 * geom.detector_diameter / p.pixel_pitch;
        const float inside = im.sample(1024.0 + edge_px - 3.0, 1024.0);
        const float outside = im.sample(1024.0 + edge_px + 3.0, 1024.0);
        CHECK(outside == Approx(7.0).margin(0.2));  // stray-light floor only
        CHECK(inside > outside + 20.0);
    }

    SECTION("noise with a fixed seed is byte-identical; different seeds differ") {
        PatternParams p = testutil::small_frame();
        p.background_floor = 40.0;
        p.poisson_noise = true;
        p.noise_seed = 99;
        const auto rings = lattice::enumerate_rings(rl, 1.0);
        const std::string a = img::pgm16_bytes(synthesize(he706(), rings, rl, geom, p));
        const std::string b = img::pgm16_bytes(synthesize(he706(), rings, rl, geom, p));
        CHECK(a == b);
        p.noise_seed = 100;
        CHECK(img::pgm16_bytes(synthesize(he706(), rings, rl, geom, p)) != a);
    }
}

TEST_CASE("forward radial distortion") {
    const auto rl = testutil::rl();
    const beamline::BeamlineGeometry geom;
    PatternParams p = testutil::small_frame();
    const auto rings = lattice::enumerate_rings(rl, 2.0);
    const img::DetectorImage im = synthesize(he706(), rings, rl, geom, p);

    SECTION("zero coefficients return the image bit-exactly") {
        const img::DetectorImage same = apply_distortion(im, 0.0, 0.0);
        CHECK(same.data == im.data);
        CHECK(same.mask == im.mask);
    }

    SECTION("positive quadratic term pushes rings outward, more so further out") {
        const double c2 = 4000.0;  // 1/m^2: about 0.6 px at the first ring
        const img::DetectorImage dist = apply_distortion(im, 0.0, c2);
        const auto rr = ring_radii(he706(), rings, rl, geom.detector_distance);
        double prev_shift = 0.0;
        for (const RingRadius& r : rr.rings) {
            const double r_px = r.radius / p.pixel_pitch;
            auto crest = [&](const img::DetectorImage& image) {
                double best_r = 0.0, best_v = -1.0;
                for (double q = r_px - 8.0; q <= r_px + 8.0; q += 0.02) {
                    const double v = image.sample(320.0 + q, 320.0);
                    if (v > best_v) {
                        best_v = v;
                        best_r = q;
                    }
                }
                return best_r;
            };
            const double shift = crest(dist) - crest(im);
            CHECK(shift > prev_shift);
            prev_shift = shift;
        }
    }

    SECTION("non-monotone maps are rejected") {
        CHECK_THROWS_AS(apply_distortion(im, -40.0, 0.0), NumericalError);
    }
}
