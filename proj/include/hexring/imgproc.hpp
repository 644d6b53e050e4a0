// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hexring/beamline.hpp"
#include "hexring/constants.hpp"
#include "hexring/errors.hpp"
#include "hexring/image.hpp"
#include "hexring/lattice.hpp"
#include "hexring/radial_map.hpp"

// Detector-image reduction: corrections, frame averaging, pattern-centre
// fitting, azimuthal averaging, peak detection and ring indexing.
namespace hexring::imgproc {

// ---------------------------------------------------------------------------
// pixel-level corrections

inline img::DetectorImage dark_correct(const img::DetectorImage& im, const img::DetectorImage& dark) {
    if (!im.same_shape(dark)) throw ConfigError("dark frame shape does not match the image");
    img::DetectorImage out = im;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::max(0.0f, im.data[i] - dark.data[i]);
    for (std::size_t i = 0; i < out.mask.size(); ++i) out.mask[i] = im.mask[i] || dark.mask[i] ? 1 : 0;
    return out;
}

struct RegionRect {
    int x = 0, y = 0, width = 0, height = 0;
    bool empty() const { return width <= 0 || height <= 0; }
};

// Scale the whole frame so the mean over a reference region hits the target.
inline img::DetectorImage rescale(const img::DetectorImage& im, const RegionRect& region, double target = 1000.0) {
    if (region.empty()) throw ConfigError("rescale region is empty");
    if (region.x < 0 || region.y < 0 || region.x + region.width > im.width || region.y + region.height > im.height)
        throw ConfigError("rescale region lies outside the image");
    double sum = 0.0;
    for (int y = region.y; y < region.y + region.height; ++y)
        for (int x = region.x; x < region.x + region.width; ++x) sum += im.at(x, y);
    const double mean = sum / (static_cast<double>(region.width) * region.height);
    if (!(mean > 0.0)) throw NumericalError("rescale region has non-positive mean");
    img::DetectorImage out = im;
    const auto scale = static_cast<float>(target / mean);
    for (float& v : out.data) v *= scale;
    return out;
}

inline img::DetectorImage average_series(const std::vector<img::DetectorImage>& frames) {
    if (frames.empty()) throw InsufficientDataError("no frames to average");
    img::DetectorImage out = frames.front();
    for (std::size_t f = 1; f < frames.size(); ++f) {
        const img::DetectorImage& im = frames[f];
        if (!out.same_shape(im)) throw ConfigError("frame shapes differ in the series");
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += im.data[i];
        for (std::size_t i = 0; i < out.mask.size(); ++i) out.mask[i] = out.mask[i] || im.mask[i] ? 1 : 0;
    }
    const auto inv = static_cast<float>(1.0 / static_cast<double>(frames.size()));
    for (float& v : out.data) v *= inv;
    return out;
}

// Inverse of the objective distortion m(r) = r (1 + c1 r + c2 r^2): each
// output pixel at true radius r pulls the measured sample from m(r).
inline img::DetectorImage undistort(const img::DetectorImage& im, double c1, double c2) {
    const distortion::RadialPolynomial poly{c1, c2};
    if (poly.identity()) return im;
    poly.require_monotone(distortion::max_radius(im));
    return distortion::radial_resample(im, [&](double rho) { return poly.forward(rho); });
}

// ---------------------------------------------------------------------------
// pattern centre fit

struct FittedRing {
    double radius_px = 0.0;
    double width_px = 0.0;
    double amplitude = 0.0;
};

struct CenterFit {
    double cx = 0.0;  // px
    double cy = 0.0;  // px
    std::vector<FittedRing> rings;
    double background = 0.0;
    double residual_rms = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct CenterFitOptions {
    int n_inner_rings = 3;
    int pixel_stride = 2;
    int max_iterations = 200;
    double step_tolerance = 1e-6;
    int coarse_halfspan_px = 24;   // span of the sharpness pre-search; 0 disables
    double min_radius_px = 16.0;   // keeps the central-beam residue out of the fit
    double min_ring_separation_px = 8.0;
};

namespace detail {

// Solve (A + lambda diag(A)) x = -g for a small SPD system, Cholesky.
inline bool solve_damped(std::vector<double> a, std::vector<double> g, double lambda, std::size_t n,
                         std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] *= 1.0 + lambda;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (s <= 0.0) return false;
                a[i * n + i] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    x.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = -g[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * x[k];
        x[i] = s / a[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * x[k];
        x[ii] = s / a[ii * n + ii];
    }
    return true;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid) - 1, v.end());
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

// Mean intensity per 1-px radius bin around a candidate centre.
inline std::vector<double> pixel_radius_profile(const img::DetectorImage& im, double cx, double cy, int stride = 2) {
    const int n_bins = std::min(im.width, im.height) / 2;
    std::vector<double> sum(static_cast<std::size_t>(n_bins), 0.0);
    std::vector<int> cnt(static_cast<std::size_t>(n_bins), 0);
    for (int y = 0; y < im.height; y += stride)
        for (int x = 0; x < im.width; x += stride) {
            if (im.excluded(x, y)) continue;
            const int b = static_cast<int>(std::hypot(x - cx, y - cy));
            if (b >= n_bins) continue;
            sum[static_cast<std::size_t>(b)] += im.at(x, y);
            ++cnt[static_cast<std::size_t>(b)];
        }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = cnt[i] > 0 ? sum[i] / cnt[i] : 0.0;
    return sum;
}

// Annular sharpness, sum of squared radial-profile values: any centre error
// smears the rings, lowering the crests, so the true centre maximises it.
inline double ring_sharpness(const img::DetectorImage& im, double cx, double cy, double r_min, int stride) {
    const std::vector<double> prof = pixel_radius_profile(im, cx, cy, stride);
    double s = 0.0;
    for (std::size_t i = static_cast<std::size_t>(std::max(0.0, r_min)); i < prof.size(); ++i) s += prof[i] * prof[i];
    return s;
}

struct RingModel {
    // p = [cx, cy, B, (A, r, w) * n]
    static double eval(const std::vector<double>& p, double x, double y) {
        const double rho = std::hypot(x - p[0], y - p[1]);
        double v = p[2];
        for (std::size_t j = 3; j + 3 <= p.size(); j += 3) {
            const double u = (rho - p[j + 1]) / p[j + 2];
            v += p[j] * std::exp(-0.5 * u * u);
        }
        return v;
    }

    static bool valid(const std::vector<double>& p) {
        for (std::size_t j = 3; j + 3 <= p.size(); j += 3)
            if (!(p[j] >= 0.0 && p[j + 1] > 0.0 && p[j + 2] > 0.3)) return false;
        return true;
    }
};

}  // namespace detail

// Damped Gauss-Newton fit of n Gaussian annuli (uniform in azimuth) plus a
// flat background; the centre is shared by all rings. Non-convergence is
// reported through the flag, with best-so-far parameters.
inline CenterFit fit_center(const img::DetectorImage& im, int n_inner_rings = 3, const CenterFitOptions& opts = {}) {
    if (n_inner_rings < 1) throw ConfigError("centre fit needs at least one ring");

    // intensity centroid as the seed
    double wsum = 0.0, cx = 0.0, cy = 0.0;
    for (int y = 0; y < im.height; y += 2)
        for (int x = 0; x < im.width; x += 2) {
            if (im.excluded(x, y)) continue;
            const double v = im.at(x, y);
            wsum += v;
            cx += v * x;
            cy += v * y;
        }
    if (!(wsum > 0.0)) throw InsufficientDataError("image has no unmasked intensity");
    cx /= wsum;
    cy /= wsum;

    // the centroid can sit several pixels off (beam block, halo gradients);
    // refine it on the ring-sharpness metric before trusting any radii
    if (opts.coarse_halfspan_px > 0) {
        const double cx0 = cx, cy0 = cy;
        double best = -1.0;
        for (int step : {4, 1}) {
            const int span = step == 4 ? opts.coarse_halfspan_px : 4;
            const double bx = cx, by = cy;
            for (int dy = -span; dy <= span; dy += step)
                for (int dx = -span; dx <= span; dx += step) {
                    const double tx = bx + dx, ty = by + dy;
                    if (std::abs(tx - cx0) > opts.coarse_halfspan_px + 4 ||
                        std::abs(ty - cy0) > opts.coarse_halfspan_px + 4)
                        continue;
                    const double s = detail::ring_sharpness(im, tx, ty, opts.min_radius_px, 6);
                    if (s > best) {
                        best = s;
                        cx = tx;
                        cy = ty;
                    }
                }
        }
    }

    // seed radii from the radial profile: strongest residuals over a sliding
    // median background, innermost first
    const std::vector<double> prof = detail::pixel_radius_profile(im, cx, cy);
    const int nb = static_cast<int>(prof.size());
    std::vector<double> resid(prof.size(), 0.0);
    const int w_med = 31;
    for (int i = 0; i < nb; ++i) {
        const int lo = std::max(0, i - w_med / 2);
        const int hi = std::min(nb, i + w_med / 2 + 1);
        resid[static_cast<std::size_t>(i)] =
            prof[static_cast<std::size_t>(i)] -
            detail::median_of({prof.begin() + lo, prof.begin() + hi});
    }
    struct Cand {
        int bin;
        double score;
    };
    std::vector<Cand> cands;
    double score_max = 0.0;
    for (double r : resid) score_max = std::max(score_max, r);
    for (int i = std::max(2, static_cast<int>(opts.min_radius_px)); i + 1 < nb; ++i)
        if (resid[static_cast<std::size_t>(i)] > resid[static_cast<std::size_t>(i - 1)] &&
            resid[static_cast<std::size_t>(i)] >= resid[static_cast<std::size_t>(i + 1)] &&
            resid[static_cast<std::size_t>(i)] > 0.02 * score_max)
            cands.push_back({i, resid[static_cast<std::size_t>(i)]});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.score > b.score; });
    if (cands.size() > static_cast<std::size_t>(4 * n_inner_rings))
        cands.resize(static_cast<std::size_t>(4 * n_inner_rings));
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.bin < b.bin; });
    // greedy innermost-first selection with a minimum separation
    std::vector<Cand> picked;
    for (const Cand& c : cands) {
        if (!picked.empty() && c.bin - picked.back().bin < opts.min_ring_separation_px) continue;
        picked.push_back(c);
        if (picked.size() == static_cast<std::size_t>(n_inner_rings)) break;
    }
    cands = picked;
    if (cands.empty()) throw InsufficientDataError("no ring candidates in the radial profile");
    const int n_rings = std::min<int>(n_inner_rings, static_cast<int>(cands.size()));

    std::vector<double> p;
    p.push_back(cx);
    p.push_back(cy);
    p.push_back(detail::median_of(prof));
    for (int r = 0; r < n_rings; ++r) {
        const int bin = cands[static_cast<std::size_t>(r)].bin;
        // crude width: half-max span of the residual around the candidate
        const double half = 0.5 * resid[static_cast<std::size_t>(bin)];
        int lo = bin, hi = bin;
        while (lo > 0 && resid[static_cast<std::size_t>(lo)] > half) --lo;
        while (hi + 1 < nb && resid[static_cast<std::size_t>(hi)] > half) ++hi;
        const double sigma = std::max(1.5, (hi - lo) / constants::fwhm_over_sigma);
        p.push_back(std::max(1.0, cands[static_cast<std::size_t>(r)].score));
        p.push_back(static_cast<double>(bin));
        p.push_back(sigma);
    }

    // fixed pixel selection: annulus band around the seed rings
    const double r_lo = std::max(opts.min_radius_px, p[4] - 6.0 * p[5] - 8.0);
    const double r_hi = p[p.size() - 2] + 6.0 * p.back() + 8.0;
    struct Px {
        double x, y, v;
    };
    std::vector<Px> pixels;
    const int stride = std::max(1, opts.pixel_stride);
    for (int y = 0; y < im.height; y += stride)
        for (int x = 0; x < im.width; x += stride) {
            if (im.excluded(x, y)) continue;
            const double rho = std::hypot(x - cx, y - cy);
            if (rho < r_lo || rho > r_hi) continue;
            pixels.push_back({static_cast<double>(x), static_cast<double>(y), im.at(x, y)});
        }
    if (pixels.size() < 16 * p.size()) throw InsufficientDataError("too few pixels in the fit annulus");

    auto ssr_of = [&](const std::vector<double>& q) {
        double s = 0.0;
        for (const Px& px : pixels) {
            const double r = detail::RingModel::eval(q, px.x, px.y) - px.v;
            s += r * r;
        }
        return s;
    };

    const std::size_t np = p.size();
    const std::size_t m = pixels.size();
    std::vector<double> residual(m), jac(m * np);
    CenterFit fit;
    double lambda = 1e-3;
    double ssr = ssr_of(p);
    bool converged = false;
    int iter = 0;
    for (; iter < opts.max_iterations && !converged; ++iter) {
        for (std::size_t i = 0; i < m; ++i)
            residual[i] = detail::RingModel::eval(p, pixels[i].x, pixels[i].y) - pixels[i].v;
        // forward-difference Jacobian
        for (std::size_t j = 0; j < np; ++j) {
            const double dj = std::max(1e-5 * std::abs(p[j]), 1e-4);
            std::vector<double> q = p;
            q[j] += dj;
            for (std::size_t i = 0; i < m; ++i)
                jac[i * np + j] = (detail::RingModel::eval(q, pixels[i].x, pixels[i].y) -
                                   (residual[i] + pixels[i].v)) /
                                  dj;
        }
        std::vector<double> n(np * np, 0.0), g(np, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < np; ++j) {
                g[j] += jac[i * np + j] * residual[i];
                for (std::size_t k = 0; k <= j; ++k) n[j * np + k] += jac[i * np + j] * jac[i * np + k];
            }
        }
        for (std::size_t j = 0; j < np; ++j)
            for (std::size_t k = j + 1; k < np; ++k) n[j * np + k] = n[k * np + j];

        bool accepted = false;
        double last_rel = std::numeric_limits<double>::max();
        for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
            std::vector<double> step;
            if (!detail::solve_damped(n, g, lambda, np, step)) {
                lambda *= 10.0;
                continue;
            }
            double rel = 0.0;
            for (std::size_t j = 0; j < np; ++j)
                rel = std::max(rel, std::abs(step[j]) / (std::abs(p[j]) + 1.0));
            last_rel = rel;
            std::vector<double> q(np);
            for (std::size_t j = 0; j < np; ++j) q[j] = p[j] + step[j];
            const double s = detail::RingModel::valid(q) ? ssr_of(q) : std::numeric_limits<double>::max();
            if (s < ssr) {
                p = q;
                ssr = s;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel < opts.step_tolerance) converged = true;
            } else {
                lambda *= 4.0;
            }
        }
        if (!accepted) {
            // damping exhausted: the available update is below tolerance,
            // which is convergence in all but name; anything larger uphill
            converged = converged || last_rel < 1e-3;
            break;
        }
    }

    fit.cx = p[0];
    fit.cy = p[1];
    fit.background = p[2];
    for (std::size_t j = 3; j + 3 <= p.size(); j += 3)
        fit.rings.push_back({p[j + 1], p[j + 2], p[j]});
    std::sort(fit.rings.begin(), fit.rings.end(),
              [](const FittedRing& a, const FittedRing& b) { return a.radius_px < b.radius_px; });
    fit.residual_rms = std::sqrt(ssr / static_cast<double>(m));
    fit.converged = converged;
    fit.iterations = iter;
    return fit;
}

// ---------------------------------------------------------------------------
// azimuthal reduction

struct TraceBin {
    double angle_mrad = 0.0;
    double momentum_g1 = 0.0;  // theta k / |G1|, small-angle momentum axis
    double intensity = 0.0;
    long n_pixels = 0;
};

struct RadialTrace {
    std::vector<TraceBin> bins;
    double bin_width_mrad = 0.1;
};

struct TraceScale {
    double detector_distance = 0.727;  // m
    double wavevector = 0.0;           // 1/m; 0 leaves the momentum axis at 0
    double g1 = 0.0;                   // 1/m
};

inline RadialTrace azimuthal_average(const img::DetectorImage& im, const Vec2& center_px, const TraceScale& scale,
                                     double bin_width_mrad = 0.1, const std::vector<std::uint8_t>* extra_mask = nullptr) {
    if (!(bin_width_mrad > 0.0)) throw ConfigError("bin width must be positive");
    if (center_px.x < 0 || center_px.y < 0 || center_px.x >= im.width || center_px.y >= im.height)
        throw ConfigError("trace centre lies outside the image");
    if (extra_mask && extra_mask->size() != im.mask.size())
        throw ConfigError("extra mask does not match the image shape");

    const double corner_x = std::max(center_px.x, im.width - 1 - center_px.x) * im.pixel_pitch;
    const double corner_y = std::max(center_px.y, im.height - 1 - center_px.y) * im.pixel_pitch;
    const double theta_max = std::atan(std::hypot(corner_x, corner_y) / scale.detector_distance) * 1e3;
    const auto n_bins = static_cast<std::size_t>(theta_max / bin_width_mrad) + 1;

    std::vector<double> sum(n_bins, 0.0);
    std::vector<long> cnt(n_bins, 0);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            const std::size_t i = im.index(x, y);
            if (im.mask[i] || (extra_mask && (*extra_mask)[i])) continue;
            const double r = std::hypot((x - center_px.x) * im.pixel_pitch, (y - center_px.y) * im.pixel_pitch);
            const double theta_mrad = std::atan(r / scale.detector_distance) * 1e3;
            const auto b = static_cast<std::size_t>(theta_mrad / bin_width_mrad);
            if (b >= n_bins) continue;
            sum[b] += im.data[i];
            ++cnt[b];
        }

    RadialTrace tr;
    tr.bin_width_mrad = bin_width_mrad;
    tr.bins.reserve(n_bins);
    const double mom_per_mrad = scale.g1 > 0.0 ? 1e-3 * scale.wavevector / scale.g1 : 0.0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        TraceBin bin;
        bin.angle_mrad = (static_cast<double>(b) + 0.5) * bin_width_mrad;
        bin.momentum_g1 = bin.angle_mrad * mom_per_mrad;
        bin.n_pixels = cnt[b];
        bin.intensity = cnt[b] > 0 ? sum[b] / static_cast<double>(cnt[b]) : 0.0;
        tr.bins.push_back(bin);
    }
    return tr;
}

inline std::string trace_to_csv(const RadialTrace& tr) {
    std::ostringstream os;
    os << "angle_mrad,momentum_G1,intensity,n_pixels\n";
    os.precision(10);
    for (const TraceBin& b : tr.bins)
        os << b.angle_mrad << ',' << b.momentum_g1 << ',' << b.intensity << ',' << b.n_pixels << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// peak detection

struct PeakOptions {
    double min_prominence = 3.0;      // in units of the local residual scatter
    int smooth_window = 5;            // moving-average bins
    double min_angle_mrad = 0.5;      // reject the central-beam residue
    double max_angle_mrad = 0.0;      // 0 = no cap; callers set the detector edge
    double min_prominence_counts = 2.5;  // absolute floor, counts
    int background_window = 51;       // opening window, bins
};

namespace detail {

inline double quantile_of(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

}  // namespace detail

// Local maxima of the smoothed trace above a morphological-opening background
// (sliding min then max; unlike a median it cannot ride up onto a dense ring
// ladder). The noise scale per bin comes from the counting statistics the
// trace itself carries, sigma = sqrt(background / n_pixels) reduced by the
// smoothing window; a peak must clear min_prominence of those sigmas and the
// absolute floor. Sub-bin position by a quadratic through the three bins
// around the maximum.
inline std::vector<double> detect_peaks(const RadialTrace& trace, const PeakOptions& opts = {}) {
    std::vector<double> ang, val;
    std::vector<long> npx;
    for (const TraceBin& b : trace.bins) {
        if (b.n_pixels <= 0) continue;
        if (opts.max_angle_mrad > 0.0 && b.angle_mrad > opts.max_angle_mrad) continue;
        ang.push_back(b.angle_mrad);
        val.push_back(b.intensity);
        npx.push_back(b.n_pixels);
    }
    const int n = static_cast<int>(val.size());
    if (n < 5) return {};

    const int w = std::max(1, opts.smooth_window) | 1;
    std::vector<double> smooth(val.size());
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - w / 2);
        const int hi = std::min(n, i + w / 2 + 1);
        smooth[static_cast<std::size_t>(i)] =
            std::accumulate(val.begin() + lo, val.begin() + hi, 0.0) / (hi - lo);
    }

    const int wb = std::max(15, opts.background_window) | 1;
    std::vector<double> eroded(val.size()), bg(val.size());
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - wb / 2);
        const int hi = std::min(n, i + wb / 2 + 1);
        eroded[static_cast<std::size_t>(i)] = *std::min_element(smooth.begin() + lo, smooth.begin() + hi);
    }
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - wb / 2);
        const int hi = std::min(n, i + wb / 2 + 1);
        bg[static_cast<std::size_t>(i)] = *std::max_element(eroded.begin() + lo, eroded.begin() + hi);
    }

    std::vector<double> resid(val.size());
    for (int i = 0; i < n; ++i) resid[static_cast<std::size_t>(i)] = smooth[static_cast<std::size_t>(i)] - bg[static_cast<std::size_t>(i)];
    // the opening tracks local noise minima; remove that uniform bias
    const double bias = detail::median_of(resid);
    for (double& r : resid) r -= bias;

    std::vector<double> peaks;
    for (int i = 1; i + 1 < n; ++i) {
        const double d0 = resid[static_cast<std::size_t>(i)];
        if (!(d0 > resid[static_cast<std::size_t>(i - 1)] && d0 >= resid[static_cast<std::size_t>(i + 1)])) continue;
        const double sigma =
            std::sqrt(std::max(bg[static_cast<std::size_t>(i)], 1.0) / static_cast<double>(npx[static_cast<std::size_t>(i)])) /
            std::sqrt(static_cast<double>(w));
        if (d0 < opts.min_prominence * sigma) continue;
        if (d0 < opts.min_prominence_counts) continue;
        if (ang[static_cast<std::size_t>(i)] < opts.min_angle_mrad) continue;
        const double ym = resid[static_cast<std::size_t>(i - 1)];
        const double yp = resid[static_cast<std::size_t>(i + 1)];
        const double denom = ym - 2.0 * d0 + yp;
        double delta = denom != 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
        delta = std::clamp(delta, -0.5, 0.5);
        const double spacing = 0.5 * (ang[static_cast<std::size_t>(i + 1)] - ang[static_cast<std::size_t>(i - 1)]);
        peaks.push_back(ang[static_cast<std::size_t>(i)] + delta * spacing);
    }
    return peaks;
}

// ---------------------------------------------------------------------------
// ring assignment and the one-parameter wavelength fit

struct AssignedPeak {
    double theta_mrad = 0.0;
    double ratio = 0.0;  // sqrt(L)
    std::int64_t loeschian = 0;
    double residual_mrad = 0.0;
};

struct PeakAssignment {
    std::vector<AssignedPeak> peaks;
    double lambda_fm = 0.0;
    double energy_ev = 0.0;
    int n_detected = 0;
    int n_matched = 0;
};

// Match peaks to the nearest predicted ring angle within the tolerance, then
// least-squares fit the wavelength through sin(theta_i) = ratio_i |G1| lambda / 2pi.
// max_ratio bounds the candidate ring ladder; orders get arbitrarily dense
// beyond it, so an unbounded ladder would "match" anything.
inline PeakAssignment assign_rings(const std::vector<double>& peaks_mrad, const beamline::Beam& beam,
                                   const lattice::ReciprocalLattice& rl, double tolerance_mrad = 0.2,
                                   double max_ratio = 8.0) {
    PeakAssignment out;
    out.n_detected = static_cast<int>(peaks_mrad.size());
    const double k = beamline::wavevector(beam);
    const double ratio_max = std::min(max_ratio, 0.999 * k / rl.magnitude);
    const lattice::RingSystem rings = lattice::enumerate_rings(rl, std::max(1.0, ratio_max));

    for (double theta_mrad : peaks_mrad) {
        double best = std::numeric_limits<double>::max();
        const lattice::Ring* match = nullptr;
        for (const lattice::Ring& ring : rings.rings) {
            const double pred = std::asin(ring.magnitude_ratio * rl.magnitude / k) * 1e3;
            const double d = std::abs(pred - theta_mrad);
            if (d < best) {
                best = d;
                match = &ring;
            }
        }
        if (match && best <= tolerance_mrad)
            out.peaks.push_back({theta_mrad, match->magnitude_ratio, match->loeschian, 0.0});
    }
    out.n_matched = static_cast<int>(out.peaks.size());
    if (out.n_matched < 2) throw InsufficientDataError("insufficient peaks: need at least two matched rings");

    double sxx = 0.0, sxy = 0.0;
    for (const AssignedPeak& p : out.peaks) {
        const double x = p.ratio * rl.magnitude / (2.0 * std::numbers::pi);
        sxx += x * x;
        sxy += x * std::sin(p.theta_mrad * 1e-3);
    }
    const double lambda = sxy / sxx;
    out.lambda_fm = lambda * 1e15;
    out.energy_ev = constants::planck * constants::planck /
                    (2.0 * beam.species.mass * lambda * lambda) / constants::ev;
    for (AssignedPeak& p : out.peaks) {
        const double pred = std::asin(p.ratio * rl.magnitude * lambda / (2.0 * std::numbers::pi)) * 1e3;
        p.residual_mrad = p.theta_mrad - pred;
    }
    return out;
}

}  // namespace hexring::imgproc
