// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0
//
// hexring command line: budget, transit, synth, analyze, verify.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hexring/hexring.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hexring;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool output_required) {
    cmd->add_option("-c,--config", args.config_path, "INI config file")->envname("HEXRING_CONFIG");
    cmd->add_option("--set", args.overrides, "override a config value, section.key=value")->take_all();
    auto* o = cmd->add_option("-o,--output", args.output, "output path");
    if (output_required) o->required();
}

cfg::RunConfig resolve_config(const CommonArgs& args) {
    cfg::RunConfig c;
    if (!args.config_path.empty()) c = cfg::load_config_file(args.config_path);
    for (const std::string& ov : args.overrides) cfg::apply_override(c, ov);
    return c;
}

json provenance(const cfg::RunConfig& c, const std::string& command) {
    return json{{"tool", "hexring"},
                {"version", io::version},
                {"command", command},
                {"config_fnv1a64", io::fnv1a64_hex(cfg::canonical_text(c))},
                {"seed", c.seed}};
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void emit(const std::string& path, const std::string& bytes) {
    if (path.empty() || path == "-") {
        std::fwrite(bytes.data(), 1, bytes.size(), stdout);
        return;
    }
    io::atomic_write(path, bytes);
}

std::string sidecar_path(const std::string& path, const char* suffix = ".json") {
    fs::path p(path);
    p.replace_extension(suffix);
    return p.string();
}

// ---------------------------------------------------------------------------

int cmd_budget(const CommonArgs& args) {
    const cfg::RunConfig c = resolve_config(args);
    const beamline::Beam beam = c.beam();
    c.geometry.validate();
    const lattice::ReciprocalLattice rl = lattice::reciprocal_basis(c.direct_lattice());
    const lattice::RingSystem rings = lattice::enumerate_rings(rl, c.max_ratio);
    const beamline::CoherenceBudget budget = beamline::coherence_budget(beam, c.geometry);
    const double lambda = beamline::de_broglie(beam);
    const double k = beamline::wavevector(beam);

    json angles = json::array();
    json ratios = json::array();
    int skipped = 0;
    for (const lattice::Ring& r : rings.rings) {
        if (r.magnitude_ratio * rl.magnitude >= k) {
            ++skipped;
            continue;
        }
        angles.push_back(beamline::diffraction_angle(beam, r, rl) * 1e3);
        ratios.push_back(r.magnitude_ratio);
    }

    json warnings = json::array();
    if (budget.transverse < 5.0 * c.lattice_a)
        warnings.push_back("transverse coherence below 5a");
    if (budget.ll_over_lambda < 50.0)
        warnings.push_back("longitudinal coherence below 50 lambda");
    if (skipped > 0) warnings.push_back("non-diffracting rings skipped: " + std::to_string(skipped));

    json out{{"species", beam.species.name()},
             {"energy_ev", beam.energy_ev},
             {"lambda_fm", lambda * 1e15},
             {"k_per_m", k},
             {"ring_angles_mrad", angles},
             {"ring_ratios", ratios},
             {"neutralization_shift_ev", beamline::neutralization_shift_ev(beam.species)},
             {"coherence",
              json{{"lt_m", budget.transverse},
                   {"ll_over_lambda", std::isinf(budget.ll_over_lambda) ? json(nullptr) : json(budget.ll_over_lambda)},
                   {"phi_mrad", budget.collimation * 1e3}}},
             {"warnings", warnings},
             {"provenance", provenance(c, "budget")}};
    emit(args.output, out.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_transit(const CommonArgs& args, const std::string& traj_dir) {
    const cfg::RunConfig c = resolve_config(args);
    if (!c.species) throw ConfigError("missing key beam.species");
    const beamline::Species sp =
        *c.species == beamline::SpeciesKind::hydrogen ? beamline::Species::hydrogen() : beamline::Species::helium();
    const transit::Supercell cell =
        transit::Supercell::graphene(c.direct_lattice(), c.supercell_nx, c.supercell_ny);
    const transit::PotentialModel pot = c.potential(sp);
    const transit::StoppingTable stopping = transit::StoppingTable::default_for(sp.kind);
    const transit::DecoherenceCriterion criterion;

    std::ostringstream os;
    os << "energy_eV,delta_p_net,delta_p_per_atom,interaction_time_fs,e_loss_nuclear_eV,"
          "e_loss_electronic_eV,coherent_flag\n";
    for (double e : c.transit_energies_ev) {
        beamline::Beam beam{sp, e, 0.0};
        transit::TransitConfig tc = c.transit_cfg;
        tc.record_trajectory = !traj_dir.empty();
        transit::TransitResult res = transit::simulate_transit(beam, cell, pot, tc);
        res.energy_loss_electronic_ev = transit::electronic_loss(beam, stopping);
        const bool coherent =
            transit::decoherence_check(res.delta_p_per_atom, criterion) == transit::Coherence::coherent;
        os << fmt(e) << ',' << fmt(res.delta_p_net) << ',' << fmt(res.delta_p_per_atom) << ',';
        if (res.transmitted)
            os << fmt(res.interaction_time * 1e15);
        os << ',' << fmt(res.energy_loss_nuclear_ev) << ',' << fmt(res.energy_loss_electronic_ev) << ','
           << (coherent ? 1 : 0) << '\n';

        if (!traj_dir.empty()) {
            std::ostringstream ts;
            ts << "t_fs,x_m,y_m,z_m,vx_m_s,vy_m_s,vz_m_s,hex_p_lat_per_atom\n";
            for (const transit::TrajectorySample& s : res.trajectory) {
                double hex = 0.0;
                for (std::size_t i : res.hexagon_sites) hex += s.carbon_momenta[i].lateral().norm();
                hex /= static_cast<double>(res.hexagon_sites.size());
                ts << fmt(s.t * 1e15) << ',' << fmt(s.position.x) << ',' << fmt(s.position.y) << ','
                   << fmt(s.position.z) << ',' << fmt(s.velocity.x) << ',' << fmt(s.velocity.y) << ','
                   << fmt(s.velocity.z) << ',' << fmt(hex) << '\n';
            }
            std::ostringstream name;
            name << traj_dir << "/trajectory_" << sp.name() << "_" << fmt(e) << "eV.csv";
            io::atomic_write(name.str(), ts.str());
        }
    }
    emit(args.output, os.str());
    if (!args.output.empty() && args.output != "-")
        io::atomic_write(sidecar_path(args.output, ".meta.json"), provenance(c, "transit").dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_synth(const CommonArgs& args) {
    const cfg::RunConfig c = resolve_config(args);
    const beamline::Beam beam = c.beam();
    const lattice::ReciprocalLattice rl = lattice::reciprocal_basis(c.direct_lattice());
    const lattice::RingSystem rings = lattice::enumerate_rings(rl, c.max_ratio);
    synth::PatternParams params = c.synth_params;
    params.noise_seed = c.seed;
    const img::DetectorImage im = synth::synthesize(beam, rings, rl, c.geometry, params);

    io::atomic_write(args.output, img::pgm16_bytes(im));
    const fs::path base(args.output);
    fs::path mask = base;
    mask.replace_extension(".mask.pgm");
    io::atomic_write(mask.string(), img::mask_pgm_bytes(im));

    json block = json::array();
    for (const Vec2& p : params.beam_block) block.push_back(json::array({p.x, p.y}));
    json side{{"width", params.width},
              {"height", params.height},
              {"pixel_pitch_um", params.pixel_pitch * 1e6},
              {"center_px", json::array({params.center_px.x, params.center_px.y})},
              {"species", beam.species.name()},
              {"energy_ev", beam.energy_ev},
              {"ring_width_sigma_rad",
               params.ring_width_sigma > 0.0
                   ? params.ring_width_sigma
                   : beamline::coherence_budget(beam, c.geometry).collimation / constants::fwhm_over_sigma},
              {"damping_alpha_m2", params.damping_alpha},
              {"amplitude", params.amplitude},
              {"background_level", params.background_level},
              {"background_floor", params.background_floor},
              {"central_amplitude", params.central_amplitude},
              {"beam_block_m", block},
              {"poisson_noise", params.poisson_noise},
              {"provenance", provenance(c, "synth")}};
    io::atomic_write(sidecar_path(args.output), side.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------

img::DetectorImage load_input_image(const std::string& path, double pixel_pitch) {
    fs::path p(path);
    if (p.extension() == ".raw") {
        fs::path header = p;
        header.replace_extension(".json");
        const json h = json::parse(io::read_file(header.string()));
        return img::read_raw16(path, h.at("width").get<int>(), h.at("height").get<int>(),
                               h.at("pixel_pitch_um").get<double>());
    }
    img::DetectorImage im = img::read_pgm(path, pixel_pitch);
    fs::path mask = p;
    mask.replace_extension(".mask.pgm");
    if (fs::exists(mask)) img::load_mask_pgm(im, mask.string());
    return im;
}

int cmd_analyze(const CommonArgs& args, const std::vector<std::string>& inputs, const std::string& dark_path,
                const std::string& mask_path) {
    const cfg::RunConfig c = resolve_config(args);
    const beamline::Beam beam = c.beam();
    c.geometry.validate();
    const lattice::ReciprocalLattice rl = lattice::reciprocal_basis(c.direct_lattice());

    std::vector<img::DetectorImage> frames;
    for (const std::string& path : inputs) frames.push_back(load_input_image(path, c.synth_params.pixel_pitch));
    if (!mask_path.empty())
        for (img::DetectorImage& f : frames) img::load_mask_pgm(f, mask_path);
    if (!dark_path.empty()) {
        const img::DetectorImage dark = img::read_pgm(dark_path, c.synth_params.pixel_pitch);
        for (img::DetectorImage& f : frames) f = imgproc::dark_correct(f, dark);
    }
    if (!c.rescale_region.empty())
        for (img::DetectorImage& f : frames) f = imgproc::rescale(f, c.rescale_region, c.rescale_target);

    img::DetectorImage im = imgproc::average_series(frames);
    if (c.distortion_c1 != 0.0 || c.distortion_c2 != 0.0)
        im = imgproc::undistort(im, c.distortion_c1, c.distortion_c2);

    imgproc::CenterFitOptions fit_opts;
    fit_opts.pixel_stride = c.fit_stride;
    const imgproc::CenterFit fit = imgproc::fit_center(im, c.n_inner_rings, fit_opts);

    imgproc::TraceScale scale{c.geometry.detector_distance, beamline::wavevector(beam), rl.magnitude};
    const imgproc::RadialTrace trace =
        imgproc::azimuthal_average(im, {fit.cx, fit.cy}, scale, c.bin_width_mrad);

    imgproc::PeakOptions peak_opts;
    peak_opts.min_prominence = c.min_prominence;
    peak_opts.smooth_window = c.smooth_window;
    peak_opts.min_angle_mrad = c.min_angle_mrad;
    peak_opts.max_angle_mrad =
        std::atan(0.5 * c.geometry.detector_diameter / c.geometry.detector_distance) * 1e3;
    const std::vector<double> peaks = imgproc::detect_peaks(trace, peak_opts);
    const imgproc::PeakAssignment assignment =
        imgproc::assign_rings(peaks, beam, rl, c.match_tolerance_mrad, c.max_ratio);

    io::atomic_write(args.output + ".trace.csv", imgproc::trace_to_csv(trace));

    json jpeaks = json::array();
    for (const imgproc::AssignedPeak& p : assignment.peaks)
        jpeaks.push_back(json{{"theta_mrad", p.theta_mrad},
                              {"loeschian", p.loeschian},
                              {"ratio", p.ratio},
                              {"residual_mrad", p.residual_mrad}});
    json out{{"species", beam.species.name()},
             {"nominal_energy_ev", beam.energy_ev},
             {"nominal_lambda_fm", beamline::de_broglie(beam) * 1e15},
             {"fitted_lambda_fm", assignment.lambda_fm},
             {"fitted_energy_ev", assignment.energy_ev},
             {"n_detected", assignment.n_detected},
             {"n_matched", assignment.n_matched},
             {"peaks", jpeaks},
             {"center",
              json{{"cx_px", fit.cx},
                   {"cy_px", fit.cy},
                   {"converged", fit.converged},
                   {"residual_rms", fit.residual_rms}}},
             {"frames", inputs.size()},
             {"provenance", provenance(c, "analyze")}};
    io::atomic_write(args.output + ".assign.json", out.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_verify(const CommonArgs& args, const std::vector<std::string>& inputs) {
    const cfg::RunConfig c = resolve_config(args);
    const lattice::ReciprocalLattice rl = lattice::reciprocal_basis(c.direct_lattice());

    struct Point {
        std::string species;
        std::int64_t loeschian;
        double ratio;
        double lambda_fm;
        double sin_theta;
    };
    std::vector<Point> points;
    for (const std::string& path : inputs) {
        const json a = json::parse(io::read_file(path));
        const std::string species = a.at("species").get<std::string>();
        const double lambda_fm = a.at("nominal_lambda_fm").get<double>();
        for (const json& p : a.at("peaks"))
            points.push_back({species, p.at("loeschian").get<std::int64_t>(), p.at("ratio").get<double>(),
                              lambda_fm, std::sin(p.at("theta_mrad").get<double>() * 1e-3)});
    }
    if (points.empty()) throw InsufficientDataError("no assigned peaks in the inputs");

    // per (species, ring) linear fit of sin(theta) against lambda
    struct Fit {
        int n = 0;
        double slope = 0.0, intercept = 0.0, intercept_sigma = 0.0;
        bool valid = false;
    };
    std::map<std::pair<std::string, std::int64_t>, Fit> fits;
    for (const Point& p : points) ++fits[{p.species, p.loeschian}].n;
    for (auto& [key, fit] : fits) {
        if (fit.n < 2) continue;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const Point& p : points)
            if (p.species == key.first && p.loeschian == key.second) {
                sx += p.lambda_fm;
                sy += p.sin_theta;
                sxx += p.lambda_fm * p.lambda_fm;
                sxy += p.lambda_fm * p.sin_theta;
            }
        const double n = fit.n;
        const double denom = n * sxx - sx * sx;
        if (denom <= 0.0) continue;
        fit.slope = (n * sxy - sx * sy) / denom;
        fit.intercept = (sy * sxx - sx * sxy) / denom;
        double ssr = 0.0;
        for (const Point& p : points)
            if (p.species == key.first && p.loeschian == key.second) {
                const double r = p.sin_theta - (fit.slope * p.lambda_fm + fit.intercept);
                ssr += r * r;
            }
        const double var = fit.n > 2 ? ssr / (n - 2.0) : 0.0;
        fit.intercept_sigma = std::sqrt(var * sxx / denom);
        fit.valid = true;
    }

    std::ostringstream os;
    os << "species,L,ratio,lambda_fm,sin_theta,n_points,slope_per_fm,slope_expected_per_fm,intercept,"
          "intercept_sigma\n";
    for (const Point& p : points) {
        const Fit& fit = fits[{p.species, p.loeschian}];
        const double expected = p.ratio * rl.magnitude / (2.0 * std::numbers::pi) * 1e-15;
        os << p.species << ',' << p.loeschian << ',' << fmt(p.ratio) << ',' << fmt(p.lambda_fm) << ','
           << fmt(p.sin_theta) << ',' << fit.n << ',';
        if (fit.valid)
            os << fmt(fit.slope) << ',' << fmt(expected) << ',' << fmt(fit.intercept) << ','
               << fmt(fit.intercept_sigma);
        else
            os << ',' << fmt(expected) << ",,";
        os << '\n';
    }
    emit(args.output, os.str());
    if (!args.output.empty() && args.output != "-")
        io::atomic_write(sidecar_path(args.output, ".meta.json"), provenance(c, "verify").dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"matter-wave diffraction toolkit for 2D-crystal Debye-Scherrer patterns"};
    app.require_subcommand(1);

    CommonArgs budget_args, transit_args, synth_args, analyze_args, verify_args;
    std::string traj_dir, dark_path, mask_path;
    std::vector<std::string> analyze_inputs, verify_inputs;

    CLI::App* budget = app.add_subcommand("budget", "beam, ring-angle and coherence report (JSON)");
    add_common(budget, budget_args, false);

    CLI::App* transit = app.add_subcommand("transit", "classical transit scan (CSV)");
    add_common(transit, transit_args, false);
    transit->add_option("--dump-trajectory", traj_dir, "directory for per-energy trajectory CSVs");

    CLI::App* synth = app.add_subcommand("synth", "synthetic detector image (16-bit PGM + sidecars)");
    add_common(synth, synth_args, true);

    CLI::App* analyze = app.add_subcommand("analyze", "image reduction: trace CSV + assignment JSON");
    add_common(analyze, analyze_args, true);
    analyze->add_option("images", analyze_inputs, "input frames (PGM or raw+json)")->required();
    analyze->add_option("--dark", dark_path, "dark frame PGM");
    analyze->add_option("--mask", mask_path, "extra exclusion mask PGM");

    CLI::App* verify = app.add_subcommand("verify", "sin(theta) vs lambda per ring from assignments (CSV)");
    add_common(verify, verify_args, false);
    verify->add_option("assignments", verify_inputs, "assignment JSON files")->required();

    try {
        app.parse(argc, argv);
        if (budget->parsed()) return cmd_budget(budget_args);
        if (transit->parsed()) return cmd_transit(transit_args, traj_dir);
        if (synth->parsed()) return cmd_synth(synth_args);
        if (analyze->parsed()) return cmd_analyze(analyze_args, analyze_inputs, dark_path, mask_path);
        if (verify->parsed()) return cmd_verify(verify_args, verify_inputs);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const InsufficientDataError& e) {
        std::cerr << "insufficient data: " << e.what() << "\n";
        return 4;
    } catch (const json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
