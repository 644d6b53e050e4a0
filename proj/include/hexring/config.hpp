// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hexring/beamline.hpp"
#include "hexring/errors.hpp"
#include "hexring/imgproc.hpp"
#include "hexring/lattice.hpp"
#include "hexring/synth.hpp"
#include "hexring/transit.hpp"

// Run configuration: INI-style sections with `key = value unit` lines.
// Dimensioned values require a unit suffix; unknown sections, keys or units
// are rejected outright. Command-line overrides use `section.key=value`.
namespace hexring::cfg {

struct RunConfig {
    // [beam]
    std::optional<beamline::SpeciesKind> species;
    std::optional<double> energy_ev;
    std::optional<double> energy_fwhm_ev;  // defaults to the measured 18 eV (He) / 24 eV (H)
    bool neutralization_shift = false;

    // [geometry]
    beamline::BeamlineGeometry geometry;

    // [lattice]
    double lattice_a = lattice::default_lattice_constant;
    double max_ratio = 8.0;

    // [transit]
    std::vector<double> transit_energies_ev{30, 60, 120, 250, 500, 1000, 1500};
    transit::TransitConfig transit_cfg;
    int supercell_nx = 6;
    int supercell_ny = 6;
    double potential_cutoff = 5e-10;
    std::string potential_kind = "zbl";  // or "table"
    std::string potential_file;

    // [synth]
    synth::PatternParams synth_params;

    // [analyze]
    double distortion_c1 = 0.0;  // 1/m
    double distortion_c2 = 0.0;  // 1/m^2
    double bin_width_mrad = 0.1;
    double min_prominence = 3.0;
    int smooth_window = 5;
    double min_angle_mrad = 0.5;
    int n_inner_rings = 3;
    double match_tolerance_mrad = 0.2;
    double rescale_target = 1000.0;
    imgproc::RegionRect rescale_region;  // empty: no rescaling step
    int fit_stride = 2;

    // top level
    std::uint64_t seed = 0;

    RunConfig() { synth_params.beam_block = synth::PatternParams::default_beam_block(); }

    beamline::Beam beam() const {
        if (!species) throw ConfigError("missing key beam.species");
        if (!energy_ev) throw ConfigError("missing key beam.energy");
        beamline::Beam b;
        b.species = *species == beamline::SpeciesKind::hydrogen ? beamline::Species::hydrogen()
                                                                : beamline::Species::helium();
        b.energy_ev = *energy_ev;
        b.energy_fwhm_ev = energy_fwhm_ev.value_or(*species == beamline::SpeciesKind::hydrogen ? 24.0 : 18.0);
        if (neutralization_shift) return beamline::effective_beam(b);
        return b;
    }

    lattice::DirectLattice direct_lattice() const {
        lattice::DirectLattice lat;
        lat.a = lattice_a;
        return lat;
    }

    transit::PotentialModel potential(const beamline::Species& sp) const {
        if (potential_kind == "zbl")
            return transit::PotentialModel::zbl(sp.atomic_number, 6.0, potential_cutoff);
        if (potential_kind != "table") throw ConfigError("transit.potential must be 'zbl' or 'table'");
        if (potential_file.empty()) throw ConfigError("transit.potential_file required for a table potential");
        std::ifstream in(potential_file);
        if (!in) throw ConfigError("cannot open potential table '" + potential_file + "'");
        std::vector<std::pair<double, double>> table;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ls(line);
            double r, v_ev;
            if (ls >> r >> v_ev) table.emplace_back(r, v_ev * constants::ev);
        }
        return transit::PotentialModel::from_table(std::move(table), potential_cutoff);
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

enum class Dim { length, energy, angle, time, area, inv_length, inv_area, counts, pixels, plain };

inline const std::map<std::string, double>& unit_table(Dim d) {
    static const std::map<std::string, double> length{{"m", 1.0},     {"mm", 1e-3}, {"um", 1e-6},
                                                      {"nm", 1e-9},   {"pm", 1e-12}, {"fm", 1e-15}};
    static const std::map<std::string, double> energy{{"eV", 1.0}, {"keV", 1e3}, {"meV", 1e-3}};
    static const std::map<std::string, double> angle{{"rad", 1.0}, {"mrad", 1e-3}, {"urad", 1e-6}};
    static const std::map<std::string, double> time{{"s", 1.0},   {"ms", 1e-3},  {"us", 1e-6}, {"ns", 1e-9},
                                                    {"ps", 1e-12}, {"fs", 1e-15}, {"as", 1e-18}};
    static const std::map<std::string, double> area{{"m2", 1.0}, {"m^2", 1.0}, {"nm2", 1e-18}, {"pm2", 1e-24}};
    static const std::map<std::string, double> inv_length{{"1/m", 1.0}, {"1/mm", 1e3}, {"1/um", 1e6}};
    static const std::map<std::string, double> inv_area{{"1/m2", 1.0}, {"1/m^2", 1.0}, {"1/mm2", 1e6}};
    static const std::map<std::string, double> counts{{"counts", 1.0}};
    static const std::map<std::string, double> pixels{{"px", 1.0}};
    static const std::map<std::string, double> plain{};
    switch (d) {
        case Dim::length: return length;
        case Dim::energy: return energy;
        case Dim::angle: return angle;
        case Dim::time: return time;
        case Dim::area: return area;
        case Dim::inv_length: return inv_length;
        case Dim::inv_area: return inv_area;
        case Dim::counts: return counts;
        case Dim::pixels: return pixels;
        case Dim::plain: return plain;
    }
    return plain;
}

inline double parse_number(const std::string& tok, const std::string& where) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw ConfigError(where + ": cannot parse number '" + tok + "'");
    }
    if (pos != tok.size()) throw ConfigError(where + ": cannot parse number '" + tok + "'");
    return v;
}

// "<numbers> <unit>"; dimensionless values take no unit.
inline std::vector<double> parse_values(const std::string& value, Dim dim, const std::string& where) {
    std::string body = trim(value);
    double scale = 1.0;
    if (dim != Dim::plain) {
        const std::size_t cut = body.find_last_of(" \t");
        if (cut == std::string::npos)
            throw ConfigError(where + ": dimensioned value requires a unit suffix (got '" + value + "')");
        const std::string unit = trim(body.substr(cut + 1));
        const auto& table = unit_table(dim);
        const auto it = table.find(unit);
        if (it == table.end()) throw ConfigError(where + ": unit '" + unit + "' not valid here");
        scale = it->second;
        body = trim(body.substr(0, cut));
    }
    std::vector<double> out;
    std::string tok;
    std::istringstream is(body);
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) throw ConfigError(where + ": empty list element");
        out.push_back(parse_number(tok, where) * scale);
    }
    if (out.empty()) throw ConfigError(where + ": no value");
    return out;
}

inline double parse_scalar(const std::string& value, Dim dim, const std::string& where) {
    const std::vector<double> v = parse_values(value, dim, where);
    if (v.size() != 1) throw ConfigError(where + ": expected a single value");
    return v[0];
}

inline long parse_int(const std::string& value, const std::string& where, Dim dim = Dim::plain) {
    const double v = parse_scalar(value, dim, where);
    const long l = std::lround(v);
    if (v != static_cast<double>(l)) throw ConfigError(where + ": expected an integer");
    return l;
}

inline bool parse_bool(const std::string& value, const std::string& where) {
    const std::string v = trim(value);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError(where + ": expected a boolean");
}

// "x y; x y; ... <unit>"
inline std::vector<Vec2> parse_points(const std::string& value, const std::string& where) {
    std::string body = trim(value);
    if (body == "none") return {};
    const std::size_t cut = body.find_last_of(" \t");
    if (cut == std::string::npos) throw ConfigError(where + ": point list requires a length unit");
    const std::string unit = trim(body.substr(cut + 1));
    const auto& table = unit_table(Dim::length);
    const auto it = table.find(unit);
    if (it == table.end()) throw ConfigError(where + ": unit '" + unit + "' not valid here");
    body = trim(body.substr(0, cut));
    std::vector<Vec2> pts;
    std::string group;
    std::istringstream is(body);
    while (std::getline(is, group, ';')) {
        std::istringstream gs(trim(group));
        double x, y;
        if (!(gs >> x >> y)) throw ConfigError(where + ": point needs two coordinates");
        std::string rest;
        if (gs >> rest) throw ConfigError(where + ": point needs exactly two coordinates");
        pts.push_back({x * it->second, y * it->second});
    }
    if (pts.size() < 3) throw ConfigError(where + ": polygon needs at least three points (or 'none')");
    return pts;
}

inline imgproc::RegionRect parse_rect(const std::string& value, const std::string& where) {
    std::string body = trim(value);
    const std::size_t cut = body.find_last_of(" \t");
    if (cut == std::string::npos || trim(body.substr(cut + 1)) != "px")
        throw ConfigError(where + ": rectangle requires the px unit");
    std::istringstream is(trim(body.substr(0, cut)));
    imgproc::RegionRect r;
    if (!(is >> r.x >> r.y >> r.width >> r.height)) throw ConfigError(where + ": rectangle needs x y w h");
    return r;
}

inline void apply_key(RunConfig& c, const std::string& section, const std::string& key, const std::string& value) {
    const std::string where = section.empty() ? key : section + "." + key;
    auto scalar = [&](Dim d) { return parse_scalar(value, d, where); };

    if (section.empty()) {
        if (key == "seed") {
            c.seed = static_cast<std::uint64_t>(parse_int(value, where));
            return;
        }
        throw ConfigError("unknown top-level key '" + key + "'");
    }
    if (section == "beam") {
        if (key == "species") {
            c.species = beamline::Species::from_name(trim(value)).kind;
            return;
        }
        if (key == "energy") {
            c.energy_ev = scalar(Dim::energy);
            return;
        }
        if (key == "energy_fwhm") {
            c.energy_fwhm_ev = scalar(Dim::energy);
            return;
        }
        if (key == "neutralization_shift") {
            c.neutralization_shift = parse_bool(value, where);
            return;
        }
    } else if (section == "geometry") {
        if (key == "s0") { c.geometry.s0 = scalar(Dim::length); return; }
        if (key == "s1") { c.geometry.s1 = scalar(Dim::length); return; }
        if (key == "s2") { c.geometry.s2 = scalar(Dim::length); return; }
        if (key == "L") { c.geometry.drift_length = scalar(Dim::length); return; }
        if (key == "detector_distance") { c.geometry.detector_distance = scalar(Dim::length); return; }
        if (key == "detector_diameter") { c.geometry.detector_diameter = scalar(Dim::length); return; }
    } else if (section == "lattice") {
        if (key == "a") { c.lattice_a = scalar(Dim::length); return; }
        if (key == "max_ratio") { c.max_ratio = scalar(Dim::plain); return; }
    } else if (section == "transit") {
        if (key == "energies") { c.transit_energies_ev = parse_values(value, Dim::energy, where); return; }
        if (key == "timestep") { c.transit_cfg.timestep = scalar(Dim::time); return; }
        if (key == "start_height") { c.transit_cfg.start_height = scalar(Dim::length); return; }
        if (key == "interaction_halfwidth") { c.transit_cfg.interaction_halfwidth = scalar(Dim::length); return; }
        if (key == "impact_u") { c.transit_cfg.impact_fractional.x = scalar(Dim::plain); return; }
        if (key == "impact_v") { c.transit_cfg.impact_fractional.y = scalar(Dim::plain); return; }
        if (key == "max_steps") { c.transit_cfg.max_steps = static_cast<std::size_t>(parse_int(value, where)); return; }
        if (key == "supercell_nx") { c.supercell_nx = static_cast<int>(parse_int(value, where)); return; }
        if (key == "supercell_ny") { c.supercell_ny = static_cast<int>(parse_int(value, where)); return; }
        if (key == "cutoff") { c.potential_cutoff = scalar(Dim::length); return; }
        if (key == "potential") { c.potential_kind = trim(value); return; }
        if (key == "potential_file") { c.potential_file = trim(value); return; }
    } else if (section == "synth") {
        auto& sp = c.synth_params;
        if (key == "width") { sp.width = static_cast<int>(parse_int(value, where, Dim::pixels)); return; }
        if (key == "height") { sp.height = static_cast<int>(parse_int(value, where, Dim::pixels)); return; }
        if (key == "pixel_pitch") { sp.pixel_pitch = scalar(Dim::length); return; }
        if (key == "center_x") { sp.center_px.x = scalar(Dim::pixels); return; }
        if (key == "center_y") { sp.center_px.y = scalar(Dim::pixels); return; }
        if (key == "ring_width_sigma") { sp.ring_width_sigma = scalar(Dim::angle); return; }
        if (key == "damping_alpha") { sp.damping_alpha = scalar(Dim::area); return; }
        if (key == "amplitude") { sp.amplitude = scalar(Dim::counts); return; }
        if (key == "background_level") { sp.background_level = scalar(Dim::counts); return; }
        if (key == "background_sigma") { sp.background_sigma = scalar(Dim::angle); return; }
        if (key == "background_floor") { sp.background_floor = scalar(Dim::counts); return; }
        if (key == "central_amplitude") { sp.central_amplitude = scalar(Dim::counts); return; }
        if (key == "beam_block") { sp.beam_block = parse_points(value, where); return; }
        if (key == "noise") { sp.poisson_noise = parse_bool(value, where); return; }
    } else if (section == "analyze") {
        if (key == "c1") { c.distortion_c1 = scalar(Dim::inv_length); return; }
        if (key == "c2") { c.distortion_c2 = scalar(Dim::inv_area); return; }
        if (key == "bin_width") { c.bin_width_mrad = scalar(Dim::angle) * 1e3; return; }
        if (key == "min_prominence") { c.min_prominence = scalar(Dim::plain); return; }
        if (key == "smooth_window") { c.smooth_window = static_cast<int>(parse_int(value, where)); return; }
        if (key == "min_angle") { c.min_angle_mrad = scalar(Dim::angle) * 1e3; return; }
        if (key == "n_inner_rings") { c.n_inner_rings = static_cast<int>(parse_int(value, where)); return; }
        if (key == "match_tolerance") { c.match_tolerance_mrad = scalar(Dim::angle) * 1e3; return; }
        if (key == "rescale_target") { c.rescale_target = scalar(Dim::counts); return; }
        if (key == "rescale_region") { c.rescale_region = parse_rect(value, where); return; }
        if (key == "fit_stride") { c.fit_stride = static_cast<int>(parse_int(value, where)); return; }
    } else {
        throw ConfigError("unknown config section '[" + section + "]'");
    }
    throw ConfigError("unknown key '" + where + "'");
}

}  // namespace detail

inline void apply_config_text(RunConfig& c, const std::string& text, const std::string& origin = "config") {
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(where + ": malformed section header");
            section = detail::trim(s.substr(1, s.size() - 2));
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string value = detail::trim(s.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError(where + ": expected key = value");
        detail::apply_key(c, section, key, value);
    }
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    RunConfig c;
    apply_config_text(c, ss.str(), path);
    return c;
}

// "section.key=value" command-line override.
inline void apply_override(RunConfig& c, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like section.key=value");
    const std::string path = detail::trim(assignment.substr(0, eq));
    const std::string value = detail::trim(assignment.substr(eq + 1));
    const std::size_t dot = path.find('.');
    const std::string section = dot == std::string::npos ? "" : path.substr(0, dot);
    const std::string key = dot == std::string::npos ? path : path.substr(dot + 1);
    detail::apply_key(c, section, key, value);
}

// Canonical resolved-config listing; input to the provenance hash, so it
// enumerates every effective value, defaults included.
inline std::string canonical_text(const RunConfig& c) {
    std::ostringstream os;
    os.precision(17);
    auto line = [&os](const std::string& k, auto v) { os << k << " = " << v << '\n'; };
    line("beam.species", c.species ? (*c.species == beamline::SpeciesKind::hydrogen ? "H" : "He") : "unset");
    line("beam.energy_ev", c.energy_ev.value_or(0.0));
    line("beam.energy_fwhm_ev",
         c.energy_fwhm_ev.value_or(c.species && *c.species == beamline::SpeciesKind::hydrogen ? 24.0 : 18.0));
    line("beam.neutralization_shift", c.neutralization_shift);
    line("geometry.s0_m", c.geometry.s0);
    line("geometry.s1_m", c.geometry.s1);
    line("geometry.s2_m", c.geometry.s2);
    line("geometry.L_m", c.geometry.drift_length);
    line("geometry.detector_distance_m", c.geometry.detector_distance);
    line("geometry.detector_diameter_m", c.geometry.detector_diameter);
    line("lattice.a_m", c.lattice_a);
    line("lattice.max_ratio", c.max_ratio);
    {
        std::ostringstream es;
        es.precision(17);
        for (std::size_t i = 0; i < c.transit_energies_ev.size(); ++i)
            es << (i ? "," : "") << c.transit_energies_ev[i];
        line("transit.energies_ev", es.str());
    }
    line("transit.timestep_s", c.transit_cfg.timestep);
    line("transit.start_height_m", c.transit_cfg.start_height);
    line("transit.interaction_halfwidth_m", c.transit_cfg.interaction_halfwidth);
    line("transit.impact_u", c.transit_cfg.impact_fractional.x);
    line("transit.impact_v", c.transit_cfg.impact_fractional.y);
    line("transit.max_steps", c.transit_cfg.max_steps);
    line("transit.supercell_nx", c.supercell_nx);
    line("transit.supercell_ny", c.supercell_ny);
    line("transit.cutoff_m", c.potential_cutoff);
    line("transit.potential", c.potential_kind);
    line("transit.potential_file", c.potential_file);
    line("synth.width_px", c.synth_params.width);
    line("synth.height_px", c.synth_params.height);
    line("synth.pixel_pitch_m", c.synth_params.pixel_pitch);
    line("synth.center_x_px", c.synth_params.center_px.x);
    line("synth.center_y_px", c.synth_params.center_px.y);
    line("synth.ring_width_sigma_rad", c.synth_params.ring_width_sigma);
    line("synth.damping_alpha_m2", c.synth_params.damping_alpha);
    line("synth.amplitude_counts", c.synth_params.amplitude);
    line("synth.background_level_counts", c.synth_params.background_level);
    line("synth.background_sigma_rad", c.synth_params.background_sigma);
    line("synth.background_floor_counts", c.synth_params.background_floor);
    line("synth.central_amplitude_counts", c.synth_params.central_amplitude);
    {
        std::ostringstream bs;
        bs.precision(17);
        for (const Vec2& p : c.synth_params.beam_block) bs << p.x << " " << p.y << ";";
        line("synth.beam_block_m", bs.str());
    }
    line("synth.noise", c.synth_params.poisson_noise);
    line("analyze.c1_per_m", c.distortion_c1);
    line("analyze.c2_per_m2", c.distortion_c2);
    line("analyze.bin_width_mrad", c.bin_width_mrad);
    line("analyze.min_prominence", c.min_prominence);
    line("analyze.smooth_window", c.smooth_window);
    line("analyze.min_angle_mrad", c.min_angle_mrad);
    line("analyze.n_inner_rings", c.n_inner_rings);
    line("analyze.match_tolerance_mrad", c.match_tolerance_mrad);
    line("analyze.rescale_target_counts", c.rescale_target);
    {
        std::ostringstream rs;
        rs << c.rescale_region.x << " " << c.rescale_region.y << " " << c.rescale_region.width << " "
           << c.rescale_region.height;
        line("analyze.rescale_region_px", rs.str());
    }
    line("analyze.fit_stride", c.fit_stride);
    line("seed", c.seed);
    return os.str();
}

}  // namespace hexring::cfg
