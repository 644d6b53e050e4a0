// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "hexring/constants.hpp"
#include "hexring/errors.hpp"
#include "hexring/lattice.hpp"

// Beam kinematics and the coherence/collimation budget of the beamline.
namespace hexring::beamline {

enum class SpeciesKind { hydrogen, helium };

struct Species {
    SpeciesKind kind = SpeciesKind::helium;
    double mass = constants::mass_helium;  // kg
    int atomic_number = 2;

    static Species hydrogen() { return {SpeciesKind::hydrogen, constants::mass_hydrogen, 1}; }
    static Species helium() { return {SpeciesKind::helium, constants::mass_helium, 2}; }

    static Species from_name(const std::string& name) {
        if (name == "H" || name == "h") return hydrogen();
        if (name == "He" || name == "he" || name == "HE") return helium();
        throw ConfigError("unknown species '" + name + "' (expected H or He)");
    }

    const char* name() const { return kind == SpeciesKind::hydrogen ? "H" : "He"; }
};

struct Beam {
    Species species;
    double energy_ev = 0.0;       // kinetic energy normal to the lattice
    double energy_fwhm_ev = 0.0;  // FWHM energy spread
};

struct BeamlineGeometry {
    double s0 = 1e-3;                   // entrance pinhole diameter, m
    double s1 = 500e-6;                 // charge-cell exit pinhole, m
    double s2 = 200e-6;                 // collimation pinhole, m
    double drift_length = 0.790;        // charge cell to collimator, m
    double detector_distance = 0.727;   // sample to detector, m
    double detector_diameter = 75e-3;   // active diameter, m

    void validate() const {
        if (!(s0 > 0 && s1 > 0 && s2 > 0 && drift_length > 0 && detector_distance > 0 && detector_diameter > 0))
            throw ConfigError("beamline geometry: all lengths must be positive");
        if (!(s2 < s1 && s1 <= s0)) throw ConfigError("beamline geometry requires s2 < s1 <= s0");
    }
};

struct CoherenceBudget {
    double transverse = 0.0;    // l_t, m
    double longitudinal = 0.0;  // l_l, m; +inf for a monochromatic beam
    double collimation = 0.0;   // phi, rad
    double ll_over_lambda = 0.0;
};

inline double de_broglie(const Beam& beam) {
    if (!(beam.energy_ev > 0.0)) throw ConfigError("beam energy must be positive");
    const double e_joule = beam.energy_ev * constants::ev;
    return constants::planck / std::sqrt(2.0 * beam.species.mass * e_joule);
}

inline double wavevector(const Beam& beam) { return 2.0 * std::numbers::pi / de_broglie(beam); }

// Diffraction angle for a ring of magnitude ratio sqrt(L): sin(theta) = |G|/k.
inline double diffraction_angle(const Beam& beam, double magnitude_ratio, const lattice::ReciprocalLattice& rl) {
    if (magnitude_ratio < 0.0) throw ConfigError("ring magnitude ratio must be non-negative");
    const double sin_theta = magnitude_ratio * rl.magnitude / wavevector(beam);
    if (sin_theta >= 1.0) throw NumericalError("non-diffracting order: |G| >= k");
    return std::asin(sin_theta);
}

inline double diffraction_angle(const Beam& beam, const lattice::Ring& ring, const lattice::ReciprocalLattice& rl) {
    return diffraction_angle(beam, ring.magnitude_ratio, rl);
}

inline CoherenceBudget coherence_budget(const Beam& beam, const BeamlineGeometry& geom) {
    geom.validate();
    const double lambda = de_broglie(beam);
    CoherenceBudget b;
    b.transverse = 2.0 * geom.drift_length * lambda / geom.s1;
    b.collimation = (geom.s1 + geom.s2) / geom.drift_length;
    if (beam.energy_fwhm_ev > 0.0) {
        // first-order propagation of lambda ~ E^(-1/2): dlambda/lambda = dE/(2E)
        b.ll_over_lambda = 2.0 * beam.energy_ev / beam.energy_fwhm_ev;
        b.longitudinal = b.ll_over_lambda * lambda;
    } else {
        b.ll_over_lambda = std::numeric_limits<double>::infinity();
        b.longitudinal = std::numeric_limits<double>::infinity();
    }
    return b;
}

// Energy lost in the charge-exchange cell: H on Ar loses 2.6 eV, He on He is
// resonant and loses nothing.
inline double neutralization_shift_ev(const Species& sp) {
    return sp.kind == SpeciesKind::hydrogen ? 2.6 : 0.0;
}

inline Beam effective_beam(const Beam& nominal) {
    Beam b = nominal;
    b.energy_ev -= neutralization_shift_ev(nominal.species);
    if (!(b.energy_ev > 0.0)) throw ConfigError("beam energy not positive after neutralization shift");
    return b;
}

}  // namespace hexring::beamline
