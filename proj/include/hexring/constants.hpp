// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <numbers>

// Shared physical constants, CODATA 2018. All modules take numeric inputs
// from this table so derived quantities agree bit-for-bit across the toolkit.
namespace hexring::constants {

inline constexpr double planck = 6.626070150e-34;             // J s (exact)
inline constexpr double hbar = planck / (2.0 * std::numbers::pi);
inline constexpr double elementary_charge = 1.602176634e-19;  // C (exact)
inline constexpr double ev = elementary_charge;               // J per eV
inline constexpr double atomic_mass_unit = 1.660539067e-27;   // kg
inline constexpr double bohr_radius = 5.291772109e-11;        // m

// e^2 / (4 pi eps0), in J m
inline constexpr double coulomb_factor = 1.439964548e-9 * ev;

// Atomic masses [kg]: 1H atom, natural He, natural C.
inline constexpr double mass_hydrogen = 1.00782503207 * atomic_mass_unit;
inline constexpr double mass_helium = 4.002602 * atomic_mass_unit;
inline constexpr double mass_carbon = 12.011 * atomic_mass_unit;

// Gaussian FWHM = fwhm_over_sigma * sigma.
inline constexpr double fwhm_over_sigma = 2.354820045;

}  // namespace hexring::constants
