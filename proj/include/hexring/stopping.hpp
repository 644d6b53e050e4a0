// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <vector>

#include "hexring/beamline.hpp"
#include "hexring/errors.hpp"

// Electronic stopping as a plain lookup table. The toolkit does not compute
// electronic structure; the default tables carry anchor values for the
// projectile/graphene system and interpolate linearly in between, clamped at
// the ends. Entries marked approximate are qualitative shape points, not
// measured values.
namespace hexring::transit {

struct StoppingEntry {
    double energy_ev = 0.0;
    double loss_ev = 0.0;
    bool approximate = true;
    double tolerance_ev = 0.0;  // only meaningful for approximate anchors
};

struct StoppingTable {
    beamline::SpeciesKind species = beamline::SpeciesKind::helium;
    std::vector<StoppingEntry> entries;  // sorted by energy

    double loss_at(double energy_ev) const {
        if (entries.empty()) throw ConfigError("stopping table is empty");
        if (energy_ev <= entries.front().energy_ev) return entries.front().loss_ev;
        if (energy_ev >= entries.back().energy_ev) return entries.back().loss_ev;
        auto hi = std::upper_bound(entries.begin(), entries.end(), energy_ev,
                                   [](double e, const StoppingEntry& s) { return e < s.energy_ev; });
        auto lo = hi - 1;
        const double t = (energy_ev - lo->energy_ev) / (hi->energy_ev - lo->energy_ev);
        return lo->loss_ev + t * (hi->loss_ev - lo->loss_ev);
    }

    // H/graphene: strongly increasing loss, reaching 16 eV at 1.5 keV.
    static StoppingTable default_hydrogen() {
        StoppingTable t;
        t.species = beamline::SpeciesKind::hydrogen;
        t.entries = {
            {30.0, 0.8, true, 0.5},  {60.0, 1.2, true, 0.5},   {120.0, 1.9, true, 1.0},
            {250.0, 3.2, true, 1.5}, {500.0, 6.0, true, 2.0},  {1000.0, 11.0, true, 3.0},
            {1500.0, 16.0, false, 0.0},
        };
        return t;
    }

    // He/graphene: shallow minimum near 250 eV, a few eV at 1.5 keV.
    static StoppingTable default_helium() {
        StoppingTable t;
        t.species = beamline::SpeciesKind::helium;
        t.entries = {
            {30.0, 1.8, true, 1.0},  {60.0, 1.3, true, 1.0},  {120.0, 0.9, true, 0.5},
            {250.0, 0.7, true, 0.5}, {500.0, 1.1, true, 0.5}, {1000.0, 2.4, true, 1.0},
            {1500.0, 4.0, true, 2.0},
        };
        return t;
    }

    static StoppingTable default_for(beamline::SpeciesKind kind) {
        return kind == beamline::SpeciesKind::hydrogen ? default_hydrogen() : default_helium();
    }
};

inline double electronic_loss(const beamline::Beam& beam, const StoppingTable& table) {
    return table.loss_at(beam.energy_ev);
}

}  // namespace hexring::transit
