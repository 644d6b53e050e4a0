// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "hexring/errors.hpp"
#include "hexring/geom.hpp"

// Graphene direct/reciprocal lattice and the Debye-Scherrer ring system.
//
// Conventions: the direct basis is a1 = a(sqrt3/2, -1/2), a2 = a(0, 1)
// (120 deg apart) with the two-atom honeycomb basis at fractional
// (1/3, 2/3) and (2/3, 1/3). The dual reciprocal basis then comes out with
// 60 deg between G1 and G2, so that
//   |n1 G1 + n2 G2|^2 = |G1|^2 (n1^2 + n1 n2 + n2^2),
// i.e. squared ring ratios are exactly the Loeschian integers.
namespace hexring::lattice {

inline constexpr double default_lattice_constant = 246e-12;  // m

struct DirectLattice {
    double a = default_lattice_constant;  // m
    std::array<Vec2, 2> atom_basis{{{1.0 / 3.0, 2.0 / 3.0}, {2.0 / 3.0, 1.0 / 3.0}}};

    Vec2 basis1() const { return {a * std::numbers::sqrt3 / 2.0, -a / 2.0}; }
    Vec2 basis2() const { return {0.0, a}; }

    // Cartesian position of an atom given cell indices and basis slot.
    Vec2 site(int cell1, int cell2, int slot) const {
        const Vec2 f = atom_basis[static_cast<std::size_t>(slot)];
        const double f1 = cell1 + f.x;
        const double f2 = cell2 + f.y;
        return basis1() * f1 + basis2() * f2;
    }
};

struct ReciprocalLattice {
    Vec2 g1;
    Vec2 g2;
    double magnitude = 0.0;  // |G1| = |G2|, 1/m

    Vec2 vector(int n1, int n2) const { return g1 * double(n1) + g2 * double(n2); }
};

struct Ring {
    std::int64_t loeschian = 0;    // L = n1^2 + n1 n2 + n2^2
    double magnitude_ratio = 0.0;  // sqrt(L), |G|/|G1|
    int multiplicity = 0;          // count of (n1, n2) pairs on the ring
};

struct RingSystem {
    std::vector<Ring> rings;  // sorted by loeschian, strictly increasing

    bool empty() const { return rings.empty(); }
    std::size_t size() const { return rings.size(); }
};

inline ReciprocalLattice reciprocal_basis(const DirectLattice& lat) {
    if (!(lat.a > 0.0)) throw ConfigError("lattice constant must be positive");
    const double g = 4.0 * std::numbers::pi / (std::numbers::sqrt3 * lat.a);
    ReciprocalLattice rl;
    rl.g1 = {g, 0.0};
    rl.g2 = {g * 0.5, g * std::numbers::sqrt3 / 2.0};
    rl.magnitude = g;
    return rl;
}

// All distinct ring magnitudes with sqrt(L) <= max_ratio. Distinctness is
// decided on the integer L, never on floating-point magnitudes.
inline RingSystem enumerate_rings(const ReciprocalLattice& rl, double max_ratio) {
    (void)rl;  // ratios are lattice-independent; rl fixes the caller's intent
    RingSystem out;
    if (!(max_ratio >= 1.0)) return out;
    // |n1| can reach 2/sqrt(3) * ratio when n2 = -n1/2
    const int span = static_cast<int>(std::ceil(max_ratio * 2.0 / std::numbers::sqrt3)) + 1;
    const auto lmax = static_cast<std::int64_t>(std::floor(max_ratio * max_ratio + 1e-9));
    std::map<std::int64_t, int> counts;
    for (int n1 = -span; n1 <= span; ++n1) {
        for (int n2 = -span; n2 <= span; ++n2) {
            if (n1 == 0 && n2 == 0) continue;
            const std::int64_t l = std::int64_t(n1) * n1 + std::int64_t(n1) * n2 + std::int64_t(n2) * n2;
            if (l <= lmax) ++counts[l];
        }
    }
    out.rings.reserve(counts.size());
    for (const auto& [l, mult] : counts)
        out.rings.push_back({l, std::sqrt(static_cast<double>(l)), mult});
    return out;
}

inline std::string rings_to_csv(const RingSystem& rs) {
    std::ostringstream os;
    os << "L,ratio,multiplicity\n";
    os.precision(12);
    for (const Ring& r : rs.rings) os << r.loeschian << ',' << r.magnitude_ratio << ',' << r.multiplicity << '\n';
    return os.str();
}

}  // namespace hexring::lattice
