// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "hexring/beamline.hpp"
#include "hexring/constants.hpp"
#include "hexring/errors.hpp"
#include "hexring/geom.hpp"
#include "hexring/lattice.hpp"

// Classical transit of a projectile through free-standing graphene at normal
// incidence: velocity-Verlet over the projectile plus the supercell carbons,
// pairwise repulsive projectile-carbon potential, carbons initially at rest
// and otherwise unbound. Electronic losses are not part of the dynamics; they
// come from the stopping table (stopping.hpp).
namespace hexring::transit {

struct Supercell {
    int nx = 6;
    int ny = 6;
    std::vector<Vec3> positions;  // m, honeycomb sites, z = 0
    double carbon_mass = constants::mass_carbon;
    double lattice_constant = lattice::default_lattice_constant;

    // Cells span [-n/2, n/2) so the origin is a hexagon centre and the atom
    // set is inversion-symmetric about it.
    static Supercell graphene(const lattice::DirectLattice& lat, int nx = 6, int ny = 6) {
        if (nx <= 0 || ny <= 0) throw ConfigError("supercell repetition counts must be positive");
        Supercell c;
        c.nx = nx;
        c.ny = ny;
        c.lattice_constant = lat.a;
        c.positions.reserve(static_cast<std::size_t>(2 * nx * ny));
        for (int i = -nx / 2; i < nx - nx / 2; ++i)
            for (int j = -ny / 2; j < ny - ny / 2; ++j)
                for (int slot = 0; slot < 2; ++slot) {
                    const Vec2 p = lat.site(i, j, slot);
                    c.positions.push_back({p.x, p.y, 0.0});
                }
        return c;
    }

    // Indices of the n sites nearest (in-plane) to a point.
    std::vector<std::size_t> nearest_sites(const Vec2& point, std::size_t n) const {
        std::vector<std::size_t> idx(positions.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, idx.size())), idx.end(),
                          [&](std::size_t a, std::size_t b) {
                              const Vec2 da = positions[a].lateral() - point;
                              const Vec2 db = positions[b].lateral() - point;
                              return da.dot(da) < db.dot(db);
                          });
        idx.resize(std::min(n, idx.size()));
        return idx;
    }
};

// Pairwise repulsive potential, shifted so V(rc) = V'(rc) = 0.
class PotentialModel {
  public:
    enum class Kind { screened_coulomb, user_table };

    // ZBL universal screened Coulomb for nuclear charges z1 (projectile) and
    // z2 (target).
    static PotentialModel zbl(double z1, double z2 = 6.0, double cutoff = 5e-10) {
        if (!(z1 > 0 && z2 > 0 && cutoff > 0)) throw ConfigError("invalid screened-coulomb parameters");
        PotentialModel p;
        p.kind_ = Kind::screened_coulomb;
        p.prefactor_ = z1 * z2 * constants::coulomb_factor;
        p.screening_length_ = 0.8854 * constants::bohr_radius / (std::pow(z1, 0.23) + std::pow(z2, 0.23));
        p.cutoff_ = cutoff;
        p.shift_at_cutoff();
        return p;
    }

    // Tabulated radial potential, (r [m], V [J]) sorted by r, linearly
    // interpolated; the last tabulated radius caps the cutoff.
    static PotentialModel from_table(std::vector<std::pair<double, double>> table, double cutoff) {
        if (table.size() < 2) throw ConfigError("potential table needs at least two points");
        for (std::size_t i = 1; i < table.size(); ++i)
            if (!(table[i].first > table[i - 1].first)) throw ConfigError("potential table radii must increase");
        PotentialModel p;
        p.kind_ = Kind::user_table;
        p.table_ = std::move(table);
        p.cutoff_ = std::min(cutoff, p.table_.back().first);
        if (!(p.cutoff_ > p.table_.front().first)) throw ConfigError("potential cutoff below tabulated range");
        p.shift_at_cutoff();
        return p;
    }

    Kind kind() const { return kind_; }
    double cutoff() const { return cutoff_; }

    // V and dV/dr at distance r (both zero beyond the cutoff).
    void eval(double r, double& v, double& dv) const {
        if (r >= cutoff_) {
            v = 0.0;
            dv = 0.0;
            return;
        }
        raw(r, v, dv);
        v -= v_cut_ + (r - cutoff_) * dv_cut_;
        dv -= dv_cut_;
    }

  private:
    void raw(double r, double& v, double& dv) const {
        if (kind_ == Kind::screened_coulomb) {
            const double x = r / screening_length_;
            double phi = 0.0, dphi = 0.0;
            static constexpr double c[4] = {0.18175, 0.50986, 0.28022, 0.02817};
            static constexpr double d[4] = {3.19980, 0.94229, 0.40290, 0.20162};
            for (int i = 0; i < 4; ++i) {
                const double e = c[i] * std::exp(-d[i] * x);
                phi += e;
                dphi -= d[i] * e;
            }
            v = prefactor_ / r * phi;
            dv = -prefactor_ / (r * r) * phi + prefactor_ / (r * screening_length_) * dphi;
            return;
        }
        // user table: clamped linear interpolation, first-segment slope below
        std::size_t hi = 1;
        while (hi + 1 < table_.size() && table_[hi].first < r) ++hi;
        const auto& [r0, v0] = table_[hi - 1];
        const auto& [r1, v1] = table_[hi];
        const double slope = (v1 - v0) / (r1 - r0);
        v = v0 + slope * (r - r0);
        dv = slope;
    }

    void shift_at_cutoff() {
        raw(cutoff_, v_cut_, dv_cut_);
    }

    Kind kind_ = Kind::screened_coulomb;
    double prefactor_ = 0.0;
    double screening_length_ = 1.0;
    double cutoff_ = 5e-10;
    double v_cut_ = 0.0;
    double dv_cut_ = 0.0;
    std::vector<std::pair<double, double>> table_;
};

struct TransitConfig {
    Vec2 impact_fractional{0.0, 0.0};       // hexagon centre
    double start_height = 6e-10;            // m above the plane
    double timestep = 15e-18;               // s
    double interaction_halfwidth = 1.7e-10; // m
    std::size_t max_steps = 500000;
    double drift_tolerance = 1e-4;          // relative total-energy drift limit
    bool record_trajectory = true;
    int trajectory_stride = 1;

    void validate() const {
        if (!(timestep > 0.0)) throw ConfigError("transit timestep must be positive");
        if (!(start_height > interaction_halfwidth))
            throw ConfigError("start height must exceed the interaction halfwidth");
        if (trajectory_stride < 1) throw ConfigError("trajectory stride must be >= 1");
    }
};

struct TrajectorySample {
    double t = 0.0;  // s
    Vec3 position;
    Vec3 velocity;
    std::vector<Vec3> carbon_momenta;  // kg m/s, one per supercell site
};

struct TransitResult {
    bool transmitted = false;
    bool reflected = false;
    bool entered_interaction = false;

    double delta_p_net = 0.0;       // |sum of lateral momenta|, six nearest, at exit
    double delta_p_per_atom = 0.0;  // mean |lateral momentum| over the six nearest, at exit
    double interaction_time = std::numeric_limits<double>::quiet_NaN();  // s
    double entry_time = std::numeric_limits<double>::quiet_NaN();
    double exit_time = std::numeric_limits<double>::quiet_NaN();

    double energy_loss_nuclear_ev = 0.0;     // carbon kinetic energy at the end
    double energy_loss_electronic_ev = 0.0;  // filled in from the stopping table by callers
    double energy_drift_rel = 0.0;           // max |E(t)-E(0)|/E(0)

    Vec2 projectile_lateral_dp{0.0, 0.0};    // kg m/s
    Vec2 carbon_lateral_sum_all{0.0, 0.0};   // kg m/s, all sites, end of run
    std::vector<Vec3> exit_carbon_momenta;   // snapshot at interaction exit (or end of run)
    std::vector<std::size_t> hexagon_sites;  // indices of the six nearest sites

    std::vector<TrajectorySample> trajectory;
};

struct DecoherenceCriterion {
    double p0 = 2.1e-23;  // kg m/s, in-plane momentum uncertainty of C in graphene

    double carbon_rms_speed() const { return p0 / constants::mass_carbon; }
};

enum class Coherence { coherent, decohering };

inline Coherence decoherence_check(double dp, const DecoherenceCriterion& crit = {}) {
    if (dp < 0.0) throw ConfigError("momentum transfer must be non-negative");
    return dp < crit.p0 ? Coherence::coherent : Coherence::decohering;
}

namespace detail {

struct Forces {
    Vec3 projectile;
    std::vector<Vec3> carbons;
    double potential = 0.0;
};

inline void compute_forces(const Vec3& rp, const std::vector<Vec3>& carbons, const PotentialModel& pot, Forces& f) {
    f.projectile = {0.0, 0.0, 0.0};
    f.potential = 0.0;
    f.carbons.assign(carbons.size(), Vec3{});
    const double rc = pot.cutoff();
    for (std::size_t i = 0; i < carbons.size(); ++i) {
        const Vec3 d = rp - carbons[i];
        const double r2 = d.dot(d);
        if (r2 >= rc * rc) continue;
        const double r = std::sqrt(r2);
        double v, dv;
        pot.eval(r, v, dv);
        f.potential += v;
        const Vec3 fi = d * (-dv / r);  // on the projectile
        f.projectile += fi;
        f.carbons[i] = f.carbons[i] - fi;
    }
}

}  // namespace detail

// Integrate a trajectory from an arbitrary initial state. simulate_transit
// below sets up the standard normal-incidence start.
inline TransitResult run_trajectory(const beamline::Beam& beam, const Supercell& cell, const PotentialModel& pot,
                                    const TransitConfig& cfg, const Vec3& position0, const Vec3& velocity0) {
    cfg.validate();
    const double m = beam.species.mass;
    const double mc = cell.carbon_mass;
    const double dt = cfg.timestep;
    const double half = cfg.interaction_halfwidth;

    Vec3 rp = position0;
    Vec3 vp = velocity0;
    std::vector<Vec3> xc = cell.positions;
    std::vector<Vec3> vc(xc.size());

    detail::Forces f;
    detail::compute_forces(rp, xc, pot, f);

    const double e0 = 0.5 * m * vp.dot(vp) + f.potential;
    if (!(e0 > 0.0)) throw ConfigError("initial projectile energy must be positive");

    TransitResult res;
    res.hexagon_sites = cell.nearest_sites({position0.x, position0.y}, 6);

    auto record = [&](double t) {
        TrajectorySample s;
        s.t = t;
        s.position = rp;
        s.velocity = vp;
        s.carbon_momenta.reserve(vc.size());
        for (const Vec3& v : vc) s.carbon_momenta.push_back(v * mc);
        res.trajectory.push_back(std::move(s));
    };
    if (cfg.record_trajectory) record(0.0);

    double t = 0.0;
    double prev_z = rp.z;
    bool exit_captured = false;
    std::size_t step = 0;
    while (true) {
        if (++step > cfg.max_steps) throw NumericalError("transit exceeded the step budget without terminating");
        const Vec3 vp_half = vp + f.projectile * (0.5 * dt / m);
        rp = rp + vp_half * dt;
        for (std::size_t i = 0; i < xc.size(); ++i) {
            const Vec3 vh = vc[i] + f.carbons[i] * (0.5 * dt / mc);
            xc[i] = xc[i] + vh * dt;
            vc[i] = vh;
        }
        detail::compute_forces(rp, xc, pot, f);
        vp = vp_half + f.projectile * (0.5 * dt / m);
        double carbon_ke = 0.0;
        for (std::size_t i = 0; i < vc.size(); ++i) {
            vc[i] = vc[i] + f.carbons[i] * (0.5 * dt / mc);
            carbon_ke += 0.5 * mc * vc[i].dot(vc[i]);
        }
        t += dt;

        const double e_tot = 0.5 * m * vp.dot(vp) + carbon_ke + f.potential;
        res.energy_drift_rel = std::max(res.energy_drift_rel, std::abs(e_tot - e0) / e0);

        const double z = rp.z;
        if (prev_z > half && z <= half) {
            res.entry_time = t - dt + dt * (prev_z - half) / (prev_z - z);
            res.entered_interaction = true;
        }
        if (prev_z > -half && z <= -half && !exit_captured) {
            res.exit_time = t - dt + dt * (prev_z + half) / (prev_z - z);
            res.exit_carbon_momenta.clear();
            res.exit_carbon_momenta.reserve(vc.size());
            for (const Vec3& v : vc) res.exit_carbon_momenta.push_back(v * mc);
            exit_captured = true;
        }
        prev_z = z;

        if (cfg.record_trajectory && (step % static_cast<std::size_t>(cfg.trajectory_stride) == 0)) record(t);

        if (z < -cfg.start_height) {
            res.transmitted = exit_captured;
            break;
        }
        if (z > cfg.start_height && vp.z > 0.0) {
            res.reflected = true;
            break;
        }
    }

    if (!exit_captured) {
        res.exit_carbon_momenta.clear();
        res.exit_carbon_momenta.reserve(vc.size());
        for (const Vec3& v : vc) res.exit_carbon_momenta.push_back(v * mc);
    }

    Vec2 net{0.0, 0.0};
    double per_atom = 0.0;
    for (std::size_t i : res.hexagon_sites) {
        const Vec2 p = res.exit_carbon_momenta[i].lateral();
        net = net + p;
        per_atom += p.norm();
    }
    res.delta_p_net = net.norm();
    if (!res.hexagon_sites.empty()) per_atom /= static_cast<double>(res.hexagon_sites.size());
    res.delta_p_per_atom = per_atom;

    if (res.entered_interaction && exit_captured) res.interaction_time = res.exit_time - res.entry_time;

    double carbon_ke = 0.0;
    Vec2 all_sum{0.0, 0.0};
    for (const Vec3& v : vc) {
        carbon_ke += 0.5 * mc * v.dot(v);
        all_sum = all_sum + (v * mc).lateral();
    }
    res.energy_loss_nuclear_ev = carbon_ke / constants::ev;
    res.carbon_lateral_sum_all = all_sum;
    res.projectile_lateral_dp = {m * vp.x - m * velocity0.x, m * vp.y - m * velocity0.y};

    if (res.energy_drift_rel > cfg.drift_tolerance)
        throw NumericalError("transit integration drifted beyond the energy tolerance");
    return res;
}

// Standard run: projectile starts start_height above the plane over the
// configured impact point and moves straight down.
inline TransitResult simulate_transit(const beamline::Beam& beam, const Supercell& cell, const PotentialModel& pot,
                                      const TransitConfig& cfg) {
    cfg.validate();
    if (!(beam.energy_ev > 0.0)) throw ConfigError("beam energy must be positive");
    lattice::DirectLattice lat;
    lat.a = cell.lattice_constant;
    const Vec2 impact =
        lat.basis1() * cfg.impact_fractional.x + lat.basis2() * cfg.impact_fractional.y;
    const double v0 = std::sqrt(2.0 * beam.energy_ev * constants::ev / beam.species.mass);
    return run_trajectory(beam, cell, pot, cfg, Vec3{impact.x, impact.y, cfg.start_height},
                          Vec3{0.0, 0.0, -v0});
}

// Net lateral momentum transferred to the six sites around the impact point.
inline double momentum_transfer(const TransitResult& res, const Supercell&) { return res.delta_p_net; }

inline double interaction_time(const TransitResult& res, const TransitConfig&) {
    if (!(res.entered_interaction && res.transmitted))
        throw NumericalError("interaction time undefined for a non-transmitting trajectory");
    return res.exit_time - res.entry_time;
}

}  // namespace hexring::transit
