#pragma once
#include <vector>

#include "kin/config.hpp"
#include "kin/darwin.hpp"

namespace kin {

// Single-density Darwin system: particles carry f*, weights evolve with
// (ln w)' = S* and the fields psi* (scalar force, ~ d_t phi) and E* (~ grad phi)
// are given by pair sums with z = y_j - x, R = |z|_eps, zb = z / R.
struct DVNState {
    double t = 0;
    double c = 8;
    Softening soft;
    ParticleEnsemble ens;        // w = current weight, carried = f*
    std::vector<double> psi;     // at the particles, self term excluded
    std::vector<Vec3> e;
    Streaming streaming = Streaming::Full;
    double fp_tol = 1e-10;
    int fp_max_iter = 20;
    int iterations = 0;          // E* sweeps used by the last fixed point
    double contraction = 0;      // ratio of the last two sweep changes
    double fp_change = 0;
};

// 1 - p^2 / 2c^2, the weight of mu*.
double mu_star_factor(const Vec3& p, double c);

// psi*(x) = c^-2 sum_j w_j zb.p_j / R^2 at each target.
std::vector<double> psi_star_eval(const ParticleEnsemble& e, const std::vector<Vec3>& targets, double c,
                                  const Softening& soft, bool exclude_self = false);

// Right side of the E* representation at targets, for given particle values
// (psi_j, E_j): -c^-2 sum w mu zb/R^2 + (1/2c^4) sum w mu (-2(zb.p)p + 3(zb.p)^2 zb
// - p^2 zb)/R^2 - (1/2c^4) sum w/R {(1 - zb zb)[(psi + p.E)p + c^2 mu E]
// + (zb(zb.p) - p)(psi + p.E)}. The (psi + p.E) parts cancel, which the
// implementation uses; `displayed` evaluates the unreduced form.
std::vector<Vec3> e_star_eval(const ParticleEnsemble& ens, const std::vector<double>& psi,
                              const std::vector<Vec3>& e, const std::vector<Vec3>& targets, double c,
                              const Softening& soft, bool exclude_self = false, bool displayed = false);

// Resolve psi* and the E* fixed point at the particles of s (starting from
// s.e when sized, else from the leading Newtonian term). Raises
// NonConvergence when the sweeps do not contract.
void dvn_resolve(DVNState& s);

// Initial fields from f at t = 0.
DVNState dvn_init(const ParticleEnsemble& f0, double c, const Softening& soft, double fp_tol = 1e-10,
                  int fp_max_iter = 20, Streaming streaming = Streaming::Full);

struct DVNRates {
    Vec3 xdot, pdot;
    double s = 0;  // psi + p.E
};
DVNRates dvn_rates(const Vec3& p, double c, double psi, const Vec3& e, Streaming streaming);

// Classic RK4 of the characteristics with the fixed point resolved at every stage.
DVNState dvn_step(const DVNState& s, double dt);

// phi* = c^-2 sum_j -w_j mu_j / R_j  -  (1/2c^4) sum_j d/dt [w_j zb_j . p_j]
// (the second term is the |z| kernel applied to div d_t j*, integrated by
// parts, with the time derivative taken along the characteristics).
struct PhiStar {
    double phi = 0;
    Vec3 grad;
    double dt_lead = 0;  // d_t of the c^-2 part
    double phi4 = 0;     // the c^-4 part alone
};
std::vector<PhiStar> phi_star_eval(const DVNState& s, const std::vector<Vec3>& targets);

// Fields at arbitrary targets from the resolved particle values.
struct DVNProbe {
    double psi = 0;
    Vec3 e;
};
std::vector<DVNProbe> dvn_probe_fields(const DVNState& s, const std::vector<Vec3>& targets);

// Run n steps; stops early (blew_up set) once sup |E*| exceeds 10x its initial value.
struct DVNRun {
    std::vector<DVNState> states;
    bool blew_up = false;
};
DVNRun dvn_run(const DVNState& s0, double dt, int n);

}  // namespace kin
