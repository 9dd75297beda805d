#pragma once
#include <string>
#include <vector>

#include "kin/ensemble.hpp"
#include "kin/kernels.hpp"

namespace kin {

struct VPState {
    double t = 0;
    ParticleEnsemble ens;  // carried = f0, constant in time
    Softening soft;
};

// grad phi2 at every particle, self term excluded.
std::vector<Vec3> vp_forces(const std::vector<Vec3>& x, const std::vector<double>& w, const Softening& soft);
// d/dt grad phi2(y_k(t)) along the particle motion, self term excluded.
std::vector<Vec3> vp_force_rates(const std::vector<Vec3>& x, const std::vector<Vec3>& p,
                                 const std::vector<double>& w, const Softening& soft);

// Classic RK4 of x' = p, p' = -grad phi2(x); sources move with the stage state.
// dt may be negative (backward integration).
VPState vp_step(const VPState& s, double dt);

// Total kinetic plus pair potential: sum w p^2/2 + 1/2 sum w phi2(y_k).
double vp_energy(const VPState& s);
Vec3 vp_momentum(const VPState& s);

// Returns {d_t mu0, d_t^2 mu0, d_t^3 mu0} truncated to the requested order.
std::vector<GridField> vp_time_derivatives(const VPState& s, const GridSpec& g, int order);

// sum_k w_k grad phi2(y_k) / (sum w * sup |grad phi2|).
Vec3 rad_identity_residual(const VPState& s);

struct OrtResiduals {
    double mass = 0;
    Vec3 moment;
};
OrtResiduals ort_residuals(const VPState& s, const GridSpec& g);

// Stored step-time frames of a particle run with piecewise quintic Hermite
// interpolation in time (positions, velocities, accelerations).
struct TrajectoryFrames {
    std::vector<double> t;
    std::vector<std::vector<Vec3>> x, v, a;

    void append(double time, std::vector<Vec3> xs, std::vector<Vec3> vs, std::vector<Vec3> as);
    size_t frames() const { return t.size(); }
    // Interpolated state of every particle at time s within the stored span.
    void at(double s, std::vector<Vec3>& xs, std::vector<Vec3>& vs, std::vector<Vec3>& as) const;
    size_t segment(double s) const;
};

struct VPRun {
    std::vector<VPState> states;  // one per step time
    TrajectoryFrames frames;
};
// Integrate n steps of size dt (signed) and keep every step.
VPRun vp_run(const VPState& s0, double dt, int n);

}  // namespace kin
