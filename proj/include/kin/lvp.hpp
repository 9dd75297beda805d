#pragma once
#include <array>
#include <vector>

#include "kin/vp.hpp"

namespace kin {

using Mat6 = std::array<double, 36>;  // row-major

// Snapshot of the Newtonian ensemble plus first-order correction data at one
// time, laid out for pair loops. Lagrangian data (dy, dy_rate, dlnw) describe
// the displaced/reweighted particles y + c^-2 dy, w (1 + c^-2 dlnw).
struct DarwinSources {
    std::vector<double> x, y, z;     // positions
    std::vector<double> px, py, pz;  // momenta (= velocities)
    std::vector<double> ax, ay, az;  // accelerations -grad phi2
    std::vector<double> jx, jy, jz;  // jerks (optional, for d_t phi4)
    std::vector<double> w;
    std::vector<double> dyx, dyy, dyz;     // Lagrangian displacement
    std::vector<double> dvx, dvy, dvz;     // its rate
    std::vector<double> dlnw, stilde;      // log-weight correction and its rate
    std::vector<double> f2ratio;           // Eulerian f2/f0 per particle
    size_t n = 0;
    bool lagrangian = true;  // which phi4 realisation to evaluate
    bool has_jerk = false;
};

struct DarwinFields {
    double phi2 = 0, dt_phi2 = 0;
    Vec3 grad2;
    Sym3 hess2;
    double phi4 = 0, dt_phi4 = 0;
    Vec3 grad4;
    Vec3 grad4_linear;  // the |z|-kernel part alone
};

enum DarwinWant : unsigned { kD2 = 1, kD2Hess = 2, kD4 = 4, kD4Dt = 8 };

// Pairwise Darwin fields at a target (softened kernels, self term skipped).
DarwinFields darwin_fields_at(const Vec3& x, const DarwinSources& s, double eps2, unsigned want,
                              size_t skip = static_cast<size_t>(-1));

struct LVPState {
    VPState vp;
    BumpSpec bump;               // for the exact initial gradient
    std::vector<double> f2;      // Eulerian correction carried on VP particles (aux column)
    std::vector<Mat6> jac;       // d Z(t) / d Z(0)
    std::vector<std::array<double, 6>> grad0;  // grad f0 at Z(0)
    std::vector<Vec3> dy, dp;    // Lagrangian correction
    std::vector<double> dlnw;
    bool eulerian = true;        // carry f2 and the Jacobians
    bool phi4_coupling = true;   // off: drop the grad phi4 terms (diagnostics)
};

LVPState lvp_init(const VPState& vp0, const BumpSpec& bump, bool eulerian = true);

// Exact grad f0 at the particle's current phase point (Jacobian transport).
void lvp_grad_f0(const LVPState& s, size_t k, Vec3& gx, Vec3& gp);

// Source of the correction equation without the grad phi4 . grad_p f0 coupling:
// 4 f0 S + (p^2/2) p . gx + (S p - (p^2/2) grad phi2) . gp.
double lvp_source(double f0, const Vec3& p, double stilde, const Vec3& grad_phi2, const Vec3& gx, const Vec3& gp);
double lvp_source(const LVPState& s, size_t k);

// RK4 step of VP, f2 (with phi4 refreshed at every stage) and the Lagrangian
// correction along the same characteristics.
LVPState lvp_step(const LVPState& s, double dt);

DarwinSources darwin_sources(const LVPState& s, bool lagrangian, bool with_jerk);

// phi4 and grad phi4 at targets via the pairwise (differentiated kernel) path.
struct Phi4Result {
    std::vector<double> value;
    std::vector<Vec3> grad, grad_linear;
};
Phi4Result phi4_evaluate(const LVPState& s, const std::vector<Vec3>& targets, bool lagrangian);

// Same quantity through the generic kernels: newtonian_potential on the mu2
// weights and linear_kernel_potential on d_t^2 mu0, the derivative
// distributions realised as signed point clusters of spread eta.
Phi4Result phi4_point_clusters(const LVPState& s, const std::vector<Vec3>& targets, bool lagrangian,
                               double eta);

// Stored frames of an LVP run for interpolation at arbitrary times.
struct LVPRun {
    std::vector<LVPState> states;
    TrajectoryFrames vp_frames;
    std::vector<std::vector<Vec3>> dy, dv;     // Lagrangian displacement and rate
    std::vector<std::vector<double>> dlnw, stilde;
    double dt = 0;
    // Interpolated Darwin sources at time s (quintic VP, cubic corrections).
    DarwinSources sources_at(double s, bool with_jerk = false) const;
};
LVPRun lvp_run(const LVPState& s0, double dt, int n);

}  // namespace kin
