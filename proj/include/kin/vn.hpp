#pragma once
#include <cstdint>
#include <functional>
#include <vector>

#include "kin/darwin.hpp"
#include "kin/lvp.hpp"

namespace kin {

// Particle world lines sampled at uniformly spaced times. Each frame stores,
// per particle, position X, velocity V, acceleration A, source strength
// Q = w gamma and its rate. Between frames X is the quintic Hermite
// interpolant and Q the cubic one; the last segment may be extrapolated by up
// to one spacing.
struct WorldLines {
    static constexpr int kStride = 11;
    static constexpr int kCoef = 22;  // quintic X (6 x 3) and cubic Q (4) per segment
    double t0 = 0, dt = 0;
    size_t n = 0;
    std::vector<std::vector<double>> frames;
    std::vector<double> coef;  // unit-variable monomials of segment m, particle j at (m n + j) kCoef
    std::vector<double> head;  // X, V of the newest frame, component-major

    size_t count() const { return frames.size(); }
    double t_first() const { return t0; }
    double t_last() const { return t0 + dt * static_cast<double>(count() - 1); }
    void append(const std::vector<Vec3>& X, const std::vector<Vec3>& V, const std::vector<Vec3>& A,
                const std::vector<double>& q, const std::vector<double>& qd);
    // Overwrite A and Q' of the newest frame.
    void update_last(const std::vector<Vec3>& A, const std::vector<double>& qd);
    void state(size_t j, double s, Vec3& X, Vec3& V, Vec3& A, double& q, double& qd) const;
};

struct VNFields {
    std::vector<double> phi, dt_phi;
    std::vector<Vec3> grad;
    void resize(size_t n);
};

// Retarded field of the world lines at (t, x): the sum over sources of the
// softened Lienard-Wiechert form -c^-2 Q / (R - r.V/c) at the retarded time s
// with c (t - s) = R = |x - X(s)|_eps, together with its exact t- and
// x-derivatives. With truncate set, sources whose retarded time precedes the
// first frame contribute nothing; otherwise that is an error.
struct RetardedOptions {
    size_t skip = static_cast<size_t>(-1);
    bool truncate = false;
    double split = -1e300;                      // contributions with s > split go to *near
    FieldValue* near = nullptr;
    std::vector<std::uint32_t>* near_index = nullptr;
};
FieldValue vn_field_eval(const WorldLines& h, double c, double eps, double t, const Vec3& x,
                         const RetardedOptions& opt = {});
// Contribution of the single source j.
FieldValue vn_pair_field(const WorldLines& h, double c, double eps, double t, const Vec3& x, size_t j,
                         bool truncate = false);

// Homogeneous wave solution -u_tt + c^2 Lap u = 0 with u(0) = phi0, u_t(0) =
// phi1, by spherical means of the data over radius c t.
struct WaveData {
    std::function<void(const Vec3&, double&, Vec3&, Sym3&)> phi0;  // value, gradient, Hessian
    std::function<void(const Vec3&, double&, Vec3&)> phi1;         // value, gradient (may be empty)
};
FieldValue kirchhoff_data(const WaveData& data, double c, double t, const Vec3& x, int n_theta = 48,
                          int n_phi = 96);

struct VNState {
    double t = 0;
    double c = 8;
    Softening soft;
    ParticleEnsemble ens;  // w = current weight, carried = f
    WorldLines history;
    VNFields fields;       // at the particles, self term excluded
    double fp_tol = 1e-10;
    int fp_max_iter = 20;
    int iterations = 0;    // evaluations used by the last fixed point
    double contraction = 0;
    double fp_change = 0;  // last sup change relative to the field scale
};

double vn_gamma(const Vec3& p, double c);

// Initial state from a Newtonian ensemble at t = 0 and a backward LVP run of
// the same particles (dt < 0). The run provides the world lines for s < 0:
// positions y + c^-2 dy, strengths w (1 + c^-2 dlnw) gamma.
VNState vn_init(const VPState& vp0, const LVPRun& backward, double c, double fp_tol = 1e-10,
                int fp_max_iter = 20);
// Same with particles frozen at their t = 0 positions for s < 0 (tests).
VNState vn_init_frozen(const VPState& vp0, double c, double dt, int frames, double fp_tol = 1e-10,
                       int fp_max_iter = 20);

// Resolve fields and the newest frame's A, Q' at the current time.
void vn_resolve(VNState& s);

// Classic RK4 of x' = gamma p, p' = -(S p + gamma c^2 grad phi), (ln w)' = S,
// (ln f)' = 4 S, S = d_t phi + gamma p . grad phi; appends a frame.
// dt must equal the history spacing.
VNState vn_step(VNState s);

// Right-hand side of the characteristics for given d_t phi and grad phi.
struct VNRates {
    Vec3 xdot, pdot;
    double s = 0;
};
VNRates vn_rates(const Vec3& p, double c, double dt_phi, const Vec3& grad);

// c^2 sum w sqrt(1 + p^2/c^2) + c^2/(8 pi) int (|d_t phi|^2 + c^2 |grad phi|^2).
// The particles feel the softened field at a point, so the static part of the
// field energy that matches their dynamics is the pair sum 1/2 sum Q_i Q_j / R_ij
// (self terms included), not the box integral of |grad phi|^2 for the Plummer
// fields (that one has a doubly smoothed kernel). `field` is that pair sum over
// all space plus the box integral of the retarded-minus-instantaneous remainder;
// `field_box` is the plain box integral, with `tail` ~ Q^2 / (half width) outside it.
struct VNEnergy {
    double matter = 0, field = 0, field_box = 0, tail = 0;
    double total() const { return matter + field; }
};
VNEnergy energy_vn(const VNState& s, const GridSpec& box);

}  // namespace kin
