#pragma once
#include <limits>
#include <vector>

#include "kin/lvp.hpp"

namespace kin {

// Values of c^-2 phi2 + c^-4 phi4 and derivatives at a point.
struct FieldValue {
    double phi = 0, dt_phi = 0;
    Vec3 grad;
};

// f^D = f0 + c^-2 f2, phi^D = c^-2 phi2 + c^-4 phi4 on one VP/LVP snapshot.
// c = infinity is allowed and switches the corrections off.
struct DarwinState {
    double c = std::numeric_limits<double>::infinity();
    LVPState lvp;
    double inv_c2() const { return 1.0 / (c * c); }
    std::vector<double> f_values() const;                       // per particle, needs Eulerian f2
    std::vector<FieldValue> fields(const std::vector<Vec3>& targets) const;
};

DarwinState assemble_darwin(const VPState& vp, const LVPState& lvp, double c);

// Data for the full system at t = 0: phi0 = phi^D(0), phi1 = d_t phi^D(0).
struct MatchedInitialData {
    BumpSpec bump;
    double c = 8;
    double eps2 = 0;
    DarwinSources sources;  // t = 0 sources with jerks
    double phi0(const Vec3& x) const;
    double phi1(const Vec3& x) const;
    Vec3 grad_phi0(const Vec3& x) const;
    FieldValue at(const Vec3& x) const;
};

MatchedInitialData matched_initial_data(const VPState& vp0, const LVPState& lvp0, double c);

// f0 and f2 at arbitrary phase points at time t, by tracing the VP
// characteristic back to t = 0 and integrating the correction source along it.
// The result is c-independent; f^D = f0 + c^-2 f2.
struct DensityPair {
    double f0 = 0, f2 = 0;
};
std::vector<DensityPair> darwin_density_at(const LVPRun& run, double t, const std::vector<Vec3>& x,
                                           const std::vector<Vec3>& p, bool phi4_coupling = true);

// Light-cone split of grad phi^D, phi^D and d_t phi^D into exterior, interior
// (retarded) and boundary parts, evaluated on Gaussian-smoothed particles by
// radial Gauss-Legendre shells times sphere rules. "direct" is the full-space
// present-time integral of the same smoothed densities.
struct RepOptions {
    double sigma = 0.2;      // smoothing width
    double cutoff = 7.0;     // in units of sigma
    double panel = 1.0;      // radial panel length in units of sigma
    int gl_nodes = 8;
    double angular = 0.6;    // arc spacing on a shell in units of sigma
};
template <class T>
struct RepParts {
    T ext{}, interior{}, bd{}, direct{};
    T sum() const { return ext + interior + bd; }
};
struct RepResult {
    RepParts<Vec3> grad;
    RepParts<double> value, dt;
};
RepResult darwin_representation(const LVPRun& run, double c, double t, const Vec3& x, const RepOptions& opt = {});
RepParts<Vec3> darwin_gradient_representation(const LVPRun& run, double c, double t, const Vec3& x,
                                              const RepOptions& opt = {});
RepParts<double> darwin_time_derivative_representation(const LVPRun& run, double c, double t, const Vec3& x,
                                                       const RepOptions& opt = {});

}  // namespace kin
