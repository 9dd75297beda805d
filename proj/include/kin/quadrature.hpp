#pragma once
#include <vector>

#include "kin/vec3.hpp"

namespace kin::quad {

struct Rule1D {
    std::vector<double> x, w;
};

// Gauss-Legendre nodes and weights mapped to [a, b].
Rule1D gauss_legendre(int n, double a = -1.0, double b = 1.0);

// Product rule on the unit sphere: Gauss-Legendre in cos(theta) times
// trapezoid in azimuth. Weights sum to 4*pi.
struct SphereRule {
    std::vector<Vec3> dir;
    std::vector<double> w;
};
SphereRule sphere_rule(int n_theta, int n_phi);

}  // namespace kin::quad
