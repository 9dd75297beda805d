#include "kin/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "kin/errors.hpp"

namespace kin::quad {

Rule1D gauss_legendre(int n, double a, double b) {
    if (n < 1) throw Error(ErrorKind::InvalidInput, "gauss_legendre: n must be >= 1");
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = 0;
            for (int k = 1; k <= n; ++k) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1) * t * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (t * p0 - p1) / (t * t - 1);
            double dt = p0 / dp;
            t -= dt;
            if (std::fabs(dt) < 1e-16) break;
        }
        // recompute derivative at converged node
        double p0 = 1, p1 = 0;
        for (int k = 1; k <= n; ++k) {
            double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * k - 1) * t * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (t * p0 - p1) / (t * t - 1);
        double w = 2.0 / ((1 - t * t) * dp * dp);
        r.x[i] = mid - half * t;
        r.x[n - 1 - i] = mid + half * t;
        r.w[i] = r.w[n - 1 - i] = half * w;
    }
    return r;
}

SphereRule sphere_rule(int n_theta, int n_phi) {
    auto g = gauss_legendre(n_theta);
    SphereRule s;
    const double dphi = 2 * std::numbers::pi / n_phi;
    for (int i = 0; i < n_theta; ++i) {
        double ct = g.x[i], st = std::sqrt(std::fmax(0.0, 1 - ct * ct));
        for (int j = 0; j < n_phi; ++j) {
            double ph = (j + 0.5) * dphi;
            s.dir.push_back({st * std::cos(ph), st * std::sin(ph), ct});
            s.w.push_back(g.w[i] * dphi);
        }
    }
    return s;
}

}  // namespace kin::quad
