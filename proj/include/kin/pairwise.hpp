#pragma once
#include <cmath>
#include <cstddef>
#include <vector>

#include "kin/vec3.hpp"

namespace kin::pairwise {

// Newtonian softened field of point sources y_j with weights w_j moving with
// velocities v_j:  phi(x) = -sum w_j / R_j,  R_j = sqrt(|x - y_j|^2 + eps^2).
// Structure-of-arrays copy so the inner loops vectorise.
struct Sources {
    std::vector<double> x, y, z, vx, vy, vz, w;
    size_t n = 0;

    Sources() = default;
    Sources(const std::vector<Vec3>& pos, const std::vector<Vec3>* vel, const std::vector<double>& wts) {
        set(pos, vel, wts);
    }
    void set(const std::vector<Vec3>& pos, const std::vector<Vec3>* vel, const std::vector<double>& wts) {
        n = pos.size();
        x.resize(n), y.resize(n), z.resize(n), w.assign(wts.begin(), wts.end());
        for (size_t j = 0; j < n; ++j) x[j] = pos[j].x, y[j] = pos[j].y, z[j] = pos[j].z;
        if (vel) {
            vx.resize(n), vy.resize(n), vz.resize(n);
            for (size_t j = 0; j < n; ++j) vx[j] = (*vel)[j].x, vy[j] = (*vel)[j].y, vz[j] = (*vel)[j].z;
        }
    }
};

struct Field {
    double phi = 0;
    Vec3 grad;
    Sym3 hess;
    double dt_phi = 0;   // time derivative through source motion
    Vec3 dt_grad;
};

enum Want : unsigned { kPhi = 1, kGrad = 2, kHess = 4, kDt = 8, kDtGrad = 16 };

namespace detail {
template <unsigned W>
inline void accumulate(const Vec3& x, const Sources& s, double eps2, size_t j0, size_t j1, double acc[17]) {
    double phi = 0, gx = 0, gy = 0, gz = 0;
    double hxx = 0, hyy = 0, hzz = 0, hxy = 0, hxz = 0, hyz = 0;
    double dtp = 0, dgx = 0, dgy = 0, dgz = 0;
    const double* __restrict sx = s.x.data();
    const double* __restrict sy = s.y.data();
    const double* __restrict sz = s.z.data();
    const double* __restrict sw = s.w.data();
    const double* __restrict vx = s.vx.data();
    const double* __restrict vy = s.vy.data();
    const double* __restrict vz = s.vz.data();
    for (size_t j = j0; j < j1; ++j) {
        const double rx = x.x - sx[j], ry = x.y - sy[j], rz = x.z - sz[j];
        const double r2 = rx * rx + ry * ry + rz * rz + eps2;
        const double inv = 1.0 / std::sqrt(r2);
        const double w = sw[j];
        const double inv3 = w * inv * inv * inv;
        if constexpr (W & kPhi) phi -= w * inv;
        if constexpr (W & kGrad) {
            gx += rx * inv3;
            gy += ry * inv3;
            gz += rz * inv3;
        }
        if constexpr ((W & kHess) || (W & kDtGrad)) {
            const double inv5 = 3.0 * inv3 * inv * inv;
            if constexpr (W & kHess) {
                hxx += inv3 - inv5 * rx * rx;
                hyy += inv3 - inv5 * ry * ry;
                hzz += inv3 - inv5 * rz * rz;
                hxy -= inv5 * rx * ry;
                hxz -= inv5 * rx * rz;
                hyz -= inv5 * ry * rz;
            }
            if constexpr (W & kDtGrad) {
                // d/dt of r/R^3 with r' = -v_j
                const double rv = rx * vx[j] + ry * vy[j] + rz * vz[j];
                dgx += -vx[j] * inv3 + inv5 * rx * rv;
                dgy += -vy[j] * inv3 + inv5 * ry * rv;
                dgz += -vz[j] * inv3 + inv5 * rz * rv;
            }
        }
        if constexpr (W & kDt) dtp -= (rx * vx[j] + ry * vy[j] + rz * vz[j]) * inv3;
    }
    double v[17] = {phi, gx, gy, gz, hxx, hyy, hzz, hxy, hxz, hyz, dtp, dgx, dgy, dgz, 0, 0, 0};
    for (int i = 0; i < 14; ++i) acc[i] += v[i];
}
}  // namespace detail

// skip: index of a source to leave out (self-interaction), or SIZE_MAX.
template <unsigned W>
inline Field evaluate(const Vec3& x, const Sources& s, double eps2, size_t skip = static_cast<size_t>(-1)) {
    double acc[17] = {};
    if (skip < s.n) {
        detail::accumulate<W>(x, s, eps2, 0, skip, acc);
        detail::accumulate<W>(x, s, eps2, skip + 1, s.n, acc);
    } else {
        detail::accumulate<W>(x, s, eps2, 0, s.n, acc);
    }
    Field f;
    f.phi = acc[0];
    f.grad = {acc[1], acc[2], acc[3]};
    f.hess = {acc[4], acc[5], acc[6], acc[7], acc[8], acc[9]};
    f.dt_phi = acc[10];
    f.dt_grad = {acc[11], acc[12], acc[13]};
    return f;
}

}  // namespace kin::pairwise
