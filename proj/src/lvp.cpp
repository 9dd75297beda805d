#include "kin/lvp.hpp"

#include <cmath>

#include "kin/errors.hpp"
#include "kin/hermite.hpp"
#include "kin/kernels.hpp"
#include "kin/pairwise.hpp"

namespace kin {

DarwinFields darwin_fields_at(const Vec3& x, const DarwinSources& s, double eps2, unsigned want, size_t skip) {
    DarwinFields f;
    const bool lag = s.lagrangian;
    if ((want & kD4Dt) && (!lag || !s.has_jerk))
        throw Error(ErrorKind::NotPrepared, "d_t phi4 needs Lagrangian sources with jerks");
    double phi2 = 0, dt2 = 0, g2x = 0, g2y = 0, g2z = 0;
    double hxx = 0, hyy = 0, hzz = 0, hxy = 0, hxz = 0, hyz = 0;
    double phi4 = 0, dt4 = 0, g4x = 0, g4y = 0, g4z = 0, lx = 0, ly = 0, lz = 0;
    for (size_t j = 0; j < s.n; ++j) {
        if (j == skip) continue;
        const double rx = x.x - s.x[j], ry = x.y - s.y[j], rz = x.z - s.z[j];
        const double inv = 1.0 / std::sqrt(rx * rx + ry * ry + rz * rz + eps2);
        const double inv2 = inv * inv, inv3 = inv2 * inv;
        const double w = s.w[j];
        const double vx = s.px[j], vy = s.py[j], vz = s.pz[j];
        const double rv = rx * vx + ry * vy + rz * vz;
        if (want & (kD2 | kD2Hess)) {
            phi2 -= w * inv;
            g2x += w * rx * inv3;
            g2y += w * ry * inv3;
            g2z += w * rz * inv3;
            dt2 -= w * rv * inv3;
        }
        if (want & kD2Hess) {
            const double i5 = 3 * w * inv3 * inv2;
            hxx += w * inv3 - i5 * rx * rx;
            hyy += w * inv3 - i5 * ry * ry;
            hzz += w * inv3 - i5 * rz * rz;
            hxy -= i5 * rx * ry;
            hxz -= i5 * rx * rz;
            hyz -= i5 * ry * rz;
        }
        if (want & (kD4 | kD4Dt)) {
            const double p2 = vx * vx + vy * vy + vz * vz;
            const double m = (lag ? s.dlnw[j] : s.f2ratio[j]) - 0.5 * p2;
            phi4 -= w * m * inv;
            g4x += w * m * rx * inv3;
            g4y += w * m * ry * inv3;
            g4z += w * m * rz * inv3;
            double rd = 0;
            if (lag) {
                const double dx = s.dyx[j], dy = s.dyy[j], dz = s.dyz[j];
                rd = rx * dx + ry * dy + rz * dz;
                phi4 -= w * rd * inv3;
                const double i5 = 3 * rd * inv3 * inv2;
                g4x += w * (-dx * inv3 + rx * i5);
                g4y += w * (-dy * inv3 + ry * i5);
                g4z += w * (-dz * inv3 + rz * i5);
            }
            // |z| kernel: -1/2 d^2/dt^2 sum w |x - y_j|_eps, u = (y_j - x)/R
            const double ux = -rx * inv, uy = -ry * inv, uz = -rz * inv;
            const double ax = s.ax[j], ay = s.ay[j], az = s.az[j];
            const double up = ux * vx + uy * vy + uz * vz;
            const double ua = ux * ax + uy * ay + uz * az;
            phi4 -= 0.5 * w * ((p2 - up * up) * inv + ua);
            const double c1 = 0.5 * w * inv, c2 = 0.5 * w * inv2;
            const double gx = c1 * (ax - ux * ua) + c2 * (-2 * up * vx + (3 * up * up - p2) * ux);
            const double gy = c1 * (ay - uy * ua) + c2 * (-2 * up * vy + (3 * up * up - p2) * uy);
            const double gz = c1 * (az - uz * ua) + c2 * (-2 * up * vz + (3 * up * up - p2) * uz);
            g4x += gx;
            g4y += gy;
            g4z += gz;
            lx += gx;
            ly += gy;
            lz += gz;
            if (want & kD4Dt) {
                const double pa = vx * ax + vy * ay + vz * az;
                const double mdot = s.stilde[j] - pa;
                dt4 -= w * (mdot * inv + m * rv * inv3);
                const double vd = vx * s.dyx[j] + vy * s.dyy[j] + vz * s.dyz[j];
                const double rdd = rx * s.dvx[j] + ry * s.dvy[j] + rz * s.dvz[j];
                dt4 -= w * ((-vd + rdd) * inv3 + 3 * rd * rv * inv3 * inv2);
                const double uj = ux * s.jx[j] + uy * s.jy[j] + uz * s.jz[j];
                const double r3 = (3 * pa - 3 * up * ua) * inv + uj - 3 * up * (p2 - up * up) * inv2;
                dt4 -= 0.5 * w * r3;
            }
        }
    }
    f.phi2 = phi2;
    f.dt_phi2 = dt2;
    f.grad2 = {g2x, g2y, g2z};
    f.hess2 = {hxx, hyy, hzz, hxy, hxz, hyz};
    f.phi4 = phi4;
    f.dt_phi4 = dt4;
    f.grad4 = {g4x, g4y, g4z};
    f.grad4_linear = {lx, ly, lz};
    return f;
}

namespace {

std::array<double, 6> solve6(Mat6 A, std::array<double, 6> b) {
    // Gaussian elimination with partial pivoting
    for (int c = 0; c < 6; ++c) {
        int piv = c;
        for (int r = c + 1; r < 6; ++r)
            if (std::fabs(A[r * 6 + c]) > std::fabs(A[piv * 6 + c])) piv = r;
        if (A[piv * 6 + c] == 0) throw Error(ErrorKind::Singular, "singular characteristic Jacobian");
        if (piv != c) {
            for (int k = 0; k < 6; ++k) std::swap(A[c * 6 + k], A[piv * 6 + k]);
            std::swap(b[c], b[piv]);
        }
        for (int r = c + 1; r < 6; ++r) {
            double f = A[r * 6 + c] / A[c * 6 + c];
            for (int k = c; k < 6; ++k) A[r * 6 + k] -= f * A[c * 6 + k];
            b[r] -= f * b[c];
        }
    }
    for (int r = 5; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < 6; ++k) s -= A[r * 6 + k] * b[k];
        b[r] = s / A[r * 6 + r];
    }
    return b;
}

Mat6 identity6() {
    Mat6 m{};
    for (int i = 0; i < 6; ++i) m[i * 7] = 1;
    return m;
}

void fill_sources(DarwinSources& s, const std::vector<Vec3>& x, const std::vector<Vec3>& p,
                  const std::vector<Vec3>& a, const std::vector<double>& w) {
    const size_t n = x.size();
    s.n = n;
    for (auto* v : {&s.x, &s.y, &s.z, &s.px, &s.py, &s.pz, &s.ax, &s.ay, &s.az}) v->resize(n);
    s.w = w;
    for (size_t k = 0; k < n; ++k) {
        s.x[k] = x[k].x, s.y[k] = x[k].y, s.z[k] = x[k].z;
        s.px[k] = p[k].x, s.py[k] = p[k].y, s.pz[k] = p[k].z;
        s.ax[k] = a[k].x, s.ay[k] = a[k].y, s.az[k] = a[k].z;
    }
}

void fill_lagrangian(DarwinSources& s, const std::vector<Vec3>& dy, const std::vector<Vec3>& dv,
                     const std::vector<double>& dlnw, const std::vector<double>& stilde) {
    const size_t n = dy.size();
    for (auto* v : {&s.dyx, &s.dyy, &s.dyz, &s.dvx, &s.dvy, &s.dvz}) v->resize(n);
    for (size_t k = 0; k < n; ++k) {
        s.dyx[k] = dy[k].x, s.dyy[k] = dy[k].y, s.dyz[k] = dy[k].z;
        s.dvx[k] = dv[k].x, s.dvy[k] = dv[k].y, s.dvz[k] = dv[k].z;
    }
    s.dlnw = dlnw;
    s.stilde = stilde;
    s.lagrangian = true;
}

void fill_jerk(DarwinSources& s, const std::vector<Vec3>& x, const std::vector<Vec3>& p,
               const std::vector<double>& w, const Softening& soft) {
    auto rate = vp_force_rates(x, p, w, soft);
    s.jx.resize(s.n), s.jy.resize(s.n), s.jz.resize(s.n);
    for (size_t k = 0; k < s.n; ++k) s.jx[k] = -rate[k].x, s.jy[k] = -rate[k].y, s.jz[k] = -rate[k].z;
    s.has_jerk = true;
}

// Newtonian quantities at every particle (self excluded).
struct VPLocal {
    std::vector<Vec3> F;
    std::vector<Sym3> H;
    std::vector<double> stilde;
};

VPLocal vp_local(const std::vector<Vec3>& x, const std::vector<Vec3>& p, const std::vector<double>& w,
                 const Softening& soft) {
    pairwise::Sources src(x, &p, w);
    const double e2 = soft.eps * soft.eps;
    VPLocal out;
    const size_t n = x.size();
    out.F.resize(n), out.H.resize(n), out.stilde.resize(n);
    for (size_t k = 0; k < n; ++k) {
        auto f = pairwise::evaluate<pairwise::kGrad | pairwise::kHess | pairwise::kDt>(x[k], src, e2, k);
        out.F[k] = f.grad;
        out.H[k] = f.hess;
        out.stilde[k] = f.dt_phi + dot(p[k], f.grad);
    }
    return out;
}

struct Stage {
    std::vector<Vec3> x, p, dy, dp;
    std::vector<double> f2, dlnw;
    std::vector<Mat6> jac;
};

void axpy(Stage& out, const Stage& base, double h, const Stage& d) {
    const size_t n = base.x.size();
    out = base;
    for (size_t k = 0; k < n; ++k) {
        out.x[k] += h * d.x[k];
        out.p[k] += h * d.p[k];
        out.dy[k] += h * d.dy[k];
        out.dp[k] += h * d.dp[k];
        out.dlnw[k] += h * d.dlnw[k];
    }
    for (size_t k = 0; k < base.f2.size(); ++k) {
        out.f2[k] += h * d.f2[k];
        for (int i = 0; i < 36; ++i) out.jac[k][i] += h * d.jac[k][i];
    }
}

Vec3 grad_f0_x(const Mat6& J, const std::array<double, 6>& g0, Vec3& gp) {
    Mat6 JT;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) JT[i * 6 + j] = J[j * 6 + i];
    auto g = solve6(JT, g0);
    gp = {g[3], g[4], g[5]};
    return {g[0], g[1], g[2]};
}

Stage rates(const LVPState& s, const Stage& st) {
    const size_t n = st.x.size();
    const auto& w = s.vp.ens.w;
    const auto& soft = s.vp.soft;
    const double e2 = soft.eps * soft.eps;
    auto loc = vp_local(st.x, st.p, w, soft);
    std::vector<Vec3> acc(n);
    for (size_t k = 0; k < n; ++k) acc[k] = -loc.F[k];
    DarwinSources src;
    fill_sources(src, st.x, st.p, acc, w);
    std::vector<Vec3> dv(n);
    for (size_t k = 0; k < n; ++k) dv[k] = st.dp[k] - (0.5 * norm2(st.p[k])) * st.p[k];
    fill_lagrangian(src, st.dy, dv, st.dlnw, loc.stilde);

    Stage d;
    d.x = st.p;
    d.p = acc;
    d.dy = dv;
    d.dp.resize(n);
    d.dlnw = loc.stilde;
    for (size_t k = 0; k < n; ++k) {
        auto f = darwin_fields_at(st.x[k], src, e2, kD4, k);
        const double p2 = norm2(st.p[k]);
        d.dp[k] = -(loc.H[k] * st.dy[k]) - (s.phi4_coupling ? f.grad4 : Vec3{}) + (0.5 * p2) * loc.F[k] - loc.stilde[k] * st.p[k];
    }
    if (s.eulerian) {
        src.lagrangian = false;
        src.f2ratio.resize(n);
        for (size_t k = 0; k < n; ++k) src.f2ratio[k] = st.f2[k] / s.vp.ens.carried[k];
        d.f2.resize(n);
        d.jac.resize(n);
        for (size_t k = 0; k < n; ++k) {
            auto f = darwin_fields_at(st.x[k], src, e2, kD4, k);
            Vec3 gp, gx = grad_f0_x(st.jac[k], s.grad0[k], gp);
            d.f2[k] = lvp_source(s.vp.ens.carried[k], st.p[k], loc.stilde[k], loc.F[k], gx, gp) + (s.phi4_coupling ? dot(f.grad4, gp) : 0.0);
            // J' = [[0, I], [-H, 0]] J
            const Mat6& J = st.jac[k];
            Mat6& D = d.jac[k];
            for (int c = 0; c < 6; ++c) {
                for (int r = 0; r < 3; ++r) D[r * 6 + c] = J[(r + 3) * 6 + c];
                for (int r = 0; r < 3; ++r) {
                    double s2 = 0;
                    for (int q = 0; q < 3; ++q) s2 += loc.H[k](r, q) * J[q * 6 + c];
                    D[(r + 3) * 6 + c] = -s2;
                }
            }
        }
    }
    return d;
}

Stage to_stage(const LVPState& s) {
    return {s.vp.ens.x, s.vp.ens.p, s.dy, s.dp, s.f2, s.dlnw, s.jac};
}

}  // namespace

LVPState lvp_init(const VPState& vp0, const BumpSpec& bump, bool eulerian) {
    LVPState s;
    s.vp = vp0;
    s.bump = bump;
    s.eulerian = eulerian;
    const size_t n = vp0.ens.size();
    s.dy.assign(n, Vec3{});
    s.dp.assign(n, Vec3{});
    s.dlnw.assign(n, 0.0);
    if (eulerian) {
        s.f2.assign(n, 0.0);
        s.jac.assign(n, identity6());
        s.grad0.resize(n);
        for (size_t k = 0; k < n; ++k) {
            Vec3 gx, gp;
            bump::gradient(bump, vp0.ens.x[k], vp0.ens.p[k], gx, gp);
            s.grad0[k] = {gx.x, gx.y, gx.z, gp.x, gp.y, gp.z};
        }
    }
    return s;
}

void lvp_grad_f0(const LVPState& s, size_t k, Vec3& gx, Vec3& gp) {
    if (!s.eulerian) throw Error(ErrorKind::NotPrepared, "gradient reconstruction needs the Jacobian transport");
    gx = grad_f0_x(s.jac[k], s.grad0[k], gp);
}

double lvp_source(double f0, const Vec3& p, double stilde, const Vec3& grad_phi2, const Vec3& gx, const Vec3& gp) {
    const double h = 0.5 * norm2(p);
    return 4 * f0 * stilde + h * dot(p, gx) + dot(stilde * p - h * grad_phi2, gp);
}

double lvp_source(const LVPState& s, size_t k) {
    if (!s.eulerian) throw Error(ErrorKind::NotPrepared, "lvp_source needs the Jacobian transport");
    const auto& e = s.vp.ens;
    pairwise::Sources src(e.x, &e.p, e.w);
    const double e2 = s.vp.soft.eps * s.vp.soft.eps;
    auto f = pairwise::evaluate<pairwise::kGrad | pairwise::kDt>(e.x[k], src, e2, k);
    Vec3 gx, gp;
    lvp_grad_f0(s, k, gx, gp);
    return lvp_source(e.carried[k], e.p[k], f.dt_phi + dot(e.p[k], f.grad), f.grad, gx, gp);
}

LVPState lvp_step(const LVPState& s, double dt) {
    if (dt == 0) throw Error(ErrorKind::InvalidInput, "lvp_step: dt must be nonzero");
    Stage y0 = to_stage(s), tmp;
    Stage k1 = rates(s, y0);
    axpy(tmp, y0, 0.5 * dt, k1);
    Stage k2 = rates(s, tmp);
    axpy(tmp, y0, 0.5 * dt, k2);
    Stage k3 = rates(s, tmp);
    axpy(tmp, y0, dt, k3);
    Stage k4 = rates(s, tmp);
    Stage out = y0;
    const size_t n = y0.x.size();
    const double h = dt / 6;
    for (size_t k = 0; k < n; ++k) {
        out.x[k] += h * (k1.x[k] + 2.0 * k2.x[k] + 2.0 * k3.x[k] + k4.x[k]);
        out.p[k] += h * (k1.p[k] + 2.0 * k2.p[k] + 2.0 * k3.p[k] + k4.p[k]);
        out.dy[k] += h * (k1.dy[k] + 2.0 * k2.dy[k] + 2.0 * k3.dy[k] + k4.dy[k]);
        out.dp[k] += h * (k1.dp[k] + 2.0 * k2.dp[k] + 2.0 * k3.dp[k] + k4.dp[k]);
        out.dlnw[k] += h * (k1.dlnw[k] + 2 * k2.dlnw[k] + 2 * k3.dlnw[k] + k4.dlnw[k]);
    }
    for (size_t k = 0; k < y0.f2.size(); ++k) {
        out.f2[k] += h * (k1.f2[k] + 2 * k2.f2[k] + 2 * k3.f2[k] + k4.f2[k]);
        for (int i = 0; i < 36; ++i)
            out.jac[k][i] += h * (k1.jac[k][i] + 2 * k2.jac[k][i] + 2 * k3.jac[k][i] + k4.jac[k][i]);
    }
    LVPState r = s;
    r.vp.t = s.vp.t + dt;
    r.vp.ens.x = std::move(out.x);
    r.vp.ens.p = std::move(out.p);
    r.dy = std::move(out.dy);
    r.dp = std::move(out.dp);
    r.dlnw = std::move(out.dlnw);
    r.f2 = std::move(out.f2);
    r.jac = std::move(out.jac);
    r.vp.ens.aux = r.f2;
    return r;
}

DarwinSources darwin_sources(const LVPState& s, bool lagrangian, bool with_jerk) {
    const auto& e = s.vp.ens;
    auto loc = vp_local(e.x, e.p, e.w, s.vp.soft);
    std::vector<Vec3> acc(e.size()), dv(e.size());
    for (size_t k = 0; k < e.size(); ++k) {
        acc[k] = -loc.F[k];
        dv[k] = s.dp[k] - (0.5 * norm2(e.p[k])) * e.p[k];
    }
    DarwinSources src;
    fill_sources(src, e.x, e.p, acc, e.w);
    fill_lagrangian(src, s.dy, dv, s.dlnw, loc.stilde);
    if (!lagrangian) {
        if (!s.eulerian) throw Error(ErrorKind::NotPrepared, "Eulerian f2 not carried");
        src.lagrangian = false;
        src.f2ratio.resize(e.size());
        for (size_t k = 0; k < e.size(); ++k) src.f2ratio[k] = s.f2[k] / e.carried[k];
    }
    if (with_jerk) fill_jerk(src, e.x, e.p, e.w, s.vp.soft);
    return src;
}

Phi4Result phi4_evaluate(const LVPState& s, const std::vector<Vec3>& targets, bool lagrangian) {
    Phi4Result r;
    if (s.vp.ens.size() == 0) {
        r.value.assign(targets.size(), 0.0);
        r.grad.assign(targets.size(), Vec3{});
        r.grad_linear = r.grad;
        return r;
    }
    auto src = darwin_sources(s, lagrangian, false);
    const double e2 = s.vp.soft.eps * s.vp.soft.eps;
    for (auto& x : targets) {
        auto f = darwin_fields_at(x, src, e2, kD4);
        r.value.push_back(f.phi4);
        r.grad.push_back(f.grad4);
        r.grad_linear.push_back(f.grad4_linear);
    }
    return r;
}

LVPRun lvp_run(const LVPState& s0, double dt, int n) {
    LVPRun run;
    run.dt = dt;
    auto frame = [&](const LVPState& s) {
        const auto& e = s.vp.ens;
        auto loc = vp_local(e.x, e.p, e.w, s.vp.soft);
        std::vector<Vec3> acc(e.size()), dv(e.size());
        for (size_t k = 0; k < e.size(); ++k) {
            acc[k] = -loc.F[k];
            dv[k] = s.dp[k] - (0.5 * norm2(e.p[k])) * e.p[k];
        }
        run.vp_frames.append(s.vp.t, e.x, e.p, std::move(acc));
        run.dy.push_back(s.dy);
        run.dv.push_back(std::move(dv));
        run.dlnw.push_back(s.dlnw);
        run.stilde.push_back(std::move(loc.stilde));
    };
    run.states.push_back(s0);
    frame(s0);
    for (int i = 0; i < n; ++i) {
        run.states.push_back(lvp_step(run.states.back(), dt));
        frame(run.states.back());
    }
    return run;
}

DarwinSources LVPRun::sources_at(double s, bool with_jerk) const {
    std::vector<Vec3> x, v, a;
    vp_frames.at(s, x, v, a);
    const size_t k = vp_frames.segment(s);
    const double h = vp_frames.t[k + 1] - vp_frames.t[k];
    const double u = (s - vp_frames.t[k]) / h;
    const size_t n = x.size();
    std::vector<Vec3> dy(n), dv(n);
    std::vector<double> lw(n), st(n);
    for (size_t i = 0; i < n; ++i) {
        Vec3 c[4], yy, d1, d2;
        hermite::cubic(this->dy[k][i], this->dv[k][i], this->dy[k + 1][i], this->dv[k + 1][i], h, c);
        hermite::eval(c, u, h, yy, d1, d2);
        dy[i] = yy;
        dv[i] = d1;
        double q[4], qq, q1, q2;
        hermite::cubic(dlnw[k][i], stilde[k][i], dlnw[k + 1][i], stilde[k + 1][i], h, q);
        hermite::eval(q, u, h, qq, q1, q2);
        lw[i] = qq;
        st[i] = q1;
    }
    DarwinSources src;
    fill_sources(src, x, v, a, states.front().vp.ens.w);
    fill_lagrangian(src, dy, dv, lw, st);
    if (with_jerk) fill_jerk(src, x, v, states.front().vp.ens.w, states.front().vp.soft);
    return src;
}

}  // namespace kin

namespace kin {

Phi4Result phi4_point_clusters(const LVPState& s, const std::vector<Vec3>& targets, bool lagrangian, double eta) {
    const auto& e = s.vp.ens;
    const size_t n = e.size();
    Phi4Result r;
    if (n == 0) {
        r.value.assign(targets.size(), 0.0);
        r.grad.assign(targets.size(), Vec3{});
        r.grad_linear = r.grad;
        return r;
    }
    if (!lagrangian && !s.eulerian) throw Error(ErrorKind::NotPrepared, "Eulerian f2 not carried");
    auto F = vp_forces(e.x, e.w, s.vp.soft);
    std::vector<Vec3> ys, ls;
    std::vector<double> ms, lm;
    for (size_t k = 0; k < n; ++k) {
        const double p2 = norm2(e.p[k]);
        const double ratio = lagrangian ? s.dlnw[k] : s.f2[k] / e.carried[k];
        ys.push_back(e.x[k]);
        ms.push_back(e.w[k] * (ratio - 0.5 * p2));
        if (lagrangian) {
            const double d = norm(s.dy[k]);
            if (d > 0) {
                const Vec3 u = s.dy[k] / d;
                const double m = e.w[k] * d / (2 * eta);
                ys.push_back(e.x[k] + eta * u), ms.push_back(m);
                ys.push_back(e.x[k] - eta * u), ms.push_back(-m);
            }
        }
        // (p.grad)^2 delta_y as a second difference along p
        if (p2 > 0) {
            const Vec3 u = e.p[k] / std::sqrt(p2);
            const double m = e.w[k] * p2 / (eta * eta);
            ls.push_back(e.x[k] + eta * u), lm.push_back(m);
            ls.push_back(e.x[k] - eta * u), lm.push_back(m);
            ls.push_back(e.x[k]), lm.push_back(-2 * m);
        }
        // div(F delta_y) as a first difference along F
        const double fn = norm(F[k]);
        if (fn > 0) {
            const Vec3 u = F[k] / fn;
            const double m = e.w[k] * fn / (2 * eta);
            ls.push_back(e.x[k] + eta * u), lm.push_back(-m);
            ls.push_back(e.x[k] - eta * u), lm.push_back(m);
        }
    }
    auto a = newtonian_potential(ys, ms, targets, s.vp.soft);
    auto b = linear_kernel_potential(ls, lm, targets, s.vp.soft, 1e300);
    for (size_t i = 0; i < targets.size(); ++i) {
        r.value.push_back(a.phi[i] + b.value[i]);
        r.grad.push_back(a.grad[i] + b.grad[i]);
        r.grad_linear.push_back(b.grad[i]);
    }
    return r;
}

}  // namespace kin
