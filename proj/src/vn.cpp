#include "kin/vn.hpp"

#include "kin/pairwise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kin/errors.hpp"
#include "kin/hermite.hpp"
#include "kin/quadrature.hpp"

namespace kin {

namespace {

constexpr int S = WorldLines::kStride;

Vec3 load3(const double* a) { return {a[0], a[1], a[2]}; }
void store3(double* a, const Vec3& v) {
    a[0] = v.x;
    a[1] = v.y;
    a[2] = v.z;
}

constexpr int C = WorldLines::kCoef;

void build_segment(WorldLines& h, size_t m) {
    if (h.coef.size() < (m + 1) * C * h.n) h.coef.resize((m + 1) * C * h.n);
    double* out = h.coef.data() + m * C * h.n;
    for (size_t j = 0; j < h.n; ++j) {
        const double* a = h.frames[m].data() + S * j;
        const double* b = h.frames[m + 1].data() + S * j;
        Vec3 cx[6];
        double cq[4];
        hermite::quintic(load3(a), load3(a + 3), load3(a + 6), load3(b), load3(b + 3), load3(b + 6), h.dt, cx);
        hermite::cubic(a[9], a[10], b[9], b[10], h.dt, cq);
        double* o = out + C * j;
        for (int i = 0; i < 6; ++i) store3(o + 3 * i, cx[i]);
        for (int i = 0; i < 4; ++i) o[18 + i] = cq[i];
    }
}

// Position and velocity (per unit variable) from the quintic coefficients.
inline void eval_xv(const double* o, double u, Vec3& X, Vec3& D) {
    for (int a = 0; a < 3; ++a) {
        double y = o[15 + a], d = 5 * o[15 + a];
        for (int k = 4; k >= 1; --k) {
            y = y * u + o[3 * k + a];
            d = d * u + k * o[3 * k + a];
        }
        X[a] = y * u + o[a];
        D[a] = d;
    }
}

inline Vec3 eval_acc(const double* o, double u) {
    Vec3 r;
    for (int a = 0; a < 3; ++a) {
        double dd = 20 * o[15 + a];
        for (int k = 4; k >= 2; --k) dd = dd * u + (k * (k - 1)) * o[3 * k + a];
        r[a] = dd;
    }
    return r;
}

size_t segment_of(const WorldLines& h, double s, double& u) {
    const double x = (s - h.t0) / h.dt;
    long m = static_cast<long>(std::floor(x));
    m = std::clamp<long>(m, 0, static_cast<long>(h.count()) - 2);
    u = x - static_cast<double>(m);
    return static_cast<size_t>(m);
}

[[noreturn]] void short_history(double s, const WorldLines& h) {
    throw Error(ErrorKind::InsufficientHistory, "retarded time " + std::to_string(s) + " outside history [" +
                                                    std::to_string(h.t_first()) + ", " +
                                                    std::to_string(h.t_last() + h.dt) + "]");
}

// One source. Returns false when the source is truncated away.
bool pair_term(const WorldLines& h, double c, double eps2, double t, const Vec3& x, size_t j, bool truncate,
               FieldValue& out, double& s_ret) {
    const size_t nf = h.count();
    const double lo = h.t_first();
    const double hi = h.t_last() + h.dt * (1 + 1e-9);
    const double* fl = h.frames[nf - 1].data() + S * j;
    const Vec3 d0 = x - load3(fl), vl = load3(fl + 3);
    // guess: uniform motion from the newest frame
    double s;
    {
        const double T = t - h.t_last(), c2 = c * c, v2 = norm2(vl), dv = dot(d0, vl);
        const double qa = c2 - v2, qb = c2 * T - dv, qc = c2 * T * T - norm2(d0) - eps2;
        s = h.t_last() + (qb - std::sqrt(std::fmax(qb * qb - qa * qc, 0.0))) / qa;
    }
    if (s < lo + h.dt) {
        // the root lies before the first frame iff the cone has not reached X(lo)
        Vec3 x0 = load3(h.frames[0].data() + S * j);
        if (c * (t - lo) < std::sqrt(norm2(x - x0) + eps2)) {
            if (truncate) return false;
            short_history(s, h);
        }
        s = std::max(s, lo);
    }
    const double ih = 1.0 / h.dt;
    const double* o = nullptr;
    size_t m_cur = static_cast<size_t>(-1);
    Vec3 X, V, r;
    double R = 0, u = 0;
    for (int it = 0;; ++it) {
        size_t m = segment_of(h, s, u);
        if (m != m_cur) {
            o = h.coef.data() + (m * h.n + j) * C;
            m_cur = m;
        }
        eval_xv(o, u, X, V);
        V *= ih;
        r = x - X;
        R = std::sqrt(norm2(r) + eps2);
        double gv = c * (t - s) - R;
        double gd = -c + dot(r, V) / R;
        double ds = -gv / gd;
        if (std::fabs(ds) < 1e-13 * (1.0 + std::fabs(t))) break;
        s += ds;
        if (it > 40)
            throw Error(ErrorKind::NonConvergence, "retarded time iteration failed for source " + std::to_string(j));
    }
    if (s < lo - 1e-9 * h.dt) {
        if (truncate) return false;
        short_history(s, h);
    }
    if (s > hi) short_history(s, h);
    const Vec3 A = (ih * ih) * eval_acc(o, u);
    const double q = ((o[21] * u + o[20]) * u + o[19]) * u + o[18];
    const double qd = ((3 * o[21] * u + 2 * o[20]) * u + o[19]) * ih;

    const double ic = 1.0 / c;
    const double rv = dot(r, V);
    const double K = R - rv * ic;
    const double dKds = -rv / R + (norm2(V) - dot(r, A)) * ic;
    const Vec3 dKdx = r / R - ic * V;
    const double st = R / K;
    const Vec3 gs = (-ic / K) * r;
    const double iK = 1.0 / K, iK2 = iK * iK;
    const double ic2 = ic * ic;
    out.phi = -ic2 * q * iK;
    out.dt_phi = -ic2 * (qd * st * iK - q * dKds * st * iK2);
    out.grad = -ic2 * ((qd * iK) * gs - (q * iK2) * (dKdx + dKds * gs));
    s_ret = s;
    return true;
}

constexpr int L = 8;

// Loop-free polynomial pieces on coefficient block cf[b ..] so the lane loops
// below vectorise (indexed loads gather; per-lane pointers do not).
[[gnu::always_inline]] inline double p5(const double* cf, long b, int a, double u) {
    return ((((cf[b + 15 + a] * u + cf[b + 12 + a]) * u + cf[b + 9 + a]) * u + cf[b + 6 + a]) * u + cf[b + 3 + a]) * u +
           cf[b + a];
}
[[gnu::always_inline]] inline double d5(const double* cf, long b, int a, double u) {
    return (((5 * cf[b + 15 + a] * u + 4 * cf[b + 12 + a]) * u + 3 * cf[b + 9 + a]) * u + 2 * cf[b + 6 + a]) * u +
           cf[b + 3 + a];
}
[[gnu::always_inline]] inline double dd5(const double* cf, long b, int a, double u) {
    return ((20 * cf[b + 15 + a] * u + 12 * cf[b + 12 + a]) * u + 6 * cf[b + 9 + a]) * u + 2 * cf[b + 6 + a];
}

struct Lane {
    double x, y, z, t, c, eps2, ih;
};

struct Iterate {
    double s, u, ds;
};

[[gnu::always_inline]] inline Iterate newton(const double* cf, long b, const Lane& g, double s, double u) {
    const double rx = g.x - p5(cf, b, 0, u), ry = g.y - p5(cf, b, 1, u), rz = g.z - p5(cf, b, 2, u);
    const double R = std::sqrt(rx * rx + ry * ry + rz * rz + g.eps2);
    const double rd = (rx * d5(cf, b, 0, u) + ry * d5(cf, b, 1, u) + rz * d5(cf, b, 2, u)) * g.ih;
    const double ds = (g.c * (g.t - s) - R) / (g.c - rd / R);
    return {s + ds, u + ds * g.ih, ds};
}

// Same as pair_term for sources j0 .. j0+L-1, vectorised over sources with a
// fixed Newton count. Lanes with ok = 0 (segment crossing, history edge,
// slow convergence) must be redone by pair_term.
struct Block {
    double phi[L], dt[L], gx[L], gy[L], gz[L], s[L];
    int ok[L];
};

void block_terms(const WorldLines& h, double c, double eps2, double t, const Vec3& x, size_t j0, Block& b) {
    const double* hd = h.head.data() + j0;
    const long hn = static_cast<long>(h.n);
    const double* cf = h.coef.data();
    const double tl = h.t_last(), lo = h.t_first(), ih = 1.0 / h.dt, ih2 = ih * ih, step = h.dt;
    const long last = static_cast<long>(h.count()) - 2;
    const long jb = static_cast<long>(j0);
    const double c2 = c * c, ic = 1.0 / c, ic2 = ic * ic, T = t - tl;
    const Lane g{x.x, x.y, x.z, t, c, eps2, ih};
#pragma omp simd
    for (int l = 0; l < L; ++l) {
        const double vx = hd[3 * hn + l], vy = hd[4 * hn + l], vz = hd[5 * hn + l];
        const double dx = x.x - hd[l], dy = x.y - hd[hn + l], dz = x.z - hd[2 * hn + l];
        const double v2 = vx * vx + vy * vy + vz * vz;
        const double dv = dx * vx + dy * vy + dz * vz;
        const double qa = c2 - v2, qb = c2 * T - dv, qc = c2 * T * T - (dx * dx + dy * dy + dz * dz) - eps2;
        const double disc = qb * qb - qa * qc;
        const double s0 = tl + (qb - std::sqrt(disc > 0 ? disc : 0.0)) / qa;
        const int early = s0 < lo + step;
        // std::fmax would block vectorisation
        double xr = ((s0 > lo ? s0 : lo) - lo) * ih;
        long m = static_cast<long>(xr);
        m = m > last ? last : m;
        long bb = (m * hn + jb + l) * C;
        Iterate it = newton(cf, bb, g, s0 > lo ? s0 : lo, xr - static_cast<double>(m));
        xr = (it.s - lo) * ih;
        m = static_cast<long>(xr);
        m = m < 0 ? 0 : (m > last ? last : m);
        bb = (m * hn + jb + l) * C;
        it = newton(cf, bb, g, it.s, xr - static_cast<double>(m));
        it = newton(cf, bb, g, it.s, it.u);
        it = newton(cf, bb, g, it.s, it.u);
        const double ul = it.u;
        const double umax = m == last ? 2.0 : 1.0;
        b.ok[l] = (1 - early) & (std::fabs(it.ds) < 1e-9) & (ul >= 0.0) & (ul <= umax) & (it.s >= lo);
        const double rx = x.x - p5(cf, bb, 0, ul), ry = x.y - p5(cf, bb, 1, ul), rz = x.z - p5(cf, bb, 2, ul);
        const double Vx = d5(cf, bb, 0, ul) * ih, Vy = d5(cf, bb, 1, ul) * ih, Vz = d5(cf, bb, 2, ul) * ih;
        const double Ax = dd5(cf, bb, 0, ul) * ih2, Ay = dd5(cf, bb, 1, ul) * ih2, Az = dd5(cf, bb, 2, ul) * ih2;
        const double q = ((cf[bb + 21] * ul + cf[bb + 20]) * ul + cf[bb + 19]) * ul + cf[bb + 18];
        const double qd = ((3 * cf[bb + 21] * ul + 2 * cf[bb + 20]) * ul + cf[bb + 19]) * ih;
        const double R = std::sqrt(rx * rx + ry * ry + rz * rz + eps2);
        const double rv = rx * Vx + ry * Vy + rz * Vz;
        const double K = R - rv * ic;
        const double dKds = -rv / R + (Vx * Vx + Vy * Vy + Vz * Vz - (rx * Ax + ry * Ay + rz * Az)) * ic;
        const double iK = 1.0 / K, iK2 = iK * iK, iR = 1.0 / R;
        const double st = R * iK;
        const double gsf = -ic * iK;  // grad s = gsf r
        b.phi[l] = -ic2 * q * iK;
        b.dt[l] = -ic2 * (qd * st * iK - q * dKds * st * iK2);
        const double cr = qd * iK * gsf - q * iK2 * (iR + dKds * gsf);
        const double cv = q * iK2 * ic;
        b.gx[l] = -ic2 * (cr * rx + cv * Vx);
        b.gy[l] = -ic2 * (cr * ry + cv * Vy);
        b.gz[l] = -ic2 * (cr * rz + cv * Vz);
        b.s[l] = it.s;
    }
}

void add(FieldValue& a, const FieldValue& b) {
    a.phi += b.phi;
    a.dt_phi += b.dt_phi;
    a.grad += b.grad;
}

void check_c(double c) {
    if (!(c > 0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidInput, "VN needs a finite c > 0");
}

// V, A, Q, Q' of every particle from momenta, weights and resolved fields.
void frame_terms(const VNState& s, const VNFields& f, std::vector<Vec3>& V, std::vector<Vec3>& A,
                 std::vector<double>& q, std::vector<double>& qd) {
    const size_t n = s.ens.size();
    V.resize(n);
    A.resize(n);
    q.resize(n);
    qd.resize(n);
    const double ic2 = 1.0 / (s.c * s.c);
    for (size_t k = 0; k < n; ++k) {
        const Vec3& p = s.ens.p[k];
        const double g = vn_gamma(p, s.c);
        auto r = vn_rates(p, s.c, f.dt_phi[k], f.grad[k]);
        const double gd = -g * g * g * dot(p, r.pdot) * ic2;
        V[k] = g * p;
        A[k] = g * r.pdot + gd * p;
        q[k] = s.ens.w[k] * g;
        qd[k] = s.ens.w[k] * (g * r.s + gd);
    }
}

VNFields evaluate_all(const WorldLines& h, double c, double eps, double t, const std::vector<Vec3>& xs) {
    VNFields f;
    f.resize(xs.size());
    RetardedOptions opt;
    for (size_t k = 0; k < xs.size(); ++k) {
        opt.skip = k;
        auto v = vn_field_eval(h, c, eps, t, xs[k], opt);
        f.phi[k] = v.phi;
        f.dt_phi[k] = v.dt_phi;
        f.grad[k] = v.grad;
    }
    return f;
}

double field_scale(const VNFields& f) {
    double m = 0;
    for (size_t k = 0; k < f.phi.size(); ++k) m = std::fmax(m, std::fmax(max_abs(f.grad[k]), std::fabs(f.dt_phi[k])));
    return m;
}

}  // namespace

void WorldLines::append(const std::vector<Vec3>& X, const std::vector<Vec3>& V, const std::vector<Vec3>& A,
                        const std::vector<double>& q, const std::vector<double>& qd) {
    if (frames.empty()) n = X.size();
    if (X.size() != n || V.size() != n || A.size() != n || q.size() != n || qd.size() != n)
        throw Error(ErrorKind::InconsistentState, "world line frame has the wrong particle count");
    std::vector<double> f(S * n);
    for (size_t j = 0; j < n; ++j) {
        double* b = f.data() + S * j;
        store3(b, X[j]);
        store3(b + 3, V[j]);
        store3(b + 6, A[j]);
        b[9] = q[j];
        b[10] = qd[j];
    }
    frames.push_back(std::move(f));
    head.resize(6 * n);
    for (size_t j = 0; j < n; ++j)
        for (int a = 0; a < 3; ++a) {
            head[a * n + j] = X[j][a];
            head[(3 + a) * n + j] = V[j][a];
        }
    if (frames.size() >= 2) build_segment(*this, frames.size() - 2);
}

void WorldLines::update_last(const std::vector<Vec3>& A, const std::vector<double>& qd) {
    auto& f = frames.back();
    for (size_t j = 0; j < n; ++j) {
        store3(f.data() + S * j + 6, A[j]);
        f[S * j + 10] = qd[j];
    }
    if (frames.size() >= 2) build_segment(*this, frames.size() - 2);
}

void WorldLines::state(size_t j, double s, Vec3& X, Vec3& V, Vec3& A, double& q, double& qd) const {
    if (count() < 2) throw Error(ErrorKind::InsufficientHistory, "world lines need two frames");
    if (s < t_first() - 1e-9 * dt || s > t_last() + dt * (1 + 1e-9)) short_history(s, *this);
    double u;
    const double* o = coef.data() + (segment_of(*this, s, u) * n + j) * C;
    eval_xv(o, u, X, V);
    V *= 1.0 / dt;
    A = (1.0 / (dt * dt)) * eval_acc(o, u);
    q = ((o[21] * u + o[20]) * u + o[19]) * u + o[18];
    qd = ((3 * o[21] * u + 2 * o[20]) * u + o[19]) / dt;
}

void VNFields::resize(size_t n) {
    phi.assign(n, 0.0);
    dt_phi.assign(n, 0.0);
    grad.assign(n, Vec3{});
}

FieldValue vn_field_eval(const WorldLines& h, double c, double eps, double t, const Vec3& x,
                         const RetardedOptions& opt) {
    check_c(c);
    FieldValue total;
    if (opt.near) *opt.near = FieldValue{};
    if (opt.near_index) opt.near_index->clear();
    if (h.n == 0) return total;
    if (h.count() < 2) throw Error(ErrorKind::InsufficientHistory, "world lines need two frames");
    const double eps2 = eps * eps;
    FieldValue one;
    double s;
    auto take = [&](size_t j, const FieldValue& v, double sr) {
        add(total, v);
        if (sr > opt.split) {
            if (opt.near) add(*opt.near, v);
            if (opt.near_index) opt.near_index->push_back(static_cast<std::uint32_t>(j));
        }
    };
    Block blk;
    size_t j = 0;
    for (; j + L <= h.n; j += L) {
        block_terms(h, c, eps2, t, x, j, blk);
        for (int l = 0; l < L; ++l) {
            const size_t jj = j + l;
            if (jj == opt.skip) continue;
            if (blk.ok[l]) {
                take(jj, FieldValue{blk.phi[l], blk.dt[l], Vec3{blk.gx[l], blk.gy[l], blk.gz[l]}}, blk.s[l]);
            } else if (pair_term(h, c, eps2, t, x, jj, opt.truncate, one, s)) {
                take(jj, one, s);
            }
        }
    }
    for (; j < h.n; ++j) {
        if (j == opt.skip) continue;
        if (pair_term(h, c, eps2, t, x, j, opt.truncate, one, s)) take(j, one, s);
    }
    return total;
}

FieldValue vn_pair_field(const WorldLines& h, double c, double eps, double t, const Vec3& x, size_t j,
                         bool truncate) {
    check_c(c);
    FieldValue v;
    double s;
    if (!pair_term(h, c, eps * eps, t, x, j, truncate, v, s)) return {};
    return v;
}

FieldValue kirchhoff_data(const WaveData& data, double c, double t, const Vec3& x, int n_theta, int n_phi) {
    check_c(c);
    if (!data.phi0) throw Error(ErrorKind::NotPrepared, "wave data needs phi0");
    auto rule = quad::sphere_rule(n_theta, n_phi);
    const double r = c * t;
    double m0 = 0, m1 = 0, m2 = 0, h0 = 0, h1 = 0;
    Vec3 mg, mh, hg;
    for (size_t i = 0; i < rule.dir.size(); ++i) {
        const Vec3& o = rule.dir[i];
        const double w = rule.w[i] / kernels::kFourPi;
        double v;
        Vec3 g;
        Sym3 H;
        data.phi0(x + r * o, v, g, H);
        Vec3 Ho = H * o;
        m0 += w * v;
        m1 += w * dot(o, g);
        m2 += w * dot(o, Ho);
        mg += w * g;
        mh += w * Ho;
        if (data.phi1) {
            data.phi1(x + r * o, v, g);
            h0 += w * v;
            h1 += w * dot(o, g);
            hg += w * g;
        }
    }
    FieldValue f;
    f.phi = m0 + r * m1 + t * h0;
    f.dt_phi = 2 * c * m1 + c * r * m2 + h0 + r * h1;
    f.grad = mg + r * mh + t * hg;
    return f;
}

double vn_gamma(const Vec3& p, double c) { return 1.0 / std::sqrt(1.0 + norm2(p) / (c * c)); }

VNRates vn_rates(const Vec3& p, double c, double dt_phi, const Vec3& grad) {
    const double g = vn_gamma(p, c);
    VNRates r;
    r.xdot = g * p;
    r.s = dt_phi + dot(r.xdot, grad);
    r.pdot = -(r.s * p + (g * c * c) * grad);
    return r;
}

void vn_resolve(VNState& s) {
    const size_t n = s.ens.size();
    auto& h = s.history;
    if (n == 0) {
        s.fields.resize(0);
        s.iterations = 1;
        s.contraction = 0;
        s.fp_change = 0;
        return;
    }
    if (h.count() < 2 || std::fabs(h.t_last() - s.t) > 1e-9 * h.dt)
        throw Error(ErrorKind::InconsistentState, "newest world line frame is not at the state time");
    const double split = h.t_last() - h.dt;
    std::vector<FieldValue> far(n), near(n);
    std::vector<std::vector<std::uint32_t>> idx(n);
    RetardedOptions opt;
    opt.split = split;
    VNFields f;
    f.resize(n);
    for (size_t k = 0; k < n; ++k) {
        opt.skip = k;
        opt.near = &near[k];
        opt.near_index = &idx[k];
        far[k] = vn_field_eval(h, s.c, s.soft.eps, s.t, s.ens.x[k], opt);
        f.phi[k] = far[k].phi;
        f.dt_phi[k] = far[k].dt_phi;
        f.grad[k] = far[k].grad;
        far[k].phi -= near[k].phi;
        far[k].dt_phi -= near[k].dt_phi;
        far[k].grad -= near[k].grad;
    }
    std::vector<Vec3> V, A;
    std::vector<double> q, qd;
    s.iterations = 1;
    s.contraction = 0;
    s.fp_change = 0;
    double prev_change = 0;
    const double eps2 = s.soft.eps * s.soft.eps;
    for (;;) {
        frame_terms(s, f, V, A, q, qd);
        h.update_last(A, qd);
        const double scale = field_scale(f);
        if (scale == 0) break;
        double change = 0;
        FieldValue one;
        double sr;
        for (size_t k = 0; k < n; ++k) {
            FieldValue nr;
            for (auto j : idx[k])
                if (pair_term(h, s.c, eps2, s.t, s.ens.x[k], j, false, one, sr)) add(nr, one);
            double phi = far[k].phi + nr.phi, dtp = far[k].dt_phi + nr.dt_phi;
            Vec3 g = far[k].grad + nr.grad;
            change = std::fmax(change, std::fmax(max_abs(g - f.grad[k]), std::fabs(dtp - f.dt_phi[k])));
            f.phi[k] = phi;
            f.dt_phi[k] = dtp;
            f.grad[k] = g;
        }
        ++s.iterations;
        change /= scale;
        if (prev_change > 0) s.contraction = change / prev_change;
        s.fp_change = change;
        if (change <= s.fp_tol) {
            frame_terms(s, f, V, A, q, qd);
            h.update_last(A, qd);
            break;
        }
        if (s.iterations >= s.fp_max_iter)
            throw Error(ErrorKind::NonConvergence, "field fixed point did not converge at t=" + std::to_string(s.t) +
                                                       ": last changes " + std::to_string(prev_change) + ", " +
                                                       std::to_string(change));
        prev_change = change;
    }
    s.fields = std::move(f);
}

namespace {

VNState start_state(const VPState& vp0, double c, double fp_tol, int fp_max_iter) {
    check_c(c);
    if (vp0.t != 0) throw Error(ErrorKind::InvalidInput, "VN initial state must be at t = 0");
    VNState s;
    s.t = 0;
    s.c = c;
    s.soft = vp0.soft;
    s.ens = vp0.ens;
    s.fp_tol = fp_tol;
    s.fp_max_iter = fp_max_iter;
    return s;
}

// Newest frame at t = 0 with provisional A, Q' taken from the prior history, then resolve.
void close_initial(VNState& s, const std::vector<Vec3>& A0, const std::vector<double>& qd0) {
    const size_t n = s.ens.size();
    std::vector<Vec3> V(n);
    std::vector<double> q(n);
    for (size_t k = 0; k < n; ++k) {
        double g = vn_gamma(s.ens.p[k], s.c);
        V[k] = g * s.ens.p[k];
        q[k] = s.ens.w[k] * g;
    }
    s.history.append(s.ens.x, V, A0, q, qd0);
    vn_resolve(s);
}

}  // namespace

VNState vn_init(const VPState& vp0, const LVPRun& backward, double c, double fp_tol, int fp_max_iter) {
    VNState s = start_state(vp0, c, fp_tol, fp_max_iter);
    const auto& fr = backward.vp_frames;
    const size_t nf = fr.frames();
    if (nf < 3 || !(backward.dt < 0)) throw Error(ErrorKind::InvalidInput, "prior history needs a backward run of two or more steps");
    if (fr.t[0] != 0 || fr.x[0].size() != s.ens.size())
        throw Error(ErrorKind::InconsistentState, "backward run does not start from the VN initial particles");
    const size_t n = s.ens.size();
    const double h = -backward.dt, ic2 = 1.0 / (c * c);
    s.history.t0 = -h * static_cast<double>(nf - 1);
    s.history.dt = h;
    s.history.n = n;
    std::vector<Vec3> X(n), V(n), A(n);
    std::vector<double> q(n), qd(n);
    // frame i is at time -i h; d/dt of dv by differences in i
    auto ddv = [&](size_t i, size_t k) {
        const auto& dv = backward.dv;
        if (i == 0) return (-3.0 * dv[0][k] + 4.0 * dv[1][k] - dv[2][k]) * (-1.0 / (2 * h));
        if (i == nf - 1) return (3.0 * dv[i][k] - 4.0 * dv[i - 1][k] + dv[i - 2][k]) * (-1.0 / (2 * h));
        return (dv[i - 1][k] - dv[i + 1][k]) * (1.0 / (2 * h));
    };
    for (size_t i = nf; i-- > 0;) {
        for (size_t k = 0; k < n; ++k) {
            const Vec3& y = fr.x[i][k];
            const Vec3& p = fr.v[i][k];
            const Vec3& F = fr.a[i][k];
            X[k] = y + ic2 * backward.dy[i][k];
            V[k] = p + ic2 * backward.dv[i][k];
            A[k] = F + ic2 * ddv(i, k);
            Vec3 P = V[k] + (0.5 * ic2 * norm2(p)) * p;
            double g = vn_gamma(P, c);
            double gd = -g * g * g * dot(P, F) * ic2;
            double w = s.ens.w[k], wh = w * (1 + ic2 * backward.dlnw[i][k]);
            q[k] = wh * g;
            qd[k] = w * ic2 * backward.stilde[i][k] * g + wh * gd;
        }
        if (i > 0) s.history.append(X, V, A, q, qd);
    }
    close_initial(s, A, qd);
    return s;
}

VNState vn_init_frozen(const VPState& vp0, double c, double dt, int frames, double fp_tol, int fp_max_iter) {
    VNState s = start_state(vp0, c, fp_tol, fp_max_iter);
    if (!(dt > 0) || frames < 1) throw Error(ErrorKind::InvalidInput, "frozen history needs dt > 0 and frames >= 1");
    const size_t n = s.ens.size();
    s.history.t0 = -dt * frames;
    s.history.dt = dt;
    s.history.n = n;
    std::vector<Vec3> zero(n);
    std::vector<double> q(n), qd(n, 0.0);
    for (size_t k = 0; k < n; ++k) q[k] = s.ens.w[k];
    for (int i = 0; i < frames; ++i) s.history.append(s.ens.x, zero, zero, q, qd);
    close_initial(s, zero, qd);
    return s;
}

VNState vn_step(VNState s) {
    const size_t n = s.ens.size();
    const double h = s.history.dt;
    if (std::fabs(s.history.t_last() - s.t) > 1e-9 * h)
        throw Error(ErrorKind::InconsistentState, "state time does not match its history");
    if (s.fields.phi.size() != n) throw Error(ErrorKind::NotPrepared, "fields not resolved at the state time");
    struct D {
        std::vector<Vec3> x, p;
        std::vector<double> lw, lf;
    };
    auto rates = [&](const std::vector<Vec3>& p, const VNFields& f) {
        D d;
        d.x.resize(n);
        d.p.resize(n);
        d.lw.resize(n);
        d.lf.resize(n);
        for (size_t k = 0; k < n; ++k) {
            auto r = vn_rates(p[k], s.c, f.dt_phi[k], f.grad[k]);
            d.x[k] = r.xdot;
            d.p[k] = r.pdot;
            d.lw[k] = r.s;
            d.lf[k] = 4 * r.s;
        }
        return d;
    };
    auto stage = [&](const D& k, double a, std::vector<Vec3>& x, std::vector<Vec3>& p) {
        x.resize(n);
        p.resize(n);
        for (size_t i = 0; i < n; ++i) {
            x[i] = s.ens.x[i] + a * k.x[i];
            p[i] = s.ens.p[i] + a * k.p[i];
        }
    };
    std::vector<Vec3> x, p;
    D k1 = rates(s.ens.p, s.fields);
    stage(k1, 0.5 * h, x, p);
    D k2 = rates(p, evaluate_all(s.history, s.c, s.soft.eps, s.t + 0.5 * h, x));
    stage(k2, 0.5 * h, x, p);
    D k3 = rates(p, evaluate_all(s.history, s.c, s.soft.eps, s.t + 0.5 * h, x));
    stage(k3, h, x, p);
    VNFields f4 = evaluate_all(s.history, s.c, s.soft.eps, s.t + h, x);
    D k4 = rates(p, f4);
    const double b = h / 6;
    for (size_t i = 0; i < n; ++i) {
        s.ens.x[i] += b * (k1.x[i] + 2.0 * k2.x[i] + 2.0 * k3.x[i] + k4.x[i]);
        s.ens.p[i] += b * (k1.p[i] + 2.0 * k2.p[i] + 2.0 * k3.p[i] + k4.p[i]);
        s.ens.w[i] *= std::exp(b * (k1.lw[i] + 2 * k2.lw[i] + 2 * k3.lw[i] + k4.lw[i]));
        s.ens.carried[i] *= std::exp(b * (k1.lf[i] + 2 * k2.lf[i] + 2 * k3.lf[i] + k4.lf[i]));
    }
    s.t = s.history.t_last() + h;
    std::vector<Vec3> V, A;
    std::vector<double> q, qd;
    frame_terms(s, f4, V, A, q, qd);
    s.history.append(s.ens.x, V, A, q, qd);
    vn_resolve(s);
    return s;
}

VNEnergy energy_vn(const VNState& s, const GridSpec& box) {
    const double lo = 0, hi = box.h * (box.n - 1);
    for (const auto& x : s.ens.x) {
        Vec3 d = x - box.origin;
        for (int a = 0; a < 3; ++a)
            if (d[a] < lo || d[a] > hi) throw Error(ErrorKind::InvalidInput, "energy box smaller than the source support");
    }
    VNEnergy e;
    const size_t n = s.ens.size();
    if (n == 0) return e;
    const double c2 = s.c * s.c, ic2 = 1 / c2, eps2 = s.soft.eps * s.soft.eps;
    std::vector<double> q(n);
    double qt = 0;
    for (size_t k = 0; k < n; ++k) {
        const double g = vn_gamma(s.ens.p[k], s.c);
        e.matter += c2 * s.ens.w[k] / g;
        q[k] = s.ens.w[k] * g;
        qt += q[k];
    }
    pairwise::Sources src(s.ens.x, nullptr, q);
    double pair = 0;
    for (size_t k = 0; k < n; ++k) pair -= q[k] * pairwise::evaluate<pairwise::kPhi>(s.ens.x[k], src, eps2).phi;
    double rem = 0, plain = 0;
    for (const auto& x : box.nodes()) {
        auto f = vn_field_eval(s.history, s.c, s.soft.eps, s.t, x);
        const Vec3 gi = ic2 * pairwise::evaluate<pairwise::kGrad>(x, src, eps2).grad;
        const double t2 = f.dt_phi * f.dt_phi, g2 = norm2(f.grad);
        rem += t2 + c2 * (g2 - norm2(gi));
        plain += t2 + c2 * g2;
    }
    const double k = c2 / (2 * kernels::kFourPi) * box.cell_volume();
    e.field = 0.5 * pair + k * rem;
    e.field_box = k * plain;
    e.tail = qt * qt / hi;  // Q^2/(2R) with R = half the box width
    return e;
}

}  // namespace kin
