#include "kin/dvn.hpp"

#include <cmath>

#include "kin/errors.hpp"

namespace kin {
namespace {

// Structure-of-arrays copy of the sources with the per-particle field values.
struct Sources {
    std::vector<double> x, y, z, px, py, pz, w, mu, ex, ey, ez, s;
    size_t n = 0;
    Sources(const ParticleEnsemble& e, double c, const std::vector<double>* psi, const std::vector<Vec3>* ef) {
        n = e.size();
        for (auto* v : {&x, &y, &z, &px, &py, &pz, &w, &mu, &ex, &ey, &ez, &s}) v->assign(n, 0.0);
        for (size_t j = 0; j < n; ++j) {
            x[j] = e.x[j].x, y[j] = e.x[j].y, z[j] = e.x[j].z;
            px[j] = e.p[j].x, py[j] = e.p[j].y, pz[j] = e.p[j].z;
            w[j] = e.w[j];
            mu[j] = mu_star_factor(e.p[j], c);
            if (ef && !ef->empty()) ex[j] = (*ef)[j].x, ey[j] = (*ef)[j].y, ez[j] = (*ef)[j].z;
            if (psi && !psi->empty()) s[j] = (*psi)[j] + dot(e.p[j], ef && !ef->empty() ? (*ef)[j] : Vec3{});
        }
    }
};

void check_c(double c) {
    if (!(c > 0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidInput, "the Darwin system needs a finite c > 0");
}

// E-independent part of the E* representation at one target.
Vec3 e_fixed(const Sources& s, const Vec3& x, double c, double eps2, size_t skip) {
    const double ic2 = 1 / (c * c), half4 = 0.5 * ic2 * ic2;
    double ax = 0, ay = 0, az = 0;
#pragma omp simd reduction(+ : ax, ay, az)
    for (size_t j = 0; j < s.n; ++j) {
        const double zx = s.x[j] - x.x, zy = s.y[j] - x.y, zz = s.z[j] - x.z;
        const double R2 = zx * zx + zy * zy + zz * zz + eps2, iR = 1 / std::sqrt(R2), iR2 = iR * iR;
        const double wm = j == skip ? 0.0 : s.w[j] * s.mu[j];
        const double bx = zx * iR, by = zy * iR, bz = zz * iR;
        const double zp = bx * s.px[j] + by * s.py[j] + bz * s.pz[j];
        const double p2 = s.px[j] * s.px[j] + s.py[j] * s.py[j] + s.pz[j] * s.pz[j];
        const double lead = -ic2 * wm * iR2;
        const double a = half4 * wm * iR2, cz = 3 * zp * zp - p2;
        ax += lead * bx + a * (-2 * zp * s.px[j] + cz * bx);
        ay += lead * by + a * (-2 * zp * s.py[j] + cz * by);
        az += lead * bz + a * (-2 * zp * s.pz[j] + cz * bz);
    }
    return {ax, ay, az};
}

// Self-referential part -(1/2c^2) sum w mu / R (1 - zb zb) E_j.
Vec3 e_linear(const Sources& s, const Vec3& x, double c, double eps2, size_t skip) {
    const double k = -0.5 / (c * c);
    double ax = 0, ay = 0, az = 0;
#pragma omp simd reduction(+ : ax, ay, az)
    for (size_t j = 0; j < s.n; ++j) {
        const double zx = s.x[j] - x.x, zy = s.y[j] - x.y, zz = s.z[j] - x.z;
        const double R2 = zx * zx + zy * zy + zz * zz + eps2, iR = 1 / std::sqrt(R2);
        const double wm = j == skip ? 0.0 : k * s.w[j] * s.mu[j] * iR;
        const double ze = (zx * s.ex[j] + zy * s.ey[j] + zz * s.ez[j]) * iR * iR;
        ax += wm * (s.ex[j] - ze * zx);
        ay += wm * (s.ey[j] - ze * zy);
        az += wm * (s.ez[j] - ze * zz);
    }
    return {ax, ay, az};
}

// The same term written as displayed, with the (psi + p.E) parts kept.
Vec3 e_linear_displayed(const Sources& s, const Vec3& x, double c, double eps2, size_t skip) {
    const double c2 = c * c, k = -0.5 / (c2 * c2);
    Vec3 acc;
    for (size_t j = 0; j < s.n; ++j) {
        if (j == skip) continue;
        Vec3 z{s.x[j] - x.x, s.y[j] - x.y, s.z[j] - x.z};
        const double R = std::sqrt(norm2(z) + eps2);
        const Vec3 zb = z / R, p{s.px[j], s.py[j], s.pz[j]}, E{s.ex[j], s.ey[j], s.ez[j]};
        const Vec3 B = s.s[j] * p + (c2 * s.mu[j]) * E;
        const Vec3 brace = (B - dot(zb, B) * zb) + (dot(zb, p) * zb - p) * s.s[j];
        acc += (k * s.w[j] / R) * brace;
    }
    return acc;
}

double sup_abs(const std::vector<Vec3>& v) {
    double m = 0;
    for (const auto& a : v) m = std::fmax(m, max_abs(a));
    return m;
}

}  // namespace

double mu_star_factor(const Vec3& p, double c) { return 1.0 - norm2(p) / (2 * c * c); }

std::vector<double> psi_star_eval(const ParticleEnsemble& e, const std::vector<Vec3>& targets, double c,
                                  const Softening& soft, bool exclude_self) {
    check_c(c);
    const size_t n = e.size();
    std::vector<double> px(n), py(n), pz(n), x(n), y(n), z(n);
    for (size_t j = 0; j < n; ++j) {
        x[j] = e.x[j].x, y[j] = e.x[j].y, z[j] = e.x[j].z;
        px[j] = e.w[j] * e.p[j].x, py[j] = e.w[j] * e.p[j].y, pz[j] = e.w[j] * e.p[j].z;
    }
    const double eps2 = soft.eps * soft.eps, ic2 = 1 / (c * c);
    std::vector<double> out(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) {
        if (!std::isfinite(norm2(targets[i]))) throw Error(ErrorKind::Singular, "non-finite target");
        const Vec3 t = targets[i];
        const size_t skip = exclude_self ? i : static_cast<size_t>(-1);
        double acc = 0;
#pragma omp simd reduction(+ : acc)
        for (size_t j = 0; j < n; ++j) {
            const double zx = x[j] - t.x, zy = y[j] - t.y, zz = z[j] - t.z;
            const double R2 = zx * zx + zy * zy + zz * zz + eps2, iR = 1 / std::sqrt(R2);
            const double v = (zx * px[j] + zy * py[j] + zz * pz[j]) * iR * iR * iR;
            acc += j == skip ? 0.0 : v;
        }
        out[i] = ic2 * acc;
    }
    return out;
}

std::vector<Vec3> e_star_eval(const ParticleEnsemble& ens, const std::vector<double>& psi,
                              const std::vector<Vec3>& e, const std::vector<Vec3>& targets, double c,
                              const Softening& soft, bool exclude_self, bool displayed) {
    check_c(c);
    if (psi.size() != ens.size() || e.size() != ens.size())
        throw Error(ErrorKind::NotPrepared, "E* evaluation needs psi* and E* at every particle");
    Sources src(ens, c, &psi, &e);
    const double eps2 = soft.eps * soft.eps;
    std::vector<Vec3> out(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) {
        const size_t skip = exclude_self ? i : static_cast<size_t>(-1);
        out[i] = e_fixed(src, targets[i], c, eps2, skip) +
                 (displayed ? e_linear_displayed(src, targets[i], c, eps2, skip)
                            : e_linear(src, targets[i], c, eps2, skip));
    }
    return out;
}

void dvn_resolve(DVNState& s) {
    check_c(s.c);
    const size_t n = s.ens.size();
    s.iterations = 0;
    s.contraction = 0;
    s.fp_change = 0;
    if (n == 0) {
        s.psi.clear();
        s.e.clear();
        s.iterations = 1;
        return;
    }
    const double eps2 = s.soft.eps * s.soft.eps;
    s.psi = psi_star_eval(s.ens, s.ens.x, s.c, s.soft, true);
    Sources src(s.ens, s.c, nullptr, nullptr);
    std::vector<Vec3> fixed(n);
    for (size_t k = 0; k < n; ++k) fixed[k] = e_fixed(src, s.ens.x[k], s.c, eps2, k);
    if (s.e.size() != n) {
        // leading Newtonian term
        const double ic2 = 1 / (s.c * s.c);
        s.e.assign(n, Vec3{});
        for (size_t k = 0; k < n; ++k) {
            Vec3 g;
            for (size_t j = 0; j < n; ++j) {
                if (j == k) continue;
                Vec3 z = s.ens.x[j] - s.ens.x[k];
                double R = std::sqrt(norm2(z) + eps2);
                g += (-ic2 * src.w[j] * src.mu[j] / (R * R * R)) * z;
            }
            s.e[k] = g;
        }
    }
    double prev = 0;
    for (;;) {
        for (size_t j = 0; j < n; ++j) src.ex[j] = s.e[j].x, src.ey[j] = s.e[j].y, src.ez[j] = s.e[j].z;
        std::vector<Vec3> next(n);
        double change = 0;
        for (size_t k = 0; k < n; ++k) {
            next[k] = fixed[k] + e_linear(src, s.ens.x[k], s.c, eps2, k);
            change = std::fmax(change, max_abs(next[k] - s.e[k]));
        }
        ++s.iterations;
        const double scale = sup_abs(next);
        s.e = std::move(next);
        change = scale > 0 ? change / scale : 0.0;
        if (prev > 0) s.contraction = change / prev;
        s.fp_change = change;
        if (change <= s.fp_tol) break;
        if (prev > 0 && change >= prev)
            throw Error(ErrorKind::NonConvergence, "E* sweeps do not contract at c=" + std::to_string(s.c) +
                                                       " (ratio " + std::to_string(change / prev) + ")");
        if (s.iterations >= s.fp_max_iter)
            throw Error(ErrorKind::NonConvergence, "E* fixed point did not converge: last changes " +
                                                       std::to_string(prev) + ", " + std::to_string(change));
        prev = change;
    }
}

DVNState dvn_init(const ParticleEnsemble& f0, double c, const Softening& soft, double fp_tol, int fp_max_iter,
                  Streaming streaming) {
    check_c(c);
    DVNState s;
    s.c = c;
    s.soft = soft;
    s.ens = f0;
    s.streaming = streaming;
    s.fp_tol = fp_tol;
    s.fp_max_iter = fp_max_iter;
    dvn_resolve(s);
    return s;
}

DVNRates dvn_rates(const Vec3& p, double c, double psi, const Vec3& e, Streaming streaming) {
    const double ic2 = 1 / (c * c), p2 = norm2(p);
    DVNRates r;
    r.xdot = (1 - (streaming == Streaming::Full ? 1.0 : 0.5) * p2 * ic2) * p;
    r.s = psi + dot(p, e);
    r.pdot = -(r.s * p + (c * c * (1 - 0.5 * p2 * ic2)) * e);
    return r;
}

DVNState dvn_step(const DVNState& s, double dt) {
    if (!(dt > 0)) throw Error(ErrorKind::InvalidInput, "dt must be positive");
    const size_t n = s.ens.size();
    DVNState out = s;
    out.t = s.t + dt;
    if (n == 0) return out;
    std::vector<double> lw0(n);
    for (size_t k = 0; k < n; ++k) lw0[k] = std::log(s.ens.w[k]);
    struct K {
        std::vector<Vec3> x, p;
        std::vector<double> s;
    };
    auto rates = [&](const DVNState& st) {
        K k;
        k.x.resize(n), k.p.resize(n), k.s.resize(n);
        for (size_t j = 0; j < n; ++j) {
            auto r = dvn_rates(st.ens.p[j], st.c, st.psi[j], st.e[j], st.streaming);
            k.x[j] = r.xdot, k.p[j] = r.pdot, k.s[j] = r.s;
        }
        return k;
    };
    auto stage = [&](const K& k, double a, const std::vector<Vec3>& e_guess) {
        DVNState st = s;
        st.e = e_guess;
        for (size_t j = 0; j < n; ++j) {
            st.ens.x[j] = s.ens.x[j] + (a * dt) * k.x[j];
            st.ens.p[j] = s.ens.p[j] + (a * dt) * k.p[j];
            st.ens.w[j] = std::exp(lw0[j] + a * dt * k.s[j]);
        }
        dvn_resolve(st);
        return st;
    };
    DVNState base = s;
    if (base.psi.size() != n || base.e.size() != n) dvn_resolve(base);
    K k1 = rates(base);
    DVNState s2 = stage(k1, 0.5, base.e);
    K k2 = rates(s2);
    DVNState s3 = stage(k2, 0.5, s2.e);
    K k3 = rates(s3);
    DVNState s4 = stage(k3, 1.0, s3.e);
    K k4 = rates(s4);
    for (size_t j = 0; j < n; ++j) {
        out.ens.x[j] = s.ens.x[j] + (dt / 6) * (k1.x[j] + 2 * k2.x[j] + 2 * k3.x[j] + k4.x[j]);
        out.ens.p[j] = s.ens.p[j] + (dt / 6) * (k1.p[j] + 2 * k2.p[j] + 2 * k3.p[j] + k4.p[j]);
        const double sbar = (k1.s[j] + 2 * k2.s[j] + 2 * k3.s[j] + k4.s[j]) / 6;
        out.ens.w[j] = std::exp(lw0[j] + dt * sbar);
        out.ens.carried[j] = s.ens.carried[j] * std::exp(4 * dt * sbar);
    }
    out.e = s4.e;
    dvn_resolve(out);
    return out;
}

std::vector<PhiStar> phi_star_eval(const DVNState& s, const std::vector<Vec3>& targets) {
    check_c(s.c);
    const size_t n = s.ens.size();
    std::vector<PhiStar> out(targets.size());
    if (n == 0) return out;
    if (s.psi.size() != n || s.e.size() != n) throw Error(ErrorKind::NotPrepared, "phi* needs resolved fields");
    const double c = s.c, ic2 = 1 / (c * c), ic4 = ic2 * ic2, eps2 = s.soft.eps * s.soft.eps;
    std::vector<DVNRates> r(n);
    for (size_t j = 0; j < n; ++j) r[j] = dvn_rates(s.ens.p[j], c, s.psi[j], s.e[j], s.streaming);
    for (size_t i = 0; i < targets.size(); ++i) {
        PhiStar f;
        Vec3 g4;
        for (size_t j = 0; j < n; ++j) {
            const Vec3& p = s.ens.p[j];
            const Vec3 &yd = r[j].xdot, &pd = r[j].pdot;
            const double w = s.ens.w[j], wd = r[j].s * w;
            const double mu = mu_star_factor(p, c), mud = -dot(p, pd) * ic2;
            const Vec3 z = s.ens.x[j] - targets[i];
            const double R2 = norm2(z) + eps2, R = std::sqrt(R2), iR = 1 / R, iR3 = iR / R2, iR5 = iR3 / R2;
            const double zy = dot(z, yd), zp = dot(z, p), zpd = dot(z, pd);
            f.phi -= ic2 * w * mu * iR;
            f.grad += (-ic2 * w * mu * iR3) * z;
            f.dt_lead += ic2 * (-(wd * mu + w * mud) * iR + w * mu * zy * iR3);
            // d/dt [w z.p / R] along the characteristic and its z-gradient
            const Vec3 gG = iR * p - (zp * iR3) * z;
            const double D = wd * zp * iR + w * (dot(gG, yd) + zpd * iR);
            const Vec3 ggy = (-dot(p, yd) * iR3) * z - iR3 * (zy * p + zp * yd) + (3 * zp * zy * iR5) * z;
            const Vec3 gD = wd * gG + w * (ggy + iR * pd - (zpd * iR3) * z);
            f.phi4 -= 0.5 * ic4 * D;
            g4 += (0.5 * ic4) * gD;  // grad_x = -grad_z
        }
        f.phi += f.phi4;
        f.grad += g4;
        out[i] = f;
    }
    return out;
}

std::vector<DVNProbe> dvn_probe_fields(const DVNState& s, const std::vector<Vec3>& targets) {
    std::vector<DVNProbe> out(targets.size());
    if (s.ens.size() == 0) return out;
    auto psi = psi_star_eval(s.ens, targets, s.c, s.soft);
    auto e = e_star_eval(s.ens, s.psi, s.e, targets, s.c, s.soft);
    for (size_t i = 0; i < targets.size(); ++i) out[i] = {psi[i], e[i]};
    return out;
}

DVNRun dvn_run(const DVNState& s0, double dt, int n) {
    DVNRun run;
    run.states.push_back(s0);
    const double e0 = sup_abs(s0.e);
    for (int i = 0; i < n; ++i) {
        run.states.push_back(dvn_step(run.states.back(), dt));
        if (e0 > 0 && sup_abs(run.states.back().e) > 10 * e0) {
            run.blew_up = true;
            break;
        }
    }
    return run;
}

}  // namespace kin
