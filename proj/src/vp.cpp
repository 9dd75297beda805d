#include "kin/vp.hpp"

#include <algorithm>
#include <cmath>

#include "kin/errors.hpp"
#include "kin/hermite.hpp"
#include "kin/pairwise.hpp"

namespace kin {

std::vector<Vec3> vp_forces(const std::vector<Vec3>& x, const std::vector<double>& w, const Softening& soft) {
    pairwise::Sources src(x, nullptr, w);
    std::vector<Vec3> out(x.size());
    const double e2 = soft.eps * soft.eps;
    for (size_t k = 0; k < x.size(); ++k) out[k] = pairwise::evaluate<pairwise::kGrad>(x[k], src, e2, k).grad;
    return out;
}

std::vector<Vec3> vp_force_rates(const std::vector<Vec3>& x, const std::vector<Vec3>& p,
                                 const std::vector<double>& w, const Softening& soft) {
    pairwise::Sources src(x, &p, w);
    std::vector<Vec3> out(x.size());
    const double e2 = soft.eps * soft.eps;
    for (size_t k = 0; k < x.size(); ++k) {
        auto f = pairwise::evaluate<pairwise::kHess | pairwise::kDtGrad>(x[k], src, e2, k);
        out[k] = f.dt_grad + f.hess * p[k];
    }
    return out;
}

VPState vp_step(const VPState& s, double dt) {
    if (dt == 0) throw Error(ErrorKind::InvalidInput, "vp_step: dt must be nonzero");
    const size_t n = s.ens.size();
    const auto& x0 = s.ens.x;
    const auto& p0 = s.ens.p;
    std::vector<Vec3> kx[4], kp[4], xs(n), ps(n);
    const double c[4] = {0, 0.5, 0.5, 1.0};
    for (int st = 0; st < 4; ++st) {
        if (st == 0) {
            xs = x0;
            ps = p0;
        } else {
            for (size_t k = 0; k < n; ++k) {
                xs[k] = x0[k] + (c[st] * dt) * kx[st - 1][k];
                ps[k] = p0[k] + (c[st] * dt) * kp[st - 1][k];
            }
        }
        kx[st] = ps;
        auto f = vp_forces(xs, s.ens.w, s.soft);
        kp[st].resize(n);
        for (size_t k = 0; k < n; ++k) kp[st][k] = -f[k];
    }
    VPState out = s;
    out.t = s.t + dt;
    for (size_t k = 0; k < n; ++k) {
        out.ens.x[k] = x0[k] + (dt / 6) * (kx[0][k] + 2.0 * kx[1][k] + 2.0 * kx[2][k] + kx[3][k]);
        out.ens.p[k] = p0[k] + (dt / 6) * (kp[0][k] + 2.0 * kp[1][k] + 2.0 * kp[2][k] + kp[3][k]);
    }
    return out;
}

double vp_energy(const VPState& s) {
    const auto& e = s.ens;
    pairwise::Sources src(e.x, nullptr, e.w);
    const double e2 = s.soft.eps * s.soft.eps;
    double kin = 0, pot = 0;
    for (size_t k = 0; k < e.size(); ++k) {
        kin += 0.5 * e.w[k] * norm2(e.p[k]);
        pot += 0.5 * e.w[k] * pairwise::evaluate<pairwise::kPhi>(e.x[k], src, e2, k).phi;
    }
    return kin + pot;
}

Vec3 vp_momentum(const VPState& s) {
    Vec3 P;
    for (size_t k = 0; k < s.ens.size(); ++k) P += s.ens.w[k] * s.ens.p[k];
    return P;
}

std::vector<GridField> vp_time_derivatives(const VPState& s, const GridSpec& g, int order) {
    if (order < 1 || order > 3) throw Error(ErrorKind::UnsupportedOrder, "vp_time_derivatives: order must be 1..3");
    const auto& e = s.ens;
    const size_t n = e.size();
    std::vector<GridField> out;
    if (n == 0) {
        for (int k = 0; k < order; ++k) out.emplace_back(g.count(), 0.0);
        return out;
    }
    // Time derivatives become spatial derivatives of particle moments; the
    // spatial derivatives are taken on the deposition kernel itself.
    std::vector<std::vector<double>> store;
    std::vector<DerivTerm> terms;
    auto term = [&](auto fn) {
        store.emplace_back(n);
        for (size_t k = 0; k < n; ++k) store.back()[k] = fn(k);
    };
    auto multi = [](std::initializer_list<int> axes) {
        int m[3] = {0, 0, 0};
        for (int a : axes) ++m[a];
        return std::array<int, 3>{m[0], m[1], m[2]};
    };
    struct Pending {
        std::array<int, 3> d;
        size_t slot;
    };
    std::vector<Pending> pend;
    auto add = [&](std::array<int, 3> d, auto fn) {
        term(fn);
        pend.push_back({d, store.size() - 1});
    };
    auto flush = [&] {
        terms.clear();
        for (auto& p : pend) terms.push_back({p.d[0], p.d[1], p.d[2], store[p.slot].data()});
        out.push_back(deposit_derivatives(e.x, terms, g));
        pend.clear();
    };
    const auto& w = e.w;
    const auto& p = e.p;
    // d_t mu = -d_i j_i
    for (int i = 0; i < 3; ++i) add(multi({i}), [&](size_t k) { return -w[k] * p[k][i]; });
    flush();
    if (order < 2) return out;
    auto F = vp_forces(e.x, e.w, s.soft);
    // d_t^2 mu = d_i d_j Pi_ij + d_i G_i
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) add(multi({i, j}), [&](size_t k) { return w[k] * p[k][i] * p[k][j]; });
        add(multi({i}), [&](size_t k) { return w[k] * F[k][i]; });
    }
    flush();
    if (order < 3) return out;
    auto Fdot = vp_force_rates(e.x, e.p, e.w, s.soft);
    // d_t^3 mu = -d_ijl T_ijl - d_ij (F_i p_j + p_i F_j) + d_i Fdot_i - d_il F_i p_l
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            for (int l = 0; l < 3; ++l)
                add(multi({i, j, l}), [&](size_t k) { return -w[k] * p[k][i] * p[k][j] * p[k][l]; });
            add(multi({i, j}), [&](size_t k) { return -w[k] * (F[k][i] * p[k][j] + p[k][i] * F[k][j] + F[k][i] * p[k][j]); });
        }
        add(multi({i}), [&](size_t k) { return w[k] * Fdot[k][i]; });
    }
    flush();
    return out;
}

Vec3 rad_identity_residual(const VPState& s) {
    const auto& e = s.ens;
    if (e.size() < 2) return {};
    auto F = vp_forces(e.x, e.w, s.soft);
    Vec3 sum;
    double sup = 0, mass = 0;
    for (size_t k = 0; k < e.size(); ++k) {
        sum += e.w[k] * F[k];
        sup = std::fmax(sup, norm(F[k]));
        mass += e.w[k];
    }
    if (sup == 0 || mass == 0) return {};
    return sum / (mass * sup);
}

OrtResiduals ort_residuals(const VPState& s, const GridSpec& g) {
    OrtResiduals r;
    if (s.ens.size() == 0) return r;
    auto d = vp_time_derivatives(s, g, 2);
    const auto& d2 = d[1];
    const double vol = g.cell_volume();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                double v = d2[g.index(i, j, k)] * vol;
                r.mass += v;
                r.moment += v * g.node(i, j, k);
            }
    return r;
}

void TrajectoryFrames::append(double time, std::vector<Vec3> xs, std::vector<Vec3> vs, std::vector<Vec3> as) {
    t.push_back(time);
    x.push_back(std::move(xs));
    v.push_back(std::move(vs));
    a.push_back(std::move(as));
}

size_t TrajectoryFrames::segment(double s) const {
    if (t.size() < 2) throw Error(ErrorKind::InsufficientHistory, "trajectory needs at least two frames");
    const bool inc = t.back() > t.front();
    const double lo = inc ? t.front() : t.back(), hi = inc ? t.back() : t.front();
    const double slack = 1e-9 * std::fabs(t[1] - t[0]);
    if (s < lo - slack || s > hi + slack)
        throw Error(ErrorKind::InsufficientHistory, "trajectory covers [" + std::to_string(lo) + ", " +
                                                        std::to_string(hi) + "], requested " + std::to_string(s));
    double u = (s - t.front()) / (t[1] - t[0]);
    long k = static_cast<long>(std::floor(u));
    return static_cast<size_t>(std::clamp<long>(k, 0, static_cast<long>(t.size()) - 2));
}

void TrajectoryFrames::at(double s, std::vector<Vec3>& xs, std::vector<Vec3>& vs, std::vector<Vec3>& as) const {
    size_t k = segment(s);
    const double h = t[k + 1] - t[k];
    const double u = (s - t[k]) / h;
    const size_t n = x[k].size();
    xs.resize(n);
    vs.resize(n);
    as.resize(n);
    for (size_t i = 0; i < n; ++i) {
        Vec3 c[6];
        hermite::quintic(x[k][i], v[k][i], a[k][i], x[k + 1][i], v[k + 1][i], a[k + 1][i], h, c);
        hermite::eval(c, u, h, xs[i], vs[i], as[i]);
    }
}

VPRun vp_run(const VPState& s0, double dt, int n) {
    VPRun run;
    run.states.push_back(s0);
    auto frame = [&](const VPState& s) {
        auto F = vp_forces(s.ens.x, s.ens.w, s.soft);
        for (auto& f : F) f = -f;
        run.frames.append(s.t, s.ens.x, s.ens.p, std::move(F));
    };
    frame(s0);
    for (int i = 0; i < n; ++i) {
        run.states.push_back(vp_step(run.states.back(), dt));
        frame(run.states.back());
    }
    return run;
}

}  // namespace kin
