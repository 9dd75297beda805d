#include "kin/darwin.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "kin/errors.hpp"
#include "kin/hermite.hpp"
#include "kin/quadrature.hpp"

namespace kin {

std::vector<double> DarwinState::f_values() const {
    if (!lvp.eulerian) throw Error(ErrorKind::NotPrepared, "f^D values need the Eulerian correction");
    const auto& e = lvp.vp.ens;
    std::vector<double> out(e.size());
    const double k = std::isinf(c) ? 0.0 : inv_c2();
    for (size_t i = 0; i < e.size(); ++i) out[i] = e.carried[i] + k * lvp.f2[i];
    return out;
}

std::vector<FieldValue> DarwinState::fields(const std::vector<Vec3>& targets) const {
    std::vector<FieldValue> out(targets.size());
    if (std::isinf(c) || lvp.vp.ens.size() == 0) return out;
    auto src = darwin_sources(lvp, true, true);
    const double e2 = lvp.vp.soft.eps * lvp.vp.soft.eps, k2 = inv_c2(), k4 = k2 * k2;
    for (size_t i = 0; i < targets.size(); ++i) {
        auto f = darwin_fields_at(targets[i], src, e2, kD2 | kD4 | kD4Dt);
        out[i] = {k2 * f.phi2 + k4 * f.phi4, k2 * f.dt_phi2 + k4 * f.dt_phi4, k2 * f.grad2 + k4 * f.grad4};
    }
    return out;
}

DarwinState assemble_darwin(const VPState& vp, const LVPState& lvp, double c) {
    if (!(c > 0)) throw Error(ErrorKind::InvalidInput, "c must be positive");
    const auto& a = vp.ens;
    const auto& b = lvp.vp.ens;
    if (a.size() != b.size() || vp.t != lvp.vp.t)
        throw Error(ErrorKind::InconsistentState, "VP and LVP states differ in particle count or time");
    for (size_t k = 0; k < a.size(); ++k)
        if (max_abs(a.x[k] - b.x[k]) != 0 || max_abs(a.p[k] - b.p[k]) != 0 || a.w[k] != b.w[k])
            throw Error(ErrorKind::InconsistentState, "VP and LVP particle " + std::to_string(k) + " differ");
    return DarwinState{c, lvp};
}

FieldValue MatchedInitialData::at(const Vec3& x) const {
    if (sources.n == 0) return {};
    auto f = darwin_fields_at(x, sources, eps2, kD2 | kD4 | kD4Dt);
    const double k2 = 1.0 / (c * c), k4 = k2 * k2;
    return {k2 * f.phi2 + k4 * f.phi4, k2 * f.dt_phi2 + k4 * f.dt_phi4, k2 * f.grad2 + k4 * f.grad4};
}
double MatchedInitialData::phi0(const Vec3& x) const { return at(x).phi; }
double MatchedInitialData::phi1(const Vec3& x) const { return at(x).dt_phi; }
Vec3 MatchedInitialData::grad_phi0(const Vec3& x) const { return at(x).grad; }

MatchedInitialData matched_initial_data(const VPState& vp0, const LVPState& lvp0, double c) {
    if (vp0.t != 0 || lvp0.vp.t != 0) throw Error(ErrorKind::InvalidInput, "matched data needs t = 0 states");
    assemble_darwin(vp0, lvp0, c);
    MatchedInitialData m;
    m.bump = lvp0.bump;
    m.c = c;
    m.eps2 = vp0.soft.eps * vp0.soft.eps;
    if (vp0.ens.size() > 0) m.sources = darwin_sources(lvp0, true, true);
    return m;
}

// ---------------------------------------------------------------------------
// pointwise f0, f2 by backward characteristics

namespace {

struct Trace {
    Vec3 x, p;
    Mat6 M, Q;
    std::array<double, 6> V;
    double sigma;
};

Trace trace_rate(const Trace& s, const DarwinFields& f, bool phi4) {
    Trace d{};
    d.x = s.p;
    d.p = -f.grad2;
    const Sym3& H = f.hess2;
    for (int c = 0; c < 6; ++c) {
        for (int r = 0; r < 3; ++r) {
            d.M[r * 6 + c] = s.M[(r + 3) * 6 + c];
            double acc = 0;
            for (int q = 0; q < 3; ++q) acc += H(r, q) * s.M[q * 6 + c];
            d.M[(r + 3) * 6 + c] = -acc;
        }
    }
    // dQ/ds = -Q A
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int m = 0; m < 3; ++m) acc -= s.Q[i * 6 + 3 + m] * H(m, j);
            d.Q[i * 6 + j] = -acc;
            d.Q[i * 6 + 3 + j] = -s.Q[i * 6 + j];
        }
    }
    const double h = 0.5 * norm2(s.p);
    const double st = f.dt_phi2 + dot(s.p, f.grad2);
    const Vec3 bx = h * s.p;
    const Vec3 bp = st * s.p - h * f.grad2 + (phi4 ? f.grad4 : Vec3{});
    const double beta[6] = {bx.x, bx.y, bx.z, bp.x, bp.y, bp.z};
    for (int i = 0; i < 6; ++i) {
        double acc = 0;
        for (int j = 0; j < 6; ++j) acc += s.Q[i * 6 + j] * beta[j];
        d.V[i] = -acc;
    }
    d.sigma = -4 * st;
    return d;
}

Trace trace_axpy(const Trace& a, double h, const Trace& d) {
    Trace r = a;
    r.x += h * d.x;
    r.p += h * d.p;
    for (int i = 0; i < 36; ++i) r.M[i] += h * d.M[i], r.Q[i] += h * d.Q[i];
    for (int i = 0; i < 6; ++i) r.V[i] += h * d.V[i];
    r.sigma += h * d.sigma;
    return r;
}

}  // namespace

std::vector<DensityPair> darwin_density_at(const LVPRun& run, double t, const std::vector<Vec3>& x,
                                           const std::vector<Vec3>& p, bool phi4_coupling) {
    if (x.size() != p.size()) throw Error(ErrorKind::InvalidInput, "positions and momenta differ in length");
    if (run.states.empty()) throw Error(ErrorKind::NotPrepared, "empty LVP run");
    const auto& s0 = run.states.front();
    const double e2 = s0.vp.soft.eps * s0.vp.soft.eps;
    const size_t n = x.size();
    std::vector<Trace> tr(n);
    Mat6 I{};
    for (int i = 0; i < 6; ++i) I[i * 7] = 1;
    for (size_t k = 0; k < n; ++k) tr[k] = {x[k], p[k], I, I, {}, 0.0};
    if (t > 0) {
        if (run.states.size() < 2) throw Error(ErrorKind::InsufficientHistory, "LVP run has a single frame");
        const int steps = std::max(1, static_cast<int>(std::ceil(t / run.dt - 1e-9)));
        const double h = -t / steps;
        std::map<double, DarwinSources> cache;
        auto fields = [&](double s, const Vec3& at) -> DarwinFields {
            auto it = cache.find(s);
            if (it == cache.end()) {
                if (cache.size() > 4) cache.clear();
                it = cache.emplace(s, run.sources_at(s)).first;
            }
            return darwin_fields_at(at, it->second, e2, phi4_coupling ? (kD2 | kD2Hess | kD4) : (kD2 | kD2Hess));
        };
        double s = t;
        for (int i = 0; i < steps; ++i) {
            const double sm = s + 0.5 * h, s1 = (i + 1 == steps) ? 0.0 : s + h;
            for (size_t k = 0; k < n; ++k) {
                const Trace& y = tr[k];
                Trace k1 = trace_rate(y, fields(s, y.x), phi4_coupling);
                Trace y2 = trace_axpy(y, 0.5 * h, k1);
                Trace k2 = trace_rate(y2, fields(sm, y2.x), phi4_coupling);
                Trace y3 = trace_axpy(y, 0.5 * h, k2);
                Trace k3 = trace_rate(y3, fields(sm, y3.x), phi4_coupling);
                Trace y4 = trace_axpy(y, h, k3);
                Trace k4 = trace_rate(y4, fields(s1, y4.x), phi4_coupling);
                Trace out = trace_axpy(y, h / 6, k1);
                out = trace_axpy(out, h / 3, k2);
                out = trace_axpy(out, h / 3, k3);
                tr[k] = trace_axpy(out, h / 6, k4);
            }
            s = s1;
        }
    }
    std::vector<DensityPair> out(n);
    for (size_t k = 0; k < n; ++k) {
        const Trace& z = tr[k];
        const double f0 = bump::value(s0.bump, z.x, z.p);
        Vec3 gx, gp;
        bump::gradient(s0.bump, z.x, z.p, gx, gp);
        const double g[6] = {gx.x, gx.y, gx.z, gp.x, gp.y, gp.z};
        double f2 = f0 * z.sigma;
        for (int i = 0; i < 6; ++i) {
            double mv = 0;
            for (int j = 0; j < 6; ++j) mv += z.M[i * 6 + j] * z.V[j];
            f2 += g[i] * mv;
        }
        out[k] = {f0, f2};
    }
    return out;
}

// ---------------------------------------------------------------------------
// light-cone split

namespace {

constexpr double kPi = std::numbers::pi;

// Normalised Gaussian as a function of q = |u|^2 with its q-derivatives.
struct Gauss {
    double norm, k, cut2;
    Gauss(double sigma, double cutoff)
        : norm(std::pow(2 * kPi * sigma * sigma, -1.5)), k(0.5 / (sigma * sigma)),
          cut2(cutoff * cutoff * sigma * sigma) {}
};

// s-derivatives of W(X - y(s)) for y' = v, y'' = a, y''' = j.
struct Blob {
    double W = 0, g1 = 0, g2 = 0, g3 = 0;
};

inline Blob blob(const Gauss& G, const Vec3& u, const Vec3& v, const Vec3& a, const Vec3& j, int order) {
    Blob b;
    const double q = norm2(u);
    if (q >= G.cut2) return b;
    const double p0 = G.norm * std::exp(-G.k * q);
    const double p1 = -G.k * p0, p2 = -G.k * p1, p3 = -G.k * p2;
    b.W = p0;
    if (order < 1) return b;
    const double uv = dot(u, v);
    b.g1 = -2 * p1 * uv;
    if (order < 2) return b;
    const double vv = norm2(v), ua = dot(u, a);
    b.g2 = 2 * p1 * vv + 4 * p2 * uv * uv - 2 * p1 * ua;
    if (order < 3) return b;
    b.g3 = -(12 * p2 * uv * vv + 8 * p3 * uv * uv * uv) + 3 * (2 * p1 * dot(v, a) + 4 * p2 * uv * ua) -
           2 * p1 * dot(u, j);
    return b;
}

// Particle data at one time; Lagrangian quantities carry the c^-2 corrections.
struct Snapshot {
    std::vector<Vec3> y, v, a, j, Y, Ydot, P;
    std::vector<double> w, What, Whatdot, st;
    size_t size() const { return y.size(); }
};

Snapshot snapshot_at(const LVPRun& run, double s, double ic2) {
    const auto& fr = run.vp_frames;
    const size_t k = fr.segment(s);
    const double h = fr.t[k + 1] - fr.t[k];
    const double u = (s - fr.t[k]) / h;
    const auto& w = run.states.front().vp.ens.w;
    const size_t n = w.size();
    Snapshot o;
    for (auto* v : {&o.y, &o.v, &o.a, &o.j, &o.Y, &o.Ydot, &o.P}) v->resize(n);
    o.w = w;
    o.What.resize(n), o.Whatdot.resize(n), o.st.resize(n);
    for (size_t i = 0; i < n; ++i) {
        Vec3 c[6];
        hermite::quintic(fr.x[k][i], fr.v[k][i], fr.a[k][i], fr.x[k + 1][i], fr.v[k + 1][i], fr.a[k + 1][i], h, c);
        hermite::eval(c, u, h, o.y[i], o.v[i], o.a[i]);
        o.j[i] = hermite::third(c, u, h);
        Vec3 d[4], dy, ddy, unused;
        hermite::cubic(run.dy[k][i], run.dv[k][i], run.dy[k + 1][i], run.dv[k + 1][i], h, d);
        hermite::eval(d, u, h, dy, ddy, unused);
        double q[4], lw, st, un;
        hermite::cubic(run.dlnw[k][i], run.stilde[k][i], run.dlnw[k + 1][i], run.stilde[k + 1][i], h, q);
        hermite::eval(q, u, h, lw, st, un);
        o.Y[i] = o.y[i] + ic2 * dy;
        o.Ydot[i] = o.v[i] + ic2 * ddy;
        o.P[i] = o.Ydot[i] + (ic2 * 0.5 * norm2(o.v[i])) * o.v[i];
        o.What[i] = w[i] * (1 + ic2 * lw);
        o.Whatdot[i] = w[i] * ic2 * st;
        o.st[i] = st;
    }
    return o;
}

struct ShellRule {
    int nt = 0, np = 0;
    std::vector<double> ct, stt, wt, cp, sp;
    double dphi = 0;
};

const ShellRule& shell_rule(std::map<int, ShellRule>& cache, int nt) {
    auto it = cache.find(nt);
    if (it != cache.end()) return it->second;
    ShellRule r;
    r.nt = nt;
    r.np = 2 * nt;
    auto gl = quad::gauss_legendre(nt);
    r.ct = gl.x;
    r.wt = gl.w;
    for (double c : r.ct) r.stt.push_back(std::sqrt(std::fmax(0.0, 1 - c * c)));
    r.dphi = 2 * kPi / r.np;
    for (int j = 0; j < r.np; ++j) {
        r.cp.push_back(std::cos((j + 0.5) * r.dphi));
        r.sp.push_back(std::sin((j + 0.5) * r.dphi));
    }
    return cache.emplace(nt, std::move(r)).first->second;
}

// Visit the nodes of the sphere |z| = r (around x) that lie within `reach` of
// the point x + d; f(omega, weight) with weights summing to 4 pi.
template <class F>
void visit_cap(const ShellRule& R, double r, const Vec3& d, double reach, F&& f) {
    const double rho = norm(d);
    double cos_a = -2;
    if (rho > 1e-14 && r > 1e-14) cos_a = (r * r + rho * rho - reach * reach) / (2 * r * rho);
    if (cos_a > 1) return;
    const bool whole = cos_a <= -1;
    const double cd = whole ? 1 : d.z / rho;
    const double sd = std::sqrt(std::fmax(0.0, 1 - cd * cd));
    const double phid = whole ? 0 : std::atan2(d.y, d.x);
    for (int i = 0; i < R.nt; ++i) {
        const double c = R.ct[i], s = R.stt[i];
        int j0 = 0, j1 = R.np - 1;
        if (!whole) {
            const double ss = s * sd;
            if (ss < 1e-14) {
                if (c * cd < cos_a) continue;
            } else {
                const double cdel = (cos_a - c * cd) / ss;
                if (cdel > 1) continue;
                if (cdel > -1) {
                    const double del = std::acos(cdel);
                    j0 = static_cast<int>(std::ceil((phid - del) / R.dphi - 0.5));
                    j1 = static_cast<int>(std::floor((phid + del) / R.dphi - 0.5));
                    if (j1 - j0 + 1 >= R.np) j0 = 0, j1 = R.np - 1;
                }
            }
        }
        const double wt = R.wt[i] * R.dphi;
        for (int jj = j0; jj <= j1; ++jj) {
            const int j = ((jj % R.np) + R.np) % R.np;
            f(Vec3{s * R.cp[j], s * R.sp[j], c}, wt);
        }
    }
}

void panels(double a, double b, double len, int n, std::vector<double>& r, std::vector<double>& w) {
    if (b <= a) return;
    const int m = std::max(1, static_cast<int>(std::ceil((b - a) / len)));
    for (int i = 0; i < m; ++i) {
        auto g = quad::gauss_legendre(n, a + (b - a) * i / m, a + (b - a) * (i + 1) / m);
        r.insert(r.end(), g.x.begin(), g.x.end());
        w.insert(w.end(), g.w.begin(), g.w.end());
    }
}

}  // namespace

RepResult darwin_representation(const LVPRun& run, double c, double t, const Vec3& x, const RepOptions& opt) {
    if (!(c > 0) || std::isinf(c)) throw Error(ErrorKind::InvalidInput, "representation needs finite c > 0");
    if (run.states.empty()) throw Error(ErrorKind::NotPrepared, "empty LVP run");
    const auto& fr = run.vp_frames;
    if (t < 0 || (fr.frames() < 2 && t > 0) || (fr.frames() >= 2 && t > fr.t.back() + 1e-12))
        throw Error(ErrorKind::InsufficientHistory,
                    "representation at t=" + std::to_string(t) + " needs history on [0, t]");
    RepResult out;
    if (run.states.front().vp.ens.size() == 0) return out;
    const double ic = 1 / c, ic2 = ic * ic, ic3 = ic2 * ic, ic4 = ic2 * ic2, ic5 = ic4 * ic;
    const Gauss G(opt.sigma, opt.cutoff);
    const double cut = opt.cutoff * opt.sigma;
    std::map<int, ShellRule> rules;
    auto rule_for = [&](double r) -> const ShellRule& {
        int nt = std::max(8, static_cast<int>(std::ceil(kPi * r / (opt.angular * opt.sigma))));
        return shell_rule(rules, nt);
    };
    const double ct = c * t;
    auto snap = [&](double s) {
        if (fr.frames() < 2) {
            // a single frame: only t = 0 is reachable
            const auto& st = run.states.front();
            Snapshot o;
            o.y = o.Y = st.vp.ens.x;
            o.v = o.Ydot = o.P = st.vp.ens.p;
            o.a = fr.a[0];
            o.j = vp_force_rates(st.vp.ens.x, st.vp.ens.p, st.vp.ens.w, st.vp.soft);
            for (auto& q : o.j) q = -q;
            o.w = o.What = st.vp.ens.w;
            o.Whatdot.assign(o.w.size(), 0.0);
            o.st = run.stilde[0];
            return o;
        }
        return snapshot_at(run, s, ic2);
    };
    auto reach_of = [&](const Snapshot& S, size_t k) { return cut + norm(S.Y[k] - S.y[k]); };

    // present time: direct integrals over all space, exterior over |z| >= ct
    {
        const Snapshot S = snap(t);
        double rmax = 0;
        for (size_t k = 0; k < S.size(); ++k) rmax = std::fmax(rmax, norm(S.Y[k] - x) + reach_of(S, k));
        std::vector<double> rr, ww;
        panels(0, std::fmin(ct, rmax), opt.panel * opt.sigma, opt.gl_nodes, rr, ww);
        const size_t n_in = rr.size();
        panels(ct, rmax, opt.panel * opt.sigma, opt.gl_nodes, rr, ww);
        for (size_t ir = 0; ir < rr.size(); ++ir) {
            const double r = rr[ir], wr = ww[ir] * r * r;
            const bool exterior = ir >= n_in;
            const ShellRule& R = rule_for(r);
            Vec3 g{};
            double val = 0, dtv = 0, dte = 0;
            for (size_t k = 0; k < S.size(); ++k) {
                const Vec3 d = S.Y[k] - x;
                if (std::fabs(norm(d) - r) >= reach_of(S, k)) continue;
                const Vec3 p = S.v[k];
                const double p2 = norm2(p), w = S.w[k];
                visit_cap(R, r, d, reach_of(S, k), [&](const Vec3& om, double wq) {
                    const Vec3 X = x + r * om;
                    const Blob L = blob(G, X - S.Y[k], S.Ydot[k], Vec3{}, Vec3{}, 1);
                    const Blob B = blob(G, X - S.y[k], p, S.a[k], S.j[k], 3);
                    if (L.W == 0 && B.W == 0) return;
                    const double dens = S.What[k] * L.W - ic2 * w * 0.5 * p2 * B.W;
                    g += wq * (-ic2 / (r * r) * dens + 0.5 * ic4 * w * B.g2) * om;
                    val += wq * (-ic2 / r * dens - 0.5 * ic4 * r * w * B.g2);
                    const double ddens = S.Whatdot[k] * L.W + S.What[k] * L.g1 -
                                         ic2 * w * (dot(p, S.a[k]) * B.W + 0.5 * p2 * B.g1);
                    dtv += wq * (-ic2 / r * ddens - 0.5 * ic4 * r * w * B.g3);
                    dte += wq * ic2 * dot(om, S.P[k]) / (r * r) * S.What[k] * L.W;
                });
            }
            out.grad.direct += wr * g;
            out.value.direct += wr * val;
            out.dt.direct += wr * dtv;
            if (exterior) {
                out.grad.ext += wr * g;
                out.value.ext += wr * val;
                out.dt.ext += wr * dte;
            }
        }
    }
    if (t <= 0) return out;

    // interior: retarded time t - r/c on each shell
    {
        double supp = 0;
        for (size_t f = 0; f < fr.frames() && fr.t[f] <= t + 1e-12; ++f)
            for (size_t k = 0; k < fr.x[f].size(); ++k)
                supp = std::fmax(supp, norm(fr.x[f][k]) + ic2 * norm(run.dy[f][k]));
        const double rmax = norm(x) + supp + cut + 0.05;
        std::vector<double> rr, ww;
        panels(0, std::fmin(ct, rmax), opt.panel * opt.sigma, opt.gl_nodes, rr, ww);
        for (size_t ir = 0; ir < rr.size(); ++ir) {
            const double r = rr[ir], wr = ww[ir] * r * r;
            const Snapshot S = snap(std::fmax(0.0, t - r * ic));
            const ShellRule& R = rule_for(r);
            Vec3 g{};
            double val = 0, dtv = 0;
            for (size_t k = 0; k < S.size(); ++k) {
                const Vec3 d = S.Y[k] - x;
                if (std::fabs(norm(d) - r) >= reach_of(S, k)) continue;
                const Vec3 P = S.P[k], F = -S.a[k], Fd = -S.j[k];
                const double P2 = norm2(P), PF = dot(P, F), st = S.st[k];
                visit_cap(R, r, d, reach_of(S, k), [&](const Vec3& om, double wq) {
                    const Vec3 X = x + r * om;
                    const Blob L = blob(G, X - S.Y[k], Vec3{}, Vec3{}, Vec3{}, 0);
                    const Blob B = blob(G, X - S.y[k], S.v[k], Vec3{}, Vec3{}, 1);
                    if (L.W == 0 && B.W == 0) return;
                    const double m = S.What[k] * L.W;
                    const double zP = dot(om, P), zF = dot(om, F);
                    const double ir2 = 1 / (r * r), ir1 = 1 / r;
                    Vec3 k1 = (-ic2 * ir2) * om;
                    k1 += (ic3 * ir2) * (2 * zP * om - P);
                    k1 += (ic4 * ir2) * ((-3 * zP * zP + 1.5 * P2) * om + zP * P);
                    k1 += (-ic4 * ir1 * zF) * om;
                    k1 += (ic5 * ir2) * ((4 * zP * zP * zP - 4 * zP * P2) * om + (P2 - zP * zP) * P);
                    k1 += (ic5 * ir1 * (2 * zP * zF - PF - st)) * om;
                    g += (wq * m) * k1;
                    g += (wq * (-ic5 / 3) * S.w[k]) * (B.W * Fd + B.g1 * F);
                    val += wq * m * (-ic2 * ir1);
                    dtv += wq * m * (ic2 * zP * ir2 - ic3 * zF * ir1 + ic3 * (P2 - 2 * zP * zP) * ir2);
                });
            }
            out.grad.interior += wr * g;
            out.value.interior += wr * val;
            out.dt.interior += wr * dtv;
        }
    }

    // boundary sphere |z| = ct with t = 0 data
    {
        const Snapshot S = snap(0.0);
        const double r = ct;
        const ShellRule& R = rule_for(r);
        Vec3 g{};
        double val = 0, dtv = 0;
        for (size_t k = 0; k < S.size(); ++k) {
            const Vec3 d = S.y[k] - x;
            if (std::fabs(norm(d) - r) >= cut) continue;
            const Vec3 p = S.v[k], pd = S.a[k], pdd = S.j[k];
            const double p2 = norm2(p), w = S.w[k];
            visit_cap(R, r, d, cut, [&](const Vec3& om, double wq) {
                const Blob B = blob(G, x + r * om - S.y[k], p, pd, pdd, 2);
                if (B.W == 0) return;
                const double zp = dot(om, p), zpd = dot(om, pd), zpdd = dot(om, pdd);
                g += (wq * w * B.W * ic4 / t * zp * (1 - zp * ic + (zp * zp - p2) * ic2)) * om;
                const double h2 = zpdd * B.W + 2 * zpd * B.g1 + zp * B.g2;
                g += (wq * w * (-t * ic4 / 3) * h2) * om;
                g += (wq * w * (-ic5 / 3)) * ((zpd * B.W + zp * B.g1) * p + (zp * B.W) * pd);
                val += wq * w * ic3 * zp * B.W;
                dtv += wq * w * (-ic4 / t) * zp * zp * B.W;
            });
        }
        out.grad.bd = (r * r) * g;
        out.value.bd = r * r * val;
        out.dt.bd = r * r * dtv;
    }
    return out;
}

RepParts<Vec3> darwin_gradient_representation(const LVPRun& run, double c, double t, const Vec3& x,
                                              const RepOptions& opt) {
    return darwin_representation(run, c, t, x, opt).grad;
}

RepParts<double> darwin_time_derivative_representation(const LVPRun& run, double c, double t, const Vec3& x,
                                                       const RepOptions& opt) {
    return darwin_representation(run, c, t, x, opt).dt;
}

}  // namespace kin
