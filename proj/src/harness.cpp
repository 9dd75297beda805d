#include "kin/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "kin/errors.hpp"

namespace kin {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point a) { return std::chrono::duration<double>(Clock::now() - a).count(); }

// two-sided 95% Student quantiles, dof 1..10
double t95(int dof) {
    static const double q[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228};
    return dof >= 1 && dof <= 10 ? q[dof - 1] : 1.96;
}

std::vector<Vec3> probe_ball(int count, double radius) {
    // cubic lattice in [-r, r]^3 scaled into the ball
    const int m = std::max(2, static_cast<int>(std::lround(std::cbrt(static_cast<double>(count)))));
    std::vector<Vec3> out;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k) {
                Vec3 u{-1 + 2.0 * i / (m - 1), -1 + 2.0 * j / (m - 1), -1 + 2.0 * k / (m - 1)};
                out.push_back((radius / std::sqrt(3.0)) * u);
            }
    return out;
}

struct DarwinRaw {
    double phi2 = 0, phi4 = 0, dt2 = 0, dt4 = 0;
    Vec3 g2, g4;
};

FieldValue combine(const DarwinRaw& d, double c) {
    const double a = 1 / (c * c), b = a * a;
    return {a * d.phi2 + b * d.phi4, a * d.dt2 + b * d.dt4, a * d.g2 + b * d.g4};
}

// Pre-history span so that every target within `reach` of the origin sees
// sources inside the backward run at t = 0.
double history_span(const ParticleEnsemble& e, double reach, double c, double eps) {
    double r0 = 0, v = 0;
    for (size_t k = 0; k < e.size(); ++k) {
        r0 = std::max(r0, norm(e.x[k]));
        v = std::max(v, norm(e.p[k]));
    }
    v = std::min(v, 0.9 * c);
    return (reach + r0 + eps) / (c - v);
}

struct Shared {
    VPState vp0;
    LVPRun fwd;
    std::vector<int> out_steps;
    std::vector<Vec3> field_probes;
    std::vector<std::vector<Vec3>> fx, fp;            // f probes per output time
    std::vector<std::vector<DensityPair>> fd;         // Darwin f0, f2 there
    std::vector<std::vector<DarwinRaw>> dfield;       // Darwin fields at field probes
    GridSpec energy_box;
    double energy_reach = 0;
};

struct VNRunResult {
    VNState final_state;
    std::vector<DiagnosticsRow> diag;
};

VNRunResult run_vn(const Shared& sh, const LVPRun& back, const RunConfig& cfg, double c, double dt, int steps,
                   bool energy, const StudyOptions& opt) {
    VNRunResult r;
    VNState s = vn_init(sh.vp0, back, c, cfg.fp_tol, cfg.fp_max_iter);
    const int every = std::max(1, static_cast<int>(std::lround(cfg.interval * cfg.dt / dt)));
    auto record = [&](int i) {
        DiagnosticsRow row;
        row.t = s.t;
        if (energy) {
            auto e = energy_vn(s, sh.energy_box);
            row.energy_vn = e.total();
            row.energy_vn_field = e.field;
            row.energy_vn_tail = e.tail;
        } else {
            row.energy_vn = row.energy_vn_field = row.energy_vn_tail = std::numeric_limits<double>::quiet_NaN();
        }
        row.dipole = dipole_moment(s.ens);
        for (double v : s.fields.phi) row.sup_phi = std::max(row.sup_phi, std::fabs(v));
        row.iterations = s.iterations;
        row.contraction = s.contraction;
        // VP companions at the same time when the step grids coincide
        const double ratio = cfg.dt / dt;
        const int vi = static_cast<int>(std::lround(i / ratio));
        if (std::fabs(vi * ratio - i) < 1e-9 && vi < static_cast<int>(sh.fwd.states.size())) {
            const auto& vp = sh.fwd.states[vi].vp;
            row.energy_vp = vp_energy(vp);
            row.rad_residual = norm(rad_identity_residual(vp));
            auto o = ort_residuals(vp, cfg.grid());
            row.ort_mass = o.mass;
            row.ort_moment = norm(o.moment);
        }
        r.diag.push_back(row);
    };
    record(0);
    for (int i = 1; i <= steps; ++i) {
        s = vn_step(std::move(s));
        if (i % every == 0 || i == steps) record(i);
        if (opt.log && i % every == 0)
            opt.log("  vn c=" + std::to_string(c) + " t=" + std::to_string(s.t) + " it=" + std::to_string(s.iterations));
    }
    r.final_state = std::move(s);
    return r;
}

struct Errors {
    double f = 0, f0 = 0, phi = 0, dt = 0, grad = 0, f_scale = 0, grad_scale = 0;
    std::vector<double> h;  // running sup of |f - f^D| per output time
};

Errors measure(const Shared& sh, const VNState& s, const BumpSpec& bump, double c) {
    Errors e;
    const double ic2 = 1 / (c * c);
    double run = 0;
    for (size_t o = 0; o < sh.out_steps.size(); ++o) {
        const double t = sh.out_steps[o] * sh.fwd.dt;
        auto f = vn_density_at(s, bump, t, sh.fx[o], sh.fp[o]);
        for (size_t i = 0; i < f.size(); ++i) {
            const auto& d = sh.fd[o][i];
            const double df = std::fabs(f[i] - (d.f0 + ic2 * d.f2));
            e.f = std::max(e.f, df);
            e.f0 = std::max(e.f0, std::fabs(f[i] - d.f0));
            e.f_scale = std::max(e.f_scale, std::fabs(f[i]));
            run = std::max(run, df);
        }
        e.h.push_back(run);
        for (size_t i = 0; i < sh.field_probes.size(); ++i) {
            auto v = vn_field_eval(s.history, c, s.soft.eps, t, sh.field_probes[i]);
            auto d = combine(sh.dfield[o][i], c);
            e.phi = std::max(e.phi, std::fabs(v.phi - d.phi));
            e.dt = std::max(e.dt, std::fabs(v.dt_phi - d.dt_phi));
            e.grad = std::max(e.grad, max_abs(v.grad - d.grad));
            e.grad_scale = std::max(e.grad_scale, max_abs(d.grad));
        }
    }
    return e;
}

void fits(ConvergenceReport& r) {
    std::vector<double> cs, f, g, p, d, b;
    for (const auto& row : r.rows) {
        if (!row.ok) continue;
        cs.push_back(row.c);
        f.push_back(row.err_f), g.push_back(row.err_grad), p.push_back(row.err_phi);
        d.push_back(row.err_dt_phi), b.push_back(row.err_f0);
    }
    r.f_raw = fit_order(cs, f), r.f_corr = fit_order(cs, floor_corrected(f, r.floor_f));
    r.grad_raw = fit_order(cs, g), r.grad_corr = fit_order(cs, floor_corrected(g, r.floor_grad));
    r.phi_raw = fit_order(cs, p), r.phi_corr = fit_order(cs, floor_corrected(p, r.floor_phi));
    r.dt_raw = fit_order(cs, d), r.dt_corr = fit_order(cs, floor_corrected(d, r.floor_dt_phi));
    r.f0_raw = fit_order(cs, b), r.f0_corr = fit_order(cs, floor_corrected(b, r.floor_f0));
}

std::string num(double v) {
    std::ostringstream o;
    o << std::setprecision(6) << v;
    return o.str();
}

std::string slope(const SlopeFit& s) {
    if (!s.defined) return "undefined";
    return num(s.slope) + " +/- " + num(s.ci95);
}

}  // namespace

SlopeFit fit_order(const std::vector<double>& c, const std::vector<double>& err) {
    std::vector<double> x, y;
    for (size_t i = 0; i < c.size() && i < err.size(); ++i)
        if (err[i] > 0 && c[i] > 0 && std::isfinite(err[i])) x.push_back(std::log(c[i])), y.push_back(std::log(err[i]));
    SlopeFit f;
    const size_t n = x.size();
    if (n < 2) return f;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
    if (sxx <= 0) return f;
    const double b = sxy / sxx;
    f.slope = -b;
    f.defined = true;
    if (n > 2) {
        double ss = 0;
        for (size_t i = 0; i < n; ++i) {
            const double res = y[i] - (my + b * (x[i] - mx));
            ss += res * res;
        }
        f.ci95 = t95(static_cast<int>(n) - 2) * std::sqrt(ss / (n - 2) / sxx);
    }
    return f;
}

std::vector<double> floor_corrected(const std::vector<double>& err, double floor) {
    std::vector<double> out(err.size());
    for (size_t i = 0; i < err.size(); ++i) out[i] = std::sqrt(std::max(err[i] * err[i] - floor * floor, 0.0));
    return out;
}

Vec3 dipole_moment(const ParticleEnsemble& e) {
    Vec3 d;
    for (size_t k = 0; k < e.size(); ++k) d += e.w[k] * e.x[k];
    return d;
}

std::vector<double> vn_density_at(const VNState& s, const BumpSpec& bump, double t, const std::vector<Vec3>& x,
                                  const std::vector<Vec3>& p) {
    if (x.size() != p.size()) throw Error(ErrorKind::InvalidInput, "positions and momenta differ in length");
    if (t < 0 || t > s.t + 1e-12) throw Error(ErrorKind::OutOfDomain, "trace time outside the run");
    const double c = s.c, eps = s.soft.eps;
    const auto& h = s.history;
    struct Y {
        Vec3 x, p;
        double sigma;  // int_t^s 4 S along the backward trace
    };
    auto rate = [&](double time, const Y& y) {
        auto f = vn_field_eval(h, c, eps, time, y.x);
        auto r = vn_rates(y.p, c, f.dt_phi, f.grad);
        return Y{r.xdot, r.pdot, 4 * r.s};
    };
    auto axpy = [](const Y& a, double k, const Y& b) { return Y{a.x + k * b.x, a.p + k * b.p, a.sigma + k * b.sigma}; };
    std::vector<double> out(x.size());
    const int steps = t > 0 ? std::max(1, static_cast<int>(std::ceil(t / h.dt - 1e-9))) : 0;
    const double dt = steps ? -t / steps : 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        Y y{x[i], p[i], 0.0};
        double time = t;
        for (int k = 0; k < steps; ++k) {
            const double tm = time + 0.5 * dt, t1 = (k + 1 == steps) ? 0.0 : time + dt;
            Y k1 = rate(time, y);
            Y k2 = rate(tm, axpy(y, 0.5 * dt, k1));
            Y k3 = rate(tm, axpy(y, 0.5 * dt, k2));
            Y k4 = rate(t1, axpy(y, dt, k3));
            y = axpy(y, dt / 6, k1);
            y = axpy(y, dt / 3, k2);
            y = axpy(y, dt / 3, k3);
            y = axpy(y, dt / 6, k4);
            time = t1;
        }
        // f(t) = f0(Z(0)) exp(int_0^t 4S) and sigma holds minus that integral
        out[i] = bump::value(bump, y.x, y.p) * std::exp(-y.sigma);
    }
    return out;
}

double density_sup_difference(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error(ErrorKind::InvalidInput, "probe sets differ in length");
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

void write_diagnostics_csv(const std::string& path, const std::vector<DiagnosticsRow>& rows) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
    f << "t,energy_vn,energy_vn_field,energy_vn_tail,energy_vp,dipole_x,dipole_y,dipole_z,rad_residual,ort_mass,"
         "ort_moment,h,sup_phi,iterations,contraction\n";
    f << std::setprecision(12);
    for (const auto& r : rows) {
        auto v = [&](double x) {
            std::ostringstream o;
            if (std::isfinite(x)) o << std::setprecision(12) << x;
            return o.str();
        };
        f << r.t << ',' << v(r.energy_vn) << ',' << v(r.energy_vn_field) << ',' << v(r.energy_vn_tail) << ','
          << r.energy_vp << ',' << r.dipole.x << ',' << r.dipole.y << ',' << r.dipole.z << ',' << r.rad_residual
          << ',' << r.ort_mass << ',' << r.ort_moment << ',' << r.h_proxy << ',' << r.sup_phi << ','
          << r.iterations << ',' << r.contraction << '\n';
    }
}

ConvergenceReport run_convergence_study(const RunConfig& cfg, const StudyOptions& opt) {
    const auto t_start = Clock::now();
    auto log = [&](const std::string& m) {
        if (opt.log) opt.log(m);
    };
    ConvergenceReport r;
    r.c_values = cfg.c_ladder;
    r.dt = cfg.dt;
    r.T = cfg.T;
    if (cfg.c_ladder.size() < 3) throw Error(ErrorKind::Config, "the c ladder needs at least 3 values");
    const int steps = cfg.steps();
    const double dt = cfg.dt;

    Shared sh;
    sh.vp0.ens = sample_initial_density(cfg.bump, cfg.lattice());
    sh.vp0.soft = cfg.soft();
    r.particles = sh.vp0.ens.size();
    if (sh.vp0.ens.total_mass() == 0) {
        for (double c : cfg.c_ladder) {
            StudyRow row;
            row.c = c;
            row.ok = true;
            r.rows.push_back(row);
        }
        r.zero_data = true;
        r.complete = true;
        r.runtime = seconds_since(t_start);
        return r;
    }

    log("VP/LVP forward run, N=" + std::to_string(r.particles));
    auto lvp0 = lvp_init(sh.vp0, cfg.bump, false);
    sh.fwd = lvp_run(lvp0, dt, steps);
    for (int i = 0; i <= steps; i += std::max(1, cfg.interval)) sh.out_steps.push_back(i);
    if (sh.out_steps.back() != steps) sh.out_steps.push_back(steps);

    // shared probes
    sh.field_probes = probe_ball(opt.field_probes, opt.probe_radius);
    std::vector<size_t> pick(r.particles);
    std::iota(pick.begin(), pick.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(std::min<size_t>(pick.size(), static_cast<size_t>(std::max(1, cfg.f_probes))));
    const double eps2 = cfg.eps() * cfg.eps();
    log("Darwin densities and fields at " + std::to_string(sh.out_steps.size()) + " output times");
    for (int st : sh.out_steps) {
        const auto& e = sh.fwd.states[st].vp.ens;
        std::vector<Vec3> xs, ps;
        for (size_t k : pick) xs.push_back(e.x[k]), ps.push_back(e.p[k]);
        const double t = st * dt;
        sh.fd.push_back(darwin_density_at(sh.fwd, t, xs, ps));
        sh.fx.push_back(std::move(xs));
        sh.fp.push_back(std::move(ps));
        auto src = sh.fwd.sources_at(t, true);
        std::vector<DarwinRaw> raw;
        for (const auto& x : sh.field_probes) {
            auto d = darwin_fields_at(x, src, eps2, kD2 | kD4 | kD4Dt);
            raw.push_back({d.phi2, d.phi4, d.dt_phi2, d.dt_phi4, d.grad2, d.grad4});
        }
        sh.dfield.push_back(std::move(raw));
    }

    // energy box around the support over [0, T]
    double ext = 0;
    for (const auto& st : sh.fwd.states)
        for (const auto& x : st.vp.ens.x) ext = std::max(ext, max_abs(x));
    ext += 0.25;
    sh.energy_box = GridSpec::centered(ext, 0.2);
    sh.energy_reach = ext * std::sqrt(3.0);

    // one backward run serves every c; the energy box is covered from c_energy on
    const double c_min = *std::min_element(cfg.c_ladder.begin(), cfg.c_ladder.end());
    const double field_reach = std::max(opt.probe_radius, ext * 1.01);
    double span = history_span(sh.vp0.ens, field_reach, c_min, cfg.eps());
    double c_energy = std::numeric_limits<double>::infinity();
    for (double c : cfg.c_ladder)
        if (opt.diagnostics && history_span(sh.vp0.ens, sh.energy_reach, c, cfg.eps()) <= span) c_energy = std::min(c_energy, c);
    const int nb = static_cast<int>(std::ceil(span / dt)) + 2;
    log("backward run: " + std::to_string(nb) + " steps");
    auto back = lvp_run(lvp0, -dt, nb);

    r.complete = true;
    const double cf = cfg.c_ladder[cfg.c_ladder.size() / 2];
    std::optional<VNState> mid;  // kept for the floor estimate
    for (double c : cfg.c_ladder) {
        const auto t0 = Clock::now();
        StudyRow row;
        row.c = c;
        try {
            log("VN run c=" + std::to_string(c));
            auto vr = run_vn(sh, back, cfg, c, dt, steps, c >= c_energy, opt);
            auto e = measure(sh, vr.final_state, cfg.bump, c);
            for (size_t i = 0; i < vr.diag.size() && i < e.h.size(); ++i) vr.diag[i].h_proxy = e.h[i];
            row.err_f = e.f, row.err_f0 = e.f0, row.err_phi = e.phi, row.err_dt_phi = e.dt, row.err_grad = e.grad;
            row.f_scale = e.f_scale, row.grad_scale = e.grad_scale;
            row.ok = true;
            r.diagnostics.push_back(std::move(vr.diag));
            if (c == cf && opt.estimate_floor) mid = std::move(vr.final_state);
        } catch (const Error& err) {
            row.failure = err.what();
            log("  failed: " + row.failure);
            r.complete = false;
            r.diagnostics.emplace_back();
        }
        row.runtime = seconds_since(t0);
        log("  c=" + std::to_string(c) + " err_f=" + num(row.err_f) + " err_grad=" + num(row.err_grad) +
            " (" + num(row.runtime) + " s)");
        r.rows.push_back(row);
    }

    if (mid) {
        // dt/2 self-difference of VN at the middle rung; its diagnostics carry the halved-step energy record
        log("floor run c=" + std::to_string(cf) + " dt/2");
        const bool energy = cf >= c_energy;
        const double span2 = history_span(sh.vp0.ens, energy ? sh.energy_reach : field_reach, cf, cfg.eps());
        auto back2 = lvp_run(lvp0, -0.5 * dt, static_cast<int>(std::ceil(span2 / (0.5 * dt))) + 2);
        auto b = run_vn(sh, back2, cfg, cf, 0.5 * dt, 2 * steps, energy, opt);
        const VNState& a = *mid;
        for (size_t o = 0; o < sh.out_steps.size(); ++o) {
            const double t = sh.out_steps[o] * dt;
            auto fa = vn_density_at(a, cfg.bump, t, sh.fx[o], sh.fp[o]);
            auto fb = vn_density_at(b.final_state, cfg.bump, t, sh.fx[o], sh.fp[o]);
            r.floor_f = std::max(r.floor_f, density_sup_difference(fa, fb));
            for (const auto& x : sh.field_probes) {
                auto va = vn_field_eval(a.history, cf, cfg.eps(), t, x);
                auto vb = vn_field_eval(b.final_state.history, cf, cfg.eps(), t, x);
                r.floor_phi = std::max(r.floor_phi, std::fabs(va.phi - vb.phi));
                r.floor_dt_phi = std::max(r.floor_dt_phi, std::fabs(va.dt_phi - vb.dt_phi));
                r.floor_grad = std::max(r.floor_grad, max_abs(va.grad - vb.grad));
            }
        }
        r.floor_f0 = r.floor_f;
        r.floor_c = cf;
        r.diagnostics.push_back(std::move(b.diag));
        mid.reset();
    }
    fits(r);

    // refinement when the floor swamps the finest rung
    const auto& last = r.rows.back();
    if (opt.allow_refine && cfg.refine && r.complete && last.err_f > 0 && r.floor_f > 0.5 * last.err_f) {
        RunConfig c2 = cfg;
        c2.dt = 0.5 * cfg.dt;
        c2.n_x = static_cast<int>(std::lround(cfg.n_x * std::cbrt(std::sqrt(2.0))));
        c2.n_p = static_cast<int>(std::lround(cfg.n_p * std::cbrt(std::sqrt(2.0))));
        StudyOptions o2 = opt;
        o2.allow_refine = false;
        o2.estimate_floor = false;
        o2.diagnostics = false;
        log("refinement study");
        auto rr = run_convergence_study(c2, o2);
        r.refined = true;
        r.refined_particles = rr.particles;
        r.f_refined = rr.f_raw;
        r.grad_refined = rr.grad_raw;
    }
    r.runtime = seconds_since(t_start);
    return r;
}

void write_report(const ConvergenceReport& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir + "/report.csv");
        if (!f) throw Error(ErrorKind::Io, "cannot write report.csv");
        f << std::setprecision(10);
        f << "c,err_f,err_phi,err_dt_phi,err_grad,err_f0,f_scale,grad_scale,runtime_s,ok\n";
        for (const auto& row : r.rows)
            f << row.c << ',' << row.err_f << ',' << row.err_phi << ',' << row.err_dt_phi << ',' << row.err_grad << ','
              << row.err_f0 << ',' << row.f_scale << ',' << row.grad_scale << ',' << row.runtime << ','
              << (row.ok ? 1 : 0) << '\n';
        f << "# quantity,slope_raw,ci95_raw,slope_floor_corrected,ci95_corrected,floor\n";
        auto line = [&](const char* q, const SlopeFit& a, const SlopeFit& b, double fl) {
            f << "# " << q << ',' << (a.defined ? num(a.slope) : "nan") << ',' << num(a.ci95) << ','
              << (b.defined ? num(b.slope) : "nan") << ',' << num(b.ci95) << ',' << fl << '\n';
        };
        line("f", r.f_raw, r.f_corr, r.floor_f);
        line("phi", r.phi_raw, r.phi_corr, r.floor_phi);
        line("dt_phi", r.dt_raw, r.dt_corr, r.floor_dt_phi);
        line("grad_phi", r.grad_raw, r.grad_corr, r.floor_grad);
        line("f_newtonian", r.f0_raw, r.f0_corr, r.floor_f0);
    }
    {
        std::ofstream f(dir + "/report.md");
        if (!f) throw Error(ErrorKind::Io, "cannot write report.md");
        f << "# Convergence study\n\n";
        f << "N = " << r.particles << ", dt = " << r.dt << ", T = " << r.T << ", runtime " << num(r.runtime)
          << " s" << (r.complete ? "" : ", INCOMPLETE") << "\n\n";
        if (r.zero_data) f << "Zero initial data: every error vanishes and the slopes are undefined.\n\n";
        f << "| c | sup abs(f - fD) | sup abs(phi - phiD) | sup abs(dt phi - dt phiD) | sup abs(grad phi - grad phiD) | "
             "sup abs(f - f0) |\n|---|---|---|---|---|---|\n";
        for (const auto& row : r.rows) {
            f << "| " << row.c << " | " << num(row.err_f) << " | " << num(row.err_phi) << " | " << num(row.err_dt_phi)
              << " | " << num(row.err_grad) << " | " << num(row.err_f0) << " |";
            if (!row.ok) f << " failed: " << row.failure;
            f << "\n";
        }
        f << "\n| quantity | slope (raw) | slope (floor-corrected) | floor |\n|---|---|---|---|\n";
        f << "| f - fD | " << slope(r.f_raw) << " | " << slope(r.f_corr) << " | " << num(r.floor_f) << " |\n";
        f << "| phi - phiD | " << slope(r.phi_raw) << " | " << slope(r.phi_corr) << " | " << num(r.floor_phi) << " |\n";
        f << "| dt phi - dt phiD | " << slope(r.dt_raw) << " | " << slope(r.dt_corr) << " | " << num(r.floor_dt_phi)
          << " |\n";
        f << "| grad phi - grad phiD | " << slope(r.grad_raw) << " | " << slope(r.grad_corr) << " | "
          << num(r.floor_grad) << " |\n";
        f << "| f - f0 | " << slope(r.f0_raw) << " | " << slope(r.f0_corr) << " | " << num(r.floor_f0) << " |\n";
        if (r.refined)
            f << "\nRefinement (N = " << r.refined_particles << ", dt/2): f slope " << slope(r.f_refined)
              << ", grad slope " << slope(r.grad_refined) << "\n";
    }
    for (size_t i = 0; i < r.diagnostics.size(); ++i) {
        if (r.diagnostics[i].empty()) continue;
        std::string name = i < r.rows.size() ? "diagnostics_c" + num(r.rows[i].c) + ".csv" : "diagnostics_floor_half_dt.csv";
        write_diagnostics_csv(dir + "/" + name, r.diagnostics[i]);
    }
}

}  // namespace kin
