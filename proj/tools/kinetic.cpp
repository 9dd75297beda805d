// Command-line front end: kinetic <group> <action> [options]
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kin/config.hpp"
#include "kin/darwin.hpp"
#include "kin/dvn.hpp"
#include "kin/errors.hpp"
#include "kin/harness.hpp"
#include "kin/kernels.hpp"
#include "kin/lvp.hpp"
#include "kin/vn.hpp"
#include "kin/vp.hpp"

using namespace kin;
namespace fs = std::filesystem;

namespace {

constexpr int kIncompleteStudy = 4;

struct Common {
    std::string config;
    std::string out = ".";
    long long seed = -1;  // < 0: keep the config value
    int jobs = 1;
};

RunConfig load(const Common& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : parse_config(o.config);
    if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
    return cfg;
}

void prepare_out(const Common& o, const RunConfig& cfg) {
    fs::create_directories(o.out);
    std::ofstream f(fs::path(o.out) / "effective_config.ini");
    if (!f) throw Error(ErrorKind::Io, "cannot write to " + o.out);
    f << echo_config(cfg);
}

std::ofstream open_csv(const Common& o, const std::string& name) {
    std::ofstream f(fs::path(o.out) / name);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + name);
    f << std::setprecision(12);
    return f;
}

std::string snapshot_name(const Common& o, const std::string& tag, int step) {
    std::ostringstream s;
    s << tag << '_' << std::setw(5) << std::setfill('0') << step << ".csv";
    return (fs::path(o.out) / s.str()).string();
}

// x,y,z per line; blank lines and '#' comments skipped.
std::vector<Vec3> read_probes(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::Io, "cannot read probe file " + path);
    std::vector<Vec3> out;
    std::string line;
    int n = 0;
    while (std::getline(f, line)) {
        ++n;
        auto h = line.find('#');
        if (h != std::string::npos) line.resize(h);
        if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream is(line);
        Vec3 v;
        if (!(is >> v.x >> v.y >> v.z))
            throw Error(ErrorKind::InvalidInput, path + ":" + std::to_string(n) + ": expected x,y,z");
        out.push_back(v);
    }
    return out;
}

std::vector<Vec3> probes_or_default(const std::string& file, const RunConfig& cfg) {
    if (!file.empty()) return read_probes(file);
    if (!cfg.probes.empty()) return read_probes(cfg.probes);
    std::vector<Vec3> out;
    for (int i = -2; i <= 2; ++i)
        for (int j = -2; j <= 2; ++j)
            for (int k = -2; k <= 2; ++k) out.push_back(0.375 * Vec3{double(i), double(j), double(k)});
    return out;
}

VPState initial_vp(const RunConfig& cfg) {
    VPState s;
    s.ens = sample_initial_density(cfg.bump, cfg.lattice());
    s.soft = cfg.soft();
    return s;
}

double support_extent(const ParticleEnsemble& e) {
    double m = 0;
    for (const auto& x : e.x) m = std::max(m, max_abs(x));
    return m;
}

bool output_step(int i, int n, int every) { return i % std::max(1, every) == 0 || i == n; }

int cmd_vp(const Common& o) {
    RunConfig cfg = load(o);
    prepare_out(o, cfg);
    auto run = vp_run(initial_vp(cfg), cfg.dt, cfg.steps());
    auto csv = open_csv(o, "diagnostics.csv");
    csv << "t,energy,px,py,pz,rad_residual,ort_mass,ort_moment\n";
    const int n = cfg.steps();
    for (int i = 0; i <= n; ++i) {
        if (!output_step(i, n, cfg.interval)) continue;
        const auto& s = run.states[i];
        const double t = i * cfg.dt;
        Vec3 mom = vp_momentum(s);
        auto ort = ort_residuals(s, cfg.grid());
        csv << t << ',' << vp_energy(s) << ',' << mom.x << ',' << mom.y << ',' << mom.z << ','
            << norm(rad_identity_residual(s)) << ',' << ort.mass << ',' << norm(ort.moment) << '\n';
        write_snapshot(snapshot_name(o, "vp", i), s.ens, t, std::numeric_limits<double>::infinity());
    }
    return 0;
}

int cmd_lvp(const Common& o) {
    RunConfig cfg = load(o);
    prepare_out(o, cfg);
    auto run = lvp_run(lvp_init(initial_vp(cfg), cfg.bump, true), cfg.dt, cfg.steps());
    const int n = cfg.steps();
    for (int i = 0; i <= n; ++i) {
        if (!output_step(i, n, cfg.interval)) continue;
        auto e = run.states[i].vp.ens;
        e.aux = run.states[i].f2;  // Eulerian correction f2
        write_snapshot(snapshot_name(o, "lvp", i), e, i * cfg.dt, std::numeric_limits<double>::infinity());
    }
    return 0;
}

int cmd_vn(const Common& o) {
    RunConfig cfg = load(o);
    prepare_out(o, cfg);
    const VPState vp0 = initial_vp(cfg);
    const auto lvp0 = lvp_init(vp0, cfg.bump, false);
    const int n = cfg.steps();

    // energy box around the support over [0, T], and history deep enough to see it from t = 0
    double vmax = 0;
    for (const auto& p : vp0.ens.p) vmax = std::max(vmax, norm(p));
    const double ext = support_extent(vp0.ens) + vmax * cfg.T + 0.25;
    const GridSpec box = GridSpec::centered(ext, 0.2);
    const double reach = ext * std::sqrt(3.0) + support_extent(vp0.ens) + cfg.eps();
    const double v = std::min(vmax, 0.9 * cfg.c);
    const int nb = static_cast<int>(std::ceil(reach / (cfg.c - v) / cfg.dt)) + 2;

    VNState s = vn_init(vp0, lvp_run(lvp0, -cfg.dt, nb), cfg.c, cfg.fp_tol, cfg.fp_max_iter);
    auto csv = open_csv(o, "diagnostics.csv");
    csv << "t,energy,energy_field,energy_tail,sup_phi,iterations,contraction\n";
    for (int i = 0;; ++i) {
        if (output_step(i, n, cfg.interval)) {
            auto e = energy_vn(s, box);
            double sup = 0;
            for (double p : s.fields.phi) sup = std::max(sup, std::fabs(p));
            csv << s.t << ',' << e.total() << ',' << e.field << ',' << e.tail << ',' << sup << ',' << s.iterations
                << ',' << s.contraction << '\n';
            write_snapshot(snapshot_name(o, "vn", i), s.ens, s.t, cfg.c);
        }
        if (i == n) break;
        s = vn_step(std::move(s));
    }
    return 0;
}

int cmd_dvn_run(const Common& o) {
    RunConfig cfg = load(o);
    prepare_out(o, cfg);
    auto s0 = dvn_init(initial_vp(cfg).ens, cfg.c, cfg.soft(), cfg.fp_tol, cfg.fp_max_iter, cfg.streaming);
    auto run = dvn_run(s0, cfg.dt, cfg.steps());
    auto csv = open_csv(o, "diagnostics.csv");
    csv << "t,sup_psi,sup_e,iterations,contraction\n";
    const int n = static_cast<int>(run.states.size()) - 1;
    for (int i = 0; i <= n; ++i) {
        const auto& s = run.states[i];
        double sp = 0, se = 0;
        for (double v : s.psi) sp = std::max(sp, std::fabs(v));
        for (const auto& v : s.e) se = std::max(se, max_abs(v));
        csv << s.t << ',' << sp << ',' << se << ',' << s.iterations << ',' << s.contraction << '\n';
        if (output_step(i, n, cfg.interval)) write_snapshot(snapshot_name(o, "dvn", i), s.ens, s.t, cfg.c);
    }
    if (run.blew_up) {
        std::cerr << "dvn run: field growth guard tripped at t = " << run.states.back().t << "\n";
        return 3;
    }
    return 0;
}

int cmd_dvn_init(const Common& o, const std::string& density, const std::string& probes) {
    RunConfig cfg = load(o);
    prepare_out(o, cfg);
    double t = 0, c = 0;
    auto ens = read_snapshot(density, &t, &c);
    if (!std::isfinite(c)) c = cfg.c;
    auto s = dvn_init(ens, c, cfg.soft(), cfg.fp_tol, cfg.fp_max_iter, cfg.streaming);
    auto targets = probes.empty() && cfg.probes.empty() ? ens.x : probes_or_default(probes, cfg);
    auto f = dvn_probe_fields(s, targets);
    auto csv = open_csv(o, "dvn_init.csv");
    csv << "x,y,z,psi,ex,ey,ez\n";
    for (size_t i = 0; i < f.size(); ++i)
        csv << targets[i].x << ',' << targets[i].y << ',' << targets[i].z << ',' << f[i].psi << ',' << f[i].e.x << ','
            << f[i].e.y << ',' << f[i].e.z << '\n';
    std::cout << "iterations " << s.iterations << " contraction " << s.contraction << "\n";
    return 0;
}

int cmd_darwin(const Common& o, const std::string& probes, double t) {
    RunConfig cfg = load(o);
    prepare_out(o, cfg);
    if (t < 0) t = cfg.T;
    const int n = static_cast<int>(std::lround(t / cfg.dt));
    if (std::fabs(n * cfg.dt - t) > 1e-12) throw Error(ErrorKind::Config, "--t must be a multiple of dt");
    // at least one step: the interpolating frames need two
    auto run = lvp_run(lvp_init(initial_vp(cfg), cfg.bump, false), cfg.dt, std::max(n, 1));
    auto src = run.sources_at(t, true);
    const double eps2 = cfg.eps() * cfg.eps();
    auto csv = open_csv(o, "darwin_fields.csv");
    csv << "x,y,z,phi2,phi4,dt_phi2,dt_phi4,grad2_x,grad2_y,grad2_z,grad4_x,grad4_y,grad4_z,"
           "grad_ext_x,grad_ext_y,grad_ext_z,grad_int_x,grad_int_y,grad_int_z,grad_bd_x,grad_bd_y,grad_bd_z,"
           "phi_ext,phi_int,phi_bd,dt_ext,dt_int,dt_bd\n";
    for (const auto& x : probes_or_default(probes, cfg)) {
        auto d = darwin_fields_at(x, src, eps2, kD2 | kD4 | kD4Dt);
        auto r = darwin_representation(run, cfg.c, t, x);
        auto v3 = [&](const Vec3& v) { csv << ',' << v.x << ',' << v.y << ',' << v.z; };
        csv << x.x << ',' << x.y << ',' << x.z << ',' << d.phi2 << ',' << d.phi4 << ',' << d.dt_phi2 << ','
            << d.dt_phi4;
        v3(d.grad2), v3(d.grad4), v3(r.grad.ext), v3(r.grad.interior), v3(r.grad.bd);
        csv << ',' << r.value.ext << ',' << r.value.interior << ',' << r.value.bd << ',' << r.dt.ext << ','
            << r.dt.interior << ',' << r.dt.bd << '\n';
    }
    return 0;
}

int cmd_study(const Common& o) {
    RunConfig cfg = load(o);
    prepare_out(o, cfg);
    StudyOptions opt;
    opt.log = [](const std::string& m) { std::cerr << m << "\n"; };
    // The c-runs share one backward history and run in sequence, so any --jobs limit is met.
    auto r = run_convergence_study(cfg, opt);
    write_report(r, o.out);
    std::cout << "f slope " << r.f_corr.slope << " grad slope " << r.grad_corr.slope << " baseline slope "
              << r.f0_corr.slope << " (" << r.runtime << " s)\n";
    return r.complete ? 0 : kIncompleteStudy;
}

int cmd_selftest(long long seed, int cases, double perturb) {
    auto res = kernels::selftest(static_cast<unsigned>(seed < 0 ? 1 : seed), cases, perturb);
    if (res.empty()) {
        std::cerr << "warning: empty case list\n";
        return 0;
    }
    int failed = 0;
    for (const auto& r : res) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " err " << r.error << " tol " << r.tol << "\n";
        failed += !r.pass;
    }
    std::cout << res.size() - failed << "/" << res.size() << " passed\n";
    return failed ? 3 : 0;
}

void add_common(CLI::App* app, Common& o, bool needs_out = true) {
    app->add_option("--config", o.config, "run configuration file")->check(CLI::ExistingFile);
    if (needs_out) app->add_option("--out", o.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kinetic solver suite: Newtonian, post-Newtonian and retarded-field runs"};
    app.require_subcommand(1);
    app.fallthrough();  // --seed/--jobs may follow the subcommand
    Common o;
    app.add_option("--seed", o.seed, "seed for every randomised choice (overrides the config)");
    app.add_option("--jobs", o.jobs, "limit on concurrent runs")->check(CLI::PositiveNumber);

    auto* vp = app.add_subcommand("vp", "Newtonian particle runs");
    auto* vp_r = vp->add_subcommand("run", "integrate and write snapshots and diagnostics");
    add_common(vp_r, o);
    vp->require_subcommand(1);

    auto* lvp = app.add_subcommand("lvp", "Newtonian run with first-order corrections");
    auto* lvp_r = lvp->add_subcommand("run", "snapshots carry f2 in the aux column");
    add_common(lvp_r, o);
    lvp->require_subcommand(1);

    auto* vn = app.add_subcommand("vn", "retarded-field runs");
    auto* vn_r = vn->add_subcommand("run", "matched start, per-output diagnostics");
    add_common(vn_r, o);
    vn->require_subcommand(1);

    auto* dvn = app.add_subcommand("dvn", "effective post-Newtonian runs");
    auto* dvn_r = dvn->add_subcommand("run", "integrate with the blow-up guard");
    add_common(dvn_r, o);
    auto* dvn_i = dvn->add_subcommand("init", "resolve psi and E for a density snapshot");
    std::string density, probes;
    add_common(dvn_i, o);
    dvn_i->add_option("--density", density, "snapshot file")->required()->check(CLI::ExistingFile);
    dvn_i->add_option("--probes", probes, "probe points (x,y,z per line); default: the particles")
        ->check(CLI::ExistingFile);
    dvn->require_subcommand(1);

    auto* dar = app.add_subcommand("darwin", "assembled approximate fields");
    auto* dar_f = dar->add_subcommand("fields", "part-by-part field table at probe points");
    double t_eval = -1;
    add_common(dar_f, o);
    dar_f->add_option("--probes", probes, "probe points (x,y,z per line)")->check(CLI::ExistingFile);
    dar_f->add_option("--t", t_eval, "evaluation time (default T)");
    dar->require_subcommand(1);

    auto* st = app.add_subcommand("study", "c-ladder convergence study");
    auto* st_r = st->add_subcommand("run", "run the ladder and write report.csv/report.md");
    add_common(st_r, o);
    st->require_subcommand(1);

    auto* ker = app.add_subcommand("kernels", "closed-form kernel checks");
    auto* ker_s = ker->add_subcommand("selftest", "closed forms against quadrature");
    int cases = 100;
    double perturb = 1.0;
    ker_s->add_option("--cases", cases, "random (z, r) cases")->check(CLI::NonNegativeNumber);
    ker_s->add_option("--perturb", perturb, "scale the closed forms (mutation check)");
    ker->require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*vp_r) return cmd_vp(o);
        if (*lvp_r) return cmd_lvp(o);
        if (*vn_r) return cmd_vn(o);
        if (*dvn_r) return cmd_dvn_run(o);
        if (*dvn_i) return cmd_dvn_init(o, density, probes);
        if (*dar_f) return cmd_darwin(o, probes, t_eval);
        if (*st_r) return cmd_study(o);
        if (*ker_s) return cmd_selftest(o.seed, cases, perturb);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
