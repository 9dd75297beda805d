#pragma once
#include <functional>
#include <string>
#include <vector>

#include "kin/config.hpp"
#include "kin/darwin.hpp"
#include "kin/dvn.hpp"
#include "kin/vn.hpp"

namespace kin {

// Least-squares fit of log err = a - slope log c; slope is reported as a
// positive order. ci95 is the half-width of the 95% interval (t-quantile).
struct SlopeFit {
    double slope = 0;
    double ci95 = 0;
    bool defined = false;  // false with < 2 positive points
};
SlopeFit fit_order(const std::vector<double>& c, const std::vector<double>& err);

// sqrt(max(e^2 - floor^2, 0)) per entry.
std::vector<double> floor_corrected(const std::vector<double>& err, double floor);

// sum_k w_k x_k.
Vec3 dipole_moment(const ParticleEnsemble& e);

// f at phase points (x, p) at time t of a VN run, by tracing the
// characteristic back to t = 0 through the stored world lines:
// f = f0(Z(0)) exp(int_0^t 4 S ds). The state's history must reach t.
std::vector<double> vn_density_at(const VNState& s, const BumpSpec& bump, double t, const std::vector<Vec3>& x,
                                  const std::vector<Vec3>& p);

// sup_i |a_i - b_i|; probes where both are zero contribute 0.
double density_sup_difference(const std::vector<double>& a, const std::vector<double>& b);

struct DiagnosticsRow {
    double t = 0;
    double energy_vn = 0, energy_vn_field = 0, energy_vn_tail = 0;
    double energy_vp = 0;
    Vec3 dipole;
    double rad_residual = 0;
    double ort_mass = 0, ort_moment = 0;
    double h_proxy = 0;  // running sup of |f - f^D| over output times so far
    double sup_phi = 0;
    int iterations = 0;
    double contraction = 0;
};
void write_diagnostics_csv(const std::string& path, const std::vector<DiagnosticsRow>& rows);

// Errors of one VN run against the Darwin fields/density at the same c.
struct StudyRow {
    double c = 0;
    double err_f = 0, err_phi = 0, err_dt_phi = 0, err_grad = 0, err_f0 = 0;
    double f_scale = 0, grad_scale = 0;
    double runtime = 0;
    bool ok = false;
    std::string failure;
};

struct ConvergenceReport {
    std::vector<double> c_values;
    std::vector<StudyRow> rows;
    size_t particles = 0;
    double dt = 0, T = 0;
    // discretisation floor per quantity from the dt/2 self-difference at floor_c (middle rung)
    double floor_c = 0;
    double floor_f = 0, floor_grad = 0, floor_phi = 0, floor_dt_phi = 0, floor_f0 = 0;
    SlopeFit f_raw, f_corr, grad_raw, grad_corr, phi_raw, phi_corr, dt_raw, dt_corr, f0_raw, f0_corr;
    bool complete = false;
    bool zero_data = false;  // all errors vanish: slopes undefined
    // refinement (2x particles per axis-pair, dt/2) when the floor dominates
    bool refined = false;
    size_t refined_particles = 0;
    SlopeFit f_refined, grad_refined;
    double runtime = 0;
    // per c, then (when the floor ran) the dt/2 run at floor_c
    std::vector<std::vector<DiagnosticsRow>> diagnostics;
};

struct StudyOptions {
    int field_probes = 125;           // probe ball lattice, 5^3
    double probe_radius = 1.5;
    bool estimate_floor = true;
    bool allow_refine = true;
    bool diagnostics = true;          // energy box quadrature per output
    std::function<void(const std::string&)> log;  // progress lines
};

ConvergenceReport run_convergence_study(const RunConfig& cfg, const StudyOptions& opt = {});
void write_report(const ConvergenceReport& r, const std::string& dir);

}  // namespace kin
