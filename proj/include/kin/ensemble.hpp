#pragma once
#include <array>
#include <string>
#include <vector>

#include "kin/vec3.hpp"

namespace kin {

// Product bump A * b(|x|/R0) * b(|p|/P0), b(r) = exp(1 - 1/(1 - r^2)) on [0,1).
struct BumpSpec {
    double R0 = 1.0;
    double P0 = 1.0;
    double mass = 1.0;          // used when amplitude < 0
    double amplitude = -1.0;    // explicit A; negative means "derive from mass"
    bool require_positive = false;

    double A() const;           // effective amplitude
};

namespace bump {
double profile(double r);                   // b(r)
double profile_d(double r);                 // b'(r)
double profile_dd(double r);                // b''(r)
double radial_integral();                   // int_0^1 b(r) r^2 dr
double value(const BumpSpec& s, const Vec3& x, const Vec3& p);
// Gradient of f0 with respect to (x, p).
void gradient(const BumpSpec& s, const Vec3& x, const Vec3& p, Vec3& gx, Vec3& gp);
// Hessian blocks are not needed; the x-marginal and its derivatives are.
double density(const BumpSpec& s, const Vec3& x);  // int f0 dp
}  // namespace bump

struct ParticleEnsemble {
    std::vector<Vec3> x, p;
    std::vector<double> w, carried, aux;

    size_t size() const { return x.size(); }
    bool has_aux() const { return !aux.empty(); }
    double total_mass() const;
    void push(const Vec3& xi, const Vec3& pi, double wi, double ci);
};

struct LatticeSpec {
    int n_x = 5;  // cells per dimension in position space
    int n_p = 5;  // cells per dimension in momentum space
    int sub = 10; // Gauss points per dimension inside a cell
};

// One particle per occupied phase cell, placed at the cell's mass centroid,
// weight = integral of f0 over the cell, carried = f0 at the particle.
ParticleEnsemble sample_initial_density(const BumpSpec& spec, const LatticeSpec& lat = {});

struct GridSpec {
    Vec3 origin;      // node (0,0,0)
    double h = 0.25;
    int n = 21;       // nodes per dimension

    static GridSpec centered(double half_extent, double h);
    Vec3 node(int i, int j, int k) const { return origin + Vec3{i * h, j * h, k * h}; }
    size_t index(int i, int j, int k) const { return (static_cast<size_t>(i) * n + j) * n + k; }
    size_t count() const { return static_cast<size_t>(n) * n * n; }
    double cell_volume() const { return h * h * h; }
    std::vector<Vec3> nodes() const;
};

using GridField = std::vector<double>;

struct MomentGrid {
    GridSpec spec;
    GridField mu;
    std::array<GridField, 3> j;
    double integral_mu() const;
};

enum class MuWeight { Plain, Gamma, DarwinStar };

// Cubic B-spline deposition of w*(1 | gamma | 1 - p^2/2c^2) into mu and w*p into j.
MomentGrid deposit_moments(const ParticleEnsemble& e, const GridSpec& g, MuWeight flag = MuWeight::Plain,
                           double c = 1.0);

// Deposit arbitrary per-particle channels (each sized like the ensemble),
// returned as node densities.
std::vector<GridField> deposit_channels(const std::vector<Vec3>& pos, const std::vector<const double*>& values,
                                        const GridSpec& g);

// Sum over terms of the spatial derivative d^(a,b,c) of the B-spline deposit of
// one particle channel, evaluated exactly at the nodes (total order <= 3).
struct DerivTerm {
    int a = 0, b = 0, c = 0;
    const double* values = nullptr;
};
GridField deposit_derivatives(const std::vector<Vec3>& pos, const std::vector<DerivTerm>& terms, const GridSpec& g);

// 4th-order centred derivative along axis; zero within two nodes of the edge.
GridField grid_derivative(const GridField& f, const GridSpec& g, int axis);

// Snapshot text format: "# count time c" then x,y,z,px,py,pz,w,carried[,aux].
void write_snapshot(const std::string& path, const ParticleEnsemble& e, double t, double c);
ParticleEnsemble read_snapshot(const std::string& path, double* t = nullptr, double* c = nullptr);

}  // namespace kin
