#pragma once
#include <cmath>
#include <string>
#include <vector>

#include "kin/vec3.hpp"

namespace kin {

struct Softening {
    enum class Mode { Plummer, Cutoff };
    double eps = 0.125;
    Mode mode = Mode::Plummer;

    // Regularised distance |d|_eps.
    double dist(const Vec3& d) const {
        double r2 = norm2(d);
        if (mode == Mode::Plummer) return std::sqrt(r2 + eps * eps);
        return std::fmax(std::sqrt(r2), eps);
    }
};

// Point-source evaluation of the softened Coulomb kernel. Inputs are plain
// arrays so the same routine serves particle ensembles and grid moments.
struct PotentialResult {
    std::vector<double> phi;
    std::vector<Vec3> grad;
};

// phi(x) = -sum m_k / |x - y_k|_eps,  grad = sum m_k (x - y_k) / |x - y_k|_eps^3.
// If exclude_self is set, targets[i] and sources[i] are the same particle and
// the i == k term is dropped.
PotentialResult newtonian_potential(const std::vector<Vec3>& sources, const std::vector<double>& masses,
                                    const std::vector<Vec3>& targets, const Softening& soft,
                                    bool exclude_self = false);

// -1/2 sum m_k |x - y_k|_eps and its gradient. Signed masses.
struct LinearKernelResult {
    std::vector<double> value;
    std::vector<Vec3> grad;
    double total_mass = 0;   // should vanish
    Vec3 first_moment;       // should vanish
    bool ort_warning = false;
};
LinearKernelResult linear_kernel_potential(const std::vector<Vec3>& sources, const std::vector<double>& masses,
                                           const std::vector<Vec3>& targets, const Softening& soft,
                                           double ort_tol = 1e-8);

namespace kernels {

constexpr double kFourPi = 4.0 * 3.14159265358979323846;

double sphere_mean_inverse(const Vec3& z, double r);
// Mean of |z - r w| over the unit sphere (scalar linear kernel).
double sphere_mean_linear(const Vec3& z, double r);

enum class VectorKind { GradInverse, Linear };
Vec3 sphere_mean_vector(const Vec3& z, double r, VectorKind kind, double jump_tol = 1e-12);

Vec3 conv_inverse_cube(const Vec3& z);

// Numerical oracles (generic sphere rule, pole along e_z).
double sphere_quadrature_inverse(const Vec3& z, double r, int n_theta, int n_phi);
Vec3 sphere_quadrature_vector(const Vec3& z, double r, VectorKind kind, int n_theta, int n_phi);
// Truncated radial x sphere quadrature of the full-space convolution.
Vec3 conv_inverse_cube_quadrature(const Vec3& z, double r_max, int n_radial, int n_theta);

struct CaseResult {
    std::string name;
    double error = 0;
    double tol = 0;
    bool pass = false;
};

// Closed form vs independent quadrature. `perturb` scales the closed-form
// constant (mutation mode); 1.0 for the normal run.
std::vector<CaseResult> selftest(unsigned seed, int n_random = 100, double perturb = 1.0);

}  // namespace kernels
}  // namespace kin
