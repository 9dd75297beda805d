#include "kin/kernels.hpp"

#include <algorithm>
#include <numbers>
#include <random>

#include "kin/errors.hpp"
#include "kin/quadrature.hpp"

namespace kin {

PotentialResult newtonian_potential(const std::vector<Vec3>& sources, const std::vector<double>& masses,
                                    const std::vector<Vec3>& targets, const Softening& soft, bool exclude_self) {
    if (sources.size() != masses.size())
        throw Error(ErrorKind::InvalidInput, "newtonian_potential: sources/masses size mismatch");
    if (exclude_self && sources.size() != targets.size())
        throw Error(ErrorKind::InvalidInput, "newtonian_potential: exclude_self needs targets == sources");
    PotentialResult out;
    out.phi.assign(targets.size(), 0.0);
    out.grad.assign(targets.size(), Vec3{});
    const bool plummer = soft.mode == Softening::Mode::Plummer;
    const double e2 = soft.eps * soft.eps;
    for (size_t i = 0; i < targets.size(); ++i) {
        const Vec3 x = targets[i];
        double phi = 0, gx = 0, gy = 0, gz = 0;
        for (size_t k = 0; k < sources.size(); ++k) {
            if (exclude_self && k == i) continue;
            double dx = x.x - sources[k].x, dy = x.y - sources[k].y, dz = x.z - sources[k].z;
            double r2 = dx * dx + dy * dy + dz * dz;
            double inv;
            if (plummer) {
                inv = 1.0 / std::sqrt(r2 + e2);
            } else {
                double r = std::sqrt(r2);
                if (r == 0 && soft.eps == 0)
                    throw Error(ErrorKind::Singular, "newtonian_potential: target coincides with source " +
                                                         std::to_string(k));
                inv = 1.0 / std::fmax(r, soft.eps);
            }
            if (plummer && inv == INFINITY)
                throw Error(ErrorKind::Singular,
                            "newtonian_potential: target coincides with unsoftened source " + std::to_string(k));
            double m = masses[k];
            double inv3 = inv * inv * inv;
            phi -= m * inv;
            gx += m * dx * inv3;
            gy += m * dy * inv3;
            gz += m * dz * inv3;
        }
        out.phi[i] = phi;
        out.grad[i] = {gx, gy, gz};
    }
    return out;
}

LinearKernelResult linear_kernel_potential(const std::vector<Vec3>& sources, const std::vector<double>& masses,
                                           const std::vector<Vec3>& targets, const Softening& soft,
                                           double ort_tol) {
    if (sources.size() != masses.size())
        throw Error(ErrorKind::InvalidInput, "linear_kernel_potential: sources/masses size mismatch");
    LinearKernelResult out;
    double scale = 0;
    for (size_t k = 0; k < sources.size(); ++k) {
        out.total_mass += masses[k];
        out.first_moment += masses[k] * sources[k];
        scale += std::fabs(masses[k]) * (1.0 + norm(sources[k]));
    }
    out.ort_warning = scale > 0 && (std::fabs(out.total_mass) + max_abs(out.first_moment)) > ort_tol * scale;
    out.value.assign(targets.size(), 0.0);
    out.grad.assign(targets.size(), Vec3{});
    for (size_t i = 0; i < targets.size(); ++i) {
        double v = 0;
        Vec3 g;
        for (size_t k = 0; k < sources.size(); ++k) {
            Vec3 d = targets[i] - sources[k];
            double r = soft.dist(d);
            v += masses[k] * r;
            if (r > 0) g += (masses[k] / r) * d;
        }
        out.value[i] = -0.5 * v;
        out.grad[i] = -0.5 * g;
    }
    return out;
}

namespace kernels {

double sphere_mean_inverse(const Vec3& z, double r) {
    if (!(r > 0)) throw Error(ErrorKind::InvalidInput, "sphere_mean_inverse: r must be > 0");
    double a = norm(z);
    return r >= a ? kFourPi / r : kFourPi / a;
}

double sphere_mean_linear(const Vec3& z, double r) {
    if (!(r > 0)) throw Error(ErrorKind::InvalidInput, "sphere_mean_linear: r must be > 0");
    double a = norm(z);
    if (r >= a) return kFourPi * r + kFourPi / 3.0 * a * a / r;
    return kFourPi * a + kFourPi / 3.0 * r * r / a;
}

Vec3 sphere_mean_vector(const Vec3& z, double r, VectorKind kind, double jump_tol) {
    if (!(r > 0)) throw Error(ErrorKind::InvalidInput, "sphere_mean_vector: r must be > 0");
    double a = norm(z);
    if (std::fabs(r - a) <= jump_tol * std::fmax(1.0, r))
        throw Error(ErrorKind::OnJumpSurface, "sphere_mean_vector: r = |z| lies on the jump surface");
    if (kind == VectorKind::GradInverse) {
        if (r > a) return {};
        return (kFourPi / (a * a * a)) * z;
    }
    if (r > a) return (2.0 * kFourPi / (3.0 * r)) * z;
    Vec3 zbar = z / a;
    return (kFourPi - kFourPi / 3.0 * r * r / (a * a)) * zbar;
}

Vec3 conv_inverse_cube(const Vec3& z) {
    double a = norm(z);
    if (a == 0) throw Error(ErrorKind::Singular, "conv_inverse_cube: z must be nonzero");
    return (2.0 * std::numbers::pi / a) * z;
}

double sphere_quadrature_inverse(const Vec3& z, double r, int n_theta, int n_phi) {
    auto s = quad::sphere_rule(n_theta, n_phi);
    double acc = 0;
    for (size_t q = 0; q < s.w.size(); ++q) acc += s.w[q] / norm(z - r * s.dir[q]);
    return acc;
}

Vec3 sphere_quadrature_vector(const Vec3& z, double r, VectorKind kind, int n_theta, int n_phi) {
    auto s = quad::sphere_rule(n_theta, n_phi);
    Vec3 acc;
    for (size_t q = 0; q < s.w.size(); ++q) {
        Vec3 d = z - r * s.dir[q];
        double n = norm(d);
        double f = kind == VectorKind::GradInverse ? 1.0 / (n * n * n) : 1.0 / n;
        acc += (s.w[q] * f) * d;
    }
    return acc;
}

Vec3 conv_inverse_cube_quadrature(const Vec3& z, double r_max, int n_radial, int n_theta) {
    // Sphere parametrised about zbar with cos(theta) = 1 - s^2 to absorb the
    // endpoint singularity at r = |z|; the transverse part integrates to 0.
    const double a = norm(z);
    const Vec3 zbar = z / a;
    auto gs = quad::gauss_legendre(n_theta, 0.0, std::sqrt(2.0));
    auto angular = [&](double r) {
        double acc = 0;
        for (size_t i = 0; i < gs.x.size(); ++i) {
            double s = gs.x[i], ct = 1 - s * s;
            double d = std::sqrt(std::fmax(r * r + a * a - 2 * r * a * ct, 0.0));
            acc += gs.w[i] * 2 * s * ct / d;
        }
        return 2 * std::numbers::pi * acc;  // component along zbar
    };
    double total = 0;
    auto inner = quad::gauss_legendre(n_radial, 0.0, a);
    for (size_t i = 0; i < inner.x.size(); ++i) total += inner.w[i] * angular(inner.x[i]);
    // r = a/u on [a, r_max]
    auto outer = quad::gauss_legendre(n_radial, a / r_max, 1.0);
    for (size_t i = 0; i < outer.x.size(); ++i) {
        double u = outer.x[i];
        total += outer.w[i] * angular(a / u) * a / (u * u);
    }
    return total * zbar;
}

std::vector<CaseResult> selftest(unsigned seed, int n_random, double perturb) {
    std::vector<CaseResult> out;
    auto add = [&](std::string name, double err, double tol) { out.push_back({std::move(name), err, tol, err <= tol}); };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0), rad(0.2, 3.0);
    const int nt = 160, np = 320;
    const double tol = 1e-8;
    auto rel = [](double a, double b, double scale) { return std::fabs(a - b) / scale; };
    auto relv = [](const Vec3& a, const Vec3& b, double scale) { return max_abs(a - b) / scale; };
    for (int c = 0; c < n_random; ++c) {
        Vec3 z;
        double r;
        do {
            z = {u(rng), u(rng), u(rng)};
            z = rad(rng) * (z / std::fmax(norm(z), 1e-3));
            r = rad(rng);
        } while (std::fabs(r - norm(z)) < 0.2 * std::fmax(r, norm(z)));
        double scale0 = kFourPi / std::fmax(r, norm(z));
        double scale1 = kFourPi / std::pow(std::fmax(r, norm(z)), 2);
        double scale2 = kFourPi * std::fmax(r, norm(z));
        std::string tag = "#" + std::to_string(c);
        add("inverse " + tag, rel(perturb * sphere_mean_inverse(z, r), sphere_quadrature_inverse(z, r, nt, np), scale0), tol);
        add("linear-scalar " + tag, rel(perturb * sphere_mean_linear(z, r),
                                        [&] {
                                            auto s = quad::sphere_rule(nt, np);
                                            double acc = 0;
                                            for (size_t q = 0; q < s.w.size(); ++q) acc += s.w[q] * norm(z - r * s.dir[q]);
                                            return acc;
                                        }(),
                                        scale2),
            tol);
        add("grad-inverse " + tag,
            relv(perturb * sphere_mean_vector(z, r, VectorKind::GradInverse),
                 sphere_quadrature_vector(z, r, VectorKind::GradInverse, nt, np), scale1),
            tol);
        add("linear-vector " + tag,
            relv(perturb * sphere_mean_vector(z, r, VectorKind::Linear),
                 sphere_quadrature_vector(z, r, VectorKind::Linear, nt, np), kFourPi),
            tol);
    }
    for (int c = 0; c < 5; ++c) {
        Vec3 z{u(rng), u(rng), u(rng)};
        z = z / norm(z);
        add("convolution #" + std::to_string(c),
            relv(perturb * conv_inverse_cube(z), conv_inverse_cube_quadrature(z, 1e6, 96, 96), 2 * std::numbers::pi),
            1e-4);
    }
    return out;
}

}  // namespace kernels
}  // namespace kin
