#include <cmath>
#include <limits>
#include <cstdio>
#include <numbers>

#include "doctest.h"
#include "kin/ensemble.hpp"
#include "kin/errors.hpp"
#include "kin/quadrature.hpp"

using namespace kin;

namespace {
// Independent oracle: tensor Gauss product over the bounding cube, 4 panels per axis.
double cube_integral_of_profile(double R) {
    std::vector<double> xs, ws;
    for (int p = 0; p < 4; ++p) {
        auto g = quad::gauss_legendre(24, -R + p * R / 2, -R + (p + 1) * R / 2);
        xs.insert(xs.end(), g.x.begin(), g.x.end());
        ws.insert(ws.end(), g.w.begin(), g.w.end());
    }
    double s = 0;
    for (size_t i = 0; i < xs.size(); ++i)
        for (size_t j = 0; j < xs.size(); ++j)
            for (size_t k = 0; k < xs.size(); ++k)
                s += ws[i] * ws[j] * ws[k] * bump::profile(std::sqrt(xs[i] * xs[i] + xs[j] * xs[j] + xs[k] * xs[k]) / R);
    return s;
}
}  // namespace

TEST_CASE("sampling: zero amplitude and errors") {
    BumpSpec s;
    s.amplitude = 0;
    auto e = sample_initial_density(s);
    CHECK(e.total_mass() == 0.0);
    s.require_positive = true;
    CHECK_THROWS_AS(sample_initial_density(s), Error);
    BumpSpec bad;
    bad.R0 = 0;
    CHECK_THROWS_AS(sample_initial_density(bad), Error);
}

TEST_CASE("sampling: mass against tensor quadrature and support") {
    BumpSpec s;
    s.R0 = 1.0;
    s.P0 = 0.8;
    s.amplitude = 2.5;
    auto e = sample_initial_density(s);
    double oracle = s.amplitude * cube_integral_of_profile(s.R0) * cube_integral_of_profile(s.P0);
    CHECK(std::fabs(e.total_mass() / oracle - 1) < 1e-3);
    for (size_t k = 0; k < e.size(); ++k) {
        CHECK(norm(e.x[k]) <= s.R0);
        CHECK(norm(e.p[k]) <= s.P0);
        CHECK(e.w[k] > 0);
    }
    BumpSpec d;  // mass-normalised default
    CHECK(std::fabs(sample_initial_density(d).total_mass() - 1.0) < 1e-3);
}

TEST_CASE("sampling: momentum symmetry") {
    auto e = sample_initial_density(BumpSpec{});
    Vec3 P;
    for (size_t k = 0; k < e.size(); ++k) P += e.w[k] * e.p[k];
    CHECK(max_abs(P) < 1e-15);
}

TEST_CASE("deposit: single particle") {
    GridSpec g = GridSpec::centered(2.0, 0.25);
    ParticleEnsemble e;
    e.push({0, 0, 0}, {1, 0, 0}, 1.0, 1.0);
    CHECK(deposit_moments(e, g).integral_mu() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(deposit_moments(e, g, MuWeight::Gamma, 2.0).integral_mu() ==
          doctest::Approx(1.0 / std::sqrt(1.25)).epsilon(1e-14));
    CHECK(deposit_moments(e, g, MuWeight::DarwinStar, 2.0).integral_mu() ==
          doctest::Approx(1.0 - 1.0 / 8).epsilon(1e-14));
    ParticleEnsemble far;
    far.push({1.9, 0, 0}, {0, 0, 0}, 1.0, 1.0);
    try {
        deposit_moments(far, g);
        FAIL("expected out-of-domain");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::OutOfDomain);
        CHECK(std::string(err.what()).find("particle 0") != std::string::npos);
    }
}

TEST_CASE("deposit: smooth bump against direct density") {
    BumpSpec s;
    auto e = sample_initial_density(s, {8, 6, 10});
    GridSpec g = GridSpec::centered(2.0, 0.25);
    auto m = deposit_moments(e, g);
    CHECK(std::fabs(m.integral_mu() - e.total_mass()) < 1e-13);
    double sup = 0, err = 0;
    auto nodes = g.nodes();
    for (size_t i = 0; i < nodes.size(); ++i) {
        double d = bump::density(s, nodes[i]);
        sup = std::fmax(sup, d);
        err = std::fmax(err, std::fabs(d - m.mu[i]));
        CHECK(m.mu[i] >= 0);
    }
    // B-spline smoothing costs (h^2/6) |Laplacian mu| ~ 0.1 sup mu at h = 0.25
    // on a unit bump; sampling at h_x = 0.25 adds comparable aliasing.
    MESSAGE("deposit relative sup error " << err / sup);
    CHECK(err / sup < 0.25);
}

TEST_CASE("grid derivative is exact on cubics") {
    GridSpec g = GridSpec::centered(1.0, 0.25);
    auto nodes = g.nodes();
    GridField f(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i) f[i] = std::pow(nodes[i].y, 3) + nodes[i].x;
    auto d = grid_derivative(f, g, 1);
    for (int i = 2; i < g.n - 2; ++i)
        for (int j = 2; j < g.n - 2; ++j) {
            auto y = g.node(i, j, 3).y;
            CHECK(d[g.index(i, j, 3)] == doctest::Approx(3 * y * y).epsilon(1e-12));
        }
}

TEST_CASE("snapshot round trip") {
    auto e = sample_initial_density(BumpSpec{}, {3, 3, 4});
    e.aux.assign(e.size(), 0.5);
    std::string path = "/tmp/kin_snapshot_test.csv";
    write_snapshot(path, e, 0.25, 8.0);
    double t, c;
    auto r = read_snapshot(path, &t, &c);
    CHECK(t == 0.25);
    CHECK(c == 8.0);
    REQUIRE(r.size() == e.size());
    for (size_t k = 0; k < e.size(); ++k) {
        CHECK(r.x[k].x == e.x[k].x);
        CHECK(r.w[k] == e.w[k]);
        CHECK(r.aux[k] == 0.5);
    }
    // Newtonian snapshots carry c = inf
    write_snapshot(path, e, 0.5, std::numeric_limits<double>::infinity());
    read_snapshot(path, &t, &c);
    CHECK(std::isinf(c));
    std::remove(path.c_str());
}
