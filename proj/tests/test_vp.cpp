#include <cmath>
#include <random>

#include "doctest.h"
#include "kin/errors.hpp"
#include "kin/vp.hpp"

using namespace kin;

namespace {
VPState small_state(int n = 3) {
    VPState s;
    s.ens = sample_initial_density(BumpSpec{}, {n, n, 6});
    s.soft = {0.125, Softening::Mode::Plummer};
    return s;
}
}  // namespace

TEST_CASE("single particle streams freely") {
    VPState s;
    s.ens.push({0.1, 0.2, 0.3}, {0.5, -0.25, 1.0}, 1.0, 1.0);
    for (int i = 0; i < 10; ++i) s = vp_step(s, 0.1);
    CHECK(max_abs(s.ens.x[0] - Vec3{0.6, -0.05, 1.3}) < 1e-14);
    CHECK(s.ens.carried[0] == 1.0);
}

TEST_CASE("two-body momentum conservation") {
    VPState s;
    s.soft = {0.05, Softening::Mode::Plummer};
    s.ens.push({0.5, 0, 0}, {0, 0.3, 0}, 1.0, 1.0);
    s.ens.push({-0.5, 0, 0}, {0, -0.3, 0}, 1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        auto n = vp_step(s, 0.05);
        CHECK(max_abs(vp_momentum(n) - vp_momentum(s)) < 1e-12);
        s = n;
    }
    CHECK(max_abs(rad_identity_residual(s)) == 0.0);
}

TEST_CASE("energy drift and halving") {
    auto s0 = small_state();
    double e0 = vp_energy(s0);
    auto drift = [&](double dt) {
        auto s = s0;
        int n = static_cast<int>(std::lround(0.5 / dt));
        for (int i = 0; i < n; ++i) s = vp_step(s, dt);
        return std::fabs(vp_energy(s) - e0) / std::fabs(e0);
    };
    double d1 = drift(1.0 / 64), d2 = drift(1.0 / 128);
    MESSAGE("energy drift " << d1 << " -> " << d2);
    CHECK(d1 < 1e-4);
    CHECK((d2 < 1e-13 || d1 / d2 > 4));
}

TEST_CASE("reversibility and support growth bound") {
    auto s0 = small_state();
    double sup_force = 0;
    for (auto& f : vp_forces(s0.ens.x, s0.ens.w, s0.soft)) sup_force = std::fmax(sup_force, norm(f));
    auto s = s0;
    double pmax0 = 0;
    for (auto& p : s0.ens.p) pmax0 = std::fmax(pmax0, norm(p));
    double sup_all = sup_force;
    for (int i = 0; i < 8; ++i) {
        s = vp_step(s, 1.0 / 64);
        for (auto& f : vp_forces(s.ens.x, s.ens.w, s.soft)) sup_all = std::fmax(sup_all, norm(f));
        double pmax = 0;
        for (auto& p : s.ens.p) pmax = std::fmax(pmax, norm(p));
        CHECK(pmax <= pmax0 + s.t * sup_all + 1e-12);
    }
    // RK4 is not time-symmetric: the round trip error scales like dt^4.
    auto round_trip = [&](double dt, int n) {
        auto r = s0;
        for (int i = 0; i < n; ++i) r = vp_step(r, dt);
        for (int i = 0; i < n; ++i) r = vp_step(r, -dt);
        double err = 0;
        for (size_t k = 0; k < r.ens.size(); ++k) err = std::fmax(err, norm(r.ens.x[k] - s0.ens.x[k]));
        return err;
    };
    double coarse = round_trip(1.0 / 64, 8), fine = round_trip(1.0 / 512, 64);
    MESSAGE("round trip " << coarse << " -> " << fine);
    CHECK(fine < 1e-10);
}

TEST_CASE("self-force identity") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    VPState s;
    s.soft = {0.05, Softening::Mode::Plummer};
    for (int i = 0; i < 1000; ++i) s.ens.push({u(rng), u(rng), u(rng)}, {}, 0.5 + 0.5 * u(rng), 1.0);
    CHECK(max_abs(rad_identity_residual(s)) < 1e-12);
    VPState one;
    one.ens.push({0, 0, 0}, {}, 1.0, 1.0);
    CHECK(max_abs(rad_identity_residual(one)) == 0.0);
}

TEST_CASE("time derivative recursion") {
    auto s = small_state();
    GridSpec g = GridSpec::centered(2.0, 0.25);
    auto d = vp_time_derivatives(s, g, 3);
    double sup1 = 0;
    for (double v : d[0]) sup1 = std::fmax(sup1, std::fabs(v));
    CHECK(sup1 < 1e-14);
    auto o = ort_residuals(s, g);
    CHECK(std::fabs(o.mass) < 1e-10);
    CHECK(max_abs(o.moment) < 1e-10);
    double m3 = 0;
    for (double v : d[2]) m3 += v * g.cell_volume();
    CHECK(std::fabs(m3) < 1e-10);
    CHECK_THROWS_AS(vp_time_derivatives(s, g, 4), Error);
    VPState empty;
    auto oz = ort_residuals(empty, g);
    CHECK(oz.mass == 0.0);
}

TEST_CASE("first time derivative against centred differences") {
    auto s = small_state();
    // give the cloud a net drift so d_t mu is not zero
    for (auto& p : s.ens.p) p += Vec3{0.3, -0.1, 0.2};
    GridSpec g = GridSpec::centered(2.5, 0.125);
    auto d = vp_time_derivatives(s, g, 2);
    double prev = 0;
    for (double h : {0.02, 0.01}) {
        auto a = deposit_moments(vp_step(s, h).ens, g).mu;
        auto b = deposit_moments(vp_step(s, -h).ens, g).mu;
        double err = 0, sup = 0;
        for (size_t i = 0; i < a.size(); ++i) {
            err = std::fmax(err, std::fabs((a[i] - b[i]) / (2 * h) - d[0][i]));
            sup = std::fmax(sup, std::fabs(d[0][i]));
        }
        MESSAGE("dt mu FD error " << err / sup << " at h=" << h);
        if (prev > 0) CHECK(prev / err > 3.5);
        CHECK(err / sup < 2e-2);
        prev = err;
    }
    // second derivative: the cubic B-spline has a discontinuous third
    // derivative, so the centred second difference only converges at O(h)
    auto second = [&](double h) {
        auto a = deposit_moments(vp_step(s, h).ens, g).mu;
        auto b = deposit_moments(vp_step(s, -h).ens, g).mu;
        auto m = deposit_moments(s.ens, g).mu;
        double err = 0, sup = 0;
        for (size_t i = 0; i < a.size(); ++i) {
            err = std::fmax(err, std::fabs((a[i] - 2 * m[i] + b[i]) / (h * h) - d[1][i]));
            sup = std::fmax(sup, std::fabs(d[1][i]));
        }
        return err / sup;
    };
    double e1 = second(0.01), e2 = second(0.005);
    MESSAGE("dt2 mu FD error " << e1 << " -> " << e2);
    CHECK(e1 / e2 > 1.8);
    CHECK(e2 < 3e-2);
}

TEST_CASE("trajectory frames interpolate at high order") {
    // exact on quintic paths
    auto path = [](double t) { return Vec3{1 + t - 2 * t * t * t, t * t * t * t * t, -0.5 * t * t}; };
    auto vel = [](double t) { return Vec3{1 - 6 * t * t, 5 * t * t * t * t, -t}; };
    auto acc = [](double t) { return Vec3{-12 * t, 20 * t * t * t, -1.0}; };
    TrajectoryFrames f;
    for (int i = 0; i <= 3; ++i) {
        double t = 0.3 * i;
        f.append(t, {path(t)}, {vel(t)}, {acc(t)});
    }
    std::vector<Vec3> x, v, a;
    for (double t : {0.05, 0.31, 0.77}) {
        f.at(t, x, v, a);
        CHECK(max_abs(x[0] - path(t)) < 1e-13);
        CHECK(max_abs(v[0] - vel(t)) < 1e-12);
        CHECK(max_abs(a[0] - acc(t)) < 1e-11);
    }
    CHECK_THROWS_AS(f.at(1.0, x, v, a), Error);
    auto run = vp_run(small_state(), 1.0 / 16, 4);
    run.frames.at(0.25, x, v, a);
    CHECK(max_abs(x[3] - run.states.back().ens.x[3]) < 1e-14);
}
