#include "kin/ensemble.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "kin/errors.hpp"
#include "kin/quadrature.hpp"

namespace kin {

namespace bump {

double profile(double r) {
    if (r >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r * r));
}

double profile_d(double r) {
    if (r >= 1.0) return 0.0;
    double q = 1.0 - r * r;
    return profile(r) * (-2.0 * r / (q * q));
}

double profile_dd(double r) {
    if (r >= 1.0) return 0.0;
    double q = 1.0 - r * r;
    return profile(r) * (4 * r * r / (q * q * q * q) - 2 / (q * q) - 8 * r * r / (q * q * q));
}

double radial_integral() {
    static const double v = [] {
        // the integrand is flat near r=1, so a single high-order panel pair suffices
        double s = 0;
        for (auto [a, b] : {std::pair{0.0, 0.5}, std::pair{0.5, 0.8}, std::pair{0.8, 1.0}}) {
            auto g = quad::gauss_legendre(60, a, b);
            for (size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * profile(g.x[i]) * g.x[i] * g.x[i];
        }
        return s;
    }();
    return v;
}

double value(const BumpSpec& s, const Vec3& x, const Vec3& p) {
    return s.A() * profile(norm(x) / s.R0) * profile(norm(p) / s.P0);
}

void gradient(const BumpSpec& s, const Vec3& x, const Vec3& p, Vec3& gx, Vec3& gp) {
    double rx = norm(x), rp = norm(p);
    double bx = profile(rx / s.R0), bp = profile(rp / s.P0);
    double A = s.A();
    gx = rx > 0 ? (A * bp * profile_d(rx / s.R0) / (s.R0 * rx)) * x : Vec3{};
    gp = rp > 0 ? (A * bx * profile_d(rp / s.P0) / (s.P0 * rp)) * p : Vec3{};
}

double density(const BumpSpec& s, const Vec3& x) {
    return s.A() * profile(norm(x) / s.R0) * 4 * std::numbers::pi * radial_integral() * std::pow(s.P0, 3);
}

}  // namespace bump

double BumpSpec::A() const {
    if (amplitude >= 0) return amplitude;
    double ix = 4 * std::numbers::pi * bump::radial_integral() * R0 * R0 * R0;
    double ip = 4 * std::numbers::pi * bump::radial_integral() * P0 * P0 * P0;
    return mass / (ix * ip);
}

double ParticleEnsemble::total_mass() const {
    double m = 0;
    for (double v : w) m += v;
    return m;
}

void ParticleEnsemble::push(const Vec3& xi, const Vec3& pi, double wi, double ci) {
    x.push_back(xi);
    p.push_back(pi);
    w.push_back(wi);
    carried.push_back(ci);
}

namespace {

struct Cell {
    Vec3 centroid;
    double mass;  // integral of b(|y|/R) over the cell
};

// Cells of a cubic lattice over [-R,R]^3 whose centre lies inside the ball;
// mass and centroid by tensor Gauss quadrature inside each cell.
std::vector<Cell> radial_cells(double R, int n, int sub) {
    std::vector<Cell> cells, edge;
    const double h = 2 * R / n;
    auto g = quad::gauss_legendre(sub, -0.5 * h, 0.5 * h);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                Vec3 c{-R + (i + 0.5) * h, -R + (j + 0.5) * h, -R + (k + 0.5) * h};
                double m = 0;
                Vec3 mc;
                for (int a = 0; a < sub; ++a)
                    for (int b = 0; b < sub; ++b)
                        for (int d = 0; d < sub; ++d) {
                            Vec3 y = c + Vec3{g.x[a], g.x[b], g.x[d]};
                            double f = g.w[a] * g.w[b] * g.w[d] * bump::profile(norm(y) / R);
                            m += f;
                            mc += f * y;
                        }
                if (m <= 0) continue;
                if (norm(c) < R) {
                    cells.push_back({mc / m, m});
                } else {
                    edge.push_back({mc / m, m});
                }
            }
    // Fold the thin boundary cells into their nearest interior neighbour so the
    // mass stays exact without adding near-empty particles.
    for (const auto& b : edge) {
        size_t best = 0;
        double bd = INFINITY;
        for (size_t q = 0; q < cells.size(); ++q) {
            double d = norm2(cells[q].centroid - b.centroid);
            if (d < bd) bd = d, best = q;
        }
        if (cells.empty()) {
            cells.push_back(b);
            continue;
        }
        Cell& a = cells[best];
        double m = a.mass + b.mass;
        a.centroid = (a.mass / m) * a.centroid + (b.mass / m) * b.centroid;
        a.mass = m;
    }
    return cells;
}

}  // namespace

ParticleEnsemble sample_initial_density(const BumpSpec& spec, const LatticeSpec& lat) {
    if (!(spec.R0 > 0) || !(spec.P0 > 0) || lat.n_x < 1 || lat.n_p < 1)
        throw Error(ErrorKind::InvalidInput, "sample_initial_density: empty support");
    const double A = spec.A();
    if (spec.require_positive && !(A > 0))
        throw Error(ErrorKind::InvalidInput, "sample_initial_density: amplitude must be positive");
    ParticleEnsemble e;
    if (A <= 0) return e;
    auto cx = radial_cells(spec.R0, lat.n_x, lat.sub);
    auto cp = radial_cells(spec.P0, lat.n_p, lat.sub);
    for (auto& a : cx)
        for (auto& b : cp) {
            double w = A * a.mass * b.mass;
            if (w <= 0) continue;
            e.push(a.centroid, b.centroid, w, bump::value(spec, a.centroid, b.centroid));
        }
    return e;
}

GridSpec GridSpec::centered(double half_extent, double h) {
    GridSpec g;
    int half = static_cast<int>(std::ceil(half_extent / h - 1e-12));
    g.n = 2 * half + 1;
    g.h = h;
    g.origin = {-half * h, -half * h, -half * h};
    return g;
}

std::vector<Vec3> GridSpec::nodes() const {
    std::vector<Vec3> out;
    out.reserve(count());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) out.push_back(node(i, j, k));
    return out;
}

double MomentGrid::integral_mu() const {
    double s = 0;
    for (double v : mu) s += v;
    return s * spec.cell_volume();
}

namespace {

inline void bspline_weights(double s, int& i0, double wts[4]) {
    // nodes i0..i0+3 with i0 = floor(s) - 1
    double fl = std::floor(s);
    i0 = static_cast<int>(fl) - 1;
    double t = s - fl;  // in [0,1)
    double u = 1 - t;
    wts[0] = u * u * u / 6;
    wts[1] = (4 - 6 * t * t + 3 * t * t * t) / 6;
    wts[2] = (4 - 6 * u * u + 3 * u * u * u) / 6;
    wts[3] = t * t * t / 6;
}

// Derivatives of the node weights with respect to the field coordinate, order 0..3.
inline void bspline_derivs(double t, double h, double d[4][4]) {
    double u = 1 - t;
    double w[4][4] = {
        {u * u * u / 6, -u * u / 2, u, -1},
        {(4 - 6 * t * t + 3 * t * t * t) / 6, -2 * t + 1.5 * t * t, -2 + 3 * t, 3},
        {(4 - 6 * u * u + 3 * u * u * u) / 6, 2 * u - 1.5 * u * u, -2 + 3 * u, -3},
        {t * t * t / 6, t * t / 2, t, 1},
    };
    // d/dx_node = -d/dt / h
    for (int m = 0; m < 4; ++m) {
        double s = 1;
        for (int q = 0; q < 4; ++q) {
            d[m][q] = w[m][q] * s;
            s *= -1.0 / h;
        }
    }
}

}  // namespace

GridField deposit_derivatives(const std::vector<Vec3>& pos, const std::vector<DerivTerm>& terms, const GridSpec& g) {
    GridField out(g.count(), 0.0);
    const double inv_vol = 1.0 / g.cell_volume();
    for (auto& t : terms)
        if (t.a < 0 || t.b < 0 || t.c < 0 || t.a + t.b + t.c > 3)
            throw Error(ErrorKind::UnsupportedOrder, "deposit_derivatives: total order must be <= 3");
    for (size_t k = 0; k < pos.size(); ++k) {
        int i0[3];
        double d[3][4][4];
        for (int ax = 0; ax < 3; ++ax) {
            double s = (pos[k][ax] - g.origin[ax]) / g.h;
            double fl = std::floor(s);
            i0[ax] = static_cast<int>(fl) - 1;
            if (!(i0[ax] >= 0 && i0[ax] + 3 <= g.n - 1))
                throw Error(ErrorKind::OutOfDomain, "deposit: particle " + std::to_string(k) + " outside grid");
            bspline_derivs(s - fl, g.h, d[ax]);
        }
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c) {
                    double acc = 0;
                    for (auto& t : terms) acc += t.values[k] * d[0][a][t.a] * d[1][b][t.b] * d[2][c][t.c];
                    out[g.index(i0[0] + a, i0[1] + b, i0[2] + c)] += acc * inv_vol;
                }
    }
    return out;
}

std::vector<GridField> deposit_channels(const std::vector<Vec3>& pos, const std::vector<const double*>& values,
                                        const GridSpec& g) {
    std::vector<GridField> out(values.size(), GridField(g.count(), 0.0));
    const double inv_vol = 1.0 / g.cell_volume();
    for (size_t k = 0; k < pos.size(); ++k) {
        int i0[3];
        double wt[3][4];
        for (int d = 0; d < 3; ++d) {
            double s = (pos[k][d] - g.origin[d]) / g.h;
            bspline_weights(s, i0[d], wt[d]);
            if (!(i0[d] >= 0 && i0[d] + 3 <= g.n - 1))
                throw Error(ErrorKind::OutOfDomain, "deposit: particle " + std::to_string(k) + " at (" +
                                                        std::to_string(pos[k].x) + "," + std::to_string(pos[k].y) +
                                                        "," + std::to_string(pos[k].z) + ") outside grid");
        }
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c) {
                    size_t idx = g.index(i0[0] + a, i0[1] + b, i0[2] + c);
                    double s = wt[0][a] * wt[1][b] * wt[2][c] * inv_vol;
                    for (size_t ch = 0; ch < values.size(); ++ch) out[ch][idx] += s * values[ch][k];
                }
    }
    return out;
}

MomentGrid deposit_moments(const ParticleEnsemble& e, const GridSpec& g, MuWeight flag, double c) {
    if (e.size() == 0) throw Error(ErrorKind::InvalidInput, "deposit_moments: empty ensemble");
    const size_t n = e.size();
    std::vector<double> m(n), jx(n), jy(n), jz(n);
    for (size_t k = 0; k < n; ++k) {
        double p2 = norm2(e.p[k]);
        double f = 1.0;
        if (flag == MuWeight::Gamma) f = 1.0 / std::sqrt(1.0 + p2 / (c * c));
        if (flag == MuWeight::DarwinStar) f = 1.0 - p2 / (2 * c * c);
        m[k] = e.w[k] * f;
        jx[k] = e.w[k] * e.p[k].x;
        jy[k] = e.w[k] * e.p[k].y;
        jz[k] = e.w[k] * e.p[k].z;
    }
    auto ch = deposit_channels(e.x, {m.data(), jx.data(), jy.data(), jz.data()}, g);
    MomentGrid out;
    out.spec = g;
    out.mu = std::move(ch[0]);
    out.j = {std::move(ch[1]), std::move(ch[2]), std::move(ch[3])};
    return out;
}

GridField grid_derivative(const GridField& f, const GridSpec& g, int axis) {
    GridField out(f.size(), 0.0);
    const int n = g.n;
    const double s = 1.0 / (12 * g.h);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                int id[3] = {i, j, k};
                if (id[axis] < 2 || id[axis] > n - 3) continue;
                auto at = [&](int off) {
                    int q[3] = {i, j, k};
                    q[axis] += off;
                    return f[g.index(q[0], q[1], q[2])];
                };
                out[g.index(i, j, k)] = s * (at(-2) - 8 * at(-1) + 8 * at(1) - at(2));
            }
    return out;
}

void write_snapshot(const std::string& path, const ParticleEnsemble& e, double t, double c) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::Io, "cannot write snapshot " + path);
    os << std::setprecision(17);
    os << "# " << e.size() << " " << t << " " << c << "\n";
    for (size_t k = 0; k < e.size(); ++k) {
        os << e.x[k].x << ',' << e.x[k].y << ',' << e.x[k].z << ',' << e.p[k].x << ',' << e.p[k].y << ','
           << e.p[k].z << ',' << e.w[k] << ',' << e.carried[k];
        if (e.has_aux()) os << ',' << e.aux[k];
        os << '\n';
    }
}

ParticleEnsemble read_snapshot(const std::string& path, double* t, double* c) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::Io, "cannot read snapshot " + path);
    std::string line;
    std::getline(is, line);
    std::istringstream hs(line);
    char hash;
    size_t count;
    std::string ts, cs;
    if (!(hs >> hash >> count >> ts >> cs) || hash != '#')
        throw Error(ErrorKind::Io, path + ": bad snapshot header");
    // strtod, unlike operator>>, accepts "inf" (Newtonian snapshots)
    char* end = nullptr;
    const double tt = std::strtod(ts.c_str(), &end);
    if (*end) throw Error(ErrorKind::Io, path + ": bad snapshot time");
    const double cc = std::strtod(cs.c_str(), &end);
    if (*end) throw Error(ErrorKind::Io, path + ": bad snapshot c");
    if (t) *t = tt;
    if (c) *c = cc;
    ParticleEnsemble e;
    size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> v;
        std::istringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, ',')) v.push_back(std::stod(tok));
        if (v.size() != 8 && v.size() != 9)
            throw Error(ErrorKind::Io, path + ":" + std::to_string(lineno) + ": expected 8 or 9 columns");
        e.push({v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6], v[7]);
        if (v.size() == 9) e.aux.push_back(v[8]);
    }
    if (e.size() != count) throw Error(ErrorKind::Io, path + ": header count does not match rows");
    if (!e.aux.empty() && e.aux.size() != e.size()) throw Error(ErrorKind::Io, path + ": ragged aux column");
    return e;
}

}  // namespace kin
