#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "kin/ensemble.hpp"
#include "kin/kernels.hpp"

namespace kin {

enum class Streaming { Full, Half };  // x' = p(1 - p^2/c^2) or p(1 - p^2/2c^2)

struct RunConfig {
    // [physical]
    double c = 8.0;
    double T = 0.5;
    double dt = 1.0 / 64;
    // [bump]
    BumpSpec bump;
    // [numerics]
    int n_x = 5, n_p = 5;
    double grid_spacing = 0.25;
    double grid_extent = 0.0;  // half-width; 0 = derived from support and T
    double epsilon = 0.0;      // 0 = half the grid spacing
    Softening::Mode softening = Softening::Mode::Plummer;
    int sphere_order = 16;
    int radial_order = 16;
    double fp_tol = 1e-10;
    int fp_max_iter = 20;
    Streaming streaming = Streaming::Full;
    // [output]
    int interval = 8;  // steps between snapshots
    std::string probes;
    // [study]
    std::vector<double> c_ladder{4, 8, 16};
    int f_probes = 400;
    bool refine = true;
    // top level
    std::uint64_t seed = 1;

    double eps() const { return epsilon > 0 ? epsilon : 0.5 * grid_spacing; }
    Softening soft() const { return {eps(), softening}; }
    LatticeSpec lattice() const { return {n_x, n_p, 10}; }
    GridSpec grid() const;  // deposition grid covering the support over [0,T]
    int steps() const;      // T / dt, rounded

    bool operator==(const RunConfig&) const;
};

RunConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");
RunConfig parse_config(const std::string& path);
std::string echo_config(const RunConfig& cfg);

}  // namespace kin
