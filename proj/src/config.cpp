#include "kin/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "kin/errors.hpp"

namespace kin {

GridSpec RunConfig::grid() const {
    double ext = grid_extent > 0 ? grid_extent : bump.R0 + T * (bump.P0 + 1.0) + 3 * grid_spacing;
    return GridSpec::centered(ext, grid_spacing);
}

int RunConfig::steps() const { return static_cast<int>(std::lround(T / dt)); }

bool RunConfig::operator==(const RunConfig& o) const {
    return c == o.c && T == o.T && dt == o.dt && bump.R0 == o.bump.R0 && bump.P0 == o.bump.P0 &&
           bump.mass == o.bump.mass && bump.amplitude == o.bump.amplitude && n_x == o.n_x && n_p == o.n_p &&
           grid_spacing == o.grid_spacing && grid_extent == o.grid_extent && epsilon == o.epsilon &&
           softening == o.softening && sphere_order == o.sphere_order && radial_order == o.radial_order &&
           fp_tol == o.fp_tol && fp_max_iter == o.fp_max_iter && streaming == o.streaming &&
           interval == o.interval && probes == o.probes && c_ladder == o.c_ladder && f_probes == o.f_probes &&
           refine == o.refine && seed == o.seed;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

struct Key {
    std::string section, name;
    std::function<void(RunConfig&, const std::string&)> set;  // throws std::string on bad value
    std::function<std::string(const RunConfig&)> get;
};

double to_double(const std::string& v) {
    size_t pos = 0;
    double d;
    try {
        d = std::stod(v, &pos);
    } catch (...) {
        throw std::string("expected a number, got '" + v + "'");
    }
    if (pos != v.size()) {
        // allow simple fractions like 1/64
        auto slash = v.find('/');
        if (slash != std::string::npos) return to_double(trim(v.substr(0, slash))) / to_double(trim(v.substr(slash + 1)));
        throw std::string("expected a number, got '" + v + "'");
    }
    if (!std::isfinite(d)) throw std::string("value must be finite");
    return d;
}

long to_int(const std::string& v) {
    size_t pos = 0;
    long d;
    try {
        d = std::stol(v, &pos);
    } catch (...) {
        throw std::string("expected an integer, got '" + v + "'");
    }
    if (pos != v.size()) throw std::string("expected an integer, got '" + v + "'");
    return d;
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::string("expected a boolean, got '" + v + "'");
}

#define DBL(sec, name, field, check, msg)                                                  \
    Key {                                                                                  \
        sec, name,                                                                         \
            [](RunConfig& c, const std::string& v) {                                       \
                double x = to_double(v);                                                   \
                if (!(check)) throw std::string(msg);                                      \
                c.field = x;                                                               \
            },                                                                             \
            [](const RunConfig& c) { return fmt(c.field); }                                \
    }
#define INT(sec, name, field, check, msg)                                                  \
    Key {                                                                                  \
        sec, name,                                                                         \
            [](RunConfig& c, const std::string& v) {                                       \
                long x = to_int(v);                                                        \
                if (!(check)) throw std::string(msg);                                      \
                c.field = static_cast<decltype(c.field)>(x);                               \
            },                                                                             \
            [](const RunConfig& c) { return std::to_string(c.field); }                     \
    }

const std::vector<Key>& schema() {
    static const std::vector<Key> keys = {
        DBL("physical", "c", c, x >= 1, "constraint violated: c >= 1"),
        DBL("physical", "T", T, x > 0, "constraint violated: T > 0"),
        DBL("physical", "dt", dt, x > 0, "constraint violated: dt > 0"),
        DBL("bump", "R0", bump.R0, x > 0, "constraint violated: R0 > 0"),
        DBL("bump", "P0", bump.P0, x > 0, "constraint violated: P0 > 0"),
        DBL("bump", "mass", bump.mass, x >= 0, "constraint violated: mass >= 0"),
        DBL("bump", "amplitude", bump.amplitude, true, ""),
        INT("numerics", "n_x", n_x, x >= 1, "constraint violated: n_x >= 1"),
        INT("numerics", "n_p", n_p, x >= 1, "constraint violated: n_p >= 1"),
        DBL("numerics", "grid_spacing", grid_spacing, x > 0, "constraint violated: grid_spacing > 0"),
        DBL("numerics", "grid_extent", grid_extent, x >= 0, "constraint violated: grid_extent >= 0"),
        DBL("numerics", "epsilon", epsilon, x >= 0, "constraint violated: epsilon >= 0"),
        Key{"numerics", "softening",
            [](RunConfig& c, const std::string& v) {
                if (v == "plummer") c.softening = Softening::Mode::Plummer;
                else if (v == "cutoff") c.softening = Softening::Mode::Cutoff;
                else throw std::string("softening must be plummer or cutoff");
            },
            [](const RunConfig& c) {
                return std::string(c.softening == Softening::Mode::Plummer ? "plummer" : "cutoff");
            }},
        INT("numerics", "sphere_order", sphere_order, x >= 2, "constraint violated: sphere_order >= 2"),
        INT("numerics", "radial_order", radial_order, x >= 2, "constraint violated: radial_order >= 2"),
        DBL("numerics", "fp_tol", fp_tol, x > 0, "constraint violated: fp_tol > 0"),
        INT("numerics", "fp_max_iter", fp_max_iter, x >= 1, "constraint violated: fp_max_iter >= 1"),
        Key{"numerics", "streaming",
            [](RunConfig& c, const std::string& v) {
                if (v == "full") c.streaming = Streaming::Full;
                else if (v == "half") c.streaming = Streaming::Half;
                else throw std::string("streaming must be full or half");
            },
            [](const RunConfig& c) { return std::string(c.streaming == Streaming::Full ? "full" : "half"); }},
        INT("output", "interval", interval, x >= 1, "constraint violated: interval >= 1"),
        Key{"output", "probes", [](RunConfig& c, const std::string& v) { c.probes = v; },
            [](const RunConfig& c) { return c.probes; }},
        Key{"study", "c_ladder",
            [](RunConfig& c, const std::string& v) {
                std::vector<double> out;
                std::istringstream is(v);
                std::string tok;
                while (std::getline(is, tok, ',')) {
                    double x = to_double(trim(tok));
                    if (x < 1) throw std::string("constraint violated: c >= 1 for every ladder value");
                    out.push_back(x);
                }
                if (out.empty()) throw std::string("c_ladder must not be empty");
                c.c_ladder = out;
            },
            [](const RunConfig& c) {
                std::string s;
                for (size_t i = 0; i < c.c_ladder.size(); ++i) s += (i ? "," : "") + fmt(c.c_ladder[i]);
                return s;
            }},
        INT("study", "f_probes", f_probes, x >= 1, "constraint violated: f_probes >= 1"),
        Key{"study", "refine", [](RunConfig& c, const std::string& v) { c.refine = to_bool(v); },
            [](const RunConfig& c) { return std::string(c.refine ? "true" : "false"); }},
        Key{"", "seed",
            [](RunConfig& c, const std::string& v) {
                long x = to_int(v);
                if (x < 0) throw std::string("seed must be >= 0");
                c.seed = static_cast<std::uint64_t>(x);
            },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
    };
    return keys;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw Error(ErrorKind::Config, origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (auto& k : schema()) known |= k.section == section;
            if (!known) fail("unknown section [" + section + "]");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        const Key* hit = nullptr;
        for (auto& k : schema())
            if (k.name == key && (k.section == section || (k.section.empty() && section.empty()) ||
                                  (k.section.empty() && key == "seed")))
                hit = &k;
        // the common physical key c is also accepted at top level
        if (!hit && section.empty())
            for (auto& k : schema())
                if (k.section == "physical" && k.name == key) hit = &k;
        if (!hit) fail("unknown key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]"));
        try {
            hit->set(cfg, val);
        } catch (const std::string& msg) {
            fail(key + ": " + msg);
        }
    }
    if (cfg.dt > cfg.T) throw Error(ErrorKind::Config, origin + ": constraint violated: dt <= T");
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::Config, "cannot read config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string echo_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "# effective configuration\n";
    std::string section = "\x01";
    for (auto& k : schema())
        if (k.section.empty()) os << k.name << " = " << k.get(cfg) << "\n";
    for (auto& k : schema()) {
        if (k.section.empty()) continue;
        if (k.section != section) {
            section = k.section;
            os << "\n[" << section << "]\n";
        }
        os << k.name << " = " << k.get(cfg) << "\n";
    }
    return os.str();
}

}  // namespace kin
