#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "fpns/error.hpp"
#include "fpns/grid.hpp"
#include "json.hpp"

namespace fpns {

using Json = nlohmann::ordered_json;

/// Physical constants of the coupled system.  Library code accepts alpha = 0 and
/// gamma = 0 (decoupled oracle runs); the config parser demands strict positivity.
struct SimParams {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;
    double nu = 1.0;
    double sigma = 1.0;
    double epsilon = 0.1;

    void validate() const {
        if (!(alpha >= 0.0) || !(gamma >= 0.0)) throw ParameterError("alpha and gamma must be nonnegative");
        if (!(beta > 0.0)) throw ParameterError("beta must be positive");
        if (!(nu >= 0.0)) throw ParameterError("nu must be nonnegative");
        if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
        if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
    }
    bool operator==(const SimParams&) const = default;
};

enum class Variant { CS, MT, Beta, Phi, Seg };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::CS: return "CS";
        case Variant::MT: return "MT";
        case Variant::Beta: return "Beta";
        case Variant::Phi: return "Phi";
        case Variant::Seg: return "Seg";
    }
    return "?";
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "CS") return Variant::CS;
    if (s == "MT") return Variant::MT;
    if (s == "Beta") return Variant::Beta;
    if (s == "Phi") return Variant::Phi;
    if (s == "Seg") return Variant::Seg;
    throw ConfigError("model.variant", "unknown variant '" + s + "' (expected CS, MT, Beta, Phi, Seg)");
}

/// Communication kernel.  "bochner": phi = amplitude * psi*psi with psi a smooth bump of
/// radius r0/2; "indicator": amplitude on |x| < r0; "global": constant amplitude.
struct KernelSpec {
    std::string profile = "bochner";
    double radius = 0.4;
    double amplitude = 1.0;
    bool operator==(const KernelSpec&) const = default;
};

/// Segregated communities: g_l = exp(k cos(2 pi (x1/L - l/parts))) / sum.
struct SegSpec {
    int parts = 2;
    double sharpness = 2.0;
    bool operator==(const SegSpec&) const = default;
};

struct ModelSpec {
    Variant variant = Variant::CS;
    double beta_exponent = 0.5;
    KernelSpec kernel;
    SegSpec seg;

    void validate(const TorusGrid& g) const {
        if (kernel.profile != "bochner" && kernel.profile != "indicator" && kernel.profile != "global")
            throw ConfigError("model.kernel.profile", "expected bochner, indicator or global");
        if (!(kernel.amplitude > 0.0)) throw ConfigError("model.kernel.amplitude", "must be positive");
        if (kernel.profile != "global" && !(kernel.radius > 0.0 && kernel.radius < 0.5 * g.length))
            throw ConfigError("model.kernel.radius", "must lie in (0, L/2)");
        if (variant == Variant::Beta && !(beta_exponent >= 0.0))
            throw ConfigError("model.beta_exponent", "must be nonnegative");
        if (variant == Variant::Seg && (seg.parts < 1 || !(seg.sharpness >= 0.0)))
            throw ConfigError("model.seg", "parts >= 1 and sharpness >= 0 required");
    }
    bool operator==(const ModelSpec&) const = default;
};

struct GridSpec {
    double L = 1.0;
    int Nx = 32;
    int Nv = 32;
    double V = 6.0;
    TorusGrid torus() const { return TorusGrid(L, Nx); }
    VelocityGrid velocity() const { return VelocityGrid(V, Nv); }
    bool operator==(const GridSpec&) const = default;
};

/// Fixed dt, or dt capped by the advective CFL limit times cfl_safety when adaptive.
struct TimeSpec {
    double dt = 1e-3;
    bool adaptive = true;
    double cfl_safety = 0.5;
    double T_final = 1.0;
    int k_picard = 0;
    bool operator==(const TimeSpec&) const = default;
};

struct OutputSpec {
    int record_every = 10;
    int snapshot_every = 0;
    bool operator==(const OutputSpec&) const = default;
};

struct InitialSpec {
    std::string preset = "two-bump";
    std::uint64_t seed = 1;
    Vec2 wbar{0.3, -0.2};
    Vec2 u_mean{0.4, -0.2};
    double u_amplitude = 0.2;
    bool operator==(const InitialSpec&) const = default;
};

struct DiagnosticsSpec {
    double C_hypo = 100.0;
    double c1 = 0.1;
    bool operator==(const DiagnosticsSpec&) const = default;
};

struct SimConfig {
    SimParams params;
    ModelSpec model;
    GridSpec grid;
    TimeSpec time;
    OutputSpec output;
    InitialSpec initial;
    DiagnosticsSpec diagnostics;
    bool operator==(const SimConfig&) const = default;
};

inline const std::set<std::string>& preset_names() {
    static const std::set<std::string> names{"equilibrium", "shifted-maxwellians", "two-bump", "random-smooth",
                                             "taylor-green-fluid-only"};
    return names;
}

namespace detail {

inline void reject_unknown(const Json& obj, const std::string& prefix, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) throw ConfigError(prefix.empty() ? it.key() : prefix + "." + it.key(), "unknown key");
    }
}

template <typename T>
void read(const Json& obj, const char* key, const std::string& prefix, T& out) {
    if (!obj.contains(key)) return;
    const std::string name = prefix + "." + key;
    const Json& v = obj.at(key);
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(name, "expected a boolean");
        out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(name, "expected a string");
        out = v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(name, "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
            if (v.is_number_unsigned() || v.get<long long>() >= 0) out = v.get<T>();
            else throw ConfigError(name, "expected a nonnegative integer");
        } else {
            out = v.get<T>();
        }
    } else if constexpr (std::is_same_v<T, Vec2>) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw ConfigError(name, "expected [x, y]");
        out = {v[0].get<double>(), v[1].get<double>()};
    } else {
        if (!v.is_number()) throw ConfigError(name, "expected a number");
        out = v.get<double>();
        if (!std::isfinite(out)) throw ConfigError(name, "must be finite");
    }
}

inline void require_positive(double v, const char* key) {
    if (!(v > 0.0)) throw ConfigError(key, "must be strictly positive");
}

}  // namespace detail

/// Full validation of a resolved config (used by the parser and by run()).
inline void validate_config(const SimConfig& c) {
    using detail::require_positive;
    require_positive(c.params.alpha, "params.alpha");
    require_positive(c.params.beta, "params.beta");
    require_positive(c.params.gamma, "params.gamma");
    require_positive(c.params.nu, "params.nu");
    require_positive(c.params.sigma, "params.sigma");
    require_positive(c.params.epsilon, "params.epsilon");
    require_positive(c.grid.L, "grid.L");
    require_positive(c.grid.V, "grid.V");
    if (c.params.epsilon > 0.25 * c.grid.L) throw ConfigError("params.epsilon", "must not exceed L/4");
    if (c.grid.Nx < 8 || c.grid.Nx % 2 != 0) throw ConfigError("grid.Nx", "must be even and >= 8");
    if (c.grid.Nv < 16) throw ConfigError("grid.Nv", "must be >= 16");
    require_positive(c.time.dt, "time.dt");
    if (!(c.time.T_final >= 0.0)) throw ConfigError("time.T_final", "must be nonnegative");
    if (!(c.time.cfl_safety > 0.0 && c.time.cfl_safety <= 1.0)) throw ConfigError("time.cfl_safety", "must lie in (0, 1]");
    if (c.time.k_picard < 0) throw ConfigError("time.k_picard", "must be nonnegative");
    if (c.output.record_every < 1) throw ConfigError("output.record_every", "must be >= 1");
    if (c.output.snapshot_every < 0) throw ConfigError("output.snapshot_every", "must be >= 0");
    if (!preset_names().count(c.initial.preset)) throw ConfigError("initial.preset", "unknown preset '" + c.initial.preset + "'");
    if (!(c.diagnostics.C_hypo >= 0.0)) throw ConfigError("diagnostics.C_hypo", "must be nonnegative");
    if (!(c.diagnostics.c1 > 0.0)) throw ConfigError("diagnostics.c1", "must be positive");
    c.model.validate(c.grid.torus());
}

inline SimConfig config_from_json(const Json& j) {
    using detail::read;
    using detail::reject_unknown;
    SimConfig c;
    reject_unknown(j, "", {"params", "model", "grid", "time", "output", "initial", "diagnostics"});
    if (j.contains("params")) {
        const Json& p = j["params"];
        reject_unknown(p, "params", {"alpha", "beta", "gamma", "nu", "sigma", "epsilon"});
        read(p, "alpha", "params", c.params.alpha);
        read(p, "beta", "params", c.params.beta);
        read(p, "gamma", "params", c.params.gamma);
        read(p, "nu", "params", c.params.nu);
        read(p, "sigma", "params", c.params.sigma);
        read(p, "epsilon", "params", c.params.epsilon);
    }
    if (j.contains("model")) {
        const Json& m = j["model"];
        reject_unknown(m, "model", {"variant", "beta_exponent", "kernel", "seg"});
        std::string name = variant_name(c.model.variant);
        read(m, "variant", "model", name);
        c.model.variant = variant_from_name(name);
        read(m, "beta_exponent", "model", c.model.beta_exponent);
        if (m.contains("kernel")) {
            const Json& k = m["kernel"];
            reject_unknown(k, "model.kernel", {"profile", "radius", "amplitude"});
            read(k, "profile", "model.kernel", c.model.kernel.profile);
            read(k, "radius", "model.kernel", c.model.kernel.radius);
            read(k, "amplitude", "model.kernel", c.model.kernel.amplitude);
        }
        if (m.contains("seg")) {
            const Json& s = m["seg"];
            reject_unknown(s, "model.seg", {"parts", "sharpness"});
            read(s, "parts", "model.seg", c.model.seg.parts);
            read(s, "sharpness", "model.seg", c.model.seg.sharpness);
        }
    }
    if (j.contains("grid")) {
        const Json& g = j["grid"];
        reject_unknown(g, "grid", {"L", "Nx", "Nv", "V"});
        read(g, "L", "grid", c.grid.L);
        read(g, "Nx", "grid", c.grid.Nx);
        read(g, "Nv", "grid", c.grid.Nv);
        read(g, "V", "grid", c.grid.V);
    }
    if (j.contains("time")) {
        const Json& t = j["time"];
        reject_unknown(t, "time", {"dt", "adaptive", "cfl_safety", "T_final", "k_picard"});
        read(t, "dt", "time", c.time.dt);
        read(t, "adaptive", "time", c.time.adaptive);
        read(t, "cfl_safety", "time", c.time.cfl_safety);
        read(t, "T_final", "time", c.time.T_final);
        read(t, "k_picard", "time", c.time.k_picard);
    }
    if (j.contains("output")) {
        const Json& o = j["output"];
        reject_unknown(o, "output", {"record_every", "snapshot_every"});
        read(o, "record_every", "output", c.output.record_every);
        read(o, "snapshot_every", "output", c.output.snapshot_every);
    }
    if (j.contains("initial")) {
        const Json& i = j["initial"];
        reject_unknown(i, "initial", {"preset", "seed", "wbar", "u_mean", "u_amplitude"});
        read(i, "preset", "initial", c.initial.preset);
        read(i, "seed", "initial", c.initial.seed);
        read(i, "wbar", "initial", c.initial.wbar);
        read(i, "u_mean", "initial", c.initial.u_mean);
        read(i, "u_amplitude", "initial", c.initial.u_amplitude);
    }
    if (j.contains("diagnostics")) {
        const Json& d = j["diagnostics"];
        reject_unknown(d, "diagnostics", {"C_hypo", "c1"});
        read(d, "C_hypo", "diagnostics", c.diagnostics.C_hypo);
        read(d, "c1", "diagnostics", c.diagnostics.c1);
    }
    validate_config(c);
    return c;
}

inline Json config_to_json(const SimConfig& c) {
    Json j;
    j["params"] = {{"alpha", c.params.alpha}, {"beta", c.params.beta}, {"gamma", c.params.gamma},
                   {"nu", c.params.nu},       {"sigma", c.params.sigma}, {"epsilon", c.params.epsilon}};
    j["model"] = {{"variant", variant_name(c.model.variant)},
                  {"beta_exponent", c.model.beta_exponent},
                  {"kernel",
                   {{"profile", c.model.kernel.profile},
                    {"radius", c.model.kernel.radius},
                    {"amplitude", c.model.kernel.amplitude}}},
                  {"seg", {{"parts", c.model.seg.parts}, {"sharpness", c.model.seg.sharpness}}}};
    j["grid"] = {{"L", c.grid.L}, {"Nx", c.grid.Nx}, {"Nv", c.grid.Nv}, {"V", c.grid.V}};
    j["time"] = {{"dt", c.time.dt},           {"adaptive", c.time.adaptive}, {"cfl_safety", c.time.cfl_safety},
                 {"T_final", c.time.T_final}, {"k_picard", c.time.k_picard}};
    j["output"] = {{"record_every", c.output.record_every}, {"snapshot_every", c.output.snapshot_every}};
    j["initial"] = {{"preset", c.initial.preset},
                    {"seed", c.initial.seed},
                    {"wbar", {c.initial.wbar.x, c.initial.wbar.y}},
                    {"u_mean", {c.initial.u_mean.x, c.initial.u_mean.y}},
                    {"u_amplitude", c.initial.u_amplitude}};
    j["diagnostics"] = {{"C_hypo", c.diagnostics.C_hypo}, {"c1", c.diagnostics.c1}};
    return j;
}

inline SimConfig parse_config_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

inline SimConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace fpns
