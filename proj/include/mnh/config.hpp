#pragma once

#include <yaml-cpp/yaml.h>

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace mnh {

enum class Command { bloch_spectrum, ep_find, arc_trace, skin_check, ribbon_sweep, localization, reproduce };

inline std::string_view to_string(Command c) {
    switch (c) {
        case Command::bloch_spectrum: return "bloch-spectrum";
        case Command::ep_find: return "ep-find";
        case Command::arc_trace: return "arc-trace";
        case Command::skin_check: return "skin-check";
        case Command::ribbon_sweep: return "ribbon-sweep";
        case Command::localization: return "localization";
        case Command::reproduce: return "reproduce";
    }
    return "?";
}

inline std::optional<Command> command_from_string(std::string_view s) {
    for (auto c : {Command::bloch_spectrum, Command::ep_find, Command::arc_trace, Command::skin_check,
                   Command::ribbon_sweep, Command::localization, Command::reproduce})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

enum class DmiMode { c3, no_z };

struct GridConfig {
    int k_grid = 128;                  // bond-phase grid per side (ep-find, arc-trace, bloch-spectrum)
    std::vector<Vec2> k_points;        // explicit Bloch momenta; overrides k_grid for bloch-spectrum
    int k_random = 0;                  // extra random Bloch momenta drawn with the run seed
    int w = 52;                        // dimer rows
    int kx_samples = 402;              // symmetric k_x grid size for ribbon-sweep
    std::vector<double> kx_values;     // explicit k_x list; overrides kx_samples
    int ky_samples = 256;              // periodic reference cloud
    bool periodic_y = false;
    std::optional<int> flavour;        // 1..3, arc-trace restriction
};

struct ToleranceConfig {
    double residual = 0.0;  // 0 selects the size-dependent default
    double gap_rel = 1e-6;
    double overlap = 1e-4;
    double cloud = 1e-2;
    double edge_fraction = 0.1;
    double edge_mass = 0.6;
    double half_mass = 0.75;
    double nhse_presence = 0.05;
    double flip_deadband = 0.1;
};

enum class Format { csv, json, ndjson, svg };

inline std::string_view to_string(Format f) {
    switch (f) {
        case Format::csv: return "csv";
        case Format::json: return "json";
        case Format::ndjson: return "ndjson";
        case Format::svg: return "svg";
    }
    return "?";
}

struct OutputConfig {
    std::string dir = "out";
    std::string prefix;  // empty: command name
    std::vector<Format> formats{Format::csv, Format::json};
};

struct RunConfig {
    Command command = Command::bloch_spectrum;
    ModelConfig model{};
    DmiMode dmi = DmiMode::c3;
    GridConfig grid{};
    ToleranceConfig tolerance{};
    OutputConfig output{};
    std::optional<std::string> preset;  // reproduce only
    std::uint64_t seed = 0;
    unsigned threads = 1;

    [[nodiscard]] std::string resolved_prefix() const {
        return output.prefix.empty() ? std::string(preset ? *preset : to_string(command)) : output.prefix;
    }
    [[nodiscard]] std::optional<double> residual_tol() const {
        return tolerance.residual > 0.0 ? std::optional<double>(tolerance.residual) : std::nullopt;
    }
};

namespace detail {

inline std::string where(const YAML::Node& n) {
    const auto m = n.Mark();
    if (m.line < 0) return "";
    return " (line " + std::to_string(m.line + 1) + ")";
}

[[noreturn]] inline void config_fail(const YAML::Node& n, const std::string& msg) {
    throw ConfigError("config: " + msg + where(n));
}

inline void check_keys(const YAML::Node& map, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!map.IsMap()) config_fail(map, "'" + path + "' must be a mapping");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        if (!ok.count(key)) config_fail(kv.first, "unknown key '" + (path.empty() ? key : path + "." + key) + "'");
    }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& name) {
    if (!n.IsScalar()) config_fail(n, "'" + name + "' must be a scalar");
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        config_fail(n, "'" + name + "' has the wrong type");
    }
}

inline double real_value(const YAML::Node& n, const std::string& name) {
    const double v = scalar<double>(n, name);
    if (!std::isfinite(v)) config_fail(n, "'" + name + "' must be finite");
    return v;
}

inline int positive_int(const YAML::Node& n, const std::string& name) {
    const int v = scalar<int>(n, name);
    if (v < 1) config_fail(n, "'" + name + "' must be positive");
    return v;
}

/// Complex numbers: a plain number, [re, im], or {mod, phase_over_pi}.
inline cd complex_value(const YAML::Node& n, const std::string& name) {
    if (n.IsScalar()) return real_value(n, name);
    if (n.IsSequence()) {
        if (n.size() != 2) config_fail(n, "'" + name + "' must be [re, im]");
        return {real_value(n[0], name), real_value(n[1], name)};
    }
    if (n.IsMap()) {
        check_keys(n, name, {"mod", "phase_over_pi"});
        if (!n["mod"] || !n["phase_over_pi"]) config_fail(n, "'" + name + "' needs both mod and phase_over_pi");
        return std::polar(real_value(n["mod"], name + ".mod"), pi * real_value(n["phase_over_pi"], name + ".phase_over_pi"));
    }
    config_fail(n, "'" + name + "' is not a complex number");
}

inline std::vector<double> real_list(const YAML::Node& n, const std::string& name) {
    if (!n.IsSequence()) config_fail(n, "'" + name + "' must be a list");
    std::vector<double> out;
    for (const auto& x : n) out.push_back(real_value(x, name));
    return out;
}

inline void parse_model(const YAML::Node& n, RunConfig& rc) {
    check_keys(n, "model", {"variant", "j", "k_coupling", "gamma", "d", "b_field", "dmi", "energy_scale"});
    ModelConfig& m = rc.model;
    if (n["variant"]) {
        const auto v = variant_from_string(scalar<std::string>(n["variant"], "model.variant"));
        if (!v) config_fail(n["variant"], "unknown variant '" + n["variant"].as<std::string>() + "'");
        m.variant = *v;
    }
    if (n["j"]) {
        const auto& j = n["j"];
        if (!j.IsSequence() || j.size() != 3) config_fail(j, "'model.j' must list three couplings");
        m.j = {complex_value(j[0], "model.j[0]"), complex_value(j[1], "model.j[1]"), complex_value(j[2], "model.j[2]")};
    }
    // Variant-specific keys are rejected by name so the diagnostic points at the offending line.
    auto only_for = [&](const char* key, std::initializer_list<Variant> vs) {
        if (!n[key]) return false;
        for (auto v : vs)
            if (v == m.variant) return true;
        config_fail(n[key], std::string("field '") + key + "' not valid for variant " + std::string(to_string(m.variant)));
    };
    if (only_for("k_coupling", {Variant::KModel})) m.k_coupling = complex_value(n["k_coupling"], "model.k_coupling");
    if (only_for("gamma", {Variant::GammaModel})) m.gamma = complex_value(n["gamma"], "model.gamma");
    if (only_for("d", {Variant::MagModel})) m.d = real_value(n["d"], "model.d");
    if (only_for("b_field", {Variant::MagModel})) {
        const auto b = real_list(n["b_field"], "model.b_field");
        if (b.size() != 3) config_fail(n["b_field"], "'model.b_field' must have three components");
        m.b_field = Vec3(b[0], b[1], b[2]);
    }
    if (only_for("dmi", {Variant::MagModel})) {
        const auto s = scalar<std::string>(n["dmi"], "model.dmi");
        if (s == "c3") rc.dmi = DmiMode::c3;
        else if (s == "no_z") rc.dmi = DmiMode::no_z;
        else config_fail(n["dmi"], "'model.dmi' must be c3 or no_z");
        if (rc.dmi == DmiMode::no_z) m.dmi_vectors = dmi_vectors_without_z();
    }
    if (n["energy_scale"]) {
        const auto s = scalar<std::string>(n["energy_scale"], "model.energy_scale");
        if (s == "raw") m.energy_scale = EnergyScale::raw;
        else if (s == "half") m.energy_scale = EnergyScale::half;
        else config_fail(n["energy_scale"], "'model.energy_scale' must be raw or half");
    }
}

inline void parse_grid(const YAML::Node& n, GridConfig& g) {
    check_keys(n, "grid", {"k_grid", "k_points", "k_random", "w", "kx_samples", "kx_values", "ky_samples",
                           "boundary_y", "flavour"});
    if (n["k_grid"]) g.k_grid = positive_int(n["k_grid"], "grid.k_grid");
    if (n["k_points"]) {
        if (!n["k_points"].IsSequence()) config_fail(n["k_points"], "'grid.k_points' must be a list of [kx, ky]");
        for (const auto& p : n["k_points"]) {
            const auto v = real_list(p, "grid.k_points");
            if (v.size() != 2) config_fail(p, "'grid.k_points' entries must be [kx, ky]");
            g.k_points.emplace_back(v[0], v[1]);
        }
    }
    if (n["k_random"]) {
        g.k_random = scalar<int>(n["k_random"], "grid.k_random");
        if (g.k_random < 0) config_fail(n["k_random"], "'grid.k_random' must be non-negative");
    }
    if (n["w"]) {
        g.w = scalar<int>(n["w"], "grid.w");
        if (g.w < 2) config_fail(n["w"], "'grid.w' must be at least 2");
    }
    if (n["kx_samples"]) g.kx_samples = positive_int(n["kx_samples"], "grid.kx_samples");
    if (n["kx_values"]) g.kx_values = real_list(n["kx_values"], "grid.kx_values");
    if (n["ky_samples"]) g.ky_samples = positive_int(n["ky_samples"], "grid.ky_samples");
    if (n["boundary_y"]) {
        const auto s = scalar<std::string>(n["boundary_y"], "grid.boundary_y");
        if (s == "open") g.periodic_y = false;
        else if (s == "periodic") g.periodic_y = true;
        else config_fail(n["boundary_y"], "'grid.boundary_y' must be open or periodic");
    }
    if (n["flavour"]) {
        const int f = scalar<int>(n["flavour"], "grid.flavour");
        if (f < 1 || f > 3) config_fail(n["flavour"], "'grid.flavour' must be 1, 2 or 3");
        g.flavour = f;
    }
}

inline void parse_tolerance(const YAML::Node& n, ToleranceConfig& t) {
    check_keys(n, "tolerance", {"residual", "gap_rel", "overlap", "cloud", "edge_fraction", "edge_mass", "half_mass",
                                "nhse_presence", "flip_deadband"});
    auto pos = [&](const char* key, double& dst) {
        if (!n[key]) return;
        dst = real_value(n[key], std::string("tolerance.") + key);
        if (dst < 0.0) config_fail(n[key], std::string("'tolerance.") + key + "' must be non-negative");
    };
    pos("residual", t.residual);
    pos("gap_rel", t.gap_rel);
    pos("overlap", t.overlap);
    pos("cloud", t.cloud);
    pos("edge_fraction", t.edge_fraction);
    pos("edge_mass", t.edge_mass);
    pos("half_mass", t.half_mass);
    pos("nhse_presence", t.nhse_presence);
    pos("flip_deadband", t.flip_deadband);
}

inline void parse_output(const YAML::Node& n, OutputConfig& o) {
    check_keys(n, "output", {"dir", "prefix", "formats"});
    if (n["dir"]) o.dir = scalar<std::string>(n["dir"], "output.dir");
    if (n["prefix"]) o.prefix = scalar<std::string>(n["prefix"], "output.prefix");
    if (n["formats"]) {
        if (!n["formats"].IsSequence()) config_fail(n["formats"], "'output.formats' must be a list");
        o.formats.clear();
        for (const auto& f : n["formats"]) {
            const auto s = scalar<std::string>(f, "output.formats");
            if (s == "csv") o.formats.push_back(Format::csv);
            else if (s == "json") o.formats.push_back(Format::json);
            else if (s == "ndjson") o.formats.push_back(Format::ndjson);
            else if (s == "svg") o.formats.push_back(Format::svg);
            else config_fail(f, "unknown output format '" + s + "'");
        }
    }
}

}  // namespace detail

/// Parses a YAML run configuration. JSON is accepted too, being a subset of YAML.
inline RunConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(std::string("config: syntax error: ") + e.what());
    }
    RunConfig rc;
    if (!root || root.IsNull()) return rc;
    detail::check_keys(root, "", {"command", "preset", "model", "grid", "tolerance", "output", "seed", "threads"});
    if (root["command"]) {
        const auto s = detail::scalar<std::string>(root["command"], "command");
        const auto c = command_from_string(s);
        if (!c) detail::config_fail(root["command"], "unknown command '" + s + "'");
        rc.command = *c;
    }
    if (root["preset"]) rc.preset = detail::scalar<std::string>(root["preset"], "preset");
    if (root["model"]) detail::parse_model(root["model"], rc);
    if (root["grid"]) detail::parse_grid(root["grid"], rc.grid);
    if (root["tolerance"]) detail::parse_tolerance(root["tolerance"], rc.tolerance);
    if (root["output"]) detail::parse_output(root["output"], rc.output);
    if (root["seed"]) rc.seed = detail::scalar<std::uint64_t>(root["seed"], "seed");
    if (root["threads"]) rc.threads = detail::scalar<unsigned>(root["threads"], "threads");
    try {
        rc.model.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return rc;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace mnh
