#pragma once
// Run configuration: a single JSON file per run, strict about unknown keys.
// Sections: domain, mesh, physics, particles, softwall, langevin, fep, plus
// the optional top-level "membrane_enabled" switch (membrane-free mode).

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "memfep/free_energy.hpp"

namespace memfep {

namespace detail {

using Json = nlohmann::json;

inline void check_keys(const Json& obj, const std::set<std::string>& allowed,
                       const std::string& context) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + context);
}

inline const Json& require_key(const Json& obj, const std::string& key,
                               const std::string& context) {
    if (!obj.contains(key))
        throw ConfigError("missing key '" + key + "' in " + context);
    return obj.at(key);
}

inline double number_at(const Json& obj, const std::string& key, const std::string& context) {
    const Json& v = require_key(obj, key, context);
    if (!v.is_number()) throw ConfigError("'" + key + "' in " + context + " must be a number");
    return v.get<double>();
}

inline double number_or(const Json& obj, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number()) throw ConfigError("'" + key + "' must be a number");
    return obj.at(key).get<double>();
}

inline std::vector<double> number_list(const Json& v, const std::string& context) {
    if (!v.is_array()) throw ConfigError(context + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(context + " must contain only numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

}  // namespace detail

struct FepSpec {
    std::string protocol;
    std::vector<double> omegas;
};

struct RunConfig {
    std::optional<Domain> domain;
    std::optional<Discretization> mesh;
    std::optional<PhysicsParams> physics;
    std::optional<std::vector<Particle>> particles;
    std::optional<nlohmann::json> softwall_raw;
    std::optional<SamplerParams> langevin;  // beta filled from physics
    std::optional<FepSpec> fep;
    bool membrane_enabled{true};
};

inline RunConfig parse_config(const nlohmann::json& root) {
    using detail::Json;
    if (!root.is_object()) throw ConfigError("top level must be an object");
    detail::check_keys(root,
                       {"domain", "mesh", "physics", "particles", "softwall", "langevin",
                        "fep", "membrane_enabled"},
                       "top level");
    RunConfig cfg;

    if (root.contains("membrane_enabled")) {
        if (!root.at("membrane_enabled").is_boolean())
            throw ConfigError("'membrane_enabled' must be a boolean");
        cfg.membrane_enabled = root.at("membrane_enabled").get<bool>();
    }

    if (root.contains("domain")) {
        const Json& d = root.at("domain");
        detail::check_keys(d, {"lx", "ly"}, "domain");
        Domain dom{detail::number_at(d, "lx", "domain"), detail::number_at(d, "ly", "domain")};
        if (!dom.valid()) throw ConfigError("domain side lengths must be positive");
        cfg.domain = dom;
    }

    if (root.contains("mesh")) {
        const Json& m = root.at("mesh");
        detail::check_keys(m,
                           {"nx", "ny", "subsample", "quad_m", "penalty_alpha0",
                            "penalty_alpha1", "ghost_gamma", "solver_tol"},
                           "mesh");
        Discretization disc;
        disc.nx = static_cast<int>(detail::number_at(m, "nx", "mesh"));
        disc.ny = static_cast<int>(detail::number_at(m, "ny", "mesh"));
        disc.subsample = static_cast<int>(detail::number_or(m, "subsample", disc.subsample));
        disc.quad_m = static_cast<int>(detail::number_or(m, "quad_m", disc.quad_m));
        disc.penalty_alpha0 = detail::number_or(m, "penalty_alpha0", disc.penalty_alpha0);
        disc.penalty_alpha1 = detail::number_or(m, "penalty_alpha1", disc.penalty_alpha1);
        disc.ghost_gamma = detail::number_or(m, "ghost_gamma", disc.ghost_gamma);
        disc.solver_tol = detail::number_or(m, "solver_tol", disc.solver_tol);
        if (disc.nx < 2 || disc.ny < 2) throw ConfigError("mesh nx, ny must be >= 2");
        if (disc.subsample < 1 || disc.quad_m < 0 || !(disc.penalty_alpha0 > 0.0) ||
            !(disc.penalty_alpha1 > 0.0) || !(disc.ghost_gamma >= 0.0) ||
            !(disc.solver_tol > 0.0))
            throw ConfigError("mesh parameters must be positive");
        cfg.mesh = disc;
    }

    if (root.contains("physics")) {
        const Json& p = root.at("physics");
        detail::check_keys(p, {"kappa", "sigma", "beta"}, "physics");
        PhysicsParams ph;
        ph.kappa = detail::number_at(p, "kappa", "physics");
        ph.sigma = detail::number_at(p, "sigma", "physics");
        ph.beta = detail::number_at(p, "beta", "physics");
        ph.validate();
        cfg.physics = ph;
    }

    if (root.contains("particles")) {
        const Json& arr = root.at("particles");
        if (!arr.is_array()) throw ConfigError("'particles' must be an array");
        std::vector<Particle> particles;
        for (const auto& e : arr) {
            detail::check_keys(e, {"x", "y", "alpha", "radius", "h_coeffs", "s_coeffs"},
                               "particles[]");
            Particle p;
            p.center = {detail::number_at(e, "x", "particle"),
                        detail::number_at(e, "y", "particle")};
            p.angle = detail::number_or(e, "alpha", 0.0);
            p.radius = detail::number_at(e, "radius", "particle");
            if (!(p.radius > 0.0)) throw ConfigError("particle radius must be positive");
            if (e.contains("h_coeffs"))
                p.profile.height = FourierSeries(
                    detail::number_list(e.at("h_coeffs"), "h_coeffs"));
            if (e.contains("s_coeffs"))
                p.profile.slope = FourierSeries(
                    detail::number_list(e.at("s_coeffs"), "s_coeffs"));
            particles.push_back(std::move(p));
        }
        cfg.particles = std::move(particles);
    }

    if (root.contains("softwall")) {
        const Json& s = root.at("softwall");
        detail::check_keys(s, {"eps", "sigma_pair", "sigma_wall"}, "softwall");
        detail::require_key(s, "eps", "softwall");
        detail::require_key(s, "sigma_pair", "softwall");
        detail::require_key(s, "sigma_wall", "softwall");
        cfg.softwall_raw = s;
    }

    if (root.contains("langevin")) {
        const Json& l = root.at("langevin");
        detail::check_keys(l, {"tau", "steps", "seed", "max_rejects", "gamma"}, "langevin");
        SamplerParams sp;
        sp.tau = detail::number_at(l, "tau", "langevin");
        sp.steps = static_cast<long>(detail::number_at(l, "steps", "langevin"));
        const Json& seed = detail::require_key(l, "seed", "langevin");
        if (!seed.is_number_integer() && !seed.is_number_unsigned())
            throw ConfigError("'seed' must be an integer");
        sp.seed = seed.get<std::uint64_t>();
        sp.max_rejects = static_cast<int>(detail::number_or(l, "max_rejects", 100.0));
        sp.gamma = detail::number_or(l, "gamma", 1.0);
        cfg.langevin = sp;
    }

    if (root.contains("fep")) {
        const Json& f = root.at("fep");
        detail::check_keys(f, {"protocol", "omegas"}, "fep");
        FepSpec spec;
        const auto& proto = detail::require_key(f, "protocol", "fep");
        if (!proto.is_string()) throw ConfigError("'protocol' must be a string");
        spec.protocol = proto.get<std::string>();
        PerturbationProtocol::from_name(spec.protocol);  // validate name
        spec.omegas = detail::number_list(detail::require_key(f, "omegas", "fep"), "omegas");
        cfg.fep = spec;
    }

    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return parse_config(root);
}

// Scalar entries broadcast to the full pair matrices / wall vector.
inline SoftWallParams materialize_softwall(const nlohmann::json& raw, int n) {
    SoftWallParams p;
    const auto fill_matrix = [&](const nlohmann::json& v, const std::string& name)
        -> std::vector<std::vector<double>> {
        if (v.is_number()) {
            return std::vector<std::vector<double>>(
                n, std::vector<double>(n, v.get<double>()));
        }
        if (!v.is_array() || static_cast<int>(v.size()) != n)
            throw ConfigError("softwall '" + name + "' must be a number or an NxN array");
        std::vector<std::vector<double>> m;
        for (const auto& row : v) m.push_back(detail::number_list(row, name + " row"));
        for (const auto& row : m)
            if (static_cast<int>(row.size()) != n)
                throw ConfigError("softwall '" + name + "' must be NxN");
        return m;
    };
    p.eps = fill_matrix(raw.at("eps"), "eps");
    p.sigma_pair = fill_matrix(raw.at("sigma_pair"), "sigma_pair");
    const auto& w = raw.at("sigma_wall");
    if (w.is_number()) {
        p.sigma_wall.assign(n, w.get<double>());
    } else {
        p.sigma_wall = detail::number_list(w, "sigma_wall");
        if (static_cast<int>(p.sigma_wall.size()) != n)
            throw ConfigError("softwall 'sigma_wall' must be a number or an N-vector");
    }
    p.validate(n);
    return p;
}

// Assembles the immutable model bundle for the invoked subcommand; missing
// sections are reported by name.
inline SystemModel build_system(const RunConfig& cfg, bool need_softwall) {
    if (!cfg.domain) throw ConfigError("missing section 'domain'");
    if (!cfg.mesh) throw ConfigError("missing section 'mesh'");
    if (!cfg.physics) throw ConfigError("missing section 'physics'");
    if (!cfg.particles || cfg.particles->empty())
        throw ConfigError("missing or empty section 'particles'");
    SystemModel model;
    model.domain = *cfg.domain;
    model.particles = *cfg.particles;
    model.physics = *cfg.physics;
    model.disc = *cfg.mesh;
    model.use_membrane = cfg.membrane_enabled;
    const int n = static_cast<int>(model.particles.size());
    if (need_softwall) {
        if (!cfg.softwall_raw) throw ConfigError("missing section 'softwall'");
        model.softwall = materialize_softwall(*cfg.softwall_raw, n);
    } else {
        model.softwall = cfg.softwall_raw ? materialize_softwall(*cfg.softwall_raw, n)
                                          : SoftWallParams::uniform(n, 0.0, 1.0, 1.0);
    }
    // Validates feasibility of the configured poses.
    make_configuration(model.domain, model.particles);
    return model;
}

inline SamplerParams build_sampler_params(const RunConfig& cfg) {
    if (!cfg.langevin) throw ConfigError("missing section 'langevin'");
    if (!cfg.physics) throw ConfigError("missing section 'physics'");
    SamplerParams sp = *cfg.langevin;
    sp.beta = cfg.physics->beta;
    sp.validate();
    return sp;
}

}  // namespace memfep
