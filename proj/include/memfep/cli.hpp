#pragma once
// Subcommand implementations behind the memfep binary. Each run_* function
// performs one pipeline entry, writes its files, and returns a one-line
// summary; the binary maps typed errors to exit codes (2 config, 3 solver,
// 4 stuck sampler, 5 degenerate estimate).

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "memfep/config.hpp"

namespace memfep::cli {

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open output file '" + path + "'");
    return out;
}

inline std::string with_suffix(const std::string& path, const std::string& suffix) {
    const std::size_t slash = path.find_last_of('/');
    const std::size_t dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return path + suffix;
    return path.substr(0, dot) + suffix + path.substr(dot);
}

inline std::string stem_of(const std::string& path) {
    const std::size_t slash = path.find_last_of('/');
    const std::size_t dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
    return path.substr(0, dot);
}

inline std::string join_numbers(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += format_double(v[i]);
    }
    return s + "]";
}

}  // namespace detail

// solve: membrane field export plus a summary with M(q), the recovered
// height/tilt DOFs, and the constraint residuals.
inline std::string run_solve(const RunConfig& cfg, const std::string& out_path,
                             const std::string& vtk_path = "") {
    const SystemModel model = build_system(cfg, /*need_softwall=*/false);
    const ParticleConfig config = make_configuration(model.domain, model.particles);
    const MembraneSolution sol = solve_membrane(config, model.physics, model.disc);
    const double m_value = energy(sol);

    {
        auto out = detail::open_out(out_path);
        write_field_csv(sol, out);
    }
    if (!vtk_path.empty()) {
        auto out = detail::open_out(vtk_path);
        write_field_vtk(sol, out);
    }

    std::ostringstream summary;
    summary << "M=" << format_double(m_value)
            << " solve_residual=" << format_double(sol.solve_residual) << " Z="
            << detail::join_numbers(sol.heights) << " beta=[";
    for (std::size_t i = 0; i < sol.tilts.size(); ++i) {
        if (i) summary << ',';
        summary << '[' << format_double(sol.tilts[i].x) << ','
                << format_double(sol.tilts[i].y) << ']';
    }
    summary << "] value_residual=" << detail::join_numbers(sol.value_residuals)
            << " slope_residual=" << detail::join_numbers(sol.slope_residuals);

    auto sum_file = detail::open_out(out_path + ".summary");
    sum_file << summary.str() << '\n';
    return summary.str();
}

// energy: E(q) = M(q) + P(q) and its parts.
inline std::string run_energy(const RunConfig& cfg, const std::string& out_path = "") {
    const SystemModel model = build_system(cfg, /*need_softwall=*/true);
    const PotentialEval pe = model.eval(model.initial_state(), /*with_gradient=*/false);
    std::ostringstream summary;
    summary << "E=" << format_double(pe.energy) << " M=" << format_double(pe.membrane_part)
            << " P=" << format_double(pe.direct_part);
    if (!out_path.empty()) {
        auto out = detail::open_out(out_path);
        out << summary.str() << '\n';
    }
    return summary.str();
}

// grad: gradient table (dM, dP, dE per component) plus the finite-difference
// cross-check report. fd_rel_steps are factors of the smallest radius; empty
// disables the report.
inline std::string run_grad(const RunConfig& cfg, const std::string& out_path,
                            const std::vector<double>& fd_rel_steps = {1e-2, 1e-3, 1e-4}) {
    const SystemModel model = build_system(cfg, /*need_softwall=*/true);
    const ParticleConfig config = make_configuration(model.domain, model.particles);
    const int n = 3 * config.count();

    std::vector<double> grad_m(n, 0.0);
    if (model.use_membrane) {
        const MembraneSolution sol = solve_membrane(config, model.physics, model.disc);
        grad_m = gradient_from_solution(sol);
    }
    const DirectPotential direct = direct_potential(config, model.softwall);

    {
        auto out = detail::open_out(out_path);
        out << "component,grad_M,grad_P,grad_E\n";
        for (int c = 0; c < n; ++c)
            out << component_label(c) << ',' << format_double(grad_m[c]) << ','
                << format_double(direct.gradient[c]) << ','
                << format_double(grad_m[c] + direct.gradient[c]) << '\n';
    }

    if (model.use_membrane && !fd_rel_steps.empty()) {
        double r_min = config.particles()[0].radius;
        for (const auto& p : config.particles()) r_min = std::min(r_min, p.radius);
        std::vector<double> steps;
        for (double f : fd_rel_steps) steps.push_back(f * r_min);
        const FdCheckReport report = fd_check(config, model.physics, model.disc, steps);
        auto out = detail::open_out(detail::stem_of(out_path) + "_fdcheck.csv");
        write_fd_check_csv(report, out);
    }

    double norm_e = 0.0;
    for (int c = 0; c < n; ++c) {
        const double g = grad_m[c] + direct.gradient[c];
        norm_e += g * g;
    }
    return "grad_norm=" + format_double(std::sqrt(norm_e));
}

struct SampleOptions {
    std::optional<std::uint64_t> seed;
    std::optional<long> steps;
    std::string resume_path;
    int chains{1};
    bool toy_gaussian{false};
};

namespace detail {

template <class Model>
std::string sample_with_model(const Model& model, const std::vector<std::string>& labels,
                              const std::string& mode, SamplerParams params,
                              const std::string& out_path, const SampleOptions& opts) {
    if (!opts.resume_path.empty()) {
        std::ifstream ck_in(opts.resume_path);
        if (!ck_in) throw ConfigError("cannot open checkpoint '" + opts.resume_path + "'");
        const Checkpoint ck = read_checkpoint(ck_in);
        if (ck.mode != mode)
            throw ConfigError("checkpoint mode '" + ck.mode + "' does not match '" + mode + "'");
        if (static_cast<int>(ck.state.size()) != static_cast<int>(labels.size()))
            throw ConfigError("checkpoint state dimension does not match the config");
        if (ck.step >= params.steps)
            throw ConfigError("checkpoint step " + std::to_string(ck.step) +
                              " is not below the target step count " +
                              std::to_string(params.steps));
        NormalStream rng(ck.rng_state);
        std::vector<double> q = ck.state;
        auto out = open_out(out_path);
        advance_chain(model, q, ck.step, params.steps, params, rng,
                      [&](long step, const std::vector<double>& state, double e, int rd) {
                          out << step;
                          for (double c : state) out << ',' << format_double(c);
                          out << ',' << format_double(e) << ',' << rd << '\n';
                      });
        Checkpoint final_ck{params.steps, q, rng.state(), ck.seed, mode};
        auto ck_out = open_out(out_path + ".ckpt.json");
        write_checkpoint(final_ck, ck_out);
        return "resumed steps " + std::to_string(ck.step + 1) + ".." +
               std::to_string(params.steps);
    }

    const int chains = std::max(1, opts.chains);
    std::vector<std::string> outputs(chains);
    parallel_for(static_cast<std::size_t>(chains), [&](std::size_t c) {
        SamplerParams chain_params = params;
        chain_params.seed = params.seed + static_cast<std::uint64_t>(c);
        const std::string path =
            chains == 1 ? out_path : with_suffix(out_path, "_c" + std::to_string(c));
        const Trajectory traj = run_chain(model, chain_params);
        auto out = open_out(path);
        write_trajectory_csv(traj, labels, out);
        Checkpoint ck{chain_params.steps, traj.states.back(), traj.final_rng_state,
                      chain_params.seed, mode};
        auto ck_out = open_out(path + ".ckpt.json");
        write_checkpoint(ck, ck_out);
        outputs[c] = path;
    });
    return std::to_string(chains) + " chain(s), " + std::to_string(params.steps) +
           " steps each";
}

}  // namespace detail

// sample: seeded Euler-Maruyama chain(s); trajectory CSV plus a checkpoint
// that supports bit-exact continuation via --resume.
inline std::string run_sample(const RunConfig& cfg, const std::string& out_path,
                              const SampleOptions& opts = {}) {
    SamplerParams params = build_sampler_params(cfg);
    if (opts.seed) params.seed = *opts.seed;
    if (opts.steps) params.steps = *opts.steps;
    params.validate();
    if (!opts.resume_path.empty() && opts.chains > 1)
        throw ConfigError("--resume cannot be combined with --chains");

    if (opts.toy_gaussian) {
        return detail::sample_with_model(ToyGaussianModel{}, generic_state_labels(1), "toy",
                                         params, out_path, opts);
    }
    const SystemModel model = build_system(cfg, /*need_softwall=*/true);
    const std::string mode = model.use_membrane ? "membrane" : "membrane-free";
    return detail::sample_with_model(model, particle_state_labels(model.dim() / 3), mode,
                                     params, out_path, opts);
}

// fed: Zwanzig free-energy-difference curve over the config's omega grid,
// reweighting a reference trajectory.
inline std::string run_fed(const RunConfig& cfg, const std::string& traj_path,
                           const std::string& out_path, bool toy_gaussian = false) {
    if (!cfg.fep) throw ConfigError("missing section 'fep'");
    if (!cfg.physics) throw ConfigError("missing section 'physics'");
    const PerturbationProtocol protocol = PerturbationProtocol::from_name(cfg.fep->protocol);

    std::ifstream in(traj_path);
    if (!in) throw ConfigError("cannot open trajectory '" + traj_path + "'");
    const TrajectoryData traj = read_trajectory_csv(in);
    if (traj.states.empty()) throw ConfigError("trajectory has no states");

    FepResult result;
    if (toy_gaussian) {
        if (protocol.kind != ProtocolKind::ToyScale)
            throw ConfigError("--toy-gaussian requires fep protocol 'toy-scale'");
        result = fed_curve_custom(
            cfg.physics->beta, cfg.fep->omegas, traj.states.size(),
            [&](std::size_t k, double omega) { return omega * traj.energies[k]; });
    } else {
        if (protocol.kind == ProtocolKind::ToyScale)
            throw ConfigError("fep protocol 'toy-scale' requires --toy-gaussian");
        const SystemModel model = build_system(cfg, /*need_softwall=*/true);
        if (static_cast<int>(traj.states[0].size()) != model.dim())
            throw ConfigError("trajectory state dimension does not match the config");
        result = fed_curve(model, protocol, cfg.fep->omegas, traj.states, traj.energies);
    }

    {
        auto out = detail::open_out(out_path);
        write_fep_csv(result, out);
    }

    bool all_degenerate = true;
    std::ostringstream summary;
    summary << "dF_hat:";
    for (const auto& e : result.entries) {
        all_degenerate = all_degenerate && e.degenerate;
        summary << ' ' << format_double(e.omega) << "->" << format_double(e.dF_hat);
        if (e.degenerate) summary << "(degenerate)";
    }
    if (all_degenerate)
        throw DegenerateEstimateError("all omegas degenerate; the perturbation is too far "
                                      "from the reference");
    return summary.str();
}

}  // namespace memfep::cli
