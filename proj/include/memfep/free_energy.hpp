#pragma once
// Zwanzig free-energy-difference estimation along a reaction coordinate:
//   A_hat_M = (M+1)^-1 sum_k exp(-beta (E_omega(Q_k) - E_0(Q_k)))
//   dF_hat(omega) = -beta^-1 ln A_hat_M
// over a chain sampled under the reference energy E_0, with block-variance
// diagnostics. Exponential averages are evaluated in log space.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "memfep/langevin.hpp"
#include "memfep/potentials.hpp"

namespace memfep {

// Named rules mapping the reaction coordinate omega in [-1, 1] to perturbed
// model inputs. omega = 0 is the reference model exactly; kinetic energy is
// untouched by construction.
enum class ProtocolKind {
    Identity,       // E_omega = E_0
    SlopeScale,     // s_i -> (1 + omega) s_i
    HeightScale,    // h_i -> (1 + omega) h_i
    TensionScale,   // sigma -> (1 + omega) sigma
    RigidityScale,  // kappa -> (1 + omega) kappa
    LjScale,        // eps_ij -> (1 + omega) eps_ij
    ToyScale,       // E_omega = (1 + omega) E_0 (toy-gaussian mode only)
};

struct PerturbationProtocol {
    ProtocolKind kind{ProtocolKind::Identity};

    static PerturbationProtocol from_name(const std::string& name) {
        if (name == "identity") return {ProtocolKind::Identity};
        if (name == "slope-scale") return {ProtocolKind::SlopeScale};
        if (name == "height-scale") return {ProtocolKind::HeightScale};
        if (name == "tension-scale") return {ProtocolKind::TensionScale};
        if (name == "rigidity-scale") return {ProtocolKind::RigidityScale};
        if (name == "lj-scale") return {ProtocolKind::LjScale};
        if (name == "toy-scale") return {ProtocolKind::ToyScale};
        throw ConfigError("unknown fep protocol '" + name + "'");
    }

    std::string name() const {
        switch (kind) {
            case ProtocolKind::Identity: return "identity";
            case ProtocolKind::SlopeScale: return "slope-scale";
            case ProtocolKind::HeightScale: return "height-scale";
            case ProtocolKind::TensionScale: return "tension-scale";
            case ProtocolKind::RigidityScale: return "rigidity-scale";
            case ProtocolKind::LjScale: return "lj-scale";
            case ProtocolKind::ToyScale: return "toy-scale";
        }
        return "identity";
    }

    // True when E_omega - E_0 requires a membrane solve per state.
    bool membrane_dependent() const {
        return kind == ProtocolKind::SlopeScale || kind == ProtocolKind::HeightScale ||
               kind == ProtocolKind::TensionScale || kind == ProtocolKind::RigidityScale;
    }

    SystemModel apply(const SystemModel& model, double omega) const {
        SystemModel out = model;
        const double f = 1.0 + omega;
        switch (kind) {
            case ProtocolKind::SlopeScale:
                for (auto& p : out.particles) p.profile.slope = p.profile.slope.scaled(f);
                break;
            case ProtocolKind::HeightScale:
                for (auto& p : out.particles) p.profile.height = p.profile.height.scaled(f);
                break;
            case ProtocolKind::TensionScale:
                out.physics.sigma *= f;
                break;
            case ProtocolKind::RigidityScale:
                out.physics.kappa *= f;
                break;
            case ProtocolKind::LjScale:
                out.softwall = out.softwall.scaled_eps(f);
                break;
            case ProtocolKind::Identity:
            case ProtocolKind::ToyScale:
                break;
        }
        return out;
    }
};

inline void check_reaction_coordinate(double omega) {
    if (!(omega >= -1.0 && omega <= 1.0))
        throw ConfigError("reaction coordinate omega must lie in [-1, 1]");
}

// E_omega(q) - E_0(q) for one state. Protocols touching only the direct
// potential need no membrane solve; membrane protocols solve once for the
// perturbed model and reuse the cached reference energy.
inline double perturbation_delta(const SystemModel& model, const PerturbationProtocol& protocol,
                                 double omega, const std::vector<double>& state,
                                 double e0_cached) {
    check_reaction_coordinate(omega);
    if (omega == 0.0 || protocol.kind == ProtocolKind::Identity) return 0.0;
    switch (protocol.kind) {
        case ProtocolKind::ToyScale: {
            double e0 = 0.0;
            for (double c : state) e0 += 0.5 * c * c;
            return omega * e0;
        }
        case ProtocolKind::LjScale: {
            const ParticleConfig config = model.config_at(state);
            const double p1 = pair_potential(config, model.softwall);
            const double p1_w =
                pair_potential(config, protocol.apply(model, omega).softwall);
            return p1_w - p1;
        }
        default: {
            const SystemModel perturbed = protocol.apply(model, omega);
            return perturbed.eval(state, false).energy - e0_cached;
        }
    }
}

// Observable A(q) = exp(-beta (E_omega(q) - E_0(q))); independent of the
// velocities because the Hamiltonian is separable with omega-free kinetic
// energy.
inline double zwanzig_observable(const SystemModel& model,
                                 const PerturbationProtocol& protocol, double omega,
                                 const std::vector<double>& state, double e0_cached) {
    return std::exp(-model.physics.beta *
                    perturbation_delta(model, protocol, omega, state, e0_cached));
}

struct BlockVariance {
    double variance{0.0};     // block estimate of Var(A_hat)
    double half_width{0.0};   // 95% half-width for dF_hat (delta method)
};

// Block-averaged variance of the weight mean and the induced confidence
// half-width of dF_hat = -ln(A_hat)/beta.
inline BlockVariance block_variance(const std::vector<double>& weights, long block_size,
                                    double beta) {
    if (block_size < 1) block_size = 1;
    const long n = static_cast<long>(weights.size());
    const long blocks = n / block_size;
    if (blocks < 2) throw TooFewBlocksError();
    std::vector<double> means(blocks, 0.0);
    for (long b = 0; b < blocks; ++b) {
        double sum = 0.0;
        for (long k = 0; k < block_size; ++k) sum += weights[b * block_size + k];
        means[b] = sum / static_cast<double>(block_size);
    }
    double grand = 0.0;
    for (double m : means) grand += m;
    grand /= static_cast<double>(blocks);
    double s2 = 0.0;
    for (double m : means) s2 += (m - grand) * (m - grand);
    s2 /= static_cast<double>(blocks - 1);
    BlockVariance out;
    out.variance = s2 / static_cast<double>(blocks);
    out.half_width = grand > 0.0 ? 1.96 * std::sqrt(out.variance) / (beta * grand)
                                 : std::numeric_limits<double>::infinity();
    return out;
}

struct FepEntry {
    double omega{0.0};
    double a_hat{1.0};
    double dF_hat{0.0};
    double variance{0.0};
    double ci_half_width{0.0};
    double n_effective{0.0};
    long n_samples{0};
    double mean_delta_e{0.0};  // Jensen bound: dF_hat <= mean_delta_e
    bool degenerate{false};
};

struct FepResult {
    double beta{1.0};
    std::vector<FepEntry> entries;
};

namespace detail {

// Log-sum-exp estimate from per-state energy differences.
inline FepEntry fep_entry_from_deltas(double beta, double omega,
                                      const std::vector<double>& deltas, long block_size) {
    FepEntry entry;
    entry.omega = omega;
    const long n = static_cast<long>(deltas.size());
    entry.n_samples = n;
    if (n == 0) throw Error("empty trajectory");

    double lmax = -std::numeric_limits<double>::infinity();
    double mean_de = 0.0;
    for (double d : deltas) {
        lmax = std::max(lmax, -beta * d);
        mean_de += d / static_cast<double>(n);
    }
    entry.mean_delta_e = mean_de;
    if (!std::isfinite(lmax)) {
        entry.a_hat = 0.0;
        entry.dF_hat = std::numeric_limits<double>::infinity();
        entry.degenerate = true;
        return entry;
    }

    std::vector<double> shifted(deltas.size());
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        shifted[k] = std::exp(-beta * deltas[k] - lmax);
        sum += shifted[k];
        sum_sq += shifted[k] * shifted[k];
    }
    const double mean_shifted = sum / static_cast<double>(n);
    const double log_a = lmax + std::log(mean_shifted);
    entry.a_hat = std::exp(log_a);
    entry.dF_hat = log_a == 0.0 ? 0.0 : -log_a / beta;  // avoid -0 at omega = 0
    entry.n_effective = sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
    entry.degenerate =
        entry.n_effective < std::min(10.0, static_cast<double>(n)) - 1e-9 * static_cast<double>(n);

    if (block_size < 1) block_size = std::max<long>(1, n / 100);
    if (n / block_size >= 2) {
        const BlockVariance bv = block_variance(shifted, block_size, beta);
        const double scale = std::exp(lmax);
        entry.variance = scale * scale * bv.variance;
        entry.ci_half_width = bv.half_width;
    }
    return entry;
}

}  // namespace detail

// Single-omega estimate over a reference trajectory; throws when the weights
// are degenerate (effective sample size below min(10, n)).
inline FepEntry zwanzig_estimate(const SystemModel& model, const PerturbationProtocol& protocol,
                                 double omega, const std::vector<std::vector<double>>& states,
                                 const std::vector<double>& energies, long block_size = 0) {
    check_reaction_coordinate(omega);
    std::vector<double> deltas(states.size());
    for (std::size_t k = 0; k < states.size(); ++k)
        deltas[k] = perturbation_delta(model, protocol, omega, states[k], energies[k]);
    FepEntry entry =
        detail::fep_entry_from_deltas(model.physics.beta, omega, deltas, block_size);
    if (entry.degenerate)
        throw DegenerateEstimateError("effective sample size " +
                                      format_double(entry.n_effective) + " at omega " +
                                      format_double(omega));
    return entry;
}

// Free-energy-difference curve over an omega grid from a single reference
// trajectory, reweighted per omega. Degenerate entries are flagged, not
// fatal. The grid must contain the reference point omega = 0.
template <class DeltaFn>
FepResult fed_curve_custom(double beta, const std::vector<double>& omegas,
                           std::size_t n_states, DeltaFn&& delta_fn, long block_size = 0) {
    bool has_zero = false;
    for (double w : omegas) {
        check_reaction_coordinate(w);
        if (std::abs(w) < 1e-15) has_zero = true;
    }
    if (!has_zero) throw ConfigError("fep omega grid must contain 0");

    FepResult result;
    result.beta = beta;
    for (double omega : omegas) {
        std::vector<double> deltas(n_states);
        for (std::size_t k = 0; k < n_states; ++k) deltas[k] = delta_fn(k, omega);
        result.entries.push_back(
            detail::fep_entry_from_deltas(beta, omega, deltas, block_size));
    }
    return result;
}

inline FepResult fed_curve(const SystemModel& model, const PerturbationProtocol& protocol,
                           const std::vector<double>& omegas,
                           const std::vector<std::vector<double>>& states,
                           const std::vector<double>& energies, long block_size = 0) {
    if (states.size() != energies.size())
        throw Error("trajectory states and cached energies disagree in length");
    return fed_curve_custom(
        model.physics.beta, omegas, states.size(),
        [&](std::size_t k, double omega) {
            return perturbation_delta(model, protocol, omega, states[k], energies[k]);
        },
        block_size);
}

inline FepResult fed_curve(const SystemModel& model, const PerturbationProtocol& protocol,
                           const std::vector<double>& omegas, const Trajectory& traj,
                           long block_size = 0) {
    return fed_curve(model, protocol, omegas, traj.states, traj.energies, block_size);
}

inline void write_fep_csv(const FepResult& result, std::ostream& out) {
    out << "omega,A_hat,dF_hat,variance,ci_half_width,n_effective\n";
    for (const auto& e : result.entries)
        out << format_double(e.omega) << ',' << format_double(e.a_hat) << ','
            << format_double(e.dF_hat) << ',' << format_double(e.variance) << ','
            << format_double(e.ci_half_width) << ',' << format_double(e.n_effective) << '\n';
}

}  // namespace memfep
