#pragma once
// Overdamped Euler-Maruyama sampling of the Gibbs measure of E(q), plus an
// optional underdamped integrator. Feasibility is enforced by redrawing the
// Gaussian increment (up to max_rejects per step); every stored state lies in
// the feasible set, so the direct potential stays finite along the chain.
//
// Randomness: splitmix64-seeded xoshiro256++ with an explicit uint64 ->
// (0,1] mapping and the Box-Muller transform. The seed -> stream mapping is
// part of the reproducibility contract; the generator state is four u64
// words and round-trips through checkpoints exactly.

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "memfep/core.hpp"

namespace memfep {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

class Xoshiro256pp {
  public:
    using state_type = std::array<std::uint64_t, 4>;

    explicit Xoshiro256pp(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = detail::splitmix64(sm);
    }
    explicit Xoshiro256pp(const state_type& state) : s_(state) {}

    std::uint64_t next() {
        const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    const state_type& state() const { return s_; }

  private:
    state_type s_{};
};

// Standard normal variates; each draw consumes exactly two uniforms, so the
// stream has no hidden cache and the generator state alone is a checkpoint.
class NormalStream {
  public:
    explicit NormalStream(std::uint64_t seed) : gen_(seed) {}
    explicit NormalStream(const Xoshiro256pp::state_type& state) : gen_(state) {}

    double uniform() {  // in (0, 1]
        return (static_cast<double>(gen_.next() >> 11) + 1.0) * 0x1.0p-53;
    }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    const Xoshiro256pp::state_type& state() const { return gen_.state(); }

  private:
    Xoshiro256pp gen_;
};

struct SamplerParams {
    double tau{1e-3};       // time step
    double beta{1.0};       // inverse temperature; +inf disables noise
    long steps{1};          // chain length M
    std::uint64_t seed{0};
    double gamma{1.0};      // friction (underdamped only)
    int max_rejects{100};   // feasibility redraws per step

    void validate() const {
        if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
        if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
        if (steps < 1) throw ConfigError("steps must be >= 1");
        if (max_rejects < 0) throw ConfigError("max_rejects must be >= 0");
    }

    double noise_scale() const {
        return std::isinf(beta) ? 0.0 : std::sqrt(2.0 * tau / beta);
    }
};

struct StepResult {
    std::vector<double> state;
    int redraws{0};
};

// One Euler-Maruyama step Q' = Q - tau grad E(Q) + sqrt(2 tau / beta) G with
// the gradient supplied by the caller; infeasible proposals redraw G.
template <class Model>
StepResult em_step(const Model& model, const std::vector<double>& q,
                   const std::vector<double>& grad, const SamplerParams& params,
                   NormalStream& rng, long step_index = -1) {
    const double scale = params.noise_scale();
    StepResult result;
    result.state.resize(q.size());
    for (int attempt = 0; attempt <= params.max_rejects; ++attempt) {
        for (std::size_t c = 0; c < q.size(); ++c)
            result.state[c] = q[c] - params.tau * grad[c] + scale * rng.normal();
        if (model.feasible(result.state)) {
            result.redraws = attempt;
            return result;
        }
    }
    throw StuckStateError(step_index);
}

// Optional underdamped integrator. The velocity update sees the fresh noise
// first and the position follows it, so a feasibility redraw can repair an
// infeasible position proposal.
template <class Model>
StepResult underdamped_step(const Model& model, const std::vector<double>& q,
                            std::vector<double>& v, const std::vector<double>& grad,
                            const SamplerParams& params, NormalStream& rng,
                            long step_index = -1) {
    const double scale =
        std::isinf(params.beta) ? 0.0 : std::sqrt(2.0 * params.gamma * params.tau / params.beta);
    StepResult result;
    result.state.resize(q.size());
    std::vector<double> v_next(v.size());
    for (int attempt = 0; attempt <= params.max_rejects; ++attempt) {
        for (std::size_t c = 0; c < q.size(); ++c) {
            v_next[c] = v[c] - params.tau * grad[c] - params.tau * params.gamma * v[c] +
                        scale * rng.normal();
            result.state[c] = q[c] + params.tau * v_next[c];
        }
        if (model.feasible(result.state)) {
            result.redraws = attempt;
            v = v_next;
            return result;
        }
    }
    throw StuckStateError(step_index);
}

struct Trajectory {
    std::vector<std::vector<double>> states;  // Q_0 .. Q_M
    std::vector<double> energies;             // E_0(Q_k)
    std::vector<int> redraws;                 // redraws spent reaching Q_k (0 at k=0)
    SamplerParams params;
    Xoshiro256pp::state_type final_rng_state{};

    long step_count() const { return static_cast<long>(states.size()) - 1; }
};

// Advances the chain from `first_step` to `last_step`, invoking
// observer(step, state, energy, redraws) for every newly produced state.
// `q` must be feasible on entry and holds the final state on exit.
template <class Model, class Observer>
void advance_chain(const Model& model, std::vector<double>& q, long first_step,
                   long last_step, const SamplerParams& params, NormalStream& rng,
                   Observer&& observer) {
    if (first_step >= last_step) return;
    std::vector<double> grad = model.eval(q, true).gradient;
    for (long k = first_step; k < last_step; ++k) {
        StepResult step = em_step(model, q, grad, params, rng, k);
        q = std::move(step.state);
        const bool more = k + 1 < last_step;
        const auto pe = model.eval(q, more);
        if (more) grad = pe.gradient;
        observer(k + 1, q, pe.energy, step.redraws);
    }
}

// Full seeded chain from the model's initial condition; bit-identical output
// for identical (model, params, seed).
template <class Model>
Trajectory run_chain(const Model& model, const std::vector<double>& q0,
                     const SamplerParams& params) {
    params.validate();
    if (!model.feasible(q0)) throw ConfigError("initial state is infeasible");
    Trajectory traj;
    traj.params = params;
    NormalStream rng(params.seed);
    std::vector<double> q = q0;
    traj.states.push_back(q);
    traj.energies.push_back(model.eval(q, false).energy);
    traj.redraws.push_back(0);
    advance_chain(model, q, 0, params.steps, params, rng,
                  [&](long, const std::vector<double>& state, double e, int rd) {
                      traj.states.push_back(state);
                      traj.energies.push_back(e);
                      traj.redraws.push_back(rd);
                  });
    traj.final_rng_state = rng.state();
    return traj;
}

template <class Model>
Trajectory run_chain(const Model& model, const SamplerParams& params) {
    return run_chain(model, model.initial_state(), params);
}

// ---------------------------------------------------------------------------
// Trajectory CSV. Membrane chains use the column set x1,y1,alpha1,...; other
// state dimensions fall back to q1,q2,...

inline std::vector<std::string> particle_state_labels(int n_particles) {
    std::vector<std::string> labels;
    for (int i = 1; i <= n_particles; ++i) {
        labels.push_back("x" + std::to_string(i));
        labels.push_back("y" + std::to_string(i));
        labels.push_back("alpha" + std::to_string(i));
    }
    return labels;
}

inline std::vector<std::string> generic_state_labels(int dim) {
    std::vector<std::string> labels;
    for (int i = 1; i <= dim; ++i) labels.push_back("q" + std::to_string(i));
    return labels;
}

inline void write_trajectory_csv(const Trajectory& traj,
                                 const std::vector<std::string>& labels,
                                 std::ostream& out, long first_step = 0) {
    if (first_step == 0) {
        out << "step";
        for (const auto& l : labels) out << ',' << l;
        out << ",E0,redraws\n";
    }
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const long step = first_step + static_cast<long>(k);
        out << step;
        for (double c : traj.states[k]) out << ',' << format_double(c);
        out << ',' << format_double(traj.energies[k]) << ',' << traj.redraws[k] << '\n';
    }
}

struct TrajectoryData {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> states;
    std::vector<double> energies;
};

inline TrajectoryData read_trajectory_csv(std::istream& in) {
    TrajectoryData data;
    std::string line;
    if (!std::getline(in, line)) throw Error("empty trajectory file");
    std::vector<std::string> header;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        const std::size_t comma = line.find(',', pos);
        header.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                     : comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (header.size() < 4 || header.front() != "step" || header.back() != "redraws" ||
        header[header.size() - 2] != "E0")
        throw Error("unexpected trajectory header");
    data.labels.assign(header.begin() + 1, header.end() - 2);

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t p = 0;
        while (p <= line.size()) {
            const std::size_t comma = line.find(',', p);
            const std::string tok =
                line.substr(p, comma == std::string::npos ? std::string::npos : comma - p);
            row.push_back(parse_double(tok));
            if (comma == std::string::npos) break;
            p = comma + 1;
        }
        if (row.size() != header.size()) throw Error("ragged trajectory row");
        data.states.emplace_back(row.begin() + 1, row.end() - 2);
        data.energies.push_back(row[row.size() - 2]);
    }
    return data;
}

// ---------------------------------------------------------------------------
// Checkpoint: state, step index, and RNG state; enough for bit-exact
// continuation of a chain.

struct Checkpoint {
    long step{0};
    std::vector<double> state;
    Xoshiro256pp::state_type rng_state{};
    std::uint64_t seed{0};
    std::string mode;  // membrane | membrane-free | toy
};

inline void write_checkpoint(const Checkpoint& ck, std::ostream& out) {
    nlohmann::json j;
    j["format"] = "memfep-checkpoint-v1";
    j["step"] = ck.step;
    j["state"] = ck.state;
    j["rng"] = std::vector<std::uint64_t>(ck.rng_state.begin(), ck.rng_state.end());
    j["seed"] = ck.seed;
    j["mode"] = ck.mode;
    out << j.dump(2) << '\n';
}

inline Checkpoint read_checkpoint(std::istream& in) {
    nlohmann::json j;
    in >> j;
    if (!j.contains("format") || j["format"] != "memfep-checkpoint-v1")
        throw Error("unrecognized checkpoint format");
    Checkpoint ck;
    ck.step = j.at("step").get<long>();
    ck.state = j.at("state").get<std::vector<double>>();
    const auto rng = j.at("rng").get<std::vector<std::uint64_t>>();
    if (rng.size() != 4) throw Error("checkpoint rng state must have 4 words");
    std::copy(rng.begin(), rng.end(), ck.rng_state.begin());
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.mode = j.at("mode").get<std::string>();
    return ck;
}

}  // namespace memfep
