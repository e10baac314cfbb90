#pragma once
// Direct particle-particle and particle-wall soft-wall potentials, and the
// full interaction potential E(q) = M(q) + P(q) with its gradient.
//
// P follows the written double sum over ordered pairs i != j, so each
// unordered pair is counted twice relative to the conventional LJ sum.
// Infinity (touching or overlapping disks) is an explicit sentinel value;
// gradients at non-finite states are never requested by the sampler, which
// rejects infeasible states first.

#include <cmath>
#include <limits>
#include <vector>

#include "memfep/shape_gradient.hpp"

namespace memfep {

struct SoftWallParams {
    std::vector<std::vector<double>> eps;         // pair strengths, symmetric
    std::vector<std::vector<double>> sigma_pair;  // pair length scales, symmetric
    std::vector<double> sigma_wall;               // per-particle wall scales

    static SoftWallParams uniform(int n, double eps_value, double sigma_pair_value,
                                  double sigma_wall_value) {
        SoftWallParams p;
        p.eps.assign(n, std::vector<double>(n, eps_value));
        p.sigma_pair.assign(n, std::vector<double>(n, sigma_pair_value));
        p.sigma_wall.assign(n, sigma_wall_value);
        return p;
    }

    void validate(int n) const {
        if (static_cast<int>(eps.size()) != n || static_cast<int>(sigma_pair.size()) != n ||
            static_cast<int>(sigma_wall.size()) != n)
            throw ConfigError("softwall parameter sizes do not match the particle count");
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(eps[i].size()) != n ||
                static_cast<int>(sigma_pair[i].size()) != n)
                throw ConfigError("softwall pair matrices must be N x N");
            if (!(sigma_wall[i] > 0.0)) throw ConfigError("sigma_wall must be > 0");
            for (int j = 0; j < n; ++j) {
                if (eps[i][j] != eps[j][i] || sigma_pair[i][j] != sigma_pair[j][i])
                    throw ConfigError("softwall pair matrices must be symmetric");
                if (!(eps[i][j] >= 0.0)) throw ConfigError("eps must be >= 0");
                if (!(sigma_pair[i][j] > 0.0)) throw ConfigError("sigma_pair must be > 0");
            }
        }
    }

    SoftWallParams scaled_eps(double factor) const {
        SoftWallParams out = *this;
        for (auto& row : out.eps)
            for (double& e : row) e *= factor;
        return out;
    }
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Lennard-Jones-type pair term over the gap d = |X_i - X_j| - (r_i + r_j).
inline double lj_pair(const ParticleConfig& config, int i, int j,
                      const SoftWallParams& params) {
    const auto& pi = config.particles()[i];
    const auto& pj = config.particles()[j];
    const double d = (pi.center - pj.center).norm() - (pi.radius + pj.radius);
    if (d <= 0.0) return kInfinity;
    const double s6 = std::pow(params.sigma_pair[i][j] / d, 6);
    return 4.0 * params.eps[i][j] * (s6 * s6 - s6);
}

// Wall repulsion (sigma_i / dist(B_i, dOmega))^6.
inline double wall_term(const ParticleConfig& config, int i, const SoftWallParams& params) {
    const auto& p = config.particles()[i];
    const double d = config.domain().wall_distance(p.center) - p.radius;
    if (d <= 0.0) return kInfinity;
    return std::pow(params.sigma_wall[i] / d, 6);
}

struct DirectPotential {
    double value{0.0};
    double pair_part{0.0};  // P1
    double wall_part{0.0};  // P2
    std::vector<double> gradient;  // 3N; rotation components exactly zero
};

// Pair-only sum P1 (ordered double sum). Used by the LJ reaction coordinate,
// which touches no other term.
inline double pair_potential(const ParticleConfig& config, const SoftWallParams& params) {
    const int n = config.count();
    double p1 = 0.0;
    for (int i = 0; i < n && std::isfinite(p1); ++i)
        for (int j = i + 1; j < n; ++j) {
            p1 += 2.0 * lj_pair(config, i, j, params);
            if (!std::isfinite(p1)) break;
        }
    return p1;
}

inline DirectPotential direct_potential(const ParticleConfig& config,
                                        const SoftWallParams& params) {
    const int n = config.count();
    params.validate(n);
    DirectPotential out;
    out.gradient.assign(3 * n, 0.0);
    const auto& ps = config.particles();

    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const Vec2 diff = ps[i].center - ps[j].center;
            const double dist = diff.norm();
            const double d = dist - (ps[i].radius + ps[j].radius);
            if (d <= 0.0) {
                out.pair_part = kInfinity;
                continue;
            }
            const double sr = params.sigma_pair[i][j] / d;
            const double s6 = sr * sr * sr * sr * sr * sr;
            out.pair_part += 2.0 * 4.0 * params.eps[i][j] * (s6 * s6 - s6);
            // d/dd of the ordered-sum pair energy (factor 2 for (i,j)+(j,i)).
            const double dpdd = 2.0 * 4.0 * params.eps[i][j] * (-12.0 * s6 * s6 + 6.0 * s6) / d;
            const Vec2 dir = (1.0 / dist) * diff;
            out.gradient[3 * i] += dpdd * dir.x;
            out.gradient[3 * i + 1] += dpdd * dir.y;
            out.gradient[3 * j] -= dpdd * dir.x;
            out.gradient[3 * j + 1] -= dpdd * dir.y;
        }
        const double dw = config.domain().wall_distance(ps[i].center) - ps[i].radius;
        if (dw <= 0.0) {
            out.wall_part = kInfinity;
            continue;
        }
        const double s = params.sigma_wall[i] / dw;
        const double s6 = s * s * s * s * s * s;
        out.wall_part += s6;
        const double dwdd = -6.0 * s6 / dw;
        // Gradient of the clearance to the (first) nearest wall.
        const Vec2 c = ps[i].center;
        const Domain& dom = config.domain();
        Vec2 dir{0.0, 0.0};
        const double m = dom.wall_distance(c);
        if (m == c.x) dir = {1.0, 0.0};
        else if (m == dom.lx - c.x) dir = {-1.0, 0.0};
        else if (m == c.y) dir = {0.0, 1.0};
        else dir = {0.0, -1.0};
        out.gradient[3 * i] += dwdd * dir.x;
        out.gradient[3 * i + 1] += dwdd * dir.y;
    }
    out.value = out.pair_part + out.wall_part;
    if (!std::isfinite(out.value)) out.gradient.assign(3 * n, 0.0);
    return out;
}

struct FullPotential {
    double energy{0.0};
    double membrane_part{0.0};  // M(q), zero in membrane-free mode
    double direct_part{0.0};    // P(q)
    std::vector<double> gradient;  // dE, empty when not requested
    std::vector<double> gradient_membrane;
    std::vector<double> gradient_direct;
};

// E(q) = M(q) + P(q). The membrane part may be disabled (membrane-free mode)
// for sampler validation; one membrane solve serves both M and its gradient.
inline FullPotential full_potential(const ParticleConfig& config,
                                    const PhysicsParams& physics,
                                    const Discretization& disc,
                                    const SoftWallParams& params,
                                    bool use_membrane = true,
                                    bool with_gradient = true) {
    FullPotential out;
    const DirectPotential direct = direct_potential(config, params);
    out.direct_part = direct.value;
    if (with_gradient) out.gradient_direct = direct.gradient;
    if (use_membrane) {
        const MembraneSolution sol = solve_membrane(config, physics, disc);
        out.membrane_part = energy(sol);
        if (with_gradient) out.gradient_membrane = gradient_from_solution(sol);
    } else if (with_gradient) {
        out.gradient_membrane.assign(3 * config.count(), 0.0);
    }
    out.energy = out.membrane_part + out.direct_part;
    if (with_gradient) {
        out.gradient.resize(3 * config.count());
        for (std::size_t c = 0; c < out.gradient.size(); ++c)
            out.gradient[c] = out.gradient_membrane[c] + out.gradient_direct[c];
    }
    return out;
}

inline double kinetic_energy(const std::vector<double>& velocities) {
    double k = 0.0;
    for (double v : velocities) k += v * v;
    return 0.5 * k;
}

// Separable Hamiltonian H(q, p) = E(q) + 1/2 p.p.
inline double hamiltonian(double potential_energy, const std::vector<double>& velocities) {
    return potential_energy + kinetic_energy(velocities);
}

inline double hamiltonian(const ParticleConfig& config, const PhysicsParams& physics,
                          const Discretization& disc, const SoftWallParams& params,
                          const std::vector<double>& velocities, bool use_membrane = true) {
    return hamiltonian(
        full_potential(config, physics, disc, params, use_membrane, false).energy,
        velocities);
}

// ---------------------------------------------------------------------------
// SystemModel: immutable bundle of everything the sampler and the free-energy
// machinery need to evaluate E at arbitrary particle coordinates.

struct PotentialEval {
    double energy{0.0};
    double membrane_part{0.0};
    double direct_part{0.0};
    std::vector<double> gradient;
};

struct SystemModel {
    Domain domain;
    std::vector<Particle> particles;  // radii/profiles fixed; pose = initial state
    PhysicsParams physics;
    SoftWallParams softwall;
    Discretization disc;
    bool use_membrane{true};

    int dim() const { return 3 * static_cast<int>(particles.size()); }

    std::vector<double> initial_state() const {
        std::vector<double> q;
        q.reserve(particles.size() * 3);
        for (const auto& p : particles) {
            q.push_back(p.center.x);
            q.push_back(p.center.y);
            q.push_back(p.angle);
        }
        return q;
    }

    std::vector<Particle> particles_at(const std::vector<double>& q) const {
        std::vector<Particle> ps = particles;
        for (std::size_t i = 0; i < ps.size(); ++i) {
            ps[i].center = {q[3 * i], q[3 * i + 1]};
            ps[i].angle = q[3 * i + 2];
        }
        return ps;
    }

    bool feasible(const std::vector<double>& q) const {
        return is_feasible(domain, particles_at(q));
    }

    ParticleConfig config_at(const std::vector<double>& q) const {
        return make_configuration(domain, particles_at(q));
    }

    PotentialEval eval(const std::vector<double>& q, bool with_gradient) const {
        const ParticleConfig config = config_at(q);
        FullPotential fp =
            full_potential(config, physics, disc, softwall, use_membrane, with_gradient);
        PotentialEval out;
        out.energy = fp.energy;
        out.membrane_part = fp.membrane_part;
        out.direct_part = fp.direct_part;
        out.gradient = std::move(fp.gradient);
        return out;
    }
};

// 1D quadratic test potential E(q) = q^2 / 2; exercises the sampler and the
// free-energy estimator without the membrane solver.
struct ToyGaussianModel {
    int dim() const { return 1; }
    std::vector<double> initial_state() const { return {0.0}; }
    bool feasible(const std::vector<double>&) const { return true; }
    PotentialEval eval(const std::vector<double>& q, bool with_gradient) const {
        PotentialEval out;
        out.energy = 0.5 * q[0] * q[0];
        out.direct_part = out.energy;
        if (with_gradient) out.gradient = {q[0]};
        return out;
    }
};

}  // namespace memfep
