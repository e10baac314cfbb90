#pragma once
// Domain and particle geometry: rectangle domain, circular rigid particles
// with Fourier boundary profiles, rigid motions, feasibility, and the
// boundary quadrature used by the solver and the penalty coupling.
//
// Normal convention (used everywhere in this project): at a point x on a
// particle boundary circle, n(x) is the outward normal of the membrane
// region, i.e. it points INTO the particle, n(x) = (X_i - x) / r_i.

#include <cmath>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "memfep/core.hpp"

namespace memfep {

struct Domain {
    double lx{1.0};
    double ly{1.0};

    bool valid() const { return lx > 0.0 && ly > 0.0; }
    // Distance from an interior point to the rectangle boundary.
    double wall_distance(const Vec2& p) const {
        return std::min(std::min(p.x, lx - p.x), std::min(p.y, ly - p.y));
    }
};

// Truncated Fourier series on the reference boundary angle theta in [0, 2pi):
//   f(theta) = c0 + sum_k c_{2k-1} cos(k theta) + c_{2k} sin(k theta).
// Empty coefficient vector means f == 0.
struct FourierSeries {
    std::vector<double> coeffs;

    FourierSeries() = default;
    FourierSeries(std::initializer_list<double> c) : coeffs(c) {}
    explicit FourierSeries(std::vector<double> c) : coeffs(std::move(c)) {}

    double operator()(double theta) const {
        if (coeffs.empty()) return 0.0;
        double v = coeffs[0];
        for (std::size_t idx = 1; idx < coeffs.size(); ++idx) {
            const auto k = static_cast<double>((idx + 1) / 2);
            v += (idx % 2 == 1) ? coeffs[idx] * std::cos(k * theta)
                                : coeffs[idx] * std::sin(k * theta);
        }
        return v;
    }

    bool is_zero() const {
        for (double c : coeffs)
            if (c != 0.0) return false;
        return true;
    }

    FourierSeries scaled(double factor) const {
        FourierSeries out = *this;
        for (double& c : out.coeffs) c *= factor;
        return out;
    }
};

struct BoundaryProfile {
    FourierSeries height;  // contour h_i(theta)
    FourierSeries slope;   // slope s_i(theta), along the into-particle normal
};

struct Particle {
    Vec2 center;       // X_i
    double angle{0.0};  // alpha_i, radians, unbounded
    double radius{1.0};
    BoundaryProfile profile;

    // Rigid motion Phi_{q_i}(y) = X_i + R(alpha_i) y and its inverse.
    Vec2 to_world(const Vec2& reference) const {
        return center + rotation_matrix(angle) * reference;
    }
    Vec2 to_reference(const Vec2& world) const {
        return rotation_matrix(-angle) * (world - center);
    }
};

// Contour and slope of the membrane prescribed at a world point x on the
// particle boundary, evaluated through the reference-frame Fourier profile.
inline std::pair<double, double> boundary_data(const Particle& p, const Vec2& x) {
    const Vec2 y = p.to_reference(x);
    const double theta = std::atan2(y.y, y.x);
    return {p.profile.height(theta), p.profile.slope(theta)};
}

class ParticleConfig {
  public:
    ParticleConfig(Domain domain, std::vector<Particle> particles)
        : domain_(domain), particles_(std::move(particles)) {}

    const Domain& domain() const { return domain_; }
    const std::vector<Particle>& particles() const { return particles_; }
    int count() const { return static_cast<int>(particles_.size()); }

    // Positions as a flat coordinate vector (x1, y1, alpha1, ..., alphaN).
    std::vector<double> coordinates() const {
        std::vector<double> q;
        q.reserve(3 * particles_.size());
        for (const auto& p : particles_) {
            q.push_back(p.center.x);
            q.push_back(p.center.y);
            q.push_back(p.angle);
        }
        return q;
    }

  private:
    Domain domain_;
    std::vector<Particle> particles_;
};

// Feasibility is strict: closed disks stay inside the open rectangle and do
// not touch each other. Zero clearance is infeasible.
inline bool is_feasible(const Domain& domain, const std::vector<Particle>& particles) {
    if (!domain.valid()) return false;
    const int n = static_cast<int>(particles.size());
    for (int i = 0; i < n; ++i) {
        const auto& p = particles[i];
        if (!(p.radius > 0.0)) return false;
        if (!(domain.wall_distance(p.center) > p.radius)) return false;
        for (int j = i + 1; j < n; ++j) {
            const double gap =
                (p.center - particles[j].center).norm() - (p.radius + particles[j].radius);
            if (!(gap > 0.0)) return false;
        }
    }
    return true;
}

inline ParticleConfig make_configuration(const Domain& domain,
                                         std::vector<Particle> particles) {
    if (!domain.valid()) throw ConfigError("domain side lengths must be positive");
    const int n = static_cast<int>(particles.size());
    for (int i = 0; i < n; ++i) {
        if (!(particles[i].radius > 0.0))
            throw ConfigError("particle radius must be positive");
        for (int j = i + 1; j < n; ++j) {
            const double d = (particles[i].center - particles[j].center).norm();
            if (d <= particles[i].radius + particles[j].radius) throw OverlapError(i, j);
        }
        if (domain.wall_distance(particles[i].center) <= particles[i].radius)
            throw EscapesDomainError(i);
    }
    return ParticleConfig(domain, std::move(particles));
}

// Minimum clearance over all disk pairs and disk-to-wall distances.
inline double min_separation(const ParticleConfig& config) {
    const auto& ps = config.particles();
    double sep = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        sep = std::min(sep, config.domain().wall_distance(ps[i].center) - ps[i].radius);
        for (std::size_t j = i + 1; j < ps.size(); ++j) {
            const double gap =
                (ps[i].center - ps[j].center).norm() - (ps[i].radius + ps[j].radius);
            sep = std::min(sep, gap);
        }
    }
    return sep;
}

// Equally spaced quadrature on a particle boundary circle with trapezoidal
// (uniform) weights; spectrally accurate for smooth periodic integrands.
// The point count is kept even so the point set is mirror symmetric.
struct BoundaryQuadrature {
    std::vector<Vec2> points;    // x_k on Gamma_{q_i}
    std::vector<Vec2> normals;   // unit, pointing into the particle
    std::vector<double> weights;  // arc-length weights, sum to 2 pi r
    std::vector<double> h_values;
    std::vector<double> s_values;
};

inline BoundaryQuadrature make_boundary_quadrature(const Particle& p, int m) {
    if (m < 8) m = 8;
    if (m % 2 != 0) ++m;
    BoundaryQuadrature q;
    q.points.reserve(m);
    q.normals.reserve(m);
    q.weights.assign(m, 2.0 * std::numbers::pi * p.radius / m);
    q.h_values.reserve(m);
    q.s_values.reserve(m);
    for (int k = 0; k < m; ++k) {
        const double psi = 2.0 * std::numbers::pi * k / m;  // world-frame angle
        const Vec2 dir{std::cos(psi), std::sin(psi)};
        q.points.push_back(p.center + p.radius * dir);
        q.normals.push_back(-dir);
        const double theta = psi - p.angle;  // reference-frame angle
        q.h_values.push_back(p.profile.height(theta));
        q.s_values.push_back(p.profile.slope(theta));
    }
    return q;
}

}  // namespace memfep
