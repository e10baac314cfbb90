#pragma once
// Test-only oracles, independent of the implementation paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "memfep/geometry.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// Exact-width quadrature of the circle-rectangle overlap area.

namespace detail {

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double fa, double fm, double fb, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Area of {x^2 + y^2 <= r^2 (centered at c)} intersected with
// [x1,x2] x [y1,y2], by integrating the exact chord width over y.
inline double circle_rect_area(memfep::Vec2 c, double r, double x1, double x2, double y1,
                               double y2) {
    const double lo = std::max(y1, c.y - r);
    const double hi = std::min(y2, c.y + r);
    if (lo >= hi) return 0.0;
    const auto width = [&](double y) {
        const double dy = y - c.y;
        const double w = std::sqrt(std::max(0.0, r * r - dy * dy));
        return std::max(0.0, std::min(x2, c.x + w) - std::max(x1, c.x - w));
    };
    // Split at the kinks where a chord endpoint crosses a vertical edge.
    std::vector<double> cuts = {lo, hi};
    for (double x : {x1, x2}) {
        const double dx = std::abs(x - c.x);
        if (dx < r) {
            const double dy = std::sqrt(r * r - dx * dx);
            for (double y : {c.y - dy, c.y + dy})
                if (y > lo && y < hi) cuts.push_back(y);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        if (b - a < 1e-15) continue;
        area += detail::adaptive_simpson(width, a, b, width(a), width(0.5 * (a + b)),
                                         width(b), 1e-13, 40);
    }
    return area;
}

// ---------------------------------------------------------------------------
// Dense boundary sampling + golden-section refinement for set distances.
// Uses only point-to-disk / point-to-wall distances, not the closed forms.

inline double refine_min(const std::function<double(double)>& f, double lo, double hi) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    for (int it = 0; it < 200; ++it) {
        if (f(c) < f(d)) b = d; else a = c;
        c = b - gr * (b - a);
        d = a + gr * (b - a);
    }
    return f(0.5 * (a + b));
}

inline double sampled_circle_min(const std::function<double(double)>& dist_at_angle) {
    const int n = 4096;
    double best = dist_at_angle(0.0);
    double best_t = 0.0;
    for (int k = 1; k < n; ++k) {
        const double t = 2.0 * std::numbers::pi * k / n;
        const double d = dist_at_angle(t);
        if (d < best) { best = d; best_t = t; }
    }
    const double step = 2.0 * std::numbers::pi / n;
    return refine_min(dist_at_angle, best_t - step, best_t + step);
}

inline double min_separation_sampled(const memfep::ParticleConfig& config) {
    const auto& ps = config.particles();
    double sep = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& pi = ps[i];
        const auto on_circle = [&](double t) {
            return memfep::Vec2{pi.center.x + pi.radius * std::cos(t),
                                pi.center.y + pi.radius * std::sin(t)};
        };
        sep = std::min(sep, sampled_circle_min([&](double t) {
                  return config.domain().wall_distance(on_circle(t));
              }));
        for (std::size_t j = 0; j < ps.size(); ++j) {
            if (i == j) continue;
            sep = std::min(sep, sampled_circle_min([&](double t) {
                      return (on_circle(t) - ps[j].center).norm() - ps[j].radius;
                  }));
        }
    }
    return sep;
}

// ---------------------------------------------------------------------------
// 1D radial two-point solver for kappa lap^2 u - sigma lap u = 0, u = u(rho),
// on [a, R]: cubic Hermite elements in rho, energy
//   1/2 int (kappa (u'' + u'/rho)^2 + sigma u'^2) rho drho
// with u'(a) = -s prescribed, u(a) free, u(R) = u'(R) = 0.
struct RadialSolution {
    double a, R;
    int n_elems;
    Eigen::VectorXd dofs;  // (u_i, u'_i) per node

    double eval(double rho) const {
        const double h = (R - a) / n_elems;
        int e = std::clamp(static_cast<int>((rho - a) / h), 0, n_elems - 1);
        const double t = (rho - (a + e * h)) / h;
        const double u0 = dofs[2 * e], d0 = dofs[2 * e + 1];
        const double u1 = dofs[2 * e + 2], d1 = dofs[2 * e + 3];
        const double h00 = 1 + t * t * (2 * t - 3);
        const double h10 = t * (1 + t * (t - 2));
        const double h01 = t * t * (3 - 2 * t);
        const double h11 = t * t * (t - 1);
        return u0 * h00 + d0 * h * h10 + u1 * h01 + d1 * h * h11;
    }
};

inline RadialSolution radial_bvp(double a, double R, double kappa, double sigma, double slope,
                                 int n_elems = 1024) {
    const double h = (R - a) / n_elems;
    const int n_dofs = 2 * (n_elems + 1);
    // Hermite shape values at Gauss points.
    const std::array<double, 4> gt = {0.069431844202973714, 0.33000947820757187,
                                      0.66999052179242813, 0.93056815579702629};
    const std::array<double, 4> gw = {0.17392742256872693, 0.32607257743127307,
                                      0.32607257743127307, 0.17392742256872693};
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_dofs);

    // Fixed DOFs: u'(a) = -slope (dof 1), u(R) = u'(R) = 0.
    std::vector<int> fixed = {1, n_dofs - 2, n_dofs - 1};
    std::vector<double> fixed_val = {-slope, 0.0, 0.0};
    const auto fixed_value = [&](int dof, double& val) {
        for (std::size_t k = 0; k < fixed.size(); ++k)
            if (fixed[k] == dof) { val = fixed_val[k]; return true; }
        return false;
    };

    for (int e = 0; e < n_elems; ++e) {
        const double rho0 = a + e * h;
        const int dofs[4] = {2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3};
        double ke[4][4] = {};
        for (int g = 0; g < 4; ++g) {
            const double t = gt[g];
            const double rho = rho0 + t * h;
            // first and second derivatives of the four Hermite functions
            const double d1[4] = {6 * t * (t - 1) / h, 1 + t * (3 * t - 4),
                                  6 * t * (1 - t) / h, t * (3 * t - 2)};
            const double d2[4] = {(12 * t - 6) / (h * h), (6 * t - 4) / h,
                                  (6 - 12 * t) / (h * h), (6 * t - 2) / h};
            for (int i = 0; i < 4; ++i) {
                const double lap_i = d2[i] + d1[i] / rho;
                for (int j = 0; j < 4; ++j) {
                    const double lap_j = d2[j] + d1[j] / rho;
                    ke[i][j] += gw[g] * h * rho *
                                (kappa * lap_i * lap_j + sigma * d1[i] * d1[j]);
                }
            }
        }
        for (int i = 0; i < 4; ++i) {
            double vi;
            if (fixed_value(dofs[i], vi)) continue;
            for (int j = 0; j < 4; ++j) {
                double vj;
                if (fixed_value(dofs[j], vj)) {
                    rhs[dofs[i]] -= ke[i][j] * vj;
                } else {
                    trips.emplace_back(dofs[i], dofs[j], ke[i][j]);
                }
            }
        }
    }
    for (std::size_t k = 0; k < fixed.size(); ++k) {
        trips.emplace_back(fixed[k], fixed[k], 1.0);
        rhs[fixed[k]] = fixed_val[k];
    }
    Eigen::SparseMatrix<double> mat(n_dofs, n_dofs);
    mat.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(mat);
    RadialSolution sol{a, R, n_elems, ldlt.solve(rhs)};
    return sol;
}

// ---------------------------------------------------------------------------
// Misc small oracles.

inline double gaussian_toy_df(double beta, double omega) {
    return std::log(1.0 + omega) / (2.0 * beta);
}

// AR(1) stream with given lag-1 correlation, driven by a deterministic LCG.
inline std::vector<double> ar1_series(std::size_t n, double phi, std::uint64_t seed) {
    std::vector<double> out(n);
    std::uint64_t s = seed;
    double x = 0.0;
    const double scale = std::sqrt(1.0 - phi * phi);
    for (std::size_t k = 0; k < n; ++k) {
        // two LCG uniforms -> one Box-Muller normal
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        const double u1 = (static_cast<double>(s >> 11) + 1.0) * 0x1.0p-53;
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        const double u2 = (static_cast<double>(s >> 11) + 1.0) * 0x1.0p-53;
        const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        x = phi * x + scale * g;
        out[k] = x;
    }
    return out;
}

}  // namespace oracles
