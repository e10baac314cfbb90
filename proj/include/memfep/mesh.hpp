#pragma once
// Uniform rectangular mesh with C1-conforming Bogner-Fox-Schmit plate
// elements (bicubic, 4 DOFs per node: value, d/dx, d/dy, d2/dxdy) and the
// cut-cell bookkeeping for the particle-free region Omega_q.
//
// Cut quadrature rule: full cells use a 4x4 tensor Gauss rule (exact for the
// bicubic stiffness integrands); cells crossed by a particle boundary keep
// the same Gauss points with all weights scaled by the subsampled area
// fraction lying in Omega_q; cells inside a particle carry zero weight.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "memfep/geometry.hpp"

namespace memfep {

namespace hermite {

// Cubic Hermite basis on [0,1] with value/derivative nodal data.
// order: 0 = value, 1..3 = derivatives.
inline double h00(double t, int order) {
    switch (order) {
        case 0: return 1.0 + t * t * (2.0 * t - 3.0);
        case 1: return 6.0 * t * (t - 1.0);
        case 2: return 12.0 * t - 6.0;
        default: return 12.0;
    }
}
inline double h10(double t, int order) {
    switch (order) {
        case 0: return t * (1.0 + t * (t - 2.0));
        case 1: return 1.0 + t * (3.0 * t - 4.0);
        case 2: return 6.0 * t - 4.0;
        default: return 6.0;
    }
}
inline double h01(double t, int order) {
    switch (order) {
        case 0: return t * t * (3.0 - 2.0 * t);
        case 1: return 6.0 * t * (1.0 - t);
        case 2: return 6.0 - 12.0 * t;
        default: return -12.0;
    }
}
inline double h11(double t, int order) {
    switch (order) {
        case 0: return t * t * (t - 1.0);
        case 1: return t * (3.0 * t - 2.0);
        case 2: return 6.0 * t - 2.0;
        default: return 6.0;
    }
}

// Factor for corner c (0 = left, 1 = right) and DOF kind d (0 = value,
// 1 = derivative), at parameter t and derivative order.
inline double factor(int c, int d, double t, int order) {
    if (c == 0) return d == 0 ? h00(t, order) : h10(t, order);
    return d == 0 ? h01(t, order) : h11(t, order);
}

}  // namespace hermite

// Values and derivatives of one local BFS basis function.
struct BasisEval {
    double v, dx, dy, dxx, dyy, dxy;
};

// Evaluates the 16 local basis functions of a cell at local coordinates
// (xi, eta) in [0,1]^2. Local index = 4*corner + type, corners ordered
// (0,0),(1,0),(0,1),(1,1), types (value, d/dx, d/dy, d2/dxdy). Derivative
// DOFs are scaled by hx/hy so nodal data are physical derivatives.
inline std::array<BasisEval, 16> bfs_basis(double xi, double eta, double hx, double hy) {
    using namespace hermite;
    // X factors per (corner-x, type-uses-derivative), each with orders 0..2.
    double X[2][2][3], Y[2][2][3];
    for (int o = 0; o < 3; ++o) {
        X[0][0][o] = h00(xi, o);
        X[1][0][o] = h01(xi, o);
        X[0][1][o] = hx * h10(xi, o);
        X[1][1][o] = hx * h11(xi, o);
        Y[0][0][o] = h00(eta, o);
        Y[1][0][o] = h01(eta, o);
        Y[0][1][o] = hy * h10(eta, o);
        Y[1][1][o] = hy * h11(eta, o);
    }
    std::array<BasisEval, 16> out{};
    for (int corner = 0; corner < 4; ++corner) {
        const int cx = corner & 1;
        const int cy = corner >> 1;
        for (int type = 0; type < 4; ++type) {
            const int dx_dof = type == 1 || type == 3;
            const int dy_dof = type == 2 || type == 3;
            const double* fx = X[cx][dx_dof];
            const double* fy = Y[cy][dy_dof];
            BasisEval& b = out[4 * corner + type];
            b.v = fx[0] * fy[0];
            b.dx = fx[1] * fy[0] / hx;
            b.dy = fx[0] * fy[1] / hy;
            b.dxx = fx[2] * fy[0] / (hx * hx);
            b.dyy = fx[0] * fy[2] / (hy * hy);
            b.dxy = fx[1] * fy[1] / (hx * hy);
        }
    }
    return out;
}

struct GaussPoint {
    double xi, eta, weight;  // weight on the unit square (sums to 1)
};

// 4x4 tensor Gauss-Legendre rule on [0,1]^2, exact through degree 7 per
// direction; the BFS stiffness integrands are degree <= 6.
inline const std::array<GaussPoint, 16>& cell_gauss_rule() {
    static const std::array<GaussPoint, 16> rule = [] {
        const std::array<double, 4> t = {0.069431844202973714, 0.33000947820757187,
                                         0.66999052179242813, 0.93056815579702629};
        const std::array<double, 4> w = {0.17392742256872693, 0.32607257743127307,
                                         0.32607257743127307, 0.17392742256872693};
        std::array<GaussPoint, 16> r{};
        int k = 0;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) r[k++] = {t[a], t[b], w[a] * w[b]};
        return r;
    }();
    return rule;
}

class Mesh {
  public:
    Mesh(Domain domain, int nx, int ny)
        : domain_(domain), nx_(nx), ny_(ny), hx_(domain.lx / nx), hy_(domain.ly / ny) {
        basis_at_gauss_.resize(16);
        const auto& rule = cell_gauss_rule();
        for (int g = 0; g < 16; ++g)
            basis_at_gauss_[g] = bfs_basis(rule[g].xi, rule[g].eta, hx_, hy_);
    }

    const Domain& domain() const { return domain_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double hx() const { return hx_; }
    double hy() const { return hy_; }
    double cell_size() const { return std::max(hx_, hy_); }
    int node_count() const { return (nx_ + 1) * (ny_ + 1); }
    int cell_count() const { return nx_ * ny_; }
    int membrane_dof_count() const { return 4 * node_count(); }

    int node_index(int i, int j) const { return j * (nx_ + 1) + i; }
    Vec2 node_coords(int i, int j) const { return {i * hx_, j * hy_}; }
    int cell_index(int ci, int cj) const { return cj * nx_ + ci; }
    Vec2 cell_origin(int ci, int cj) const { return {ci * hx_, cj * hy_}; }
    Vec2 cell_center(int ci, int cj) const { return {(ci + 0.5) * hx_, (cj + 0.5) * hy_}; }

    bool node_on_boundary(int i, int j) const {
        return i == 0 || j == 0 || i == nx_ || j == ny_;
    }

    // Global DOFs of the 16 local basis functions of cell (ci, cj).
    std::array<int, 16> cell_dofs(int ci, int cj) const {
        std::array<int, 16> dofs{};
        for (int corner = 0; corner < 4; ++corner) {
            const int node = node_index(ci + (corner & 1), cj + (corner >> 1));
            for (int type = 0; type < 4; ++type) dofs[4 * corner + type] = 4 * node + type;
        }
        return dofs;
    }

    // Cell containing p, clamped to the grid; local coordinates in [0,1]^2.
    void locate(const Vec2& p, int& ci, int& cj, double& xi, double& eta) const {
        ci = std::clamp(static_cast<int>(std::floor(p.x / hx_)), 0, nx_ - 1);
        cj = std::clamp(static_cast<int>(std::floor(p.y / hy_)), 0, ny_ - 1);
        xi = p.x / hx_ - ci;
        eta = p.y / hy_ - cj;
    }

    const std::array<BasisEval, 16>& basis_at_gauss(int g) const { return basis_at_gauss_[g]; }

  private:
    Domain domain_;
    int nx_, ny_;
    double hx_, hy_;
    std::vector<std::array<BasisEval, 16>> basis_at_gauss_;
};

enum class CellKind : std::uint8_t { Membrane, Particle, Cut };

// Per-cell classification against the particle disks by testing s x s
// subcell centers. Cut cells keep the per-subcell membership mask: their
// quadrature runs over the in-membrane subcell midpoints, so the total cut
// weight equals the element weight scaled by the area fraction while the
// points stay on the membrane side.
struct CutInfo {
    std::vector<CellKind> kind;
    std::vector<double> fraction;  // in [0,1]; Particle cells carry 0
    int subsample{1};
    std::vector<int> cut_index;    // per cell: index into masks, or -1
    std::vector<std::vector<std::uint8_t>> masks;  // s*s flags, index a*s + b

    double weight_factor(int cell) const { return fraction[cell]; }
};

// Midpoint quadrature over the s x s subcells of one cell; local basis
// tables are shared by every cell of the uniform mesh.
struct SubcellQuad {
    int s{1};
    double weight{0.0};  // (hx/s) * (hy/s)
    std::vector<Vec2> offsets;                     // physical offsets from cell origin
    std::vector<std::array<BasisEval, 16>> basis;  // index a*s + b
};

inline SubcellQuad make_subcell_quad(const Mesh& mesh, int s) {
    SubcellQuad q;
    q.s = std::max(1, s);
    q.weight = (mesh.hx() / q.s) * (mesh.hy() / q.s);
    q.offsets.reserve(q.s * q.s);
    q.basis.reserve(q.s * q.s);
    for (int a = 0; a < q.s; ++a) {
        for (int b = 0; b < q.s; ++b) {
            const double xi = (a + 0.5) / q.s;
            const double eta = (b + 0.5) / q.s;
            q.offsets.push_back({xi * mesh.hx(), eta * mesh.hy()});
            q.basis.push_back(bfs_basis(xi, eta, mesh.hx(), mesh.hy()));
        }
    }
    return q;
}

inline CutInfo classify_cells(const Mesh& mesh, const ParticleConfig& config, int subsample) {
    if (subsample < 1) subsample = 1;
    const int nx = mesh.nx(), ny = mesh.ny();
    const double hx = mesh.hx(), hy = mesh.hy();
    const double half_diag = 0.5 * std::hypot(hx, hy);
    CutInfo cut;
    cut.kind.assign(mesh.cell_count(), CellKind::Membrane);
    cut.fraction.assign(mesh.cell_count(), 1.0);
    cut.subsample = subsample;
    cut.cut_index.assign(mesh.cell_count(), -1);

    const auto& particles = config.particles();
    for (int cj = 0; cj < ny; ++cj) {
        for (int ci = 0; ci < nx; ++ci) {
            const Vec2 center = mesh.cell_center(ci, cj);
            // Quick tests against each disk before subsampling.
            bool may_cut = false;
            bool fully_inside = false;
            for (const auto& p : particles) {
                const double d = (center - p.center).norm();
                if (d + half_diag < p.radius) {
                    fully_inside = true;
                    break;
                }
                if (d - half_diag < p.radius) may_cut = true;
            }
            const int cell = mesh.cell_index(ci, cj);
            if (fully_inside) {
                cut.kind[cell] = CellKind::Particle;
                cut.fraction[cell] = 0.0;
                continue;
            }
            if (!may_cut) continue;  // fraction 1, Membrane

            const Vec2 origin = mesh.cell_origin(ci, cj);
            std::vector<std::uint8_t> mask(static_cast<std::size_t>(subsample) * subsample, 0);
            int in_membrane = 0;
            for (int a = 0; a < subsample; ++a) {
                for (int b = 0; b < subsample; ++b) {
                    const Vec2 sub{origin.x + (a + 0.5) * hx / subsample,
                                   origin.y + (b + 0.5) * hy / subsample};
                    bool covered = false;
                    for (const auto& p : particles) {
                        if ((sub - p.center).squared_norm() < p.radius * p.radius) {
                            covered = true;
                            break;
                        }
                    }
                    if (!covered) {
                        mask[a * subsample + b] = 1;
                        ++in_membrane;
                    }
                }
            }
            const double frac =
                static_cast<double>(in_membrane) / (static_cast<double>(subsample) * subsample);
            cut.fraction[cell] = frac;
            if (frac == 0.0) {
                cut.kind[cell] = CellKind::Particle;
            } else if (frac == 1.0) {
                cut.kind[cell] = CellKind::Membrane;
            } else {
                cut.kind[cell] = CellKind::Cut;
                cut.cut_index[cell] = static_cast<int>(cut.masks.size());
                cut.masks.push_back(std::move(mask));
            }
        }
    }
    return cut;
}

// Discretization parameters for the membrane solve.
struct Discretization {
    int nx{64};
    int ny{64};
    int subsample{8};        // cut-cell area subsampling factor s
    int quad_m{0};           // boundary quadrature points per particle; 0 = automatic
    double penalty_alpha0{1e3};  // value-penalty weight factor (alpha0 * kappa / h^3)
    double penalty_alpha1{1e3};  // slope-penalty weight factor (alpha1 * kappa / h)
    double ghost_gamma{0.5};     // ghost-penalty weight on cut-cell faces
    double solver_tol{1e-8};     // relative residual bound for the linear solve

    int boundary_points(double radius, double h) const {
        if (quad_m > 0) return quad_m + (quad_m % 2);
        const double circumference = 2.0 * std::numbers::pi * radius;
        const int by_mesh = 8 * static_cast<int>(std::ceil(circumference / h));
        return std::max(64, by_mesh);
    }
};

}  // namespace memfep
