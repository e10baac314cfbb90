#pragma once
// Constrained membrane solve: minimizes the linearized bending energy
//   J(u) = 1/2 int_{Omega_q} kappa (lap u)^2 + sigma |grad u|^2
// over C1 plate elements on the cut mesh, with the particle coupling
// (prescribed contour h_i and slope s_i, free height Z_i and tilt beta_i)
// enforced by quadratic boundary penalties
//   (alpha0 kappa / h^3) oint (u - h_i o Phi^-1 - Z_i - beta_i.(x-X_i))^2 ds
//   (alpha1 kappa / h)   oint (du/dn - s_i o Phi^-1 - beta_i.n)^2 ds
// and the clamped outer boundary (u = du/dn = 0 on dOmega) by DOF
// elimination. The 3N height/tilt unknowns are appended to the system.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "memfep/mesh.hpp"

namespace memfep {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct PhysicsParams {
    double kappa{1.0};   // bending rigidity, > 0
    double sigma{0.0};   // tension, >= 0
    double beta{1.0};    // inverse temperature (used by sampling, not the solve)

    void validate() const {
        if (!(kappa > 0.0)) throw ConfigError("kappa must be > 0");
        if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
        if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    }
};

// Reference element matrices; every full cell shares them, cut cells scale
// them by the in-membrane area fraction (the cut quadrature is the full
// Gauss rule with uniformly scaled weights).
struct ReferenceStiffness {
    Eigen::Matrix<double, 16, 16> bending;  // int (lap phi_a)(lap phi_b)
    Eigen::Matrix<double, 16, 16> gradient; // int grad phi_a . grad phi_b
};

inline ReferenceStiffness make_reference_stiffness(const Mesh& mesh) {
    ReferenceStiffness ref;
    ref.bending.setZero();
    ref.gradient.setZero();
    const auto& rule = cell_gauss_rule();
    const double cell_area = mesh.hx() * mesh.hy();
    for (int g = 0; g < 16; ++g) {
        const auto& basis = mesh.basis_at_gauss(g);
        const double w = rule[g].weight * cell_area;
        for (int a = 0; a < 16; ++a) {
            const double lap_a = basis[a].dxx + basis[a].dyy;
            for (int b = 0; b < 16; ++b) {
                const double lap_b = basis[b].dxx + basis[b].dyy;
                ref.bending(a, b) += w * lap_a * lap_b;
                ref.gradient(a, b) +=
                    w * (basis[a].dx * basis[b].dx + basis[a].dy * basis[b].dy);
            }
        }
    }
    return ref;
}

struct LinearSystem {
    SpMat matrix;            // upper triangle of the SPD system
    Eigen::VectorXd rhs;
    int n_membrane{0};       // 4 * node count
    int n_total{0};          // membrane DOFs + 3N extras
    std::vector<std::uint8_t> pinned;  // 1 for eliminated/inactive DOFs
};

namespace detail {

// Area stiffness of kappa (lap,lap) + sigma (grad,grad) over Omega_q: full
// cells use the reference matrix, cut cells their masked subcell rule.
// Entries touching pinned DOFs are dropped (exact elimination at zero).
inline void add_area_stiffness(const Mesh& mesh, const CutInfo& cut,
                               const PhysicsParams& physics,
                               const std::vector<std::uint8_t>& pinned,
                               std::vector<Triplet>& triplets, std::vector<double>& diag) {
    const ReferenceStiffness ref = make_reference_stiffness(mesh);
    const Eigen::Matrix<double, 16, 16> k_full =
        physics.kappa * ref.bending + physics.sigma * ref.gradient;
    const SubcellQuad sub = make_subcell_quad(mesh, cut.subsample);

    Eigen::Matrix<double, 16, 16> k_cut;
    for (int cj = 0; cj < mesh.ny(); ++cj) {
        for (int ci = 0; ci < mesh.nx(); ++ci) {
            const int cell = mesh.cell_index(ci, cj);
            if (cut.kind[cell] == CellKind::Particle) continue;
            const Eigen::Matrix<double, 16, 16>* k_cell = &k_full;
            if (cut.kind[cell] == CellKind::Cut) {
                k_cut.setZero();
                const auto& mask = cut.masks[cut.cut_index[cell]];
                for (std::size_t p = 0; p < mask.size(); ++p) {
                    if (!mask[p]) continue;
                    const auto& basis = sub.basis[p];
                    for (int a = 0; a < 16; ++a) {
                        const double lap_a = basis[a].dxx + basis[a].dyy;
                        for (int b = a; b < 16; ++b) {
                            const double lap_b = basis[b].dxx + basis[b].dyy;
                            const double v =
                                sub.weight *
                                (physics.kappa * lap_a * lap_b +
                                 physics.sigma * (basis[a].dx * basis[b].dx +
                                                  basis[a].dy * basis[b].dy));
                            k_cut(a, b) += v;
                            if (a != b) k_cut(b, a) += v;
                        }
                    }
                }
                k_cell = &k_cut;
            }
            const auto dofs = mesh.cell_dofs(ci, cj);
            for (int a = 0; a < 16; ++a) {
                const int ga = dofs[a];
                if (pinned[ga]) continue;
                for (int b = 0; b < 16; ++b) {
                    const int gb = dofs[b];
                    if (pinned[gb]) continue;
                    if (ga > gb) continue;
                    const double val = (*k_cell)(a, b);
                    if (ga == gb)
                        diag[ga] += val;
                    else
                        triplets.emplace_back(ga, gb, val);
                }
            }
        }
    }
}

// Ghost-penalty stabilization on faces adjacent to cut cells: jumps of the
// 2nd and 3rd normal derivatives (the C1 element already matches value and
// first derivatives), weighted gamma kappa h^{2k-3}. Bounds the condition
// number independently of how a particle boundary cuts the mesh; the
// reported energy M excludes it, like the coupling penalties.
inline void add_ghost_penalty(const Mesh& mesh, const CutInfo& cut, double kappa,
                              double gamma, const std::vector<std::uint8_t>& pinned,
                              std::vector<Triplet>& triplets, std::vector<double>& diag) {
    if (gamma <= 0.0) return;
    const double h = mesh.cell_size();
    const double w2 = gamma * kappa * h;
    const double w3 = gamma * kappa * h * h * h;
    const std::array<double, 4> gp = {0.069431844202973714, 0.33000947820757187,
                                      0.66999052179242813, 0.93056815579702629};
    const std::array<double, 4> gw = {0.17392742256872693, 0.32607257743127307,
                                      0.32607257743127307, 0.17392742256872693};

    // orientation 0: vertical face (jump in d/dx), cells (ci,cj) and (ci+1,cj);
    // orientation 1: horizontal face (jump in d/dy).
    const auto stabilize_face = [&](int ci, int cj, int orientation) {
        // Union of the two cells' nodes: 3 columns x 2 rows (or transposed).
        const int na = orientation == 0 ? 3 : 2;
        const int nb = orientation == 0 ? 2 : 3;
        std::array<int, 24> slot_dof{};
        for (int a = 0; a < na; ++a)
            for (int b = 0; b < nb; ++b)
                for (int t = 0; t < 4; ++t)
                    slot_dof[(a * nb + b) * 4 + t] = 4 * mesh.node_index(ci + a, cj + b) + t;

        const double hn = orientation == 0 ? mesh.hx() : mesh.hy();   // normal spacing
        const double ht = orientation == 0 ? mesh.hy() : mesh.hx();   // tangential
        Eigen::Matrix<double, 24, 24> local2 = Eigen::Matrix<double, 24, 24>::Zero();
        Eigen::Matrix<double, 24, 24> local3 = Eigen::Matrix<double, 24, 24>::Zero();
        Eigen::Matrix<double, 24, 1> jump2, jump3;

        for (int g = 0; g < 4; ++g) {
            jump2.setZero();
            jump3.setZero();
            // side 0: left/bottom cell evaluated at normal coordinate 1;
            // side 1: right/top cell at 0. Jump = side1 - side0.
            for (int side = 0; side < 2; ++side) {
                const double sign = side == 0 ? -1.0 : 1.0;
                const double xin = side == 0 ? 1.0 : 0.0;
                for (int corner = 0; corner < 4; ++corner) {
                    const int cn = corner & 1;          // corner index along normal
                    const int ct = corner >> 1;         // corner index along tangent
                    for (int type = 0; type < 4; ++type) {
                        const int dn_dof = orientation == 0 ? (type == 1 || type == 3)
                                                            : (type == 2 || type == 3);
                        const int dt_dof = orientation == 0 ? (type == 2 || type == 3)
                                                            : (type == 1 || type == 3);
                        const double tan_fac = hermite::factor(ct, dt_dof, gp[g], 0) *
                                               (dt_dof ? ht : 1.0);
                        const double n2 = hermite::factor(cn, dn_dof, xin, 2) *
                                          (dn_dof ? hn : 1.0) / (hn * hn);
                        const double n3 = hermite::factor(cn, dn_dof, xin, 3) *
                                          (dn_dof ? hn : 1.0) / (hn * hn * hn);
                        // Slot of this corner in the union numbering.
                        const int a = orientation == 0 ? side + cn : ct;
                        const int b = orientation == 0 ? ct : side + cn;
                        const int slot = (a * nb + b) * 4 + type;
                        jump2[slot] += sign * n2 * tan_fac;
                        jump3[slot] += sign * n3 * tan_fac;
                    }
                }
            }
            const double ds = gw[g] * ht;
            local2.noalias() += ds * jump2 * jump2.transpose();
            local3.noalias() += ds * jump3 * jump3.transpose();
        }

        for (int p = 0; p < 24; ++p) {
            const int gp_dof = slot_dof[p];
            if (pinned[gp_dof]) continue;
            for (int q = p; q < 24; ++q) {
                const int gq_dof = slot_dof[q];
                if (pinned[gq_dof]) continue;
                const double val = w2 * local2(p, q) + w3 * local3(p, q);
                const int lo = std::min(gp_dof, gq_dof);
                const int hi = std::max(gp_dof, gq_dof);
                if (lo == hi)
                    diag[lo] += val;
                else
                    triplets.emplace_back(lo, hi, val);
            }
        }
    };

    const auto active = [&](int cell) { return cut.kind[cell] != CellKind::Particle; };
    for (int cj = 0; cj < mesh.ny(); ++cj) {
        for (int ci = 0; ci < mesh.nx(); ++ci) {
            const int cell = mesh.cell_index(ci, cj);
            if (ci + 1 < mesh.nx()) {
                const int right = mesh.cell_index(ci + 1, cj);
                if (active(cell) && active(right) &&
                    (cut.kind[cell] == CellKind::Cut || cut.kind[right] == CellKind::Cut))
                    stabilize_face(ci, cj, 0);
            }
            if (cj + 1 < mesh.ny()) {
                const int top = mesh.cell_index(ci, cj + 1);
                if (active(cell) && active(top) &&
                    (cut.kind[cell] == CellKind::Cut || cut.kind[top] == CellKind::Cut))
                    stabilize_face(ci, cj, 1);
            }
        }
    }
}

// One penalty residual r = sum entries_k z_k - target, contributing
// weight * r^2 to the functional; expands to matrix/rhs terms.
struct PenaltyRow {
    std::vector<std::pair<int, double>> entries;
    double target{0.0};
    double weight{0.0};
};

inline void add_penalty_row(const PenaltyRow& row, std::vector<Triplet>& triplets,
                            std::vector<double>& diag, Eigen::VectorXd& rhs) {
    const double s = 2.0 * row.weight;
    for (std::size_t p = 0; p < row.entries.size(); ++p) {
        const auto [gp, vp] = row.entries[p];
        rhs[gp] += s * row.target * vp;
        for (std::size_t q = p; q < row.entries.size(); ++q) {
            const auto [gq, vq] = row.entries[q];
            const double val = s * vp * vq;
            if (gp == gq) {
                diag[gp] += val;
            } else {
                triplets.emplace_back(std::min(gp, gq), std::max(gp, gq), val);
            }
        }
    }
}

}  // namespace detail

inline LinearSystem assemble_system(const Mesh& mesh, const CutInfo& cut,
                                    const ParticleConfig& config,
                                    const PhysicsParams& physics,
                                    const Discretization& disc,
                                    const std::vector<BoundaryQuadrature>& bq) {
    physics.validate();
    const int n_mem = mesh.membrane_dof_count();
    const int n_particles = config.count();
    const int n_total = n_mem + 3 * n_particles;

    LinearSystem sys;
    sys.n_membrane = n_mem;
    sys.n_total = n_total;
    sys.rhs = Eigen::VectorXd::Zero(n_total);
    sys.pinned.assign(n_total, 0);

    // Clamped outer boundary: all four Hermite DOFs vanish at boundary nodes,
    // which enforces u = du/dn = 0 along each outer edge exactly.
    for (int j = 0; j <= mesh.ny(); ++j)
        for (int i = 0; i <= mesh.nx(); ++i)
            if (mesh.node_on_boundary(i, j))
                for (int t = 0; t < 4; ++t) sys.pinned[4 * mesh.node_index(i, j) + t] = 1;

    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(mesh.cell_count()) * 136 + 1024);
    std::vector<double> diag(n_total, 0.0);
    detail::add_area_stiffness(mesh, cut, physics, sys.pinned, triplets, diag);
    detail::add_ghost_penalty(mesh, cut, physics.kappa, disc.ghost_gamma, sys.pinned,
                              triplets, diag);

    // Coupling penalties on each particle boundary circle.
    const double h = mesh.cell_size();
    const double w_value = disc.penalty_alpha0 * physics.kappa / (h * h * h);
    const double w_slope = disc.penalty_alpha1 * physics.kappa / h;
    for (int i = 0; i < n_particles; ++i) {
        const Particle& particle = config.particles()[i];
        const int z_dof = n_mem + 3 * i;
        const int bx_dof = z_dof + 1;
        const int by_dof = z_dof + 2;
        for (std::size_t k = 0; k < bq[i].points.size(); ++k) {
            const Vec2 x = bq[i].points[k];
            const Vec2 n = bq[i].normals[k];
            const Vec2 rel = x - particle.center;
            int ci, cj;
            double xi, eta;
            mesh.locate(x, ci, cj, xi, eta);
            const auto basis = bfs_basis(xi, eta, mesh.hx(), mesh.hy());
            const auto dofs = mesh.cell_dofs(ci, cj);

            detail::PenaltyRow value_row;
            value_row.weight = w_value * bq[i].weights[k];
            value_row.target = bq[i].h_values[k];
            detail::PenaltyRow slope_row;
            slope_row.weight = w_slope * bq[i].weights[k];
            slope_row.target = bq[i].s_values[k];
            for (int a = 0; a < 16; ++a) {
                if (sys.pinned[dofs[a]]) continue;
                value_row.entries.emplace_back(dofs[a], basis[a].v);
                slope_row.entries.emplace_back(dofs[a],
                                               n.x * basis[a].dx + n.y * basis[a].dy);
            }
            value_row.entries.emplace_back(z_dof, -1.0);
            value_row.entries.emplace_back(bx_dof, -rel.x);
            value_row.entries.emplace_back(by_dof, -rel.y);
            slope_row.entries.emplace_back(bx_dof, -n.x);
            slope_row.entries.emplace_back(by_dof, -n.y);

            detail::add_penalty_row(value_row, triplets, diag, sys.rhs);
            detail::add_penalty_row(slope_row, triplets, diag, sys.rhs);
        }
    }

    // Pin eliminated DOFs and any DOF untouched by quadrature (nodes whose
    // support lies fully inside a particle) to zero via identity rows.
    for (int d = 0; d < n_total; ++d) {
        if (sys.pinned[d] || diag[d] == 0.0) {
            diag[d] = 1.0;
            sys.pinned[d] = 1;
            sys.rhs[d] = 0.0;
        }
        triplets.emplace_back(d, d, diag[d]);
    }

    sys.matrix.resize(n_total, n_total);
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    return sys;
}

// Symmetric-definite direct solve with Jacobi equilibration and iterative
// refinement. Refinement keeps roundoff well below the symmetry and
// penalty-residual tolerances asserted by the test suite.
class SpdSolver {
  public:
    void factorize(const SpMat& upper) {
        matrix_ = &upper;
        const int n = static_cast<int>(upper.rows());
        scale_.resize(n);
        const Eigen::VectorXd d = upper.diagonal();
        for (int i = 0; i < n; ++i)
            scale_[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 1.0;
        SpMat scaled = upper;
        for (int k = 0; k < scaled.outerSize(); ++k)
            for (SpMat::InnerIterator it(scaled, k); it; ++it)
                it.valueRef() *= scale_[it.row()] * scale_[it.col()];
        ldlt_.compute(scaled);
        if (ldlt_.info() != Eigen::Success)
            throw SingularSystemError("symmetric-definite factorization failed");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs, double* rel_residual = nullptr) const {
        const double rhs_norm = rhs.norm();
        Eigen::VectorXd x = scale_.asDiagonal() *
                            ldlt_.solve((scale_.asDiagonal() * rhs).eval());
        double res = 0.0;
        for (int pass = 0; pass < 2; ++pass) {
            Eigen::VectorXd r = rhs - matrix_->selfadjointView<Eigen::Upper>() * x;
            res = r.norm();
            if (rhs_norm > 0.0 && res / rhs_norm < 1e-15) break;
            x += scale_.asDiagonal() * ldlt_.solve((scale_.asDiagonal() * r).eval());
        }
        Eigen::VectorXd r = rhs - matrix_->selfadjointView<Eigen::Upper>() * x;
        res = r.norm();
        if (rel_residual) *rel_residual = rhs_norm > 0.0 ? res / rhs_norm : res;
        return x;
    }

  private:
    const SpMat* matrix_{nullptr};
    Eigen::VectorXd scale_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Upper> ldlt_;
};

struct MembraneSolution {
    Mesh mesh;
    CutInfo cut;
    ParticleConfig config;
    PhysicsParams physics;
    Discretization disc;
    std::vector<BoundaryQuadrature> boundary;

    Eigen::VectorXd dofs;          // membrane DOFs, clamped/inactive entries zero
    std::vector<double> heights;   // Z_i
    std::vector<Vec2> tilts;       // beta_i
    std::vector<double> value_residuals;  // oint (u - target)^2 ds per particle
    std::vector<double> slope_residuals;
    double solve_residual{0.0};    // relative linear-solve residual

    MembraneSolution(Mesh m, CutInfo c, ParticleConfig cfg, PhysicsParams ph,
                     Discretization d, std::vector<BoundaryQuadrature> b)
        : mesh(std::move(m)), cut(std::move(c)), config(std::move(cfg)), physics(ph),
          disc(d), boundary(std::move(b)) {}
};

struct FieldValue {
    double u{0.0};
    Vec2 grad;
    double uxx{0.0}, uyy{0.0}, uxy{0.0};
    double lap{0.0};
};

namespace detail {

inline FieldValue eval_cell_poly(const Mesh& mesh, const Eigen::VectorXd& dofs, int ci,
                                 int cj, double xi, double eta) {
    const auto basis = bfs_basis(xi, eta, mesh.hx(), mesh.hy());
    const auto cell_dofs = mesh.cell_dofs(ci, cj);
    FieldValue f;
    for (int a = 0; a < 16; ++a) {
        const double c = dofs[cell_dofs[a]];
        f.u += c * basis[a].v;
        f.grad.x += c * basis[a].dx;
        f.grad.y += c * basis[a].dy;
        f.uxx += c * basis[a].dxx;
        f.uyy += c * basis[a].dyy;
        f.uxy += c * basis[a].dxy;
    }
    f.lap = f.uxx + f.uyy;
    return f;
}

}  // namespace detail

inline MembraneSolution solve_membrane(const ParticleConfig& config,
                                       const PhysicsParams& physics,
                                       const Discretization& disc) {
    Mesh mesh(config.domain(), disc.nx, disc.ny);
    CutInfo cut = classify_cells(mesh, config, disc.subsample);
    std::vector<BoundaryQuadrature> bq;
    bq.reserve(config.count());
    for (const auto& p : config.particles())
        bq.push_back(make_boundary_quadrature(
            p, disc.boundary_points(p.radius, mesh.cell_size())));

    LinearSystem sys = assemble_system(mesh, cut, config, physics, disc, bq);
    SpdSolver solver;
    solver.factorize(sys.matrix);
    double rel_res = 0.0;
    Eigen::VectorXd z = solver.solve(sys.rhs, &rel_res);
    if (!(rel_res <= disc.solver_tol) && sys.rhs.norm() > 0.0)
        throw SingularSystemError("linear solve residual " + format_double(rel_res) +
                                  " exceeds tolerance " + format_double(disc.solver_tol));

    MembraneSolution sol(std::move(mesh), std::move(cut), config, physics, disc,
                         std::move(bq));
    sol.solve_residual = rel_res;
    sol.dofs = z.head(sys.n_membrane);
    sol.heights.resize(config.count());
    sol.tilts.resize(config.count());
    for (int i = 0; i < config.count(); ++i) {
        sol.heights[i] = z[sys.n_membrane + 3 * i];
        sol.tilts[i] = {z[sys.n_membrane + 3 * i + 1], z[sys.n_membrane + 3 * i + 2]};
    }

    sol.value_residuals.assign(config.count(), 0.0);
    sol.slope_residuals.assign(config.count(), 0.0);
    for (int i = 0; i < config.count(); ++i) {
        const Particle& p = config.particles()[i];
        const auto& q = sol.boundary[i];
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            int ci, cj;
            double xi, eta;
            sol.mesh.locate(q.points[k], ci, cj, xi, eta);
            const FieldValue f = detail::eval_cell_poly(sol.mesh, sol.dofs, ci, cj, xi, eta);
            const Vec2 rel = q.points[k] - p.center;
            const double rv = f.u - q.h_values[k] - sol.heights[i] -
                              sol.tilts[i].dot(rel);
            const double rs = f.grad.dot(q.normals[k]) - q.s_values[k] -
                              sol.tilts[i].dot(q.normals[k]);
            sol.value_residuals[i] += q.weights[k] * rv * rv;
            sol.slope_residuals[i] += q.weights[k] * rs * rs;
        }
    }
    return sol;
}

// Geometric interaction potential M(q): the membrane energy of the solution,
// integrated with the same cut quadrature as the assembly. Penalty terms are
// not part of M.
inline double energy(const MembraneSolution& sol) {
    const Mesh& mesh = sol.mesh;
    const auto& rule = cell_gauss_rule();
    const double cell_area = mesh.hx() * mesh.hy();
    const SubcellQuad sub = make_subcell_quad(mesh, sol.cut.subsample);
    const double kappa = sol.physics.kappa;
    const double sigma = sol.physics.sigma;

    const auto point_density = [&](const std::array<BasisEval, 16>& basis,
                                   const std::array<int, 16>& dofs) {
        double lap = 0.0, gx = 0.0, gy = 0.0;
        for (int a = 0; a < 16; ++a) {
            const double c = sol.dofs[dofs[a]];
            lap += c * (basis[a].dxx + basis[a].dyy);
            gx += c * basis[a].dx;
            gy += c * basis[a].dy;
        }
        return kappa * lap * lap + sigma * (gx * gx + gy * gy);
    };

    double twice_m = 0.0;
    for (int cj = 0; cj < mesh.ny(); ++cj) {
        for (int ci = 0; ci < mesh.nx(); ++ci) {
            const int cell = mesh.cell_index(ci, cj);
            if (sol.cut.kind[cell] == CellKind::Particle) continue;
            const auto dofs = mesh.cell_dofs(ci, cj);
            if (sol.cut.kind[cell] == CellKind::Cut) {
                const auto& mask = sol.cut.masks[sol.cut.cut_index[cell]];
                double cell_sum = 0.0;
                for (std::size_t p = 0; p < mask.size(); ++p)
                    if (mask[p]) cell_sum += point_density(sub.basis[p], dofs);
                twice_m += sub.weight * cell_sum;
            } else {
                double cell_sum = 0.0;
                for (int g = 0; g < 16; ++g)
                    cell_sum += rule[g].weight * point_density(mesh.basis_at_gauss(g), dofs);
                twice_m += cell_area * cell_sum;
            }
        }
    }
    return 0.5 * twice_m;
}

// Element-local polynomial evaluation of the solution field at x in Omega_q.
inline FieldValue evaluate_field(const MembraneSolution& sol, const Vec2& x) {
    const Domain& dom = sol.config.domain();
    if (x.x < 0.0 || x.x > dom.lx || x.y < 0.0 || x.y > dom.ly)
        throw OutsideMembraneError("(" + format_double(x.x) + ", " + format_double(x.y) +
                                   ") is outside the domain");
    for (const auto& p : sol.config.particles())
        if ((x - p.center).norm() < p.radius)
            throw OutsideMembraneError("(" + format_double(x.x) + ", " +
                                       format_double(x.y) + ") lies inside a particle");
    int ci, cj;
    double xi, eta;
    sol.mesh.locate(x, ci, cj, xi, eta);
    return detail::eval_cell_poly(sol.mesh, sol.dofs, ci, cj, xi, eta);
}

// Field export, row-major over grid nodes; nodes strictly inside a particle
// are emitted with empty value fields.
inline void write_field_csv(const MembraneSolution& sol, std::ostream& out) {
    out << "x,y,u,ux,uy,lap_u\n";
    const Mesh& mesh = sol.mesh;
    for (int j = 0; j <= mesh.ny(); ++j) {
        for (int i = 0; i <= mesh.nx(); ++i) {
            const Vec2 p = mesh.node_coords(i, j);
            out << format_double(p.x) << ',' << format_double(p.y) << ',';
            bool covered = false;
            for (const auto& particle : sol.config.particles())
                if ((p - particle.center).norm() < particle.radius) {
                    covered = true;
                    break;
                }
            if (covered) {
                out << ",,,\n";
                continue;
            }
            const int node = 4 * mesh.node_index(i, j);
            const int ci = std::min(i, mesh.nx() - 1);
            const int cj = std::min(j, mesh.ny() - 1);
            const FieldValue f = detail::eval_cell_poly(mesh, sol.dofs, ci, cj,
                                                        i == mesh.nx() ? 1.0 : 0.0,
                                                        j == mesh.ny() ? 1.0 : 0.0);
            out << format_double(sol.dofs[node]) << ',' << format_double(sol.dofs[node + 1])
                << ',' << format_double(sol.dofs[node + 2]) << ',' << format_double(f.lap)
                << '\n';
        }
    }
}

// Legacy ASCII structured-grid export for visualization tools.
inline void write_field_vtk(const MembraneSolution& sol, std::ostream& out) {
    const Mesh& mesh = sol.mesh;
    out << "# vtk DataFile Version 3.0\n"
        << "membrane deformation\n"
        << "ASCII\n"
        << "DATASET STRUCTURED_POINTS\n"
        << "DIMENSIONS " << mesh.nx() + 1 << ' ' << mesh.ny() + 1 << " 1\n"
        << "ORIGIN 0 0 0\n"
        << "SPACING " << format_double(mesh.hx()) << ' ' << format_double(mesh.hy())
        << " 1\n"
        << "POINT_DATA " << mesh.node_count() << "\n"
        << "SCALARS u double 1\n"
        << "LOOKUP_TABLE default\n";
    for (int j = 0; j <= mesh.ny(); ++j)
        for (int i = 0; i <= mesh.nx(); ++i)
            out << format_double(sol.dofs[4 * mesh.node_index(i, j)]) << '\n';
}

}  // namespace memfep
