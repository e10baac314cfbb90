#pragma once
// Shape-calculus gradient of the geometric interaction potential M(q).
//
// A directional derivative in direction e_i = (E_i, delta_i) of particle i is
//   dM = int  kappa lap(u) (A : D2u - lap(phi).grad(u) - 1/2 div(phi) lap(u))
//      + 1/2 int sigma (A grad u).grad u,      A = div(phi) I - Dphi - Dphi^T,
// for any twice differentiable vector field phi that equals the rigid-motion
// derivative E_i + delta_i Q (x - X_i) with Jacobian delta_i Q on the circle
// Gamma_{q_i} and vanishes on every other boundary.
//
// Two constructions: a closed-form radially cut-off field (default; exact
// derivatives) and a PDE-built field solving (kappa lap^2 - sigma lap) phi = 0
// with penalty-enforced boundary values (cross-check).

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "memfep/solver.hpp"

namespace memfep {

struct Direction {
    int particle{0};
    Vec2 translation;   // E_i
    double rotation{0.0};  // delta_i

    static Direction translate_x(int i) { return {i, {1.0, 0.0}, 0.0}; }
    static Direction translate_y(int i) { return {i, {0.0, 1.0}, 0.0}; }
    static Direction rotate(int i) { return {i, {0.0, 0.0}, 1.0}; }
};

struct FieldEval {
    Vec2 phi;
    Mat2 jac;
    Vec2 lap;  // componentwise Laplacian

    double divergence() const { return jac.trace(); }
    Mat2 stress_shape() const {  // A = div(phi) I - Dphi - Dphi^T
        return jac.trace() * Mat2::identity() - jac - jac.transpose();
    }
};

namespace detail {

// C2 quintic smoothstep profile of the cutoff: value 1 for dist <= eps/2,
// 0 for dist >= eps. Returns value and first/second derivatives in dist.
struct CutoffProfile {
    double value, d1, d2;
};

inline CutoffProfile cutoff_profile(double dist, double eps) {
    CutoffProfile p{0.0, 0.0, 0.0};
    const double half = 0.5 * eps;
    if (dist <= half) {
        p.value = 1.0;
        return p;
    }
    if (dist >= eps) return p;
    const double t = (dist - half) / half;
    const double omt = 1.0 - t;
    p.value = 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
    p.d1 = -30.0 * t * t * omt * omt / half;
    p.d2 = (-60.0 * t + 180.0 * t * t - 120.0 * t * t * t) / (half * half);
    return p;
}

}  // namespace detail

// phi(x) = xi(x) (E + delta Q (x - X)) with radially symmetric xi supported
// on the band |dist(x, Gamma)| <= eps, dist(x, Gamma) = ||x-X| - r|.
class CutoffField {
  public:
    CutoffField(Vec2 center, double radius, double eps, Direction dir)
        : center_(center), radius_(radius), eps_(eps), dir_(dir) {}

    double eps() const { return eps_; }
    const Direction& direction() const { return dir_; }

    FieldEval eval(const Vec2& x) const {
        FieldEval f;
        Vec2 rel = x - center_;
        double rho = rel.norm();
        if (rho < 1e-14) {
            rel = {1e-14, 0.0};
            rho = 1e-14;
        }
        const double dist = std::abs(rho - radius_);
        const auto prof = detail::cutoff_profile(dist, eps_);
        if (prof.value == 0.0 && prof.d1 == 0.0) return f;

        const Vec2 e_rho = (1.0 / rho) * rel;
        const double sign = rho >= radius_ ? 1.0 : -1.0;
        const double g1 = sign * prof.d1;          // d xi / d rho
        const double g2 = prof.d2;                  // d2 xi / d rho2
        const Vec2 grad_xi = g1 * e_rho;
        const double lap_xi = g2 + g1 / rho;

        const Vec2 v = dir_.translation + dir_.rotation * quarter_turn(rel);
        const Mat2 jac_v = dir_.rotation * Mat2::rotation_generator();

        f.phi = prof.value * v;
        f.jac = Mat2::outer(v, grad_xi) + prof.value * jac_v;
        // lap(xi v_c) = lap(xi) v_c + 2 grad(xi).grad(v_c); v is affine.
        f.lap = {lap_xi * v.x + 2.0 * (grad_xi.x * jac_v.a11 + grad_xi.y * jac_v.a12),
                 lap_xi * v.y + 2.0 * (grad_xi.x * jac_v.a21 + grad_xi.y * jac_v.a22)};
        return f;
    }

    // The integrand vanishes outside the band and also where xi == 1 (the
    // field is an exact rigid-motion derivative there), so only cells meeting
    // the smoothstep shell eps/2 <= dist <= eps contribute.
    bool cell_in_support(const Mesh& mesh, int ci, int cj) const {
        const Vec2 origin = mesh.cell_origin(ci, cj);
        const Vec2 far{origin.x + mesh.hx(), origin.y + mesh.hy()};
        const double dx = std::max({origin.x - center_.x, center_.x - far.x, 0.0});
        const double dy = std::max({origin.y - center_.y, center_.y - far.y, 0.0});
        const double rho_min = std::hypot(dx, dy);
        const double cx = std::max(std::abs(origin.x - center_.x),
                                   std::abs(far.x - center_.x));
        const double cy = std::max(std::abs(origin.y - center_.y),
                                   std::abs(far.y - center_.y));
        const double rho_max = std::hypot(cx, cy);
        // Distance-to-circle interval covered by the cell.
        double dist_min, dist_max;
        if (rho_min > radius_) {
            dist_min = rho_min - radius_;
            dist_max = rho_max - radius_;
        } else if (rho_max < radius_) {
            dist_min = radius_ - rho_max;
            dist_max = radius_ - rho_min;
        } else {
            dist_min = 0.0;
            dist_max = std::max(rho_max - radius_, radius_ - rho_min);
        }
        return dist_max >= 0.5 * eps_ && dist_min <= eps_;
    }

  private:
    Vec2 center_;
    double radius_;
    double eps_;
    Direction dir_;
};

// Largest admissible cutoff thickness for particle i, with a 0.9 safety
// factor: the band may touch neither another particle nor the outer wall.
inline double cutoff_thickness(const ParticleConfig& config, int i) {
    const auto& ps = config.particles();
    double clearance = config.domain().wall_distance(ps[i].center) - ps[i].radius;
    for (std::size_t j = 0; j < ps.size(); ++j) {
        if (static_cast<int>(j) == i) continue;
        clearance = std::min(clearance, (ps[i].center - ps[j].center).norm() -
                                            ps[i].radius - ps[j].radius);
    }
    return 0.9 * clearance;
}

inline CutoffField build_cutoff_field(const ParticleConfig& config, int i,
                                      const Vec2& translation, double rotation) {
    return CutoffField(config.particles()[i].center, config.particles()[i].radius,
                       cutoff_thickness(config, i), Direction{i, translation, rotation});
}

inline CutoffField build_cutoff_field(const ParticleConfig& config, const Direction& dir) {
    return build_cutoff_field(config, dir.particle, dir.translation, dir.rotation);
}

// PDE-built field: each component solves the discrete
// (kappa lap^2 - sigma lap) phi_c = 0 with the clamped outer boundary and
// penalty-enforced value and full Jacobian on every particle boundary
// (rigid-motion data on Gamma_{q_i}, zero on the others).
class PdeField {
  public:
    PdeField(Mesh mesh, CutInfo cut, ParticleConfig config, Eigen::VectorXd dofs_x,
             Eigen::VectorXd dofs_y, double boundary_residual)
        : mesh_(std::move(mesh)), cut_(std::move(cut)), config_(std::move(config)),
          dofs_x_(std::move(dofs_x)), dofs_y_(std::move(dofs_y)),
          boundary_residual_(boundary_residual) {}

    // Total oint |phi - target|^2 ds over all particle boundaries.
    double boundary_residual() const { return boundary_residual_; }

    FieldEval eval(const Vec2& x) const {
        int ci, cj;
        double xi, eta;
        mesh_.locate(x, ci, cj, xi, eta);
        const FieldValue fx = detail::eval_cell_poly(mesh_, dofs_x_, ci, cj, xi, eta);
        const FieldValue fy = detail::eval_cell_poly(mesh_, dofs_y_, ci, cj, xi, eta);
        FieldEval f;
        f.phi = {fx.u, fy.u};
        f.jac = {fx.grad.x, fx.grad.y, fy.grad.x, fy.grad.y};
        f.lap = {fx.lap, fy.lap};
        return f;
    }

    bool cell_in_support(const Mesh&, int, int) const { return true; }

  private:
    Mesh mesh_;
    CutInfo cut_;
    ParticleConfig config_;
    Eigen::VectorXd dofs_x_, dofs_y_;
    double boundary_residual_;
};

inline PdeField build_pde_field(const ParticleConfig& config, const Direction& dir,
                                const PhysicsParams& physics, const Discretization& disc) {
    Mesh mesh(config.domain(), disc.nx, disc.ny);
    CutInfo cut = classify_cells(mesh, config, disc.subsample);
    const int n = mesh.membrane_dof_count();

    std::vector<std::uint8_t> pinned(n, 0);
    for (int j = 0; j <= mesh.ny(); ++j)
        for (int i = 0; i <= mesh.nx(); ++i)
            if (mesh.node_on_boundary(i, j))
                for (int t = 0; t < 4; ++t) pinned[4 * mesh.node_index(i, j) + t] = 1;

    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(mesh.cell_count()) * 136 + 1024);
    std::vector<double> diag(n, 0.0);
    Eigen::VectorXd rhs_x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd rhs_y = Eigen::VectorXd::Zero(n);
    detail::add_area_stiffness(mesh, cut, physics, pinned, triplets, diag);
    detail::add_ghost_penalty(mesh, cut, physics.kappa, disc.ghost_gamma, pinned, triplets,
                              diag);

    const double h = mesh.cell_size();
    const double w_value = disc.penalty_alpha0 * physics.kappa / (h * h * h);
    const double w_grad = disc.penalty_alpha1 * physics.kappa / h;

    struct PointTarget {
        Vec2 pos;
        double weight;
        Vec2 value;
        Mat2 jac;
    };
    std::vector<PointTarget> targets;
    for (int p = 0; p < config.count(); ++p) {
        const Particle& particle = config.particles()[p];
        const auto bq = make_boundary_quadrature(
            particle, disc.boundary_points(particle.radius, h));
        for (std::size_t k = 0; k < bq.points.size(); ++k) {
            PointTarget t{bq.points[k], bq.weights[k], {0.0, 0.0}, Mat2{}};
            if (p == dir.particle) {
                t.value = dir.translation + dir.rotation * quarter_turn(bq.points[k] -
                                                                        particle.center);
                t.jac = dir.rotation * Mat2::rotation_generator();
            }
            targets.push_back(t);
        }
    }

    // Penalty bilinear forms are identical for both components; only the
    // targets differ, so one factorization serves two right-hand sides.
    for (const auto& t : targets) {
        int ci, cj;
        double xi, eta;
        mesh.locate(t.pos, ci, cj, xi, eta);
        const auto basis = bfs_basis(xi, eta, mesh.hx(), mesh.hy());
        const auto dofs = mesh.cell_dofs(ci, cj);
        for (int a = 0; a < 16; ++a) {
            if (pinned[dofs[a]]) continue;
            const double va = basis[a].v;
            const double gxa = basis[a].dx;
            const double gya = basis[a].dy;
            rhs_x[dofs[a]] += 2.0 * t.weight *
                              (w_value * t.value.x * va +
                               w_grad * (t.jac.a11 * gxa + t.jac.a12 * gya));
            rhs_y[dofs[a]] += 2.0 * t.weight *
                              (w_value * t.value.y * va +
                               w_grad * (t.jac.a21 * gxa + t.jac.a22 * gya));
            for (int b = a; b < 16; ++b) {
                if (pinned[dofs[b]]) continue;
                const double val =
                    2.0 * t.weight *
                    (w_value * va * basis[b].v +
                     w_grad * (gxa * basis[b].dx + gya * basis[b].dy));
                const int ga = std::min(dofs[a], dofs[b]);
                const int gb = std::max(dofs[a], dofs[b]);
                if (ga == gb)
                    diag[ga] += val;
                else
                    triplets.emplace_back(ga, gb, val);
            }
        }
    }

    for (int d = 0; d < n; ++d) {
        if (pinned[d] || diag[d] == 0.0) {
            diag[d] = 1.0;
            rhs_x[d] = 0.0;
            rhs_y[d] = 0.0;
        }
        triplets.emplace_back(d, d, diag[d]);
    }
    SpMat matrix(n, n);
    matrix.setFromTriplets(triplets.begin(), triplets.end());

    SpdSolver solver;
    solver.factorize(matrix);
    Eigen::VectorXd dofs_x = solver.solve(rhs_x);
    Eigen::VectorXd dofs_y = solver.solve(rhs_y);

    double residual = 0.0;
    for (const auto& t : targets) {
        int ci, cj;
        double xi, eta;
        mesh.locate(t.pos, ci, cj, xi, eta);
        const FieldValue fx = detail::eval_cell_poly(mesh, dofs_x, ci, cj, xi, eta);
        const FieldValue fy = detail::eval_cell_poly(mesh, dofs_y, ci, cj, xi, eta);
        residual += t.weight * (Vec2{fx.u, fy.u} - t.value).squared_norm();
    }

    return PdeField(std::move(mesh), std::move(cut), config, std::move(dofs_x),
                    std::move(dofs_y), residual);
}

// Directional derivative of M via the representation formula, evaluated with
// the solver's cut quadrature restricted to the support of the field.
template <class Field>
double directional_derivative(const MembraneSolution& sol, const Field& field) {
    const Mesh& mesh = sol.mesh;
    const auto& rule = cell_gauss_rule();
    const double cell_area = mesh.hx() * mesh.hy();
    const double kappa = sol.physics.kappa;
    const double sigma = sol.physics.sigma;
    const SubcellQuad sub = make_subcell_quad(mesh, sol.cut.subsample);

    const auto point_integrand = [&](const std::array<BasisEval, 16>& basis,
                                     const std::array<int, 16>& dofs, const Vec2& x) {
        double gx = 0.0, gy = 0.0, uxx = 0.0, uyy = 0.0, uxy = 0.0;
        for (int a = 0; a < 16; ++a) {
            const double c = sol.dofs[dofs[a]];
            gx += c * basis[a].dx;
            gy += c * basis[a].dy;
            uxx += c * basis[a].dxx;
            uyy += c * basis[a].dyy;
            uxy += c * basis[a].dxy;
        }
        const double lap = uxx + uyy;
        const FieldEval f = field.eval(x);
        const Mat2 a_mat = f.stress_shape();
        const Mat2 hess{uxx, uxy, uxy, uyy};
        const Vec2 grad{gx, gy};
        const double term_bend =
            kappa * lap * (a_mat.ddot(hess) - f.lap.dot(grad) - 0.5 * f.divergence() * lap);
        return term_bend + 0.5 * sigma * (a_mat * grad).dot(grad);
    };

    double total = 0.0;
    for (int cj = 0; cj < mesh.ny(); ++cj) {
        for (int ci = 0; ci < mesh.nx(); ++ci) {
            const int cell = mesh.cell_index(ci, cj);
            if (sol.cut.kind[cell] == CellKind::Particle) continue;
            if (!field.cell_in_support(mesh, ci, cj)) continue;
            const Vec2 origin = mesh.cell_origin(ci, cj);
            const auto dofs = mesh.cell_dofs(ci, cj);
            if (sol.cut.kind[cell] == CellKind::Cut) {
                const auto& mask = sol.cut.masks[sol.cut.cut_index[cell]];
                double cell_sum = 0.0;
                for (std::size_t p = 0; p < mask.size(); ++p) {
                    if (!mask[p]) continue;
                    cell_sum += point_integrand(sub.basis[p], dofs, origin + sub.offsets[p]);
                }
                total += sub.weight * cell_sum;
            } else {
                double cell_sum = 0.0;
                for (int g = 0; g < 16; ++g) {
                    const Vec2 x{origin.x + rule[g].xi * mesh.hx(),
                                 origin.y + rule[g].eta * mesh.hy()};
                    cell_sum += rule[g].weight * point_integrand(mesh.basis_at_gauss(g), dofs, x);
                }
                total += cell_area * cell_sum;
            }
        }
    }
    return total;
}

inline Direction component_direction(int component) {
    const int i = component / 3;
    switch (component % 3) {
        case 0: return Direction::translate_x(i);
        case 1: return Direction::translate_y(i);
        default: return Direction::rotate(i);
    }
}

inline std::string component_label(int component) {
    const std::string idx = std::to_string(component / 3 + 1);
    switch (component % 3) {
        case 0: return "x" + idx;
        case 1: return "y" + idx;
        default: return "alpha" + idx;
    }
}

// Full gradient of M in R^{3N}: one membrane solve, 3N directional
// derivatives with cutoff fields over the shared immutable solution.
inline std::vector<double> gradient_from_solution(const MembraneSolution& sol) {
    const int n = 3 * sol.config.count();
    std::vector<double> grad(n, 0.0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t c) {
        const auto field =
            build_cutoff_field(sol.config, component_direction(static_cast<int>(c)));
        grad[c] = directional_derivative(sol, field);
    });
    return grad;
}

inline std::vector<double> gradient(const ParticleConfig& config,
                                    const PhysicsParams& physics,
                                    const Discretization& disc) {
    const MembraneSolution sol = solve_membrane(config, physics, disc);
    return gradient_from_solution(sol);
}

// ---------------------------------------------------------------------------
// Finite-difference cross-check of the representation formula.

struct FdCheckRow {
    std::string component;
    int nx;
    double fd_step;
    double grad_rep;
    double fd_value;
    double rel_mismatch;
};

struct FdCheckReport {
    std::vector<FdCheckRow> rows;

    // Smallest relative mismatch over the step sweep, per component.
    double best_mismatch(const std::string& component, int nx) const {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : rows)
            if (r.component == component && r.nx == nx)
                best = std::min(best, r.rel_mismatch);
        return best;
    }
};

inline ParticleConfig shift_coordinate(const ParticleConfig& config, int component,
                                       double delta) {
    std::vector<Particle> particles = config.particles();
    Particle& p = particles[component / 3];
    switch (component % 3) {
        case 0: p.center.x += delta; break;
        case 1: p.center.y += delta; break;
        default: p.angle += delta; break;
    }
    return make_configuration(config.domain(), std::move(particles));
}

inline FdCheckReport fd_check(const ParticleConfig& config, const PhysicsParams& physics,
                              const Discretization& disc, const std::vector<double>& steps,
                              const std::vector<int>& resolutions = {}) {
    std::vector<int> nx_list = resolutions;
    if (nx_list.empty()) nx_list.push_back(disc.nx);
    FdCheckReport report;
    for (int nx : nx_list) {
        Discretization level = disc;
        level.nx = nx;
        level.ny = nx;
        const MembraneSolution sol = solve_membrane(config, physics, level);
        const auto grad = gradient_from_solution(sol);
        for (int c = 0; c < 3 * config.count(); ++c) {
            for (double step : steps) {
                const double m_plus = energy(
                    solve_membrane(shift_coordinate(config, c, step), physics, level));
                const double m_minus = energy(
                    solve_membrane(shift_coordinate(config, c, -step), physics, level));
                const double fd = (m_plus - m_minus) / (2.0 * step);
                const double denom = std::max(std::abs(fd), 1e-300);
                report.rows.push_back({component_label(c), nx, step, grad[c], fd,
                                       std::abs(grad[c] - fd) / denom});
            }
        }
    }
    return report;
}

inline void write_fd_check_csv(const FdCheckReport& report, std::ostream& out) {
    out << "component,nx,fd_step,grad_rep,fd_value,rel_mismatch\n";
    for (const auto& r : report.rows)
        out << r.component << ',' << r.nx << ',' << format_double(r.fd_step) << ','
            << format_double(r.grad_rep) << ',' << format_double(r.fd_value) << ','
            << format_double(r.rel_mismatch) << '\n';
}

}  // namespace memfep
