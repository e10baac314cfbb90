// Acceptance suite: one test case and one printed pass/fail line per
// criterion. Configurations and tolerances are pinned here.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "memfep/memfep.hpp"
#include "oracles.hpp"

using namespace memfep;

namespace {

struct Criterion {
    int id;
    std::string name;
    std::vector<std::string> failures;

    void check(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void finish() {
        if (failures.empty()) {
            std::cout << "[criterion " << id << "] " << name << ": PASS" << std::endl;
        } else {
            std::cout << "[criterion " << id << "] " << name << ": FAIL";
            for (const auto& f : failures) std::cout << " | " << f;
            std::cout << std::endl;
        }
        INFO("criterion " << id << " failures: " << failures.size());
        for (const auto& f : failures) UNSCOPED_INFO(f);
        REQUIRE(failures.empty());
    }
};

std::string num(double v) { return format_double(v); }

Discretization disc_of(int nx, int s) {
    Discretization d;
    d.nx = d.ny = nx;
    d.subsample = s;
    return d;
}

}  // namespace

TEST_CASE("criterion 1: flat-state exactness", "[acceptance]") {
    Criterion crit{1, "flat-state exactness (u = 0, M = 0, grad M = 0)"};
    for (int nx : {24, 48}) {
        auto cfg = make_configuration(
            Domain{10, 10},
            {Particle{{4.2, 5.1}, 0.4, 1.0, {}}, Particle{{6.9, 5.6}, -0.7, 0.8, {}}});
        const auto sol = solve_membrane(cfg, {1.0, 1.0, 1.0}, disc_of(nx, 8));
        const double m = energy(sol);
        const auto grad = gradient_from_solution(sol);
        crit.check(sol.dofs.cwiseAbs().maxCoeff() <= 1e-10,
                   "nx=" + std::to_string(nx) + ": |u| = " +
                       num(sol.dofs.cwiseAbs().maxCoeff()));
        crit.check(std::abs(m) <= 1e-10, "nx=" + std::to_string(nx) + ": M = " + num(m));
        for (double g : grad)
            crit.check(std::abs(g) <= 1e-10,
                       "nx=" + std::to_string(nx) + ": grad component " + num(g));
    }
    crit.finish();
}

TEST_CASE("criterion 2: solver self-convergence", "[acceptance]") {
    Criterion crit{2, "solver self-convergence on nx in {32,64,128,256}"};
    Particle p{{4.37, 5.23}, 0.0, 1.0, {}};
    p.profile.slope = FourierSeries{0.3};
    const auto cfg = make_configuration(Domain{10, 10}, {p});
    const PhysicsParams phys{1.0, 1.0, 1.0};

    std::vector<double> m_values;
    for (int nx : {32, 64, 128, 256})
        m_values.push_back(energy(solve_membrane(cfg, phys, disc_of(nx, 16))));

    std::vector<double> deltas;
    for (std::size_t k = 1; k < m_values.size(); ++k)
        deltas.push_back(std::abs(m_values[k] - m_values[k - 1]));
    for (std::size_t k = 1; k < deltas.size(); ++k)
        crit.check(deltas[k] < deltas[k - 1],
                   "deltas not monotone: " + num(deltas[k - 1]) + " -> " + num(deltas[k]));
    crit.check(deltas.back() <= 0.01 * std::abs(m_values.back()),
               "final delta " + num(deltas.back()) + " vs 1% of M = " +
                   num(0.01 * std::abs(m_values.back())));
    std::cout << "  M: " << num(m_values[0]) << " " << num(m_values[1]) << " "
              << num(m_values[2]) << " " << num(m_values[3]) << "; deltas: "
              << num(deltas[0]) << " " << num(deltas[1]) << " " << num(deltas[2]) << '\n';
    crit.finish();
}

TEST_CASE("criterion 3: gradient consistency against central differences",
          "[acceptance]") {
    Criterion crit{3, "gradient matches best central FD within 2% at nx=128, s=16"};
    Particle p1{{3.4, 4.5}, 0.3, 1.0, {}};
    p1.profile.height = FourierSeries{0.0, 0.2, 0.0};
    p1.profile.slope = FourierSeries{0.3, 0.0, 0.15};
    Particle p2{{6.6, 5.5}, -0.2, 1.0, {}};
    p2.profile.height = FourierSeries{0.0, 0.0, 0.25};
    p2.profile.slope = FourierSeries{0.25, -0.15, 0.0};
    const auto cfg = make_configuration(Domain{10, 10}, {p1, p2});
    const PhysicsParams phys{1.0, 1.0, 1.0};

    const std::vector<int> levels = {64, 128, 256};
    std::vector<double> worst(levels.size(), 0.0);
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const std::vector<double> steps =
            levels[l] == 256 ? std::vector<double>{1e-2, 1e-3}
                             : std::vector<double>{1e-2, 3e-3, 1e-3};
        const auto report = fd_check(cfg, phys, disc_of(levels[l], 16), steps);
        for (int c = 0; c < 6; ++c)
            worst[l] = std::max(worst[l],
                                report.best_mismatch(component_label(c), levels[l]));
        std::cout << "  nx=" << levels[l] << " worst best-mismatch = " << num(worst[l])
                  << '\n';
    }
    crit.check(worst[1] <= 0.02,
               "worst mismatch at nx=128 is " + num(worst[1]) + " > 2%");
    for (std::size_t l = 1; l < levels.size(); ++l)
        crit.check(worst[l] < worst[l - 1],
                   "mismatch did not decrease: nx=" + std::to_string(levels[l - 1]) + " " +
                       num(worst[l - 1]) + " -> nx=" + std::to_string(levels[l]) + " " +
                       num(worst[l]));
    crit.finish();
}

TEST_CASE("criterion 4: symmetry invariants of the gradient", "[acceptance]") {
    Criterion crit{4, "mirror-antisymmetric gradient, vanishing rotation components"};
    Particle p1{{3.5, 5.0}, 0.0, 1.0, {}};
    p1.profile.height = FourierSeries{0.1};
    p1.profile.slope = FourierSeries{0.3};
    Particle p2 = p1;
    p2.center = {6.5, 5.0};
    const auto cfg = make_configuration(Domain{10, 10}, {p1, p2});
    const auto sol = solve_membrane(cfg, {1.0, 1.0, 1.0}, disc_of(96, 16));
    const auto g = gradient_from_solution(sol);
    double norm = 0.0;
    for (double v : g) norm += v * v;
    norm = std::sqrt(norm);
    const double tol = 1e-6 * (1.0 + norm);

    crit.check(std::abs(g[0] + g[3]) <= 1e-6 * std::abs(g[0]),
               "x components not antisymmetric: " + num(g[0]) + " vs " + num(g[3]));
    crit.check(std::abs(g[1] - g[4]) <= tol,
               "y components differ: " + num(g[1]) + " vs " + num(g[4]));
    crit.check(std::abs(g[2]) <= tol, "rotation component 1 = " + num(g[2]));
    crit.check(std::abs(g[5]) <= tol, "rotation component 2 = " + num(g[5]));
    std::cout << "  grad = [" << num(g[0]) << ", " << num(g[1]) << ", " << num(g[2])
              << ", " << num(g[3]) << ", " << num(g[4]) << ", " << num(g[5]) << "]\n";
    crit.finish();
}

namespace {

struct FreeModel {
    int d;
    int dim() const { return d; }
    std::vector<double> initial_state() const { return std::vector<double>(d, 0.0); }
    bool feasible(const std::vector<double>&) const { return true; }
    PotentialEval eval(const std::vector<double>&, bool with_gradient) const {
        PotentialEval out;
        if (with_gradient) out.gradient.assign(d, 0.0);
        return out;
    }
};

}  // namespace

TEST_CASE("criterion 5: sampler noise law and reproducibility", "[acceptance]") {
    Criterion crit{5, "increment variance = 2 tau / beta; byte-identical reruns"};
    SamplerParams params;
    params.tau = 0.05;
    params.beta = 1.7;
    params.steps = 100000;
    params.seed = 20240817;
    FreeModel model{6};
    const auto traj = run_chain(model, params);
    const double expected = 2.0 * params.tau / params.beta;
    const double se = expected * std::sqrt(2.0 / (params.steps - 1.0));
    for (int c = 0; c < 6; ++c) {
        double var = 0.0;
        for (long k = 1; k <= params.steps; ++k) {
            const double inc = traj.states[k][c] - traj.states[k - 1][c];
            var += inc * inc;
        }
        var /= static_cast<double>(params.steps - 1);
        crit.check(std::abs(var - expected) <= 3.0 * se,
                   "coordinate " + std::to_string(c) + ": variance " + num(var) +
                       " vs " + num(expected) + " +- " + num(3.0 * se));
    }

    const auto traj2 = run_chain(model, params);
    std::ostringstream c1, c2;
    write_trajectory_csv(traj, generic_state_labels(6), c1);
    write_trajectory_csv(traj2, generic_state_labels(6), c2);
    crit.check(c1.str() == c2.str(), "trajectory bytes differ between reruns");
    crit.finish();
}

TEST_CASE("criterion 6: Euler-Maruyama stationary-variance bias law", "[acceptance]") {
    Criterion crit{6, "1D quadratic: variance bias shrinks as tau halves"};
    const double beta = 2.0;
    std::vector<double> errors;
    for (double tau : {4e-2, 2e-2, 1e-2}) {
        NormalStream rng(1234u);
        const double scale = std::sqrt(2.0 * tau / beta);
        const long n_eff_target = 4000000;
        const long burn = static_cast<long>(30.0 / tau);
        const long steps = static_cast<long>(n_eff_target / tau);
        double q = 0.0, sum_sq = 0.0;
        for (long k = 0; k < burn + steps; ++k) {
            q = q - tau * q + scale * rng.normal();
            if (k >= burn) sum_sq += q * q;
        }
        const double var = sum_sq / steps;
        errors.push_back(std::abs(var - 1.0 / beta));
        std::cout << "  tau=" << num(tau) << " var=" << num(var) << " err="
                  << num(errors.back()) << '\n';
    }
    for (std::size_t k = 1; k < errors.size(); ++k)
        crit.check(errors[k] < errors[k - 1],
                   "error did not shrink: " + num(errors[k - 1]) + " -> " + num(errors[k]));
    crit.finish();
}

TEST_CASE("criterion 7: Zwanzig exactness and the Gaussian toy", "[acceptance]") {
    Criterion crit{7, "dF(0) = 0, constant shift exact, Gaussian toy within CI"};
    // exactness at omega = 0 and for constant shifts
    const auto shifted = fed_curve_custom(
        1.7, {0.0, 0.5}, 256, [](std::size_t, double w) { return w == 0.0 ? 0.0 : 0.37; });
    crit.check(shifted.entries[0].dF_hat == 0.0, "dF(0) != 0");
    crit.check(std::abs(shifted.entries[1].dF_hat - 0.37) <= 1e-13,
               "constant shift: " + num(shifted.entries[1].dF_hat) + " != 0.37");

    const double beta = 1.0;
    SamplerParams params;
    params.tau = 1e-2;
    params.beta = beta;
    params.steps = 100000;
    params.seed = 7777;
    const auto traj = run_chain(ToyGaussianModel{}, params);
    const auto curve =
        fed_curve_custom(beta, {-0.5, -0.25, 0.0, 0.25, 0.5}, traj.states.size(),
                         [&](std::size_t k, double omega) {
                             return omega * 0.5 * traj.states[k][0] * traj.states[k][0];
                         });
    for (const auto& e : curve.entries) {
        if (e.omega == 0.0) {
            crit.check(e.dF_hat == 0.0, "toy dF(0) != 0");
            continue;
        }
        const double exact = oracles::gaussian_toy_df(beta, e.omega);
        crit.check(std::abs(e.dF_hat - exact) <= e.ci_half_width,
                   "omega " + num(e.omega) + ": dF " + num(e.dF_hat) + " vs " + num(exact) +
                       " +- " + num(e.ci_half_width));
        std::cout << "  omega=" << num(e.omega) << " dF=" << num(e.dF_hat)
                  << " exact=" << num(exact) << " hw=" << num(e.ci_half_width) << '\n';
    }
    crit.finish();
}

TEST_CASE("criterion 8: end-to-end membrane FEP smoke", "[acceptance]") {
    Criterion crit{8, "membrane chain + rigidity-scale curve: feasible, monotone, Jensen"};
    SystemModel model;
    model.domain = {10, 10};
    Particle p1{{3.8, 4.8}, 0.0, 1.0, {}};
    p1.profile.slope = FourierSeries{0.3};
    Particle p2{{6.4, 5.3}, 0.0, 1.0, {}};
    p2.profile.slope = FourierSeries{0.3};
    model.particles = {p1, p2};
    model.physics = {1.0, 0.0, 1.0};  // sigma = 0: weights are exp(-beta omega M)
    model.softwall = SoftWallParams::uniform(2, 0.5, 0.8, 0.8);
    model.disc = disc_of(48, 8);
    model.use_membrane = true;

    SamplerParams params;
    params.tau = 1e-3;
    params.beta = model.physics.beta;
    params.steps = 500;
    params.seed = 99;
    const auto traj = run_chain(model, params);
    crit.check(traj.states.size() == 501, "chain did not complete");
    bool all_feasible = true;
    for (const auto& q : traj.states) all_feasible = all_feasible && model.feasible(q);
    crit.check(all_feasible, "infeasible state in the chain");

    const auto protocol = PerturbationProtocol::from_name("rigidity-scale");
    const auto curve = fed_curve(model, protocol, {0.0, 0.2, 0.4}, traj);
    crit.check(curve.entries[0].dF_hat == 0.0, "dF(0) != 0");
    for (std::size_t k = 1; k < curve.entries.size(); ++k)
        crit.check(curve.entries[k].dF_hat >= curve.entries[k - 1].dF_hat,
                   "dF not monotone at omega " + num(curve.entries[k].omega));
    for (const auto& e : curve.entries) {
        crit.check(!e.degenerate, "degenerate estimate at omega " + num(e.omega));
        crit.check(e.dF_hat <= e.mean_delta_e + 1e-12,
                   "Jensen bound violated at omega " + num(e.omega));
        std::cout << "  omega=" << num(e.omega) << " dF=" << num(e.dF_hat)
                  << " mean_dE=" << num(e.mean_delta_e) << " ess=" << num(e.n_effective)
                  << '\n';
    }
    crit.finish();
}

TEST_CASE("criterion 9: cutoff field vs PDE-built field", "[acceptance]") {
    Criterion crit{9, "cross-method directional derivatives agree within 2% at nx=128"};
    Particle p{{2.4, 2.9}, -0.5, 1.0,
               {FourierSeries{0.0, 0.3, 0.2}, FourierSeries{0.2, 0.25, -0.1}}};
    const auto cfg = make_configuration(Domain{10, 10}, {p});
    const PhysicsParams phys{1.0, 1.0, 1.0};
    const Discretization disc = disc_of(128, 16);
    const auto sol = solve_membrane(cfg, phys, disc);
    for (int c = 0; c < 3; ++c) {
        const auto dir = component_direction(c);
        const double dc = directional_derivative(sol, build_cutoff_field(cfg, dir));
        const double dp =
            directional_derivative(sol, build_pde_field(cfg, dir, phys, disc));
        const double rel = std::abs(dc - dp) / std::max(std::abs(dc), std::abs(dp));
        std::cout << "  " << component_label(c) << ": cutoff=" << num(dc)
                  << " pde=" << num(dp) << " rel=" << num(rel) << '\n';
        crit.check(rel <= 0.02, component_label(c) + ": relative gap " + num(rel));
    }
    crit.finish();
}
