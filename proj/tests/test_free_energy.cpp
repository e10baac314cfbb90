#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "memfep/free_energy.hpp"
#include "oracles.hpp"

using namespace memfep;

namespace {

SystemModel dimer_model(double beta, double sigma_lj = 2.0, double eps_lj = 1.0) {
    SystemModel m;
    m.domain = {40, 40};
    const double d = 2.0 + std::pow(2.0, 1.0 / 6.0) * sigma_lj;
    m.particles = {Particle{{20 - d / 2, 20}, 0, 1, {}}, Particle{{20 + d / 2, 20}, 0, 1, {}}};
    m.physics = {1.0, 0.0, beta};
    m.softwall = SoftWallParams::uniform(2, eps_lj, sigma_lj, 1e-2);
    m.use_membrane = false;
    return m;
}

}  // namespace

TEST_CASE("dF(0) is exactly zero for every protocol", "[fep]") {
    const auto model = dimer_model(2.0);
    SamplerParams params;
    params.tau = 2e-3;
    params.beta = 2.0;
    params.steps = 50;
    params.seed = 8;
    const auto traj = run_chain(model, params);
    for (const char* name :
         {"identity", "lj-scale", "tension-scale", "rigidity-scale", "slope-scale",
          "height-scale"}) {
        const auto protocol = PerturbationProtocol::from_name(name);
        const auto entry = zwanzig_estimate(model, protocol, 0.0, traj.states, traj.energies);
        REQUIRE(entry.dF_hat == 0.0);
        REQUIRE(entry.a_hat == 1.0);
    }
}

TEST_CASE("identity protocol yields a zero curve", "[fep]") {
    const auto model = dimer_model(2.0);
    SamplerParams params;
    params.tau = 2e-3;
    params.beta = 2.0;
    params.steps = 40;
    params.seed = 9;
    const auto traj = run_chain(model, params);
    const auto curve = fed_curve(model, PerturbationProtocol::from_name("identity"),
                                 {-0.5, 0.0, 0.5}, traj);
    REQUIRE(curve.entries.size() == 3);
    for (const auto& e : curve.entries) {
        REQUIRE(e.dF_hat == 0.0);
        REQUIRE_FALSE(e.degenerate);
    }
}

TEST_CASE("constant energy shift reproduces dF = c exactly", "[fep]") {
    const double beta = 1.7, c = 0.42;
    const auto curve = fed_curve_custom(beta, {0.0, 0.5}, 128,
                                        [&](std::size_t, double omega) {
                                            return omega == 0.0 ? 0.0 : c;
                                        });
    REQUIRE(curve.entries[0].dF_hat == 0.0);
    REQUIRE(curve.entries[1].dF_hat == Catch::Approx(c).epsilon(1e-14));
}

TEST_CASE("zwanzig observable matches the direct formula for lj-scale", "[fep]") {
    const auto model = dimer_model(1.3);
    const auto q = model.initial_state();
    const double e0 = model.eval(q, false).energy;
    const auto protocol = PerturbationProtocol::from_name("lj-scale");
    const double omega = 0.3;
    const double p1 = pair_potential(model.config_at(q), model.softwall);
    const double expected = std::exp(-model.physics.beta * omega * p1);
    REQUIRE(zwanzig_observable(model, protocol, omega, q, e0) ==
            Catch::Approx(expected).epsilon(1e-12));
    REQUIRE(zwanzig_observable(model, protocol, 0.0, q, e0) == 1.0);
}

TEST_CASE("rigidity scaling is linear in kappa at sigma = 0", "[fep]") {
    SystemModel m;
    m.domain = {10, 10};
    Particle p1{{3.6, 4.7}, 0.2, 1.0, {}};
    p1.profile.slope = FourierSeries{0.3, 0.1};
    Particle p2{{6.6, 5.4}, 0.0, 1.0, {}};
    p2.profile.height = FourierSeries{0.0, 0.15};
    p2.profile.slope = FourierSeries{0.2};
    m.particles = {p1, p2};
    m.physics = {1.5, 0.0, 1.0};  // sigma = 0
    m.softwall = SoftWallParams::uniform(2, 0.5, 1.0, 1.0);
    m.disc.nx = m.disc.ny = 32;
    m.use_membrane = true;

    const auto q = m.initial_state();
    const auto ref = m.eval(q, false);
    const auto protocol = PerturbationProtocol::from_name("rigidity-scale");
    for (double omega : {-0.4, 0.25, 0.6}) {
        // fresh solve with scaled kappa vs the analytic omega * M(q)
        const double delta = perturbation_delta(m, protocol, omega, q, ref.energy);
        REQUIRE(delta == Catch::Approx(omega * ref.membrane_part).epsilon(1e-9));
    }
}

TEST_CASE("gaussian toy curve matches the analytic free energy", "[fep]") {
    const double beta = 1.0;
    SamplerParams params;
    params.tau = 1e-2;
    params.beta = beta;
    params.steps = 100000;
    params.seed = 424242;
    const auto traj = run_chain(ToyGaussianModel{}, params);
    const std::vector<double> omegas = {-0.5, -0.25, 0.0, 0.25, 0.5};
    const auto curve = fed_curve_custom(beta, omegas, traj.states.size(),
                                        [&](std::size_t k, double omega) {
                                            const double q = traj.states[k][0];
                                            return omega * 0.5 * q * q;
                                        });
    for (const auto& e : curve.entries) {
        if (e.omega == 0.0) {
            REQUIRE(e.dF_hat == 0.0);
            continue;
        }
        const double exact = oracles::gaussian_toy_df(beta, e.omega);
        REQUIRE_FALSE(e.degenerate);
        REQUIRE(std::abs(e.dF_hat - exact) <= e.ci_half_width);
    }
}

TEST_CASE("lj-scale dimer curve matches the radial Gibbs quadrature", "[fep]") {
    const double beta = 8.0, sigma_lj = 2.0, eps_lj = 1.0;
    const auto model = dimer_model(beta, sigma_lj, eps_lj);
    SamplerParams params;
    params.tau = 2e-3;
    params.beta = beta;
    params.steps = 200000;
    params.seed = 99991;
    const auto traj = run_chain(model, params);

    const std::vector<double> omegas = {-0.25, 0.0, 0.25};
    const auto protocol = PerturbationProtocol::from_name("lj-scale");
    const auto curve = fed_curve(model, protocol, omegas, traj);

    // radial density oracle: pair distance d with weight e^{-beta P1(d)} d dd
    const auto p1_of = [&](double d) {
        const double s6 = std::pow(sigma_lj / d, 6);
        return 2.0 * 4.0 * eps_lj * (s6 * s6 - s6);
    };
    const auto ratio = [&](double omega) {
        const double lo = 0.8 * sigma_lj, hi = 8.0 * sigma_lj;
        const int n = 200000;
        double num = 0.0, den = 0.0;
        for (int k = 0; k <= n; ++k) {
            const double d = lo + (hi - lo) * k / n;
            const double w = (k == 0 || k == n) ? 0.5 : 1.0;
            const double p1 = p1_of(d);
            den += w * std::exp(-beta * p1) * d;
            num += w * std::exp(-beta * (1.0 + omega) * p1) * d;
        }
        return num / den;
    };
    for (const auto& e : curve.entries) {
        if (e.omega == 0.0) {
            REQUIRE(e.dF_hat == 0.0);
            continue;
        }
        const double exact = -std::log(ratio(e.omega)) / beta;
        REQUIRE_FALSE(e.degenerate);
        REQUIRE(std::abs(e.dF_hat - exact) <= 3.0 * e.ci_half_width);
    }
}

TEST_CASE("block variance: constants, iid accuracy, correlated floors", "[fep]") {
    // constant weights -> zero variance
    const std::vector<double> constant(1000, 0.7);
    const auto bv = block_variance(constant, 10, 1.0);
    REQUIRE(bv.variance == Catch::Approx(0.0).margin(1e-28));

    // iid weights: block estimate close to s^2 / n
    const auto iid = oracles::ar1_series(10000, 0.0, 77);
    std::vector<double> weights;
    for (double x : iid) weights.push_back(std::exp(0.3 * x));
    double mean = 0.0;
    for (double w : weights) mean += w;
    mean /= weights.size();
    double s2 = 0.0;
    for (double w : weights) s2 += (w - mean) * (w - mean);
    s2 /= (weights.size() - 1);
    const double exact_var_of_mean = s2 / weights.size();
    const auto bvi = block_variance(weights, 100, 1.0);
    REQUIRE(bvi.variance == Catch::Approx(exact_var_of_mean).epsilon(0.2));

    // AR(1) stream: growing blocks must not fall below the iid estimate
    const auto corr = oracles::ar1_series(100000, 0.9, 13);
    std::vector<double> cw;
    for (double x : corr) cw.push_back(1.0 + 0.1 * x);
    const double iid_level = block_variance(cw, 1, 1.0).variance;
    for (long bs : {64, 128, 256})
        REQUIRE(block_variance(cw, bs, 1.0).variance > iid_level);

    REQUIRE_THROWS_AS(block_variance(std::vector<double>(5, 1.0), 5, 1.0),
                      TooFewBlocksError);
}

TEST_CASE("Jensen bound holds on every estimate", "[fep]") {
    const auto deltas = oracles::ar1_series(5000, 0.5, 5);
    const auto curve =
        fed_curve_custom(2.0, {0.0, 1.0}, deltas.size(),
                         [&](std::size_t k, double omega) { return omega * deltas[k]; });
    const auto& e = curve.entries[1];
    double mean = 0.0;
    for (double d : deltas) mean += d;
    mean /= deltas.size();
    REQUIRE(e.mean_delta_e == Catch::Approx(mean).epsilon(1e-12));
    REQUIRE(e.dF_hat <= e.mean_delta_e + 1e-12);
}

TEST_CASE("concatenating equal chains averages the weight mean", "[fep]") {
    const auto d1 = oracles::ar1_series(4000, 0.3, 21);
    const auto d2 = oracles::ar1_series(4000, 0.3, 22);
    std::vector<double> cat = d1;
    cat.insert(cat.end(), d2.begin(), d2.end());
    const double beta = 1.5;
    const auto entry_of = [&](const std::vector<double>& ds) {
        return fed_curve_custom(beta, {0.0, 0.5}, ds.size(),
                                [&](std::size_t k, double omega) { return omega * ds[k]; })
            .entries[1];
    };
    const double a1 = entry_of(d1).a_hat;
    const double a2 = entry_of(d2).a_hat;
    const double ac = entry_of(cat).a_hat;
    REQUIRE(ac == Catch::Approx(0.5 * (a1 + a2)).epsilon(1e-12));
}

TEST_CASE("degenerate weights are detected", "[fep]") {
    // one dominant weight -> effective sample size ~ 1
    std::vector<double> deltas(100, 500.0);
    deltas[0] = 0.0;
    const auto curve = fed_curve_custom(1.0, {0.0, 1.0}, deltas.size(),
                                        [&](std::size_t k, double omega) {
                                            return omega * deltas[k];
                                        });
    REQUIRE(curve.entries[1].degenerate);
    REQUIRE_FALSE(curve.entries[0].degenerate);

    // the single-omega surface throws on degeneracy
    auto model = dimer_model(50.0);
    std::vector<std::vector<double>> states(100, model.initial_state());
    states[0][3] += 10.0;  // one state far from the LJ well dominates under lj-scale
    std::vector<double> energies(states.size());
    for (std::size_t k = 0; k < states.size(); ++k)
        energies[k] = model.eval(states[k], false).energy;
    const auto protocol = PerturbationProtocol::from_name("lj-scale");
    REQUIRE_THROWS_AS(zwanzig_estimate(model, protocol, -1.0, states, energies),
                      DegenerateEstimateError);

    // grid without 0 is rejected outright
    REQUIRE_THROWS_AS(
        fed_curve_custom(1.0, {0.5}, 10, [](std::size_t, double) { return 0.0; }),
        ConfigError);
}

TEST_CASE("reaction coordinate domain is enforced", "[fep]") {
    REQUIRE_THROWS_AS(fed_curve_custom(1.0, {0.0, 1.5}, 10,
                                       [](std::size_t, double) { return 0.0; }),
                      ConfigError);
    const auto model = dimer_model(1.0);
    REQUIRE_THROWS_AS(perturbation_delta(model, PerturbationProtocol::from_name("lj-scale"),
                                         1.2, model.initial_state(), 0.0),
                      ConfigError);
}

TEST_CASE("fep csv has the fixed header", "[fep]") {
    const auto curve = fed_curve_custom(1.0, {0.0}, 16,
                                        [](std::size_t, double) { return 0.0; });
    std::ostringstream out;
    write_fep_csv(curve, out);
    REQUIRE(out.str().rfind("omega,A_hat,dF_hat,variance,ci_half_width,n_effective\n", 0) ==
            0);
}
