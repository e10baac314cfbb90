// memfep: membrane-mediated particle interactions, shape gradients, Langevin
// sampling, and Zwanzig free-energy differences. One JSON config per run;
// subcommands select the pipeline stage.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "memfep/memfep.hpp"

namespace {

std::vector<double> parse_step_list(const std::string& csv) {
    std::vector<double> steps;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        const std::string tok =
            csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!tok.empty()) steps.push_back(memfep::parse_double(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return steps;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"membrane-mediated particle interaction potentials, gradients, "
                 "Langevin sampling, and free-energy differences"};
    app.require_subcommand(1);

    std::string config_path, out_path, vtk_path, traj_path, resume_path;
    std::string fd_steps = "1e-2,1e-3,1e-4";
    std::uint64_t seed = 0;
    long steps = 0;
    int chains = 1;
    bool toy = false;
    bool seed_set = false, steps_set = false;

    auto add_common = [&](CLI::App* cmd, bool needs_out) {
        cmd->add_option("--config", config_path, "JSON run configuration")->required();
        auto* out = cmd->add_option("--out", out_path, "primary output file");
        if (needs_out) out->required();
    };

    auto* solve = app.add_subcommand("solve", "solve the membrane and export the field");
    add_common(solve, true);
    solve->add_option("--vtk", vtk_path, "also write a legacy ASCII structured-grid file");

    auto* energy = app.add_subcommand("energy", "evaluate E(q) = M(q) + P(q)");
    add_common(energy, false);

    auto* grad = app.add_subcommand("grad", "gradients of M, P, E plus the FD check");
    add_common(grad, true);
    grad->add_option("--fd-steps", fd_steps,
                     "comma list of FD steps relative to the smallest radius; empty disables");

    auto* sample = app.add_subcommand("sample", "run seeded Euler-Maruyama chains");
    add_common(sample, true);
    sample->add_option("--seed", seed, "override langevin.seed")->each([&](const std::string&) {
        seed_set = true;
    });
    sample->add_option("--steps", steps, "override langevin.steps")->each([&](const std::string&) {
        steps_set = true;
    });
    sample->add_option("--resume", resume_path, "continue bit-exactly from a checkpoint");
    sample->add_option("--chains", chains, "number of independent seeded chains")
        ->check(CLI::PositiveNumber);
    sample->add_flag("--toy-gaussian", toy)->group("");

    auto* fed = app.add_subcommand("fed", "Zwanzig free-energy differences over omega");
    add_common(fed, true);
    fed->add_option("--traj", traj_path, "reference trajectory CSV")->required();
    fed->add_flag("--toy-gaussian", toy)->group("");

    CLI11_PARSE(app, argc, argv);

    try {
        const memfep::RunConfig cfg = memfep::load_config(config_path);
        std::string summary;
        if (solve->parsed()) {
            summary = memfep::cli::run_solve(cfg, out_path, vtk_path);
        } else if (energy->parsed()) {
            summary = memfep::cli::run_energy(cfg, out_path);
        } else if (grad->parsed()) {
            summary = memfep::cli::run_grad(cfg, out_path, parse_step_list(fd_steps));
        } else if (sample->parsed()) {
            memfep::cli::SampleOptions opts;
            if (seed_set) opts.seed = seed;
            if (steps_set) opts.steps = steps;
            opts.resume_path = resume_path;
            opts.chains = chains;
            opts.toy_gaussian = toy;
            summary = memfep::cli::run_sample(cfg, out_path, opts);
        } else if (fed->parsed()) {
            summary = memfep::cli::run_fed(cfg, traj_path, out_path, toy);
        }
        std::cout << summary << '\n';
        return 0;
    } catch (const memfep::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const memfep::OverlapError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const memfep::EscapesDomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const memfep::SingularSystemError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const memfep::OutsideMembraneError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const memfep::StuckStateError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const memfep::DegenerateEstimateError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
