// hypoheat: solve a single regularised Cauchy problem, run an epsilon sweep,
// or fit an exponent to an existing report.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "hypoheat/hypoheat.hpp"

namespace {

enum ExitCode { kPass = 0, kFailVerdict = 1, kUsage = 2, kNumerical = 3 };

int run_solve(const std::filesystem::path& config_path, const std::filesystem::path& out) {
    using namespace hypoheat;
    const SweepConfig cfg = load_config(config_path);
    const GridPtr grid = cfg.make_grid();
    const DiscreteRockland op = build_canonical_operator(grid);
    const PotentialSpec potential = potential_spec(cfg, grid);
    const InitialSpec u0_spec = initial_spec(cfg, grid);
    const Mollifier psi(grid->dimension());

    Field V(grid), u0(grid);
    if (cfg.epsilon) {
        V = regularize_potential(potential, *cfg.epsilon, cfg.v_schedule(), psi, grid, cfg.quadrature_points);
        u0 = regularize_initial(u0_spec, *cfg.epsilon, cfg.u0_schedule(), psi, grid, cfg.quadrature_points);
    } else {
        const auto sampled = potential.sample(grid);
        if (!sampled) {
            throw ArgumentError("a delta-type potential needs `epsilon` to be regularised");
        }
        V = *sampled;
        u0 = sample_initial(u0_spec, grid);
    }
    const CauchyProblem p{op, V, u0, cfg.T, cfg.dt};
    const Trajectory traj = detail::run_solver(cfg, p);
    write_trajectory(traj, out);
    std::printf("wrote %s (%zu times, final l2 %.6g)\n", (out / "trajectory.csv").c_str(), traj.times.size(),
                traj.norms.back().l2);
    return kPass;
}

int run_sweep(const std::string& experiment, const std::filesystem::path& config_path,
              const std::filesystem::path& out) {
    using namespace hypoheat;
    SweepConfig cfg = load_config(config_path);
    if (experiment == "existence") {
        cfg.experiment = Experiment::Existence;
    } else if (experiment == "uniqueness") {
        cfg.experiment = Experiment::Uniqueness;
    } else {
        cfg.experiment = Experiment::Consistency;
    }
    const SweepReport report = run_experiment(cfg);
    persist_report(report, out);
    std::printf("VERDICT: %s\n", report.verdict.to_string().c_str());
    return report.verdict.passed() ? kPass : kFailVerdict;
}

int run_fit(const std::filesystem::path& in, const std::string& column) {
    const auto pairs = hypoheat::read_report_pairs(in, column);
    const hypoheat::FitResult fit = hypoheat::fit_exponent(pairs);
    std::printf("N=%.17g stderr=%.17g points=%zu\n", fit.exponent, fit.stderr_, fit.points);
    return kPass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regularised heat flows with singular potentials on graded groups"};
    app.require_subcommand(1);

    std::string config, out, experiment, in, column = "norm_sup_t";

    auto* solve = app.add_subcommand("solve", "Single Cauchy solve; writes trajectory.csv");
    solve->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
    solve->add_option("--out", out, "Output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "Epsilon sweep; writes report.csv and manifest.txt");
    sweep->add_option("--experiment", experiment, "Experiment")
        ->required()
        ->check(CLI::IsMember({"existence", "uniqueness", "consistency"}));
    sweep->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--out", out, "Output directory")->required();

    auto* fit = app.add_subcommand("fit", "Fit log(value) against log(1/omega) on a report CSV");
    fit->add_option("--in", in, "Report CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--col", column, "Value column")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kUsage;
    }

    try {
        if (*solve) {
            return run_solve(config, out);
        }
        if (*sweep) {
            return run_sweep(experiment, config, out);
        }
        return run_fit(in, column);
    } catch (const hypoheat::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const hypoheat::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const hypoheat::Error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerical;
    }
}
